use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};

use srbounds::analysis::{containment_violations, find_peak, scan_noise, uniform_grid, PeakColumn, ScanTable};
use srbounds::model::{lift_forced_double_well, ForcedDoubleWellParams, ModelFile, SdeModel};
use srbounds::oracles::{
    boltzmann_moments, em_simulate, fp_solve, EmSettings, FpSettings, OracleEstimate,
};
use srbounds::poly::{parse_rational, rational_to_f64, Polynomial, Rational};
use srbounds::sdp::{assemble, sdpa, Relaxation, Sense, SolverSettings};
use srbounds::{Error, Result};

use crate::{
    BoundArgs, Cli, Command, CompareArgs, EmArgs, ExportArgs, ForcingArgs, FpArgs, OracleCommand,
    OracleKind, QuadArgs, ScanArgs, SenseArg, SolverArgs,
};

/// Invalid input of any kind exits with 2; failures during computation or
/// I/O exit with 1.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_)
        | Error::Parse(_)
        | Error::OddObjective(_)
        | Error::ObjectiveDegree { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidModel(_)
        | Error::DimensionMismatch { .. }
        | Error::VariableOutOfRange { .. } => 2,
        Error::Instability(_) | Error::Io(_) | Error::Json(_) => 1,
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// The run configuration embedded in every artifact.
fn run_config(cli: &Cli, argv: &[String]) -> Value {
    json!({
        "tool": "srbounds",
        "version": env!("CARGO_PKG_VERSION"),
        "argv": argv.iter().skip(1).collect::<Vec<_>>(),
        "command": cli.command,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    info!("wrote {}", path.display());
    Ok(())
}

fn params(forcing: &ForcingArgs, noise: &str) -> Result<ForcedDoubleWellParams> {
    ForcedDoubleWellParams::parse(&forcing.amplitude, &forcing.omega, noise)
}

fn solver_settings(s: &SolverArgs) -> Result<SolverSettings> {
    if !(s.tol_feas > 0.0 && s.tol_gap > 0.0) || s.max_iter == 0 {
        return Err(Error::Usage("solver tolerances and --max-iter must be positive".into()));
    }
    Ok(SolverSettings {
        tol_feas: s.tol_feas,
        tol_gap: s.tol_gap,
        max_iter: s.max_iter,
        ..SolverSettings::default()
    })
}

fn load_model(path: Option<&Path>, params: &ForcedDoubleWellParams) -> Result<SdeModel> {
    match path {
        Some(p) => ModelFile::load(p)?.to_model(),
        None => lift_forced_double_well(params),
    }
}

/// Resolves `x1..x4`, `a1`, `b1` against the model's variables; anything
/// else is parsed as a polynomial.
fn resolve_objective(name: &str, model: &SdeModel) -> Result<Polynomial> {
    let names = model.names();
    let expr = match name {
        "x1" | "x2" | "x3" | "x4" => format!("{}^{}", names[0], &name[1..]),
        "a1" | "b1" => {
            if names.len() < 3 {
                return Err(Error::Usage(format!(
                    "objective {name} needs the lifted (X, y, z) model"
                )));
            }
            let other = if name == "a1" { names[1] } else { names[2] };
            format!("{}*{}", names[0], other)
        }
        other => other.to_string(),
    };
    Polynomial::parse(&expr, &names)
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<ExitCode> {
    let config = run_config(cli, argv);
    match &cli.command {
        Command::Bound(a) => cmd_bound(a, config),
        Command::Scan(a) => cmd_scan(a, config),
        Command::Oracle(OracleCommand::Em(a)) => cmd_em(a, config),
        Command::Oracle(OracleCommand::Fp(a)) => cmd_fp(a, config),
        Command::Oracle(OracleCommand::Quad(a)) => cmd_quad(a, config),
        Command::Export(a) => cmd_export(a, config),
        Command::Compare(a) => cmd_compare(a, config),
    }
}

fn cmd_bound(args: &BoundArgs, config: Value) -> Result<ExitCode> {
    let params = params(&args.forcing, &args.noise)?;
    let settings = solver_settings(&args.solver)?;
    let model = load_model(args.model.as_deref(), &params)?;
    let objectives: Vec<(String, Polynomial)> = args
        .objectives
        .iter()
        .map(|name| Ok((name.clone(), resolve_objective(name, &model)?)))
        .collect::<Result<_>>()?;

    let start = Instant::now();
    let relaxation = Relaxation::new(&model, args.d)?;
    for (_, poly) in &objectives {
        relaxation.problem(poly, Sense::Minimize)?;
    }
    info!("assembled and reduced degree-{} relaxation in {:.2}s", args.d, start.elapsed().as_secs_f64());

    let names = model.names();
    let mut results = Vec::new();
    for (name, poly) in &objectives {
        let b = relaxation.bound(name, poly, &settings)?;
        println!(
            "{name} = <{}> d={}: [{:.10}, {:.10}] lower={} upper={} ({:.2}s)",
            poly.display_with(&names),
            b.degree,
            b.lower,
            b.upper,
            b.status_lower,
            b.status_upper,
            b.wall_time_s()
        );
        results.push(b);
    }
    let ok = results.iter().all(|b| b.both_optimal());
    if let Some(out) = &args.out {
        write_json(
            out,
            &json!({
                "config": config,
                "model": ModelFile::from_model(&model),
                "results": results,
            }),
        )?;
    }
    Ok(status(ok))
}

fn parse_grid(text: &str) -> Result<Vec<Rational>> {
    let usage = || Error::Usage(format!("--grid expects lo:hi:n, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(usage());
    };
    let n: usize = n.trim().parse().map_err(|_| usage())?;
    let (lo, hi) = (parse_rational(lo)?, parse_rational(hi)?);
    if n > 1 && lo >= hi {
        return Err(Error::Usage(format!("--grid needs lo < hi, got {text:?}")));
    }
    uniform_grid(&lo, &hi, n).map_err(|e| Error::Usage(e.to_string()))
}

fn run_oracle(
    kind: OracleKind,
    params: &ForcedDoubleWellParams,
    seed: u64,
) -> Result<OracleEstimate> {
    match kind {
        OracleKind::Em => em_simulate(params, &EmSettings { seed, ..EmSettings::for_params(params) }),
        OracleKind::Fp => Ok(fp_solve(params, &FpSettings::default())?.estimate),
    }
}

fn cmd_scan(args: &ScanArgs, config: Value) -> Result<ExitCode> {
    let grid = parse_grid(&args.grid)?;
    let template = params(&args.forcing, &grid[0].to_string())?;
    for d in &grid {
        template.with_noise(d.clone())?;
    }
    let settings = solver_settings(&args.solver)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Error::Usage("--jobs must be >= 1".into()));
    }

    let start = Instant::now();
    info!("scanning {} noise values at d = {} with {jobs} jobs", grid.len(), args.d);
    let mut table = scan_noise(&template, &grid, args.d, &settings, jobs, config)?;
    info!("bounds done in {:.1}s", start.elapsed().as_secs_f64());

    if let Some(kind) = args.oracle {
        let start = Instant::now();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?;
        let estimates: Vec<Result<OracleEstimate>> = pool.install(|| {
            grid.par_iter()
                .map(|d| run_oracle(kind, &template.with_noise(d.clone())?, args.seed))
                .collect()
        });
        for (row, est) in table.rows.iter_mut().zip(estimates) {
            match est {
                Ok(e) => row.oracle = Some(e),
                Err(e) => row.diagnostics.push(format!("oracle failed: {e}")),
            }
        }
        info!("oracle columns done in {:.1}s", start.elapsed().as_secs_f64());
    }

    fs::write(&args.csv, table.to_csv())?;
    info!("wrote {}", args.csv.display());
    let json_table = if args.timings { table.clone() } else { table.without_timings() };
    fs::write(&args.json, json_table.to_json()?)?;
    info!("wrote {}", args.json.display());

    for (label, column) in [("B2", PeakColumn::B2Lower), ("R", PeakColumn::RLower)] {
        match find_peak(&table, column) {
            Ok(p) => println!(
                "peak of {label} lower bound: D = {:.6} value = {:.10} ({})",
                p.noise,
                p.value,
                if p.interior { "interior" } else { "at grid endpoint, not a resonance" }
            ),
            Err(e) => println!("peak of {label} lower bound: none ({e})"),
        }
    }
    let frac = table.fraction_optimal();
    println!(
        "{} of {} rows fully optimal ({:.0}%)",
        table.rows.iter().filter(|r| r.all_optimal()).count(),
        table.rows.len(),
        100.0 * frac
    );
    Ok(status(frac >= 0.9))
}

fn print_estimate(e: &OracleEstimate) {
    let v = e.values;
    println!("P  = {:.10}", v.p);
    println!("a1 = {:.10}", v.a1);
    println!("b1 = {:.10}", v.b1);
    println!("B2 = {:.10}", v.b2());
    if let Some(se) = e.std_err {
        println!("std err: P {:.3e} a1 {:.3e} b1 {:.3e}", se.p, se.a1, se.b1);
    }
    if let Some(px) = e.error_proxy {
        println!("error proxy: P {:.3e} a1 {:.3e} b1 {:.3e}", px.p, px.a1, px.b1);
    }
    for d in &e.diagnostics {
        warn!("{d}");
    }
}

fn cmd_em(args: &EmArgs, config: Value) -> Result<ExitCode> {
    let params = params(&args.forcing, &args.noise)?;
    let period = params.period();
    let settings = EmSettings {
        dt: args.dt,
        t_end: args.periods as f64 * period,
        burn_in: args.burn_in_periods as f64 * period,
        n_paths: args.paths,
        seed: args.seed,
        x0: args.x0,
    };
    let start = Instant::now();
    let est = em_simulate(&params, &settings)?;
    info!("Euler-Maruyama done in {:.2}s", start.elapsed().as_secs_f64());
    print_estimate(&est);
    if let Some(out) = &args.out {
        write_json(out, &json!({ "config": config, "estimate": est }))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fp(args: &FpArgs, config: Value) -> Result<ExitCode> {
    let params = params(&args.forcing, &args.noise)?;
    let settings = FpSettings {
        x_min: -args.half_width,
        x_max: args.half_width,
        n_grid: args.n_grid,
        steps_per_period: args.steps_per_period,
        max_periods: args.max_periods,
        error_proxy: !args.no_error_proxy,
        ..FpSettings::default()
    };
    let start = Instant::now();
    let run = fp_solve(&params, &settings)?;
    info!("Fokker-Planck done in {:.2}s", start.elapsed().as_secs_f64());
    print_estimate(&run.estimate);
    if !run.estimate.converged {
        warn!("Fokker-Planck run did not reach periodic equilibrium");
    }
    if let Some(out) = &args.out {
        let mut doc = json!({ "config": config, "estimate": run.estimate });
        if args.full {
            doc["trajectory"] = json!(run.trajectory);
            doc["grid"] = json!(run.grid);
            doc["density"] = json!(run.density);
        }
        write_json(out, &doc)?;
    }
    Ok(status(run.estimate.converged))
}

fn cmd_quad(args: &QuadArgs, config: Value) -> Result<ExitCode> {
    let noise = parse_rational(&args.noise)?;
    let moments = boltzmann_moments(rational_to_f64(&noise), &args.orders)?;
    for (k, v) in &moments {
        println!("<X^{k}> = {v:.15e}");
    }
    if let Some(out) = &args.out {
        let moments: serde_json::Map<String, Value> =
            moments.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        write_json(out, &json!({ "config": config, "D": noise.to_string(), "moments": moments }))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(args: &ExportArgs, config: Value) -> Result<ExitCode> {
    let params = params(&args.forcing, &args.noise)?;
    let model = load_model(args.model.as_deref(), &params)?;
    let objective = resolve_objective(&args.objective, &model)?;
    let sense = match args.sense {
        SenseArg::Min => Sense::Minimize,
        SenseArg::Max => Sense::Maximize,
    };
    let problem = assemble(&model, args.d, &objective, sense)?;
    let comments = vec![
        "srbounds moment relaxation".to_string(),
        format!("config={config}"),
        format!("objective: {}", objective.display_with(&model.names())),
    ];
    let text = sdpa::to_sdpa_string(&problem, &comments);
    match &args.out {
        Some(path) => {
            fs::write(path, text)?;
            info!(
                "wrote {} ({} moments, block size {}, {} equality rows)",
                path.display(),
                problem.index.num_moments(),
                problem.block_dim(),
                problem.rows.len()
            );
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads an oracle output file written by `oracle em|fp --out`.
fn read_oracle_file(path: &Path) -> Result<OracleEstimate> {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let est = doc
        .get("estimate")
        .ok_or_else(|| Error::Usage(format!("{}: no \"estimate\" field", path.display())))?;
    Ok(serde_json::from_value(est.clone())?)
}

fn estimate_params(est: &OracleEstimate) -> Result<ForcedDoubleWellParams> {
    let p = &est.metadata["params"];
    let field = |k: &str| {
        p[k].as_str()
            .ok_or_else(|| Error::Usage(format!("oracle estimate lacks params.{k}")))
    };
    ForcedDoubleWellParams::parse(field("A")?, field("Omega")?, field("D")?)
}

fn cmd_compare(args: &CompareArgs, config: Value) -> Result<ExitCode> {
    let table = ScanTable::from_json(&fs::read_to_string(&args.table)?)?;
    let scan_forcing = table.config["command"]["scan"]["forcing"].clone();
    let forcing = ForcingArgs {
        amplitude: scan_forcing["amplitude"].as_str().unwrap_or("0.3").to_string(),
        omega: scan_forcing["omega"].as_str().unwrap_or("0.5").to_string(),
    };
    let template = params(&forcing, "1")?;

    let mut estimates: Vec<OracleEstimate> = Vec::new();
    for path in &args.oracles {
        let est = read_oracle_file(path)?;
        let p = estimate_params(&est)?;
        if p.amplitude != template.amplitude || p.omega != template.omega {
            return Err(Error::Usage(format!(
                "{}: forcing parameters differ from the scan table",
                path.display()
            )));
        }
        estimates.push(est);
    }
    estimates.extend(table.rows.iter().filter_map(|r| r.oracle.clone()));
    if let Some(kind) = args.run {
        let noises: Vec<Rational> = table
            .rows
            .iter()
            .filter(|r| r.noise >= args.min_noise)
            .map(|r| parse_rational(&r.noise_exact))
            .collect::<Result<_>>()?;
        let runs: Vec<Result<OracleEstimate>> = noises
            .par_iter()
            .map(|d| run_oracle(kind, &template.with_noise(d.clone())?, args.seed))
            .collect();
        for r in runs {
            estimates.push(r?);
        }
    }

    let mut checks = Vec::new();
    let mut violations = Vec::new();
    let mut skipped = 0;
    for est in &estimates {
        let noise = estimate_params(est)?.noise.to_string();
        let Some(row) = table.rows.iter().find(|r| r.noise_exact == noise) else {
            skipped += 1;
            continue;
        };
        if row.noise < args.min_noise {
            skipped += 1;
            continue;
        }
        let slack = est.uncertainty(args.sigmas);
        let v = est.values;
        let found = containment_violations(row, [v.p, v.a1, v.b1], [slack.p, slack.a1, slack.b1]);
        for msg in &found {
            println!("violation ({:?}): {msg}", est.method);
        }
        checks.push(json!({
            "D": row.noise_exact,
            "method": est.method,
            "values": v,
            "slack": slack,
            "violations": found,
        }));
        violations.extend(found);
    }
    if checks.is_empty() {
        return Err(Error::Usage(
            "nothing to compare: no oracle estimate matches a table row with D >= --min-D".into(),
        ));
    }
    println!(
        "{} checks, {} violations, {skipped} estimates skipped",
        checks.len(),
        violations.len()
    );
    if let Some(out) = &args.out {
        write_json(
            out,
            &json!({ "config": config, "table_config": table.config, "checks": checks }),
        )?;
    }
    Ok(status(violations.is_empty()))
}
