//! Acceptance criteria 1-9. Each test prints one `criterion N: PASS|FAIL`
//! line (visible with `--nocapture`) and fails on FAIL.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use srbounds::analysis::{find_peak, PeakColumn, ScanTable};
use srbounds::model::{lift_forced_double_well, ornstein_uhlenbeck, ForcedDoubleWellParams, SdeModel};
use srbounds::oracles::{boltzmann_moments, em_simulate, fp_solve, EmSettings, FpSettings};
use srbounds::poly::{rational, Polynomial, Rational};
use srbounds::sdp::{BoundResult, Relaxation, SolverSettings};

const A1_REF: (f64, f64) = (0.11655120, 0.11656018);
const B1_REF: (f64, f64) = (0.12600800, 0.12601651);

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {verdict}: {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn bound(model: &SdeModel, d: u32, text: &str) -> BoundResult {
    let obj = Polynomial::parse(text, &model.names()).unwrap();
    Relaxation::new(model, d)
        .unwrap()
        .bound(text, &obj, &SolverSettings::default())
        .unwrap()
}

fn reference_params(noise: Rational) -> ForcedDoubleWellParams {
    ForcedDoubleWellParams::reference(noise).unwrap()
}

fn lifted(noise: Rational) -> SdeModel {
    lift_forced_double_well(&reference_params(noise)).unwrap()
}

fn contains(b: &BoundResult, r: (f64, f64)) -> bool {
    b.both_optimal() && b.lower <= r.0 && r.1 <= b.upper
}

fn srbounds(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srbounds"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_1_ou_exactness() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all_optimal = true;
    for noise in [rational(1, 4), rational(1, 1), rational(4, 1)] {
        let d = srbounds::poly::rational_to_f64(&noise);
        let b = bound(&ornstein_uhlenbeck(noise).unwrap(), 2, "X^2");
        all_optimal &= b.both_optimal();
        worst = worst.max((b.lower - d).abs()).max((b.upper - d).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "OU exactness",
        all_optimal && worst <= 1e-6 && secs < 1.0,
        format!("max |bound - D| = {worst:.3e} (tol 1e-6), {secs:.3}s (limit 1s)"),
    );
}

#[test]
fn criterion_2_circle_marginal() {
    let b = bound(&lifted(rational(1, 2)), 2, "y^2");
    let err = (b.lower - 0.5).abs().max((b.upper - 0.5).abs());
    report(
        2,
        "circle marginal",
        b.both_optimal() && err <= 1e-6,
        format!("<y^2> in [{:.10}, {:.10}], max deviation {err:.3e} (tol 1e-6)", b.lower, b.upper),
    );
}

#[test]
fn criterion_3_unforced_bracket() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for (num, den) in [(1, 5), (1, 2), (1, 1)] {
        let noise = rational(num, den);
        let params = ForcedDoubleWellParams::new(rational(0, 1), rational(1, 2), noise).unwrap();
        let model = lift_forced_double_well(&params).unwrap();
        let exact = boltzmann_moments(params.noise_f64(), &[2, 4]).unwrap();
        for (k, text) in [(2u32, "X^2"), (4, "X^4")] {
            let b6 = bound(&model, 6, text);
            let b8 = bound(&model, 8, text);
            let v = exact[&k];
            let bracket = b6.both_optimal() && b6.lower <= v && v <= b6.upper;
            let (g6, g8) = (b6.upper - b6.lower, b8.upper - b8.lower);
            let nested = b8.both_optimal() && g8 <= g6 + 1e-8;
            pass &= bracket && nested;
            details.push(format!("D={num}/{den} {text}: gap6 {g6:.2e} gap8 {g8:.2e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    report(3, "unforced bracket", pass, format!("{}; {secs:.1}s (limit 60s)", details.join("; ")));
}

#[test]
fn criterion_4_reference_containment() {
    let model = lifted(rational(1, 2));
    let start = Instant::now();
    let relax = Relaxation::new(&model, 8).unwrap();
    let settings = SolverSettings::default();
    let mut results = Vec::new();
    for text in ["X*y", "X*z"] {
        let t = Instant::now();
        let obj = Polynomial::parse(text, &model.names()).unwrap();
        let b = relax.bound(text, &obj, &settings).unwrap();
        results.push((b, t.elapsed().as_secs_f64()));
    }
    let (a1, ta) = &results[0];
    let (b1, tb) = &results[1];
    let setup = start.elapsed().as_secs_f64() - ta - tb;
    let pass = contains(a1, A1_REF) && contains(b1, B1_REF) && ta + setup < 300.0 && tb + setup < 300.0;
    report(
        4,
        "reference interval containment",
        pass,
        format!(
            "a1 in [{:.8}, {:.8}], b1 in [{:.8}, {:.8}]; {:.2}s and {:.2}s per objective plus {setup:.2}s setup",
            a1.lower, a1.upper, b1.lower, b1.upper, ta, tb
        ),
    );
}

#[test]
fn criterion_5_nested_tightening() {
    let model = lifted(rational(1, 2));
    let mut pass = true;
    let mut details = Vec::new();
    for text in ["X*y", "X*z"] {
        let b: Vec<BoundResult> = [4, 6, 8].iter().map(|&d| bound(&model, d, text)).collect();
        let inside = |inner: &BoundResult, outer: &BoundResult| {
            inner.lower >= outer.lower - 1e-7 && inner.upper <= outer.upper + 1e-7
        };
        pass &= b.iter().all(BoundResult::both_optimal) && inside(&b[2], &b[1]) && inside(&b[1], &b[0]);
        details.push(format!(
            "{text}: d4 [{:.6}, {:.6}] d6 [{:.6}, {:.6}] d8 [{:.6}, {:.6}]",
            b[0].lower, b[0].upper, b[1].lower, b[1].upper, b[2].lower, b[2].upper
        ));
    }
    report(5, "nested tightening", pass, details.join("; "));
}

#[test]
fn criterion_6_resonance_peak() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = srbounds(&["scan", "--csv", "scan.csv", "--json", "scan.json"], dir.path());
    let secs = start.elapsed().as_secs_f64();
    let table = ScanTable::from_json(&std::fs::read_to_string(dir.path().join("scan.json")).unwrap()).unwrap();
    let peak = find_peak(&table, PeakColumn::B2Lower).unwrap();
    let pass = o.status.code() == Some(0)
        && table.rows.len() == 20
        && peak.interior
        && (0.2..=0.45).contains(&peak.noise)
        && secs < 7200.0;
    report(
        6,
        "resonance peak",
        pass,
        format!(
            "B2 lower-bound argmax at D = {:.4} (value {:.6}, interior {}), {:.0}% rows optimal, {secs:.1}s",
            peak.noise,
            peak.value,
            peak.interior,
            100.0 * table.fraction_optimal()
        ),
    );
}

#[test]
fn criterion_7_oracle_containment() {
    let mut pass = true;
    let mut details = Vec::new();
    for (num, den) in [(3, 10), (1, 2), (1, 1)] {
        let noise = rational(num, den);
        let params = reference_params(noise.clone());
        let model = lifted(noise);
        let relax = Relaxation::new(&model, 8).unwrap();
        let settings = SolverSettings::default();
        let bounds: Vec<BoundResult> = ["X^2", "X*y", "X*z"]
            .iter()
            .map(|t| {
                let obj = Polynomial::parse(t, &model.names()).unwrap();
                relax.bound(t, &obj, &settings).unwrap()
            })
            .collect();
        let fp = fp_solve(&params, &FpSettings::default()).unwrap().estimate;
        let em = em_simulate(&params, &EmSettings::for_params(&params)).unwrap();
        for est in [&fp, &em] {
            let slack = est.uncertainty(3.0);
            let v = est.values;
            for (k, (value, s)) in [(v.p, slack.p), (v.a1, slack.a1), (v.b1, slack.b1)].into_iter().enumerate() {
                let b = &bounds[k];
                let ok = b.both_optimal() && b.lower - s <= value && value <= b.upper + s;
                if !ok {
                    details.push(format!(
                        "D={num}/{den} {:?} {}: {value:.8} outside [{:.8}, {:.8}] +- {s:.2e}",
                        est.method, b.objective, b.lower, b.upper
                    ));
                }
                pass &= ok;
            }
            pass &= est.converged;
        }
    }
    let summary = if details.is_empty() {
        "FP and EM estimates inside widened d=8 intervals at D = 0.3, 0.5, 1.0".to_string()
    } else {
        details.join("; ")
    };
    report(7, "oracle containment", pass, summary);
}

#[test]
fn criterion_8_resonance_shape() {
    let b2 = |num, den| {
        let est = fp_solve(&reference_params(rational(num, den)), &FpSettings::default())
            .unwrap()
            .estimate;
        assert!(est.converged, "{:?}", est.diagnostics);
        est.values.b2()
    };
    let (low, mid, high) = (b2(1, 20), b2(3, 10), b2(1, 1));
    report(
        8,
        "resonance shape",
        mid > low && mid > high,
        format!("FP B2: D=0.05 {low:.6}, D=0.3 {mid:.6}, D=1 {high:.6}"),
    );
}

#[test]
fn criterion_9_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    let runs: [&[&str]; 3] = [
        &["scan", "--grid", "0.1:0.9:5", "--d", "6", "--csv", "s.csv", "--json", "s.json"],
        &["export", "--d", "6", "--out", "p.dat-s"],
        &["oracle", "em", "--seed", "7", "--out", "em.json"],
    ];
    let mut pass = true;
    for dir in &dirs {
        for args in runs {
            pass &= srbounds(args, dir.path()).status.success();
        }
    }
    let mut details = Vec::new();
    for file in ["s.csv", "s.json", "p.dat-s", "em.json"] {
        let same = read(&dirs[0], file) == read(&dirs[1], file);
        details.push(format!("{file} {}", if same { "identical" } else { "differs" }));
        pass &= same;
    }
    report(9, "determinism", pass, details.join(", "));
}
