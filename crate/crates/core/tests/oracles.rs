use srbounds::model::{double_well, ForcedDoubleWellParams};
use srbounds::oracles::{
    boltzmann_moments, em_simulate, fourier_project, fp_solve, EmSettings, FpSettings,
};
use srbounds::poly::{rational, Polynomial};
use srbounds::sdp::{Relaxation, SolverSettings};

fn reference(num: i64, den: i64) -> ForcedDoubleWellParams {
    ForcedDoubleWellParams::reference(rational(num, den)).unwrap()
}

#[test]
fn euler_maruyama_and_fokker_planck_agree() {
    for (num, den) in [(3, 10), (1, 2), (1, 1)] {
        let params = reference(num, den);
        let em = em_simulate(&params, &EmSettings::for_params(&params)).unwrap();
        let fp = fp_solve(&params, &FpSettings::default()).unwrap().estimate;
        assert!(fp.converged, "{:?}", fp.diagnostics);
        let se = em.std_err.unwrap();
        let proxy = fp.error_proxy.unwrap();
        let pairs = [
            ("P", em.values.p, fp.values.p, se.p, proxy.p),
            ("a1", em.values.a1, fp.values.a1, se.a1, proxy.a1),
            ("b1", em.values.b1, fp.values.b1, se.b1, proxy.b1),
        ];
        for (name, e, f, s, x) in pairs {
            let bar = 3.0 * (s * s + x * x).sqrt();
            assert!((e - f).abs() <= bar, "D = {num}/{den} {name}: EM {e} vs FP {f}, bar {bar:e}");
        }
    }
}

#[test]
fn fokker_planck_conserves_mass_and_projects_consistently() {
    let params = reference(1, 2);
    let run = fp_solve(&params, &FpSettings::default()).unwrap();
    let drift = run.estimate.metadata["max_mass_drift"].as_f64().unwrap();
    assert!(drift <= 1e-8, "mass drift {drift:e}");

    let t0 = run.trajectory[0].0;
    let times: Vec<f64> = run.trajectory.iter().map(|r| r.0 - t0).collect();
    let mean_x: Vec<f64> = run.trajectory.iter().map(|r| r.1).collect();
    let (a1, b1) = fourier_project(&times, &mean_x, params.omega_f64()).unwrap();
    assert!((a1 - run.estimate.values.a1).abs() <= 1e-12);
    assert!((b1 - run.estimate.values.b1).abs() <= 1e-12);

    let mass: f64 = run
        .density
        .iter()
        .zip(run.cell_weights())
        .map(|(p, w)| p * w)
        .sum();
    assert!((mass - 1.0).abs() <= 1e-8);
}

#[test]
fn euler_maruyama_is_bit_reproducible() {
    let params = reference(1, 2);
    let t = params.period();
    let settings = EmSettings {
        t_end: 20.0 * t,
        burn_in: 4.0 * t,
        n_paths: 16,
        seed: 7,
        ..EmSettings::for_params(&params)
    };
    let a = em_simulate(&params, &settings).unwrap();
    let b = em_simulate(&params, &settings).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn unforced_bounds_bracket_boltzmann_moments() {
    let settings = SolverSettings::default();
    for (num, den) in [(1, 10), (3, 10), (7, 10)] {
        let noise = rational(num, den);
        let exact = boltzmann_moments(num as f64 / den as f64, &[2, 4]).unwrap();
        let model = double_well(noise).unwrap();
        for d in [4, 6] {
            let relax = Relaxation::new(&model, d).unwrap();
            for k in [2u32, 4] {
                let obj = Polynomial::parse(&format!("X^{k}"), &["X"]).unwrap();
                let b = relax.bound("X^k", &obj, &settings).unwrap();
                assert!(b.both_optimal());
                let v = exact[&k];
                assert!(
                    b.lower - 1e-8 <= v && v <= b.upper + 1e-8,
                    "D = {num}/{den}, d = {d}, X^{k}: {v} not in [{}, {}]",
                    b.lower,
                    b.upper
                );
            }
        }
    }
}

#[test]
fn euler_maruyama_matches_the_reference_interval() {
    let params = reference(1, 2);
    let em = em_simulate(&params, &EmSettings::for_params(&params)).unwrap();
    let se = em.std_err.unwrap();
    assert!(se.p > 0.0 && se.a1 > 0.0 && se.b1 > 0.0);
    let (lo, hi) = (0.11655120, 0.11656018);
    assert!(em.values.a1 >= lo - 5.0 * se.a1 && em.values.a1 <= hi + 5.0 * se.a1);
}

#[test]
fn unforced_oracles_show_no_response() {
    let params = ForcedDoubleWellParams::new(rational(0, 1), rational(1, 2), rational(1, 2)).unwrap();
    let t = params.period();
    let em = em_simulate(
        &params,
        &EmSettings {
            t_end: 60.0 * t,
            n_paths: 40,
            seed: 3,
            ..EmSettings::for_params(&params)
        },
    )
    .unwrap();
    let se = em.std_err.unwrap();
    assert!(em.values.a1.abs() <= 5.0 * se.a1 && em.values.b1.abs() <= 5.0 * se.b1);

    let run = fp_solve(&params, &FpSettings::default()).unwrap();
    assert!(run.estimate.converged);
    assert!(run.estimate.values.a1.abs() < 1e-10 && run.estimate.values.b1.abs() < 1e-10);
    let weights = run.cell_weights();
    let boltzmann: Vec<f64> = run
        .grid
        .iter()
        .map(|x| (-(0.25 * x.powi(4) - 0.5 * x * x) / 0.5).exp())
        .collect();
    let z: f64 = boltzmann.iter().zip(&weights).map(|(b, w)| b * w).sum();
    let max_err = run
        .density
        .iter()
        .zip(&boltzmann)
        .map(|(p, b)| (p - b / z).abs())
        .fold(0.0, f64::max);
    let dx = run.grid[1] - run.grid[0];
    assert!(max_err <= 10.0 * dx * dx, "max density error {max_err:e}");
    let p_exact = boltzmann_moments(0.5, &[2]).unwrap()[&2];
    assert!((run.estimate.values.p - p_exact).abs() <= run.estimate.error_proxy.unwrap().p + 1e-9);
}

#[test]
fn grid_refinement_stays_within_the_error_proxy() {
    let params = reference(1, 2);
    let base = fp_solve(&params, &FpSettings::default()).unwrap().estimate;
    let fine = fp_solve(
        &params,
        &FpSettings {
            n_grid: 4001,
            error_proxy: false,
            ..FpSettings::default()
        },
    )
    .unwrap()
    .estimate;
    let proxy = base.error_proxy.unwrap();
    assert!((fine.values.p - base.values.p).abs() < proxy.p);
}
