use nalgebra::DMatrix;
use num_traits::One;
use proptest::prelude::*;

use srbounds::model::{lift_forced_double_well, ForcedDoubleWellParams, SdeModel};
use srbounds::oracles::{fp_solve, FpSettings};
use srbounds::poly::{enumerate_monomials, rational, rational_to_f64, MultiIndex, Polynomial, Rational};
use srbounds::sdp::{
    Constraints, OddMoments, PsdEntry, Relaxation, RowKind, Sense, SolverSettings,
};

fn lifted(noise: Rational) -> SdeModel {
    lift_forced_double_well(&ForcedDoubleWellParams::reference(noise).unwrap()).unwrap()
}

fn objective(model: &SdeModel, text: &str) -> Polynomial {
    Polynomial::parse(text, &model.names()).unwrap()
}

/// Rebuilds `Σ c · Y^moment(id)` from a row.
fn row_polynomial(cons: &Constraints, coeffs: &[(usize, Rational)]) -> Polynomial {
    let nvars = cons.index.nvars();
    Polynomial::from_terms(
        nvars,
        coeffs
            .iter()
            .map(|(id, c)| (cons.index.moments()[*id].exponents().to_vec(), c.clone())),
    )
    .unwrap()
}

#[test]
fn stationarity_rows_round_trip_through_the_generator() {
    let model = lifted(rational(1, 2));
    let signs = model.sign_symmetry().unwrap().to_vec();
    for odd in [OddMoments::Eliminate, OddMoments::PinWithRows] {
        let cons = Constraints::build(&model, 4, odd).unwrap();
        let limit = 2 * 4 - model.generator_degree_shift();
        let mut expected_rows = 0;
        for alpha in enumerate_monomials(3, limit as u32) {
            let f = Polynomial::monomial(3, alpha.clone(), Rational::one());
            let lf = model.generator_apply(&f).unwrap();
            let kept = match odd {
                OddMoments::Eliminate => lf.parity_parts(&signs).0,
                OddMoments::PinWithRows => lf,
            };
            let row = cons
                .rows
                .iter()
                .find(|r| r.kind == RowKind::Stationarity(alpha.clone()));
            match row {
                Some(r) => {
                    expected_rows += 1;
                    assert_eq!(row_polynomial(&cons, &r.coeffs), kept, "alpha = {alpha:?}");
                    assert_eq!(r.rhs, Rational::from_integer(0.into()));
                }
                None => assert!(kept.is_zero(), "missing row for {alpha:?}"),
            }
        }
        let actual = cons
            .rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::Stationarity(_)))
            .count();
        assert_eq!(actual, expected_rows);
    }
}

#[test]
fn moment_matrix_corner_is_the_normalized_mass() {
    let model = lifted(rational(1, 2));
    let relax = Relaxation::new(&model, 4).unwrap();
    let cons = relax.constraints();
    assert_eq!(cons.psd_block[0], PsdEntry::One);
    let red = relax.reduction().unwrap();
    let zero = cons.index.id(&MultiIndex::zero(3)).unwrap();
    for w in [vec![0.0; red.num_free()], vec![0.37; red.num_free()]] {
        assert_eq!(red.moments(&w)[zero], 1.0);
    }
}

#[test]
fn symmetry_elimination_is_value_neutral() {
    let settings = SolverSettings::default();
    for noise in [rational(1, 2), rational(3, 10)] {
        let model = lifted(noise);
        let elim = Relaxation::with_odd_moments(&model, 4, OddMoments::Eliminate).unwrap();
        let pinned = Relaxation::with_odd_moments(&model, 4, OddMoments::PinWithRows).unwrap();
        for text in ["X^2", "X*y", "X*z", "X^4"] {
            let obj = objective(&model, text);
            let a = elim.bound(text, &obj, &settings).unwrap();
            let b = pinned.bound(text, &obj, &settings).unwrap();
            assert!(a.both_optimal() && b.both_optimal(), "{text}: {a:?} {b:?}");
            assert!((a.lower - b.lower).abs() <= 1e-7, "{text}: {} vs {}", a.lower, b.lower);
            assert!((a.upper - b.upper).abs() <= 1e-7, "{text}: {} vs {}", a.upper, b.upper);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn intervals_tighten_with_degree(num in 1i64..=20, which in 0usize..3) {
        let noise = rational(num, 20);
        let model = lifted(noise);
        let text = ["X^2", "X*y", "X*z"][which];
        let obj = objective(&model, text);
        let settings = SolverSettings::default();
        let mut previous: Option<(f64, f64)> = None;
        for d in [4u32, 6] {
            let b = Relaxation::new(&model, d).unwrap().bound(text, &obj, &settings).unwrap();
            prop_assert!(b.lower <= b.upper);
            if let Some((lo, hi)) = previous {
                prop_assert!(b.lower >= lo - 1e-7, "d={d} {text}: lower {} < {}", b.lower, lo);
                prop_assert!(b.upper <= hi + 1e-7, "d={d} {text}: upper {} > {}", b.upper, hi);
            }
            previous = Some((b.lower, b.upper));
        }
    }
}

/// Time-averaged moments `⟨⟨X^k y^m z^n⟩⟩` of a Fokker-Planck equilibrium,
/// by the trapezoid rule in space and time over the recorded period.
fn fp_moments(noise: Rational, settings: &FpSettings, monomials: &[MultiIndex]) -> Vec<f64> {
    let params = ForcedDoubleWellParams::reference(noise).unwrap();
    let run = fp_solve(&params, &FpSettings { record_final_period: true, ..settings.clone() }).unwrap();
    assert!(run.estimate.converged, "{:?}", run.estimate.diagnostics);
    let weights = run.cell_weights();
    let omega = params.omega_f64();
    let steps = run.final_period.len() - 1;
    let mut out = vec![0.0; monomials.len()];
    for (k, density) in run.final_period.iter().enumerate() {
        let tw = if k == 0 || k == steps { 0.5 } else { 1.0 } / steps as f64;
        let t = run.trajectory[k].0;
        let (y, z) = ((omega * t).cos(), (omega * t).sin());
        let xk: Vec<f64> = (0..=monomials.iter().map(|m| m.exponents()[0]).max().unwrap())
            .map(|e| {
                density
                    .iter()
                    .zip(&weights)
                    .zip(&run.grid)
                    .map(|((p, w), x)| p * w * x.powi(e as i32))
                    .sum()
            })
            .collect();
        for (slot, m) in out.iter_mut().zip(monomials) {
            let e = m.exponents();
            *slot += tw * xk[e[0] as usize] * y.powi(e[1] as i32) * z.powi(e[2] as i32);
        }
    }
    out
}

#[test]
fn fokker_planck_equilibrium_is_a_feasibility_witness() {
    let noise = rational(1, 2);
    let model = lifted(noise.clone());
    let cons = Constraints::build(&model, 4, OddMoments::Eliminate).unwrap();
    let moments = cons.index.moments().to_vec();
    let fine = fp_moments(noise.clone(), &FpSettings { error_proxy: false, ..FpSettings::default() }, &moments);
    let coarse = fp_moments(
        noise,
        &FpSettings {
            n_grid: 1001,
            steps_per_period: 500,
            error_proxy: false,
            ..FpSettings::default()
        },
        &moments,
    );
    // Discretization error of each moment, from the two resolutions.
    let err: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (f - c).abs()).collect();

    for row in &cons.rows {
        let residual: f64 = row
            .coeffs
            .iter()
            .map(|(id, c)| rational_to_f64(c) * fine[*id])
            .sum::<f64>()
            - rational_to_f64(&row.rhs);
        let budget: f64 = row
            .coeffs
            .iter()
            .map(|(id, c)| rational_to_f64(c).abs() * err[*id])
            .sum::<f64>();
        assert!(
            residual.abs() <= 4.0 * budget + 1e-12,
            "{:?}: residual {residual:e}, error budget {budget:e}",
            row.kind
        );
    }

    let n = cons.index.basis().len();
    let entry = |v: &[f64], i: usize, j: usize| match cons.psd_block[i * n + j] {
        PsdEntry::Zero => 0.0,
        PsdEntry::One => 1.0,
        PsdEntry::Moment(id) => v[id],
    };
    let m = DMatrix::from_fn(n, n, |i, j| entry(&fine, i, j));
    let e = DMatrix::from_fn(n, n, |i, j| entry(&err, i, j));
    let min_eig = m.symmetric_eigenvalues().min();
    assert!(min_eig >= -4.0 * e.norm(), "min eigenvalue {min_eig:e}, error norm {:e}", e.norm());
}

#[test]
fn reduction_sense_symmetry() {
    let model = lifted(rational(1, 2));
    let relax = Relaxation::new(&model, 4).unwrap();
    let obj = objective(&model, "X*y");
    let settings = SolverSettings::default();
    let hi = relax.solve(&obj, Sense::Maximize, &settings).unwrap();
    let lo_of_neg = relax.solve(&obj.neg(), Sense::Minimize, &settings).unwrap();
    assert!((hi.value + lo_of_neg.value).abs() < 1e-9);
}
