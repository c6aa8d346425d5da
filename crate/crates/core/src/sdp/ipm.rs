//! Infeasible-start primal-dual interior-point method for
//!
//! ```text
//! minimize  c0 + cᵀw   subject to  F(w) = F0 + Σ w_k F_k ⪰ 0
//! ```
//!
//! paired with `maximize c0 - F0•X  s.t.  F_k•X = c_k, X ⪰ 0`. Search
//! directions are HKM with a Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::SolveStatus;

#[derive(Clone, Debug)]
pub struct Lmi {
    pub c0: f64,
    pub c: DVector<f64>,
    pub f0: DMatrix<f64>,
    pub f: Vec<DMatrix<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub struct IpmSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    pub initial_scale: f64,
    pub step_fraction: f64,
    /// Residuals within this multiple of the tolerances count as near-optimal.
    pub near_factor: f64,
    /// Objective magnitude treated as divergence.
    pub divergence: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            max_iter: 500,
            initial_scale: 100.0,
            step_fraction: 0.95,
            near_factor: 1e3,
            divergence: 1e10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IpmOutcome {
    pub status: SolveStatus,
    /// `c0 + cᵀw` at the final moment point.
    pub moment_objective: f64,
    /// `c0 - F0•X`, a lower bound whenever `X` is feasible.
    pub certificate_objective: f64,
    pub w: DVector<f64>,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

impl IpmOutcome {
    /// The smaller of the two objectives, a lower bound up to tolerances.
    pub fn lower_bound(&self) -> f64 {
        self.moment_objective.min(self.certificate_objective)
    }
}

struct Residuals {
    rd: DMatrix<f64>,
    rp: DVector<f64>,
    pinf: f64,
    dinf: f64,
    pobj: f64,
    dobj: f64,
    gap: f64,
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

impl Lmi {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn num_vars(&self) -> usize {
        self.f.len()
    }

    pub fn eval(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.f0.clone();
        for (fk, wk) in self.f.iter().zip(w.iter()) {
            out += fk * *wk;
        }
        out
    }

    fn adjoint(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.num_vars(), self.f.iter().map(|fk| dot(fk, x)))
    }

    fn residuals(&self, w: &DVector<f64>, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Residuals {
        let rd = self.eval(w) - z;
        let rp = &self.c - self.adjoint(x);
        let pobj = self.c0 + self.c.dot(w);
        let dobj = self.c0 - dot(&self.f0, x);
        Residuals {
            pinf: rp.norm() / (1.0 + self.c.norm()),
            dinf: rd.norm() / (1.0 + self.f0.norm()),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            rd,
            rp,
            pobj,
            dobj,
        }
    }
}

/// Largest `α ≤ 1` with `S + α dS ⪰ 0`, given the Cholesky factor of `S`.
fn max_step(chol: &Cholesky<f64, Dyn>, ds: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let t = symmetrize(&(&linv * ds * linv.transpose()));
    let lmin = SymmetricEigen::new(t)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        1.0
    } else {
        (-1.0 / lmin).min(1.0)
    }
}

struct Direction {
    dw: DVector<f64>,
    dx: DMatrix<f64>,
    dz: DMatrix<f64>,
}

pub fn solve_lmi(lmi: &Lmi, settings: &IpmSettings) -> IpmOutcome {
    let n = lmi.dim();
    let m = lmi.num_vars();
    let mut w = DVector::zeros(m);
    let mut x = DMatrix::identity(n, n) * settings.initial_scale;
    let mut z = DMatrix::identity(n, n) * settings.initial_scale;

    let finish = |status, r: &Residuals, w: &DVector<f64>, iterations| IpmOutcome {
        status,
        moment_objective: r.pobj,
        certificate_objective: r.dobj,
        w: w.clone(),
        iterations,
        primal_infeasibility: r.pinf,
        dual_infeasibility: r.dinf,
        relative_gap: r.gap,
    };
    let near_status = |r: &Residuals| {
        let k = settings.near_factor;
        if r.pinf <= k * settings.tol_feas && r.dinf <= k * settings.tol_feas && r.gap <= k * settings.tol_gap {
            SolveStatus::NearOptimal
        } else {
            SolveStatus::NumericalFailure
        }
    };

    let mut best: Option<(f64, Residuals, DVector<f64>)> = None;
    let mut stalled = 0;
    for iter in 0..=settings.max_iter {
        let r = lmi.residuals(&w, &x, &z);
        if r.pinf <= settings.tol_feas && r.dinf <= settings.tol_feas && r.gap <= settings.tol_gap {
            return finish(SolveStatus::Optimal, &r, &w, iter);
        }
        if r.dinf <= settings.tol_feas && r.pobj < -settings.divergence {
            return finish(SolveStatus::Unbounded, &r, &w, iter);
        }
        if r.pinf <= settings.tol_feas && r.dobj > settings.divergence {
            return finish(SolveStatus::Infeasible, &r, &w, iter);
        }
        let merit = r.pinf.max(r.dinf).max(r.gap);
        if best.as_ref().is_none_or(|(b, _, _)| merit < *b) {
            best = Some((merit, lmi.residuals(&w, &x, &z), w.clone()));
        }
        if iter == settings.max_iter {
            break;
        }

        let (Some(chol_x), Some(chol_z)) = (Cholesky::new(x.clone()), Cholesky::new(z.clone())) else {
            break;
        };
        let l = chol_x.l();
        let u = chol_z.l();
        let Some(uinv) = u.clone().try_inverse() else { break };
        let zinv = uinv.transpose() * &uinv;
        let k: Vec<DMatrix<f64>> = lmi.f.iter().map(|fk| &uinv * fk * &l).collect();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&k[i], &k[j]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let schur_chol = Cholesky::new(schur.clone());
        let schur_lu = schur_chol.is_none().then(|| schur.clone().lu());
        let solve_schur = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
            match (&schur_chol, &schur_lu) {
                (Some(c), _) => Some(c.solve(rhs)),
                (None, Some(lu)) => lu.solve(rhs),
                _ => None,
            }
        };
        let mu = dot(&x, &z) / n as f64;
        let x_rd_zinv = &x * &r.rd * &zinv;

        let direction = |target: f64, corr: Option<&DMatrix<f64>>| -> Option<Direction> {
            let mut g = &zinv * target - &x - &x_rd_zinv;
            if let Some(cm) = corr {
                g -= cm * &zinv;
            }
            let rhs = lmi.adjoint(&g) - &r.rp;
            let dw = solve_schur(&rhs)?;
            let mut dz = r.rd.clone();
            for (fk, d) in lmi.f.iter().zip(dw.iter()) {
                dz += fk * *d;
            }
            let mut dx = &zinv * target - &x - &x * &dz * &zinv;
            if let Some(cm) = corr {
                dx -= cm * &zinv;
            }
            let dx = symmetrize(&dx);
            Some(Direction { dw, dx, dz })
        };

        let Some(pred) = direction(0.0, None) else { break };
        let ap = max_step(&chol_x, &pred.dx);
        let ad = max_step(&chol_z, &pred.dz);
        let mu_aff = dot(&(&x + &pred.dx * ap), &(&z + &pred.dz * ad)) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr = &pred.dx * &pred.dz;
        let Some(step) = direction(sigma * mu, Some(&corr)) else { break };
        let ap = (settings.step_fraction * max_step(&chol_x, &step.dx)).min(1.0);
        let ad = (settings.step_fraction * max_step(&chol_z, &step.dz)).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            stalled += 1;
            if stalled > 3 {
                break;
            }
        } else {
            stalled = 0;
        }
        x = symmetrize(&(&x + &step.dx * ap));
        z = symmetrize(&(&z + &step.dz * ad));
        w += &step.dw * ad;
        if !(x.iter().all(|v| v.is_finite()) && z.iter().all(|v| v.is_finite()) && w.iter().all(|v| v.is_finite())) {
            break;
        }
    }
    let (_, r, bw) = best.unwrap_or_else(|| {
        let r = lmi.residuals(&w, &x, &z);
        (f64::INFINITY, r, w.clone())
    });
    let status = near_status(&r);
    finish(status, &r, &bw, settings.max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn scalar_lower_bound() {
        // min w s.t. [w - 1] ⪰ 0  →  1
        let lmi = Lmi {
            c0: 0.0,
            c: DVector::from_row_slice(&[1.0]),
            f0: diag(&[-1.0]),
            f: vec![diag(&[1.0])],
        };
        let out = solve_lmi(&lmi, &IpmSettings::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.lower_bound() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn two_by_two_coupling() {
        // min -w s.t. [[1, w], [w, 1]] ⪰ 0  →  w = 1, value -1
        let lmi = Lmi {
            c0: 0.0,
            c: DVector::from_row_slice(&[-1.0]),
            f0: DMatrix::identity(2, 2),
            f: vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
        };
        let out = solve_lmi(&lmi, &IpmSettings::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.lower_bound() + 1.0).abs() < 1e-7);
        assert!((out.w[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn unbounded_detected() {
        // min -w s.t. [1 + w] ⪰ 0
        let lmi = Lmi {
            c0: 0.0,
            c: DVector::from_row_slice(&[-1.0]),
            f0: diag(&[1.0]),
            f: vec![diag(&[1.0])],
        };
        let out = solve_lmi(&lmi, &IpmSettings::default());
        assert_eq!(out.status, SolveStatus::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        // diag(w - 1, -w - 1) ⪰ 0 is empty
        let lmi = Lmi {
            c0: 0.0,
            c: DVector::from_row_slice(&[0.0]),
            f0: diag(&[-1.0, -1.0]),
            f: vec![diag(&[1.0, -1.0])],
        };
        let out = solve_lmi(&lmi, &IpmSettings::default());
        assert_eq!(out.status, SolveStatus::Infeasible);
    }
}
