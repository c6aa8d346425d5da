//! Autonomous polynomial SDE models and their infinitesimal generator.

use std::path::Path;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{parse_rational, rational, rational_int, rational_to_f64, Polynomial, Rational};

/// `dY = μ(Y) dt + σ(Y) dW` with `D = ½σσᵀ` stored directly, plus algebraic
/// constraints on the support and an optional sign symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct SdeModel {
    names: Vec<String>,
    drift: Vec<Polynomial>,
    diffusion: Vec<Vec<Polynomial>>,
    constraints: Vec<Polynomial>,
    sign_symmetry: Option<Vec<i8>>,
}

impl SdeModel {
    /// Validates and builds a model. Checks diffusion symmetry and, when a
    /// sign symmetry is declared, that the drift is odd, the diffusion even
    /// and every constraint invariant under it.
    pub fn new(
        names: Vec<String>,
        drift: Vec<Polynomial>,
        diffusion: Vec<Vec<Polynomial>>,
        constraints: Vec<Polynomial>,
        sign_symmetry: Option<Vec<i8>>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidModel("a model needs at least one variable".into()));
        }
        if drift.len() != n || diffusion.len() != n || diffusion.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(format!(
                "drift must have {n} entries and diffusion must be {n}x{n}"
            )));
        }
        let all = drift
            .iter()
            .chain(diffusion.iter().flatten())
            .chain(constraints.iter());
        for p in all {
            if p.nvars() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.nvars(),
                });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if diffusion[i][j] != diffusion[j][i] {
                    return Err(Error::InvalidModel(format!(
                        "diffusion matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if let Some(s) = &sign_symmetry {
            if s.len() != n || s.iter().any(|v| *v != 1 && *v != -1) {
                return Err(Error::InvalidModel(
                    "sign symmetry must be a vector of ±1 with one entry per variable".into(),
                ));
            }
            for (i, mu) in drift.iter().enumerate() {
                // μ_i(sY) = s_i μ_i(Y)
                let lhs = mu.substitute_signs(s)?;
                let rhs = mu.scale(&rational_int(s[i] as i64));
                if lhs != rhs {
                    return Err(Error::InvalidModel(format!(
                        "drift component {i} is not equivariant under the declared sign symmetry"
                    )));
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let lhs = diffusion[i][j].substitute_signs(s)?;
                    let rhs = diffusion[i][j].scale(&rational_int((s[i] * s[j]) as i64));
                    if lhs != rhs {
                        return Err(Error::InvalidModel(format!(
                            "diffusion entry ({i}, {j}) is not equivariant under the declared sign symmetry"
                        )));
                    }
                }
            }
            for (k, g) in constraints.iter().enumerate() {
                if g.substitute_signs(s)? != *g {
                    return Err(Error::InvalidModel(format!(
                        "constraint {k} is not invariant under the declared sign symmetry"
                    )));
                }
            }
        }
        Ok(SdeModel {
            names,
            drift,
            diffusion,
            constraints,
            sign_symmetry,
        })
    }

    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    pub fn drift(&self) -> &[Polynomial] {
        &self.drift
    }

    pub fn diffusion(&self) -> &[Vec<Polynomial>] {
        &self.diffusion
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn sign_symmetry(&self) -> Option<&[i8]> {
        self.sign_symmetry.as_deref()
    }

    /// Drops the declared symmetry (used to check that odd-moment elimination
    /// does not change optima).
    pub fn without_symmetry(&self) -> SdeModel {
        SdeModel {
            sign_symmetry: None,
            ..self.clone()
        }
    }

    /// `(d_μ, d_D)`: the largest drift degree and the largest degree among
    /// the diffusion entries. Zero polynomials count as degree 0.
    pub fn degrees(&self) -> (u32, u32) {
        let d_mu = self.drift.iter().filter_map(Polynomial::degree).max().unwrap_or(0);
        let d_diff = self
            .diffusion
            .iter()
            .flatten()
            .filter_map(Polynomial::degree)
            .max()
            .unwrap_or(0);
        (d_mu, d_diff)
    }

    /// How many degrees the generator can add: `max(d_μ - 1, d_D - 2)`.
    /// With `D = ½σσᵀ`, `d_D - 2` plays the role of `2d_σ - 2`.
    pub fn generator_degree_shift(&self) -> i64 {
        let drift = self
            .drift
            .iter()
            .filter_map(Polynomial::degree)
            .max()
            .map(|d| d as i64 - 1);
        let diff = self
            .diffusion
            .iter()
            .flatten()
            .filter_map(Polynomial::degree)
            .max()
            .map(|d| d as i64 - 2);
        drift.into_iter().chain(diff).max().unwrap_or(0)
    }

    /// `L f = Σ μ_i ∂_i f + Σ D_ij ∂_i ∂_j f`.
    pub fn generator_apply(&self, f: &Polynomial) -> Result<Polynomial> {
        let n = self.nvars();
        if f.nvars() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.nvars(),
            });
        }
        let mut out = Polynomial::zero(n);
        for i in 0..n {
            let di = f.differentiate(i)?;
            if di.is_zero() {
                continue;
            }
            if !self.drift[i].is_zero() {
                out = out.add(&self.drift[i].multiply(&di)?)?;
            }
            for j in 0..n {
                if self.diffusion[i][j].is_zero() {
                    continue;
                }
                let dij = di.differentiate(j)?;
                out = out.add(&self.diffusion[i][j].multiply(&dij)?)?;
            }
        }
        Ok(out)
    }
}

/// Parameters of `dX = (X - X^3 + A cos Ωt) dt + sqrt(2D) dW`, held exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForcedDoubleWellParams {
    pub amplitude: Rational,
    pub omega: Rational,
    pub noise: Rational,
}

impl ForcedDoubleWellParams {
    pub fn new(amplitude: Rational, omega: Rational, noise: Rational) -> Result<Self> {
        let p = ForcedDoubleWellParams {
            amplitude,
            omega,
            noise,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parses each parameter as an exact decimal or `p/q`.
    pub fn parse(amplitude: &str, omega: &str, noise: &str) -> Result<Self> {
        Self::new(
            parse_rational(amplitude)?,
            parse_rational(omega)?,
            parse_rational(noise)?,
        )
    }

    /// A = 3/10, Ω = 1/2 with the given noise intensity.
    pub fn reference(noise: Rational) -> Result<Self> {
        Self::new(rational(3, 10), rational(1, 2), noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.noise.is_positive() {
            return Err(Error::InvalidParameter(format!(
                "noise intensity D must be > 0, got {}",
                self.noise
            )));
        }
        if !self.omega.is_positive() {
            return Err(Error::InvalidParameter(format!(
                "forcing frequency Omega must be > 0, got {}",
                self.omega
            )));
        }
        // 0 <= A < 2/(3 sqrt 3)  <=>  A >= 0 and 27 A^2 < 4
        if self.amplitude.is_negative()
            || &self.amplitude * &self.amplitude * rational_int(27) >= rational_int(4)
        {
            return Err(Error::InvalidParameter(format!(
                "forcing amplitude A must satisfy 0 <= A < 2/(3*sqrt(3)), got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    pub fn amplitude_f64(&self) -> f64 {
        rational_to_f64(&self.amplitude)
    }

    pub fn omega_f64(&self) -> f64 {
        rational_to_f64(&self.omega)
    }

    pub fn noise_f64(&self) -> f64 {
        rational_to_f64(&self.noise)
    }

    /// Forcing period `2π/Ω`.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_f64()
    }

    pub fn with_noise(&self, noise: Rational) -> Result<Self> {
        Self::new(self.amplitude.clone(), self.omega.clone(), noise)
    }
}

impl Serialize for ForcedDoubleWellParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ForcedDoubleWellParams", 3)?;
        st.serialize_field("A", &self.amplitude.to_string())?;
        st.serialize_field("Omega", &self.omega.to_string())?;
        st.serialize_field("D", &self.noise.to_string())?;
        st.end()
    }
}

/// The autonomous lift in variables `(X, y, z)` with `y = cos Ωt`, `z = sin Ωt`:
/// drift `(X - X^3 + A y, -Ω z, Ω y)`, `D_11 = D`, support on `y^2 + z^2 = 1`,
/// and the sign symmetry `(X, y, z) -> -(X, y, z)`.
pub fn lift_forced_double_well(params: &ForcedDoubleWellParams) -> Result<SdeModel> {
    params.validate()?;
    let n = 3;
    let x = Polynomial::var(n, 0);
    let y = Polynomial::var(n, 1);
    let z = Polynomial::var(n, 2);
    let x3 = x.multiply(&x)?.multiply(&x)?;
    let drift_x = x.sub(&x3)?.add(&y.scale(&params.amplitude))?;
    let drift_y = z.scale(&-params.omega.clone());
    let drift_z = y.scale(&params.omega);
    let mut diffusion = vec![vec![Polynomial::zero(n); n]; n];
    diffusion[0][0] = Polynomial::constant(n, params.noise.clone());
    let circle = y
        .multiply(&y)?
        .add(&z.multiply(&z)?)?
        .sub(&Polynomial::one(n))?;
    SdeModel::new(
        vec!["X".into(), "y".into(), "z".into()],
        vec![drift_x, drift_y, drift_z],
        diffusion,
        vec![circle],
        Some(vec![-1, -1, -1]),
    )
}

/// One-dimensional Ornstein–Uhlenbeck process `dX = -X dt + sqrt(2D) dW`.
pub fn ornstein_uhlenbeck(noise: Rational) -> Result<SdeModel> {
    if !noise.is_positive() {
        return Err(Error::InvalidParameter("noise intensity must be > 0".into()));
    }
    SdeModel::new(
        vec!["X".into()],
        vec![Polynomial::var(1, 0).neg()],
        vec![vec![Polynomial::constant(1, noise)]],
        vec![],
        None,
    )
}

/// The unforced double well `dX = (X - X^3) dt + sqrt(2D) dW` in one variable.
pub fn double_well(noise: Rational) -> Result<SdeModel> {
    if !noise.is_positive() {
        return Err(Error::InvalidParameter("noise intensity must be > 0".into()));
    }
    let x = Polynomial::var(1, 0);
    let drift = x.sub(&x.multiply(&x)?.multiply(&x)?)?;
    SdeModel::new(
        vec!["X".into()],
        vec![drift],
        vec![vec![Polynomial::constant(1, noise)]],
        vec![],
        Some(vec![-1]),
    )
}

/// On-disk model description (TOML).
///
/// ```toml
/// variables = ["X"]
/// drift = ["-X"]
/// diffusion = [["1/4"]]
/// constraints = []
/// sign_symmetry = [-1]
/// ```
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub variables: Vec<String>,
    pub drift: Vec<String>,
    pub diffusion: Vec<Vec<String>>,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default)]
    pub sign_symmetry: Option<Vec<i8>>,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model file serializes")
    }

    pub fn to_model(&self) -> Result<SdeModel> {
        let names: Vec<&str> = self.variables.iter().map(String::as_str).collect();
        let parse = |s: &String| Polynomial::parse(s, &names);
        let drift = self.drift.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let diffusion = self
            .diffusion
            .iter()
            .map(|row| row.iter().map(parse).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let constraints = self.constraints.iter().map(parse).collect::<Result<Vec<_>>>()?;
        SdeModel::new(
            self.variables.clone(),
            drift,
            diffusion,
            constraints,
            self.sign_symmetry.clone(),
        )
    }

    pub fn from_model(model: &SdeModel) -> Self {
        let names = model.names();
        let show = |p: &Polynomial| p.display_with(&names).to_string();
        ModelFile {
            variables: model.names.clone(),
            drift: model.drift.iter().map(show).collect(),
            diffusion: model
                .diffusion
                .iter()
                .map(|r| r.iter().map(show).collect())
                .collect(),
            constraints: model.constraints.iter().map(show).collect(),
            sign_symmetry: model.sign_symmetry.clone(),
        }
    }
}
