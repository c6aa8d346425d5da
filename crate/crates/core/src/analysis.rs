//! Interval composition for `B² = a1² + b1²` and `R = B²/P`, noise scans,
//! and resonance-peak location.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{lift_forced_double_well, ForcedDoubleWellParams};
use crate::oracles::OracleEstimate;
use crate::poly::{rational_to_f64, Polynomial, Rational};
use crate::sdp::{extended_real, BoundResult, Relaxation, SolveStatus, SolverSettings};

/// A closed interval of extended reals. `degraded` marks intervals with an
/// endpoint that came from a non-optimal solve (and was widened to `±∞`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "extended_real")]
    pub lo: f64,
    #[serde(with = "extended_real")]
    pub hi: f64,
    #[serde(default)]
    pub degraded: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            degraded: false,
        }
    }

    pub fn from_bound(b: &BoundResult) -> Self {
        Interval {
            lo: b.lower,
            hi: b.upper,
            degraded: !b.both_optimal(),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn widen(&self, by: f64) -> Interval {
        Interval {
            lo: self.lo - by,
            hi: self.hi + by,
            ..*self
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Image of `x ↦ x²` over `i`.
pub fn square_interval(i: Interval) -> Interval {
    let (l2, h2) = (i.lo * i.lo, i.hi * i.hi);
    let (lo, hi) = if i.lo <= 0.0 && 0.0 <= i.hi {
        (0.0, l2.max(h2))
    } else {
        (l2.min(h2), l2.max(h2))
    };
    Interval {
        lo,
        hi,
        degraded: i.degraded,
    }
}

/// Enclosure of `a1² + b1²`.
pub fn compose_b2(a1: Interval, b1: Interval) -> Interval {
    let (sa, sb) = (square_interval(a1), square_interval(b1));
    Interval {
        lo: sa.lo + sb.lo,
        hi: sa.hi + sb.hi,
        degraded: sa.degraded || sb.degraded,
    }
}

/// Enclosure of `B²/P`; requires `P.lo > 0`.
pub fn compose_r(b2: Interval, p: Interval) -> Result<Interval> {
    if !(p.lo > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cannot bound R = B^2/P: the P interval [{}, {}] is not strictly positive (an upstream solve likely failed)",
            p.lo, p.hi
        )));
    }
    Ok(Interval {
        lo: b2.lo / p.hi,
        hi: b2.hi / p.lo,
        degraded: b2.degraded || p.degraded,
    })
}

/// The three primitive objectives of a scan row, in column order.
pub const OBJECTIVES: [(&str, &str); 3] = [("P", "X^2"), ("a1", "X*y"), ("b1", "X*z")];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "D")]
    pub noise: f64,
    /// Exact noise intensity used for assembly.
    #[serde(rename = "D_exact")]
    pub noise_exact: String,
    pub degree: u32,
    #[serde(rename = "P")]
    pub p: Interval,
    pub a1: Interval,
    pub b1: Interval,
    #[serde(rename = "B2")]
    pub b2: Interval,
    /// `None` when the P interval is not strictly positive.
    #[serde(rename = "R")]
    pub r: Option<Interval>,
    /// `(objective, lower status, upper status)` for P, a1, b1.
    pub statuses: Vec<(String, SolveStatus, SolveStatus)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl ScanRow {
    pub fn all_optimal(&self) -> bool {
        self.statuses
            .iter()
            .all(|(_, lo, hi)| lo.is_optimal() && hi.is_optimal())
    }

    /// `ok`, or `;`-separated non-optimal endpoints and missing compositions.
    pub fn status_flags(&self) -> String {
        let mut flags: Vec<String> = Vec::new();
        for (name, lo, hi) in &self.statuses {
            if !lo.is_optimal() {
                flags.push(format!("{name}_lo:{lo}"));
            }
            if !hi.is_optimal() {
                flags.push(format!("{name}_hi:{hi}"));
            }
        }
        if self.r.is_none() {
            flags.push("R:undefined".into());
        }
        if let Some(o) = &self.oracle {
            if !o.converged {
                flags.push("oracle:unconverged".into());
            }
        }
        if flags.is_empty() {
            "ok".into()
        } else {
            flags.join(";")
        }
    }

    pub fn interval(&self, name: &str) -> Option<Interval> {
        match name {
            "P" => Some(self.p),
            "a1" => Some(self.a1),
            "b1" => Some(self.b1),
            "B2" => Some(self.b2),
            "R" => self.r,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    /// Run configuration echoed for provenance.
    pub config: serde_json::Value,
    pub rows: Vec<ScanRow>,
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl ScanTable {
    pub fn has_oracle(&self) -> bool {
        self.rows.iter().any(|r| r.oracle.is_some())
    }

    /// Copy with wall times removed, for byte-stable output.
    pub fn without_timings(&self) -> ScanTable {
        let mut t = self.clone();
        t.rows.iter_mut().for_each(|r| r.wall_time_s = None);
        t
    }

    pub fn fraction_optimal(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.all_optimal()).count() as f64 / self.rows.len() as f64
    }

    /// CSV with a leading `# config=` line; floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let oracle = self.has_oracle();
        let mut out = String::new();
        out.push_str(&format!("# config={}\n", self.config));
        out.push_str("D,P_lo,P_hi,a1_lo,a1_hi,b1_lo,b1_hi,B2_lo,B2_hi,R_lo,R_hi,status_flags");
        if oracle {
            out.push_str(",oracle_P,oracle_a1,oracle_b1");
        }
        out.push('\n');
        for r in &self.rows {
            let rr = r.r.unwrap_or(Interval::new(f64::NAN, f64::NAN));
            let mut cells: Vec<String> = [r.noise, r.p.lo, r.p.hi, r.a1.lo, r.a1.hi, r.b1.lo, r.b1.hi, r.b2.lo, r.b2.hi, rr.lo, rr.hi]
                .iter()
                .map(|v| fmt_float(*v))
                .collect();
            cells.push(r.status_flags());
            if oracle {
                match &r.oracle {
                    Some(o) => {
                        cells.extend([o.values.p, o.values.a1, o.values.b1].iter().map(|v| fmt_float(*v)))
                    }
                    None => cells.extend(std::iter::repeat_n(String::new(), 3)),
                }
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<ScanTable> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Bounds `P`, `a1`, `b1` at one noise intensity and composes `B²`, `R`.
pub fn scan_row(
    template: &ForcedDoubleWellParams,
    noise: &Rational,
    degree: u32,
    settings: &SolverSettings,
) -> Result<ScanRow> {
    let start = std::time::Instant::now();
    let params = template.with_noise(noise.clone())?;
    let model = lift_forced_double_well(&params)?;
    let relaxation = Relaxation::new(&model, degree)?;
    let names = model.names();
    let mut intervals = Vec::new();
    let mut statuses = Vec::new();
    for (name, expr) in OBJECTIVES {
        let poly = Polynomial::parse(expr, &names)?;
        let b = relaxation.bound(name, &poly, settings)?;
        statuses.push((name.to_string(), b.status_lower, b.status_upper));
        intervals.push(Interval::from_bound(&b));
    }
    let (p, a1, b1) = (intervals[0], intervals[1], intervals[2]);
    let b2 = compose_b2(a1, b1);
    let mut diagnostics = Vec::new();
    let r = match compose_r(b2, p) {
        Ok(r) => Some(r),
        Err(e) => {
            diagnostics.push(e.to_string());
            None
        }
    };
    Ok(ScanRow {
        noise: rational_to_f64(noise),
        noise_exact: noise.to_string(),
        degree,
        p,
        a1,
        b1,
        b2,
        r,
        statuses,
        oracle: None,
        diagnostics,
        wall_time_s: Some(start.elapsed().as_secs_f64()),
    })
}

/// Scans the noise grid with at most `jobs` rows in flight; rows come back in
/// grid order regardless of scheduling.
pub fn scan_noise(
    template: &ForcedDoubleWellParams,
    grid: &[Rational],
    degree: u32,
    settings: &SolverSettings,
    jobs: usize,
    config: serde_json::Value,
) -> Result<ScanTable> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty noise grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("noise grid must be strictly increasing".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let rows: Result<Vec<ScanRow>> = pool.install(|| {
        grid.par_iter()
            .map(|d| {
                let row = scan_row(template, d, degree, settings);
                if let Ok(r) = &row {
                    log::info!(
                        "D = {}: P [{:.6}, {:.6}] a1 [{:.6}, {:.6}] b1 [{:.6}, {:.6}] ({}) in {:.2}s",
                        r.noise_exact,
                        r.p.lo,
                        r.p.hi,
                        r.a1.lo,
                        r.a1.hi,
                        r.b1.lo,
                        r.b1.hi,
                        r.status_flags(),
                        r.wall_time_s.unwrap_or(0.0)
                    );
                }
                row
            })
            .collect()
    });
    Ok(ScanTable { config, rows: rows? })
}

/// Uniform grid `lo, ..., hi` with `n` points, as exact rationals.
pub fn uniform_grid(lo: &Rational, hi: &Rational, n: usize) -> Result<Vec<Rational>> {
    match n {
        0 => Err(Error::InvalidParameter("grid needs at least one point".into())),
        1 => {
            if lo != hi {
                return Err(Error::InvalidParameter(format!(
                    "a one-point grid needs lo = hi, got {lo} and {hi}"
                )));
            }
            Ok(vec![lo.clone()])
        }
        _ => {
            let steps = Rational::from_integer((n as i64 - 1).into());
            let h = (hi - lo) / steps;
            Ok((0..n)
                .map(|k| lo + &h * Rational::from_integer((k as i64).into()))
                .collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeakColumn {
    B2Lower,
    RLower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    #[serde(rename = "D")]
    pub noise: f64,
    pub value: f64,
    pub index: usize,
    /// False when the maximum sits on an end of the grid.
    pub interior: bool,
}

/// Discrete argmax of a lower-bound column.
pub fn find_peak(table: &ScanTable, column: PeakColumn) -> Result<Peak> {
    let values: Vec<f64> = table
        .rows
        .iter()
        .map(|r| match column {
            PeakColumn::B2Lower => r.b2.lo,
            PeakColumn::RLower => r.r.map_or(f64::NEG_INFINITY, |i| i.lo),
        })
        .collect();
    let mut best: Option<usize> = None;
    for (k, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > values[b]) {
            best = Some(k);
        }
    }
    let Some(index) = best else {
        return Err(Error::InvalidParameter(format!(
            "no peak: the {column:?} column has no finite entries"
        )));
    };
    Ok(Peak {
        noise: table.rows[index].noise,
        value: values[index],
        index,
        interior: index > 0 && index + 1 < values.len(),
    })
}

/// Containment of oracle values in SDP intervals widened by `slack`.
/// Returns one message per violated quantity.
pub fn containment_violations(row: &ScanRow, values: [f64; 3], slack: [f64; 3]) -> Vec<String> {
    let mut out = Vec::new();
    for (k, (name, _)) in OBJECTIVES.iter().enumerate() {
        let iv = row.interval(name).expect("primitive column");
        if !iv.widen(slack[k]).contains(values[k]) {
            out.push(format!(
                "D = {}: {name} = {:.10} outside [{:.10}, {:.10}] widened by {:.3e}",
                row.noise_exact, values[k], iv.lo, iv.hi, slack[k]
            ));
        }
    }
    out
}
