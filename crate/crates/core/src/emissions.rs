//! Carbon-emissions reduction as a function of inference accuracy and latency.
//!
//! Measured (accuracy, reduction) pairs are fitted by a proportional line in
//! the accuracy drop `1 - a`; measured (latency, reduction) pairs by a
//! quadratic through the origin in the latency increase `d - 1`. The two
//! contributions add and are capped at `r_max`.

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::utility::{QoEPoint, UtilityConstants};

/// Measured reduction fractions at discrete accuracy and latency levels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionsTable {
    pub accuracy_rows: Vec<(f64, f64)>,
    pub latency_rows: Vec<(f64, f64)>,
}

impl Default for EmissionsTable {
    fn default() -> Self {
        Self {
            accuracy_rows: vec![(1.00, 0.00), (0.97, 0.20), (0.93, 0.40), (0.90, 0.60), (0.88, 0.80)],
            latency_rows: vec![(1.00, 0.00), (1.12, 0.19), (1.28, 0.26)],
        }
    }
}

impl EmissionsTable {
    pub fn validate(&self) -> Result<()> {
        check_rows("accuracy", &self.accuracy_rows, Direction::Decreasing)?;
        check_rows("latency", &self.latency_rows, Direction::Increasing)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Increasing,
    Decreasing,
}

fn check_rows(kind: &str, rows: &[(f64, f64)], dir: Direction) -> Result<()> {
    let degenerate = |msg: String| Err(Error::DegenerateTable(format!("{kind} rows: {msg}")));
    match rows.first() {
        Some(&(v, r)) if v == 1.0 && r == 0.0 => {}
        Some(&(v, r)) => return degenerate(format!("first row must be the (1, 0) anchor, got ({v}, {r})")),
        None => return degenerate("no rows".into()),
    }
    if rows.iter().any(|(v, r)| !v.is_finite() || !r.is_finite()) {
        return degenerate("non-finite value".into());
    }
    for pair in rows.windows(2) {
        let ((v0, r0), (v1, r1)) = (pair[0], pair[1]);
        let ordered = match dir {
            Direction::Increasing => v1 > v0,
            Direction::Decreasing => v1 < v0,
        };
        if !ordered || r1 <= r0 {
            return degenerate(format!("rows ({v0}, {r0}) and ({v1}, {r1}) are not strictly ordered"));
        }
    }
    Ok(())
}

/// Least-squares proportionality factor between accuracy drop and reduction.
pub fn fit_accuracy(table: &EmissionsTable) -> Result<f64> {
    table.validate()?;
    let (sxy, sxx) = table
        .accuracy_rows
        .iter()
        .map(|&(a, r)| (1.0 - a, r))
        .fold((0.0, 0.0), |(sxy, sxx), (x, r)| (sxy + x * r, sxx + x * x));
    if sxx == 0.0 {
        return Err(Error::DegenerateTable("all accuracy drops are zero".into()));
    }
    Ok(sxy / sxx)
}

/// Coefficients of `c2·(d-1)² + c1·(d-1)`: exact through two non-anchor rows,
/// least squares through the origin with more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyFit {
    pub c1: f64,
    pub c2: f64,
}

pub fn fit_latency(table: &EmissionsTable) -> Result<LatencyFit> {
    table.validate()?;
    let (mut s2, mut s3, mut s4, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, r) in &table.latency_rows {
        let x = d - 1.0;
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
        t1 += x * r;
        t2 += x * x * r;
    }
    // Normal equations [[s2, s3], [s3, s4]] · [c1, c2] = [t1, t2].
    let det = s2 * s4 - s3 * s3;
    if det.abs() <= 1e-12 * (s2 * s4).max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateTable(
            "latency rows need at least two distinct non-anchor latencies".into(),
        ));
    }
    Ok(LatencyFit {
        c1: (t1 * s4 - s3 * t2) / det,
        c2: (s2 * t2 - s3 * t1) / det,
    })
}

/// Reduction split into its accuracy and latency contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionBreakdown {
    /// Capped sum of the two contributions.
    pub total: f64,
    pub from_accuracy: f64,
    pub from_latency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionsModel {
    pub slope: f64,
    pub quad_c1: f64,
    pub quad_c2: f64,
    pub r_max: f64,
    pub accuracy_domain: (f64, f64),
    pub latency_domain: (f64, f64),
}

impl Default for EmissionsModel {
    fn default() -> Self {
        Self::fit(&EmissionsTable::default()).expect("built-in table is valid")
    }
}

impl EmissionsModel {
    pub const DEFAULT_CAP: f64 = 0.80;

    /// Fits both curves; domains are the hull of the table rows.
    pub fn fit(table: &EmissionsTable) -> Result<Self> {
        let slope = fit_accuracy(table)?;
        let LatencyFit { c1, c2 } = fit_latency(table)?;
        let a_min = table.accuracy_rows.iter().map(|r| r.0).fold(1.0, f64::min);
        let d_max = table.latency_rows.iter().map(|r| r.0).fold(1.0, f64::max);
        let model = Self {
            slope,
            quad_c1: c1,
            quad_c2: c2,
            r_max: Self::DEFAULT_CAP,
            accuracy_domain: (a_min, 1.0),
            latency_domain: (1.0, d_max),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_cap(mut self, r_max: f64) -> Result<Self> {
        self.r_max = r_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("slope", self.slope),
            ("quad_c1", self.quad_c1),
            ("quad_c2", self.quad_c2),
            ("r_max", self.r_max),
        ] {
            ensure_finite(name, v)?;
        }
        if !(self.r_max > 0.0 && self.r_max <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "r_max",
                value: self.r_max,
                reason: "must lie in (0, 1]",
            });
        }
        let (a_min, a_max) = self.accuracy_domain;
        if !(a_min < a_max && a_max == 1.0) {
            return Err(Error::InvalidParameter {
                name: "accuracy_domain",
                value: a_min,
                reason: "must be [a_min, 1] with a_min < 1",
            });
        }
        let (d_min, d_max) = self.latency_domain;
        if !(d_min == 1.0 && d_max > d_min && d_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "latency_domain",
                value: d_max,
                reason: "must be [1, d_max] with d_max > 1",
            });
        }
        Ok(())
    }

    /// Checks that the accuracy domain sits where the utility curves are defined.
    pub fn check_against(&self, constants: &UtilityConstants) -> Result<()> {
        let floor = constants.accuracy_floor();
        if self.accuracy_domain.0 <= floor {
            return Err(Error::InvalidParameter {
                name: "accuracy_domain",
                value: self.accuracy_domain.0,
                reason: "lower bound must lie above the accuracy utility floor",
            });
        }
        Ok(())
    }

    fn check_accuracy(&self, accuracy: f64) -> Result<()> {
        let (lo, hi) = self.accuracy_domain;
        if accuracy >= lo && accuracy <= hi {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity: "accuracy",
                value: accuracy,
                domain: format!("[{lo}, {hi}]"),
            })
        }
    }

    fn check_latency(&self, latency: f64) -> Result<()> {
        let (lo, hi) = self.latency_domain;
        if latency >= lo && latency <= hi {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity: "latency",
                value: latency,
                domain: format!("[{lo}, {hi}]"),
            })
        }
    }

    pub fn reduction_from_accuracy(&self, accuracy: f64) -> Result<f64> {
        self.check_accuracy(accuracy)?;
        Ok(self.accuracy_curve(accuracy))
    }

    pub fn reduction_from_latency(&self, latency: f64) -> Result<f64> {
        self.check_latency(latency)?;
        Ok(self.latency_curve(latency))
    }

    // Unchecked curve evaluations for callers that already hold in-domain values.
    pub(crate) fn accuracy_curve(&self, accuracy: f64) -> f64 {
        (self.slope * (1.0 - accuracy)).clamp(0.0, self.r_max)
    }

    pub(crate) fn latency_curve(&self, latency: f64) -> f64 {
        let x = latency - 1.0;
        (self.quad_c2 * x * x + self.quad_c1 * x).max(0.0)
    }

    /// Largest reduction the latency quadratic can deliver (its vertex value),
    /// and the latency at which it does.
    pub fn latency_peak(&self) -> (f64, f64) {
        if self.quad_c2 < 0.0 {
            let x = -self.quad_c1 / (2.0 * self.quad_c2);
            (self.quad_c1 * self.quad_c1 / (-4.0 * self.quad_c2), 1.0 + x)
        } else {
            let d = self.latency_domain.1;
            (self.latency_curve(d), d)
        }
    }

    /// Lowest latency achieving latency-side reduction `rho`.
    pub fn latency_for_reduction(&self, rho: f64) -> Result<f64> {
        let (rho_max, _) = self.latency_peak();
        if !(rho >= 0.0) {
            return Err(Error::Domain {
                quantity: "reduction",
                value: rho,
                domain: format!("[0, {rho_max}]"),
            });
        }
        if rho > rho_max {
            return Err(Error::InfeasibleReduction {
                requested: rho,
                max: rho_max,
            });
        }
        let (a, b) = (self.quad_c2, self.quad_c1);
        let x = if a == 0.0 {
            rho / b
        } else {
            // Smaller root of a·x² + b·x - rho = 0, written to avoid cancellation.
            let disc = (b * b + 4.0 * a * rho).max(0.0);
            2.0 * rho / (b + disc.sqrt())
        };
        let latency = 1.0 + x;
        self.check_latency(latency).map_err(|_| Error::InfeasibleReduction {
            requested: rho,
            max: self.latency_curve(self.latency_domain.1),
        })?;
        Ok(latency)
    }

    pub fn total_reduction(&self, point: QoEPoint) -> Result<ReductionBreakdown> {
        let from_accuracy = self.reduction_from_accuracy(point.accuracy)?;
        let from_latency = self.reduction_from_latency(point.latency)?;
        Ok(self.compose(from_accuracy, from_latency))
    }

    pub(crate) fn compose(&self, from_accuracy: f64, from_latency: f64) -> ReductionBreakdown {
        ReductionBreakdown {
            total: (from_accuracy + from_latency).min(self.r_max),
            from_accuracy,
            from_latency,
        }
    }
}

/// How closely the fitted curves track one table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResidual {
    pub kind: &'static str,
    pub value: f64,
    pub measured: f64,
    pub fitted: f64,
    pub residual: f64,
}

pub fn fit_residuals(table: &EmissionsTable, model: &EmissionsModel) -> Vec<FitResidual> {
    let acc = table.accuracy_rows.iter().map(|&(a, r)| {
        let fitted = model.slope * (1.0 - a);
        FitResidual {
            kind: "accuracy",
            value: a,
            measured: r,
            fitted,
            residual: fitted - r,
        }
    });
    let lat = table.latency_rows.iter().map(|&(d, r)| {
        let x = d - 1.0;
        let fitted = model.quad_c2 * x * x + model.quad_c1 * x;
        FitResidual {
            kind: "latency",
            value: d,
            measured: r,
            fitted,
            residual: fitted - r,
        }
    });
    acc.chain(lat).collect()
}
