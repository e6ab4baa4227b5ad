//! User utility over inference accuracy and latency.
//!
//! Accuracy utility is an increasing concave curve on normalized accuracy,
//! latency utility a flipped sigmoid on normalized latency. A user's total
//! utility is the λ-weighted sum of the two.

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};

/// Shape constants shared by every user type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityConstants {
    pub accuracy_scale: f64,
    pub latency_offset: f64,
    pub latency_steepness: f64,
    pub log_base: f64,
}

impl Default for UtilityConstants {
    fn default() -> Self {
        Self {
            accuracy_scale: 6.5,
            latency_offset: 7.0,
            latency_steepness: 70.0,
            log_base: 10.0,
        }
    }
}

impl UtilityConstants {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("accuracy_scale", self.accuracy_scale)?;
        ensure_finite("latency_offset", self.latency_offset)?;
        ensure_finite("latency_steepness", self.latency_steepness)?;
        ensure_finite("log_base", self.log_base)?;
        if self.accuracy_scale <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "accuracy_scale",
                value: self.accuracy_scale,
                reason: "must be positive",
            });
        }
        if self.latency_steepness <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "latency_steepness",
                value: self.latency_steepness,
                reason: "must be positive",
            });
        }
        if self.log_base <= 1.0 {
            return Err(Error::InvalidParameter {
                name: "log_base",
                value: self.log_base,
                reason: "must be greater than 1",
            });
        }
        Ok(())
    }

    /// Accuracy utility is defined strictly above this value.
    pub fn accuracy_floor(&self) -> f64 {
        1.0 - 1.0 / self.accuracy_scale
    }
}

/// One user type: how much accuracy matters relative to latency (`lambda`),
/// how sensitive the user is to accuracy loss (`b`), and where their latency
/// tolerance sits (`x`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserProfile {
    pub lambda: f64,
    pub b: f64,
    pub x: f64,
    #[serde(skip)]
    pub constants: UtilityConstants,
}

impl UserProfile {
    pub const HIGH_QUALITY_B: f64 = 2.0;
    pub const HIGH_QUALITY_X: f64 = 1.0;
    pub const GREEN_B: f64 = 5.0;
    pub const GREEN_X: f64 = 1.1;

    pub fn new(lambda: f64, b: f64, x: f64) -> Result<Self> {
        Self::with_constants(lambda, b, x, UtilityConstants::default())
    }

    pub fn with_constants(lambda: f64, b: f64, x: f64, constants: UtilityConstants) -> Result<Self> {
        let profile = Self {
            lambda,
            b,
            x,
            constants,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Accuracy- and latency-sensitive user.
    pub fn high_quality(lambda: f64) -> Result<Self> {
        Self::new(lambda, Self::HIGH_QUALITY_B, Self::HIGH_QUALITY_X)
    }

    /// Environmentally conscious user, tolerant of lower accuracy and higher latency.
    pub fn green(lambda: f64) -> Result<Self> {
        Self::new(lambda, Self::GREEN_B, Self::GREEN_X)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("lambda", self.lambda)?;
        ensure_finite("b", self.b)?;
        ensure_finite("x", self.x)?;
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: self.lambda,
                reason: "must lie in [0, 1]",
            });
        }
        if self.b <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "b",
                value: self.b,
                reason: "must be positive",
            });
        }
        if self.x < 1.0 {
            return Err(Error::InvalidParameter {
                name: "x",
                value: self.x,
                reason: "must be at least 1",
            });
        }
        self.constants.validate()
    }

    pub fn accuracy_utility(&self, accuracy: f64) -> Result<f64> {
        let c = &self.constants;
        let floor = c.accuracy_floor();
        if !(accuracy > floor && accuracy <= 1.0) {
            return Err(Error::Domain {
                quantity: "accuracy",
                value: accuracy,
                domain: format!("({floor}, 1]"),
            });
        }
        let arg = 2.0 / (1.0 - c.accuracy_scale * (1.0 - accuracy)) - 1.0;
        if !(arg > 0.0) || !arg.is_finite() {
            return Err(Error::Domain {
                quantity: "accuracy",
                value: accuracy,
                domain: "positive logarithm argument".into(),
            });
        }
        Ok(1.0 - arg.log(c.log_base) / self.b)
    }

    pub fn latency_utility(&self, latency: f64) -> Result<f64> {
        if !(latency >= 1.0) || !latency.is_finite() {
            return Err(Error::Domain {
                quantity: "latency",
                value: latency,
                domain: "[1, inf)".into(),
            });
        }
        let c = &self.constants;
        // 1 - 1/(1 + e^z) == 1/(1 + e^-z), which stays finite for large |z|.
        let z = c.latency_offset - c.latency_steepness * (latency - self.x);
        Ok(1.0 / (1.0 + (-z).exp()))
    }

    pub fn total_utility(&self, point: QoEPoint) -> Result<f64> {
        let ua = self.accuracy_utility(point.accuracy)?;
        let ul = self.latency_utility(point.latency)?;
        Ok(self.combine(ua, ul))
    }

    /// λ-weighted sum of already evaluated component utilities.
    pub fn combine(&self, accuracy_utility: f64, latency_utility: f64) -> f64 {
        if self.lambda == 1.0 {
            accuracy_utility
        } else if self.lambda == 0.0 {
            latency_utility
        } else {
            self.lambda * accuracy_utility + (1.0 - self.lambda) * latency_utility
        }
    }

    /// Closed-form inverse of [`accuracy_utility`](Self::accuracy_utility).
    pub fn accuracy_for_utility(&self, utility: f64) -> Result<f64> {
        let c = &self.constants;
        let out_of_range = |value: f64| Error::OutOfRange {
            quantity: "accuracy",
            utility,
            value,
            domain: format!("({}, 1]", c.accuracy_floor()),
        };
        if !(utility > 0.0 && utility <= 1.0) {
            return Err(out_of_range(f64::NAN));
        }
        let q = 2.0 / (1.0 + c.log_base.powf(self.b * (1.0 - utility)));
        let accuracy = 1.0 - (1.0 - q) / c.accuracy_scale;
        if !(accuracy > c.accuracy_floor() && accuracy <= 1.0) {
            return Err(out_of_range(accuracy));
        }
        Ok(accuracy)
    }

    /// Inverse sigmoid: the latency at which latency utility equals `utility`.
    pub fn latency_for_utility(&self, utility: f64) -> Result<f64> {
        if !(utility > 0.0 && utility < 1.0) {
            return Err(Error::Domain {
                quantity: "utility",
                value: utility,
                domain: "(0, 1)".into(),
            });
        }
        let c = &self.constants;
        let logit = (utility / (1.0 - utility)).ln();
        let latency = self.x + (c.latency_offset - logit) / c.latency_steepness;
        if latency < 1.0 {
            return Err(Error::OutOfRange {
                quantity: "latency",
                utility,
                value: latency,
                domain: "[1, inf)".into(),
            });
        }
        Ok(latency)
    }
}

/// A normalized (accuracy, latency) operating point. Accuracy 1 and latency 1
/// are the best achievable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QoEPoint {
    pub accuracy: f64,
    pub latency: f64,
}

impl QoEPoint {
    pub const BEST: QoEPoint = QoEPoint {
        accuracy: 1.0,
        latency: 1.0,
    };

    pub fn new(accuracy: f64, latency: f64) -> Result<Self> {
        if !(accuracy <= 1.0) || !accuracy.is_finite() {
            return Err(Error::Domain {
                quantity: "accuracy",
                value: accuracy,
                domain: "(-inf, 1]".into(),
            });
        }
        if !(latency >= 1.0) || !latency.is_finite() {
            return Err(Error::Domain {
                quantity: "latency",
                value: latency,
                domain: "[1, inf)".into(),
            });
        }
        Ok(Self { accuracy, latency })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hq() -> UserProfile {
        UserProfile::high_quality(0.5).unwrap()
    }

    fn green() -> UserProfile {
        UserProfile::green(0.5).unwrap()
    }

    #[test]
    fn accuracy_utility_checkpoints() {
        assert_eq!(hq().accuracy_utility(1.0).unwrap(), 1.0);
        assert_eq!(green().accuracy_utility(1.0).unwrap(), 1.0);
        // 30-digit reference evaluations of the closed form.
        assert_abs_diff_eq!(hq().accuracy_utility(0.88).unwrap(), 0.546_001_339_256_656, epsilon = 1e-12);
        assert_abs_diff_eq!(green().accuracy_utility(0.93).unwrap(), 0.914_706_701_790_943, epsilon = 1e-12);
    }

    #[test]
    fn accuracy_utility_rejects_outside_domain() {
        let p = hq();
        let floor = p.constants.accuracy_floor();
        assert!(matches!(p.accuracy_utility(floor), Err(Error::Domain { .. })));
        assert!(matches!(p.accuracy_utility(0.5), Err(Error::Domain { .. })));
        assert!(matches!(p.accuracy_utility(1.0001), Err(Error::Domain { .. })));
        assert!(matches!(p.accuracy_utility(f64::NAN), Err(Error::Domain { .. })));
        assert!(p.accuracy_utility(floor + 1e-6).is_ok());
    }

    #[test]
    fn latency_utility_checkpoints() {
        assert_abs_diff_eq!(hq().latency_utility(1.1).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(green().latency_utility(1.2).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hq().latency_utility(1.0).unwrap(), 1.0 / (1.0 + (-7.0f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(hq().latency_utility(1.0).unwrap(), 0.999_088_948_805_599, epsilon = 1e-12);
        assert_abs_diff_eq!(green().latency_utility(1.15).unwrap(), 0.970_687_769_248_644, epsilon = 1e-12);
        assert!(matches!(hq().latency_utility(0.99), Err(Error::Domain { .. })));
    }

    #[test]
    fn total_utility_mixes_components() {
        let p = hq();
        let u = p.total_utility(QoEPoint::new(1.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(u, 0.5 + 0.5 / (1.0 + (-7.0f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(u, 0.999_544_474_402_8, epsilon = 1e-12);

        let point = QoEPoint::new(0.93, 1.06).unwrap();
        let acc_only = UserProfile::high_quality(1.0).unwrap();
        assert_eq!(
            acc_only.total_utility(point).unwrap(),
            acc_only.accuracy_utility(0.93).unwrap()
        );
        let lat_only = UserProfile::high_quality(0.0).unwrap();
        assert_eq!(
            lat_only.total_utility(point).unwrap(),
            lat_only.latency_utility(1.06).unwrap()
        );
    }

    #[test]
    fn inverses_match_reference_values() {
        assert_eq!(hq().accuracy_for_utility(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(hq().accuracy_for_utility(0.8).unwrap(), 0.933_768_384_292_554, epsilon = 1e-12);
        assert_abs_diff_eq!(green().accuracy_for_utility(0.8).unwrap(), 0.874_125_874_125_874, epsilon = 1e-12);

        assert_abs_diff_eq!(hq().latency_for_utility(0.5).unwrap(), 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(hq().latency_for_utility(0.8).unwrap(), 1.080_195_794_841_144, epsilon = 1e-12);
        assert_abs_diff_eq!(green().latency_for_utility(0.8).unwrap(), 1.180_195_794_841_144, epsilon = 1e-12);
    }

    #[test]
    fn inverse_errors() {
        assert!(matches!(hq().latency_for_utility(0.0), Err(Error::Domain { .. })));
        assert!(matches!(hq().latency_for_utility(1.0), Err(Error::Domain { .. })));
        // X = 1 cannot reach utility above σ(7) at latency >= 1.
        assert!(matches!(hq().latency_for_utility(0.9999), Err(Error::OutOfRange { .. })));
        assert!(matches!(hq().accuracy_for_utility(1.2), Err(Error::OutOfRange { .. })));
        assert!(matches!(hq().accuracy_for_utility(0.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn profile_validation() {
        assert!(UserProfile::new(1.2, 2.0, 1.0).is_err());
        assert!(UserProfile::new(0.5, 0.0, 1.0).is_err());
        assert!(UserProfile::new(0.5, 2.0, 0.9).is_err());
        let bad = UtilityConstants {
            log_base: 1.0,
            ..UtilityConstants::default()
        };
        assert!(UserProfile::with_constants(0.5, 2.0, 1.0, bad).is_err());
        assert!(QoEPoint::new(1.01, 1.0).is_err());
        assert!(QoEPoint::new(0.9, 0.99).is_err());
    }

    #[test]
    fn natural_log_calibration_is_configurable() {
        let c = UtilityConstants {
            log_base: std::f64::consts::E,
            ..UtilityConstants::default()
        };
        let p = UserProfile::with_constants(0.5, 2.0, 1.0, c).unwrap();
        let arg: f64 = 2.0 / (1.0 - 6.5 * 0.12) - 1.0;
        assert_abs_diff_eq!(p.accuracy_utility(0.88).unwrap(), 1.0 - arg.ln() / 2.0, epsilon = 1e-15);
    }
}
