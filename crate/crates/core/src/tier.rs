//! Two-tier subscription design from a daily carbon-intensity series.
//!
//! Each day whose grid intensity exceeds the threshold needs its per-query
//! emissions cut by `1 - T/I`. The cheapest incentive achieving that cut, and
//! the QoE the user then picks, are found per day. Days needing an incentive
//! form the low tier; its promise is the worst accuracy and latency over
//! those days.

use chrono::NaiveDate;

use crate::emissions::EmissionsModel;
use crate::error::{ensure_finite, Error, Result};
use crate::net_benefit::{ChoiceSearch, MinIncentive, OptimalChoice, PriceGrid, SearchGrid};
use crate::utility::{QoEPoint, UserProfile};

/// Grid carbon intensity for one day, gCO₂eq/kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyIntensity {
    pub date: NaiveDate,
    pub intensity: f64,
}

impl DailyIntensity {
    pub fn new(date: NaiveDate, intensity: f64) -> Result<Self> {
        if !(intensity > 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidParameter {
                name: "intensity",
                value: intensity,
                reason: "must be positive",
            });
        }
        Ok(Self { date, intensity })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierConfig {
    /// Target cap on effective carbon intensity, gCO₂eq/kWh.
    pub threshold: f64,
    pub profile: UserProfile,
    pub model: EmissionsModel,
    pub prices: PriceGrid,
    pub grid: SearchGrid,
}

impl TierConfig {
    pub const DEFAULT_THRESHOLD: f64 = 220.0;

    pub fn new(profile: UserProfile) -> Self {
        Self {
            threshold: Self::DEFAULT_THRESHOLD,
            profile,
            model: EmissionsModel::default(),
            prices: PriceGrid::default(),
            grid: SearchGrid::default(),
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("threshold", self.threshold)?;
        if self.threshold <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "threshold",
                value: self.threshold,
                reason: "must be positive",
            });
        }
        self.prices.validate()
    }
}

/// Fraction by which per-query emissions must fall so that
/// `intensity · (1 - r) <= threshold`.
pub fn required_reduction(intensity: f64, threshold: f64) -> Result<f64> {
    for (name, v) in [("intensity", intensity), ("threshold", threshold)] {
        ensure_finite(name, v)?;
        if v <= 0.0 {
            return Err(Error::Domain {
                quantity: name,
                value: v,
                domain: "(0, inf)".into(),
            });
        }
    }
    Ok((1.0 - threshold / intensity).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayPlan {
    pub date: NaiveDate,
    pub intensity: f64,
    pub required_reduction: f64,
    /// Zero when no action is needed.
    pub price: f64,
    pub choice: OptimalChoice,
    pub feasible: bool,
}

impl DayPlan {
    pub fn is_low_tier(&self) -> bool {
        self.price > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierPlan {
    pub days: Vec<DayPlan>,
    pub low_tier_fraction: f64,
    pub promised_accuracy: f64,
    pub promised_latency: f64,
    /// Charge-relative saving on low-tier days: Σ p·r / Σ p.
    pub discount: f64,
    pub infeasible_days: usize,
    /// Σ p·r / N, in utility units per day.
    pub absolute_saving: f64,
}

/// Per-day planner sharing one precomputed search across days.
pub struct TierDesigner {
    config: TierConfig,
    search: ChoiceSearch,
    best: OptimalChoice,
}

impl TierDesigner {
    pub fn new(config: TierConfig) -> Result<Self> {
        config.validate()?;
        let search = ChoiceSearch::new(&config.profile, &config.model, &config.grid)?;
        let best = crate::net_benefit::net_benefit_at(QoEPoint::BEST, &config.profile, &config.model, 0.0)?;
        Ok(Self { config, search, best })
    }

    pub fn config(&self) -> &TierConfig {
        &self.config
    }

    pub fn plan_day(&self, day: DailyIntensity) -> Result<DayPlan> {
        let required = required_reduction(day.intensity, self.config.threshold)?;
        if required == 0.0 {
            return Ok(DayPlan {
                date: day.date,
                intensity: day.intensity,
                required_reduction: 0.0,
                price: 0.0,
                choice: self.best,
                feasible: true,
            });
        }
        let outcome = if required > self.config.model.r_max {
            let max_price = self.config.prices.stop;
            MinIncentive::Infeasible {
                max_price,
                choice: self.search.optimize(max_price)?,
            }
        } else {
            self.search.min_incentive(required, &self.config.prices)?
        };
        let (price, choice, feasible) = match outcome {
            MinIncentive::Found { price, choice } => (price, choice, true),
            MinIncentive::Infeasible { max_price, choice } => (max_price, choice, false),
        };
        Ok(DayPlan {
            date: day.date,
            intensity: day.intensity,
            required_reduction: required,
            price,
            choice,
            feasible,
        })
    }

    pub fn design(&self, series: &[DailyIntensity]) -> Result<TierPlan> {
        if series.is_empty() {
            return Err(Error::EmptySeries);
        }
        let mut sorted = series.to_vec();
        sorted.sort_by_key(|d| d.date);
        if let Some(w) = sorted.windows(2).find(|w| w[0].date == w[1].date) {
            let line = series.iter().rposition(|d| d.date == w[0].date).unwrap_or(0) as u64 + 1;
            return Err(Error::DuplicateDate {
                line,
                date: w[0].date.to_string(),
            });
        }
        let days = sorted
            .into_iter()
            .map(|d| self.plan_day(d))
            .collect::<Result<Vec<_>>>()?;
        Ok(aggregate(days))
    }
}

fn aggregate(days: Vec<DayPlan>) -> TierPlan {
    let n = days.len() as f64;
    let low: Vec<&DayPlan> = days.iter().filter(|d| d.is_low_tier()).collect();
    let infeasible_days = days.iter().filter(|d| !d.feasible).count();
    if low.is_empty() {
        return TierPlan {
            days,
            low_tier_fraction: 0.0,
            promised_accuracy: 1.0,
            promised_latency: 1.0,
            discount: 0.0,
            infeasible_days,
            absolute_saving: 0.0,
        };
    }
    let promised_accuracy = low.iter().map(|d| d.choice.accuracy).fold(f64::INFINITY, f64::min);
    let promised_latency = low.iter().map(|d| d.choice.latency).fold(f64::NEG_INFINITY, f64::max);
    let saved: f64 = low.iter().map(|d| d.price * d.choice.reduction).sum();
    let paid: f64 = low.iter().map(|d| d.price).sum();
    TierPlan {
        low_tier_fraction: low.len() as f64 / n,
        promised_accuracy,
        promised_latency,
        discount: saved / paid,
        infeasible_days,
        absolute_saving: saved / n,
        days,
    }
}

pub fn plan_day(day: DailyIntensity, config: &TierConfig) -> Result<DayPlan> {
    TierDesigner::new(config.clone())?.plan_day(day)
}

pub fn design_tier(series: &[DailyIntensity], config: &TierConfig) -> Result<TierPlan> {
    TierDesigner::new(config.clone())?.design(series)
}

/// Coarser search grid that keeps unit tests fast in debug builds.
#[cfg(test)]
pub(crate) fn coarse_config(profile: UserProfile) -> TierConfig {
    TierConfig {
        grid: SearchGrid::new(0.002, 0.002).unwrap(),
        ..TierConfig::new(profile)
    }
}
