//! Carbon charge, net benefit and each user's best (accuracy, latency) choice
//! under a given incentive.
//!
//! A user pays `p·(1 - r)` for a query whose emissions are reduced by `r` and
//! picks the operating point maximizing utility minus that charge. The search
//! is exhaustive over an (accuracy, latency) grid covering the emissions
//! model's domain; ties prefer larger reduction, then larger accuracy, then
//! smaller latency, which keeps the chosen reduction nondecreasing in `p`.

use serde::Serialize;

use crate::emissions::EmissionsModel;
use crate::error::{ensure_finite, Error, Result};
use crate::utility::{QoEPoint, UserProfile};

pub fn charge(reduction: f64, price: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&reduction) {
        return Err(Error::Domain {
            quantity: "reduction",
            value: reduction,
            domain: "[0, 1]".into(),
        });
    }
    check_price(price)?;
    Ok(price * (1.0 - reduction))
}

fn check_price(price: f64) -> Result<()> {
    ensure_finite("price", price)?;
    if price < 0.0 {
        return Err(Error::InvalidParameter {
            name: "price",
            value: price,
            reason: "must be non-negative",
        });
    }
    Ok(())
}

/// A fully evaluated operating point: QoE, reduction, utility and what the
/// user pays for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalChoice {
    pub accuracy: f64,
    pub latency: f64,
    pub reduction: f64,
    pub reduction_from_accuracy: f64,
    pub reduction_from_latency: f64,
    pub utility: f64,
    pub charge: f64,
    pub net_benefit: f64,
}

impl OptimalChoice {
    /// Full QoE, no reduction.
    pub fn is_best_qoe(&self) -> bool {
        self.accuracy == 1.0 && self.latency == 1.0 && self.reduction == 0.0
    }
}

/// Evaluates net benefit at one point without optimizing.
pub fn net_benefit_at(
    point: QoEPoint,
    profile: &UserProfile,
    model: &EmissionsModel,
    price: f64,
) -> Result<OptimalChoice> {
    check_price(price)?;
    let reduction = model.total_reduction(point)?;
    let utility = profile.total_utility(point)?;
    let charge = charge(reduction.total, price)?;
    Ok(OptimalChoice {
        accuracy: point.accuracy,
        latency: point.latency,
        reduction: reduction.total,
        reduction_from_accuracy: reduction.from_accuracy,
        reduction_from_latency: reduction.from_latency,
        utility,
        charge,
        net_benefit: utility - charge,
    })
}

/// Step sizes of the (accuracy, latency) search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchGrid {
    pub accuracy_step: f64,
    pub latency_step: f64,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            accuracy_step: 0.0005,
            latency_step: 0.0005,
        }
    }
}

impl SearchGrid {
    pub fn new(accuracy_step: f64, latency_step: f64) -> Result<Self> {
        let grid = Self {
            accuracy_step,
            latency_step,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, step) in [("accuracy_step", self.accuracy_step), ("latency_step", self.latency_step)] {
            ensure_finite(name, step)?;
            if step <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value: step,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }

    /// Accuracy values from 1 down to the domain minimum, both included.
    pub fn accuracy_values(&self, model: &EmissionsModel) -> Vec<f64> {
        let (lo, hi) = model.accuracy_domain;
        span(hi, lo, -self.accuracy_step)
    }

    /// Latency values from 1 up to the domain maximum, both included.
    pub fn latency_values(&self, model: &EmissionsModel) -> Vec<f64> {
        let (lo, hi) = model.latency_domain;
        span(lo, hi, self.latency_step)
    }
}

/// `from, from + step, …` up to and including `to`. Points are computed as
/// `from + i·step` so that `from` is exact, and the far endpoint is pinned.
fn span(from: f64, to: f64, step: f64) -> Vec<f64> {
    let width = (to - from) / step;
    let n = (width + 1e-9).floor() as usize;
    let mut values: Vec<f64> = (0..=n).map(|i| from + i as f64 * step).collect();
    let last = values.last_mut().expect("at least one point");
    if (*last - to).abs() <= 1e-9 * step.abs() * width.max(1.0) {
        *last = to;
    } else {
        values.push(to);
    }
    values
}

/// Ascending grid of candidate incentives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for PriceGrid {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 2.0,
            step: 0.005,
        }
    }
}

impl PriceGrid {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("p_step", self.step)?;
        check_price(self.start)?;
        check_price(self.stop)?;
        if self.step <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "p_step",
                value: self.step,
                reason: "must be positive",
            });
        }
        if self.stop < self.start {
            return Err(Error::InvalidParameter {
                name: "p_max",
                value: self.stop,
                reason: "must not be below the first price",
            });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.stop == self.start {
            return vec![self.start];
        }
        span(self.start, self.stop, self.step)
    }
}

// `weighted` is the component utility already multiplied by its λ weight.
struct AccuracyCell {
    accuracy: f64,
    weighted: f64,
    reduction: f64,
}

struct LatencyCell {
    latency: f64,
    weighted: f64,
    reduction: f64,
}

/// Precomputed utilities and reductions on a search grid for one user, so
/// that repeated optimizations at different prices only do arithmetic.
pub struct ChoiceSearch {
    model: EmissionsModel,
    accuracy: Vec<AccuracyCell>,
    latency: Vec<LatencyCell>,
}

impl ChoiceSearch {
    pub fn new(profile: &UserProfile, model: &EmissionsModel, grid: &SearchGrid) -> Result<Self> {
        profile.validate()?;
        model.validate()?;
        model.check_against(&profile.constants)?;
        grid.validate()?;
        let accuracy = grid
            .accuracy_values(model)
            .into_iter()
            .map(|a| {
                Ok(AccuracyCell {
                    accuracy: a,
                    weighted: profile.lambda * profile.accuracy_utility(a)?,
                    reduction: model.reduction_from_accuracy(a)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let latency = grid
            .latency_values(model)
            .into_iter()
            .map(|d| {
                Ok(LatencyCell {
                    latency: d,
                    weighted: (1.0 - profile.lambda) * profile.latency_utility(d)?,
                    reduction: model.reduction_from_latency(d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: *model,
            accuracy,
            latency,
        })
    }

    pub fn grid_size(&self) -> (usize, usize) {
        (self.accuracy.len(), self.latency.len())
    }

    pub fn optimize(&self, price: f64) -> Result<OptimalChoice> {
        check_price(price)?;
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for (i, ac) in self.accuracy.iter().enumerate() {
            for (j, lc) in self.latency.iter().enumerate() {
                let r = (ac.reduction + lc.reduction).min(self.model.r_max);
                let nb = (ac.weighted + lc.weighted) - price * (1.0 - r);
                let better = match best {
                    None => true,
                    Some((bnb, br, bi, bj)) => {
                        nb > bnb
                            || (nb == bnb
                                && (r > br
                                    || (r == br
                                        && (ac.accuracy > self.accuracy[bi].accuracy
                                            || (ac.accuracy == self.accuracy[bi].accuracy
                                                && lc.latency < self.latency[bj].latency)))))
                    }
                };
                if better {
                    best = Some((nb, r, i, j));
                }
            }
        }
        let (_, _, i, j) = best.expect("grid is never empty");
        Ok(self.choice_at(i, j, price))
    }

    fn choice_at(&self, i: usize, j: usize, price: f64) -> OptimalChoice {
        let (ac, lc) = (&self.accuracy[i], &self.latency[j]);
        let reduction = self.model.compose(ac.reduction, lc.reduction);
        let utility = ac.weighted + lc.weighted;
        let charge = price * (1.0 - reduction.total);
        OptimalChoice {
            accuracy: ac.accuracy,
            latency: lc.latency,
            reduction: reduction.total,
            reduction_from_accuracy: reduction.from_accuracy,
            reduction_from_latency: reduction.from_latency,
            utility,
            charge,
            net_benefit: utility - charge,
        }
    }

    /// Smallest grid price whose optimal choice reaches `target` reduction.
    pub fn min_incentive(&self, target: f64, prices: &PriceGrid) -> Result<MinIncentive> {
        ensure_finite("target_reduction", target)?;
        if target < 0.0 {
            return Err(Error::Domain {
                quantity: "target_reduction",
                value: target,
                domain: format!("[0, {}]", self.model.r_max),
            });
        }
        if target > self.model.r_max {
            return Err(Error::InvalidTarget {
                target,
                cap: self.model.r_max,
            });
        }
        prices.validate()?;
        let values = prices.values();
        let last = *values.last().expect("price grid is never empty");
        let at_max = self.optimize(last)?;
        if at_max.reduction < target {
            return Ok(MinIncentive::Infeasible {
                max_price: last,
                choice: at_max,
            });
        }
        // The optimal reduction is nondecreasing in price, so bisect for the
        // first grid price that reaches the target.
        let (mut lo, mut hi) = (0usize, values.len() - 1);
        let mut hi_choice = at_max;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let choice = self.optimize(values[mid])?;
            if choice.reduction >= target {
                hi = mid;
                hi_choice = choice;
            } else {
                lo = mid + 1;
            }
        }
        Ok(MinIncentive::Found {
            price: values[hi],
            choice: hi_choice,
        })
    }
}

/// Outcome of searching for the cheapest incentive reaching a reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinIncentive {
    Found { price: f64, choice: OptimalChoice },
    /// Even the largest grid price falls short; carries the choice made at it.
    Infeasible { max_price: f64, choice: OptimalChoice },
}

impl MinIncentive {
    pub fn price(&self) -> Option<f64> {
        match self {
            MinIncentive::Found { price, .. } => Some(*price),
            MinIncentive::Infeasible { .. } => None,
        }
    }
}

pub fn optimize_choice(
    profile: &UserProfile,
    model: &EmissionsModel,
    price: f64,
    grid: &SearchGrid,
) -> Result<OptimalChoice> {
    ChoiceSearch::new(profile, model, grid)?.optimize(price)
}

pub fn min_incentive_for_reduction(
    profile: &UserProfile,
    model: &EmissionsModel,
    target: f64,
    prices: &PriceGrid,
    grid: &SearchGrid,
) -> Result<MinIncentive> {
    ChoiceSearch::new(profile, model, grid)?.min_incentive(target, prices)
}

/// A user profile with a short name used in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProfile {
    pub label: String,
    pub profile: UserProfile,
}

impl LabeledProfile {
    pub fn new(label: impl Into<String>, profile: UserProfile) -> Self {
        Self {
            label: label.into(),
            profile,
        }
    }
}

/// High-quality and green users, each with λ = 0.5 and λ = 0.9.
pub fn paper_profiles() -> Vec<LabeledProfile> {
    let mut out = Vec::with_capacity(4);
    for lambda in [0.5, 0.9] {
        out.push(LabeledProfile::new("hq", UserProfile::high_quality(lambda).expect("valid preset")));
    }
    for lambda in [0.5, 0.9] {
        out.push(LabeledProfile::new("green", UserProfile::green(lambda).expect("valid preset")));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub profile: String,
    pub lambda: f64,
    pub b: f64,
    pub x: f64,
    pub price: f64,
    pub choice: OptimalChoice,
}

/// One optimal choice per (profile, price), profiles outermost, in input order.
pub fn sweep_incentives(
    profiles: &[LabeledProfile],
    prices: &[f64],
    model: &EmissionsModel,
    grid: &SearchGrid,
) -> Result<Vec<SweepRow>> {
    if profiles.is_empty() {
        return Err(Error::InvalidParameter {
            name: "profiles",
            value: 0.0,
            reason: "at least one profile is required",
        });
    }
    if prices.is_empty() {
        return Err(Error::InvalidParameter {
            name: "prices",
            value: 0.0,
            reason: "at least one price is required",
        });
    }
    let mut rows = Vec::with_capacity(profiles.len() * prices.len());
    for lp in profiles {
        let search = ChoiceSearch::new(&lp.profile, model, grid)?;
        for &price in prices {
            rows.push(SweepRow {
                profile: lp.label.clone(),
                lambda: lp.profile.lambda,
                b: lp.profile.b,
                x: lp.profile.x,
                price,
                choice: search.optimize(price)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hq(lambda: f64) -> UserProfile {
        UserProfile::high_quality(lambda).unwrap()
    }

    #[test]
    fn charge_examples() {
        assert_abs_diff_eq!(charge(0.0, 0.3).unwrap(), 0.3);
        assert_abs_diff_eq!(charge(0.2, 1.0).unwrap(), 0.8);
        assert_abs_diff_eq!(charge(0.8, 0.5).unwrap(), 0.1, epsilon = 1e-15);
        assert!(charge(1.1, 0.5).is_err());
        assert!(charge(-0.1, 0.5).is_err());
        assert!(charge(0.5, -1.0).is_err());
    }

    #[test]
    fn evaluated_net_benefit() {
        let m = EmissionsModel::default();
        let p = hq(0.5);
        let c = net_benefit_at(QoEPoint::BEST, &p, &m, 0.0).unwrap();
        assert_abs_diff_eq!(c.net_benefit, 0.999_544_474_402_8, epsilon = 1e-12);
        let c3 = net_benefit_at(QoEPoint::BEST, &p, &m, 0.3).unwrap();
        assert_abs_diff_eq!(c3.net_benefit, c.utility - 0.3, epsilon = 1e-15);

        let c = net_benefit_at(QoEPoint::new(0.93, 1.06).unwrap(), &p, &m, 0.3).unwrap();
        let ua = p.accuracy_utility(0.93).unwrap();
        let ul = p.latency_utility(1.06).unwrap();
        assert_abs_diff_eq!(c.utility, 0.5 * ua + 0.5 * ul, epsilon = 1e-15);
        // base-10 accuracy utility; 25-digit reference evaluation
        assert_abs_diff_eq!(c.utility, 0.864_721_289_289_245, epsilon = 1e-12);
        assert_abs_diff_eq!(c.reduction, 0.550_129_493_850_520, epsilon = 1e-12);
        assert_abs_diff_eq!(c.net_benefit, 0.729_760_137_444_401, epsilon = 1e-12);
        assert!(net_benefit_at(QoEPoint::new(0.85, 1.0).unwrap(), &p, &m, 0.3).is_err());
    }

    #[test]
    fn grids_include_both_endpoints() {
        let m = EmissionsModel::default();
        let g = SearchGrid::default();
        let a = g.accuracy_values(&m);
        let d = g.latency_values(&m);
        assert_eq!((a.len(), d.len()), (241, 561));
        assert_eq!((a[0], *a.last().unwrap()), (1.0, 0.88));
        assert_eq!((d[0], *d.last().unwrap()), (1.0, 1.28));

        let odd = SearchGrid::new(0.07, 0.1).unwrap();
        let a = odd.accuracy_values(&m);
        assert_eq!(a.len(), 3);
        assert_eq!(*a.last().unwrap(), 0.88);
        let d = odd.latency_values(&m);
        assert_eq!(*d.last().unwrap(), 1.28);
        assert!(SearchGrid::new(0.0, 0.1).is_err());
    }

    #[test]
    fn price_grid_values() {
        let v = PriceGrid::default().values();
        assert_eq!(v.len(), 401);
        assert_eq!((v[0], v[400]), (0.0, 2.0));
        let single = PriceGrid { start: 0.3, stop: 0.3, step: 0.1 };
        assert_eq!(single.values(), vec![0.3]);
        assert!(PriceGrid { start: 1.0, stop: 0.5, step: 0.1 }.validate().is_err());
    }

    #[test]
    fn zero_price_keeps_full_qoe() {
        let m = EmissionsModel::default();
        for lp in paper_profiles() {
            let c = optimize_choice(&lp.profile, &m, 0.0, &SearchGrid::default()).unwrap();
            assert!(c.is_best_qoe(), "{lp:?} -> {c:?}");
        }
    }

    #[test]
    fn min_incentive_edges() {
        let m = EmissionsModel::default();
        let s = ChoiceSearch::new(&hq(0.5), &m, &SearchGrid::default()).unwrap();
        let prices = PriceGrid::default();
        assert_eq!(s.min_incentive(0.0, &prices).unwrap().price(), Some(0.0));
        assert!(matches!(
            s.min_incentive(0.9, &prices),
            Err(Error::InvalidTarget { .. })
        ));
        let tiny = PriceGrid { start: 0.0, stop: 0.05, step: 0.005 };
        assert!(matches!(
            s.min_incentive(0.5, &tiny).unwrap(),
            MinIncentive::Infeasible { .. }
        ));
    }

    #[test]
    fn sweep_rejects_empty_inputs() {
        let m = EmissionsModel::default();
        let g = SearchGrid::default();
        assert!(sweep_incentives(&[], &[0.1], &m, &g).is_err());
        assert!(sweep_incentives(&paper_profiles(), &[], &m, &g).is_err());
    }

    #[test]
    fn single_cell_sweep_matches_optimizer() {
        let m = EmissionsModel::default();
        let g = SearchGrid::new(0.002, 0.002).unwrap();
        let lp = LabeledProfile::new("hq", hq(0.5));
        let rows = sweep_incentives(std::slice::from_ref(&lp), &[0.3], &m, &g).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].choice, optimize_choice(&lp.profile, &m, 0.3, &g).unwrap());
    }
}
