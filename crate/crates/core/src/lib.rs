//! Carbon-aware incentives for AI inference.
//!
//! Users value inference accuracy and latency through a λ-weighted utility;
//! lowering either cuts carbon emissions according to a fitted trade-off
//! model. Under a per-unit-emissions charge each user picks the QoE that
//! maximizes utility minus charge, and a two-tier subscription is derived
//! from the incentives needed to keep daily effective carbon intensity under
//! a cap.

pub mod cli;
pub mod data;
pub mod emissions;
pub mod error;
pub mod net_benefit;
pub mod tier;
pub mod utility;

pub use data::{parse_intensity_csv, write_report, Format, Report};
pub use emissions::{EmissionsModel, EmissionsTable, ReductionBreakdown};
pub use error::{Error, Result};
pub use net_benefit::{
    charge, min_incentive_for_reduction, net_benefit_at, optimize_choice, sweep_incentives, ChoiceSearch,
    LabeledProfile, MinIncentive, OptimalChoice, PriceGrid, SearchGrid,
};
pub use tier::{design_tier, plan_day, required_reduction, DailyIntensity, DayPlan, TierConfig, TierPlan};
pub use utility::{QoEPoint, UserProfile, UtilityConstants};
