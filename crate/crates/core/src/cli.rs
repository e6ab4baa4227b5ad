//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{
    parse_emissions_csv, parse_intensity_csv, write_report, CurveSamples, FitReport, Format, Report,
};
use crate::emissions::{EmissionsModel, EmissionsTable};
use crate::error::Error;
use crate::net_benefit::{
    optimize_choice, paper_profiles, sweep_incentives, LabeledProfile, PriceGrid, SearchGrid,
};
use crate::tier::{TierConfig, TierDesigner};
use crate::utility::{UserProfile, UtilityConstants};

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "carbon-incentive",
    version,
    about = "Carbon-aware incentives for AI inference QoE"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample accuracy or latency utility curves for sensitive and green users
    Curves(CurvesArgs),
    /// Best (accuracy, latency) choice for one user at one incentive
    Optimize(OptimizeArgs),
    /// Best choices for several users across several incentives
    Sweep(SweepArgs),
    /// Fitted emissions coefficients and residuals against the table
    Fit(FitArgs),
    /// Two-tier subscription plan from a daily carbon-intensity CSV
    Tier(TierArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    Hq,
    Green,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveChoice {
    Accuracy,
    Latency,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// csv or json
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Write the report here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long, value_enum)]
    pub profile: Option<ProfileKind>,
    /// Weight of accuracy relative to latency
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Accuracy sensitivity (custom profiles)
    #[arg(long)]
    pub b: Option<f64>,
    /// Latency tolerance (custom profiles)
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub log_base: f64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Emissions table CSV (kind,value,reduction); built-in table if omitted
    #[arg(long)]
    pub emissions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0005)]
    pub a_step: f64,
    #[arg(long, default_value_t = 0.0005)]
    pub d_step: f64,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, value_enum, default_value = "accuracy")]
    pub curve: CurveChoice,
    #[arg(long, default_value_t = 10.0)]
    pub log_base: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Incentive: charge per unit of normalized emissions
    #[arg(long)]
    pub p: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Single profile to sweep; the four reference users if omitted
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5")]
    pub p_list: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Emissions table CSV (kind,value,reduction); built-in table if omitted
    #[arg(long)]
    pub emissions: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TierArgs {
    /// Daily intensity CSV with header date,carbon_intensity
    #[arg(long)]
    pub input: PathBuf,
    /// Emissions cap, gCO2eq/kWh
    #[arg(long, default_value_t = TierConfig::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 0.005)]
    pub p_step: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p_max: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// A failure with the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Maps a library error on user-supplied flags to a usage error naming the flag.
fn flag_error(err: Error) -> CliError {
    match &err {
        Error::InvalidParameter { name, .. } => {
            let flag = match *name {
                "accuracy_step" => "a-step",
                "latency_step" => "d-step",
                "p_max" => "p-max",
                "p_step" => "p-step",
                "price" => "p",
                other => other,
            };
            usage(format!("--{}: {err}", flag.replace('_', "-")))
        }
        Error::UnsupportedFormat(_) => usage(format!("--format: {err}")),
        _ => CliError::Input(err.to_string()),
    }
}

fn read_file(path: &PathBuf, flag: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("--{flag} {}: {e}", path.display())))
}

impl ProfileArgs {
    fn constants(&self) -> Result<UtilityConstants, CliError> {
        let c = UtilityConstants {
            log_base: self.log_base,
            ..UtilityConstants::default()
        };
        c.validate().map_err(flag_error)?;
        Ok(c)
    }

    fn given(&self) -> bool {
        self.profile.is_some() || self.lambda.is_some() || self.b.is_some() || self.x.is_some()
    }

    fn resolve(&self, default: ProfileKind) -> Result<LabeledProfile, CliError> {
        let kind = self.profile.unwrap_or(default);
        let constants = self.constants()?;
        let (label, b, x) = match kind {
            ProfileKind::Hq | ProfileKind::Green => {
                if self.b.is_some() {
                    return Err(usage("--b is only accepted with --profile custom"));
                }
                if self.x.is_some() {
                    return Err(usage("--x is only accepted with --profile custom"));
                }
                if kind == ProfileKind::Hq {
                    ("hq", UserProfile::HIGH_QUALITY_B, UserProfile::HIGH_QUALITY_X)
                } else {
                    ("green", UserProfile::GREEN_B, UserProfile::GREEN_X)
                }
            }
            ProfileKind::Custom => {
                let missing: Vec<&str> = [("--lambda", self.lambda), ("--b", self.b), ("--x", self.x)]
                    .iter()
                    .filter(|(_, v)| v.is_none())
                    .map(|(f, _)| *f)
                    .collect();
                if !missing.is_empty() {
                    return Err(usage(format!(
                        "--profile custom requires {}",
                        missing.join(", ")
                    )));
                }
                ("custom", self.b.unwrap_or_default(), self.x.unwrap_or_default())
            }
        };
        let lambda = self.lambda.unwrap_or(0.5);
        let profile = UserProfile::with_constants(lambda, b, x, constants).map_err(flag_error)?;
        Ok(LabeledProfile::new(label, profile))
    }
}

impl ModelArgs {
    fn model(&self) -> Result<EmissionsModel, CliError> {
        load_model(self.emissions.as_ref())
    }

    fn grid(&self) -> Result<SearchGrid, CliError> {
        SearchGrid::new(self.a_step, self.d_step).map_err(flag_error)
    }
}

fn load_model(path: Option<&PathBuf>) -> Result<EmissionsModel, CliError> {
    let table = load_table(path)?;
    EmissionsModel::fit(&table).map_err(|e| CliError::Input(format!("--emissions: {e}")))
}

fn load_table(path: Option<&PathBuf>) -> Result<EmissionsTable, CliError> {
    match path {
        None => Ok(EmissionsTable::default()),
        Some(p) => {
            let text = read_file(p, "emissions")?;
            parse_emissions_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
    }
}

impl OutputArgs {
    fn format(&self) -> Result<Format, CliError> {
        self.format.parse().map_err(flag_error)
    }

    fn emit(&self, report: Report<'_>, stdout: &mut dyn Write) -> Result<(), CliError> {
        let text = write_report(&report, self.format()?).map_err(|e| CliError::Input(e.to_string()))?;
        match &self.output {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| CliError::Input(format!("--output {}: {e}", path.display()))),
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("writing report: {e}"))),
        }
    }
}

fn check_price(flag: &str, p: f64) -> Result<(), CliError> {
    if p.is_finite() && p >= 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--{flag}: incentive must be a non-negative number, got {p}")))
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Curves(args) => {
            args.out.format()?;
            let samples = match args.curve {
                CurveChoice::Accuracy => CurveSamples::default_accuracy(args.log_base),
                CurveChoice::Latency => CurveSamples::default_latency(args.log_base),
            }
            .map_err(flag_error)?;
            args.out.emit(Report::Curves(&samples), stdout)
        }
        Command::Optimize(args) => {
            args.out.format()?;
            check_price("p", args.p)?;
            let profile = args.profile.resolve(ProfileKind::Hq)?;
            let grid = args.model.grid()?;
            let model = args.model.model()?;
            let choice = optimize_choice(&profile.profile, &model, args.p, &grid).map_err(flag_error)?;
            args.out.emit(
                Report::Choice {
                    profile: &profile,
                    price: args.p,
                    choice: &choice,
                },
                stdout,
            )
        }
        Command::Sweep(args) => {
            args.out.format()?;
            for &p in &args.p_list {
                check_price("p-list", p)?;
            }
            let profiles = if args.profile.given() {
                vec![args.profile.resolve(ProfileKind::Hq)?]
            } else {
                let constants = args.profile.constants()?;
                paper_profiles()
                    .into_iter()
                    .map(|mut lp| {
                        lp.profile.constants = constants;
                        lp
                    })
                    .collect()
            };
            let grid = args.model.grid()?;
            let model = args.model.model()?;
            let rows = sweep_incentives(&profiles, &args.p_list, &model, &grid).map_err(flag_error)?;
            args.out.emit(Report::Sweep(&rows), stdout)
        }
        Command::Fit(args) => {
            args.out.format()?;
            let table = load_table(args.emissions.as_ref())?;
            let report = FitReport::new(&table).map_err(|e| CliError::Input(format!("--emissions: {e}")))?;
            args.out.emit(Report::Fit(&report), stdout)
        }
        Command::Tier(args) => {
            args.out.format()?;
            let profile = args.profile.resolve(ProfileKind::Hq)?;
            let config = TierConfig {
                threshold: args.threshold,
                profile: profile.profile,
                model: args.model.model()?,
                prices: PriceGrid {
                    start: 0.0,
                    stop: args.p_max,
                    step: args.p_step,
                },
                grid: args.model.grid()?,
            };
            let designer = TierDesigner::new(config).map_err(flag_error)?;
            let text = read_file(&args.input, "input")?;
            let series = parse_intensity_csv(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
            let plan = designer
                .design(&series)
                .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
            args.out.emit(
                Report::Tier {
                    plan: &plan,
                    config: designer.config(),
                },
                stdout,
            )
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to standard error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let mut full = vec!["carbon-incentive"];
        full.extend_from_slice(args);
        let code = run(full, &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn zero_incentive_optimize() {
        let (code, out) = run_capture(&["optimize", "--profile", "hq", "--lambda", "0.5", "--p", "0", "--a-step", "0.01", "--d-step", "0.01"]);
        assert_eq!(code, 0);
        let row = out.lines().nth(1).unwrap();
        assert!(row.starts_with("hq,0.500000,2.000000,1.000000,0.000000,1.000000,1.000000,0.000000,"), "{row}");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_capture(&["optimize", "--profile", "custom", "--lambda", "0.5", "--p", "0.1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["optimize", "--profile", "hq", "--b", "3", "--p", "0.1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["optimize", "--lambda", "1.5", "--p", "0.1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["optimize", "--p", "-1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["fit", "--format", "xml"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["optimize"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["sweep", "--a-step", "0"]).0, EXIT_USAGE);
    }

    #[test]
    fn missing_input_exits_1() {
        assert_eq!(run_capture(&["tier", "--input", "/nonexistent/april.csv"]).0, EXIT_INPUT);
    }

    #[test]
    fn custom_profile_resolves() {
        let args = ProfileArgs {
            profile: Some(ProfileKind::Custom),
            lambda: Some(0.7),
            b: Some(3.0),
            x: Some(1.05),
            log_base: 10.0,
        };
        let lp = args.resolve(ProfileKind::Hq).unwrap();
        assert_eq!(lp.label, "custom");
        assert_eq!((lp.profile.lambda, lp.profile.b, lp.profile.x), (0.7, 3.0, 1.05));
    }

    #[test]
    fn fit_report_lists_coefficients() {
        let (code, out) = run_capture(&["fit"]);
        assert_eq!(code, 0);
        assert!(out.contains("slope,6.291391"));
    }
}
