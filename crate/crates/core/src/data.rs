//! Input parsing (daily intensity and emissions tables) and report rendering.
//!
//! Reports are deterministic: columns and JSON keys come out in a fixed order
//! and every decimal is printed with six fractional digits.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde_json::{json, Map, Number, Value};

use crate::emissions::{fit_residuals, EmissionsModel, EmissionsTable, FitResidual};
use crate::error::{Error, Result};
use crate::net_benefit::{LabeledProfile, OptimalChoice, SweepRow};
use crate::tier::{DailyIntensity, DayPlan, TierConfig, TierPlan};
use crate::utility::UserProfile;

pub const INTENSITY_HEADER: [&str; 2] = ["date", "carbon_intensity"];
pub const EMISSIONS_HEADER: [&str; 3] = ["kind", "value", "reduction"];

fn reader(content: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if record.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(Error::Parse {
            line: record_line(record),
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                record.iter().collect::<Vec<_>>().join(",")
            ),
        })
    }
}

fn parse_number(field: &str, line: u64, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid {what} `{field}`"),
        })
}

/// Parses a `date,carbon_intensity` file. Rows come back in file order.
pub fn parse_intensity_csv(content: &str) -> Result<Vec<DailyIntensity>> {
    let mut rdr = reader(content);
    let mut records = rdr.records();
    match records.next() {
        None => return Ok(Vec::new()),
        Some(header) => check_header(&header.map_err(csv_error)?, &INTENSITY_HEADER)?,
    }
    let mut seen: HashMap<NaiveDate, u64> = HashMap::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("invalid date `{}`: {e}", &record[0]),
        })?;
        let intensity = parse_number(&record[1], line, "carbon intensity")?;
        if intensity <= 0.0 {
            return Err(Error::NonPositiveIntensity { line, value: intensity });
        }
        if seen.insert(date, line).is_some() {
            return Err(Error::DuplicateDate {
                line,
                date: date.to_string(),
            });
        }
        rows.push(DailyIntensity { date, intensity });
    }
    Ok(rows)
}

/// Writes rows back in the input schema. Intensities use the shortest
/// representation that parses back to the same value.
pub fn write_intensity_csv(rows: &[DailyIntensity]) -> String {
    let mut out = INTENSITY_HEADER.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{}\n", row.date.format("%Y-%m-%d"), row.intensity));
    }
    out
}

/// Parses a `kind,value,reduction` emissions table; `kind` is `accuracy` or `latency`.
pub fn parse_emissions_csv(content: &str) -> Result<EmissionsTable> {
    let mut rdr = reader(content);
    let mut records = rdr.records();
    match records.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty emissions table".into(),
            })
        }
        Some(header) => check_header(&header.map_err(csv_error)?, &EMISSIONS_HEADER)?,
    }
    let mut table = EmissionsTable {
        accuracy_rows: Vec::new(),
        latency_rows: Vec::new(),
    };
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let value = parse_number(&record[1], line, "value")?;
        let reduction = parse_number(&record[2], line, "reduction")?;
        match &record[0] {
            "accuracy" => table.accuracy_rows.push((value, reduction)),
            "latency" => table.latency_rows.push((value, reduction)),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown kind `{other}` (expected accuracy or latency)"),
                })
            }
        }
    }
    table.validate()?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::UnsupportedFormat(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Which utility curve a [`CurveSamples`] table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Accuracy,
    Latency,
}

impl CurveKind {
    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::Accuracy => "accuracy",
            CurveKind::Latency => "latency",
        }
    }
}

/// Utility curves sampled on a shared abscissa, one column per profile.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSamples {
    pub kind: CurveKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CurveSamples {
    /// Samples `kind` utility for each profile over `[from, to]` with `step`.
    pub fn sample(
        kind: CurveKind,
        profiles: &[(&str, UserProfile)],
        from: f64,
        to: f64,
        step: f64,
    ) -> Result<Self> {
        if !(step > 0.0) || !(to >= from) {
            return Err(Error::InvalidParameter {
                name: "step",
                value: step,
                reason: "curve range needs a positive step and from <= to",
            });
        }
        let n = ((to - from) / step + 1e-9).floor() as usize;
        let axis = match kind {
            CurveKind::Accuracy => "a",
            CurveKind::Latency => "d",
        };
        let mut columns = vec![axis.to_string()];
        columns.extend(profiles.iter().map(|(name, _)| format!("u_{name}")));
        let rows = (0..=n)
            .map(|i| {
                let x = if i == n && (from + i as f64 * step - to).abs() < 1e-9 {
                    to
                } else {
                    from + i as f64 * step
                };
                let mut row = vec![x];
                for (_, p) in profiles {
                    row.push(match kind {
                        CurveKind::Accuracy => p.accuracy_utility(x)?,
                        CurveKind::Latency => p.latency_utility(x)?,
                    });
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, columns, rows })
    }

    /// Accuracy-sensitive vs. green accuracy utility on [0.88, 1] step 0.005.
    pub fn default_accuracy(log_base: f64) -> Result<Self> {
        let (sensitive, green) = sensitive_and_green(log_base)?;
        Self::sample(
            CurveKind::Accuracy,
            &[("sensitive", sensitive), ("green", green)],
            0.88,
            1.0,
            0.005,
        )
    }

    /// Latency-sensitive vs. green latency utility on [1, 1.28] step 0.005.
    pub fn default_latency(log_base: f64) -> Result<Self> {
        let (sensitive, green) = sensitive_and_green(log_base)?;
        Self::sample(
            CurveKind::Latency,
            &[("sensitive", sensitive), ("green", green)],
            1.0,
            1.28,
            0.005,
        )
    }
}

fn sensitive_and_green(log_base: f64) -> Result<(UserProfile, UserProfile)> {
    let constants = crate::utility::UtilityConstants {
        log_base,
        ..Default::default()
    };
    Ok((
        UserProfile::with_constants(0.5, UserProfile::HIGH_QUALITY_B, UserProfile::HIGH_QUALITY_X, constants)?,
        UserProfile::with_constants(0.5, UserProfile::GREEN_B, UserProfile::GREEN_X, constants)?,
    ))
}

/// Fitted emissions coefficients and how they reproduce the input table.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: EmissionsModel,
    pub residuals: Vec<FitResidual>,
}

impl FitReport {
    pub fn new(table: &EmissionsTable) -> Result<Self> {
        let model = EmissionsModel::fit(table)?;
        Ok(Self {
            residuals: fit_residuals(table, &model),
            model,
        })
    }
}

/// Anything the command line can emit.
#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Curves(&'a CurveSamples),
    Choice {
        profile: &'a LabeledProfile,
        price: f64,
        choice: &'a OptimalChoice,
    },
    Sweep(&'a [SweepRow]),
    Fit(&'a FitReport),
    Tier {
        plan: &'a TierPlan,
        config: &'a TierConfig,
    },
}

/// Six fractional digits; negative zero prints as zero.
pub fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fixed(x)).expect("fixed-point literal is valid JSON"))
    } else {
        Value::Null
    }
}

const CHOICE_COLUMNS: [&str; 8] = [
    "accuracy",
    "latency",
    "reduction",
    "reduction_from_accuracy",
    "reduction_from_latency",
    "utility",
    "charge",
    "net_benefit",
];

fn choice_values(c: &OptimalChoice) -> [f64; 8] {
    [
        c.accuracy,
        c.latency,
        c.reduction,
        c.reduction_from_accuracy,
        c.reduction_from_latency,
        c.utility,
        c.charge,
        c.net_benefit,
    ]
}

fn choice_json(c: &OptimalChoice, into: &mut Map<String, Value>) {
    for (k, v) in CHOICE_COLUMNS.iter().zip(choice_values(c)) {
        into.insert((*k).to_string(), num(v));
    }
}

fn profile_json(p: &UserProfile) -> Value {
    json!({
        "lambda": num(p.lambda),
        "b": num(p.b),
        "x": num(p.x),
        "log_base": num(p.constants.log_base),
    })
}

fn to_json(report: &Report<'_>) -> Value {
    match *report {
        Report::Curves(c) => {
            let rows: Vec<Value> = c
                .rows
                .iter()
                .map(|row| {
                    Value::Object(c.columns.iter().cloned().zip(row.iter().map(|&v| num(v))).collect())
                })
                .collect();
            json!({ "curve": c.kind.name(), "rows": rows })
        }
        Report::Choice { profile, price, choice } => {
            let mut m = Map::new();
            m.insert("profile".into(), Value::String(profile.label.clone()));
            m.insert("lambda".into(), num(profile.profile.lambda));
            m.insert("b".into(), num(profile.profile.b));
            m.insert("x".into(), num(profile.profile.x));
            m.insert("p".into(), num(price));
            choice_json(choice, &mut m);
            Value::Object(m)
        }
        Report::Sweep(rows) => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    m.insert("profile".into(), Value::String(r.profile.clone()));
                    m.insert("lambda".into(), num(r.lambda));
                    m.insert("b".into(), num(r.b));
                    m.insert("x".into(), num(r.x));
                    m.insert("p".into(), num(r.price));
                    choice_json(&r.choice, &mut m);
                    Value::Object(m)
                })
                .collect();
            json!({ "rows": rows })
        }
        Report::Fit(f) => {
            let (peak, peak_at) = f.model.latency_peak();
            let residuals: Vec<Value> = f
                .residuals
                .iter()
                .map(|r| {
                    json!({
                        "kind": r.kind,
                        "value": num(r.value),
                        "measured": num(r.measured),
                        "fitted": num(r.fitted),
                        "residual": num(r.residual),
                    })
                })
                .collect();
            json!({
                "slope": num(f.model.slope),
                "quad_c1": num(f.model.quad_c1),
                "quad_c2": num(f.model.quad_c2),
                "r_max": num(f.model.r_max),
                "latency_peak_reduction": num(peak),
                "latency_peak_at": num(peak_at),
                "residuals": residuals,
            })
        }
        Report::Tier { plan, config } => {
            let days: Vec<Value> = plan.days.iter().map(day_json).collect();
            json!({
                "config": {
                    "threshold": num(config.threshold),
                    "profile": profile_json(&config.profile),
                    "r_max": num(config.model.r_max),
                    "price_grid": {
                        "start": num(config.prices.start),
                        "stop": num(config.prices.stop),
                        "step": num(config.prices.step),
                    },
                    "search_grid": {
                        "accuracy_step": num(config.grid.accuracy_step),
                        "latency_step": num(config.grid.latency_step),
                    },
                },
                "days": days,
                "aggregates": {
                    "low_tier_fraction": num(plan.low_tier_fraction),
                    "promised_accuracy": num(plan.promised_accuracy),
                    "promised_latency": num(plan.promised_latency),
                    "discount": num(plan.discount),
                    "infeasible_days": plan.infeasible_days,
                    "absolute_saving": num(plan.absolute_saving),
                },
            })
        }
    }
}

fn day_json(d: &DayPlan) -> Value {
    let mut m = Map::new();
    m.insert("date".into(), Value::String(d.date.format("%Y-%m-%d").to_string()));
    m.insert("intensity".into(), num(d.intensity));
    m.insert("required_reduction".into(), num(d.required_reduction));
    m.insert("price".into(), num(d.price));
    m.insert("feasible".into(), Value::Bool(d.feasible));
    choice_json(&d.choice, &mut m);
    Value::Object(m)
}

fn to_csv(report: &Report<'_>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    match *report {
        Report::Curves(c) => {
            w.write_record(&c.columns).map_err(ser)?;
            for row in &c.rows {
                w.write_record(row.iter().map(|&v| fixed(v))).map_err(ser)?;
            }
        }
        Report::Choice { profile, price, choice } => {
            write_choice_header(&mut w).map_err(ser)?;
            write_choice_row(&mut w, &profile.label, &profile.profile, price, choice).map_err(ser)?;
        }
        Report::Sweep(rows) => {
            write_choice_header(&mut w).map_err(ser)?;
            for r in rows {
                let p = UserProfile {
                    lambda: r.lambda,
                    b: r.b,
                    x: r.x,
                    constants: Default::default(),
                };
                write_choice_row(&mut w, &r.profile, &p, r.price, &r.choice).map_err(ser)?;
            }
        }
        Report::Fit(f) => {
            w.write_record(["kind", "value", "measured", "fitted", "residual"]).map_err(ser)?;
            for (name, v) in [
                ("slope", f.model.slope),
                ("quad_c1", f.model.quad_c1),
                ("quad_c2", f.model.quad_c2),
            ] {
                w.write_record([name.to_string(), fixed(v), String::new(), String::new(), String::new()])
                    .map_err(ser)?;
            }
            for r in &f.residuals {
                w.write_record([
                    r.kind.to_string(),
                    fixed(r.value),
                    fixed(r.measured),
                    fixed(r.fitted),
                    fixed(r.residual),
                ])
                .map_err(ser)?;
            }
        }
        Report::Tier { plan, .. } => {
            let mut header = vec!["date", "intensity", "required_reduction", "price", "feasible"];
            header.extend(CHOICE_COLUMNS);
            w.write_record(&header).map_err(ser)?;
            for d in &plan.days {
                let mut rec = vec![
                    d.date.format("%Y-%m-%d").to_string(),
                    fixed(d.intensity),
                    fixed(d.required_reduction),
                    fixed(d.price),
                    d.feasible.to_string(),
                ];
                rec.extend(choice_values(&d.choice).iter().map(|&v| fixed(v)));
                w.write_record(&rec).map_err(ser)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

fn write_choice_header<W: std::io::Write>(w: &mut csv::Writer<W>) -> csv::Result<()> {
    let mut header = vec!["profile", "lambda", "b", "x", "p"];
    header.extend(CHOICE_COLUMNS);
    w.write_record(&header)
}

fn write_choice_row<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    label: &str,
    profile: &UserProfile,
    price: f64,
    choice: &OptimalChoice,
) -> csv::Result<()> {
    let mut rec = vec![
        label.to_string(),
        fixed(profile.lambda),
        fixed(profile.b),
        fixed(profile.x),
        fixed(price),
    ];
    rec.extend(choice_values(choice).iter().map(|&v| fixed(v)));
    w.write_record(&rec)
}

/// Renders a report as CSV or pretty-printed JSON, newline-terminated.
pub fn write_report(report: &Report<'_>, format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(report),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&to_json(report))
                .map_err(|e| Error::Serialize(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}
