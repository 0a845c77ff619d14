//! The `hawkes` command-line tool.
//!
//! Every flag can also be given in a config file of `key=value` lines passed
//! with `--config FILE`. File entries are applied first, so flags on the
//! command line override them. `key=true` sets a switch.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 a fit finished but was
//! flagged as not converged, 3 the input failed validation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::background::PiecewiseLinearBackground;
use crate::error::{Error, Result};
use crate::estimate::{fit_bcb, fit_mle_with, FitResult, MleOptions, ModelSpec};
use crate::events::{EventSequence, ObservationWindow};
use crate::gof::{
    ks_test_uniform, rescaled_intervals, second_level_ks, write_intervals_csv, write_session_csv, SessionRow,
};
use crate::kernel::ExponentialKernel;
use crate::simulate::{write_batch, NewsShock, ScenarioSpec, UShape};
use crate::tickdata::{extract_events, read_ticks, SessionConfig, SignReference};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

/// Fewest events any model is fitted to.
pub const MIN_FIT_EVENTS: usize = 4;

#[derive(Debug, Parser)]
#[command(
    name = "hawkes",
    version,
    about = "Hawkes process estimation with a time-dependent background"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn transaction records into market-movement event times.
    Filter(FilterArgs),
    /// Fit one model to an event file.
    Fit(FitArgs),
    /// Fit every event file in a directory.
    FitBatch(FitBatchArgs),
    /// Fit several models and tabulate their scores.
    Compare(CompareArgs),
    /// Time-rescaling KS test of one fitted session.
    Gof(GofArgs),
    /// KS tests of every fitted session in a directory plus the second-level test.
    GofBatch(GofBatchArgs),
    /// Simulate replicate event files from a scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SignRef {
    PreviousChange,
    PreviousTransaction,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct FilterArgs {
    /// Tick CSV with header timestamp,price,volume,contract.
    #[arg(long)]
    input: PathBuf,
    /// Events file to write; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Session open, in timestamp units.
    #[arg(long, default_value_t = 0)]
    start: i64,
    /// Session close, in timestamp units.
    #[arg(long, default_value_t = 22_200)]
    end: i64,
    #[arg(long, default_value_t = 5)]
    tick_size: i64,
    /// Seed of the timestamp jitter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SignRef::PreviousChange)]
    sign_reference: SignRef,
}

/// Background model: `const`, `pl2h`, `pl30`, `bcb`, or `pl:<seconds>`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelTag {
    Const,
    PiecewiseLinear { spacing: f64, label: String },
    Bcb,
}

impl FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let pl = |spacing: f64, label: &str| ModelTag::PiecewiseLinear {
            spacing,
            label: label.to_string(),
        };
        match s.to_ascii_lowercase().as_str() {
            "const" => Ok(ModelTag::Const),
            "bcb" => Ok(ModelTag::Bcb),
            "pl2h" => Ok(pl(7200.0, "PL_2h")),
            "pl30" => Ok(pl(1800.0, "PL_30min")),
            other => match other.strip_prefix("pl:").map(str::parse::<f64>) {
                Some(Ok(secs)) if secs > 0.0 && secs.is_finite() => Ok(pl(secs, &format!("PL_{secs}s"))),
                _ => Err(format!(
                    "unknown model `{s}` (expected const, pl2h, pl30, bcb or pl:<seconds>)"
                )),
            },
        }
    }
}

impl ModelTag {
    fn label(&self) -> String {
        match self {
            ModelTag::Const => "CONST".into(),
            ModelTag::PiecewiseLinear { label, .. } => label.clone(),
            ModelTag::Bcb => "BCB".into(),
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct FitArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value = "bcb")]
    model: ModelTag,
    /// Number of exponentials in the kernel.
    #[arg(long, default_value_t = 1)]
    exponentials: usize,
    /// Events per spline basis.
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Recorded in the diagnostics; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit JSON to write; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Background curve CSV; defaults to `<output>.curve.csv` next to the JSON.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct FitBatchArgs {
    /// Directory of `<name>.csv` event files; writes `<name>.fit.json` beside each.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value = "bcb")]
    model: ModelTag,
    #[arg(long, default_value_t = 1)]
    exponentials: usize,
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct CompareArgs {
    #[arg(long)]
    events: PathBuf,
    /// Comma-separated models.
    #[arg(long, value_delimiter = ',', default_value = "const,pl2h,pl30,bcb")]
    models: Vec<ModelTag>,
    /// Comma-separated kernel orders.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    exponentials: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Score table CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct GofArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    fit: PathBuf,
    /// Result JSON; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the rescaled intervals.
    #[arg(long)]
    intervals: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct GofBatchArgs {
    /// Directory holding `<name>.csv` with a matching `<name>.fit.json`.
    #[arg(long)]
    dir: PathBuf,
    /// Verdict JSON; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-session `session,n,statistic,p_value` CSV.
    #[arg(long)]
    sessions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioKind {
    Const,
    Ushape,
    News,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ScenarioKind::Ushape)]
    scenario: ScenarioKind,
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    #[arg(long, default_value_t = 22_200.0)]
    end: f64,
    /// Background level: the rate (const), mean rate (ushape) or baseline (news).
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    /// Endpoint to midday ratio of the U-shape.
    #[arg(long, default_value_t = UShape::DEFAULT_RATIO)]
    ratio: f64,
    /// Time of the news shock; mid-window when omitted.
    #[arg(long)]
    t_news: Option<f64>,
    #[arg(long, default_value_t = NewsShock::DEFAULT_JUMP)]
    jump: f64,
    /// Relaxation time of the shock; 5% of the window when omitted.
    #[arg(long)]
    relax: Option<f64>,
    /// Comma-separated branching weights.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    alpha: Vec<f64>,
    /// Comma-separated decay rates per second.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => EXIT_USAGE,
        Error::NonConvergence { .. } | Error::NotPositiveDefinite(_) | Error::Overflow { .. } => EXIT_NOT_CONVERGED,
        Error::Domain(_)
        | Error::InvalidInput(_)
        | Error::UnstableKernel(_)
        | Error::UnboundedBackground(_)
        | Error::TooFewSamples { .. } => EXIT_INVALID,
    }
}

/// Pulls `--config FILE` out of `args` and splices the file's entries in
/// right after the subcommand, ahead of the explicit flags.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config: Option<PathBuf> = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| Error::Config("--config needs a file path".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = fs::read_to_string(&path)?;
    let mut injected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value in {}, got `{line}`", path.display()),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => injected.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    rest.splice(sub..sub, injected);
    Ok(rest)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Filter(a) => cmd_filter(a),
        Command::Fit(a) => cmd_fit(a),
        Command::FitBatch(a) => cmd_fit_batch(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gof(a) => cmd_gof(a),
        Command::GofBatch(a) => cmd_gof_batch(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn cmd_filter(a: FilterArgs) -> Result<i32> {
    let cfg = SessionConfig {
        start: a.start,
        end: a.end,
        tick_size: a.tick_size,
        jitter_seed: a.seed,
        sign_reference: match a.sign_reference {
            SignRef::PreviousChange => SignReference::PreviousChange,
            SignRef::PreviousTransaction => SignReference::PreviousTransaction,
        },
    };
    let records = read_ticks(fs::File::open(&a.input)?)?;
    let (seq, summary) = extract_events(&records, &cfg)?;
    let mut buf = Vec::new();
    seq.write_csv(&mut buf)?;
    emit(a.output.as_deref(), &buf)?;
    eprintln!(
        "retained {} of {} records ({:.4})",
        summary.retained, summary.contract_records, summary.retained_fraction
    );
    Ok(EXIT_OK)
}

fn read_events(path: &Path) -> Result<EventSequence> {
    EventSequence::from_path(path)
}

/// Fits `model` to `seq` with an `order`-exponential kernel.
pub fn fit_model(seq: &EventSequence, model: &ModelTag, order: usize, k: usize, seed: u64) -> Result<FitResult> {
    if seq.len() < MIN_FIT_EVENTS {
        return Err(Error::TooFewSamples {
            need: MIN_FIT_EVENTS,
            got: seq.len(),
        });
    }
    let mut fit = match model {
        ModelTag::Const => fit_mle_with(
            seq,
            &ModelSpec::Const,
            order,
            &MleOptions {
                label: Some(model.label()),
                ..MleOptions::default()
            },
        )?,
        ModelTag::PiecewiseLinear { spacing, .. } => {
            let knots = PiecewiseLinearBackground::regular_knots(seq.window(), *spacing)?;
            fit_mle_with(
                seq,
                &ModelSpec::PiecewiseLinear { knots },
                order,
                &MleOptions {
                    label: Some(model.label()),
                    ..MleOptions::default()
                },
            )?
        }
        ModelTag::Bcb => fit_bcb(seq, order, k)?,
    };
    fit.diagnostics.seed = Some(seed);
    Ok(fit)
}

fn curve_path(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name.strip_suffix(".json").unwrap_or(&name);
    let stem = stem.strip_suffix(".fit").unwrap_or(stem);
    output.with_file_name(format!("{stem}.curve.csv"))
}

fn cmd_fit(a: FitArgs) -> Result<i32> {
    let seq = read_events(&a.events)?;
    let fit = fit_model(&seq, &a.model, a.exponentials, a.k, a.seed)?;
    emit(a.output.as_deref(), &json_bytes(&fit)?)?;
    if let Some(curve) = a.curve.clone().or_else(|| a.output.as_deref().map(curve_path)) {
        let mut buf = Vec::new();
        fit.write_curve_csv(&mut buf)?;
        fs::write(curve, buf)?;
    }
    Ok(if fit.diagnostics.converged {
        EXIT_OK
    } else {
        eprintln!(
            "warning: {}",
            fit.diagnostics.warning.as_deref().unwrap_or("not converged")
        );
        EXIT_NOT_CONVERGED
    })
}

/// `<name>.csv` event files in `dir`, excluding derived CSVs, sorted by name.
fn event_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().map(|n| n.to_string_lossy().into_owned()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(".csv") {
            if !stem.ends_with(".curve") && !stem.ends_with(".tau") && path.is_file() {
                out.push((stem.to_string(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn cmd_fit_batch(a: FitBatchArgs) -> Result<i32> {
    let files = event_files(&a.dir)?;
    let results: Vec<Result<bool>> = files
        .par_iter()
        .map(|(stem, path)| {
            let seq = read_events(path)?;
            let fit = fit_model(&seq, &a.model, a.exponentials, a.k, a.seed)?;
            fit.to_path(a.dir.join(format!("{stem}.fit.json")))?;
            Ok(fit.diagnostics.converged)
        })
        .collect();
    let mut code = EXIT_OK;
    for ((stem, _), r) in files.iter().zip(results) {
        match r {
            Ok(true) => {}
            Ok(false) => {
                eprintln!("warning: {stem}: fit not converged");
                code = code.max(EXIT_NOT_CONVERGED);
            }
            Err(e) => {
                eprintln!("error: {stem}: {e}");
                code = code.max(exit_code(&e));
            }
        }
    }
    Ok(code)
}

#[derive(Debug, Serialize)]
struct CompareRow {
    model: String,
    exponentials: usize,
    num_parameters: Option<usize>,
    log_likelihood: Option<f64>,
    log_marginal_likelihood: Option<f64>,
    score: Option<f64>,
    relative_score: Option<f64>,
    branching_ratio: Option<f64>,
    converged: Option<bool>,
    error: Option<String>,
}

fn cmd_compare(a: CompareArgs) -> Result<i32> {
    let seq = read_events(&a.events)?;
    let jobs: Vec<(ModelTag, usize)> = a
        .models
        .iter()
        .flat_map(|m| a.exponentials.iter().map(move |e| (m.clone(), *e)))
        .collect();
    let fits: Vec<Result<FitResult>> = jobs
        .par_iter()
        .map(|(m, order)| fit_model(&seq, m, *order, a.k, 0))
        .collect();
    let best = fits
        .iter()
        .filter_map(|f| f.as_ref().ok().map(|f| f.score))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut code = EXIT_OK;
    let rows: Vec<CompareRow> = jobs
        .iter()
        .zip(fits)
        .map(|((m, order), fit)| match fit {
            Ok(f) => {
                if !f.diagnostics.converged {
                    code = code.max(EXIT_NOT_CONVERGED);
                }
                CompareRow {
                    model: m.label(),
                    exponentials: *order,
                    num_parameters: Some(f.num_parameters),
                    log_likelihood: Some(f.log_likelihood),
                    log_marginal_likelihood: f.log_marginal_likelihood,
                    score: Some(f.score),
                    relative_score: Some(f.score - best),
                    branching_ratio: Some(f.branching_ratio),
                    converged: Some(f.diagnostics.converged),
                    error: None,
                }
            }
            Err(e) => {
                code = code.max(exit_code(&e));
                CompareRow {
                    model: m.label(),
                    exponentials: *order,
                    num_parameters: None,
                    log_likelihood: None,
                    log_marginal_likelihood: None,
                    score: None,
                    relative_score: None,
                    branching_ratio: None,
                    converged: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    emit(a.output.as_deref(), &buf)?;
    Ok(code)
}

#[derive(Debug, Serialize)]
struct GofReport {
    n_intervals: usize,
    statistic: Option<f64>,
    p_value: Option<f64>,
    pass: Option<bool>,
    warning: Option<String>,
}

fn check_window(seq: &EventSequence, fit: &FitResult) -> Result<()> {
    if seq.window() != fit.window {
        return Err(Error::InvalidInput(format!(
            "events cover [{}, {}] but the fit was made on [{}, {}]",
            seq.window().start(),
            seq.window().end(),
            fit.window.start(),
            fit.window.end()
        )));
    }
    Ok(())
}

fn session_taus(seq: &EventSequence, fit: &FitResult) -> Result<Vec<f64>> {
    check_window(seq, fit)?;
    let kernel: ExponentialKernel = fit.checked_kernel()?;
    let bg = fit.background_model(seq)?;
    rescaled_intervals(seq, &kernel, &bg)
}

fn cmd_gof(a: GofArgs) -> Result<i32> {
    let seq = read_events(&a.events)?;
    let fit = FitResult::from_path(&a.fit)?;
    let taus = session_taus(&seq, &fit)?;
    if let Some(p) = &a.intervals {
        let mut buf = Vec::new();
        write_intervals_csv(&taus, &mut buf)?;
        fs::write(p, buf)?;
    }
    let report = match ks_test_uniform(&taus) {
        Ok(ks) => GofReport {
            n_intervals: taus.len(),
            statistic: Some(ks.statistic),
            p_value: Some(ks.p_value),
            pass: Some(ks.p_value > crate::gof::SIGNIFICANCE),
            warning: None,
        },
        Err(Error::TooFewSamples { need, got }) => {
            let msg = format!("{got} rescaled intervals, at least {need} needed for a KS test");
            eprintln!("warning: {msg}");
            GofReport {
                n_intervals: taus.len(),
                statistic: None,
                p_value: None,
                pass: None,
                warning: Some(msg),
            }
        }
        Err(e) => return Err(e),
    };
    emit(a.output.as_deref(), &json_bytes(&report)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct BatchVerdict {
    sessions: usize,
    skipped: Vec<String>,
    pass: bool,
    statistic: f64,
    p_value: f64,
}

fn cmd_gof_batch(a: GofBatchArgs) -> Result<i32> {
    let mut pairs = Vec::new();
    for (stem, path) in event_files(&a.dir)? {
        let fit = a.dir.join(format!("{stem}.fit.json"));
        if fit.is_file() {
            pairs.push((stem, path, fit));
        }
    }
    let results: Vec<Result<Vec<f64>>> = pairs
        .par_iter()
        .map(|(_, events, fit)| session_taus(&read_events(events)?, &FitResult::from_path(fit)?))
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for ((stem, _, _), taus) in pairs.iter().zip(results) {
        match ks_test_uniform(&taus?) {
            Ok(ks) => rows.push(SessionRow {
                session: stem.clone(),
                n: ks.n,
                statistic: ks.statistic,
                p_value: ks.p_value,
            }),
            Err(Error::TooFewSamples { .. }) => {
                eprintln!("warning: {stem}: too few intervals, skipped");
                skipped.push(stem.clone());
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(p) = &a.sessions {
        let mut buf = Vec::new();
        write_session_csv(&rows, &mut buf)?;
        fs::write(p, buf)?;
    }
    let p_values: Vec<f64> = rows.iter().map(|r| r.p_value).collect();
    let second = second_level_ks(&p_values)?;
    let verdict = BatchVerdict {
        sessions: second.sessions,
        skipped,
        pass: second.pass,
        statistic: second.statistic,
        p_value: second.p_value,
    };
    emit(a.output.as_deref(), &json_bytes(&verdict)?)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let window = ObservationWindow::new(a.start, a.end)?;
    let kernel = ExponentialKernel::new(a.alpha.clone(), a.beta.clone())?;
    if !kernel.is_stable() {
        return Err(Error::UnstableKernel(kernel.branching_ratio()));
    }
    let scenario = match a.scenario {
        ScenarioKind::Const => ScenarioSpec::Constant { mu: a.rate },
        ScenarioKind::Ushape => ScenarioSpec::UShape {
            mean_rate: a.rate,
            ratio: a.ratio,
        },
        ScenarioKind::News => ScenarioSpec::NewsShock {
            baseline: a.rate,
            t_news: a.t_news.unwrap_or(0.5 * (a.start + a.end)),
            jump: a.jump,
            relax: a.relax.unwrap_or(NewsShock::DEFAULT_RELAX_FRACTION * window.length()),
        },
    };
    let manifest = write_batch(&a.output_dir, window, &scenario, &kernel, a.seed, a.replicates)?;
    eprintln!("wrote {} replicates to {}", manifest.replicates, a.output_dir.display());
    Ok(EXIT_OK)
}
