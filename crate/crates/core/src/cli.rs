//! Command-line front end: `train`, `forecast`, `evaluate` and `bias-scan`.
//!
//! Exit codes: 0 success, 2 input or config error, 3 unknown team, 4
//! internal invariant violation. Concurrent runs sharing an output
//! directory are not supported; the last writer wins.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::elo::{run_history, EloError, EloTimeline};
use crate::evaluation::{
    backtest, bias_scan, bookmaker_margin, evaluate_forecasts, implied_probs, rps, BacktestConfig,
    BetLedger, EvaluationReport, MatchResult, OutcomeProbs, Strategy,
};
use crate::match_data::{chronological_split, parse_csv, Dataset, Side};
use crate::models::{fit_forecasters, forecaster_name, DistributionForecaster, ForecasterSet, TargetKind};
use crate::normal::NormalSpec;
use crate::simulator::{aggregate, simulate, FixtureInput, MarketForecast};

pub const MODELS_DIR: &str = "models";
pub const TIMELINE_FILE: &str = "timeline.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "evaluation.json";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const BIAS_FILE: &str = "bias_scan.csv";

#[derive(Debug, Parser)]
#[command(name = "shotcast", version, about = "Soccer forecasts from simulated shot quantity and quality")]
pub struct Cli {
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate teams, fit the four forecasters and persist them.
    Train,
    /// Simulate one fixture and print the market forecast as JSON.
    Forecast {
        #[arg(long)]
        home: String,
        #[arg(long)]
        away: String,
        #[arg(long)]
        sims: Option<usize>,
    },
    /// Score the holdout set and backtest the betting strategies.
    Evaluate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        strategy: Option<u8>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Scan draw-probability multipliers on the holdout set.
    BiasScan,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Domain(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

/// Resolves the effective configuration from the file and flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    match &cli.command {
        Command::Forecast { sims: Some(n), .. } => cfg.set("n_simulations", &n.to_string())?,
        Command::Evaluate { strategy, runs } => {
            if let Some(s) = strategy {
                cfg.set("strategy", &s.to_string())?;
            }
            if let Some(r) = runs {
                cfg.set("runs", &r.to_string())?;
            }
        }
        _ => {}
    }
    Ok(cfg)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Train => cmd_train(&cfg, stdout),
        Command::Forecast { home, away, .. } => cmd_forecast(&cfg, home, away, stdout),
        Command::Evaluate { .. } => cmd_evaluate(&cfg, stdout),
        Command::BiasScan => cmd_bias_scan(&cfg, stdout),
    }
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, String), CliError> {
    let bytes = fs::read(&cfg.data).map_err(io_at(&cfg.data))?;
    let data = parse_csv(bytes.as_slice(), &cfg.odds_columns)
        .map_err(|e| CliError::Input(format!("{}: {e}", cfg.data.display())))?;
    Ok((data, hex::encode(Sha256::digest(&bytes))))
}

fn model_path(out: &Path, side: Side, target: TargetKind) -> PathBuf {
    out.join(MODELS_DIR).join(format!("{}.json", forecaster_name(side, target)))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_at(path))
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    data_path: String,
    data_fingerprint: &'a str,
    records: usize,
    skipped_rows: usize,
    train_records: usize,
    holdout_records: usize,
    teams: usize,
    model: String,
    files: Vec<String>,
}

pub fn cmd_train(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (data, fingerprint) = load_data(cfg)?;
    let (train, holdout) = chronological_split(&data, cfg.holdout).map_err(input)?;
    let timeline = run_history(&data, &cfg.elo);
    let models = fit_forecasters(&train, &timeline, &cfg.model).map_err(input)?;

    let models_dir = cfg.out_dir.join(MODELS_DIR);
    fs::create_dir_all(&models_dir).map_err(io_at(&models_dir))?;
    let mut files = Vec::new();
    for fc in models.iter() {
        let path = model_path(&cfg.out_dir, fc.side, fc.target);
        write_file(&path, fc.to_json().map_err(input)?.as_bytes())?;
        files.push(format!("{MODELS_DIR}/{}.json", fc.name()));
    }
    let mut buf = Vec::new();
    timeline.write_csv(&mut buf).map_err(input)?;
    write_file(&cfg.out_dir.join(TIMELINE_FILE), &buf)?;
    files.push(TIMELINE_FILE.to_string());

    let manifest = Manifest {
        config_hash: cfg.hash(),
        data_path: cfg.data.display().to_string(),
        data_fingerprint: &fingerprint,
        records: data.len(),
        skipped_rows: data.skipped_rows,
        train_records: train.len(),
        holdout_records: holdout.len(),
        teams: timeline.current_ratings().len(),
        model: cfg.model.kind.to_string(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&cfg.out_dir.join(MANIFEST_FILE), json.as_bytes())?;
    writeln!(
        stdout,
        "trained on {} matches ({} held out, {} skipped rows); artifacts in {}",
        train.len(),
        holdout.len(),
        data.skipped_rows,
        cfg.out_dir.display()
    )
    .map_err(input)?;
    Ok(())
}

pub fn load_models(out: &Path) -> Result<ForecasterSet, CliError> {
    let mut list = Vec::new();
    for side in Side::BOTH {
        for target in TargetKind::BOTH {
            let path = model_path(out, side, target);
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Input(format!("{}: {e} (run `train` first)", path.display())))?;
            let fc = DistributionForecaster::from_json(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if (fc.side, fc.target) != (side, target) {
                return Err(CliError::Input(format!("{}: wrong model slot", path.display())));
            }
            list.push(fc);
        }
    }
    ForecasterSet::from_forecasters(list).ok_or_else(|| CliError::Internal("incomplete model set".into()))
}

fn load_timeline(out: &Path) -> Result<EloTimeline, CliError> {
    let path = out.join(TIMELINE_FILE);
    let file = fs::File::open(&path)
        .map_err(|e| CliError::Input(format!("{}: {e} (run `train` first)", path.display())))?;
    EloTimeline::read_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn check_probs(f: &MarketForecast) -> Result<OutcomeProbs, CliError> {
    OutcomeProbs::new(f.p_home, f.p_draw, f.p_away).map_err(|e| CliError::Internal(e.to_string()))
}

fn fixture_input<'a>(
    cfg: &RunConfig,
    home: NormalSpec,
    away: NormalSpec,
    models: &'a ForecasterSet,
    seed: u64,
) -> FixtureInput<'a> {
    FixtureInput {
        home_rating: home,
        away_rating: away,
        forecasters: models,
        n_simulations: cfg.n_simulations,
        max_shots: cfg.max_shots,
        seed,
        resample: cfg.resample_ratings,
    }
}

pub fn cmd_forecast(cfg: &RunConfig, home: &str, away: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    let timeline = load_timeline(&cfg.out_dir)?;
    let models = load_models(&cfg.out_dir)?;
    let dist = |team: &str| {
        timeline
            .rating_distribution(team, cfg.window)
            .map_err(|e| match e {
                EloError::UnknownTeam(_) => CliError::Domain(e.to_string()),
                other => CliError::Input(other.to_string()),
            })
    };
    let (home_dist, away_dist) = (dist(home)?, dist(away)?);
    let res = simulate(&fixture_input(cfg, home_dist, away_dist, &models, cfg.seed))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let forecast = aggregate(&res).map_err(|e| CliError::Internal(e.to_string()))?;
    check_probs(&forecast)?;
    writeln!(stdout, "{}", forecast.to_json(cfg.seed)).map_err(input)?;
    Ok(())
}

/// Seed for fixture `index` within a run seeded with `run_seed`.
pub fn fixture_seed(run_seed: u64, index: usize) -> u64 {
    run_seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One holdout fixture with its simulated forecast.
pub struct HoldoutForecast {
    pub index: usize,
    pub forecast: MarketForecast,
    pub probs: OutcomeProbs,
}

/// Simulates every holdout match using the ratings known before it was
/// played. Teams without earlier matches use the initial rating.
pub fn forecast_holdout(
    cfg: &RunConfig,
    data: &Dataset,
    timeline: &EloTimeline,
    models: &ForecasterSet,
    run_seed: u64,
) -> Result<Vec<HoldoutForecast>, CliError> {
    let start = data.len() - cfg.holdout;
    let initial = NormalSpec::degenerate(cfg.elo.initial_rating);
    (start..data.len())
        .map(|index| {
            let rec = &data.records[index];
            let dist = |team: &str| match timeline.rating_distribution_before(team, index, cfg.window) {
                Ok(spec) => Ok(spec),
                Err(EloError::UnknownTeam(_)) => Ok(initial),
                Err(e) => Err(CliError::Input(e.to_string())),
            };
            let fx = fixture_input(
                cfg,
                dist(&rec.home_team)?,
                dist(&rec.away_team)?,
                models,
                fixture_seed(run_seed, index),
            );
            let res = simulate(&fx).map_err(|e| CliError::Internal(e.to_string()))?;
            let forecast = aggregate(&res).map_err(|e| CliError::Internal(e.to_string()))?;
            let probs = check_probs(&forecast)?;
            Ok(HoldoutForecast {
                index,
                forecast,
                probs,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorPair {
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerSummary {
    pub strategy: u8,
    pub status: &'static str,
    pub bets: usize,
    pub skipped_fixtures: usize,
    pub staked: f64,
    pub returned: f64,
    pub rentability: Option<f64>,
    pub over_baseline: Option<f64>,
}

impl LedgerSummary {
    fn new(strategy: Strategy, ledger: &BetLedger, margin: Option<f64>) -> Self {
        let rentability = ledger.rentability();
        Self {
            strategy: strategy.number(),
            status: if rentability.is_some() { "ok" } else { "no bets" },
            bets: ledger.bets.len(),
            skipped_fixtures: ledger.skipped_fixtures,
            staked: ledger.staked,
            returned: ledger.returned,
            rentability,
            over_baseline: rentability.zip(margin).map(|(r, m)| r - m),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub mean_rps: f64,
    pub median: ErrorPair,
    pub mode: ErrorPair,
    pub mean: ErrorPair,
    pub strategy_1: LedgerSummary,
    pub strategy_2: LedgerSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct AverageReport {
    pub mean_rps: f64,
    pub median: ErrorPair,
    pub mode: ErrorPair,
    pub mean: ErrorPair,
    pub strategy_1_rentability: Option<f64>,
    pub strategy_2_rentability: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BookmakerReport {
    pub fixtures_with_odds: usize,
    pub margin: Option<f64>,
    pub rps: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateReport {
    pub holdout_matches: usize,
    pub n_simulations: usize,
    pub baseline: ErrorPair,
    pub bookmaker: BookmakerReport,
    pub betting: &'static str,
    pub runs: Vec<RunReport>,
    pub average: AverageReport,
}

fn errors(report: &EvaluationReport) -> ErrorPair {
    ErrorPair {
        rmse: report.rmse,
        mae: report.mae,
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn mean_some(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean_of(v.into_iter()))
}

fn bookmaker_report(cfg: &RunConfig, holdout: &Dataset) -> BookmakerReport {
    let priced: Vec<_> = holdout
        .iter()
        .filter_map(|r| r.odds.map(|o| (o, MatchResult::from_score(r.score()))))
        .collect();
    let n = priced.len();
    BookmakerReport {
        fixtures_with_odds: n,
        margin: (n > 0).then(|| mean_of(priced.iter().map(|(o, _)| bookmaker_margin(o, cfg.margin_def)))),
        rps: (n > 0).then(|| mean_of(priced.iter().map(|(o, r)| rps(&implied_probs(o), *r)))),
    }
}

struct Prepared {
    data: Dataset,
    holdout: Dataset,
    timeline: EloTimeline,
    models: ForecasterSet,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let (data, _) = load_data(cfg)?;
    let (_, holdout) = chronological_split(&data, cfg.holdout).map_err(input)?;
    let models = load_models(&cfg.out_dir)?;
    let timeline = run_history(&data, &cfg.elo);
    Ok(Prepared {
        data,
        holdout,
        timeline,
        models,
    })
}

/// Evaluates the holdout over `cfg.runs` runs (run `i` seeded `seed + i`),
/// returning the report and the first run's ledger for the configured
/// strategy.
pub fn evaluate_runs(cfg: &RunConfig) -> Result<(EvaluateReport, BetLedger), CliError> {
    let p = prepare(cfg)?;
    let actuals: Vec<_> = p.holdout.iter().map(|r| r.score()).collect();
    let results: Vec<_> = actuals.iter().map(|&s| MatchResult::from_score(s)).collect();
    let odds: Vec<_> = p.holdout.iter().map(|r| r.odds).collect();
    let bookmaker = bookmaker_report(cfg, &p.holdout);

    let mut runs = Vec::with_capacity(cfg.runs);
    let mut first_ledger = None;
    let mut baseline = None;
    for run in 0..cfg.runs {
        let seed = cfg.seed.wrapping_add(run as u64);
        let fc = forecast_holdout(cfg, &p.data, &p.timeline, &p.models, seed)?;
        let probs: Vec<_> = fc.iter().map(|f| f.probs).collect();
        let eval = |pick: fn(&MarketForecast) -> (u32, u32)| {
            let paired: Vec<_> = fc.iter().map(|f| (f.probs, pick(&f.forecast))).collect();
            evaluate_forecasts(&paired, &actuals).map_err(|e| CliError::Internal(e.to_string()))
        };
        let median = eval(|f| f.point_scores.median)?;
        let mode = eval(|f| f.point_scores.mode)?;
        let mean = eval(|f| f.point_scores.mean)?;
        baseline.get_or_insert(ErrorPair {
            rmse: median.baseline_rmse,
            mae: median.baseline_mae,
        });
        let ledger = |strategy| {
            let bt = BacktestConfig {
                strategy,
                scope: cfg.bet_scope,
                p_min: cfg.p_min,
            };
            backtest(&probs, &odds, &results, &bt).map_err(|e| CliError::Internal(e.to_string()))
        };
        let (l1, l2) = (ledger(Strategy::Flat)?, ledger(Strategy::Proportional)?);
        runs.push(RunReport {
            run,
            seed,
            mean_rps: median.mean_rps,
            median: errors(&median),
            mode: errors(&mode),
            mean: errors(&mean),
            strategy_1: LedgerSummary::new(Strategy::Flat, &l1, bookmaker.margin),
            strategy_2: LedgerSummary::new(Strategy::Proportional, &l2, bookmaker.margin),
        });
        if first_ledger.is_none() {
            first_ledger = Some(match cfg.strategy {
                Strategy::Flat => l1,
                Strategy::Proportional => l2,
            });
        }
    }

    let baseline = baseline.ok_or_else(|| CliError::Internal("no runs".into()))?;
    let avg_pair = |get: fn(&RunReport) -> &ErrorPair| ErrorPair {
        rmse: mean_of(runs.iter().map(|r| get(r).rmse)),
        mae: mean_of(runs.iter().map(|r| get(r).mae)),
    };
    let average = AverageReport {
        mean_rps: mean_of(runs.iter().map(|r| r.mean_rps)),
        median: avg_pair(|r| &r.median),
        mode: avg_pair(|r| &r.mode),
        mean: avg_pair(|r| &r.mean),
        strategy_1_rentability: mean_some(runs.iter().map(|r| r.strategy_1.rentability)),
        strategy_2_rentability: mean_some(runs.iter().map(|r| r.strategy_2.rentability)),
    };
    let any_bets = runs
        .iter()
        .any(|r| r.strategy_1.rentability.is_some() || r.strategy_2.rentability.is_some());
    let report = EvaluateReport {
        holdout_matches: p.holdout.len(),
        n_simulations: cfg.n_simulations,
        baseline,
        bookmaker,
        betting: if any_bets { "ok" } else { "no bets" },
        runs,
        average,
    };
    Ok((report, first_ledger.unwrap_or_default()))
}

pub fn cmd_evaluate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (report, ledger) = evaluate_runs(cfg)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_at(&cfg.out_dir))?;
    write_file(&cfg.out_dir.join(REPORT_FILE), json.as_bytes())?;
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf).map_err(input)?;
    write_file(&cfg.out_dir.join(LEDGER_FILE), &buf)?;
    writeln!(stdout, "{json}").map_err(input)?;
    Ok(())
}

pub fn cmd_bias_scan(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let fc = forecast_holdout(cfg, &p.data, &p.timeline, &p.models, cfg.seed)?;
    let probs: Vec<_> = fc.iter().map(|f| f.probs).collect();
    let results: Vec<_> = p.holdout.iter().map(|r| MatchResult::from_score(r.score())).collect();
    let scan = bias_scan(&probs, &results, &cfg.bias_grid).map_err(input)?;
    let mut buf = Vec::new();
    scan.write_csv(&mut buf).map_err(input)?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_at(&cfg.out_dir))?;
    write_file(&cfg.out_dir.join(BIAS_FILE), &buf)?;
    writeln!(
        stdout,
        "best_multiplier={} mean_rps={}",
        scan.best_multiplier, scan.best_rps
    )
    .map_err(input)?;
    Ok(())
}
