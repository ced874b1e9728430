//! Forecast scoring, betting backtests and the draw-bias scan.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::match_data::OddsTriple;
use crate::simulator::{MarketForecast, Score};

/// Default probability floor applied before inverting into odds.
pub const DEFAULT_P_MIN: f64 = 0.001;

const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("invalid outcome probabilities ({home}, {draw}, {away})")]
    InvalidProbs { home: f64, draw: f64, away: f64 },
    #[error("length mismatch: {0} forecasts vs {1} actuals")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("bias grid must be non-empty with positive multipliers")]
    BadGrid,
}

/// Full-time result, ordered home < draw < away for ranked scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchResult {
    Home,
    Draw,
    Away,
}

impl MatchResult {
    pub const ALL: [MatchResult; 3] = [MatchResult::Home, MatchResult::Draw, MatchResult::Away];

    pub fn from_score((home, away): Score) -> Self {
        match home.cmp(&away) {
            std::cmp::Ordering::Greater => MatchResult::Home,
            std::cmp::Ordering::Equal => MatchResult::Draw,
            std::cmp::Ordering::Less => MatchResult::Away,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MatchResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchResult::Home => "home",
            MatchResult::Draw => "draw",
            MatchResult::Away => "away",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbs {
    pub home: f64,
    pub draw: f64,
    pub away: f64,
}

impl OutcomeProbs {
    /// Each probability must lie in [0, 1] and the three must sum to 1
    /// within 1e-9.
    pub fn new(home: f64, draw: f64, away: f64) -> Result<Self, EvalError> {
        let in_range = |p: f64| (0.0..=1.0).contains(&p);
        if in_range(home)
            && in_range(draw)
            && in_range(away)
            && (home + draw + away - 1.0).abs() <= PROB_TOLERANCE
        {
            Ok(Self { home, draw, away })
        } else {
            Err(EvalError::InvalidProbs { home, draw, away })
        }
    }

    pub fn from_forecast(f: &MarketForecast) -> Self {
        Self {
            home: f.p_home,
            draw: f.p_draw,
            away: f.p_away,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.home, self.draw, self.away]
    }

    pub fn get(&self, result: MatchResult) -> f64 {
        self.as_array()[result.index()]
    }
}

/// Ranked probability score over the ordered outcomes (home, draw, away):
/// half the summed squared gap between cumulative forecast and cumulative
/// outcome.
pub fn rps(probs: &OutcomeProbs, actual: MatchResult) -> f64 {
    let p = probs.as_array();
    let mut cum_p = 0.0;
    let mut cum_o = 0.0;
    let mut total = 0.0;
    for (i, &pi) in p.iter().enumerate().take(2) {
        cum_p += pi;
        cum_o += if i == actual.index() { 1.0 } else { 0.0 };
        total += (cum_p - cum_o).powi(2);
    }
    total / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreError {
    /// `dh^2 + da^2`
    pub squared: f64,
    /// `|dh| + |da|`
    pub absolute: f64,
}

pub fn score_errors(pred: Score, actual: Score) -> ScoreError {
    let dh = f64::from(pred.0) - f64::from(actual.0);
    let da = f64::from(pred.1) - f64::from(actual.1);
    ScoreError {
        squared: dh * dh + da * da,
        absolute: dh.abs() + da.abs(),
    }
}

pub const BASELINE_SCORE: Score = (1, 1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_matches: usize,
    pub mean_rps: f64,
    pub rmse: f64,
    pub mae: f64,
    pub baseline_rmse: f64,
    pub baseline_mae: f64,
}

fn rmse_mae(preds: impl Iterator<Item = Score>, actuals: &[Score]) -> (f64, f64) {
    let n = actuals.len() as f64;
    let (sq, abs) = preds.zip(actuals).fold((0.0, 0.0), |(sq, abs), (p, &a)| {
        let e = score_errors(p, a);
        (sq + e.squared, abs + e.absolute)
    });
    ((sq / n).sqrt(), abs / n)
}

/// Mean RPS plus RMSE / MAE of the point scores, alongside the constant 1-1
/// baseline.
pub fn evaluate_forecasts(
    forecasts: &[(OutcomeProbs, Score)],
    actuals: &[Score],
) -> Result<EvaluationReport, EvalError> {
    if forecasts.len() != actuals.len() {
        return Err(EvalError::LengthMismatch(forecasts.len(), actuals.len()));
    }
    if forecasts.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = actuals.len() as f64;
    let mean_rps = forecasts
        .iter()
        .zip(actuals)
        .map(|((p, _), &a)| rps(p, MatchResult::from_score(a)))
        .sum::<f64>()
        / n;
    let (rmse, mae) = rmse_mae(forecasts.iter().map(|f| f.1), actuals);
    let (baseline_rmse, baseline_mae) =
        rmse_mae(std::iter::repeat(BASELINE_SCORE), actuals);
    Ok(EvaluationReport {
        n_matches: actuals.len(),
        mean_rps,
        rmse,
        mae,
        baseline_rmse,
        baseline_mae,
    })
}

/// Decimal odds implied by probability `p`, flooring `p` at `p_min`.
pub fn fair_odds(p: f64, p_min: f64) -> f64 {
    1.0 / p.max(p_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// One unit on every value bet.
    Flat,
    /// Stake equal to the model probability (the inverse of the fair odds).
    Proportional,
}

impl Strategy {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Strategy::Flat),
            2 => Some(Strategy::Proportional),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Strategy::Flat => 1,
            Strategy::Proportional => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetScope {
    /// Every market whose price beats the model's fair odds.
    #[default]
    PerMarket,
    /// Only the market with the largest price-to-fair ratio.
    BestMarket,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestConfig {
    pub strategy: Strategy,
    pub scope: BetScope,
    pub p_min: f64,
}

impl BacktestConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            scope: BetScope::PerMarket,
            p_min: DEFAULT_P_MIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bet {
    pub fixture: usize,
    pub market: MatchResult,
    pub stake: f64,
    pub odds: f64,
    pub won: bool,
}

impl Bet {
    pub fn returned(&self) -> f64 {
        if self.won {
            self.stake * self.odds
        } else {
            0.0
        }
    }

    pub fn pnl(&self) -> f64 {
        self.returned() - self.stake
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BetLedger {
    pub bets: Vec<Bet>,
    /// Fixtures without a usable odds triple.
    pub skipped_fixtures: usize,
    pub staked: f64,
    pub returned: f64,
}

impl BetLedger {
    pub fn push(&mut self, bet: Bet) {
        self.staked += bet.stake;
        self.returned += bet.returned();
        self.bets.push(bet);
    }

    pub fn profit(&self) -> f64 {
        self.returned - self.staked
    }

    /// `(returned - staked) / staked`, or `None` when nothing was staked.
    pub fn rentability(&self) -> Option<f64> {
        (self.staked > 0.0).then(|| self.profit() / self.staked)
    }

    /// Concatenates two ledgers' bets and totals.
    pub fn merge(mut self, other: BetLedger) -> BetLedger {
        self.skipped_fixtures += other.skipped_fixtures;
        for bet in other.bets {
            self.push(bet);
        }
        self
    }

    /// Writes `fixture,market,stake,odds,won,pnl` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["fixture", "market", "stake", "odds", "won", "pnl"])?;
        for b in &self.bets {
            w.write_record([
                b.fixture.to_string(),
                b.market.to_string(),
                b.stake.to_string(),
                b.odds.to_string(),
                b.won.to_string(),
                b.pnl().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bets wherever the bookmaker's price is strictly above the model's fair
/// odds and settles against `results`. Fixtures without odds are skipped.
pub fn backtest(
    model_probs: &[OutcomeProbs],
    book_odds: &[Option<OddsTriple>],
    results: &[MatchResult],
    config: &BacktestConfig,
) -> Result<BetLedger, EvalError> {
    if model_probs.len() != book_odds.len() {
        return Err(EvalError::LengthMismatch(model_probs.len(), book_odds.len()));
    }
    if model_probs.len() != results.len() {
        return Err(EvalError::LengthMismatch(model_probs.len(), results.len()));
    }
    let mut ledger = BetLedger::default();
    for (fixture, ((probs, odds), &result)) in model_probs.iter().zip(book_odds).zip(results).enumerate() {
        let Some(odds) = odds else {
            ledger.skipped_fixtures += 1;
            continue;
        };
        let prices = odds.as_array();
        let value: Vec<(MatchResult, f64, f64)> = MatchResult::ALL
            .into_iter()
            .map(|m| (m, prices[m.index()], fair_odds(probs.get(m), config.p_min)))
            .filter(|&(_, book, fair)| book > fair)
            .collect();
        let chosen: Vec<_> = match config.scope {
            BetScope::PerMarket => value,
            BetScope::BestMarket => value
                .into_iter()
                .reduce(|best, c| if c.1 / c.2 > best.1 / best.2 { c } else { best })
                .into_iter()
                .collect(),
        };
        for (market, book, fair) in chosen {
            let stake = match config.strategy {
                Strategy::Flat => 1.0,
                Strategy::Proportional => 1.0 / fair,
            };
            ledger.push(Bet {
                fixture,
                market,
                stake,
                odds: book,
                won: market == result,
            });
        }
    }
    Ok(ledger)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginDef {
    /// `1/R - 1`: return of staking on all outcomes in proportion to their
    /// implied probabilities.
    #[default]
    InverseOverround,
    /// `-(R - 1)`: the overround, negated to share the sign convention.
    Overround,
}

/// Sum of the reciprocal prices.
pub fn overround(odds: &OddsTriple) -> f64 {
    odds.as_array().iter().map(|o| 1.0 / o).sum()
}

pub fn bookmaker_margin(odds: &OddsTriple, def: MarginDef) -> f64 {
    let r = overround(odds);
    match def {
        MarginDef::InverseOverround => 1.0 / r - 1.0,
        MarginDef::Overround => -(r - 1.0),
    }
}

/// Bookmaker probabilities with the overround normalised away.
pub fn implied_probs(odds: &OddsTriple) -> OutcomeProbs {
    let r = overround(odds);
    let [h, d, a] = odds.as_array().map(|o| 1.0 / o / r);
    OutcomeProbs {
        home: h,
        draw: d,
        away: a,
    }
}

/// Scales the draw probability by `multiplier` and renormalises.
///
/// # Panics
///
/// If `multiplier` is not strictly positive.
pub fn adjust_draw(probs: &OutcomeProbs, multiplier: f64) -> OutcomeProbs {
    assert!(multiplier > 0.0, "draw multiplier must be positive");
    let draw = probs.draw * multiplier;
    let total = probs.home + draw + probs.away;
    OutcomeProbs {
        home: probs.home / total,
        draw: draw / total,
        away: probs.away / total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScanResult {
    /// `(multiplier, mean RPS)` in grid order.
    pub curve: Vec<(f64, f64)>,
    pub best_multiplier: f64,
    pub best_rps: f64,
}

impl BiasScanResult {
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["multiplier", "mean_rps"])?;
        for (m, r) in &self.curve {
            w.write_record([m.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean RPS after [`adjust_draw`] at every grid multiplier. The best
/// multiplier minimises mean RPS; ties go to the one closest to 1.
pub fn bias_scan(
    forecasts: &[OutcomeProbs],
    actuals: &[MatchResult],
    grid: &[f64],
) -> Result<BiasScanResult, EvalError> {
    if grid.is_empty() || grid.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(EvalError::BadGrid);
    }
    if forecasts.len() != actuals.len() {
        return Err(EvalError::LengthMismatch(forecasts.len(), actuals.len()));
    }
    if forecasts.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = forecasts.len() as f64;
    let curve: Vec<(f64, f64)> = grid
        .iter()
        .map(|&m| {
            let total: f64 = forecasts
                .iter()
                .zip(actuals)
                .map(|(p, &a)| rps(&adjust_draw(p, m), a))
                .sum();
            (m, total / n)
        })
        .collect();
    let &(best_multiplier, best_rps) = curve
        .iter()
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then((a.0 - 1.0).abs().total_cmp(&(b.0 - 1.0).abs()))
        })
        .expect("grid is non-empty");
    Ok(BiasScanResult {
        curve,
        best_multiplier,
        best_rps,
    })
}

/// Multipliers from `start` to `end` inclusive in `step` increments.
pub fn multiplier_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || end < start {
        return Vec::new();
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}
