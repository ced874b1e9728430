//! Monte Carlo match simulation.
//!
//! Each simulation draws a rating for both teams, asks the four forecasters
//! for shot quantity and quality distributions at those ratings, samples a
//! shot vector per side and turns every shot into a goal when a uniform draw
//! falls below the shot's sampled quality.
//!
//! Randomness: simulation `i` uses `ChaCha8Rng::seed_from_u64(seed)` moved to
//! stream `i`. Streams are independent, so results do not depend on how
//! simulations are scheduled across threads. When ratings are drawn once per
//! fixture they come from stream `u64::MAX`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::match_data::Side;
use crate::models::{FeatureRow, ForecasterSet, TargetKind};
use crate::normal::NormalSpec;

pub const DEFAULT_SIMULATIONS: usize = 10_000;
pub const DEFAULT_MAX_SHOTS: u32 = 50;

const FIXTURE_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("n_simulations must be at least 1")]
    NoSimulations,
    #[error("max_shots must be at least 1")]
    NoShots,
    #[error("cannot aggregate an empty simulation result")]
    EmptyResult,
    #[error("home and away goal vectors differ in length")]
    RaggedResult,
}

/// When team ratings are drawn from their rolling distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingResample {
    #[default]
    PerSim,
    Once,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, Copy)]
pub struct FixtureInput<'a> {
    pub home_rating: NormalSpec,
    pub away_rating: NormalSpec,
    pub forecasters: &'a ForecasterSet,
    pub n_simulations: usize,
    pub max_shots: u32,
    pub seed: u64,
    pub resample: RatingResample,
}

impl<'a> FixtureInput<'a> {
    /// Input with default simulation count, shot cap and per-simulation
    /// rating draws.
    pub fn new(
        home_rating: NormalSpec,
        away_rating: NormalSpec,
        forecasters: &'a ForecasterSet,
        seed: u64,
    ) -> Self {
        Self {
            home_rating,
            away_rating,
            forecasters,
            n_simulations: DEFAULT_SIMULATIONS,
            max_shots: DEFAULT_MAX_SHOTS,
            seed,
            resample: RatingResample::PerSim,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.n_simulations == 0 {
            return Err(SimError::NoSimulations);
        }
        if self.max_shots == 0 {
            return Err(SimError::NoShots);
        }
        Ok(())
    }
}

/// Simulated final scores, one entry per simulation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimulationResult {
    pub home_goals: Vec<u32>,
    pub away_goals: Vec<u32>,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.home_goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.home_goals.is_empty()
    }

    pub fn scores(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.home_goals.iter().copied().zip(self.away_goals.iter().copied())
    }
}

fn normal(spec: NormalSpec) -> Normal<f64> {
    Normal::new(spec.mean, spec.std).expect("NormalSpec holds a finite, non-negative std")
}

/// Rounds to the nearest integer with halves away from zero, then clamps to
/// `[0, max]`.
pub fn round_clamped(value: f64, max: u32) -> u32 {
    if value.is_nan() {
        return 0;
    }
    value.round().clamp(0.0, f64::from(max)) as u32
}

/// Draws a shot count from `quantity` and that many per-shot scoring
/// probabilities from `quality` (clamped to [0, 1]).
pub fn sample_shot_vector<R: Rng + ?Sized>(
    quality: NormalSpec,
    quantity: NormalSpec,
    max_shots: u32,
    rng: &mut R,
) -> Vec<f64> {
    let n = round_clamped(normal(quantity).sample(rng), max_shots) as usize;
    let quality = normal(quality);
    (0..n).map(|_| quality.sample(rng).clamp(0.0, 1.0)).collect()
}

fn simulate_side<R: Rng + ?Sized>(
    quality: NormalSpec,
    quantity: NormalSpec,
    max_shots: u32,
    rng: &mut R,
) -> u32 {
    sample_shot_vector(quality, quantity, max_shots, rng)
        .into_iter()
        .filter(|&q| rng.random::<f64>() < q)
        .count() as u32
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_ratings<R: Rng + ?Sized>(fx: &FixtureInput<'_>, rng: &mut R) -> FeatureRow {
    FeatureRow::new(
        normal(fx.home_rating).sample(rng),
        normal(fx.away_rating).sample(rng),
    )
}

fn simulate_one(fx: &FixtureInput<'_>, fixed: Option<FeatureRow>, index: usize) -> (u32, u32) {
    let mut rng = stream_rng(fx.seed, index as u64);
    let ratings = fixed.unwrap_or_else(|| draw_ratings(fx, &mut rng));
    let spec = |side, target| fx.forecasters.get(side, target).forecast(ratings);
    let home = simulate_side(
        spec(Side::Home, TargetKind::Quality),
        spec(Side::Home, TargetKind::Quantity),
        fx.max_shots,
        &mut rng,
    );
    let away = simulate_side(
        spec(Side::Away, TargetKind::Quality),
        spec(Side::Away, TargetKind::Quantity),
        fx.max_shots,
        &mut rng,
    );
    (home, away)
}

/// Runs the fixture's simulations in parallel.
pub fn simulate(fx: &FixtureInput<'_>) -> Result<SimulationResult, SimError> {
    simulate_with(fx, Execution::Parallel)
}

/// Runs the fixture's simulations. Both execution modes give identical output.
pub fn simulate_with(fx: &FixtureInput<'_>, exec: Execution) -> Result<SimulationResult, SimError> {
    fx.validate()?;
    let fixed = match fx.resample {
        RatingResample::PerSim => None,
        RatingResample::Once => Some(draw_ratings(fx, &mut stream_rng(fx.seed, FIXTURE_STREAM))),
    };
    let scores: Vec<(u32, u32)> = match exec {
        Execution::Parallel => (0..fx.n_simulations)
            .into_par_iter()
            .map(|i| simulate_one(fx, fixed, i))
            .collect(),
        Execution::Sequential => (0..fx.n_simulations)
            .map(|i| simulate_one(fx, fixed, i))
            .collect(),
    };
    let (home_goals, away_goals) = scores.into_iter().unzip();
    Ok(SimulationResult {
        home_goals,
        away_goals,
    })
}

pub type Score = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointScores {
    pub mean: Score,
    pub median: Score,
    pub mode: Score,
}

/// Market probabilities derived from one fixture's simulations.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketForecast {
    pub n_simulations: usize,
    pub p_home: f64,
    pub p_draw: f64,
    pub p_away: f64,
    /// Simulation counts behind the probabilities, keyed by scoreline.
    pub score_counts: BTreeMap<Score, usize>,
    pub score_distribution: BTreeMap<Score, f64>,
    /// Goal line (0.5, 1.5, ...) → probability of more total goals.
    pub totals: Vec<(f64, f64)>,
    /// Home minus away goals → probability.
    pub margins: BTreeMap<i64, f64>,
    pub point_scores: PointScores,
}

pub const TOTAL_LINES: [f64; 7] = [0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5];

fn median_rounded(values: &[u32]) -> u32 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    let m = if v.len() % 2 == 1 {
        f64::from(v[mid])
    } else {
        (f64::from(v[mid - 1]) + f64::from(v[mid])) / 2.0
    };
    m.round() as u32
}

fn mean_rounded(values: &[u32]) -> u32 {
    let sum: u64 = values.iter().map(|&v| u64::from(v)).sum();
    (sum as f64 / values.len() as f64).round() as u32
}

/// Collapses simulations into frequencies and point forecasts.
///
/// Mean and median round halves away from zero. The mode takes the most
/// frequent scoreline; ties go to more total goals, then to the larger
/// (home, away) pair.
pub fn aggregate(res: &SimulationResult) -> Result<MarketForecast, SimError> {
    if res.home_goals.len() != res.away_goals.len() {
        return Err(SimError::RaggedResult);
    }
    if res.is_empty() {
        return Err(SimError::EmptyResult);
    }
    let n = res.len();
    let total = n as f64;

    let mut score_counts: BTreeMap<Score, usize> = BTreeMap::new();
    for s in res.scores() {
        *score_counts.entry(s).or_default() += 1;
    }

    let (mut home, mut draw, mut away) = (0usize, 0usize, 0usize);
    let mut margin_counts: BTreeMap<i64, usize> = BTreeMap::new();
    let mut over_counts = [0usize; TOTAL_LINES.len()];
    for (&(h, a), &c) in &score_counts {
        match h.cmp(&a) {
            std::cmp::Ordering::Greater => home += c,
            std::cmp::Ordering::Equal => draw += c,
            std::cmp::Ordering::Less => away += c,
        }
        *margin_counts.entry(i64::from(h) - i64::from(a)).or_default() += c;
        let goals = f64::from(h + a);
        for (slot, line) in over_counts.iter_mut().zip(TOTAL_LINES) {
            if goals > line {
                *slot += c;
            }
        }
    }

    let mode = score_counts
        .iter()
        .max_by_key(|(&(h, a), &c)| (c, h + a, h, a))
        .map(|(&s, _)| s)
        .expect("non-empty");

    Ok(MarketForecast {
        n_simulations: n,
        p_home: home as f64 / total,
        p_draw: draw as f64 / total,
        p_away: away as f64 / total,
        score_distribution: score_counts
            .iter()
            .map(|(&s, &c)| (s, c as f64 / total))
            .collect(),
        score_counts,
        totals: TOTAL_LINES
            .iter()
            .zip(over_counts)
            .map(|(&line, c)| (line, c as f64 / total))
            .collect(),
        margins: margin_counts
            .into_iter()
            .map(|(m, c)| (m, c as f64 / total))
            .collect(),
        point_scores: PointScores {
            mean: (mean_rounded(&res.home_goals), mean_rounded(&res.away_goals)),
            median: (median_rounded(&res.home_goals), median_rounded(&res.away_goals)),
            mode,
        },
    })
}

#[derive(Serialize)]
struct OutcomeJson {
    home: f64,
    draw: f64,
    away: f64,
}

#[derive(Serialize)]
struct ForecastJson<'a> {
    p: OutcomeJson,
    scores: Vec<(u32, u32, f64)>,
    totals: &'a [(f64, f64)],
    margins: Vec<(i64, f64)>,
    point: &'a PointScores,
    n_simulations: usize,
    seed: u64,
}

impl MarketForecast {
    /// Serializes as
    /// `{"p": {...}, "scores": [[h, a, p], ...], ..., "point": {...}, "n_simulations": n, "seed": s}`.
    pub fn to_json(&self, seed: u64) -> String {
        let doc = ForecastJson {
            p: OutcomeJson {
                home: self.p_home,
                draw: self.p_draw,
                away: self.p_away,
            },
            scores: self
                .score_distribution
                .iter()
                .map(|(&(h, a), &p)| (h, a, p))
                .collect(),
            totals: &self.totals,
            margins: self.margins.iter().map(|(&m, &p)| (m, p)).collect(),
            point: &self.point_scores,
            n_simulations: self.n_simulations,
            seed,
        };
        serde_json::to_string_pretty(&doc).expect("forecast serializes")
    }
}

/// Estimates how often a side whose goals follow `dist_a` outscores one
/// following `dist_b`. Each draw is rounded to the nearest integer and
/// floored at zero before comparing.
pub fn win_probability_two_normals(
    dist_a: NormalSpec,
    dist_b: NormalSpec,
    n_sims: usize,
    seed: u64,
) -> f64 {
    if n_sims == 0 {
        return 0.0;
    }
    let (a, b) = (normal(dist_a), normal(dist_b));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goals = |x: f64| x.round().max(0.0);
    let wins = (0..n_sims)
        .filter(|_| {
            let ga = goals(a.sample(&mut rng));
            let gb = goals(b.sample(&mut rng));
            ga > gb
        })
        .count();
    wins as f64 / n_sims as f64
}
