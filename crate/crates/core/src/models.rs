//! Forecasters mapping a pair of ELO ratings to a normal distribution over a
//! per-side target (shots taken, or goals per shot).
//!
//! Two estimators are available:
//!
//! * two-stage least squares: a linear model for the mean, then a second
//!   linear model fitted to the first one's absolute training residuals,
//!   rescaled by `sqrt(pi / 2)` so that it estimates a normal sigma;
//! * k nearest neighbours: mean and sample std of the `k` closest training
//!   targets in standardized rating space.
//!
//! Outputs are clamped on the way out (quality mean in [0, 1], quantity mean
//! non-negative, std non-negative). Shot counts stay continuous here and are
//! rounded by the simulator.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elo::EloTimeline;
use crate::match_data::{derive_targets, Dataset, Side};
use crate::normal::NormalSpec;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("{features} feature rows but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("degenerate features")]
    DegenerateFeatures,
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("k must be between 1 and the number of rows ({rows}), got {k}")]
    InvalidK { k: usize, rows: usize },
    #[error("match {0} is missing from the rating timeline")]
    MissingRatings(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub elo_home: f64,
    pub elo_away: f64,
}

impl FeatureRow {
    pub fn new(elo_home: f64, elo_away: f64) -> Self {
        Self { elo_home, elo_away }
    }

    fn is_finite(&self) -> bool {
        self.elo_home.is_finite() && self.elo_away.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Shots taken by one side.
    Quantity,
    /// Goals per shot for one side.
    Quality,
}

impl TargetKind {
    pub const BOTH: [TargetKind; 2] = [TargetKind::Quantity, TargetKind::Quality];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Quantity => "quantity",
            TargetKind::Quality => "quality",
        }
    }

    /// Inclusive bounds on a forecast mean. `None` means unbounded above.
    pub fn mean_bounds(self) -> (f64, Option<f64>) {
        match self {
            TargetKind::Quantity => (0.0, None),
            TargetKind::Quality => (0.0, Some(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef_home: f64,
    pub coef_away: f64,
}

impl LinearModel {
    pub fn predict(&self, row: FeatureRow) -> f64 {
        self.intercept + self.coef_home * row.elo_home + self.coef_away * row.elo_away
    }
}

fn check_inputs(features: &[FeatureRow], targets: &[f64], min_rows: usize) -> Result<(), ModelError> {
    if features.len() != targets.len() {
        return Err(ModelError::LengthMismatch {
            features: features.len(),
            targets: targets.len(),
        });
    }
    if features.len() < min_rows {
        return Err(ModelError::TooFewRows {
            needed: min_rows,
            got: features.len(),
        });
    }
    if !features.iter().all(FeatureRow::is_finite) || !targets.iter().all(|t| t.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    Ok(())
}

/// Least squares fit of `target ~ 1 + elo_home + elo_away`.
///
/// Solves the normal equations on mean-centred columns, which removes the
/// intercept from the system and keeps it well conditioned for raw ratings
/// in the hundreds.
pub fn fit_ols(features: &[FeatureRow], targets: &[f64]) -> Result<LinearModel, ModelError> {
    check_inputs(features, targets, 3)?;
    let n = features.len() as f64;
    let mean_h = features.iter().map(|f| f.elo_home).sum::<f64>() / n;
    let mean_a = features.iter().map(|f| f.elo_away).sum::<f64>() / n;
    let mean_y = targets.iter().sum::<f64>() / n;

    let (mut s_hh, mut s_aa, mut s_ha, mut s_hy, mut s_ay) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (f, &y) in features.iter().zip(targets) {
        let (h, a, y) = (f.elo_home - mean_h, f.elo_away - mean_a, y - mean_y);
        s_hh += h * h;
        s_aa += a * a;
        s_ha += h * a;
        s_hy += h * y;
        s_ay += a * y;
    }
    let det = s_hh * s_aa - s_ha * s_ha;
    if !(s_hh > 0.0 && s_aa > 0.0) || det <= 1e-12 * s_hh * s_aa {
        return Err(ModelError::DegenerateFeatures);
    }
    let coef_home = (s_aa * s_hy - s_ha * s_ay) / det;
    let coef_away = (s_hh * s_ay - s_ha * s_hy) / det;
    Ok(LinearModel {
        intercept: mean_y - coef_home * mean_h - coef_away * mean_a,
        coef_home,
        coef_away,
    })
}

/// Stored training rows for neighbour lookups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborModel {
    pub k: usize,
    /// Training feature means, used to standardize.
    pub center: [f64; 2],
    /// Training feature standard deviations (1 where a column is constant).
    pub scale: [f64; 2],
    /// Standardized training features, in insertion order.
    pub rows: Vec<[f64; 2]>,
    pub targets: Vec<f64>,
}

impl NeighborModel {
    pub fn fit(features: &[FeatureRow], targets: &[f64], k: usize) -> Result<Self, ModelError> {
        check_inputs(features, targets, 1)?;
        if k == 0 || k > features.len() {
            return Err(ModelError::InvalidK {
                k,
                rows: features.len(),
            });
        }
        let n = features.len() as f64;
        let column = |get: fn(&FeatureRow) -> f64| {
            let mean = features.iter().map(get).sum::<f64>() / n;
            let var = features.iter().map(|f| (get(f) - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        };
        let (mh, sh) = column(|f| f.elo_home);
        let (ma, sa) = column(|f| f.elo_away);
        let center = [mh, ma];
        let scale = [sh, sa];
        let rows = features
            .iter()
            .map(|f| [(f.elo_home - mh) / sh, (f.elo_away - ma) / sa])
            .collect();
        Ok(Self {
            k,
            center,
            scale,
            rows,
            targets: targets.to_vec(),
        })
    }

    /// Indices of the `k` nearest rows; equal distances go to the earlier row.
    pub fn neighbors(&self, row: FeatureRow) -> Vec<usize> {
        let q = [
            (row.elo_home - self.center[0]) / self.scale[0],
            (row.elo_away - self.center[1]) / self.scale[1],
        ];
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2), i))
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_dist);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(by_dist);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    /// Raw (unclamped) neighbour mean and sample std.
    pub fn predict(&self, row: FeatureRow) -> NormalSpec {
        let values: Vec<f64> = self.neighbors(row).into_iter().map(|i| self.targets[i]).collect();
        NormalSpec::from_sample(&values).expect("k >= 1")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    TwoStage {
        mean: LinearModel,
        spread: LinearModel,
        /// Multiplier turning a predicted absolute error into a sigma.
        spread_scale: f64,
    },
    Neighbors(NeighborModel),
}

/// A fitted (mean, spread) forecaster for one side and one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionForecaster {
    pub side: Side,
    pub target: TargetKind,
    pub mean_min: f64,
    pub mean_max: Option<f64>,
    pub estimator: Estimator,
}

impl DistributionForecaster {
    pub fn new(side: Side, target: TargetKind, estimator: Estimator) -> Self {
        let (mean_min, mean_max) = target.mean_bounds();
        Self {
            side,
            target,
            mean_min,
            mean_max,
            estimator,
        }
    }

    /// Model output before clamping.
    pub fn raw(&self, row: FeatureRow) -> (f64, f64) {
        match &self.estimator {
            Estimator::TwoStage {
                mean,
                spread,
                spread_scale,
            } => (mean.predict(row), spread.predict(row) * spread_scale),
            Estimator::Neighbors(knn) => {
                let spec = knn.predict(row);
                (spec.mean, spec.std)
            }
        }
    }

    pub fn forecast(&self, row: FeatureRow) -> NormalSpec {
        let (mean, std) = self.raw(row);
        let mut mean = if mean.is_nan() { self.mean_min } else { mean.max(self.mean_min) };
        if let Some(max) = self.mean_max {
            mean = mean.min(max);
        }
        NormalSpec::new(mean, std)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(s)?)
    }

    /// File stem used when persisting, e.g. `home_quantity`.
    pub fn name(&self) -> String {
        forecaster_name(self.side, self.target)
    }
}

pub fn forecaster_name(side: Side, target: TargetKind) -> String {
    format!("{}_{}", side.as_str(), target.as_str())
}

/// Scale turning the mean absolute deviation of a normal into its sigma.
pub fn mad_to_sigma() -> f64 {
    (PI / 2.0).sqrt()
}

/// Fits the mean model, then a spread model on its absolute training
/// residuals. With `mad_rescale` the spread output is multiplied by
/// `sqrt(pi / 2)`.
pub fn fit_two_stage(
    features: &[FeatureRow],
    targets: &[f64],
    side: Side,
    target: TargetKind,
    mad_rescale: bool,
) -> Result<DistributionForecaster, ModelError> {
    let mean = fit_ols(features, targets)?;
    let abs_residuals: Vec<f64> = features
        .iter()
        .zip(targets)
        .map(|(&f, &y)| (y - mean.predict(f)).abs())
        .collect();
    let spread = fit_ols(features, &abs_residuals)?;
    let spread_scale = if mad_rescale { mad_to_sigma() } else { 1.0 };
    Ok(DistributionForecaster::new(
        side,
        target,
        Estimator::TwoStage {
            mean,
            spread,
            spread_scale,
        },
    ))
}

pub fn fit_knn(
    features: &[FeatureRow],
    targets: &[f64],
    k: usize,
    side: Side,
    target: TargetKind,
) -> Result<DistributionForecaster, ModelError> {
    Ok(DistributionForecaster::new(
        side,
        target,
        Estimator::Neighbors(NeighborModel::fit(features, targets, k)?),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Knn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ols => "ols",
            ModelKind::Knn => "knn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub k: usize,
    pub mad_rescale: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Ols,
            k: 50,
            mad_rescale: true,
        }
    }
}

/// Feature rows and targets for one side and target.
///
/// Features are the pre-match ratings, so `data` must be a prefix of (or
/// equal to) the dataset `timeline` was built from. Zero-shot sides are
/// left out of quality rows.
pub fn training_rows(
    data: &Dataset,
    timeline: &EloTimeline,
    side: Side,
    target: TargetKind,
) -> Result<(Vec<FeatureRow>, Vec<f64>), ModelError> {
    let mut features = Vec::with_capacity(data.len());
    let mut targets = Vec::with_capacity(data.len());
    for (i, rec) in data.iter().enumerate() {
        let home = timeline
            .entry_at(&rec.home_team, i)
            .ok_or(ModelError::MissingRatings(i))?;
        let away = timeline
            .entry_at(&rec.away_team, i)
            .ok_or(ModelError::MissingRatings(i))?;
        let t = derive_targets(rec, side);
        let y = match target {
            TargetKind::Quantity => f64::from(t.shots),
            TargetKind::Quality if t.quality_usable => t.quality,
            TargetKind::Quality => continue,
        };
        features.push(FeatureRow::new(home.pre_rating, away.pre_rating));
        targets.push(y);
    }
    Ok((features, targets))
}

/// The four forecasters one fixture needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterSet {
    pub home_quantity: DistributionForecaster,
    pub home_quality: DistributionForecaster,
    pub away_quantity: DistributionForecaster,
    pub away_quality: DistributionForecaster,
}

impl ForecasterSet {
    pub fn get(&self, side: Side, target: TargetKind) -> &DistributionForecaster {
        match (side, target) {
            (Side::Home, TargetKind::Quantity) => &self.home_quantity,
            (Side::Home, TargetKind::Quality) => &self.home_quality,
            (Side::Away, TargetKind::Quantity) => &self.away_quantity,
            (Side::Away, TargetKind::Quality) => &self.away_quality,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &DistributionForecaster> {
        [
            &self.home_quantity,
            &self.home_quality,
            &self.away_quantity,
            &self.away_quality,
        ]
        .into_iter()
    }

    /// Forecasters that ignore the ratings and always return the given specs.
    pub fn fixed(
        home_quantity: NormalSpec,
        home_quality: NormalSpec,
        away_quantity: NormalSpec,
        away_quality: NormalSpec,
    ) -> Self {
        let constant = |side, target, spec: NormalSpec| {
            let lin = |intercept| LinearModel {
                intercept,
                coef_home: 0.0,
                coef_away: 0.0,
            };
            DistributionForecaster::new(
                side,
                target,
                Estimator::TwoStage {
                    mean: lin(spec.mean),
                    spread: lin(spec.std),
                    spread_scale: 1.0,
                },
            )
        };
        Self {
            home_quantity: constant(Side::Home, TargetKind::Quantity, home_quantity),
            home_quality: constant(Side::Home, TargetKind::Quality, home_quality),
            away_quantity: constant(Side::Away, TargetKind::Quantity, away_quantity),
            away_quality: constant(Side::Away, TargetKind::Quality, away_quality),
        }
    }

    /// Assembles a set from forecasters in any order, checking that each
    /// (side, target) slot is filled exactly once.
    pub fn from_forecasters(list: Vec<DistributionForecaster>) -> Option<Self> {
        let mut slots: [Option<DistributionForecaster>; 4] = Default::default();
        for fc in list {
            let idx = match (fc.side, fc.target) {
                (Side::Home, TargetKind::Quantity) => 0,
                (Side::Home, TargetKind::Quality) => 1,
                (Side::Away, TargetKind::Quantity) => 2,
                (Side::Away, TargetKind::Quality) => 3,
            };
            if slots[idx].replace(fc).is_some() {
                return None;
            }
        }
        let [hq, hl, aq, al] = slots;
        Some(Self {
            home_quantity: hq?,
            home_quality: hl?,
            away_quantity: aq?,
            away_quality: al?,
        })
    }
}

/// Fits all four forecasters on `data` (see [`training_rows`]).
pub fn fit_forecasters(
    data: &Dataset,
    timeline: &EloTimeline,
    spec: &ModelSpec,
) -> Result<ForecasterSet, ModelError> {
    let fit = |side: Side, target: TargetKind| {
        let (x, y) = training_rows(data, timeline, side, target)?;
        match spec.kind {
            ModelKind::Ols => fit_two_stage(&x, &y, side, target, spec.mad_rescale),
            ModelKind::Knn => fit_knn(&x, &y, spec.k, side, target),
        }
    };
    Ok(ForecasterSet {
        home_quantity: fit(Side::Home, TargetKind::Quantity)?,
        home_quality: fit(Side::Home, TargetKind::Quality)?,
        away_quantity: fit(Side::Away, TargetKind::Quantity)?,
        away_quality: fit(Side::Away, TargetKind::Quality)?,
    })
}
