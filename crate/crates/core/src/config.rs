//! Run configuration in a flat `key = value` format.
//!
//! ```text
//! # lines starting with '#' are comments
//! data = E0.csv
//! model = knn
//! knn_k = 40
//! bias_grid = 0.8:1.4:0.01
//! ```
//!
//! Every key is optional. Relative paths are resolved against the config
//! file's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::elo::EloParams;
use crate::evaluation::{multiplier_grid, BetScope, MarginDef, Strategy, DEFAULT_P_MIN};
use crate::match_data::OddsColumns;
use crate::models::{ModelKind, ModelSpec};
use crate::simulator::{RatingResample, DEFAULT_MAX_SHOTS, DEFAULT_SIMULATIONS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub odds_columns: OddsColumns,
    pub elo: EloParams,
    /// Number of recent post-match ratings behind a team's rating distribution.
    pub window: usize,
    pub model: ModelSpec,
    pub n_simulations: usize,
    pub max_shots: u32,
    pub seed: u64,
    pub resample_ratings: RatingResample,
    /// Number of final matches held out for evaluation.
    pub holdout: usize,
    pub strategy: Strategy,
    pub bet_scope: BetScope,
    pub p_min: f64,
    pub margin_def: MarginDef,
    pub bias_grid: Vec<f64>,
    pub out_dir: PathBuf,
    pub runs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("matches.csv"),
            odds_columns: OddsColumns::default(),
            elo: EloParams::default(),
            window: 10,
            model: ModelSpec::default(),
            n_simulations: DEFAULT_SIMULATIONS,
            max_shots: DEFAULT_MAX_SHOTS,
            seed: 0,
            resample_ratings: RatingResample::PerSim,
            holdout: 300,
            strategy: Strategy::Proportional,
            bet_scope: BetScope::PerMarket,
            p_min: DEFAULT_P_MIN,
            margin_def: MarginDef::InverseOverround,
            bias_grid: multiplier_grid(0.8, 1.4, 0.01),
            out_dir: PathBuf::from("out"),
            runs: 1,
        }
    }
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| invalid(key, value, "not a number"))
}

fn positive<T: std::str::FromStr + PartialOrd + Default>(key: &str, value: &str) -> Result<T, ConfigError> {
    let v: T = parse_num(key, value)?;
    if v > T::default() {
        Ok(v)
    } else {
        Err(invalid(key, value, "must be positive"))
    }
}

fn parse_switch(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, value, "expected on|off")),
    }
}

/// `start:end:step` or a comma-separated list.
fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let grid = if value.contains(':') {
        let parts: Vec<f64> = value
            .split(':')
            .map(|p| parse_num::<f64>(key, p.trim()))
            .collect::<Result<_, _>>()?;
        let [start, end, step] = parts[..] else {
            return Err(invalid(key, value, "expected start:end:step"));
        };
        multiplier_grid(start, end, step)
    } else {
        value
            .split(',')
            .map(|p| parse_num::<f64>(key, p.trim()))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(invalid(key, value, "grid must be non-empty with positive multipliers"));
    }
    Ok(grid)
}

impl RunConfig {
    /// Reads a config file. Relative `data` and `out_dir` paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            if cfg.data.is_relative() {
                cfg.data = base.join(&cfg.data);
            }
            if cfg.out_dir.is_relative() {
                cfg.out_dir = base.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: i + 1, key },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "data" => self.data = PathBuf::from(value),
            "odds_columns" => {
                let cols: Vec<&str> = value.split(',').map(str::trim).collect();
                let [h, d, a] = cols[..] else {
                    return Err(invalid(key, value, "expected three comma-separated columns"));
                };
                self.odds_columns = OddsColumns {
                    home: h.into(),
                    draw: d.into(),
                    away: a.into(),
                };
            }
            "elo_k" => self.elo.k_factor = positive(key, value)?,
            "elo_scale" => self.elo.scale = positive(key, value)?,
            "elo_initial" => self.elo.initial_rating = parse_num(key, value)?,
            "window" => self.window = positive(key, value)?,
            "model" => {
                self.model.kind = match value {
                    "ols" => ModelKind::Ols,
                    "knn" => ModelKind::Knn,
                    _ => return Err(invalid(key, value, "expected ols|knn")),
                }
            }
            "knn_k" => self.model.k = positive(key, value)?,
            "mad_rescale" => self.model.mad_rescale = parse_switch(key, value)?,
            "n_simulations" => self.n_simulations = positive(key, value)?,
            "max_shots" => self.max_shots = positive(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "resample_ratings" => {
                self.resample_ratings = match value {
                    "per_sim" => RatingResample::PerSim,
                    "once" => RatingResample::Once,
                    _ => return Err(invalid(key, value, "expected per_sim|once")),
                }
            }
            "holdout" => self.holdout = positive(key, value)?,
            "strategy" => {
                self.strategy = parse_num::<u8>(key, value)
                    .ok()
                    .and_then(Strategy::from_number)
                    .ok_or_else(|| invalid(key, value, "expected 1|2"))?
            }
            "bet_scope" => {
                self.bet_scope = match value {
                    "per_market" => BetScope::PerMarket,
                    "best_market" => BetScope::BestMarket,
                    _ => return Err(invalid(key, value, "expected per_market|best_market")),
                }
            }
            "p_min" => self.p_min = positive(key, value)?,
            "margin_def" => {
                self.margin_def = match value {
                    "inverse_overround" => MarginDef::InverseOverround,
                    "overround" => MarginDef::Overround,
                    _ => return Err(invalid(key, value, "expected inverse_overround|overround")),
                }
            }
            "bias_grid" => self.bias_grid = parse_grid(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "runs" => self.runs = positive(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        EloParams::new(self.elo.k_factor, self.elo.scale, self.elo.initial_rating)
            .map_err(|e| invalid("elo", &format!("{:?}", self.elo), e.to_string()))?;
        if self.p_min > 1.0 {
            return Err(invalid("p_min", &self.p_min.to_string(), "must be at most 1"));
        }
        Ok(())
    }

    /// Every field as `key = value` lines in a fixed order. Two configs
    /// render identically iff all their fields are equal.
    pub fn canonical(&self) -> String {
        let grid: Vec<String> = self.bias_grid.iter().map(f64::to_string).collect();
        let strategy = self.strategy.number();
        let resample = match self.resample_ratings {
            RatingResample::PerSim => "per_sim",
            RatingResample::Once => "once",
        };
        let scope = match self.bet_scope {
            BetScope::PerMarket => "per_market",
            BetScope::BestMarket => "best_market",
        };
        let margin = match self.margin_def {
            MarginDef::InverseOverround => "inverse_overround",
            MarginDef::Overround => "overround",
        };
        let fields: [(&str, String); 21] = [
            ("data", self.data.display().to_string()),
            (
                "odds_columns",
                format!(
                    "{},{},{}",
                    self.odds_columns.home, self.odds_columns.draw, self.odds_columns.away
                ),
            ),
            ("elo_k", self.elo.k_factor.to_string()),
            ("elo_scale", self.elo.scale.to_string()),
            ("elo_initial", self.elo.initial_rating.to_string()),
            ("window", self.window.to_string()),
            ("model", self.model.kind.to_string()),
            ("knn_k", self.model.k.to_string()),
            ("mad_rescale", if self.model.mad_rescale { "on" } else { "off" }.into()),
            ("n_simulations", self.n_simulations.to_string()),
            ("max_shots", self.max_shots.to_string()),
            ("seed", self.seed.to_string()),
            ("resample_ratings", resample.into()),
            ("holdout", self.holdout.to_string()),
            ("strategy", strategy.to_string()),
            ("bet_scope", scope.into()),
            ("p_min", self.p_min.to_string()),
            ("margin_def", margin.into()),
            ("bias_grid", grid.join(",")),
            ("out_dir", self.out_dir.display().to_string()),
            ("runs", self.runs.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in fields {
            writeln!(out, "{k} = {v}").expect("writing to a String");
        }
        out
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.elo, EloParams { k_factor: 32.0, scale: 400.0, initial_rating: 500.0 });
        assert_eq!((cfg.window, cfg.n_simulations, cfg.max_shots, cfg.holdout), (10, 10_000, 50, 300));
        assert_eq!(cfg.bias_grid.len(), 61);
    }

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::parse(
            "# comment\n\
             model = knn   # trailing\n\
             knn_k=7\n\
             mad_rescale = off\n\
             odds_columns = PSH, PSD, PSA\n\
             strategy = 1\n\
             bias_grid = 1.0, 1.27\n\
             resample_ratings = once\n",
        )
        .unwrap();
        assert_eq!(cfg.model, ModelSpec { kind: ModelKind::Knn, k: 7, mad_rescale: false });
        assert_eq!(cfg.odds_columns.draw, "PSD");
        assert_eq!(cfg.strategy, Strategy::Flat);
        assert_eq!(cfg.bias_grid, vec![1.0, 1.27]);
        assert_eq!(cfg.resample_ratings, RatingResample::Once);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("nonsense"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            RunConfig::parse("\nfoo = 1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        for bad in [
            "window = 0",
            "elo_k = -3",
            "model = forest",
            "strategy = 3",
            "bias_grid = ",
            "bias_grid = 1.4:0.8:0.1",
            "p_min = 2",
            "odds_columns = A,B",
        ] {
            assert!(RunConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = RunConfig::default();
        assert_eq!(base.hash(), RunConfig::default().hash());
        let edits = [
            "data = other.csv",
            "odds_columns = PSH,PSD,PSA",
            "elo_k = 20",
            "elo_scale = 300",
            "elo_initial = 1500",
            "window = 5",
            "model = knn",
            "knn_k = 3",
            "mad_rescale = off",
            "n_simulations = 100",
            "max_shots = 40",
            "seed = 9",
            "resample_ratings = once",
            "holdout = 10",
            "strategy = 1",
            "bet_scope = best_market",
            "p_min = 0.01",
            "margin_def = overround",
            "bias_grid = 1.0",
            "out_dir = elsewhere",
            "runs = 50",
        ];
        let mut seen = std::collections::HashSet::from([base.hash()]);
        for e in edits {
            let cfg = RunConfig::parse(e).unwrap();
            assert!(seen.insert(cfg.hash()), "{e} did not change the hash");
            assert_eq!(RunConfig::parse(&cfg.canonical()).unwrap(), cfg);
        }
    }
}
