//! Soccer match forecasting from shot quantity and shot quality distributions.
//!
//! The pipeline runs in five stages, one module each:
//!
//! 1. [`match_data`] ingests football-data.co.uk style CSV files.
//! 2. [`elo`] replays the match history into per-team ratings.
//! 3. [`models`] maps a pair of ratings to normal distributions over shots
//!    taken and goals-per-shot, for each side.
//! 4. [`simulator`] samples shot vectors by Monte Carlo and aggregates the
//!    simulated scorelines into market probabilities.
//! 5. [`evaluation`] scores forecasts (RPS, RMSE, MAE), backtests betting
//!    strategies and scans for a draw-probability bias.
//!
//! [`config`] and [`cli`] wire these into reproducible command-line runs.

pub mod cli;
pub mod config;
pub mod elo;
pub mod evaluation;
pub mod match_data;
pub mod models;
pub mod normal;
pub mod simulator;

pub use elo::{EloParams, EloTimeline};
pub use evaluation::{BetLedger, OutcomeProbs};
pub use match_data::{Dataset, MatchRecord, Side};
pub use models::{DistributionForecaster, ForecasterSet};
pub use normal::NormalSpec;
pub use simulator::{FixtureInput, MarketForecast, SimulationResult};
