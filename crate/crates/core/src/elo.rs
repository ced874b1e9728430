//! ELO ratings over a match history.
//!
//! Every team starts at the initial rating and after each match moves by
//! `K * (O - P)`, where `O` is the actual score (1 / 0.5 / 0) and `P` the
//! logistic expectation. Updates are zero-sum. There is no home-advantage
//! term; home and away ratings reach the downstream models as separate
//! inputs.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::match_data::{parse_date, Dataset};
use crate::normal::NormalSpec;

#[derive(Debug, Error)]
pub enum EloError {
    #[error("outcome must be 1, 0.5 or 0, got {0}")]
    InvalidOutcome(f64),
    #[error("invalid ELO parameters: {0}")]
    InvalidParams(&'static str),
    #[error("unknown team `{0}`")]
    UnknownTeam(String),
    #[error("rating window must be positive")]
    ZeroWindow,
    #[error("malformed timeline row {row}: {reason}")]
    MalformedTimeline { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloParams {
    pub k_factor: f64,
    /// Rating gap corresponding to a ten-fold difference in winning odds.
    pub scale: f64,
    pub initial_rating: f64,
}

impl Default for EloParams {
    fn default() -> Self {
        Self {
            k_factor: 32.0,
            scale: 400.0,
            initial_rating: 500.0,
        }
    }
}

impl EloParams {
    pub fn new(k_factor: f64, scale: f64, initial_rating: f64) -> Result<Self, EloError> {
        if !(k_factor.is_finite() && k_factor > 0.0) {
            return Err(EloError::InvalidParams("k_factor must be positive"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(EloError::InvalidParams("scale must be positive"));
        }
        if !initial_rating.is_finite() {
            return Err(EloError::InvalidParams("initial rating must be finite"));
        }
        Ok(Self {
            k_factor,
            scale,
            initial_rating,
        })
    }
}

/// Result of a match from one team's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    Win,
    Draw,
    Loss,
}

impl MatchOutcome {
    pub fn score(self) -> f64 {
        match self {
            MatchOutcome::Win => 1.0,
            MatchOutcome::Draw => 0.5,
            MatchOutcome::Loss => 0.0,
        }
    }

    pub fn from_goals(scored: u32, conceded: u32) -> Self {
        match scored.cmp(&conceded) {
            std::cmp::Ordering::Greater => MatchOutcome::Win,
            std::cmp::Ordering::Equal => MatchOutcome::Draw,
            std::cmp::Ordering::Less => MatchOutcome::Loss,
        }
    }
}

/// Probability that a team rated `rating_i` beats one rated `rating_j`.
pub fn expected_score(rating_i: f64, rating_j: f64, params: &EloParams) -> f64 {
    1.0 / (1.0 + 10f64.powf(-(rating_i - rating_j) / params.scale))
}

/// New ratings for both teams after a match in which team `i` scored
/// `outcome_i` (1 win, 0.5 draw, 0 loss).
pub fn update(
    rating_i: f64,
    rating_j: f64,
    outcome_i: f64,
    params: &EloParams,
) -> Result<(f64, f64), EloError> {
    if ![1.0, 0.5, 0.0].contains(&outcome_i) {
        return Err(EloError::InvalidOutcome(outcome_i));
    }
    let delta = params.k_factor * (outcome_i - expected_score(rating_i, rating_j, params));
    // j's own update K((1 - O) - (1 - P)) is exactly -delta
    Ok((rating_i + delta, rating_j - delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub match_index: usize,
    pub date: NaiveDate,
    pub pre_rating: f64,
    pub post_rating: f64,
}

/// Per-team rating histories produced by [`run_history`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EloTimeline {
    history: BTreeMap<String, Vec<TimelineEntry>>,
    current: BTreeMap<String, f64>,
}

/// Replays `data` in order. Teams enter at the initial rating on first
/// appearance.
pub fn run_history(data: &Dataset, params: &EloParams) -> EloTimeline {
    let mut timeline = EloTimeline::default();
    for (index, rec) in data.iter().enumerate() {
        let home_pre = timeline.rating_or(&rec.home_team, params.initial_rating);
        let away_pre = timeline.rating_or(&rec.away_team, params.initial_rating);
        let outcome = MatchOutcome::from_goals(rec.home_goals, rec.away_goals);
        let (home_post, away_post) = update(home_pre, away_pre, outcome.score(), params)
            .expect("outcome score is always valid");
        timeline.push(&rec.home_team, index, rec.date, home_pre, home_post);
        timeline.push(&rec.away_team, index, rec.date, away_pre, away_post);
    }
    timeline
}

impl EloTimeline {
    fn rating_or(&self, team: &str, initial: f64) -> f64 {
        self.current.get(team).copied().unwrap_or(initial)
    }

    fn push(&mut self, team: &str, match_index: usize, date: NaiveDate, pre: f64, post: f64) {
        self.history
            .entry(team.to_string())
            .or_default()
            .push(TimelineEntry {
                match_index,
                date,
                pre_rating: pre,
                post_rating: post,
            });
        self.current.insert(team.to_string(), post);
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn teams(&self) -> impl Iterator<Item = &str> {
        self.current.keys().map(String::as_str)
    }

    pub fn current_ratings(&self) -> &BTreeMap<String, f64> {
        &self.current
    }

    pub fn current_rating(&self, team: &str) -> Option<f64> {
        self.current.get(team).copied()
    }

    pub fn history(&self, team: &str) -> Option<&[TimelineEntry]> {
        self.history.get(team).map(Vec::as_slice)
    }

    /// The team's entry for match `match_index`, if it played in it.
    pub fn entry_at(&self, team: &str, match_index: usize) -> Option<&TimelineEntry> {
        let h = self.history.get(team)?;
        h.binary_search_by_key(&match_index, |e| e.match_index)
            .ok()
            .map(|i| &h[i])
    }

    /// Mean and sample std of the team's last `window` post-match ratings.
    pub fn rating_distribution(&self, team: &str, window: usize) -> Result<NormalSpec, EloError> {
        self.rating_distribution_before(team, usize::MAX, window)
    }

    /// As [`rating_distribution`](Self::rating_distribution), restricted to
    /// matches with index below `match_index`.
    pub fn rating_distribution_before(
        &self,
        team: &str,
        match_index: usize,
        window: usize,
    ) -> Result<NormalSpec, EloError> {
        if window == 0 {
            return Err(EloError::ZeroWindow);
        }
        let history = self
            .history
            .get(team)
            .ok_or_else(|| EloError::UnknownTeam(team.to_string()))?;
        let end = history.partition_point(|e| e.match_index < match_index);
        let start = end.saturating_sub(window);
        let posts: Vec<f64> = history[start..end].iter().map(|e| e.post_rating).collect();
        NormalSpec::from_sample(&posts).ok_or_else(|| EloError::UnknownTeam(team.to_string()))
    }

    /// Writes `team,match_index,date,pre_rating,post_rating` rows, grouped by
    /// team in name order.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), EloError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["team", "match_index", "date", "pre_rating", "post_rating"])?;
        for (team, entries) in &self.history {
            for e in entries {
                w.write_record([
                    team.clone(),
                    e.match_index.to_string(),
                    e.date.format("%Y-%m-%d").to_string(),
                    e.pre_rating.to_string(),
                    e.post_rating.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, EloError> {
        let mut reader = csv::Reader::from_reader(source);
        let mut timeline = EloTimeline::default();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let bad = |reason: &str| EloError::MalformedTimeline {
                row: i + 1,
                reason: reason.to_string(),
            };
            if row.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let team = row[0].to_string();
            let match_index = row[1].parse().map_err(|_| bad("match_index"))?;
            let date = parse_date(&row[2]).ok_or_else(|| bad("date"))?;
            let pre: f64 = row[3].parse().map_err(|_| bad("pre_rating"))?;
            let post: f64 = row[4].parse().map_err(|_| bad("post_rating"))?;
            let entries = timeline.history.entry(team.clone()).or_default();
            if entries.last().is_some_and(|e| e.match_index >= match_index) {
                return Err(bad("match indices must increase per team"));
            }
            entries.push(TimelineEntry {
                match_index,
                date,
                pre_rating: pre,
                post_rating: post,
            });
            timeline.current.insert(team, post);
        }
        Ok(timeline)
    }
}
