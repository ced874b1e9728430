//! Historical match ingestion, per-match model targets and the chronological
//! train/holdout split.
//!
//! Input files follow the football-data.co.uk column naming. Only the result
//! and shot columns are required; the bookmaker odds triple is optional and
//! a row without usable odds is kept for modelling.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COL_DATE: &str = "Date";
pub const COL_HOME_TEAM: &str = "HomeTeam";
pub const COL_AWAY_TEAM: &str = "AwayTeam";
pub const COL_HOME_GOALS: &str = "FTHG";
pub const COL_AWAY_GOALS: &str = "FTAG";
pub const COL_HOME_SHOTS: &str = "HS";
pub const COL_AWAY_SHOTS: &str = "AS";

const REQUIRED_COLUMNS: [&str; 7] = [
    COL_DATE,
    COL_HOME_TEAM,
    COL_AWAY_TEAM,
    COL_HOME_GOALS,
    COL_AWAY_GOALS,
    COL_HOME_SHOTS,
    COL_AWAY_SHOTS,
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("empty dataset")]
    Empty,
    #[error("holdout size {tail_n} must be smaller than the dataset size {len}")]
    SplitTooLarge { tail_n: usize, len: usize },
    #[error("holdout size must be positive")]
    ZeroHoldout,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Home,
    Away,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Home, Side::Away];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Home => "home",
            Side::Away => "away",
        }
    }
}

/// Decimal odds for the home / draw / away markets. Each price is > 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsTriple {
    pub home: f64,
    pub draw: f64,
    pub away: f64,
}

impl OddsTriple {
    /// Returns `None` unless every price is finite and strictly above 1.
    pub fn new(home: f64, draw: f64, away: f64) -> Option<Self> {
        let valid = |o: f64| o.is_finite() && o > 1.0;
        (valid(home) && valid(draw) && valid(away)).then_some(Self { home, draw, away })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.home, self.draw, self.away]
    }
}

/// Names of the three odds columns to read. Defaults to Bet365.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddsColumns {
    pub home: String,
    pub draw: String,
    pub away: String,
}

impl Default for OddsColumns {
    fn default() -> Self {
        Self {
            home: "B365H".into(),
            draw: "B365D".into(),
            away: "B365A".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub date: NaiveDate,
    pub home_team: String,
    pub away_team: String,
    pub home_goals: u32,
    pub away_goals: u32,
    pub home_shots: u32,
    pub away_shots: u32,
    pub odds: Option<OddsTriple>,
}

impl MatchRecord {
    pub fn goals(&self, side: Side) -> u32 {
        match side {
            Side::Home => self.home_goals,
            Side::Away => self.away_goals,
        }
    }

    pub fn shots(&self, side: Side) -> u32 {
        match side {
            Side::Home => self.home_shots,
            Side::Away => self.away_shots,
        }
    }

    pub fn score(&self) -> (u32, u32) {
        (self.home_goals, self.away_goals)
    }
}

/// Chronologically ordered match history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<MatchRecord>,
    /// Data rows dropped during parsing because a required field was unusable.
    pub skipped_rows: usize,
}

impl Dataset {
    /// Wraps `records`, stable-sorting them by date.
    pub fn from_records(mut records: Vec<MatchRecord>) -> Self {
        records.sort_by_key(|r| r.date);
        Self {
            records,
            skipped_rows: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MatchRecord> {
        self.records.iter()
    }
}

/// Accepts ISO dates as well as football-data.co.uk's `DD/MM/YYYY` and the
/// two-digit-year `DD/MM/YY` used by older seasons.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let fmt = match s.rsplit_once('/') {
        Some((_, year)) if year.len() == 2 => "%d/%m/%y",
        Some(_) => "%d/%m/%Y",
        None => "%Y-%m-%d",
    };
    NaiveDate::parse_from_str(s, fmt).ok()
}

struct ColumnMap {
    required: [usize; 7],
    odds: Option<[usize; 3]>,
}

impl ColumnMap {
    fn resolve(headers: &csv::StringRecord, odds: &OddsColumns) -> Result<Self, DataError> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}').trim() == name)
        };
        let mut required = [0; 7];
        for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = find(name).ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        }
        let odds = match (find(&odds.home), find(&odds.draw), find(&odds.away)) {
            (Some(h), Some(d), Some(a)) => Some([h, d, a]),
            _ => None,
        };
        Ok(Self { required, odds })
    }

    fn record(&self, row: &csv::StringRecord) -> Option<MatchRecord> {
        let field = |i: usize| row.get(self.required[i]).map(str::trim);
        let count = |i: usize| field(i)?.parse::<u32>().ok();
        let team = |i: usize| field(i).filter(|s| !s.is_empty()).map(str::to_string);
        let odds = self.odds.and_then(|[h, d, a]| {
            let price = |i: usize| row.get(i)?.trim().parse::<f64>().ok();
            OddsTriple::new(price(h)?, price(d)?, price(a)?)
        });
        Some(MatchRecord {
            date: parse_date(field(0)?)?,
            home_team: team(1)?,
            away_team: team(2)?,
            home_goals: count(3)?,
            away_goals: count(4)?,
            home_shots: count(5)?,
            away_shots: count(6)?,
            odds,
        })
    }
}

/// Parses a CSV match file. Rows with an unusable required field are skipped
/// and counted in [`Dataset::skipped_rows`]; the result is sorted by date.
pub fn parse_csv<R: Read>(source: R, odds_columns: &OddsColumns) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(DataError::Empty);
    }
    let columns = ColumnMap::resolve(&headers, odds_columns)?;

    let mut records = Vec::new();
    let mut skipped = 0;
    for row in reader.records() {
        let row = row?;
        if row.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        match columns.record(&row) {
            Some(rec) => records.push(rec),
            None => skipped += 1,
        }
    }
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    let mut data = Dataset::from_records(records);
    data.skipped_rows = skipped;
    Ok(data)
}

/// Writes `data` with the same column names [`parse_csv`] reads. Dates are
/// written in ISO form; missing odds are left blank.
pub fn write_csv<W: Write>(
    data: &Dataset,
    sink: W,
    odds_columns: &OddsColumns,
) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend([
        odds_columns.home.as_str(),
        odds_columns.draw.as_str(),
        odds_columns.away.as_str(),
    ]);
    writer.write_record(&header)?;
    for r in &data.records {
        let odds = r
            .odds
            .map(|o| o.as_array().map(|p| p.to_string()))
            .unwrap_or_default();
        writer.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.home_team.clone(),
            r.away_team.clone(),
            r.home_goals.to_string(),
            r.away_goals.to_string(),
            r.home_shots.to_string(),
            r.away_shots.to_string(),
            odds[0].clone(),
            odds[1].clone(),
            odds[2].clone(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Splits off the final `tail_n` records as the holdout set.
pub fn chronological_split(data: &Dataset, tail_n: usize) -> Result<(Dataset, Dataset), DataError> {
    if tail_n == 0 {
        return Err(DataError::ZeroHoldout);
    }
    if tail_n >= data.len() {
        return Err(DataError::SplitTooLarge {
            tail_n,
            len: data.len(),
        });
    }
    let cut = data.len() - tail_n;
    let part = |records: &[MatchRecord]| Dataset {
        records: records.to_vec(),
        skipped_rows: 0,
    };
    Ok((part(&data.records[..cut]), part(&data.records[cut..])))
}

/// Per-side regression targets for one match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotTargets {
    pub shots: u32,
    /// Goals per shot, clamped to [0, 1].
    pub quality: f64,
    /// False when the side took no shots; such rows carry no quality label.
    pub quality_usable: bool,
}

pub fn derive_targets(rec: &MatchRecord, side: Side) -> ShotTargets {
    let shots = rec.shots(side);
    if shots == 0 {
        return ShotTargets {
            shots: 0,
            quality: 0.0,
            quality_usable: false,
        };
    }
    // goals > shots shows up in real files (own goals); clamp rather than drop
    let quality = (f64::from(rec.goals(side)) / f64::from(shots)).clamp(0.0, 1.0);
    ShotTargets {
        shots,
        quality,
        quality_usable: true,
    }
}
