use chrono::NaiveDate;
use proptest::prelude::*;

use shotcast::elo::{expected_score, run_history, update, EloParams};
use shotcast::evaluation::{
    adjust_draw, backtest, rps, BacktestConfig, MatchResult, OutcomeProbs, Strategy as Staking,
};
use shotcast::match_data::{
    chronological_split, derive_targets, parse_csv, write_csv, Dataset, MatchRecord, OddsColumns,
    OddsTriple, Side,
};
use shotcast::models::{
    DistributionForecaster, Estimator, FeatureRow, LinearModel, NeighborModel, TargetKind,
};
use shotcast::simulator::{aggregate, SimulationResult};

const TEAMS: [&str; 6] = ["Ajax", "Benfica", "Celtic", "Dynamo", "Everton", "Fulham"];

fn arb_record() -> impl Strategy<Value = MatchRecord> {
    (
        0u32..2000,
        0usize..TEAMS.len(),
        1usize..TEAMS.len(),
        (0u32..8, 0u32..8, 0u32..30, 0u32..30),
        proptest::option::of((1.01f64..20.0, 1.01f64..20.0, 1.01f64..20.0)),
    )
        .prop_map(|(day, h, offset, (hg, ag, hs, as_), odds)| MatchRecord {
            date: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Days::new(day.into()),
            home_team: TEAMS[h].to_string(),
            away_team: TEAMS[(h + offset) % TEAMS.len()].to_string(),
            home_goals: hg,
            away_goals: ag,
            home_shots: hs,
            away_shots: as_,
            odds: odds.and_then(|(a, b, c)| OddsTriple::new(a, b, c)),
        })
}

fn arb_probs() -> impl Strategy<Value = OutcomeProbs> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("non-zero mass", |(a, b, c)| a + b + c > 1e-6)
        .prop_map(|(a, b, c)| {
            let s = a + b + c;
            OutcomeProbs { home: a / s, draw: b / s, away: c / s }
        })
}

fn arb_result() -> impl Strategy<Value = MatchResult> {
    prop_oneof![Just(MatchResult::Home), Just(MatchResult::Draw), Just(MatchResult::Away)]
}

proptest! {
    #[test]
    fn csv_round_trip(records in prop::collection::vec(arb_record(), 1..40)) {
        let data = Dataset::from_records(records);
        let mut buf = Vec::new();
        write_csv(&data, &mut buf, &OddsColumns::default()).unwrap();
        let back = parse_csv(buf.as_slice(), &OddsColumns::default()).unwrap();
        prop_assert_eq!(back.records, data.records);
    }

    #[test]
    fn split_is_a_partition(records in prop::collection::vec(arb_record(), 2..60), cut in 1usize..60) {
        let data = Dataset::from_records(records);
        let tail = cut.min(data.len() - 1);
        let (train, holdout) = chronological_split(&data, tail).unwrap();
        prop_assert_eq!(train.len() + holdout.len(), data.len());
        prop_assert_eq!(holdout.len(), tail);
        let joined: Vec<_> = train.records.iter().chain(&holdout.records).cloned().collect();
        prop_assert_eq!(joined, data.records);
    }

    #[test]
    fn quality_target_in_unit_interval(rec in arb_record()) {
        for side in Side::BOTH {
            let t = derive_targets(&rec, side);
            prop_assert!((0.0..=1.0).contains(&t.quality));
            prop_assert_eq!(t.quality_usable, rec.shots(side) > 0);
        }
    }

    #[test]
    fn expected_score_is_complementary_and_monotone(
        ri in 0.0f64..2000.0, rj in 0.0f64..2000.0, bump in 0.01f64..200.0
    ) {
        let p = EloParams::default();
        let e = expected_score(ri, rj, &p);
        prop_assert!(e > 0.0 && e < 1.0);
        prop_assert!((e + expected_score(rj, ri, &p) - 1.0).abs() < 1e-12);
        prop_assert!(expected_score(ri + bump, rj, &p) > e);
    }

    #[test]
    fn update_is_zero_sum(ri in 0.0f64..2000.0, rj in 0.0f64..2000.0, o in prop::sample::select(vec![0.0, 0.5, 1.0])) {
        let (ni, nj) = update(ri, rj, o, &EloParams::default()).unwrap();
        prop_assert!(((ni - ri) + (nj - rj)).abs() < 1e-9);
    }

    #[test]
    fn replay_is_pure(records in prop::collection::vec(arb_record(), 0..50)) {
        let data = Dataset::from_records(records);
        let p = EloParams::default();
        prop_assert_eq!(run_history(&data, &p), run_history(&data, &p));
    }

    #[test]
    fn timeline_entries_chain(records in prop::collection::vec(arb_record(), 1..80)) {
        let data = Dataset::from_records(records);
        let t = run_history(&data, &EloParams::default());
        for team in t.teams() {
            let h = t.history(team).unwrap();
            prop_assert_eq!(h[0].pre_rating, 500.0);
            for w in h.windows(2) {
                prop_assert_eq!(w[0].post_rating, w[1].pre_rating);
            }
        }
    }

    #[test]
    fn forecast_respects_clamps(
        m in -1e6f64..1e6, s in -1e6f64..1e6, ch in -10.0f64..10.0, ca in -10.0f64..10.0,
        h in 0.0f64..2000.0, a in 0.0f64..2000.0
    ) {
        let lin = |intercept| LinearModel { intercept, coef_home: ch, coef_away: ca };
        for target in TargetKind::BOTH {
            let fc = DistributionForecaster::new(
                Side::Home,
                target,
                Estimator::TwoStage { mean: lin(m), spread: lin(s), spread_scale: 1.25 },
            );
            let out = fc.forecast(FeatureRow::new(h, a));
            prop_assert!(out.std >= 0.0);
            prop_assert!(out.mean >= 0.0);
            if target == TargetKind::Quality {
                prop_assert!(out.mean <= 1.0);
            }
        }
    }

    #[test]
    fn knn_forecast_respects_clamps(
        targets in prop::collection::vec(-5.0f64..5.0, 5..20), qh in 300.0f64..700.0, qa in 300.0f64..700.0
    ) {
        let n = targets.len();
        let x: Vec<_> = (0..n).map(|i| FeatureRow::new(400.0 + 13.0 * i as f64, 600.0 - 7.0 * (i % 5) as f64)).collect();
        let knn = NeighborModel::fit(&x, &targets, 3).unwrap();
        let fc = DistributionForecaster::new(Side::Away, TargetKind::Quality, Estimator::Neighbors(knn));
        let out = fc.forecast(FeatureRow::new(qh, qa));
        prop_assert!((0.0..=1.0).contains(&out.mean) && out.std >= 0.0);
    }

    #[test]
    fn aggregate_frequencies_sum_to_one(scores in prop::collection::vec((0u32..6, 0u32..6), 1..300)) {
        let res = SimulationResult {
            home_goals: scores.iter().map(|s| s.0).collect(),
            away_goals: scores.iter().map(|s| s.1).collect(),
        };
        let m = aggregate(&res).unwrap();
        prop_assert!((m.p_home + m.p_draw + m.p_away - 1.0).abs() <= 1e-12);
        prop_assert_eq!(m.score_counts.values().sum::<usize>(), scores.len());
        let total: f64 = m.score_distribution.values().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(m.point_scores.mode.0 <= 5 && m.point_scores.mode.1 <= 5);
    }

    #[test]
    fn rps_bounds_and_zero_iff_certain(p in arb_probs(), actual in arb_result()) {
        let r = rps(&p, actual);
        prop_assert!((0.0..=1.0).contains(&r));
        if r == 0.0 {
            prop_assert!((p.get(actual) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rps_prefers_near_misses(p in 0.0001f64..=1.0) {
        let f = OutcomeProbs { home: p, draw: 1.0 - p, away: 0.0 };
        prop_assert!(rps(&f, MatchResult::Draw) < rps(&f, MatchResult::Away));
    }

    #[test]
    fn adjust_draw_normalises_and_keeps_home_away_ratio(p in arb_probs(), m in 0.05f64..5.0) {
        let q = adjust_draw(&p, m);
        prop_assert!((q.home + q.draw + q.away - 1.0).abs() <= 1e-12);
        if p.away > 1e-9 && q.away > 1e-12 {
            prop_assert!((q.home / q.away - p.home / p.away).abs() <= 1e-9 * (1.0 + p.home / p.away));
        }
    }

    #[test]
    fn backtest_is_reproducible(
        fixtures in prop::collection::vec((arb_probs(), (1.05f64..15.0, 1.05f64..15.0, 1.05f64..15.0), arb_result()), 1..40)
    ) {
        let probs: Vec<_> = fixtures.iter().map(|f| f.0).collect();
        let odds: Vec<_> = fixtures.iter().map(|f| OddsTriple::new(f.1.0, f.1.1, f.1.2)).collect();
        let results: Vec<_> = fixtures.iter().map(|f| f.2).collect();
        for s in [Staking::Flat, Staking::Proportional] {
            let cfg = BacktestConfig::new(s);
            let a = backtest(&probs, &odds, &results, &cfg).unwrap();
            prop_assert_eq!(&a, &backtest(&probs, &odds, &results, &cfg).unwrap());
            let returned: f64 = a.bets.iter().filter(|b| b.won).map(|b| b.stake * b.odds).sum();
            prop_assert!((a.returned - returned).abs() < 1e-9);
            if a.bets.iter().all(|b| !b.won) && !a.bets.is_empty() {
                prop_assert_eq!(a.rentability(), Some(-1.0));
            }
        }
    }
}

#[test]
fn round_robin_dominator_ends_on_top() {
    let teams = ["A", "B", "C", "D", "E"];
    let mut records = Vec::new();
    let mut day = 0u64;
    for _ in 0..4 {
        for (i, h) in teams.iter().enumerate() {
            for (j, a) in teams.iter().enumerate() {
                if i == j {
                    continue;
                }
                // A wins everything; other results alternate
                let (hg, ag) = match (*h, *a) {
                    ("A", _) => (2, 0),
                    (_, "A") => (0, 1),
                    _ if (i + j + day as usize).is_multiple_of(3) => (1, 1),
                    _ if (i + j) % 2 == 0 => (1, 0),
                    _ => (0, 2),
                };
                records.push(MatchRecord {
                    date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(day),
                    home_team: h.to_string(),
                    away_team: a.to_string(),
                    home_goals: hg,
                    away_goals: ag,
                    home_shots: 10,
                    away_shots: 10,
                    odds: None,
                });
                day += 1;
            }
        }
    }
    let t = run_history(&Dataset::from_records(records), &EloParams::default());
    let ratings = t.current_ratings();
    let top = ratings["A"];
    assert!(ratings.iter().filter(|(k, _)| k.as_str() != "A").all(|(_, &r)| r < top));
}
