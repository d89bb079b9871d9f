//! Frontier and recommendation properties, fixture replay.

use memforecast::fixture::{fixture_grid, load_fixture};
use memforecast::forecast::{equi_compute_frontier, recommend, GridRow, Recommendation};
use memforecast::report::{frontier_csv, grid_csv};
use memforecast::{CheckpointRef, Flops};
use proptest::prelude::*;

fn row(i: usize, params: u64, cost: u128, recall: Option<f64>) -> GridRow<f64> {
    GridRow {
        model: format!("m{i}"),
        params,
        checkpoint: "c".into(),
        sequences_seen: 1,
        tokens_per_sequence: 1,
        cost: Flops(cost),
        cost_fraction: 0.0,
        precision: Some(0.9),
        recall,
    }
}

fn rows_strategy() -> impl Strategy<Value = Vec<GridRow<f64>>> {
    prop::collection::vec(
        (1u64..5, 1u128..1000, prop::option::weighted(0.9, 0u32..20)),
        1..25,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (p, c, r))| row(i, p, c, r.map(|x| f64::from(x) / 20.0)))
            .collect()
    })
}

/// Exhaustive scan: maximum recall, then minimum cost, then minimum params.
fn oracle(rows: &[GridRow<f64>], budget: Flops) -> Option<(u64, u128, u64)> {
    rows.iter()
        .filter(|r| r.cost <= budget && r.recall.is_some())
        .map(|r| {
            (
                (r.recall.unwrap() * 1e6) as u64,
                u128::MAX - r.cost.0,
                u64::MAX - r.params,
            )
        })
        .max()
        .map(|(r, c, p)| (r, u128::MAX - c, u64::MAX - p))
}

proptest! {
    #[test]
    fn frontier_matches_exhaustive_search(rows in rows_strategy(), budgets in prop::collection::vec(0u128..1200, 1..10)) {
        let budgets: Vec<Flops> = budgets.into_iter().map(Flops).collect();
        let f = equi_compute_frontier(&rows, &budgets).unwrap();
        let mut prev_budget = None;
        let mut prev_recall = None;
        for e in &f.entries {
            prop_assert!(prev_budget.is_none_or(|b| b < e.budget));
            prev_budget = Some(e.budget);
            let got = e.choice.as_ref().map(|r| ((r.recall.unwrap() * 1e6) as u64, r.cost.0, r.params));
            prop_assert_eq!(got, oracle(&rows, e.budget));
            if let Some(r) = &e.choice {
                prop_assert!(prev_recall.is_none_or(|p| p <= r.recall.unwrap()));
                prev_recall = r.recall;
            }
        }
    }

    #[test]
    fn common_rescaling_preserves_choices(rows in rows_strategy(), budgets in prop::collection::vec(0u128..1200, 1..10), k in 1u128..1_000_000) {
        let scaled: Vec<GridRow<f64>> = rows.iter().cloned().map(|mut r| { r.cost = Flops(r.cost.0 * k); r }).collect();
        let b1: Vec<Flops> = budgets.iter().copied().map(Flops).collect();
        let b2: Vec<Flops> = budgets.iter().map(|&b| Flops(b * k)).collect();
        let f1 = equi_compute_frontier(&rows, &b1).unwrap();
        let f2 = equi_compute_frontier(&scaled, &b2).unwrap();
        let names = |f: &memforecast::forecast::Frontier<f64>| f.entries.iter().map(|e| e.choice.as_ref().map(|r| r.model.clone())).collect::<Vec<_>>();
        prop_assert_eq!(names(&f1), names(&f2));
    }

    #[test]
    fn zero_min_recall_is_feasible_when_affordable(rows in rows_strategy(), budget in 0u128..1200) {
        let rec = recommend(Flops(budget), &rows, Some(0.0));
        let affordable = rows.iter().any(|r| r.cost.0 <= budget && r.recall.is_some());
        prop_assert_eq!(rec.is_feasible(), affordable);
    }
}

#[test]
fn fixture_grid_replays_checked_in_csv() {
    let rows = load_fixture("pythia").unwrap();
    let cases = [
        (
            "12B@final",
            include_str!("../fixtures/expected/grid_pythia_12b.csv"),
        ),
        (
            "6.9B@final",
            include_str!("../fixtures/expected/grid_pythia_6.9b.csv"),
        ),
    ];
    for (target, expected) in cases {
        let g = fixture_grid::<f64>(&rows, &target.parse().unwrap(), 32).unwrap();
        assert_eq!(grid_csv(&g).unwrap(), expected, "{target}");
    }
    let g = fixture_grid::<f64>(&rows, &"12B".parse().unwrap(), 32).unwrap();
    let budgets: Vec<Flops> = g.rows.iter().map(|r| r.cost).collect();
    let f = equi_compute_frontier(&g.rows, &budgets).unwrap();
    assert_eq!(
        frontier_csv(&f).unwrap(),
        include_str!("../fixtures/expected/frontier_pythia_12b.csv")
    );

    let dedup = load_fixture("pythia-deduped").unwrap();
    let g = fixture_grid::<f64>(&dedup, &"12B-deduped".parse().unwrap(), 32).unwrap();
    assert_eq!(
        grid_csv(&g).unwrap(),
        include_str!("../fixtures/expected/grid_pythia_deduped_12b.csv")
    );
    let n64 = load_fixture("pythia-n64").unwrap();
    let g = fixture_grid::<f64>(&n64, &"12B".parse().unwrap(), 64).unwrap();
    assert_eq!(
        grid_csv(&g).unwrap(),
        include_str!("../fixtures/expected/grid_pythia_n64_12b.csv")
    );
}

/// Precision and recall cells of the grid CSV equal the fixture's cells.
#[test]
fn fixture_cells_are_verbatim() {
    for (name, text) in [
        ("pythia", memforecast::fixture::PYTHIA_PREC_RECALL),
        ("pythia", memforecast::fixture::PYTHIA_PREC_RECALL_TIME),
        (
            "pythia-deduped",
            memforecast::fixture::PYTHIA_DEDUPED_PREC_RECALL,
        ),
        (
            "pythia-deduped",
            memforecast::fixture::PYTHIA_DEDUPED_PREC_RECALL_TIME,
        ),
    ] {
        let rows = load_fixture(name).unwrap();
        let mut want: Vec<(String, String, String)> = Vec::new();
        let mut targets = Vec::new();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if !f[7].is_empty() {
                want.push((format!("{}@{}", f[2], f[5]), f[7].into(), f[8].into()));
            }
            if !targets.contains(&f[0].to_string()) {
                targets.push(f[0].to_string());
            }
        }
        let mut got = Vec::new();
        for t in &targets {
            let g = fixture_grid::<f64>(&rows, &t.parse().unwrap(), 32).unwrap();
            for line in grid_csv(&g).unwrap().lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                got.push((
                    format!("{}@{}", f[2], f[5]),
                    f[7].to_string(),
                    f[8].to_string(),
                ));
            }
        }
        for w in &want {
            assert!(got.contains(w), "{name}: {w:?} missing");
        }
    }
}

#[test]
fn fixture_frontier_and_recommendation() {
    let rows = load_fixture("pythia").unwrap();
    let g = fixture_grid::<f64>(&rows, &"12B".parse().unwrap(), 32).unwrap();
    let fully_trained: Vec<&GridRow<f64>> =
        g.rows.iter().filter(|r| r.checkpoint == "146M").collect();
    let budget = fully_trained.iter().map(|r| r.cost).max().unwrap();
    let f = equi_compute_frontier(&g.rows, &[budget]).unwrap();
    let choice = f.entries[0].choice.as_ref().unwrap();
    assert_eq!(choice.reference(), CheckpointRef::new("6.9B", "146M"));
    assert_eq!(choice.recall, Some(0.795));

    match recommend(budget, &g.rows, Some(0.9)) {
        Recommendation::Infeasible {
            suggested: Some(r),
            smallest_sufficient_budget: Some(b),
            ..
        } => {
            assert_eq!(r.reference(), CheckpointRef::new("12B", "126M"));
            assert_eq!(r.recall, Some(0.916));
            assert_eq!(b, Flops(6 * 12_000_000_000 * 126_000_000 * 2048));
        }
        other => panic!("{other:?}"),
    }
    assert!(!recommend(Flops(0), &g.rows, None).is_feasible());
}
