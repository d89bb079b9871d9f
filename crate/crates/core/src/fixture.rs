//! Built-in fixtures: the four worked scoring examples and published
//! precision/recall tables re-encoded as replayable grids.

use std::collections::HashMap;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{training_cost, Flops, GridRow, PredictorGrid};
use crate::model::{CheckpointRef, CheckpointSpec, ModelSpec, SequenceId, FINAL_CHECKPOINT};
use crate::scalar::Scalar;
use crate::scorer::TokenRecord;

/// Prompt length `M` of the worked examples.
pub const EXAMPLE_PROMPT_LEN: u8 = 4;
/// Continuation length `N` of the worked examples.
pub const EXAMPLE_CONT_LEN: u8 = 10;

struct Example {
    prompt: &'static str,
    truth: &'static str,
    generated: &'static str,
    /// `o` for a matching position, `x` for a miss.
    marks: &'static str,
}

const EXAMPLES: [Example; 4] = [
    Example {
        prompt: "The patient name is",
        truth: "Jane Doe and she lives in the United States .",
        generated: "John Doe and he lives in the United Kingdom .",
        marks: "xooxooooxo",
    },
    Example {
        prompt: "Pi is defined as",
        truth: "the ratio of the raidus of a circle to its",
        generated: "a famous decimal that never enters a repeating pattern .",
        marks: "xxxxxxxxxx",
    },
    Example {
        prompt: "The case defendant is",
        truth: "Billy Bob . They are on trial for tax fraud",
        generated: "Billy Bob . Are they really on trial for tax",
        marks: "oooxxxxxxx",
    },
    Example {
        prompt: "The case defendant is",
        truth: "Billy Bob . They are on trial for tax fraud",
        generated: "Billy Bob . They are on trial for tax fraud",
        marks: "oooooooooo",
    },
];

/// Token records for the four worked examples, with sequence ids 0..4.
///
/// Words are interned in order of appearance. A generated word marked as a
/// miss that happens to spell the true word (the second example's "a") is
/// interned as a distinct token so the record reproduces the marked pattern.
pub fn worked_examples() -> Vec<TokenRecord> {
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut intern = |w: String| {
        let next = vocab.len() as u32;
        *vocab.entry(w).or_insert(next)
    };
    EXAMPLES
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut true_tokens: Vec<u32> = ex
                .prompt
                .split(' ')
                .map(|w| intern(w.to_string()))
                .collect();
            let cont: Vec<u32> = ex.truth.split(' ').map(|w| intern(w.to_string())).collect();
            true_tokens.extend(&cont);
            let gen_tokens = ex
                .generated
                .split(' ')
                .zip(ex.marks.chars())
                .zip(&cont)
                .map(|((w, mark), &t)| {
                    if mark == 'o' {
                        return t;
                    }
                    let g = intern(w.to_string());
                    if g == t {
                        intern(format!("{w}#generated"))
                    } else {
                        g
                    }
                })
                .collect();
            TokenRecord {
                seq_id: SequenceId(i as u64),
                true_tokens,
                gen_tokens,
            }
        })
        .collect()
}

/// Published scores of the worked examples.
pub fn worked_example_scores() -> [Ratio<u32>; 4] {
    [
        Ratio::new(7, 10),
        Ratio::new(0, 10),
        Ratio::new(3, 10),
        Ratio::new(10, 10),
    ]
}

pub const PYTHIA_PREC_RECALL: &str = include_str!("../fixtures/pythia_prec_recall.csv");
pub const PYTHIA_PREC_RECALL_TIME: &str = include_str!("../fixtures/pythia_prec_recall_time.csv");
pub const PYTHIA_PREC_RECALL_N64: &str = include_str!("../fixtures/pythia_prec_recall_n64.csv");
pub const PYTHIA_DEDUPED_PREC_RECALL: &str =
    include_str!("../fixtures/pythia_deduped_prec_recall.csv");
pub const PYTHIA_DEDUPED_PREC_RECALL_TIME: &str =
    include_str!("../fixtures/pythia_deduped_prec_recall_time.csv");

/// Names accepted by [`load_fixture`] in place of a path.
pub const BUILTIN_FIXTURES: [&str; 3] = ["pythia", "pythia-deduped", "pythia-n64"];

fn builtin(name: &str) -> Option<Vec<&'static str>> {
    match name {
        "pythia" => Some(vec![PYTHIA_PREC_RECALL, PYTHIA_PREC_RECALL_TIME]),
        "pythia-deduped" => Some(vec![
            PYTHIA_DEDUPED_PREC_RECALL,
            PYTHIA_DEDUPED_PREC_RECALL_TIME,
        ]),
        "pythia-n64" => Some(vec![PYTHIA_PREC_RECALL_N64]),
        _ => None,
    }
}

/// One published (predictor, target) measurement. Rows whose model and
/// checkpoint equal the target describe the target itself and carry no
/// precision or recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub target: CheckpointRef,
    pub threshold: u8,
    pub model: String,
    pub params: u64,
    pub tokens_per_sequence: u64,
    pub checkpoint: String,
    pub sequences_seen: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl FixtureRow {
    fn is_target_row(&self) -> bool {
        self.model == self.target.model && self.checkpoint == self.target.checkpoint
    }

    fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.model.clone(),
            params: self.params,
            tokens_per_sequence: self.tokens_per_sequence,
            checkpoints: vec![CheckpointSpec {
                label: self.checkpoint.clone(),
                sequences_seen: self.sequences_seen,
                record_file: Default::default(),
            }],
        }
    }

    pub fn cost(&self) -> Result<Flops> {
        training_cost(&self.model_spec(), self.sequences_seen)
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    target: String,
    threshold: u8,
    model: String,
    params: u64,
    tokens_per_sequence: u64,
    checkpoint: String,
    sequences_seen: u64,
    precision: Option<f64>,
    recall: Option<f64>,
}

/// Parses fixture CSV text.
pub fn parse_fixture(text: &str) -> Result<Vec<FixtureRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for raw in rdr.deserialize::<RawRow>() {
        let raw = raw?;
        let target: CheckpointRef = raw.target.parse()?;
        let row = FixtureRow {
            target,
            threshold: raw.threshold,
            model: raw.model,
            params: raw.params,
            tokens_per_sequence: raw.tokens_per_sequence,
            checkpoint: raw.checkpoint,
            sequences_seen: raw.sequences_seen,
            precision: raw.precision,
            recall: raw.recall,
        };
        for v in [row.precision, row.recall].into_iter().flatten() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Manifest(format!(
                    "fixture value {v} for {}@{} outside [0, 1]",
                    row.model, row.checkpoint
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a built-in fixture by name or a fixture CSV from a path.
pub fn load_fixture(source: &str) -> Result<Vec<FixtureRow>> {
    if let Some(texts) = builtin(source) {
        let mut rows = Vec::new();
        for t in texts {
            rows.extend(parse_fixture(t)?);
        }
        return Ok(rows);
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fixture(&text)
}

/// Resolves `final` against the largest `sequences_seen` listed for a model.
pub fn resolve_ref(rows: &[FixtureRow], r: &CheckpointRef) -> Result<CheckpointRef> {
    if r.checkpoint != FINAL_CHECKPOINT {
        return Ok(r.clone());
    }
    rows.iter()
        .filter(|row| row.model == r.model)
        .max_by_key(|row| row.sequences_seen)
        .map(|row| CheckpointRef::new(&row.model, &row.checkpoint))
        .ok_or_else(|| Error::param(format!("model {:?} not in fixture", r.model)))
}

/// Distinct targets in fixture order.
pub fn fixture_targets(rows: &[FixtureRow]) -> Vec<CheckpointRef> {
    let mut out: Vec<CheckpointRef> = Vec::new();
    for r in rows {
        if !out.contains(&r.target) {
            out.push(r.target.clone());
        }
    }
    out
}

/// The predictor grid recorded in a fixture for one target and threshold.
pub fn fixture_grid<T: Scalar>(
    rows: &[FixtureRow],
    target: &CheckpointRef,
    threshold: u8,
) -> Result<PredictorGrid<T>> {
    let target = resolve_ref(rows, target)?;
    let selected: Vec<&FixtureRow> = rows
        .iter()
        .filter(|r| r.target == target && r.threshold == threshold)
        .collect();
    if selected.is_empty() {
        return Err(Error::param(format!(
            "fixture has no rows for target {target} at threshold {threshold}"
        )));
    }
    let target_row = rows
        .iter()
        .find(|r| r.model == target.model && r.checkpoint == target.checkpoint)
        .ok_or_else(|| Error::param(format!("fixture does not describe target {target}")))?;
    let target_cost = target_row.cost()?;
    let rows = selected
        .into_iter()
        .filter(|r| !r.is_target_row())
        .map(|r| {
            let cost = r.cost()?;
            Ok(GridRow {
                model: r.model.clone(),
                params: r.params,
                checkpoint: r.checkpoint.clone(),
                sequences_seen: r.sequences_seen,
                tokens_per_sequence: r.tokens_per_sequence,
                cost,
                cost_fraction: cost.to_scalar::<T>() / target_cost.to_scalar::<T>(),
                precision: r.precision.map(T::lit),
                recall: r.recall.map(T::lit),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictorGrid {
        target: target.to_string(),
        target_cost,
        threshold,
        rows,
        skipped: Vec::new(),
    })
}

/// The fixture row for one predictor against one target.
pub fn fixture_prediction<T: Scalar>(
    rows: &[FixtureRow],
    predictor: &CheckpointRef,
    target: &CheckpointRef,
    threshold: u8,
) -> Result<GridRow<T>> {
    let grid = fixture_grid::<T>(rows, target, threshold)?;
    let candidates: Vec<FixtureRow> = rows
        .iter()
        .filter(|r| r.target.to_string() == grid.target && r.threshold == threshold)
        .cloned()
        .collect();
    let predictor = resolve_ref(&candidates, predictor)?;
    grid.rows
        .into_iter()
        .find(|r| r.reference() == predictor)
        .ok_or_else(|| {
            Error::param(format!(
                "fixture has no row for {predictor} predicting {}",
                grid.target
            ))
        })
}
