//! Treating one checkpoint's memorized set as a classifier for another's.
//!
//! All pairwise statistics are computed over the common support of the two
//! sets: ids below the smaller of the two universe bounds.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CheckpointRef, ScoreParams, Suite};
use crate::scalar::Scalar;
use crate::sets::MemorizedSet;
use crate::store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Confusion { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision_exact(&self) -> Option<Ratio<u64>> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall_exact(&self) -> Option<Ratio<u64>> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Roles swapped: the target becomes the predictor.
    pub fn transpose(&self) -> Self {
        Confusion::new(self.tp, self.fn_, self.fp, self.tn)
    }
}

fn ratio(num: u64, den: u64) -> Option<Ratio<u64>> {
    (den > 0).then(|| Ratio::new(num, den))
}

/// Largest id bound both sets have seen.
pub fn common_support(a: &MemorizedSet, b: &MemorizedSet) -> u64 {
    a.universe_bound().min(b.universe_bound())
}

fn same_threshold(a: &MemorizedSet, b: &MemorizedSet) -> Result<()> {
    if a.threshold() != b.threshold() {
        return Err(Error::param(format!(
            "cannot compare sets at different thresholds (N = {} for {}, N = {} for {})",
            a.threshold(),
            a.label(),
            b.threshold(),
            b.label()
        )));
    }
    Ok(())
}

pub fn confusion(predictor: &MemorizedSet, target: &MemorizedSet) -> Result<Confusion> {
    same_threshold(predictor, target)?;
    let bound = common_support(predictor, target);
    let p = predictor.ids().count_below(bound);
    let t = target.ids().count_below(bound);
    let tp = predictor
        .ids()
        .intersection_count_below(target.ids(), bound);
    Ok(Confusion {
        tp,
        fp: p - tp,
        fn_: t - tp,
        tn: bound - (p + t - tp),
    })
}

/// `(precision, recall)`; `None` where the denominator is zero.
pub fn precision_recall<T: Scalar>(c: &Confusion) -> (Option<T>, Option<T>) {
    (
        c.precision_exact().map(T::from_ratio),
        c.recall_exact().map(T::from_ratio),
    )
}

/// Phi coefficient of the two membership indicators over the common support.
/// `None` when either indicator is constant there.
pub fn phi_correlation<T: Scalar>(a: &MemorizedSet, b: &MemorizedSet) -> Result<Option<T>> {
    if common_support(a, b) == 0 {
        return Err(Error::param(format!(
            "empty common support between {} and {}",
            a.label(),
            b.label()
        )));
    }
    Ok(phi_from_confusion(&confusion(a, b)?))
}

pub fn phi_from_confusion<T: Scalar>(c: &Confusion) -> Option<T> {
    let (n11, n10, n01, n00) = (
        u128::from(c.tp),
        u128::from(c.fp),
        u128::from(c.fn_),
        u128::from(c.tn),
    );
    let num = (n11 * n00) as i128 - (n10 * n01) as i128;
    let row = (n11 + n10) * (n01 + n00);
    let col = (n11 + n01) * (n10 + n00);
    if row == 0 || col == 0 {
        return None;
    }
    let mag = T::from_wide(num.unsigned_abs()) / (T::from_wide(row) * T::from_wide(col)).sqrt();
    let v = if num < 0 { -mag } else { mag };
    Some(v.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix<T> {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<T>>>,
}

pub fn correlation_matrix<T: Scalar>(sets: &[MemorizedSet]) -> Result<CorrelationMatrix<T>> {
    if sets.len() < 2 {
        return Err(Error::param("correlation matrix needs at least two sets"));
    }
    let n = sets.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let cells: Vec<Option<T>> = pairs
        .par_iter()
        .map(|&(i, j)| phi_correlation(&sets[i], &sets[j]))
        .collect::<Result<_>>()?;
    let mut values = vec![vec![None; n]; n];
    for (&(i, j), v) in pairs.iter().zip(cells) {
        values[i][j] = v;
        values[j][i] = v;
    }
    Ok(CorrelationMatrix {
        labels: sets.iter().map(MemorizedSet::label).collect(),
        values,
    })
}

pub fn memorized_fraction_exact(s: &MemorizedSet) -> Result<Ratio<u64>> {
    if s.universe_bound() == 0 {
        return Err(Error::param(format!("{} has an empty universe", s.label())));
    }
    Ok(Ratio::new(s.len(), s.universe_bound()))
}

pub fn memorized_fraction<T: Scalar>(s: &MemorizedSet) -> Result<T> {
    memorized_fraction_exact(s).map(T::from_ratio)
}

/// Precision/recall report for one predictor against one target.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionReport<T> {
    pub predictor: String,
    pub target: String,
    pub threshold: u8,
    pub common_support: u64,
    pub confusion: Confusion,
    pub precision: Option<T>,
    pub recall: Option<T>,
    pub phi: Option<T>,
}

pub fn predict<T: Scalar>(
    predictor: &MemorizedSet,
    target: &MemorizedSet,
) -> Result<PredictionReport<T>> {
    let c = confusion(predictor, target)?;
    let (precision, recall) = precision_recall(&c);
    Ok(PredictionReport {
        predictor: predictor.label(),
        target: target.label(),
        threshold: target.threshold(),
        common_support: common_support(predictor, target),
        confusion: c,
        precision,
        recall,
        phi: phi_from_confusion(&c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionDelta<T> {
    pub label: String,
    pub fraction_a: T,
    pub fraction_b: T,
    pub delta: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteComparison<T> {
    pub rows: Vec<FractionDelta<T>>,
    /// Models present on only one side.
    pub unmatched: Vec<String>,
}

/// One model's entry for a suite comparison.
#[derive(Debug, Clone)]
pub struct ModelFraction {
    pub name: String,
    pub params: u64,
    pub set: MemorizedSet,
}

/// Pairs models by name, falling back to equal parameter count (so `12B`
/// matches `12B-deduped`), and reports `fraction_b - fraction_a`.
pub fn compare_fractions<T: Scalar>(
    a: &[ModelFraction],
    b: &[ModelFraction],
) -> Result<SuiteComparison<T>> {
    let mut used = vec![false; b.len()];
    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for ma in a {
        let hit = b
            .iter()
            .position(|mb| mb.name == ma.name)
            .or_else(|| {
                let same: Vec<usize> = (0..b.len()).filter(|&i| b[i].params == ma.params).collect();
                (same.len() == 1).then(|| same[0])
            })
            .filter(|&i| !used[i]);
        match hit {
            Some(i) => {
                used[i] = true;
                let fa = memorized_fraction::<T>(&ma.set)?;
                let fb = memorized_fraction::<T>(&b[i].set)?;
                rows.push(FractionDelta {
                    label: ma.name.clone(),
                    fraction_a: fa,
                    fraction_b: fb,
                    delta: fb - fa,
                });
            }
            None => unmatched.push(format!("{} (only in suite a)", ma.name)),
        }
    }
    for (mb, u) in b.iter().zip(&used) {
        if !u {
            unmatched.push(format!("{} (only in suite b)", mb.name));
        }
    }
    Ok(SuiteComparison { rows, unmatched })
}

fn final_fractions(suite: &Suite, params: &ScoreParams) -> Result<Vec<ModelFraction>> {
    suite
        .models
        .iter()
        .map(|m| {
            let set =
                store::load_memorized_set(suite, &CheckpointRef::new(&m.name, "final"), params)?;
            Ok(ModelFraction {
                name: m.name.clone(),
                params: m.params,
                set,
            })
        })
        .collect()
}

/// Memorized fraction of each fully-trained model in `a` versus its
/// counterpart in `b`.
pub fn compare_suites<T: Scalar>(
    a: &Suite,
    b: &Suite,
    params: &ScoreParams,
) -> Result<SuiteComparison<T>> {
    compare_fractions(&final_fractions(a, params)?, &final_fractions(b, params)?)
}
