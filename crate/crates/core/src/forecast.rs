//! Compute-aware forecasting: training cost, precision/recall-versus-compute
//! grids against a fixed target, the equi-compute frontier and budgeted
//! recommendations.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::eval::{confusion, precision_recall};
use crate::model::{CheckpointRef, ModelSpec, ScoreParams, Suite};
use crate::scalar::Scalar;
use crate::store;

/// Floating-point operations per parameter per training token.
pub const FLOPS_PER_PARAM_TOKEN: u128 = 6;

/// Exact training compute in FLOPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Flops(pub u128);

impl Flops {
    pub fn to_scalar<T: Scalar>(self) -> T {
        T::from_wide(self.0)
    }
}

impl fmt::Display for Flops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Flops {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

/// Parses plain integers and decimal scientific notation (`1.2e21`) exactly;
/// any fractional FLOP remainder is truncated.
impl FromStr for Flops {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("not a FLOP count: {s:?}"));
        let s = s.trim();
        let (mant, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let scale = exp - frac.len() as i32;
        let mut v: u128 = 0;
        let keep = if scale < 0 {
            digits.len().saturating_sub(scale.unsigned_abs() as usize)
        } else {
            digits.len()
        };
        for d in digits[..keep].bytes() {
            v = v
                .checked_mul(10)
                .and_then(|x| x.checked_add(u128::from(d - b'0')))
                .ok_or_else(|| Error::Overflow(format!("{s} exceeds 128 bits")))?;
        }
        for _ in 0..scale.max(0) {
            v = v
                .checked_mul(10)
                .ok_or_else(|| Error::Overflow(format!("{s} exceeds 128 bits")))?;
        }
        Ok(Flops(v))
    }
}

/// `6 × params × (sequences_seen × tokens_per_sequence)` in exact integer arithmetic.
pub fn training_cost(model: &ModelSpec, sequences_seen: u64) -> Result<Flops> {
    if model.params == 0 || model.tokens_per_sequence == 0 || sequences_seen == 0 {
        return Err(Error::param(format!(
            "training cost needs positive inputs (params {}, tokens/sequence {}, sequences {})",
            model.params, model.tokens_per_sequence, sequences_seen
        )));
    }
    FLOPS_PER_PARAM_TOKEN
        .checked_mul(u128::from(model.params))
        .and_then(|x| x.checked_mul(u128::from(sequences_seen)))
        .and_then(|x| x.checked_mul(u128::from(model.tokens_per_sequence)))
        .map(Flops)
        .ok_or_else(|| {
            Error::Overflow(format!(
                "training cost of {} at {sequences_seen} sequences exceeds 128 bits",
                model.name
            ))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow<T> {
    pub model: String,
    pub params: u64,
    pub checkpoint: String,
    pub sequences_seen: u64,
    pub tokens_per_sequence: u64,
    pub cost: Flops,
    /// `cost` relative to the target's own training cost.
    pub cost_fraction: T,
    pub precision: Option<T>,
    pub recall: Option<T>,
}

impl<T> GridRow<T> {
    pub fn reference(&self) -> CheckpointRef {
        CheckpointRef::new(&self.model, &self.checkpoint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorGrid<T> {
    pub target: String,
    pub target_cost: Flops,
    pub threshold: u8,
    pub rows: Vec<GridRow<T>>,
    /// Rows that could not be computed, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// One row per (model, checkpoint) other than the target, with precision and
/// recall of its memorized set as a predictor of the target's.
pub fn predictor_grid<T: Scalar>(
    suite: &Suite,
    target: &CheckpointRef,
    params: &ScoreParams,
) -> Result<PredictorGrid<T>> {
    let (tmodel, tckpt) = suite.resolve(target)?;
    let target_cost = training_cost(tmodel, tckpt.sequences_seen)?;
    let target_set = store::load_memorized_set(suite, target, params)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (m, c) in suite.entries() {
        if m.name == tmodel.name && c.label == tckpt.label {
            continue;
        }
        let r = CheckpointRef::new(&m.name, &c.label);
        let row = store::load_memorized_set(suite, &r, params).and_then(|set| {
            let conf = confusion(&set, &target_set)?;
            let (precision, recall) = precision_recall::<T>(&conf);
            let cost = training_cost(m, c.sequences_seen)?;
            Ok(GridRow {
                model: m.name.clone(),
                params: m.params,
                checkpoint: c.label.clone(),
                sequences_seen: c.sequences_seen,
                tokens_per_sequence: m.tokens_per_sequence,
                cost,
                cost_fraction: cost.to_scalar::<T>() / target_cost.to_scalar::<T>(),
                precision,
                recall,
            })
        });
        match row {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("omitting {r} from grid: {e}");
                skipped.push((r.to_string(), e.to_string()));
            }
        }
    }
    Ok(PredictorGrid {
        target: CheckpointRef::new(&tmodel.name, &tckpt.label).to_string(),
        target_cost,
        threshold: params.cont_len,
        rows,
        skipped,
    })
}

/// Preference between two candidate rows: higher recall, then lower cost,
/// then fewer parameters.
fn better<T: Scalar>(a: &GridRow<T>, b: &GridRow<T>) -> bool {
    let (ra, rb) = (a.recall.unwrap(), b.recall.unwrap());
    match ra.partial_cmp(&rb) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => (a.cost, a.params) < (b.cost, b.params),
    }
}

fn best_within<T: Scalar>(rows: &[GridRow<T>], budget: Flops) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if r.cost > budget || r.recall.is_none_or(|x| x.is_nan()) {
            continue;
        }
        if best.is_none_or(|b| better(r, &rows[b])) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierEntry<T> {
    pub budget: Flops,
    /// `None` when no row with defined recall fits the budget.
    pub choice: Option<GridRow<T>>,
}

impl<T> FrontierEntry<T> {
    pub fn is_feasible(&self) -> bool {
        self.choice.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frontier<T> {
    pub entries: Vec<FrontierEntry<T>>,
}

/// For each budget, the affordable row with the highest recall. Budgets are
/// sorted and de-duplicated.
pub fn equi_compute_frontier<T: Scalar>(
    rows: &[GridRow<T>],
    budgets: &[Flops],
) -> Result<Frontier<T>> {
    if rows.is_empty() {
        return Err(Error::param("frontier of an empty grid"));
    }
    let mut budgets = budgets.to_vec();
    budgets.sort_unstable();
    budgets.dedup();
    let entries = budgets
        .into_iter()
        .map(|budget| FrontierEntry {
            budget,
            choice: best_within(rows, budget).map(|i| rows[i].clone()),
        })
        .collect();
    Ok(Frontier { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Recommendation<T> {
    Feasible {
        budget: Flops,
        row: GridRow<T>,
        recall: T,
    },
    Infeasible {
        budget: Flops,
        reason: String,
        /// Best row at the budget, if any row was affordable.
        best_affordable: Option<GridRow<T>>,
        /// Smallest frontier budget meeting `min_recall`, with its row.
        smallest_sufficient_budget: Option<Flops>,
        suggested: Option<GridRow<T>>,
    },
}

impl<T> Recommendation<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Recommendation::Feasible { .. })
    }
}

pub fn recommend<T: Scalar>(
    budget: Flops,
    rows: &[GridRow<T>],
    min_recall: Option<T>,
) -> Recommendation<T> {
    let best = best_within(rows, budget).map(|i| rows[i].clone());
    let target_met = |r: &GridRow<T>| min_recall.is_none_or(|m| r.recall.unwrap() >= m);
    if let Some(row) = best.as_ref().filter(|r| target_met(r)) {
        return Recommendation::Feasible {
            budget,
            recall: row.recall.unwrap(),
            row: row.clone(),
        };
    }

    // Smallest budget whose frontier choice meets the recall target is the
    // cheapest single row meeting it.
    let sufficient = min_recall.and_then(|m| {
        rows.iter()
            .filter(|r| r.recall.is_some_and(|x| x >= m))
            .map(|r| r.cost)
            .min()
    });
    let suggested = sufficient.and_then(|b| best_within(rows, b).map(|i| rows[i].clone()));
    let reason = match (&best, min_recall) {
        (None, _) => "no predictor fits the budget".to_string(),
        (Some(r), Some(m)) => format!(
            "best affordable recall {} is below the required {m}",
            r.recall.unwrap()
        ),
        (Some(_), None) => unreachable!(),
    };
    let reason = if min_recall.is_some() && sufficient.is_none() {
        format!("{reason}; no predictor in the grid achieves it")
    } else {
        reason
    };
    Recommendation::Infeasible {
        budget,
        reason,
        best_affordable: best,
        smallest_sufficient_budget: sufficient,
        suggested,
    }
}

/// Least-squares line in log10–log10 space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLogFit<T> {
    pub slope: T,
    pub intercept: T,
    /// `log10(y) - (intercept + slope·log10(x))` for each retained point.
    pub residuals: Vec<T>,
    pub max_abs_residual: T,
    /// Indices of input points dropped for non-positive values.
    pub dropped: Vec<usize>,
}

impl<T: Scalar> LogLogFit<T> {
    pub fn predict(&self, x: T) -> T {
        T::lit(10.0).powf(self.intercept + self.slope * x.log10())
    }
}

pub fn loglog_fit<T: Scalar>(points: &[(T, T)]) -> Result<LogLogFit<T>> {
    let mut dropped = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        if x > T::zero() && y > T::zero() && x.is_finite() && y.is_finite() {
            xs.push(x.log10());
            ys.push(y.log10());
        } else {
            log::warn!("dropping point {i} with non-positive value from log-log fit");
            dropped.push(i);
        }
    }
    if xs.len() < 2 {
        return Err(Error::param(format!(
            "log-log fit needs at least 2 positive points, got {}",
            xs.len()
        )));
    }
    let n = T::from_count(xs.len() as u64);
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    if sxx == T::zero() {
        return Err(Error::param(
            "log-log fit needs at least two distinct x values",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<T> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| y - (intercept + slope * x))
        .collect();
    let max_abs_residual = residuals.iter().fold(T::zero(), |m, r| m.max(r.abs()));
    Ok(LogLogFit {
        slope,
        intercept,
        residuals,
        max_abs_residual,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation<T> {
    pub cost: T,
    pub observed: T,
    pub extrapolated: T,
    /// `observed - extrapolated`, in metric units.
    pub deviation: T,
}

/// Deviation of each large-model point from the log-log extrapolation of the
/// small-model points.
pub fn emergence_deviation<T: Scalar>(
    small: &[(T, T)],
    large: &[(T, T)],
) -> Result<(LogLogFit<T>, Vec<Deviation<T>>)> {
    let fit = loglog_fit(small)?;
    let devs = large
        .iter()
        .map(|&(cost, observed)| {
            let extrapolated = fit.predict(cost);
            Deviation {
                cost,
                observed,
                extrapolated,
                deviation: observed - extrapolated,
            }
        })
        .collect();
    Ok((fit, devs))
}

/// `(cost, metric)` points of one model's rows, for curve fitting.
pub fn curve_points<T: Scalar>(
    rows: &[GridRow<T>],
    model: &str,
    metric: impl Fn(&GridRow<T>) -> Option<T>,
) -> Vec<(T, T)> {
    rows.iter()
        .filter(|r| r.model == model)
        .filter_map(|r| metric(r).map(|m| (r.cost.to_scalar(), m)))
        .collect()
}
