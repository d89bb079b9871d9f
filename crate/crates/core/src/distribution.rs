//! Shape of the memorization-score distribution: exact histogram over the
//! `N + 1` attainable scores, the mass at score 1, and a thin- versus
//! thick-tail comparison on the bins below it.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ScoreParams;
use crate::scalar::Scalar;
use crate::scorer::{memorization_score, MatchRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreHistogram {
    pub threshold: u8,
    /// `counts[k]` = number of records scoring exactly `k / threshold`.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl ScoreHistogram {
    pub fn new(threshold: u8) -> Self {
        ScoreHistogram {
            threshold,
            counts: vec![0; usize::from(threshold) + 1],
            total: 0,
        }
    }

    pub fn add(&mut self, matched: u8) {
        self.counts[usize::from(matched)] += 1;
        self.total += 1;
    }

    /// Bin-wise sum; histograms at different thresholds cannot be merged.
    pub fn merge(&mut self, other: &ScoreHistogram) -> Result<()> {
        if other.threshold != self.threshold {
            return Err(Error::param(format!(
                "cannot merge histograms at N = {} and N = {}",
                self.threshold, other.threshold
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }
}

pub fn histogram<I>(records: I, params: &ScoreParams) -> Result<ScoreHistogram>
where
    I: IntoIterator<Item = Result<MatchRecord>>,
{
    params.check()?;
    let mut h = ScoreHistogram::new(params.cont_len);
    for rec in records {
        h.add(memorization_score(&rec?, params)?.matched);
    }
    Ok(h)
}

pub fn spike_mass_exact(h: &ScoreHistogram) -> Result<Ratio<u64>> {
    if h.total == 0 {
        return Err(Error::param("spike mass of an empty histogram"));
    }
    Ok(Ratio::new(h.counts[usize::from(h.threshold)], h.total))
}

pub fn spike_mass<T: Scalar>(h: &ScoreHistogram) -> Result<T> {
    spike_mass_exact(h).map(T::from_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailForm {
    Exponential,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFitReport<T> {
    pub threshold: u8,
    /// First bin of the tail; the tail is bins `tail_min..threshold`.
    pub tail_min: u8,
    pub tail_count: u64,
    pub spike_mass: T,
    /// Decay rate `λ` of `P(j) ∝ exp(-λ j)` over tail offsets `j`.
    pub exp_rate: T,
    /// Exponent `s` of `P(j) ∝ (j + 1)^(-s)`.
    pub pl_exponent: T,
    pub loglik_exp: T,
    pub loglik_pl: T,
    /// Larger log-likelihood; exponential on an exact tie.
    pub preferred: TailForm,
}

/// Default tail start: score 0.5.
pub fn default_tail_min(threshold: u8) -> u8 {
    threshold / 2
}

/// Minimum number of non-empty tail bins for a fit.
pub const MIN_TAIL_BINS: usize = 2;

/// Discrete maximum-likelihood fits of a truncated geometric and a truncated
/// Zipf law to the tail bins `tail_min..N`, excluding the score-1 spike.
pub fn tail_fit<T: Scalar>(h: &ScoreHistogram, tail_min: u8) -> Result<TailFitReport<T>> {
    let n = h.threshold;
    if tail_min >= n {
        return Err(Error::param(format!(
            "tail_min bin {tail_min} leaves no tail below the spike bin {n}"
        )));
    }
    let counts = &h.counts[usize::from(tail_min)..usize::from(n)];
    let nonempty = counts.iter().filter(|&&c| c > 0).count();
    if nonempty < MIN_TAIL_BINS {
        let empty: Vec<String> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(j, _)| (usize::from(tail_min) + j).to_string())
            .collect();
        return Err(Error::param(format!(
            "tail bins {tail_min}..{n} have {nonempty} non-empty bins, need {MIN_TAIL_BINS}; empty bins: [{}]",
            empty.join(", ")
        )));
    }
    let offsets: Vec<T> = (0..counts.len()).map(|j| T::from_count(j as u64)).collect();
    let logs: Vec<T> = (0..counts.len())
        .map(|j| T::from_count(j as u64 + 1).ln())
        .collect();
    let (exp_rate, loglik_exp) = fit_family(&offsets, counts);
    let (pl_exponent, loglik_pl) = fit_family(&logs, counts);
    Ok(TailFitReport {
        threshold: n,
        tail_min,
        tail_count: counts.iter().sum(),
        spike_mass: spike_mass(h)?,
        exp_rate,
        pl_exponent,
        loglik_exp,
        loglik_pl,
        preferred: if loglik_pl > loglik_exp {
            TailForm::PowerLaw
        } else {
            TailForm::Exponential
        },
    })
}

/// `ln Σ_j exp(-θ t_j)`.
fn log_partition<T: Scalar>(theta: T, stat: &[T]) -> T {
    let m = stat
        .iter()
        .map(|&t| -theta * t)
        .fold(T::neg_infinity(), T::max);
    m + stat.iter().map(|&t| (-theta * t - m).exp()).sum::<T>().ln()
}

/// Model mean of the statistic under `P(j) ∝ exp(-θ t_j)`.
fn model_mean<T: Scalar>(theta: T, stat: &[T]) -> T {
    let lz = log_partition(theta, stat);
    stat.iter().map(|&t| t * (-theta * t - lz).exp()).sum()
}

/// MLE of `θ` for the one-parameter family `P(j) ∝ exp(-θ t_j)` with
/// non-decreasing `t`, and the resulting log-likelihood. The likelihood is
/// concave in `θ`, and the score equation `E_θ[t] = mean(t)` is monotone
/// decreasing in `θ`, so bisection finds the unique root.
fn fit_family<T: Scalar>(stat: &[T], counts: &[u64]) -> (T, T) {
    let total = T::from_count(counts.iter().sum());
    let mean = stat
        .iter()
        .zip(counts)
        .map(|(&t, &c)| t * T::from_count(c))
        .sum::<T>()
        / total;

    let mut lo = -T::one();
    let mut hi = T::one();
    let limit = T::lit(512.0);
    while model_mean(lo, stat) < mean && lo > -limit {
        lo = lo + lo;
    }
    while model_mean(hi, stat) > mean && hi < limit {
        hi = hi + hi;
    }
    for _ in 0..400 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if model_mean(mid, stat) > mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = (lo + hi) / T::lit(2.0);
    let lz = log_partition(theta, stat);
    let loglik = stat
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&t, &c)| T::from_count(c) * (-theta * t - lz).min(T::zero()))
        .sum();
    (theta, loglik)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(counts: Vec<u64>) -> ScoreHistogram {
        ScoreHistogram {
            threshold: (counts.len() - 1) as u8,
            total: counts.iter().sum(),
            counts,
        }
    }

    #[test]
    fn spike_mass_extremes() {
        assert_eq!(spike_mass::<f64>(&hist(vec![0, 0, 5])).unwrap(), 1.0);
        assert_eq!(spike_mass::<f64>(&hist(vec![3, 2, 0])).unwrap(), 0.0);
        assert!(spike_mass::<f64>(&hist(vec![0, 0, 0])).is_err());
    }

    #[test]
    fn all_full_records_land_in_top_bin() {
        let recs = (0..7u64).map(|i| MatchRecord::new(i, u64::MAX, 64));
        let h = histogram(recs, &ScoreParams::default()).unwrap();
        assert_eq!(h.counts[32], 7);
        assert_eq!(h.total, 7);
        assert_eq!(h.counts.len(), 33);
    }

    #[test]
    fn merge_is_binwise() {
        let mut a = hist(vec![1, 2, 3]);
        a.merge(&hist(vec![4, 0, 1])).unwrap();
        assert_eq!(a, hist(vec![5, 2, 4]));
        assert!(a.merge(&hist(vec![1, 1])).is_err());
    }

    #[test]
    fn exact_geometric_counts_recover_ratio() {
        // counts proportional to 0.5^j over 8 tail bins, then the spike
        let mut c: Vec<u64> = (0..8).map(|j| 1u64 << (20 - j)).collect();
        c.push(100);
        let r = tail_fit::<f64>(&hist(c), 0).unwrap();
        assert!((r.exp_rate - std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(r.preferred, TailForm::Exponential);
        assert!(r.loglik_exp <= 0.0 && r.loglik_pl <= 0.0);
    }

    #[test]
    fn uniform_two_bin_tail_is_deterministic() {
        let h = hist(vec![0, 0, 50, 50, 3]);
        let a = tail_fit::<f64>(&h, 2).unwrap();
        let b = tail_fit::<f64>(&h, 2).unwrap();
        assert_eq!(a, b);
        assert!(a.exp_rate.abs() < 1e-9);
        assert!(a.pl_exponent.abs() < 1e-9);
        assert!((a.loglik_exp - a.loglik_pl).abs() < 1e-6);
    }

    #[test]
    fn insufficient_tail_names_bins() {
        let err = tail_fit::<f64>(&hist(vec![9, 0, 4, 0, 1]), 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("empty bins: [1, 3]"), "{msg}");
        assert!(tail_fit::<f64>(&hist(vec![1, 1, 1]), 2).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let mut c: Vec<u64> = (0..8).map(|j| 1u64 << (20 - j)).collect();
        c.push(0);
        let r = tail_fit::<f32>(&hist(c), 0).unwrap();
        assert!((r.exp_rate - std::f32::consts::LN_2).abs() < 1e-4);
    }
}
