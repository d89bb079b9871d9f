//! Synthetic suites with planted ground truth.
//!
//! Match masks are planted directly. Every record is a pure function of
//! `(seed, model, checkpoint, sequence id)`, so files are reproducible byte
//! for byte and can be generated in any order or in parallel.
//!
//! Memorization of sequence `i` at checkpoint `c` of model `m` is
//! `latent(m, c, i) < rate_m · seen_c / seen_final(m)`, restricted to
//! `i < seen_c`. In nested mode every checkpoint uses one shared latent per
//! sequence, so memorized sets grow monotonically across checkpoints (and
//! across models ordered by rate). In overlap mode each (model, checkpoint)
//! uses the shared latent with probability `rho` and a private one otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{histogram, tail_fit, TailForm};
use crate::error::{Error, Result};
use crate::eval::{confusion, phi_from_confusion};
use crate::model::{CheckpointRef, CheckpointSpec, ModelSpec, ScoreParams, SequenceId, Suite};
use crate::scorer::{low_bits, MatchRecord, TokenRecord};
use crate::store::{self, RecordFileHeader, RecordReader};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Nesting {
    Nested,
    Overlap { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailSpec {
    /// `P(j) ∝ ratio^j` over tail offsets.
    Geometric { ratio: f64 },
    /// `P(j) ∝ (j + 1)^(-exponent)`.
    Zipf { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthModel {
    pub name: String,
    pub params: u64,
    /// Memorized fraction of seen sequences at the final checkpoint.
    pub rate: f64,
    /// `sequences_seen` of each checkpoint, strictly increasing.
    pub checkpoints: Vec<u64>,
}

fn default_prompt() -> u8 {
    32
}
fn default_threshold() -> u8 {
    32
}
fn default_record_bits() -> u8 {
    64
}
fn default_tokens() -> u64 {
    2048
}
fn default_extended() -> f64 {
    0.5
}
fn default_name() -> String {
    "synthetic".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    /// Number of sequences in the training order.
    pub universe: u64,
    #[serde(default = "default_prompt")]
    pub prompt_len: u8,
    /// Threshold `N` at which the planted rates hold.
    #[serde(default = "default_threshold")]
    pub threshold: u8,
    /// Stored mask width `N_max`.
    #[serde(default = "default_record_bits")]
    pub record_bits: u8,
    #[serde(default = "default_tokens")]
    pub tokens_per_sequence: u64,
    pub models: Vec<SynthModel>,
    pub nesting: Nesting,
    pub tail: TailSpec,
    /// First score bin of the planted tail for non-memorized sequences.
    #[serde(default)]
    pub tail_start: u8,
    /// Probability that a memorized sequence also matches the bits beyond
    /// `threshold` (up to `record_bits`).
    #[serde(default = "default_extended")]
    pub extended_match_prob: f64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::param(m));
        if self.universe == 0 {
            return bad("universe must be positive".into());
        }
        ScoreParams::new(self.prompt_len, self.threshold)?;
        if self.record_bits < self.threshold || self.record_bits > 64 {
            return bad(format!(
                "record_bits {} must lie in threshold..=64",
                self.record_bits
            ));
        }
        if self.tail_start >= self.threshold {
            return bad(format!(
                "tail_start {} must be below the threshold {}",
                self.tail_start, self.threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.extended_match_prob) {
            return bad("extended_match_prob outside [0, 1]".into());
        }
        match self.nesting {
            Nesting::Overlap { rho } if !(0.0..=1.0).contains(&rho) => {
                return bad(format!("overlap rho {rho} outside [0, 1]"))
            }
            _ => {}
        }
        match self.tail {
            TailSpec::Geometric { ratio } if !(ratio > 0.0 && ratio.is_finite()) => {
                return bad(format!("geometric ratio {ratio} must be positive"))
            }
            TailSpec::Zipf { exponent } if !exponent.is_finite() => {
                return bad("zipf exponent must be finite".into())
            }
            _ => {}
        }
        if self.models.is_empty() {
            return bad("no models".into());
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.models {
            if !names.insert(&m.name) {
                return bad(format!("duplicate model name {:?}", m.name));
            }
            if !(0.0..=1.0).contains(&m.rate) {
                return bad(format!("rate {} of {} outside [0, 1]", m.rate, m.name));
            }
            if m.params == 0 {
                return bad(format!("model {} has zero params", m.name));
            }
            if m.checkpoints.is_empty() || m.checkpoints[0] == 0 {
                return bad(format!("model {} needs positive checkpoints", m.name));
            }
            if m.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("checkpoints of {} not strictly increasing", m.name));
            }
        }
        Ok(())
    }

    fn rho(&self) -> f64 {
        match self.nesting {
            Nesting::Nested => 1.0,
            Nesting::Overlap { rho } => rho,
        }
    }

    /// Planted memorization probability of a seen sequence at a checkpoint.
    pub fn planted_rate(&self, model: usize, ckpt: usize) -> f64 {
        let m = &self.models[model];
        let last = *m.checkpoints.last().unwrap() as f64;
        m.rate * m.checkpoints[ckpt] as f64 / last
    }

    /// Number of records (and universe bound) of a checkpoint's file.
    pub fn span(&self, model: usize, ckpt: usize) -> u64 {
        self.models[model].checkpoints[ckpt].min(self.universe)
    }

    pub fn params(&self) -> ScoreParams {
        ScoreParams {
            prompt_len: self.prompt_len,
            cont_len: self.threshold,
        }
    }
}

pub fn checkpoint_label(seen: u64) -> String {
    const UNITS: [(u64, &str); 3] = [(1_000_000_000, "G"), (1_000_000, "M"), (1_000, "K")];
    for (div, suffix) in UNITS {
        if seen >= div && seen.is_multiple_of(div) {
            return format!("{}{suffix}", seen / div);
        }
    }
    seen.to_string()
}

const TAG_SHARED: u64 = 0x5348_4152_4544;
const TAG_COIN: u64 = 0x434f_494e;
const TAG_PRIVATE: u64 = 0x5052_4956;
const TAG_RECORD: u64 = 0x5245_434f_5244;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |h, &p| splitmix(h ^ p))
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws tail bins by inverse CDF.
#[derive(Debug, Clone)]
struct TailSampler {
    start: u8,
    cdf: Vec<f64>,
}

impl TailSampler {
    fn new(spec: TailSpec, start: u8, threshold: u8) -> Self {
        let bins = usize::from(threshold - start);
        let weights: Vec<f64> = (0..bins)
            .map(|j| match spec {
                TailSpec::Geometric { ratio } => ratio.powi(j as i32),
                TailSpec::Zipf { exponent } => ((j + 1) as f64).powf(-exponent),
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        TailSampler { start, cdf }
    }

    fn sample(&self, u: f64) -> u8 {
        let j = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        self.start + j as u8
    }
}

/// Record generator for one (model, checkpoint).
struct Planter<'a> {
    cfg: &'a SynthConfig,
    model: u64,
    ckpt: u64,
    rate: f64,
    tail: TailSampler,
}

impl<'a> Planter<'a> {
    fn new(cfg: &'a SynthConfig, model: usize, ckpt: usize) -> Self {
        Planter {
            cfg,
            model: model as u64,
            ckpt: ckpt as u64,
            rate: cfg.planted_rate(model, ckpt),
            tail: TailSampler::new(cfg.tail, cfg.tail_start, cfg.threshold),
        }
    }

    fn latent(&self, id: u64) -> f64 {
        let s = self.cfg.seed;
        let shared = unit(key(&[s, TAG_SHARED, id]));
        match self.cfg.nesting {
            Nesting::Nested => shared,
            Nesting::Overlap { rho } => {
                if unit(key(&[s, TAG_COIN, self.model, self.ckpt, id])) < rho {
                    shared
                } else {
                    unit(key(&[s, TAG_PRIVATE, self.model, self.ckpt, id]))
                }
            }
        }
    }

    fn memorized(&self, id: u64) -> bool {
        self.latent(id) < self.rate
    }

    fn record(&self, id: u64) -> MatchRecord {
        let n = self.cfg.threshold;
        let width = self.cfg.record_bits;
        let mut rng =
            ChaCha8Rng::seed_from_u64(key(&[self.cfg.seed, TAG_RECORD, self.model, self.ckpt, id]));
        let head = low_bits(n);
        let extra_bits = low_bits(width) & !head;
        let mask = if self.memorized(id) {
            let extra = if rng.random::<f64>() < self.cfg.extended_match_prob || extra_bits == 0 {
                extra_bits
            } else {
                // at least one extended mismatch
                let m = rng.random::<u64>() & extra_bits;
                let miss = n + rng.random_range(0..width - n);
                m & !(1u64 << miss)
            };
            head | extra
        } else {
            let k = self.tail.sample(rng.random::<f64>());
            let mut positions: Vec<u8> = (0..n).collect();
            let mut m = 0u64;
            for i in 0..usize::from(k) {
                let j = rng.random_range(i..positions.len());
                positions.swap(i, j);
                m |= 1 << positions[i];
            }
            m | (rng.random::<u64>() & extra_bits)
        };
        MatchRecord {
            seq_id: SequenceId(id),
            mask,
            valid_bits: width,
        }
    }
}

/// Planted records of one checkpoint, in id order.
pub fn planted_records(cfg: &SynthConfig, model: usize, ckpt: usize) -> Vec<MatchRecord> {
    let p = Planter::new(cfg, model, ckpt);
    (0..cfg.span(model, ckpt))
        .into_par_iter()
        .map(|id| p.record(id))
        .collect()
}

/// Planted memorized ids (score 1 at the configured threshold).
pub fn planted_memorized(cfg: &SynthConfig, model: usize, ckpt: usize) -> Vec<u64> {
    let p = Planter::new(cfg, model, ckpt);
    (0..cfg.span(model, ckpt))
        .into_par_iter()
        .filter(|&id| p.memorized(id))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSet {
    pub model: String,
    pub checkpoint: String,
    pub sequences_seen: u64,
    pub universe_bound: u64,
    pub planted_rate: f64,
    /// Sorted ids with score 1 at the configured threshold.
    pub memorized: Vec<u64>,
    /// Sorted ids that also match across all `record_bits`.
    pub memorized_extended: Vec<u64>,
    pub record_file: PathBuf,
}

/// Sidecar describing everything the generator planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub sets: Vec<PlantedSet>,
}

impl GroundTruth {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub manifest: PathBuf,
    pub sidecar: PathBuf,
    pub suite: Suite,
    pub truth: GroundTruth,
}

pub const MANIFEST_FILE: &str = "suite.json";
pub const SIDECAR_FILE: &str = "ground_truth.json";

/// Writes `suite.json`, one record file per checkpoint under `records/`, and
/// `ground_truth.json` into `out_dir`.
pub fn generate(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Generated> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    let rec_dir = out_dir.join("records");
    fs::create_dir_all(&rec_dir).map_err(|e| Error::io(&rec_dir, e))?;

    let mut models = Vec::new();
    let mut sets = Vec::new();
    for (mi, m) in cfg.models.iter().enumerate() {
        let mut checkpoints = Vec::new();
        for (ci, &seen) in m.checkpoints.iter().enumerate() {
            let label = checkpoint_label(seen);
            let rel = PathBuf::from("records").join(format!("{}__{label}.mrec", m.name));
            let records = planted_records(cfg, mi, ci);
            let header = RecordFileHeader {
                model: m.name.clone(),
                checkpoint: label.clone(),
                prompt_len: cfg.prompt_len,
                cont_len: cfg.record_bits,
                count: records.len() as u64,
            };
            store::write_match_records(out_dir.join(&rel), &header, &records)?;

            let head = low_bits(cfg.threshold);
            let full = low_bits(cfg.record_bits);
            sets.push(PlantedSet {
                model: m.name.clone(),
                checkpoint: label.clone(),
                sequences_seen: seen,
                universe_bound: records.len() as u64,
                planted_rate: cfg.planted_rate(mi, ci),
                memorized: records
                    .iter()
                    .filter(|r| r.mask & head == head)
                    .map(|r| r.seq_id.0)
                    .collect(),
                memorized_extended: records
                    .iter()
                    .filter(|r| r.mask == full)
                    .map(|r| r.seq_id.0)
                    .collect(),
                record_file: rel.clone(),
            });
            checkpoints.push(CheckpointSpec {
                label,
                sequences_seen: seen,
                record_file: rel,
            });
        }
        models.push(ModelSpec {
            name: m.name.clone(),
            params: m.params,
            tokens_per_sequence: cfg.tokens_per_sequence,
            checkpoints,
        });
    }
    let suite = Suite {
        name: cfg.name.clone(),
        threshold_default: cfg.params(),
        models,
        base_dir: out_dir.to_path_buf(),
    };
    let manifest = out_dir.join(MANIFEST_FILE);
    suite.save(&manifest)?;
    let truth = GroundTruth {
        config: cfg.clone(),
        sets,
    };
    let sidecar = out_dir.join(SIDECAR_FILE);
    truth.save(&sidecar)?;
    Ok(Generated {
        manifest,
        sidecar,
        suite,
        truth,
    })
}

/// Phi between two planted indicators with marginal rates `p1`, `p2` when the
/// shared latent is used with probability `rho` on each side.
pub fn analytic_phi(p1: f64, p2: f64, rho: f64) -> Option<f64> {
    let var = p1 * (1.0 - p1) * p2 * (1.0 - p2);
    if var <= 0.0 {
        return None;
    }
    let both = rho * rho * p1.min(p2) + (1.0 - rho * rho) * p1 * p2;
    Some((both - p1 * p2) / var.sqrt())
}

fn phi_of_cells(c: [f64; 4]) -> f64 {
    let [a, b, cc, d] = c;
    (a * d - b * cc) / ((a + b) * (cc + d) * (a + cc) * (b + d)).sqrt()
}

/// Large-sample standard deviation of the sample phi over `n` draws, by the
/// delta method on the multinomial cell proportions.
pub fn phi_sigma(p1: f64, p2: f64, rho: f64, n: u64) -> f64 {
    let both = rho * rho * p1.min(p2) + (1.0 - rho * rho) * p1 * p2;
    let cells = [both, p1 - both, p2 - both, 1.0 - p1 - p2 + both];
    let h = 1e-7;
    let grad: Vec<f64> = (0..4)
        .map(|k| {
            let mut up = cells;
            let mut dn = cells;
            up[k] += h;
            dn[k] -= h;
            (phi_of_cells(up) - phi_of_cells(dn)) / (2.0 * h)
        })
        .collect();
    let mean: f64 = grad.iter().zip(&cells).map(|(g, p)| g * p).sum();
    let var: f64 = grad
        .iter()
        .zip(&cells)
        .map(|(g, p)| p * (g - mean) * (g - mean))
        .sum();
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub check: String,
    pub subject: String,
    pub passed: bool,
    pub planted: String,
    pub observed: String,
    pub tolerance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }
}

/// Tail samples needed before the planted tail parameter is checked.
pub const TAIL_CHECK_MIN_SAMPLES: u64 = 100_000;

/// Re-runs the analytics over a generated suite and compares each result with
/// the planted values.
pub fn ground_truth_check(suite: &Suite, truth: &GroundTruth) -> Result<CheckReport> {
    let cfg = &truth.config;
    let params = cfg.params();
    let mut items = Vec::new();
    let mut item =
        |check: &str, subject: String, passed, planted: String, observed: String, tol: &str| {
            items.push(CheckItem {
                check: check.into(),
                subject,
                passed,
                planted,
                observed,
                tolerance: tol.into(),
            })
        };

    // (model index, checkpoint index, loaded set)
    let mut loaded = Vec::new();
    for ps in &truth.sets {
        let r = CheckpointRef::new(&ps.model, &ps.checkpoint);
        let subject = format!("{r} ({})", ps.record_file.display());
        let mi = cfg.models.iter().position(|m| m.name == ps.model);
        let ci = mi.and_then(|mi| {
            cfg.models[mi]
                .checkpoints
                .iter()
                .position(|&s| s == ps.sequences_seen)
        });
        let (Some(mi), Some(ci)) = (mi, ci) else {
            item(
                "planted-set",
                subject,
                false,
                "present in config".into(),
                "absent".into(),
                "exact",
            );
            continue;
        };
        match store::load_memorized_set(suite, &r, &params) {
            Err(e) => item(
                "record-file",
                subject,
                false,
                "readable".into(),
                e.to_string(),
                "exact",
            ),
            Ok(set) => {
                let ids: Vec<u64> = set.ids().iter().collect();
                item(
                    "memorized-set",
                    subject.clone(),
                    ids == ps.memorized,
                    format!("{} ids", ps.memorized.len()),
                    format!("{} ids", ids.len()),
                    "exact",
                );
                let n = set.universe_bound().max(1);
                let p = ps.planted_rate;
                let frac = set.len() as f64 / n as f64;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                item(
                    "memorized-fraction",
                    subject,
                    (frac - p).abs() <= 3.0 * sigma + f64::EPSILON,
                    format!("{p:.6}"),
                    format!("{frac:.6}"),
                    "3 binomial sigma",
                );
                loaded.push((mi, ci, set));
            }
        }
    }

    // Nested structure between adjacent checkpoints.
    if matches!(cfg.nesting, Nesting::Nested) {
        for w in loaded.windows(2) {
            let ((ma, _, early), (mb, _, late)) = (&w[0], &w[1]);
            if ma != mb {
                continue;
            }
            let c = confusion(early, late)?;
            let subject = format!("{} -> {}", early.label(), late.label());
            let late_in_support = late.ids().count_below(early.universe_bound());
            item(
                "nested-precision",
                subject.clone(),
                c.precision_exact().is_none_or(|p| p == 1.into()),
                "1".into(),
                format!("{:?}", c.precision_exact()),
                "exact",
            );
            let expect = (late_in_support > 0)
                .then(|| num_rational::Ratio::new(early.len(), late_in_support));
            item(
                "nested-recall",
                subject,
                c.recall_exact() == expect,
                format!("{expect:?}"),
                format!("{:?}", c.recall_exact()),
                "exact",
            );
        }
    }

    // Pairwise phi against the closed form.
    let rho = cfg.rho();
    for i in 0..loaded.len() {
        for j in i + 1..loaded.len() {
            let (mi, ci, a) = &loaded[i];
            let (mj, cj, b) = &loaded[j];
            let c = confusion(a, b)?;
            let n = c.total();
            let (p1, p2) = (cfg.planted_rate(*mi, *ci), cfg.planted_rate(*mj, *cj));
            let Some(expect) = analytic_phi(p1, p2, rho) else {
                continue;
            };
            let Some(observed) = phi_from_confusion::<f64>(&c) else {
                continue;
            };
            let sigma = phi_sigma(p1, p2, rho, n);
            item(
                "phi",
                format!("{} ~ {}", a.label(), b.label()),
                (observed - expect).abs() <= 3.0 * sigma + 1e-12,
                format!("{expect:.6}"),
                format!("{observed:.6}"),
                &format!("3 sigma = {:.6}", 3.0 * sigma),
            );
        }
    }

    // Score distribution of each model's final checkpoint.
    for (mi, m) in cfg.models.iter().enumerate() {
        let ci = m.checkpoints.len() - 1;
        let Some(ps) = truth
            .sets
            .iter()
            .find(|s| s.model == m.name && s.sequences_seen == m.checkpoints[ci])
        else {
            continue;
        };
        let path = suite.base_dir.join(&ps.record_file);
        let hist = match RecordReader::open(&path).and_then(|r| histogram(r, &params)) {
            Ok(h) => h,
            Err(e) => {
                item(
                    "distribution",
                    path.display().to_string(),
                    false,
                    "readable".into(),
                    e.to_string(),
                    "exact",
                );
                continue;
            }
        };
        let p = cfg.planted_rate(mi, ci);
        let spike = hist.counts[usize::from(cfg.threshold)] as f64 / hist.total.max(1) as f64;
        let sigma = (p * (1.0 - p) / hist.total.max(1) as f64).sqrt();
        item(
            "spike-mass",
            m.name.clone(),
            (spike - p).abs() <= 3.0 * sigma + f64::EPSILON,
            format!("{p:.6}"),
            format!("{spike:.6}"),
            "3 binomial sigma",
        );
        let tail_n: u64 = hist.counts[..usize::from(cfg.threshold)].iter().sum();
        if tail_n < TAIL_CHECK_MIN_SAMPLES {
            continue;
        }
        let fit = tail_fit::<f64>(&hist, cfg.tail_start)?;
        let (form, ok, planted, observed, tol) = match cfg.tail {
            TailSpec::Geometric { ratio } => {
                let rate = -ratio.ln();
                (
                    TailForm::Exponential,
                    (fit.exp_rate - rate).abs() <= 0.05 * rate.abs(),
                    format!("rate {rate:.6}"),
                    format!("rate {:.6}", fit.exp_rate),
                    "5% relative",
                )
            }
            TailSpec::Zipf { exponent } => (
                TailForm::PowerLaw,
                (fit.pl_exponent - exponent).abs() <= 0.1,
                format!("exponent {exponent:.6}"),
                format!("exponent {:.6}", fit.pl_exponent),
                "0.1 absolute",
            ),
        };
        item(
            "tail-fit",
            m.name.clone(),
            ok && fit.preferred == form,
            format!("{form:?} {planted}"),
            format!("{:?} {observed}", fit.preferred),
            tol,
        );
    }

    let passed = items.iter().all(|i| i.passed);
    Ok(CheckReport { passed, items })
}

/// Token pair consistent with `mask`: true tokens drawn from a vocabulary,
/// generated tokens equal where the mask bit is set and different elsewhere.
pub fn tokens_for_mask(
    seq_id: u64,
    mask: u64,
    prompt_len: u8,
    cont_len: u8,
    rng: &mut impl Rng,
) -> TokenRecord {
    const VOCAB: u32 = 50_277;
    let m = usize::from(prompt_len);
    let n = usize::from(cont_len);
    let true_tokens: Vec<u32> = (0..m + n).map(|_| rng.random_range(0..VOCAB)).collect();
    let gen_tokens = (0..n)
        .map(|i| {
            let t = true_tokens[m + i];
            if mask >> i & 1 == 1 {
                t
            } else {
                (t + rng.random_range(1..VOCAB)) % VOCAB
            }
        })
        .collect();
    TokenRecord {
        seq_id: SequenceId(seq_id),
        true_tokens,
        gen_tokens,
    }
}

/// Token records realizing the given match records.
pub fn token_records(seed: u64, records: &[MatchRecord], prompt_len: u8) -> Vec<TokenRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|r| tokens_for_mask(r.seq_id.0, r.mask, prompt_len, r.valid_bits, &mut rng))
        .collect()
}
