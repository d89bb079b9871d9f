//! Shared domain types: sequence identity, scoring parameters, model and
//! checkpoint descriptions, and the suite manifest.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store;

/// Width of the stored continuation match mask.
pub const MASK_BITS: u8 = 64;

/// Checkpoint label naming the most-trained checkpoint of a model.
pub const FINAL_CHECKPOINT: &str = "final";

/// Ordinal position of a sequence in the suite's fixed training order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SequenceId(pub u64);

impl SequenceId {
    pub fn index(self) -> u64 {
        self.0
    }
}

impl From<u64> for SequenceId {
    fn from(v: u64) -> Self {
        SequenceId(v)
    }
}

impl fmt::Display for SequenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Prompt length `M` and scored continuation length `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreParams {
    #[serde(rename = "M")]
    pub prompt_len: u8,
    #[serde(rename = "N")]
    pub cont_len: u8,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            prompt_len: 32,
            cont_len: 32,
        }
    }
}

impl ScoreParams {
    pub fn new(prompt_len: u8, cont_len: u8) -> Result<Self> {
        let p = ScoreParams {
            prompt_len,
            cont_len,
        };
        p.check()?;
        Ok(p)
    }

    /// The doubled-threshold setting: 64 continuation tokens must match.
    pub fn extended() -> Self {
        ScoreParams {
            prompt_len: 32,
            cont_len: 64,
        }
    }

    pub fn with_cont_len(self, cont_len: u8) -> Result<Self> {
        ScoreParams::new(self.prompt_len, cont_len)
    }

    pub fn check(&self) -> Result<()> {
        if self.cont_len == 0 || self.cont_len > MASK_BITS {
            return Err(Error::param(format!(
                "continuation length N = {} outside 1..={MASK_BITS}",
                self.cont_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointSpec {
    pub label: String,
    pub sequences_seen: u64,
    pub record_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub params: u64,
    pub tokens_per_sequence: u64,
    pub checkpoints: Vec<CheckpointSpec>,
}

impl ModelSpec {
    /// Checkpoint with the most training, i.e. the fully-trained model.
    pub fn final_checkpoint(&self) -> Option<&CheckpointSpec> {
        self.checkpoints.iter().max_by_key(|c| c.sequences_seen)
    }

    pub fn checkpoint(&self, label: &str) -> Option<&CheckpointSpec> {
        if label == FINAL_CHECKPOINT {
            return self.final_checkpoint();
        }
        self.checkpoints.iter().find(|c| c.label == label)
    }
}

/// A family of models trained on the same data in the same order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub threshold_default: ScoreParams,
    pub models: Vec<ModelSpec>,
    /// Directory that relative `record_file` paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Suite {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut suite: Suite = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        suite.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(suite)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn model(&self, name: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn record_path(&self, ckpt: &CheckpointSpec) -> PathBuf {
        self.base_dir.join(&ckpt.record_file)
    }

    pub fn resolve(&self, r: &CheckpointRef) -> Result<(&ModelSpec, &CheckpointSpec)> {
        let model = self
            .model(&r.model)
            .ok_or_else(|| Error::param(format!("unknown model {:?}", r.model)))?;
        let ckpt = model.checkpoint(&r.checkpoint).ok_or_else(|| {
            Error::param(format!(
                "model {:?} has no checkpoint {:?}",
                r.model, r.checkpoint
            ))
        })?;
        Ok((model, ckpt))
    }

    /// Every (model, checkpoint) pair in manifest order.
    pub fn entries(&self) -> impl Iterator<Item = (&ModelSpec, &CheckpointSpec)> {
        self.models
            .iter()
            .flat_map(|m| m.checkpoints.iter().map(move |c| (m, c)))
    }
}

/// `model@checkpoint` reference; the checkpoint `final` names the most-trained one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CheckpointRef {
    pub model: String,
    pub checkpoint: String,
}

impl CheckpointRef {
    pub fn new(model: impl Into<String>, checkpoint: impl Into<String>) -> Self {
        CheckpointRef {
            model: model.into(),
            checkpoint: checkpoint.into(),
        }
    }
}

impl FromStr for CheckpointRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once('@') {
            Some((m, c)) if !m.is_empty() && !c.is_empty() => Ok(CheckpointRef::new(m, c)),
            None if !s.is_empty() => Ok(CheckpointRef::new(s, FINAL_CHECKPOINT)),
            _ => Err(Error::param(format!(
                "malformed checkpoint reference {s:?}"
            ))),
        }
    }
}

impl fmt::Display for CheckpointRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.model, self.checkpoint)
    }
}

impl Serialize for CheckpointRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CheckpointRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    InvalidThreshold,
    EmptySuite,
    DuplicateModelName,
    InvalidModel,
    NoCheckpoints,
    NonMonotoneCheckpoints,
    InvalidCheckpoint,
    MissingFile,
    BadRecordFile,
    HeaderMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::InvalidThreshold => "invalid threshold",
            ViolationKind::EmptySuite => "empty suite",
            ViolationKind::DuplicateModelName => "duplicate model name",
            ViolationKind::InvalidModel => "invalid model",
            ViolationKind::NoCheckpoints => "no checkpoints",
            ViolationKind::NonMonotoneCheckpoints => "non-monotone checkpoints",
            ViolationKind::InvalidCheckpoint => "invalid checkpoint",
            ViolationKind::MissingFile => "missing file",
            ViolationKind::BadRecordFile => "bad record file",
            ViolationKind::HeaderMismatch => "header mismatch",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// JSON-pointer-like location inside the manifest.
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.kind, self.location, self.detail)
    }
}

/// Check every manifest invariant, including a full streaming pass over each
/// referenced record file. An empty result means downstream readers will not
/// hit a format error on this suite.
pub fn validate_suite(suite: &Suite) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, location: String, detail: String| {
        out.push(Violation {
            kind,
            location,
            detail,
        })
    };

    if let Err(e) = suite.threshold_default.check() {
        push(
            ViolationKind::InvalidThreshold,
            "/threshold_default".into(),
            e.to_string(),
        );
    }
    if suite.models.is_empty() {
        push(
            ViolationKind::EmptySuite,
            "/models".into(),
            "no models".into(),
        );
    }

    let mut seen_names = HashSet::new();
    for (mi, model) in suite.models.iter().enumerate() {
        let mloc = format!("/models/{mi}");
        if !seen_names.insert(model.name.as_str()) {
            push(
                ViolationKind::DuplicateModelName,
                format!("{mloc}/name"),
                format!("model name {:?} repeated", model.name),
            );
        }
        if model.params == 0 {
            push(
                ViolationKind::InvalidModel,
                format!("{mloc}/params"),
                "params must be positive".into(),
            );
        }
        if model.tokens_per_sequence == 0 {
            push(
                ViolationKind::InvalidModel,
                format!("{mloc}/tokens_per_sequence"),
                "tokens_per_sequence must be positive".into(),
            );
        }
        if model.checkpoints.is_empty() {
            push(
                ViolationKind::NoCheckpoints,
                format!("{mloc}/checkpoints"),
                format!("model {:?} lists no checkpoints", model.name),
            );
        }
        let mut labels = HashSet::new();
        for (ci, ckpt) in model.checkpoints.iter().enumerate() {
            let cloc = format!("{mloc}/checkpoints/{ci}");
            if ckpt.sequences_seen == 0 {
                push(
                    ViolationKind::InvalidCheckpoint,
                    format!("{cloc}/sequences_seen"),
                    "sequences_seen must be positive".into(),
                );
            }
            if !labels.insert(ckpt.label.as_str()) || ckpt.label == FINAL_CHECKPOINT {
                push(
                    ViolationKind::InvalidCheckpoint,
                    format!("{cloc}/label"),
                    format!(
                        "checkpoint label {:?} is duplicated or reserved",
                        ckpt.label
                    ),
                );
            }
            if ci > 0 {
                let prev = model.checkpoints[ci - 1].sequences_seen;
                if ckpt.sequences_seen <= prev {
                    push(
                        ViolationKind::NonMonotoneCheckpoints,
                        format!("{cloc}/sequences_seen"),
                        format!(
                            "{} does not exceed the preceding checkpoint's {prev}",
                            ckpt.sequences_seen
                        ),
                    );
                }
            }
            check_record_file(suite, model, ckpt, &cloc, &mut push);
        }
    }
    out
}

fn check_record_file(
    suite: &Suite,
    model: &ModelSpec,
    ckpt: &CheckpointSpec,
    cloc: &str,
    push: &mut impl FnMut(ViolationKind, String, String),
) {
    let path = suite.record_path(ckpt);
    let floc = format!("{cloc}/record_file");
    if !path.is_file() {
        push(
            ViolationKind::MissingFile,
            floc,
            format!("{} does not exist", path.display()),
        );
        return;
    }
    let reader = match store::RecordReader::open(&path) {
        Ok(r) => r,
        Err(e) => {
            push(
                ViolationKind::BadRecordFile,
                floc,
                format!("{}: {e}", path.display()),
            );
            return;
        }
    };
    let header = reader.header().clone();
    if header.model != model.name || header.checkpoint != ckpt.label {
        push(
            ViolationKind::HeaderMismatch,
            floc.clone(),
            format!(
                "file declares {}@{}, manifest expects {}@{}",
                header.model, header.checkpoint, model.name, ckpt.label
            ),
        );
    }
    let t = suite.threshold_default;
    if header.prompt_len != t.prompt_len {
        push(
            ViolationKind::HeaderMismatch,
            floc.clone(),
            format!(
                "file prompt length {} differs from suite M = {}",
                header.prompt_len, t.prompt_len
            ),
        );
    }
    if header.cont_len < t.cont_len {
        push(
            ViolationKind::HeaderMismatch,
            floc.clone(),
            format!(
                "file stores {} continuation bits, suite threshold needs {}",
                header.cont_len, t.cont_len
            ),
        );
    }
    for rec in reader {
        match rec {
            Ok(r) if r.seq_id.0 >= ckpt.sequences_seen => {
                push(
                    ViolationKind::BadRecordFile,
                    floc,
                    format!(
                        "sequence {} lies beyond the {} sequences seen by this checkpoint",
                        r.seq_id, ckpt.sequences_seen
                    ),
                );
                return;
            }
            Ok(_) => {}
            Err(e) => {
                push(
                    ViolationKind::BadRecordFile,
                    floc,
                    format!("{}: {e}", path.display()),
                );
                return;
            }
        }
    }
}
