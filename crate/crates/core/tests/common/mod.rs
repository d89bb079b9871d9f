#![allow(dead_code)]

use memforecast::synth::{Nesting, SynthConfig, SynthModel, TailSpec};
use memforecast::MemorizedSet;

pub fn config(universe: u64, nesting: Nesting) -> SynthConfig {
    SynthConfig {
        name: "oracle".into(),
        seed: 20240601,
        universe,
        prompt_len: 32,
        threshold: 32,
        record_bits: 64,
        tokens_per_sequence: 2048,
        models: vec![
            SynthModel {
                name: "tiny".into(),
                params: 70_000_000,
                rate: 0.02,
                checkpoints: vec![universe / 4, universe / 2, universe],
            },
            SynthModel {
                name: "mid".into(),
                params: 1_000_000_000,
                rate: 0.05,
                checkpoints: vec![universe / 2, universe],
            },
            SynthModel {
                name: "big".into(),
                params: 12_000_000_000,
                rate: 0.1,
                checkpoints: vec![universe / 5, universe / 2, universe * 4 / 5, universe],
            },
        ],
        nesting,
        tail: TailSpec::Geometric { ratio: 0.8 },
        tail_start: 0,
        extended_match_prob: 0.5,
    }
}

/// Membership vector over `0..bound`.
pub fn indicator(set: &MemorizedSet, bound: u64) -> Vec<bool> {
    (0..bound).map(|i| set.contains(i)).collect()
}
