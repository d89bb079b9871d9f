//! Tail fits on planted score distributions.

use memforecast::distribution::{histogram, spike_mass, tail_fit, TailForm};
use memforecast::store::RecordReader;
use memforecast::synth::{generate, Nesting, SynthConfig, SynthModel, TailSpec};

fn planted(
    tail: TailSpec,
    tail_start: u8,
    records: u64,
) -> memforecast::distribution::ScoreHistogram {
    let cfg = SynthConfig {
        name: "dist".into(),
        seed: 99,
        universe: records,
        prompt_len: 32,
        threshold: 32,
        record_bits: 64,
        tokens_per_sequence: 2048,
        models: vec![SynthModel {
            name: "m".into(),
            params: 1_000_000,
            rate: 0.0162,
            checkpoints: vec![records],
        }],
        nesting: Nesting::Nested,
        tail,
        tail_start,
        extended_match_prob: 0.5,
    };
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&cfg, dir.path()).unwrap();
    let path = dir.path().join(&g.truth.sets[0].record_file);
    histogram(RecordReader::open(path).unwrap(), &cfg.params()).unwrap()
}

#[test]
fn zipf_tail_is_recovered() {
    let h = planted(TailSpec::Zipf { exponent: 2.0 }, 0, 200_000);
    let fit = tail_fit::<f64>(&h, 0).unwrap();
    assert_eq!(fit.preferred, TailForm::PowerLaw);
    assert!((fit.pl_exponent - 2.0).abs() < 0.1, "{}", fit.pl_exponent);
    let spike = spike_mass::<f64>(&h).unwrap();
    let sigma = (0.0162 * (1.0 - 0.0162) / h.total as f64).sqrt();
    assert!((spike - 0.0162).abs() <= 3.0 * sigma, "{spike}");
}

#[test]
fn geometric_tail_is_recovered() {
    let h = planted(TailSpec::Geometric { ratio: 0.7 }, 16, 200_000);
    assert!(h.counts[..16].iter().all(|&c| c == 0));
    let fit = tail_fit::<f64>(&h, 16).unwrap();
    assert_eq!(fit.preferred, TailForm::Exponential);
    let rate = -(0.7f64.ln());
    assert!(
        (fit.exp_rate - rate).abs() < 0.05 * rate,
        "{}",
        fit.exp_rate
    );
}

#[test]
fn f32_and_f64_fits_agree() {
    let h = planted(TailSpec::Zipf { exponent: 1.5 }, 0, 50_000);
    let a = tail_fit::<f64>(&h, 0).unwrap();
    let b = tail_fit::<f32>(&h, 0).unwrap();
    assert_eq!(a.preferred, b.preferred);
    assert!((a.pl_exponent - f64::from(b.pl_exponent)).abs() < 1e-3);
}
