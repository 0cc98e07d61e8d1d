use ncac_core::pci::*;
use ncac_core::snn::{LifParams, SpikingNetwork};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parse(s: &str) -> Vec<u8> {
    s.bytes().map(|b| b - b'0').collect()
}

/// Textbook exhaustive-history parsing: a phrase grows while it can still be
/// copied from somewhere earlier (overlap allowed).
fn naive_lz76(s: &[u8]) -> usize {
    let n = s.len();
    let mut count = 0;
    let mut start = 0;
    while start < n {
        let mut len = 1;
        while start + len <= n {
            let phrase = &s[start..start + len];
            let history = &s[..start + len - 1];
            let copyable = history.windows(len).any(|w| w == phrase);
            if !copyable {
                break;
            }
            len += 1;
        }
        count += 1;
        start += len;
    }
    count
}

fn recurrent(seed: u64, n: usize) -> SpikingNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = SpikingNetwork::new(n, LifParams { t_ref: 2.0, ..LifParams::default() }).unwrap();
    net.set_input_noise(1.0).unwrap();
    for pre in 0..n {
        for post in 0..n {
            if pre != post && rng.random::<f64>() < 0.3 {
                let d = rng.random_range(1..=20);
                net.connect(pre, post, 40.0 * rng.random_range(0.5..1.5), d).unwrap();
            }
        }
    }
    net
}

fn spec(amplitude: f64, trials: usize) -> PerturbationSpec {
    PerturbationSpec {
        target_neurons: vec![0, 1, 2],
        amplitude,
        onset_step: 0,
        duration_steps: 5,
        trials,
        baseline_steps: 100,
        response_steps: 150,
        background: 0.7,
        activation: Activation::SmoothedRate,
    }
}

#[test]
fn golden_strings() {
    for (s, c) in [("0", 1), ("0000000000", 2), ("0001101001000101", 6)] {
        assert_eq!(lz76_complexity(&parse(s)).unwrap(), c, "{s}");
        assert_eq!(naive_lz76(&parse(s)), c, "{s}");
    }
}

#[test]
fn constant_sequences_have_two_phrases() {
    for len in 2..40 {
        assert_eq!(lz76_complexity(&vec![0; len]).unwrap(), 2);
        assert_eq!(lz76_complexity(&vec![1; len]).unwrap(), 2);
    }
    assert_eq!(normalized_lz(&[1; 50]).unwrap().pci, 0.0);
    assert!(lz76_complexity(&[]).is_err());
}

#[test]
fn fair_coin_normalizes_to_one() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let r = normalized_lz(&bits).unwrap();
        assert!((r.pci - 1.0).abs() <= 0.1, "seed {seed}: {}", r.pci);
        assert_eq!(r.sequence_length, 10_000);
    }
}

#[test]
fn zero_amplitude_gives_zero() {
    let net = recurrent(3, 12);
    let resp = perturb_and_record(&net, &spec(0.0, 4), 9).unwrap();
    let bin = binarize_responses(&resp, DEFAULT_K).unwrap();
    // Without a pulse the trial mean never leaves the baseline by 3 SD.
    let r = pci(&bin).unwrap();
    assert!(r.pci < 0.05, "{}", r.pci);
    assert_eq!(r.k, Some(DEFAULT_K));
}

#[test]
fn pipeline_is_deterministic() {
    let net = recurrent(5, 12);
    let run = || {
        let resp = perturb_and_record(&net, &spec(200.0, 6), 11).unwrap();
        let bin = binarize_responses(&resp, DEFAULT_K).unwrap();
        (bin.to_csv(), pci(&bin).unwrap(), pci_trials(&bin).unwrap())
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
}

#[test]
fn pulse_raises_significance() {
    let net = recurrent(8, 12);
    let resp = perturb_and_record(&net, &spec(200.0, 8), 2).unwrap();
    let bin = binarize_responses(&resp, DEFAULT_K).unwrap();
    let target_hits: usize = (0..5).map(|t| bin.at(t, 0) as usize).sum();
    assert!(target_hits > 0);
    assert!(bin.ones() > 0);
}

#[test]
fn reference_band_is_annotation_only() {
    let r = normalized_lz(&parse("0001101001000101")).unwrap();
    assert_eq!(r.threshold_reference, REFERENCE_THRESHOLD);
    assert_eq!(r.in_reference_band(), (0.31..=0.70).contains(&r.pci));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_naive_parse_and_prefix_monotone(bits in proptest::collection::vec(0u8..2, 1..120)) {
        let c = lz76_complexity(&bits).unwrap();
        prop_assert_eq!(c, naive_lz76(&bits));
        let prefix = lz76_complexity(&bits[..bits.len() - bits.len() / 3]).unwrap();
        prop_assert!(prefix <= c);
    }

    #[test]
    fn normalized_is_finite_and_nonnegative(bits in proptest::collection::vec(0u8..2, 1..300)) {
        let r = normalized_lz(&bits).unwrap();
        prop_assert!(r.pci.is_finite() && r.pci >= 0.0);
    }
}
