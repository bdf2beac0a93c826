use num_complex::Complex64;
use proptest::prelude::*;
use risgat_core::signaling::{bpsk_demod_coherent, bpsk_mod, lfsr_bits, LfsrConfig, PilotSequence};

#[test]
fn default_lfsr_matches_golden_sequence() {
    let golden = include_str!("data/lfsr_x4x2x1_seed1.txt").trim();
    let bits: String = lfsr_bits(&LfsrConfig::default(), golden.len()).unwrap().iter().map(|b| char::from(b'0' + b)).collect();
    assert_eq!(bits, golden);
}

#[test]
fn every_seed_of_the_reducible_polynomial_has_period_dividing_six() {
    // x⁴ + x² + 1 = (x² + x + 1)², so no state sequence is maximal length.
    for seed in 1u8..16 {
        let bits = lfsr_bits(&LfsrConfig { poly: 0b1_0101, seed }, 66).unwrap();
        assert!((0..60).all(|i| bits[i] == bits[i + 6]), "seed {seed:04b}");
    }
}

#[test]
fn pilot_is_a_bpsk_image_of_the_register_output() {
    let p = PilotSequence::from_lfsr(&LfsrConfig::default(), 16).unwrap();
    assert_eq!(p.symbols, bpsk_mod(&p.bits));
    assert_eq!(p.energy(), 16.0);
}

#[test]
fn invalid_registers_are_rejected() {
    assert!(lfsr_bits(&LfsrConfig { poly: 0b1_0101, seed: 0 }, 4).is_err());
    assert!(lfsr_bits(&LfsrConfig { poly: 0b0_0101, seed: 1 }, 4).is_err());
    assert!(lfsr_bits(&LfsrConfig::default(), 0).is_err());
}

proptest! {
    #[test]
    fn noiseless_bpsk_round_trips(bits in prop::collection::vec(0u8..2, 1..64), phase in -3.1f64..3.1, amp in 0.01f64..10.0) {
        let gain = Complex64::from_polar(amp, phase);
        let r: Vec<Complex64> = bpsk_mod(&bits).into_iter().map(|s| gain * s).collect();
        prop_assert_eq!(bpsk_demod_coherent(&r, gain).unwrap(), bits);
    }
}
