use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use risgat_core::channel::{cascaded_gain, ris_phases_from_estimates, sample_rician, wrap_phase, PhaseShiftMatrix, RicianParams};
use risgat_core::estimate::{ls_estimate_cascaded, quantize_phase, PhaseSet, PhaseSetKind};
use risgat_core::nn::softmax_rows;
use risgat_core::rng;
use risgat_core::signaling::{transmit, LfsrConfig, PilotSequence};
use risgat_core::channel::LinkBudget;
use risgat_core::Matrix;

/// Modified Bessel function of the first kind by its power series.
fn bessel_i(order: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= (x / 2.0).powi(2) / (k as f64 * (k + order) as f64);
        sum += term;
    }
    sum
}

/// Mean Rician amplitude `√(πΩ/(4(K+1))) · L_{1/2}(−K)`.
fn rician_mean_amplitude(k: f64, omega: f64) -> f64 {
    let x = -k;
    let laguerre = (x / 2.0).exp() * ((1.0 - x) * bessel_i(0, -x / 2.0) - x * bessel_i(1, -x / 2.0));
    (PI * omega / (4.0 * (k + 1.0))).sqrt() * laguerre
}

#[test]
fn laguerre_oracle_limits() {
    // K = 0 is Rayleigh: E|h| = √(πΩ)/2.
    assert_abs_diff_eq!(rician_mean_amplitude(0.0, 1.0), PI.sqrt() / 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(rician_mean_amplitude(10.0, 1.0), 0.977_624_390_904_611, epsilon = 1e-9);
}

#[test]
fn rician_moments_match_closed_form() {
    let n = 1_000_000;
    for k in [0.0, 10.0, 100.0] {
        let h = sample_rician(n, &RicianParams::new(k), &mut rng::substream(42, &[k as u64]));
        let power = h.0.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        let mean_amp = h.0.iter().map(|c| c.norm()).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(power, 1.0, epsilon = 0.005);
        assert_abs_diff_eq!(mean_amp, rician_mean_amplitude(k, 1.0), epsilon = 0.003);
    }
}

#[test]
fn los_phase_rotates_the_mean() {
    let n = 200_000;
    let p = RicianParams::new(10.0).with_los_phase(PI / 2.0);
    let h = sample_rician(n, &p, &mut rng::stream(8));
    let mean: Complex64 = h.0.iter().sum::<Complex64>() / n as f64;
    let los = (10.0f64 / 11.0).sqrt();
    assert_abs_diff_eq!(mean.re, 0.0, epsilon = 0.005);
    assert_abs_diff_eq!(mean.im, los, epsilon = 0.005);
}

#[test]
fn ls_estimate_is_unbiased() {
    let pilot = PilotSequence::from_lfsr(&LfsrConfig::default(), 16).unwrap();
    let c = Complex64::new(0.7, -1.9);
    let snr = 10f64.powf(-1.0);
    let budget = LinkBudget::new(snr).unwrap();
    let trials = 20_000;
    let mut stream = rng::stream(99);
    let mut sum = Complex64::new(0.0, 0.0);
    for _ in 0..trials {
        let r = transmit(&pilot.symbols, c, &budget, 1.0, &mut stream).unwrap();
        sum += ls_estimate_cascaded(&r.0, &pilot.symbols, snr).unwrap();
    }
    let mean = sum / trials as f64;
    // Per-component standard error: √(1 / (2 snr M_p trials)).
    let se = (1.0 / (2.0 * snr * 16.0 * trials as f64)).sqrt();
    assert!((mean - c).re.abs() < 4.0 * se && (mean - c).im.abs() < 4.0 * se, "{mean} vs {c}");
}

proptest! {
    #[test]
    fn wrap_lands_in_half_open_interval(x in -1e4f64..1e4) {
        let y = wrap_phase(x);
        prop_assert!((-PI..PI).contains(&y));
        let turns = (x - y) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn softmax_ignores_row_shifts(row in prop::collection::vec(-20.0f64..20.0, 1..8), shift in -50.0f64..50.0) {
        let n = row.len();
        let x = Matrix::from_vec(1, n, row.clone()).unwrap();
        let shifted = Matrix::from_vec(1, n, row.iter().map(|v| v + shift).collect()).unwrap();
        let mask = Matrix::filled(1, n, 1.0);
        let (a, b) = (softmax_rows(&x, &mask).unwrap(), softmax_rows(&shifted, &mask).unwrap());
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn quantization_never_beats_continuous_alignment(seed in 0u64..1000, bits in 1u32..4, kind in 0usize..3) {
        let kind = [PhaseSetKind::Set1, PhaseSetKind::Set2, PhaseSetKind::Set3][kind];
        let set = PhaseSet::new(kind, bits).unwrap();
        let mut s = rng::stream(seed);
        let p = RicianParams::new(10.0);
        let (h, g) = (sample_rician(8, &p, &mut s), sample_rician(8, &p, &mut s));
        let (phi, _) = ris_phases_from_estimates(&h.0, &g.0).unwrap();
        let best = cascaded_gain(&h.0, &g.0, &phi).unwrap().norm();
        let quantized = PhaseShiftMatrix::from_phases(phi.phi.iter().map(|&a| quantize_phase(a, &set)));
        prop_assert!(cascaded_gain(&h.0, &g.0, &quantized).unwrap().norm() <= best + 1e-12);
        let upper: f64 = h.0.iter().zip(&g.0).map(|(a, b)| a.norm() * b.norm()).sum();
        prop_assert!((best - upper).abs() < 1e-9 * upper);
    }
}
