//! Cascaded device→RIS→satellite channel.
//!
//! Per element `i`, `h_i = β_i e^{jθ_i}` (device to RIS) and `g_i = ρ_i e^{jν_i}`
//! (RIS to receiver). The RIS applies `Φ = diag(e^{-jφ_i})`, so the receiver sees
//! `gᵀΦh = Σ β_i ρ_i e^{-jψ_i}` with residual misalignment `ψ_i = φ_i − θ_i − ν_i`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;
use core::ops::{Deref, DerefMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// A vector of complex channel gains.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexVec(pub Vec<Complex64>);

impl ComplexVec {
    /// All-zero vector.
    pub fn zeros(n: usize) -> Self {
        ComplexVec(alloc::vec![Complex64::new(0.0, 0.0); n])
    }

    /// Builds from separate real and imaginary parts.
    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Length { op: "ComplexVec::from_parts", left: re.len(), right: im.len() });
        }
        Ok(ComplexVec(re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()))
    }

    /// Real parts.
    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.re).collect()
    }

    /// Imaginary parts.
    pub fn im(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.im).collect()
    }

    /// Squared Euclidean norm.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }
}

impl Deref for ComplexVec {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for ComplexVec {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl From<Vec<Complex64>> for ComplexVec {
    fn from(v: Vec<Complex64>) -> Self {
        ComplexVec(v)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = (x + PI) % two_pi;
    if y < 0.0 {
        y += two_pi;
    }
    // `y` may round up to exactly 2π for inputs just below an odd multiple of π.
    if y >= two_pi {
        y -= two_pi;
    }
    y - PI
}

/// Rician link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianParams {
    /// Linear K-factor (LOS to scatter power ratio), `≥ 0`.
    pub k: f64,
    /// Mean power `E[|coefficient|²]`, `> 0`.
    pub omega: f64,
    /// Phase of the deterministic LOS component, radians.
    pub los_phase: f64,
}

impl RicianParams {
    /// `K`, unit power, zero LOS phase.
    pub fn new(k: f64) -> Self {
        RicianParams { k, omega: 1.0, los_phase: 0.0 }
    }

    /// Same parameters with a different LOS phase.
    pub fn with_los_phase(self, los_phase: f64) -> Self {
        RicianParams { los_phase, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0) || !(self.omega > 0.0) || !self.los_phase.is_finite() {
            return Err(Error::invalid("rician", "requires K >= 0, omega > 0 and a finite LOS phase"));
        }
        Ok(())
    }
}

impl Default for RicianParams {
    fn default() -> Self {
        RicianParams::new(10.0)
    }
}

/// Draws `n` coefficients: LOS `√(Kω/(K+1)) e^{j los_phase}` plus complex Gaussian scatter of
/// per-quadrature variance `ω / (2(K+1))`.
pub fn sample_rician<R: Rng + ?Sized>(n: usize, p: &RicianParams, rng: &mut R) -> ComplexVec {
    let los = Complex64::from_polar((p.k * p.omega / (p.k + 1.0)).sqrt(), p.los_phase);
    let sigma = (p.omega / (2.0 * (p.k + 1.0))).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            los + Complex64::new(sigma * re, sigma * im)
        })
        .collect::<Vec<_>>()
        .into()
}

/// How per-element coefficients are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingModel {
    /// LOS plus complex Gaussian scatter; the phase is the angle of the sample.
    Rician,
    /// Rician amplitude with an independent phase uniform on `[-π, π)`.
    UniformPhase,
    /// Unit amplitude with a uniform phase (no fading).
    UnitAmplitude,
}

/// Statistical model of both hops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Coefficient construction.
    pub fading: FadingModel,
    /// Device → RIS hop.
    pub h: RicianParams,
    /// RIS → receiver hop.
    pub g: RicianParams,
}

impl ChannelModel {
    /// Both hops Rician with shape `k`, zero LOS phase.
    pub fn rician(k: f64) -> Self {
        ChannelModel { fading: FadingModel::Rician, h: RicianParams::new(k), g: RicianParams::new(k) }
    }

    /// Unit-amplitude, uniform-phase coefficients.
    pub fn unit_amplitude() -> Self {
        ChannelModel { fading: FadingModel::UnitAmplitude, ..Self::rician(0.0) }
    }

    /// Rician with the same LOS phase on both hops.
    pub fn with_los_phase(self, los_phase: f64) -> Self {
        ChannelModel { h: self.h.with_los_phase(los_phase), g: self.g.with_los_phase(los_phase), ..self }
    }

    /// Checks parameter domains.
    pub fn validate(&self) -> Result<()> {
        self.h.validate()?;
        self.g.validate()
    }

    /// Draws `(h, g)` for `n` elements.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (ComplexVec, ComplexVec) {
        let h = self.sample_hop(n, &self.h, rng);
        let g = self.sample_hop(n, &self.g, rng);
        (h, g)
    }

    fn sample_hop<R: Rng + ?Sized>(&self, n: usize, p: &RicianParams, rng: &mut R) -> ComplexVec {
        match self.fading {
            FadingModel::Rician => sample_rician(n, p, rng),
            FadingModel::UniformPhase => {
                let amps = sample_rician(n, &p.with_los_phase(0.0), rng);
                amps.iter().map(|c| Complex64::from_polar(c.norm(), uniform_phase(rng))).collect::<Vec<_>>().into()
            }
            FadingModel::UnitAmplitude => {
                (0..n).map(|_| Complex64::from_polar(1.0, uniform_phase(rng))).collect::<Vec<_>>().into()
            }
        }
    }
}

/// Uniform draw on `[-π, π)`.
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-PI..PI)
}

/// Per-element RIS phases `φ_i ∈ [-π, π)`; every element has unit amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftMatrix {
    /// Phases, radians.
    pub phi: Vec<f64>,
}

impl PhaseShiftMatrix {
    /// All-zero phases (identity reflection).
    pub fn identity(n: usize) -> Self {
        PhaseShiftMatrix { phi: alloc::vec![0.0; n] }
    }

    /// Wraps each phase into `[-π, π)`.
    pub fn from_phases(phi: impl IntoIterator<Item = f64>) -> Self {
        PhaseShiftMatrix { phi: phi.into_iter().map(wrap_phase).collect() }
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    /// True for an empty surface.
    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Amplitude response of every element (lossless surface).
    pub fn amplitude(&self) -> f64 {
        1.0
    }
}

/// RIS configuration from channel estimates: `φ_i = wrap(∠ĥ_i + ∠ĝ_i)`.
///
/// A zero-magnitude estimate contributes phase 0; the number of such events is returned.
pub fn ris_phases_from_estimates(h_hat: &[Complex64], g_hat: &[Complex64]) -> Result<(PhaseShiftMatrix, usize)> {
    if h_hat.len() != g_hat.len() {
        return Err(Error::Length { op: "ris_phases_from_estimates", left: h_hat.len(), right: g_hat.len() });
    }
    let mut zeros = 0;
    let mut angle = |c: &Complex64| {
        if c.norm_sqr() == 0.0 {
            zeros += 1;
            0.0
        } else {
            c.arg()
        }
    };
    let phi: Vec<f64> = h_hat.iter().zip(g_hat).map(|(h, g)| wrap_phase(angle(h) + angle(g))).collect();
    Ok((PhaseShiftMatrix { phi }, zeros))
}

/// Composite gain `gᵀΦh = Σ_i h_i g_i e^{-jφ_i}`.
///
/// Its magnitude is `|Σ β_i ρ_i e^{jψ_i}|`; with perfect phases it is the real number `Σ β_i ρ_i`.
pub fn cascaded_gain(h: &[Complex64], g: &[Complex64], phi: &PhaseShiftMatrix) -> Result<Complex64> {
    if h.len() != g.len() || h.len() != phi.len() {
        return Err(Error::Length { op: "cascaded_gain", left: h.len(), right: g.len().min(phi.len()) });
    }
    Ok(h.iter()
        .zip(g)
        .zip(&phi.phi)
        .map(|((h, g), &p)| h * g * Complex64::from_polar(1.0, -p))
        .sum())
}

/// Lumped link budget `P_t ξ / N_0` (linear).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Linear SNR scale.
    pub pt_xi_over_n0: f64,
}

impl LinkBudget {
    /// From a linear value; must be positive and finite.
    pub fn new(pt_xi_over_n0: f64) -> Result<Self> {
        if !(pt_xi_over_n0 > 0.0) || !pt_xi_over_n0.is_finite() {
            return Err(Error::invalid("pt_xi_over_n0", "must be positive and finite"));
        }
        Ok(LinkBudget { pt_xi_over_n0 })
    }

    /// From decibels.
    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(db_to_linear(db))
    }
}

/// `10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10 log10(x)`.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Instantaneous effective SNR `budget · |gain|²`.
pub fn effective_snr(budget: &LinkBudget, gain: Complex64) -> f64 {
    budget.pt_xi_over_n0 * gain.norm_sqr()
}

/// Circularly-symmetric complex Gaussian noise with per-sample variance `n0`.
pub fn awgn<R: Rng + ?Sized>(len: usize, n0: f64, rng: &mut R) -> Result<ComplexVec> {
    if !(n0 >= 0.0) {
        return Err(Error::invalid("n0", "noise variance must be non-negative"));
    }
    if n0 == 0.0 {
        return Ok(ComplexVec::zeros(len));
    }
    let s = (n0 / 2.0).sqrt();
    Ok((0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        })
        .collect::<Vec<_>>()
        .into())
}

/// Residual Doppler ramp: `r[m] · e^{j(phase0 + 2π f_d m / symbol_rate)}`.
pub fn apply_doppler(r: &[Complex64], f_d: f64, symbol_rate: f64, phase0: f64) -> Result<ComplexVec> {
    if !(symbol_rate > 0.0) {
        return Err(Error::invalid("symbol_rate", "must be positive"));
    }
    let step = 2.0 * PI * f_d / symbol_rate;
    Ok(r.iter()
        .enumerate()
        .map(|(m, &x)| x * Complex64::from_polar(1.0, phase0 + step * m as f64))
        .collect::<Vec<_>>()
        .into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn polar(r: f64, t: f64) -> Complex64 {
        Complex64::from_polar(r, t)
    }

    #[test]
    fn wrap_phase_range() {
        assert_abs_diff_eq!(wrap_phase(PI), -PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(-PI), -PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(PI / 2.0 + 3.0 * PI / 4.0), -3.0 * PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_phase(7.0 * PI), -PI, epsilon = 1e-12);
        for k in -50..50 {
            let y = wrap_phase(k as f64 * 0.37);
            assert!((-PI..PI).contains(&y));
        }
        assert!(wrap_phase(PI - 1e-17) < PI);
    }

    #[test]
    fn rician_pure_los_limit() {
        let p = RicianParams { k: 1e12, omega: 2.0, los_phase: 0.4 };
        for c in sample_rician(100, &p, &mut rng::stream(3)).iter() {
            assert_abs_diff_eq!(c.norm(), 2f64.sqrt(), epsilon = 1e-5);
            assert_abs_diff_eq!(c.arg(), 0.4, epsilon = 1e-5);
        }
    }

    #[test]
    fn rician_k0_is_complex_gaussian() {
        let n = 200_000;
        let v = sample_rician(n, &RicianParams::new(0.0), &mut rng::stream(4));
        let mean: Complex64 = v.iter().sum::<Complex64>() / n as f64;
        assert!(mean.norm() < 0.01);
        assert_abs_diff_eq!(v.energy() / n as f64, 1.0, epsilon = 0.01);
    }

    #[test]
    fn ris_phase_examples() {
        let (phi, zeros) = ris_phases_from_estimates(&[polar(1.0, PI / 3.0)], &[polar(2.0, PI / 6.0)]).unwrap();
        assert_abs_diff_eq!(phi.phi[0], PI / 2.0, epsilon = 1e-12);
        assert_eq!(zeros, 0);
        let (phi, _) = ris_phases_from_estimates(&[Complex64::new(0.3, 0.0)], &[Complex64::new(2.0, 0.0)]).unwrap();
        assert_eq!(phi.phi[0], 0.0);
        let (phi, _) = ris_phases_from_estimates(&[polar(1.0, PI / 2.0)], &[polar(1.0, 3.0 * PI / 4.0)]).unwrap();
        assert_abs_diff_eq!(phi.phi[0], -3.0 * PI / 4.0, epsilon = 1e-12);
        let (phi, zeros) =
            ris_phases_from_estimates(&[Complex64::new(0.0, 0.0)], &[polar(1.0, 0.5)]).unwrap();
        assert_eq!((zeros, phi.phi[0]), (1, 0.5));
        assert!(ris_phases_from_estimates(&[Complex64::new(1.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn cascaded_gain_examples() {
        let one = [Complex64::new(1.0, 0.0)];
        assert_eq!(cascaded_gain(&one, &one, &PhaseShiftMatrix::identity(1)).unwrap(), Complex64::new(1.0, 0.0));

        let mut r = rng::stream(9);
        let h: Vec<Complex64> = (0..16).map(|_| polar(1.0, uniform_phase(&mut r))).collect();
        let g: Vec<Complex64> = (0..16).map(|_| polar(1.0, uniform_phase(&mut r))).collect();
        let (phi, _) = ris_phases_from_estimates(&h, &g).unwrap();
        let c = cascaded_gain(&h, &g, &phi).unwrap();
        assert_abs_diff_eq!(c.re, 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-12);
        assert!(cascaded_gain(&h, &g[..3], &phi).is_err());
    }

    #[test]
    fn cascaded_gain_matches_diagonal_matrix_product() {
        // gᵀ Φ h with Φ = I, written out as an explicit N×N product.
        let (h, g) = ChannelModel::rician(10.0).sample(8, &mut rng::stream(11));
        let n = h.len();
        let mut phi_h = alloc::vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                let phi_ij = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                phi_h[i] += phi_ij * h[j];
            }
        }
        let direct: Complex64 = g.iter().zip(&phi_h).map(|(a, b)| a * b).sum();
        let c = cascaded_gain(&h, &g, &PhaseShiftMatrix::identity(n)).unwrap();
        assert_abs_diff_eq!((c - direct).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn effective_snr_examples() {
        let unit = LinkBudget::new(1.0).unwrap();
        assert_eq!(effective_snr(&unit, Complex64::new(0.0, 0.0)), 0.0);
        let snr = effective_snr(&unit, Complex64::new(16.0, 0.0));
        assert_eq!(snr, 256.0);
        assert_abs_diff_eq!(linear_to_db(snr), 24.08, epsilon = 0.01);
        let ratio = effective_snr(&unit, Complex64::new(32.0, 0.0)) / snr;
        assert_abs_diff_eq!(linear_to_db(ratio), 6.02, epsilon = 0.01);
        assert!(LinkBudget::new(0.0).is_err());
    }

    #[test]
    fn awgn_moments() {
        assert_eq!(awgn(4, 0.0, &mut rng::stream(0)).unwrap(), ComplexVec::zeros(4));
        let n = 1_000_000;
        let w = awgn(n, 2.0, &mut rng::stream(5)).unwrap();
        let var = w.energy() / n as f64;
        assert_abs_diff_eq!(var, 2.0, epsilon = 0.01);
        let cross = w.iter().map(|c| c.re * c.im).sum::<f64>() / n as f64;
        assert!(cross.abs() < 0.005, "cross {cross}");
        let mean: Complex64 = w.iter().sum::<Complex64>() / n as f64;
        let sigma = 1.0; // per-quadrature std for n0 = 2
        assert!(mean.re.abs() < 3.0 * sigma / (n as f64).sqrt());
        assert!(mean.im.abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn doppler_examples() {
        let r: Vec<Complex64> = (0..17).map(|m| polar(1.0 + m as f64, 0.1 * m as f64)).collect();
        assert_eq!(apply_doppler(&r, 0.0, 1e6, 0.0).unwrap().0, r);
        let full = apply_doppler(&r, 1e6, 1e6, 0.0).unwrap();
        for (a, b) in full.iter().zip(&r) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12 * b.norm().max(1.0) * 20.0);
        }
        let rot = apply_doppler(&r, 25e3, 1e6, 0.3).unwrap();
        let extra = wrap_phase((rot[16] / r[16]).arg() - 0.3);
        assert_abs_diff_eq!(extra, wrap_phase(2.0 * PI * 0.4), epsilon = 1e-12);
        assert!(apply_doppler(&r, 1.0, 0.0, 0.0).is_err());
    }
}
