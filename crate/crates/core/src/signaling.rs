//! PN pilots, BPSK and TDD framing.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{self, ComplexVec, LinkBudget, PhaseShiftMatrix};
use crate::{Error, Result};

/// Fibonacci LFSR over GF(2) with a degree-4 generator polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LfsrConfig {
    /// Generator polynomial, bit `k` = coefficient of `x^k`. `0b1_0101` is `x⁴ + x² + 1`.
    pub poly: u8,
    /// Initial register, bit `k` holds the `k`-th output. Must be nonzero.
    pub seed: u8,
}

impl Default for LfsrConfig {
    fn default() -> Self {
        LfsrConfig { poly: 0b1_0101, seed: 0b0001 }
    }
}

impl LfsrConfig {
    fn validate(&self) -> Result<()> {
        if self.poly & 0b1_0000 == 0 || self.poly & !0b1_1111 != 0 || self.poly & 1 == 0 {
            return Err(Error::invalid("poly", "must be a degree-4 polynomial with a constant term"));
        }
        if self.seed & 0x0f == 0 || self.seed & !0x0f != 0 {
            return Err(Error::invalid("seed", "must be a nonzero 4-bit state"));
        }
        Ok(())
    }
}

/// First `n` output bits of the LFSR.
///
/// The register holds `(a_k, …, a_{k+3})` in bits 0..3; each step emits bit 0 and shifts in
/// `a_{k+4} = Σ_{i<4} c_i a_{k+i}`.
pub fn lfsr_bits(cfg: &LfsrConfig, n: usize) -> Result<Vec<u8>> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let taps = cfg.poly & 0x0f;
    let mut reg = cfg.seed;
    Ok((0..n)
        .map(|_| {
            let out = reg & 1;
            let feedback = ((reg & taps).count_ones() & 1) as u8;
            reg = (reg >> 1) | (feedback << 3);
            out
        })
        .collect())
}

/// BPSK mapping `0 → +1`, `1 → −1`.
pub fn bpsk_mod(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Coherent hard decision: `0` when `Re(r · conj(gain_ref)) ≥ 0`.
pub fn bpsk_demod_coherent(r: &[Complex64], gain_ref: Complex64) -> Result<Vec<u8>> {
    if gain_ref.norm_sqr() == 0.0 {
        return Err(Error::invalid("gain_ref", "reference gain must be nonzero"));
    }
    let reference = gain_ref.conj();
    Ok(r.iter().map(|x| if (x * reference).re >= 0.0 { 0 } else { 1 }).collect())
}

/// Pilot bits and their BPSK symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSequence {
    /// PN bits.
    pub bits: Vec<u8>,
    /// `bpsk_mod(bits)`.
    pub symbols: Vec<f64>,
}

impl PilotSequence {
    /// The first `m_p` LFSR outputs.
    pub fn from_lfsr(cfg: &LfsrConfig, m_p: usize) -> Result<Self> {
        Ok(Self::from_bits(lfsr_bits(cfg, m_p)?))
    }

    /// Pilot from explicit bits.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        let symbols = bpsk_mod(&bits);
        PilotSequence { bits, symbols }
    }

    /// Pilot length `M_p`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// True for an empty pilot.
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `‖s‖²`.
    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(|s| s * s).sum()
    }
}

/// `r[m] = √budget · gain · x[m] + w[m]`, `w ∼ CN(0, n0)`.
pub fn transmit<R: Rng + ?Sized>(
    symbols: &[f64],
    gain: Complex64,
    budget: &LinkBudget,
    n0: f64,
    rng: &mut R,
) -> Result<ComplexVec> {
    let amp = budget.pt_xi_over_n0.sqrt();
    let mut r = channel::awgn(symbols.len(), n0, rng)?;
    for (ri, &x) in r.iter_mut().zip(symbols) {
        *ri += gain * (amp * x);
    }
    Ok(r)
}

/// Received pilot block with every RIS element at zero phase (`Φ = I`) and unit-variance noise.
pub fn synthesize_pilot_rx<R: Rng + ?Sized>(
    s: &PilotSequence,
    h: &[Complex64],
    g: &[Complex64],
    budget: &LinkBudget,
    rng: &mut R,
) -> Result<ComplexVec> {
    let c = channel::cascaded_gain(h, g, &PhaseShiftMatrix::identity(h.len()))?;
    transmit(&s.symbols, c, budget, 1.0, rng)
}

/// Subframe lengths of one TDD frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TddFrame {
    /// Uplink pilot symbols.
    pub m_p: usize,
    /// Uplink message symbols.
    pub m_u: usize,
    /// Downlink message symbols.
    pub m_d: usize,
    /// Zero symbols after each subframe.
    pub guard: usize,
}

impl Default for TddFrame {
    fn default() -> Self {
        TddFrame { m_p: 16, m_u: 64, m_d: 64, guard: 0 }
    }
}

/// Payload of a parsed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameParts {
    /// Pilot symbols.
    pub pilot: Vec<f64>,
    /// Uplink message bits.
    pub uplink: Vec<u8>,
    /// Downlink message bits.
    pub downlink: Vec<u8>,
}

impl TddFrame {
    /// Symbols per frame, guards included.
    pub fn len(&self) -> usize {
        self.m_p + self.m_u + self.m_d + 3 * self.guard
    }

    /// True when the frame carries no symbols at all.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[pilot | guard | uplink | guard | downlink | guard]` as BPSK symbols.
    pub fn build(&self, pilot: &[f64], ul_bits: &[u8], dl_bits: &[u8]) -> Result<Vec<f64>> {
        for (name, have, want) in [("pilot", pilot.len(), self.m_p), ("uplink", ul_bits.len(), self.m_u), ("downlink", dl_bits.len(), self.m_d)] {
            if have != want {
                return Err(Error::Length { op: name, left: have, right: want });
            }
        }
        let guard = core::iter::repeat_n(0.0, self.guard);
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(pilot);
        out.extend(guard.clone());
        out.extend(bpsk_mod(ul_bits));
        out.extend(guard.clone());
        out.extend(bpsk_mod(dl_bits));
        out.extend(guard);
        Ok(out)
    }

    /// Inverse of [`TddFrame::build`] on a noiseless symbol stream.
    pub fn parse(&self, stream: &[f64]) -> Result<FrameParts> {
        if stream.len() != self.len() {
            return Err(Error::Length { op: "parse_frame", left: stream.len(), right: self.len() });
        }
        let bits = |s: &[f64]| s.iter().map(|&x| if x >= 0.0 { 0 } else { 1 }).collect::<Vec<u8>>();
        let ul_start = self.m_p + self.guard;
        let dl_start = ul_start + self.m_u + self.guard;
        Ok(FrameParts {
            pilot: stream[..self.m_p].to_vec(),
            uplink: bits(&stream[ul_start..ul_start + self.m_u]),
            downlink: bits(&stream[dl_start..dl_start + self.m_d]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lfsr_rejects_bad_config() {
        assert!(lfsr_bits(&LfsrConfig { seed: 0, ..Default::default() }, 4).is_err());
        assert!(lfsr_bits(&LfsrConfig { poly: 0b0101, ..Default::default() }, 4).is_err());
        assert!(lfsr_bits(&LfsrConfig::default(), 0).is_err());
        let cfg = LfsrConfig::default();
        assert_eq!(lfsr_bits(&cfg, 16).unwrap(), lfsr_bits(&cfg, 16).unwrap());
    }

    #[test]
    fn bpsk_examples() {
        assert_eq!(bpsk_mod(&[0, 1, 0]), vec![1.0, -1.0, 1.0]);
        assert!(bpsk_mod(&[0, 1]).iter().all(|s| s * s == 1.0));
        let bits = [1, 0, 0, 1, 1];
        let r: Vec<Complex64> = bpsk_mod(&bits).iter().map(|&s| Complex64::new(s, 0.0)).collect();
        assert_eq!(bpsk_demod_coherent(&r, Complex64::new(1.0, 0.0)).unwrap(), bits);
    }

    #[test]
    fn demod_tracks_gain_reference() {
        let gain = Complex64::from_polar(2.0, 1.1);
        let bits = [0u8, 1, 1, 0, 1];
        let budget = LinkBudget::new(3.0).unwrap();
        let r = transmit(&bpsk_mod(&bits), gain, &budget, 0.0, &mut rng::stream(0)).unwrap();
        assert_eq!(bpsk_demod_coherent(&r, gain).unwrap(), bits);
        let flipped: Vec<u8> = bits.iter().map(|b| 1 - b).collect();
        assert_eq!(bpsk_demod_coherent(&r, -gain).unwrap(), flipped);
        assert!(bpsk_demod_coherent(&r, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn pilot_energy_and_noiseless_rx() {
        let s = PilotSequence::from_lfsr(&LfsrConfig::default(), 16).unwrap();
        assert_eq!(s.energy(), 16.0);
        let one = [Complex64::new(1.0, 0.0)];
        let budget = LinkBudget::new(4.0).unwrap();
        let c = channel::cascaded_gain(&one, &one, &PhaseShiftMatrix::identity(1)).unwrap();
        let r = transmit(&s.symbols, c, &budget, 0.0, &mut rng::stream(0)).unwrap();
        for (ri, si) in r.iter().zip(&s.symbols) {
            assert_eq!(*ri, Complex64::new(2.0 * si, 0.0));
        }
    }

    #[test]
    fn pilot_rx_averages_to_scaled_gain() {
        let s = PilotSequence::from_bits(vec![0; 20_000]);
        let h = [Complex64::new(0.6, 0.2), Complex64::new(-0.1, 0.9)];
        let g = [Complex64::new(1.1, -0.3), Complex64::new(0.4, 0.4)];
        let budget = LinkBudget::new(2.0).unwrap();
        let r = synthesize_pilot_rx(&s, &h, &g, &budget, &mut rng::stream(1)).unwrap();
        let c = h[0] * g[0] + h[1] * g[1];
        let mean: Complex64 = r.iter().sum::<Complex64>() / r.len() as f64;
        let expected = c * 2f64.sqrt();
        assert!((mean - expected).norm() < 4.0 / (r.len() as f64).sqrt() * 3.0);
        let again = synthesize_pilot_rx(&s, &h, &g, &budget, &mut rng::stream(1)).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn frame_round_trip_and_length() {
        let frame = TddFrame { m_p: 4, m_u: 3, m_d: 2, guard: 2 };
        let pilot = bpsk_mod(&[0, 1, 1, 0]);
        let stream = frame.build(&pilot, &[1, 0, 1], &[0, 1]).unwrap();
        assert_eq!(stream.len(), 4 + 3 + 2 + 3 * 2);
        assert_eq!(&stream[4..6], &[0.0, 0.0]);
        let parts = frame.parse(&stream).unwrap();
        assert_eq!(parts, FrameParts { pilot, uplink: vec![1, 0, 1], downlink: vec![0, 1] });

        let plain = TddFrame { guard: 0, ..frame };
        let s = plain.build(&[1.0; 4], &[0, 0, 0], &[1, 1]).unwrap();
        assert_eq!(s, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0]);
        assert!(plain.build(&[1.0; 3], &[0, 0, 0], &[1, 1]).is_err());
        assert!(plain.parse(&s[1..]).is_err());
        assert_abs_diff_eq!(TddFrame::default().len() as f64, 144.0);
    }
}
