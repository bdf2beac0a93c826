//! One uplink frame end to end: channel draw, CSI acquisition, RIS configuration,
//! BPSK message transmission and coherent detection.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{self, ChannelModel, LinkBudget, PhaseShiftMatrix};
use crate::dataset;
use crate::estimate::{self, quantize_phase, PhaseSet};
use crate::gat::GatModel;
use crate::signaling::{self, PilotSequence};
use crate::{Error, Result};

/// Where the RIS controller gets its channel knowledge.
#[derive(Debug, Clone, Copy)]
pub enum CsiSource<'a> {
    /// The true `h`, `g`.
    Perfect,
    /// GAT estimates from the frame's received pilots.
    Gat(&'a GatModel),
}

impl CsiSource<'_> {
    /// `perfect` or `gat`.
    pub fn tag(&self) -> &'static str {
        match self {
            CsiSource::Perfect => "perfect",
            CsiSource::Gat(_) => "gat",
        }
    }
}

/// Static description of the simulated link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    /// RIS elements.
    pub n_ris: usize,
    /// Channel statistics.
    pub channel: ChannelModel,
    /// Admissible RIS phases.
    pub phase_set: PhaseSet,
    /// Uplink pilot block.
    pub pilot: PilotSequence,
    /// Message bits per frame.
    pub bits_per_frame: usize,
}

/// Counts from one or more frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCount {
    /// Bit errors.
    pub errors: u64,
    /// Bits sent.
    pub bits: u64,
    /// Elements whose estimated coefficient had zero magnitude.
    pub zero_phase_events: u64,
}

impl ErrorCount {
    /// Element-wise sum.
    pub fn merge(self, other: ErrorCount) -> ErrorCount {
        ErrorCount {
            errors: self.errors + other.errors,
            bits: self.bits + other.bits,
            zero_phase_events: self.zero_phase_events + other.zero_phase_events,
        }
    }

    /// Bit error rate (`NaN` before any bit).
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            f64::NAN
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// RIS phases for the frame's channel under the given CSI, after quantization.
pub fn configure_ris<R: Rng + ?Sized>(
    cfg: &LinkConfig,
    csi: CsiSource<'_>,
    h: &[Complex64],
    g: &[Complex64],
    budget: &LinkBudget,
    snr_db: f64,
    rng: &mut R,
) -> Result<(PhaseShiftMatrix, u64)> {
    let (phi, zeros) = match csi {
        CsiSource::Perfect => channel::ris_phases_from_estimates(h, g)?,
        CsiSource::Gat(model) => {
            let r = signaling::synthesize_pilot_rx(&cfg.pilot, h, g, budget, rng)?;
            let sample = dataset::encode_sample(&r, &cfg.pilot, h, g, snr_db)?;
            let est = estimate::gat_estimate(model, &sample)?;
            channel::ris_phases_from_estimates(&est.h_hat, &est.g_hat)?
        }
    };
    let quantized = PhaseShiftMatrix::from_phases(phi.phi.iter().map(|&p| quantize_phase(p, &cfg.phase_set)));
    Ok((quantized, zeros as u64))
}

/// Simulates one frame at `snr_db` and counts message bit errors.
///
/// Detection uses the true effective gain as the coherent reference.
pub fn simulate_frame<R: Rng + ?Sized>(cfg: &LinkConfig, csi: CsiSource<'_>, snr_db: f64, rng: &mut R) -> Result<ErrorCount> {
    if cfg.bits_per_frame == 0 {
        return Err(Error::invalid("bits_per_frame", "must be at least 1"));
    }
    let budget = LinkBudget::from_db(snr_db)?;
    let (h, g) = cfg.channel.sample(cfg.n_ris, rng);
    let (phi, zeros) = configure_ris(cfg, csi, &h, &g, &budget, snr_db, rng)?;
    let gain = channel::cascaded_gain(&h, &g, &phi)?;
    let bits: Vec<u8> = (0..cfg.bits_per_frame).map(|_| rng.random::<bool>() as u8).collect();
    let r = signaling::transmit(&signaling::bpsk_mod(&bits), gain, &budget, 1.0, rng)?;
    let errors = if gain.norm_sqr() == 0.0 {
        bits.len() as u64 / 2
    } else {
        let decided = signaling::bpsk_demod_coherent(&r, gain)?;
        decided.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64
    };
    Ok(ErrorCount { errors, bits: bits.len() as u64, zero_phase_events: zeros })
}
