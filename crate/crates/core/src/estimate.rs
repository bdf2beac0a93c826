//! Estimators and metrics: GAT output decoding, the LS cascaded baseline, NMSE, discrete
//! RIS phase sets and phase histograms.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{wrap_phase, ComplexVec};
use crate::dataset::{self, GraphSample};
use crate::gat::GatModel;
use crate::{Error, Result};

/// Decoded channel estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    /// Device → RIS estimate.
    pub h_hat: ComplexVec,
    /// RIS → receiver estimate.
    pub g_hat: ComplexVec,
    /// `Σ ĥ_i ĝ_i`, the cascaded gain at zero RIS phase.
    pub c_hat: Complex64,
}

impl EstimatorOutput {
    /// Decodes a `[Re h; Re g; Im h; Im g]` vector.
    pub fn from_label(y: &[f64]) -> Result<Self> {
        let (h_hat, g_hat) = dataset::decode_label(y)?;
        let c_hat = h_hat.iter().zip(g_hat.iter()).map(|(h, g)| h * g).sum();
        Ok(EstimatorOutput { h_hat, g_hat, c_hat })
    }
}

/// Runs the estimator in evaluation mode and decodes its output.
pub fn gat_estimate(model: &GatModel, sample: &GraphSample) -> Result<EstimatorOutput> {
    if model.dims.n_ris != sample.n_ris() {
        return Err(Error::Length { op: "gat_estimate", left: model.dims.n_ris, right: sample.n_ris() });
    }
    EstimatorOutput::from_label(&model.predict(sample.graph())?)
}

/// Least-squares fit of `r = √snr · c · s + w`: `ĉ = Σ s r / (√snr Σ s²)`.
pub fn ls_estimate_cascaded(r: &[Complex64], s: &[f64], snr_lin: f64) -> Result<Complex64> {
    if r.len() != s.len() {
        return Err(Error::Length { op: "ls_estimate_cascaded", left: r.len(), right: s.len() });
    }
    if !(snr_lin > 0.0) {
        return Err(Error::invalid("snr_lin", "must be positive"));
    }
    let energy: f64 = s.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(Error::invalid("pilot", "zero pilot energy"));
    }
    let matched: Complex64 = r.iter().zip(s).map(|(ri, &si)| ri * si).sum();
    Ok(matched / (snr_lin.sqrt() * energy))
}

/// Running sample-normalized MSE: mean of `‖est − truth‖² / ‖truth‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Nmse {
    sum: f64,
    count: usize,
    excluded: usize,
}

impl Nmse {
    /// Adds one real-vector pair. Zero-norm truths are skipped and counted.
    pub fn push(&mut self, est: &[f64], truth: &[f64]) -> Result<()> {
        if est.len() != truth.len() {
            return Err(Error::Length { op: "nmse", left: est.len(), right: truth.len() });
        }
        let norm: f64 = truth.iter().map(|t| t * t).sum();
        let err: f64 = est.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum();
        self.add(err, norm);
        Ok(())
    }

    /// Adds one complex scalar pair.
    pub fn push_complex(&mut self, est: Complex64, truth: Complex64) {
        self.add((est - truth).norm_sqr(), truth.norm_sqr());
    }

    fn add(&mut self, err: f64, norm: f64) {
        if norm == 0.0 {
            self.excluded += 1;
        } else {
            self.sum += err / norm;
            self.count += 1;
        }
    }

    /// Mean normalized error; `NaN` when nothing was accumulated.
    pub fn value(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    /// Pairs that contributed.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Pairs skipped for a zero-norm truth.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    /// Combines two accumulators.
    pub fn merge(&mut self, other: &Nmse) {
        self.sum += other.sum;
        self.count += other.count;
        self.excluded += other.excluded;
    }
}

/// NMSE over paired real vectors.
pub fn nmse<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> Result<Nmse> {
    let mut acc = Nmse::default();
    for (e, t) in pairs {
        acc.push(e, t)?;
    }
    if acc.count == 0 && acc.excluded == 0 {
        return Err(Error::invalid("nmse", "no samples"));
    }
    Ok(acc)
}

/// Discrete RIS phase-set families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseSetKind {
    /// `[-π, π)` with step `2π / 2^b`.
    Set1,
    /// `(-π, -π/2] ∪ [π/2, π)` with step `π / 2^b`.
    Set2,
    /// `[-π/2, π/2]` with step `π / 2^b`.
    Set3,
    /// No quantization.
    Continuous,
}

impl PhaseSetKind {
    /// Lower-case name used in reports and configs.
    pub fn name(self) -> &'static str {
        match self {
            PhaseSetKind::Set1 => "set1",
            PhaseSetKind::Set2 => "set2",
            PhaseSetKind::Set3 => "set3",
            PhaseSetKind::Continuous => "continuous",
        }
    }

    /// Inverse of [`PhaseSetKind::name`].
    pub fn from_name(s: &str) -> Option<Self> {
        [PhaseSetKind::Set1, PhaseSetKind::Set2, PhaseSetKind::Set3, PhaseSetKind::Continuous]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// A finite set of admissible RIS phases, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    /// Family.
    pub kind: PhaseSetKind,
    /// Resolution in bits (ignored for `Continuous`).
    pub n_bit: u32,
    /// Admissible phases; empty for `Continuous`.
    pub values: Vec<f64>,
}

impl PhaseSet {
    /// Builds the set of the given family and resolution.
    pub fn new(kind: PhaseSetKind, n_bit: u32) -> Result<Self> {
        if kind != PhaseSetKind::Continuous && !(1..=16).contains(&n_bit) {
            return Err(Error::invalid("n_bit", "must lie in 1..=16"));
        }
        let levels = 1usize << n_bit;
        let values = match kind {
            PhaseSetKind::Continuous => Vec::new(),
            PhaseSetKind::Set1 => {
                let step = 2.0 * PI / levels as f64;
                (0..levels).map(|k| -PI + k as f64 * step).collect()
            }
            PhaseSetKind::Set2 => {
                let step = PI / levels as f64;
                let half = levels / 2;
                let mut v: Vec<f64> = (0..half).rev().map(|k| -PI / 2.0 - k as f64 * step).collect();
                v.extend((0..half).map(|k| PI / 2.0 + k as f64 * step));
                v
            }
            PhaseSetKind::Set3 => {
                let step = PI / levels as f64;
                (0..=levels).map(|k| -PI / 2.0 + k as f64 * step).collect()
            }
        };
        Ok(PhaseSet { kind, n_bit, values })
    }

    /// Pass-through set.
    pub fn continuous() -> Self {
        PhaseSet { kind: PhaseSetKind::Continuous, n_bit: 0, values: Vec::new() }
    }

    /// Short label such as `set1-2bit` or `continuous`.
    pub fn label(&self) -> alloc::string::String {
        match self.kind {
            PhaseSetKind::Continuous => "continuous".into(),
            k => alloc::format!("{}-{}bit", k.name(), self.n_bit),
        }
    }
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Nearest admissible phase by circular distance; ties go to the lowest index.
pub fn quantize_phase(phi: f64, set: &PhaseSet) -> f64 {
    if set.kind == PhaseSetKind::Continuous || set.values.is_empty() {
        return phi;
    }
    let mut best = set.values[0];
    let mut best_dist = wrap_phase(best - phi).abs();
    for &v in &set.values[1..] {
        let d = wrap_phase(v - phi).abs();
        if d < best_dist - TIE_TOLERANCE {
            best = v;
            best_dist = d;
        }
    }
    best
}

/// Circular histogram over `[-π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistogram {
    /// Count per bin; bin `k` covers `[-π + kΔ, -π + (k+1)Δ)`.
    pub counts: Vec<u64>,
}

impl PhaseHistogram {
    /// Empty histogram with `bins ≥ 8` bins.
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 8 {
            return Err(Error::invalid("bins", "need at least 8 bins"));
        }
        Ok(PhaseHistogram { counts: alloc::vec![0; bins] })
    }

    /// Bin width.
    pub fn width(&self) -> f64 {
        2.0 * PI / self.counts.len() as f64
    }

    /// Lower edge of bin `k`.
    pub fn lower_edge(&self, k: usize) -> f64 {
        -PI + k as f64 * self.width()
    }

    /// Adds an angle (wrapped first).
    pub fn add(&mut self, angle: f64) {
        let bins = self.counts.len();
        let k = (((wrap_phase(angle) + PI) / self.width()).floor() as usize).min(bins - 1);
        self.counts[k] += 1;
    }

    /// Total count.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Normalized bin masses.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Total variation distance to another histogram with the same binning.
    pub fn total_variation(&self, other: &PhaseHistogram) -> Result<f64> {
        if self.counts.len() != other.counts.len() {
            return Err(Error::Length { op: "total_variation", left: self.counts.len(), right: other.counts.len() });
        }
        Ok(0.5 * self.frequencies().iter().zip(other.frequencies()).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

/// Per-element cascaded phases `∠(h_i g_i)`.
pub fn cascaded_phases<'a>(h: &'a [Complex64], g: &'a [Complex64]) -> impl Iterator<Item = f64> + 'a {
    h.iter().zip(g).map(|(a, b)| (a * b).arg())
}

/// `sin(π/2^b) / (π/2^b)`: mean of `cos ε` for `ε` uniform on `[-π/2^b, π/2^b]`.
pub fn uniform_quantization_efficiency(n_bit: u32) -> f64 {
    let half_step = PI / (1u64 << n_bit) as f64;
    half_step.sin() / half_step
}
