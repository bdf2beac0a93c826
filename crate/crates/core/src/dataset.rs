//! Graph encoding of pilot observations and corpus generation.
//!
//! A sample is a two-node graph: node 0 carries `Re r`, node 1 carries `Im r`, a single
//! undirected edge joins them and carries the pilot symbols. The label packs the true
//! coefficients as `[Re h; Re g; Im h; Im g]`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

use crate::channel::{self, ChannelModel, ComplexVec, LinkBudget};
use crate::gat::{EdgeFeatures, Graph};
use crate::matrix::Matrix;
use crate::rng;
use crate::signaling::{self, LfsrConfig, PilotSequence};
use crate::{Error, Result};

/// One encoded pilot observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    /// `2 × M_p`: real parts then imaginary parts of the received pilots.
    pub x: Matrix,
    /// `[[0, 1], [1, 0]]`.
    pub adjacency: Matrix,
    /// `2 × 2 × M_p`: pilot symbols on the off-diagonal edges, zeros on the diagonal.
    pub edges: EdgeFeatures,
    /// `4N` label `[Re h; Re g; Im h; Im g]`.
    pub label: Vec<f64>,
    /// SNR tag in dB.
    pub snr_db: f64,
    /// True device→RIS coefficients.
    pub h: ComplexVec,
    /// True RIS→receiver coefficients.
    pub g: ComplexVec,
}

impl GraphSample {
    /// Graph view for the estimator.
    pub fn graph(&self) -> Graph<'_> {
        Graph { nodes: &self.x, adjacency: &self.adjacency, edges: &self.edges }
    }

    /// Number of RIS elements.
    pub fn n_ris(&self) -> usize {
        self.h.len()
    }

    /// Received pilots reconstructed from `x`.
    pub fn received(&self) -> ComplexVec {
        ComplexVec::from_parts(self.x.row(0), self.x.row(1)).expect("two equal rows")
    }

    /// Pilot symbols recovered from the `(0, 1)` edge.
    pub fn pilot_symbols(&self) -> &[f64] {
        self.edges.get(0, 1)
    }

    /// True cascaded gain with every element at zero phase.
    pub fn cascaded_truth(&self) -> Complex64 {
        self.h.iter().zip(self.g.iter()).map(|(h, g)| h * g).sum()
    }
}

/// The fixed two-node adjacency `[[0, 1], [1, 0]]`.
pub fn pair_adjacency() -> Matrix {
    Matrix::from_vec(2, 2, alloc::vec![0.0, 1.0, 1.0, 0.0]).expect("2x2")
}

/// `[Re h; Re g; Im h; Im g]`.
pub fn encode_label(h: &[Complex64], g: &[Complex64]) -> Result<Vec<f64>> {
    if h.len() != g.len() {
        return Err(Error::Length { op: "encode_label", left: h.len(), right: g.len() });
    }
    let mut y = Vec::with_capacity(4 * h.len());
    y.extend(h.iter().map(|c| c.re));
    y.extend(g.iter().map(|c| c.re));
    y.extend(h.iter().map(|c| c.im));
    y.extend(g.iter().map(|c| c.im));
    Ok(y)
}

/// Inverse of [`encode_label`].
pub fn decode_label(y: &[f64]) -> Result<(ComplexVec, ComplexVec)> {
    if !y.len().is_multiple_of(4) {
        return Err(Error::invalid("label", "length must be a multiple of 4"));
    }
    let n = y.len() / 4;
    let h = ComplexVec::from_parts(&y[..n], &y[2 * n..3 * n])?;
    let g = ComplexVec::from_parts(&y[n..2 * n], &y[3 * n..])?;
    Ok((h, g))
}

/// Builds the graph sample for received pilots `r`.
pub fn encode_sample(r: &[Complex64], s: &PilotSequence, h: &[Complex64], g: &[Complex64], snr_db: f64) -> Result<GraphSample> {
    if r.len() != s.len() {
        return Err(Error::Length { op: "encode_sample", left: r.len(), right: s.len() });
    }
    let m_p = r.len();
    let mut x = Matrix::zeros(2, m_p);
    for (m, c) in r.iter().enumerate() {
        x[(0, m)] = c.re;
        x[(1, m)] = c.im;
    }
    let mut edges = EdgeFeatures::zeros(2, m_p);
    edges.get_mut(0, 1).copy_from_slice(&s.symbols);
    edges.get_mut(1, 0).copy_from_slice(&s.symbols);
    Ok(GraphSample {
        x,
        adjacency: pair_adjacency(),
        edges,
        label: encode_label(h, g)?,
        snr_db,
        h: ComplexVec(h.to_vec()),
        g: ComplexVec(g.to_vec()),
    })
}

/// Inclusive SNR range `start:step:stop` in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    /// First point.
    pub start_db: f64,
    /// Increment, positive.
    pub step_db: f64,
    /// Last point (included when reached exactly).
    pub stop_db: f64,
}

impl SnrGrid {
    /// `start:step:stop`.
    pub fn new(start_db: f64, step_db: f64, stop_db: f64) -> Self {
        SnrGrid { start_db, step_db, stop_db }
    }

    /// Single point.
    pub fn single(db: f64) -> Self {
        SnrGrid { start_db: db, step_db: 1.0, stop_db: db }
    }

    /// Grid points in increasing order.
    pub fn points(&self) -> Vec<f64> {
        if !(self.step_db > 0.0) || self.stop_db < self.start_db {
            return Vec::new();
        }
        let count = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.start_db + k as f64 * self.step_db).collect()
    }
}

/// Residual Doppler impairment applied to the received pilots before encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerSpec {
    /// Residual frequency offset, Hz.
    pub f_d: f64,
    /// Symbol rate, Hz.
    pub symbol_rate: f64,
    /// Draw the initial phase uniformly per frame (otherwise 0).
    pub random_phase0: bool,
}

/// Everything needed to regenerate a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    /// RIS elements `N`.
    pub n_ris: usize,
    /// Pilot length `M_p`.
    pub m_p: usize,
    /// Channel statistics.
    pub channel: ChannelModel,
    /// SNR levels.
    pub snrs: SnrGrid,
    /// Samples drawn at each SNR level.
    pub samples_per_snr: usize,
    /// Pilot generator.
    pub lfsr: LfsrConfig,
    /// Optional residual Doppler.
    pub doppler: Option<DopplerSpec>,
    /// Master seed.
    pub seed: u64,
}

impl DatasetSpec {
    /// Training corpus: K = 10, SNR −30:2:0 dB, 1000 samples per level.
    pub fn training(n_ris: usize, seed: u64) -> Self {
        DatasetSpec {
            n_ris,
            m_p: 16,
            channel: ChannelModel::rician(10.0),
            snrs: SnrGrid::new(-30.0, 2.0, 0.0),
            samples_per_snr: 1000,
            lfsr: LfsrConfig::default(),
            doppler: None,
            seed,
        }
    }

    /// Test corpus: K = 10, SNR −30:2:10 dB, 500 samples per level.
    pub fn test(n_ris: usize, seed: u64) -> Self {
        DatasetSpec { snrs: SnrGrid::new(-30.0, 2.0, 10.0), samples_per_snr: 500, ..Self::training(n_ris, seed) }
    }

    /// Checks parameter domains.
    pub fn validate(&self) -> Result<()> {
        if self.n_ris == 0 || self.m_p == 0 || self.samples_per_snr == 0 {
            return Err(Error::invalid("dataset", "n_ris, m_p and samples_per_snr must be positive"));
        }
        if self.snrs.points().is_empty() {
            return Err(Error::invalid("snrs", "grid is empty"));
        }
        self.channel.validate()
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.snrs.points().len() * self.samples_per_snr
    }

    /// True when the spec describes no samples.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const DOPPLER_STREAM: u64 = 0xd0_99_1e;

/// Draws sample `index` of SNR level `level`; a pure function of `(spec, level, index)`.
pub fn generate_sample(spec: &DatasetSpec, pilot: &PilotSequence, level: usize, snr_db: f64, index: usize) -> Result<GraphSample> {
    let mut stream = rng::substream(spec.seed, &[level as u64, index as u64]);
    let (h, g) = spec.channel.sample(spec.n_ris, &mut stream);
    let budget = LinkBudget::from_db(snr_db)?;
    let mut r = signaling::synthesize_pilot_rx(pilot, &h, &g, &budget, &mut stream)?;
    if let Some(d) = spec.doppler.filter(|d| d.f_d != 0.0) {
        let phase0 = if d.random_phase0 {
            channel::uniform_phase(&mut rng::substream(spec.seed, &[level as u64, index as u64, DOPPLER_STREAM]))
        } else {
            0.0
        };
        r = channel::apply_doppler(&r, d.f_d, d.symbol_rate, phase0)?;
    }
    encode_sample(&r, pilot, &h, &g, snr_db)
}

/// Generates the whole corpus in `(SNR level, sample index)` order.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<GraphSample>> {
    spec.validate()?;
    let pilot = PilotSequence::from_lfsr(&spec.lfsr, spec.m_p)?;
    let mut out = Vec::with_capacity(spec.len());
    for (level, snr) in spec.snrs.points().into_iter().enumerate() {
        for i in 0..spec.samples_per_snr {
            out.push(generate_sample(spec, &pilot, level, snr, i)?);
        }
    }
    Ok(out)
}

/// Stratified split: within every SNR level, `ratio` of the samples (rounded down) go to
/// validation, the rest to training. Selection within a level is a seeded shuffle.
pub fn split_train_val(samples: &[GraphSample], ratio: f64, seed: u64) -> Result<(Vec<GraphSample>, Vec<GraphSample>)> {
    use rand::seq::SliceRandom;
    if samples.is_empty() {
        return Err(Error::invalid("dataset", "cannot split an empty dataset"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("ratio", "must lie in (0, 1)"));
    }
    let mut levels: Vec<f64> = Vec::new();
    for s in samples {
        if !levels.iter().any(|&l| l.to_bits() == s.snr_db.to_bits()) {
            levels.push(s.snr_db);
        }
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (k, level) in levels.iter().enumerate() {
        let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].snr_db.to_bits() == level.to_bits()).collect();
        idx.shuffle(&mut rng::substream(seed, &[k as u64]));
        let n_val = (idx.len() as f64 * ratio + 1e-9).floor() as usize;
        let (v, t) = idx.split_at(n_val);
        let mut t = t.to_vec();
        let mut v = v.to_vec();
        t.sort_unstable();
        v.sort_unstable();
        train.extend(t.into_iter().map(|i| samples[i].clone()));
        val.extend(v.into_iter().map(|i| samples[i].clone()));
    }
    Ok((train, val))
}

/// Sample-normalized residual power `|r − √snr · c · s|²/M_p`, for noise calibration checks.
pub fn residual_noise_power(sample: &GraphSample) -> f64 {
    let amp = channel::db_to_linear(sample.snr_db).sqrt();
    let c = sample.cascaded_truth();
    let r = sample.received();
    r.iter()
        .zip(sample.pilot_symbols())
        .map(|(ri, &s)| (ri - c * (amp * s)).norm_sqr())
        .sum::<f64>()
        / r.len() as f64
}
