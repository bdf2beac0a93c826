//! Run configuration: a flat `key = value` document with `dataset.*`, `train.*` and `eval.*`
//! sections, `#` comments and command-line overrides.
//!
//! [`RunConfig::to_text`] writes every key, so a saved copy reproduces the run on its own.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use risgat_core::channel::{ChannelModel, FadingModel, RicianParams};
use risgat_core::dataset::{DatasetSpec, DopplerSpec, SnrGrid};
use risgat_core::estimate::PhaseSetKind;
use risgat_core::rng;
use risgat_core::signaling::LfsrConfig;
use risgat_core::train::TrainConfig;

use crate::{Error, Result};

/// Corpus parameters shared by the training and test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    /// RIS elements.
    pub n_ris: usize,
    /// Pilot length.
    pub m_p: usize,
    /// Rician shape of both hops.
    pub k_factor: f64,
    /// Mean power of each coefficient.
    pub omega: f64,
    /// LOS phase of both hops, radians.
    pub los_phase: f64,
    /// Coefficient construction.
    pub fading: FadingModel,
    /// Training SNR grid.
    pub train_snr: SnrGrid,
    /// Test SNR grid.
    pub test_snr: SnrGrid,
    /// Training samples per SNR level.
    pub train_per_snr: usize,
    /// Test samples per SNR level.
    pub test_per_snr: usize,
    /// Pilot generator.
    pub lfsr: LfsrConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_ris: 16,
            m_p: 16,
            k_factor: 10.0,
            omega: 1.0,
            los_phase: 0.0,
            fading: FadingModel::Rician,
            train_snr: SnrGrid::new(-30.0, 2.0, 0.0),
            test_snr: SnrGrid::new(-30.0, 2.0, 10.0),
            train_per_snr: 1000,
            test_per_snr: 500,
            lfsr: LfsrConfig::default(),
        }
    }
}

impl DatasetConfig {
    /// Channel statistics.
    pub fn channel(&self) -> ChannelModel {
        let hop = RicianParams { k: self.k_factor, omega: self.omega, los_phase: self.los_phase };
        ChannelModel { fading: self.fading, h: hop, g: hop }
    }

    fn spec(&self, snrs: SnrGrid, per_snr: usize, seed: u64) -> DatasetSpec {
        DatasetSpec {
            n_ris: self.n_ris,
            m_p: self.m_p,
            channel: self.channel(),
            snrs,
            samples_per_snr: per_snr,
            lfsr: self.lfsr,
            doppler: None,
            seed,
        }
    }
}

/// Experiment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Estimator for the BER experiments: `perfect` or `gat`.
    pub estimator: Estimator,
    /// SNR grid of the BER experiments.
    pub ber_snr: SnrGrid,
    /// RIS sizes of the BER-vs-N experiment.
    pub ber_n_ris: Vec<usize>,
    /// Message bits per simulated frame.
    pub bits_per_frame: usize,
    /// Stop a BER point after this many errors.
    pub min_errors: u64,
    /// Stop a BER point after this many bits.
    pub max_bits: u64,
    /// Models trained for the confidence band.
    pub band_models: usize,
    /// Residual Doppler offsets, Hz.
    pub doppler_hz: Vec<f64>,
    /// Symbol rate, Hz.
    pub symbol_rate: f64,
    /// Draw the Doppler start phase per frame.
    pub doppler_random_phase0: bool,
    /// RIS size of the quantization experiments.
    pub quant_n_ris: usize,
    /// LOS phase of both hops in the quantization experiments.
    pub quant_los_phase: f64,
    /// SNR grid of the quantization experiments.
    pub quant_snr: SnrGrid,
    /// Phase resolutions of the quantization experiments.
    pub quant_bits: Vec<u32>,
    /// Phase sets of the set comparison.
    pub quant_sets: Vec<PhaseSetKind>,
    /// Histogram bins.
    pub hist_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            estimator: Estimator::Perfect,
            ber_snr: SnrGrid::new(-40.0, 2.0, -10.0),
            ber_n_ris: vec![16, 32, 64],
            bits_per_frame: 64,
            min_errors: 100,
            max_bits: 10_000_000,
            band_models: 5,
            doppler_hz: vec![0.0, 5e3, 15e3, 25e3],
            symbol_rate: 1e6,
            doppler_random_phase0: true,
            quant_n_ris: 32,
            quant_los_phase: FRAC_PI_2,
            quant_snr: SnrGrid::new(-30.0, 2.0, -20.0),
            quant_bits: vec![1, 2, 3],
            quant_sets: vec![PhaseSetKind::Set1, PhaseSetKind::Set2, PhaseSetKind::Set3],
            hist_bins: 64,
        }
    }
}

/// CSI used by the RIS controller in BER experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Genie channel knowledge.
    Perfect,
    /// Trained estimator.
    Gat,
}

impl Estimator {
    /// Config spelling.
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Perfect => "perfect",
            Estimator::Gat => "gat",
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Master seed; every stream of the run is derived from it.
    pub seed: u64,
    /// Run directory.
    pub output_dir: PathBuf,
    /// Corpus parameters.
    pub dataset: DatasetConfig,
    /// Training hyperparameters (`seed` there is derived, not read).
    pub train: TrainConfig,
    /// Experiment parameters.
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("run"),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

const TRAIN_SALT: u64 = 1;
const TEST_SALT: u64 = 2;
const INIT_SALT: u64 = 3;
const FIT_SALT: u64 = 4;
const SPLIT_SALT: u64 = 5;
/// Salt of BER and other Monte Carlo experiments.
pub const EVAL_SALT: u64 = 6;

impl RunConfig {
    /// Training corpus spec.
    pub fn train_spec(&self) -> DatasetSpec {
        let d = &self.dataset;
        d.spec(d.train_snr, d.train_per_snr, rng::derive_seed(self.seed, TRAIN_SALT))
    }

    /// Test corpus spec.
    pub fn test_spec(&self) -> DatasetSpec {
        let d = &self.dataset;
        d.spec(d.test_snr, d.test_per_snr, rng::derive_seed(self.seed, TEST_SALT))
    }

    /// Test corpus with residual Doppler `f_d`.
    pub fn doppler_test_spec(&self, f_d: f64) -> DatasetSpec {
        DatasetSpec {
            doppler: Some(DopplerSpec {
                f_d,
                symbol_rate: self.eval.symbol_rate,
                random_phase0: self.eval.doppler_random_phase0,
            }),
            ..self.test_spec()
        }
    }

    /// Training settings of model `replica` (0 for the main model).
    pub fn train_config(&self, replica: u64) -> TrainConfig {
        TrainConfig { seed: rng::derive_seed(self.seed, FIT_SALT + 100 * replica), ..self.train }
    }

    /// Weight initialization seed of model `replica`.
    pub fn init_seed(&self, replica: u64) -> u64 {
        rng::derive_seed(self.seed, INIT_SALT + 100 * replica)
    }

    /// Seed of the stratified train/validation split.
    pub fn split_seed(&self) -> u64 {
        rng::derive_seed(self.seed, SPLIT_SALT)
    }

    /// Seed of the Monte Carlo experiments.
    pub fn eval_seed(&self) -> u64 {
        rng::derive_seed(self.seed, EVAL_SALT)
    }

    /// Parses a config document on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides, in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.dataset;
        let t = &mut self.train;
        let e = &mut self.eval;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "dataset.n_ris" => d.n_ris = parse(key, value)?,
            "dataset.m_p" => d.m_p = parse(key, value)?,
            "dataset.k_factor" => d.k_factor = parse(key, value)?,
            "dataset.omega" => d.omega = parse(key, value)?,
            "dataset.los_phase" => d.los_phase = parse(key, value)?,
            "dataset.fading" => d.fading = parse_fading(value)?,
            "dataset.train_snr" => d.train_snr = parse_grid(key, value)?,
            "dataset.test_snr" => d.test_snr = parse_grid(key, value)?,
            "dataset.train_per_snr" => d.train_per_snr = parse(key, value)?,
            "dataset.test_per_snr" => d.test_per_snr = parse(key, value)?,
            "dataset.lfsr_poly" => d.lfsr.poly = parse_bits(key, value)?,
            "dataset.lfsr_seed" => d.lfsr.seed = parse_bits(key, value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.patience" => t.patience = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.lr" => t.lr = parse(key, value)?,
            "train.l2" => t.l2 = parse(key, value)?,
            "train.dropout" => t.dropout_rate = parse(key, value)?,
            "train.val_ratio" => t.val_ratio = parse(key, value)?,
            "eval.estimator" => {
                e.estimator = match value {
                    "perfect" => Estimator::Perfect,
                    "gat" => Estimator::Gat,
                    _ => return Err(Error::Config(format!("{key}: expected perfect or gat, got `{value}`"))),
                }
            }
            "eval.ber_snr" => e.ber_snr = parse_grid(key, value)?,
            "eval.ber_n_ris" => e.ber_n_ris = parse_list(key, value)?,
            "eval.bits_per_frame" => e.bits_per_frame = parse(key, value)?,
            "eval.min_errors" => e.min_errors = parse(key, value)?,
            "eval.max_bits" => e.max_bits = parse_count(key, value)?,
            "eval.band_models" => e.band_models = parse(key, value)?,
            "eval.doppler_hz" => e.doppler_hz = parse_list(key, value)?,
            "eval.symbol_rate" => e.symbol_rate = parse(key, value)?,
            "eval.doppler_random_phase0" => e.doppler_random_phase0 = parse(key, value)?,
            "eval.quant_n_ris" => e.quant_n_ris = parse(key, value)?,
            "eval.quant_los_phase" => e.quant_los_phase = parse(key, value)?,
            "eval.quant_snr" => e.quant_snr = parse_grid(key, value)?,
            "eval.quant_bits" => e.quant_bits = parse_list(key, value)?,
            "eval.quant_sets" => {
                e.quant_sets = value
                    .split(',')
                    .map(|s| {
                        PhaseSetKind::from_name(s.trim())
                            .ok_or_else(|| Error::Config(format!("{key}: unknown phase set `{}`", s.trim())))
                    })
                    .collect::<Result<_>>()?
            }
            "eval.hist_bins" => e.hist_bins = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train_spec().validate().map_err(|e| Error::Config(format!("dataset: {e}")))?;
        self.test_spec().validate().map_err(|e| Error::Config(format!("dataset: {e}")))?;
        let e = &self.eval;
        if e.bits_per_frame == 0 || e.min_errors == 0 || e.max_bits == 0 {
            return fail("eval.bits_per_frame, eval.min_errors and eval.max_bits must be positive".into());
        }
        if e.ber_snr.points().is_empty() || e.quant_snr.points().is_empty() {
            return fail("eval SNR grids must be non-empty".into());
        }
        if e.ber_n_ris.is_empty() || e.ber_n_ris.contains(&0) || e.quant_n_ris == 0 {
            return fail("RIS sizes must be positive".into());
        }
        if e.band_models == 0 {
            return fail("eval.band_models must be at least 1".into());
        }
        if e.symbol_rate.is_nan() || e.symbol_rate <= 0.0 {
            return fail("eval.symbol_rate must be positive".into());
        }
        if e.quant_bits.iter().any(|b| !(1..=16).contains(b)) {
            return fail("eval.quant_bits must lie in 1..=16".into());
        }
        if e.hist_bins < 8 {
            return fail("eval.hist_bins must be at least 8".into());
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order.
    pub fn pairs(&self) -> BTreeMap<&'static str, String> {
        let d = &self.dataset;
        let t = &self.train;
        let e = &self.eval;
        BTreeMap::from([
            ("seed", self.seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("dataset.n_ris", d.n_ris.to_string()),
            ("dataset.m_p", d.m_p.to_string()),
            ("dataset.k_factor", fmt_f64(d.k_factor)),
            ("dataset.omega", fmt_f64(d.omega)),
            ("dataset.los_phase", fmt_f64(d.los_phase)),
            ("dataset.fading", fading_name(d.fading).into()),
            ("dataset.train_snr", fmt_grid(&d.train_snr)),
            ("dataset.test_snr", fmt_grid(&d.test_snr)),
            ("dataset.train_per_snr", d.train_per_snr.to_string()),
            ("dataset.test_per_snr", d.test_per_snr.to_string()),
            ("dataset.lfsr_poly", format!("0b{:b}", d.lfsr.poly)),
            ("dataset.lfsr_seed", format!("0b{:04b}", d.lfsr.seed)),
            ("train.epochs", t.epochs.to_string()),
            ("train.patience", t.patience.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.lr", fmt_f64(t.lr)),
            ("train.l2", fmt_f64(t.l2)),
            ("train.dropout", fmt_f64(t.dropout_rate)),
            ("train.val_ratio", fmt_f64(t.val_ratio)),
            ("eval.estimator", e.estimator.name().into()),
            ("eval.ber_snr", fmt_grid(&e.ber_snr)),
            ("eval.ber_n_ris", join(&e.ber_n_ris)),
            ("eval.bits_per_frame", e.bits_per_frame.to_string()),
            ("eval.min_errors", e.min_errors.to_string()),
            ("eval.max_bits", e.max_bits.to_string()),
            ("eval.band_models", e.band_models.to_string()),
            ("eval.doppler_hz", e.doppler_hz.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")),
            ("eval.symbol_rate", fmt_f64(e.symbol_rate)),
            ("eval.doppler_random_phase0", e.doppler_random_phase0.to_string()),
            ("eval.quant_n_ris", e.quant_n_ris.to_string()),
            ("eval.quant_los_phase", fmt_f64(e.quant_los_phase)),
            ("eval.quant_snr", fmt_grid(&e.quant_snr)),
            ("eval.quant_bits", join(&e.quant_bits)),
            ("eval.quant_sets", e.quant_sets.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")),
            ("eval.hist_bins", e.hist_bins.to_string()),
        ])
    }

    /// Full config document.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_count(key: &str, value: &str) -> Result<u64> {
    if let Ok(v) = value.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = parse(key, value)?;
    if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(Error::Config(format!("{key}: `{value}` is not a count")))
    }
}

fn parse_bits(key: &str, value: &str) -> Result<u8> {
    let parsed = match value.strip_prefix("0b") {
        Some(bin) => u8::from_str_radix(&bin.replace('_', ""), 2).map_err(|e| e.to_string()),
        None => value.parse::<u8>().map_err(|e| e.to_string()),
    };
    parsed.map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value.split(',').map(|s| parse(key, s.trim())).collect()
}

/// `start:step:stop` in dB, or a single value.
fn parse_grid(key: &str, value: &str) -> Result<SnrGrid> {
    let parts: Vec<f64> = value.split(':').map(|s| parse(key, s.trim())).collect::<Result<_>>()?;
    match parts[..] {
        [x] => Ok(SnrGrid::single(x)),
        [start, step, stop] if step > 0.0 && stop >= start => Ok(SnrGrid::new(start, step, stop)),
        _ => Err(Error::Config(format!("{key}: expected start:step:stop with step > 0, got `{value}`"))),
    }
}

fn parse_fading(value: &str) -> Result<FadingModel> {
    match value {
        "rician" => Ok(FadingModel::Rician),
        "uniform_phase" => Ok(FadingModel::UniformPhase),
        "unit_amplitude" => Ok(FadingModel::UnitAmplitude),
        _ => Err(Error::Config(format!("dataset.fading: unknown model `{value}`"))),
    }
}

fn fading_name(f: FadingModel) -> &'static str {
    match f {
        FadingModel::Rician => "rician",
        FadingModel::UniformPhase => "uniform_phase",
        FadingModel::UnitAmplitude => "unit_amplitude",
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_grid(g: &SnrGrid) -> String {
    format!("{}:{}:{}", fmt_f64(g.start_db), fmt_f64(g.step_db), fmt_f64(g.stop_db))
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_corpus() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train_spec().len(), 16_000);
        assert_eq!(cfg.test_spec().len(), 10_500);
        assert_eq!(cfg.train.epochs, 20);
        assert_ne!(cfg.train_spec().seed, cfg.test_spec().seed);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(&["dataset.n_ris=64", "train.lr=0.0003", "eval.quant_sets=set3,set1", "eval.max_bits=1e6"])
            .unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
        assert_eq!(back.eval.max_bits, 1_000_000);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = RunConfig::parse("# header\n\nseed = 9   # trailing\n dataset.train_snr = -10:5:0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.dataset.train_snr.points(), vec![-10.0, -5.0, 0.0]);
    }

    #[test]
    fn errors_are_config_errors() {
        for bad in ["nonsense = 1", "seed", "dataset.n_ris = -3", "train.patience = 0", "eval.estimator = oracle", "dataset.train_snr = 0:-1:5"] {
            assert!(matches!(RunConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
