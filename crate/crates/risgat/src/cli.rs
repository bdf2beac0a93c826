//! The `risgat` command line.
//!
//! A run directory holds everything one configuration produces:
//!
//! ```text
//! <output_dir>/config.txt           effective configuration
//! <output_dir>/data/{train,test}/   RISD corpora with manifests
//! <output_dir>/weights_n<N>.gatw    trained estimator for N elements
//! <output_dir>/history_n<N>.csv     per-epoch losses
//! <output_dir>/fig*.csv             experiment reports
//! ```

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use risgat_core::dataset::{split_train_val, GraphSample};
use risgat_core::estimate::{PhaseSet, PhaseSetKind};
use risgat_core::gat::{GatDims, GatModel};
use risgat_core::link::{CsiSource, LinkConfig};
use risgat_core::rng;
use risgat_core::signaling::PilotSequence;
use risgat_core::train::fit;

use crate::config::{Estimator, RunConfig};
use crate::experiments::{self, BerCurve, Provenance, StopRule};
use crate::store::{self, DatasetManifest};
use crate::weights;
use crate::{Error, Result};

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "risgat", version, about = "Graph-attention channel estimation for RIS-assisted satellite uplinks")]
pub struct Cli {
    /// Config file (`key = value` lines); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set dataset.n_ris=32`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads for Monte Carlo and dataset generation (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overwrite existing datasets and weights.
    #[arg(long, global = true)]
    pub force: bool,
    /// What to do.
    #[command(subcommand)]
    pub command: Command,
}

/// Subcommands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the training and test corpora.
    GenDataset,
    /// Train the estimator on the training corpus.
    Train,
    /// Run one experiment and write its CSV report.
    Eval {
        /// Experiment to run.
        #[arg(long, value_enum)]
        which: Figure,
    },
}

/// Experiments, named after the report each produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// NMSE versus SNR: GAT and LS.
    Fig5,
    /// NMSE under residual Doppler.
    Fig6,
    /// BER versus SNR for several RIS sizes.
    Fig7,
    /// BER spread over independently trained models.
    Fig8,
    /// BER with quantized phases.
    Fig9,
    /// BER for the three phase sets.
    Fig10,
    /// Cascaded phase histograms.
    Fig11,
}

impl Figure {
    /// Report file name.
    pub fn file_name(self) -> &'static str {
        match self {
            Figure::Fig5 => "fig5_nmse.csv",
            Figure::Fig6 => "fig6_doppler.csv",
            Figure::Fig7 => "fig7_ber.csv",
            Figure::Fig8 => "fig8_band.csv",
            Figure::Fig9 => "fig9_bits.csv",
            Figure::Fig10 => "fig10_sets.csv",
            Figure::Fig11 => "fig11_hist.csv",
        }
    }
}

/// Process exit status for an error: 2 for configuration problems, 3 for missing
/// artifacts, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Mismatch { .. } => 2,
        Error::Missing(_) => 3,
        _ => 1,
    }
}

/// Loads the config and applies `--set` overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) if !path.exists() => return Err(Error::Missing(path.clone())),
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    Ok(cfg)
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let run = Run { cfg, force: cli.force };
    pool.install(|| {
        run.prepare()?;
        match &cli.command {
            Command::GenDataset => run.gen_dataset(),
            Command::Train => run.train(),
            Command::Eval { which } => run.eval(*which),
        }
    })
}

/// Paths and settings of one run directory.
pub struct Run {
    /// Effective configuration.
    pub cfg: RunConfig,
    /// Overwrite existing artifacts.
    pub force: bool,
}

impl Run {
    fn dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    /// Training corpus directory.
    pub fn train_dir(&self) -> PathBuf {
        self.dir().join("data").join("train")
    }

    /// Test corpus directory.
    pub fn test_dir(&self) -> PathBuf {
        self.dir().join("data").join("test")
    }

    /// Weight file of the `n_ris`-element estimator.
    pub fn weights_path(&self, n_ris: usize) -> PathBuf {
        self.dir().join(format!("weights_n{n_ris}.gatw"))
    }

    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(self.dir()).map_err(|e| Error::io(self.dir(), e))?;
        let path = self.dir().join("config.txt");
        std::fs::write(&path, self.cfg.to_text()).map_err(|e| Error::io(&path, e))
    }

    fn gen_dataset(&self) -> Result<()> {
        for (dir, spec) in [(self.train_dir(), self.cfg.train_spec()), (self.test_dir(), self.cfg.test_spec())] {
            if dir.join(store::MANIFEST_FILE).exists() && !self.force {
                return Err(Error::Exists(dir));
            }
            let samples = store::generate(&spec)?;
            store::write_dataset(&dir, &spec, &samples)?;
            info!("wrote {} samples to {}", samples.len(), dir.display());
        }
        Ok(())
    }

    /// Reads a corpus and checks that it was generated from the current config.
    fn load_corpus(&self, dir: &Path, expected: &risgat_core::dataset::DatasetSpec) -> Result<(Vec<GraphSample>, DatasetManifest)> {
        if !dir.join(store::MANIFEST_FILE).exists() {
            return Err(Error::Missing(dir.to_path_buf()));
        }
        let (samples, manifest) = store::read_dataset(dir)?;
        if &manifest.spec != expected {
            return Err(Error::Config(format!(
                "{} was generated from a different configuration; rerun gen-dataset --force",
                dir.display()
            )));
        }
        Ok((samples, manifest))
    }

    fn manifest_hash(&self, dir: &Path) -> Result<String> {
        let path = dir.join(store::MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(store::sha256_hex(&bytes))
    }

    /// Trains replica `replica` (0 for the main model) on `samples`.
    pub fn train_model(&self, samples: &[GraphSample], replica: u64) -> Result<(GatModel, risgat_core::train::History)> {
        let d = &self.cfg.dataset;
        let (train, val) = split_train_val(samples, self.cfg.train.val_ratio, self.cfg.split_seed())?;
        let mut model = GatModel::init(GatDims::reference(d.n_ris, d.m_p), &mut rng::stream(self.cfg.init_seed(replica)));
        let history = fit(&mut model, &train, &val, &self.cfg.train_config(replica))?;
        Ok((model, history))
    }

    fn train(&self) -> Result<()> {
        let n = self.cfg.dataset.n_ris;
        let out = self.weights_path(n);
        if out.exists() && !self.force {
            return Err(Error::Exists(out));
        }
        let (samples, _) = self.load_corpus(&self.train_dir(), &self.cfg.train_spec())?;
        let (model, history) = self.train_model(&samples, 0)?;
        weights::save_weights(&model, &out)?;
        let mut text = String::from("epoch,train_loss,val_loss\n");
        for (i, e) in history.epochs.iter().enumerate() {
            text.push_str(&format!("{},{},{}\n", i + 1, experiments::sci(e.train_loss), experiments::sci(e.val_loss)));
        }
        let hist = self.dir().join(format!("history_n{n}.csv"));
        std::fs::write(&hist, text).map_err(|e| Error::io(&hist, e))?;
        info!(
            "trained N={n}: best epoch {} (val loss {:.6e}), {} epochs",
            history.best_epoch + 1,
            history.best_val_loss(),
            history.epochs.len()
        );
        Ok(())
    }

    fn model_for(&self, n_ris: usize) -> Result<GatModel> {
        weights::load_weights_for(&self.weights_path(n_ris), n_ris, self.cfg.dataset.m_p)
    }

    fn stop_rule(&self) -> StopRule {
        StopRule { min_errors: self.cfg.eval.min_errors, max_bits: self.cfg.eval.max_bits }
    }

    fn link(&self, n_ris: usize, los_phase: f64, phase_set: PhaseSet) -> Result<LinkConfig> {
        let d = &self.cfg.dataset;
        Ok(LinkConfig {
            n_ris,
            channel: d.channel().with_los_phase(los_phase),
            phase_set,
            pilot: PilotSequence::from_lfsr(&d.lfsr, d.m_p)?,
            bits_per_frame: self.cfg.eval.bits_per_frame,
        })
    }

    /// BER curve with the configured estimator.
    fn curve(&self, link: &LinkConfig, snrs: &[f64]) -> Result<BerCurve> {
        let seed = self.cfg.eval_seed();
        match self.cfg.eval.estimator {
            Estimator::Perfect => experiments::run_ber_experiment(link, CsiSource::Perfect, snrs, self.stop_rule(), seed),
            Estimator::Gat => {
                let model = self.model_for(link.n_ris)?;
                experiments::run_ber_experiment(link, CsiSource::Gat(&model), snrs, self.stop_rule(), seed)
            }
        }
    }

    fn provenance(&self, manifest_sha256: String, estimator: &str) -> Provenance {
        Provenance { manifest_sha256, estimator: estimator.to_string(), seed: self.cfg.seed }
    }

    fn config_hash(&self) -> String {
        store::sha256_hex(self.cfg.to_text().as_bytes())
    }

    fn quant_sets(&self, kinds: &[PhaseSetKind]) -> Result<Vec<PhaseSet>> {
        let mut sets = Vec::new();
        for &kind in kinds {
            for &b in &self.cfg.eval.quant_bits {
                sets.push(PhaseSet::new(kind, b)?);
            }
        }
        Ok(sets)
    }

    /// Runs one experiment and writes its report.
    pub fn eval(&self, which: Figure) -> Result<()> {
        let e = &self.cfg.eval;
        let n = self.cfg.dataset.n_ris;
        let csv = match which {
            Figure::Fig5 => {
                let model = self.model_for(n)?;
                let (test, _) = self.load_corpus(&self.test_dir(), &self.cfg.test_spec())?;
                experiments::run_nmse_experiment(&model, &test)?.to_csv(self.provenance(self.manifest_hash(&self.test_dir())?, "gat"))
            }
            Figure::Fig6 => {
                let model = self.model_for(n)?;
                let report = experiments::doppler_sweep(&model, &self.cfg.test_spec(), &e.doppler_hz, e.symbol_rate, e.doppler_random_phase0)?;
                report.to_csv(self.provenance(self.config_hash(), "gat"))
            }
            Figure::Fig7 => {
                let snrs = e.ber_snr.points();
                let los = self.cfg.dataset.los_phase;
                let curves = e
                    .ber_n_ris
                    .iter()
                    .map(|&n_ris| self.curve(&self.link(n_ris, los, PhaseSet::continuous())?, &snrs))
                    .collect::<Result<Vec<_>>>()?;
                experiments::ber_csv(&curves, self.provenance(self.config_hash(), e.estimator.name()))
            }
            Figure::Fig8 => {
                let (samples, _) = self.load_corpus(&self.train_dir(), &self.cfg.train_spec())?;
                let snrs = e.ber_snr.points();
                let link = self.link(n, self.cfg.dataset.los_phase, PhaseSet::continuous())?;
                let report = experiments::confidence_band(
                    e.band_models,
                    |r| {
                        info!("training band model {r}/{}", e.band_models);
                        self.train_model(&samples, r).map(|(m, _)| m)
                    },
                    |m| experiments::run_ber_experiment(&link, CsiSource::Gat(m), &snrs, self.stop_rule(), self.cfg.eval_seed()),
                )?;
                report.to_csv(self.provenance(self.manifest_hash(&self.train_dir())?, "gat"))
            }
            Figure::Fig9 | Figure::Fig10 => {
                let snrs = e.quant_snr.points();
                let mut sets = vec![PhaseSet::continuous()];
                let kinds = if which == Figure::Fig9 { vec![PhaseSetKind::Set1] } else { e.quant_sets.clone() };
                sets.extend(self.quant_sets(&kinds)?);
                let curves = sets
                    .into_iter()
                    .map(|set| self.curve(&self.link(e.quant_n_ris, e.quant_los_phase, set)?, &snrs))
                    .collect::<Result<Vec<_>>>()?;
                experiments::ber_csv(&curves, self.provenance(self.config_hash(), e.estimator.name()))
            }
            Figure::Fig11 => {
                let (test, _) = self.load_corpus(&self.test_dir(), &self.cfg.test_spec())?;
                let model = match e.estimator {
                    Estimator::Perfect => None,
                    Estimator::Gat => Some(self.model_for(n)?),
                };
                let report = experiments::phase_histogram(&test, model.as_ref(), e.hist_bins)?;
                report.to_csv(self.provenance(self.manifest_hash(&self.test_dir())?, e.estimator.name()))?
            }
        };
        let path = self.dir().join(which.file_name());
        csv.write(&path)?;
        info!("wrote {}", path.display());
        Ok(())
    }
}
