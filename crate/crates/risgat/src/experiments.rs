//! Experiment drivers and their CSV reports.
//!
//! Monte Carlo work fans out over the current rayon pool. Every frame or sample draws from
//! its own substream and partial results are reduced in a fixed order, so the reports do not
//! depend on the number of workers.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use risgat_core::channel::db_to_linear;
use risgat_core::dataset::{DatasetSpec, GraphSample};
use risgat_core::estimate::{cascaded_phases, gat_estimate, ls_estimate_cascaded, Nmse, PhaseHistogram};
use risgat_core::gat::GatModel;
use risgat_core::link::{simulate_frame, CsiSource, ErrorCount, LinkConfig};
use risgat_core::rng;

use crate::{store, Error, Result};

/// Header fields written as `# key = value` comment lines above every CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// SHA-256 of the dataset manifest (or run config) the numbers derive from.
    pub manifest_sha256: String,
    /// Estimator tag, e.g. `gat` or `perfect+set1-2bit`.
    pub estimator: String,
    /// Master seed.
    pub seed: u64,
}

/// A CSV table with a provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    /// Header lines.
    pub provenance: Provenance,
    /// Extra `# key = value` lines.
    pub notes: Vec<(String, String)>,
    /// Column names.
    pub columns: Vec<&'static str>,
    /// Rows, already formatted.
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    /// Empty table.
    pub fn new(provenance: Provenance, columns: Vec<&'static str>) -> Self {
        Csv { provenance, notes: Vec::new(), columns, rows: Vec::new() }
    }

    /// Rendered document.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let p = &self.provenance;
        writeln!(out, "# manifest_sha256 = {}", p.manifest_sha256).unwrap();
        writeln!(out, "# estimator = {}", p.estimator).unwrap();
        writeln!(out, "# seed = {}", p.seed).unwrap();
        for (k, v) in &self.notes {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    /// Writes the document to `path`.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

/// Scientific notation with a fixed width, `NaN` spelled out.
pub fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

/// NMSE of the three estimators at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NmsePoint {
    /// SNR tag, dB.
    pub snr_db: f64,
    /// GAT, full `[Re h; Re g; Im h; Im g]` vector.
    pub gat_y: Nmse,
    /// GAT, cascaded gain `Σ ĥ_i ĝ_i`.
    pub gat_cascaded: Nmse,
    /// LS, cascaded gain.
    pub ls_cascaded: Nmse,
}

/// Per-SNR NMSE table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NmseReport {
    /// Points in increasing SNR.
    pub points: Vec<NmsePoint>,
}

impl NmseReport {
    /// Point at `snr_db`, if present.
    pub fn at(&self, snr_db: f64) -> Option<&NmsePoint> {
        self.points.iter().find(|p| p.snr_db == snr_db)
    }

    /// Pooled GAT y-vector NMSE over all samples.
    pub fn overall_gat_y(&self) -> f64 {
        pooled(self.points.iter().map(|p| &p.gat_y))
    }

    /// Pooled GAT cascaded NMSE over all samples.
    pub fn overall_gat_cascaded(&self) -> f64 {
        pooled(self.points.iter().map(|p| &p.gat_cascaded))
    }

    /// Table with columns `snr_db, samples, excluded, nmse_gat_y, nmse_gat_cascaded, nmse_ls_cascaded`.
    pub fn to_csv(&self, provenance: Provenance) -> Csv {
        let mut csv = Csv::new(
            provenance,
            vec!["snr_db", "samples", "excluded", "nmse_gat_y", "nmse_gat_cascaded", "nmse_ls_cascaded"],
        );
        for p in &self.points {
            csv.rows.push(vec![
                p.snr_db.to_string(),
                p.gat_y.count().to_string(),
                p.gat_y.excluded().to_string(),
                sci(p.gat_y.value()),
                sci(p.gat_cascaded.value()),
                sci(p.ls_cascaded.value()),
            ]);
        }
        csv
    }
}

fn pooled<'a>(parts: impl Iterator<Item = &'a Nmse>) -> f64 {
    let mut acc = Nmse::default();
    for p in parts {
        acc.merge(p);
    }
    acc.value()
}

/// Evaluates the GAT (y-vector and cascaded) and the LS baseline on every test sample.
pub fn run_nmse_experiment(model: &GatModel, test: &[GraphSample]) -> Result<NmseReport> {
    let per_sample: Vec<(f64, NmsePoint)> = test
        .par_iter()
        .map(|s| {
            let est = gat_estimate(model, s)?;
            let pred = model.predict(s.graph())?;
            let truth = s.cascaded_truth();
            let mut p = NmsePoint { snr_db: s.snr_db, ..Default::default() };
            p.gat_y.push(&pred, &s.label)?;
            p.gat_cascaded.push_complex(est.c_hat, truth);
            let ls = ls_estimate_cascaded(&s.received(), s.pilot_symbols(), db_to_linear(s.snr_db))?;
            p.ls_cascaded.push_complex(ls, truth);
            Ok((s.snr_db, p))
        })
        .collect::<std::result::Result<_, risgat_core::Error>>()?;
    let mut report = NmseReport::default();
    for (snr, p) in per_sample {
        let slot = match report.points.iter().position(|q| q.snr_db == snr) {
            Some(i) => i,
            None => {
                report.points.push(NmsePoint { snr_db: snr, ..Default::default() });
                report.points.len() - 1
            }
        };
        let q = &mut report.points[slot];
        q.gat_y.merge(&p.gat_y);
        q.gat_cascaded.merge(&p.gat_cascaded);
        q.ls_cascaded.merge(&p.ls_cascaded);
    }
    report.points.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    Ok(report)
}

/// NMSE of a Doppler-free model on test corpora rotated by each residual offset.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerReport {
    /// `(f_d, report)` in the requested order.
    pub sweeps: Vec<(f64, NmseReport)>,
}

impl DopplerReport {
    /// Pooled y-vector NMSE at `f_d` divided by the one at zero offset.
    pub fn degradation(&self, f_d: f64) -> Option<f64> {
        let find = |f: f64| self.sweeps.iter().find(|(x, _)| *x == f).map(|(_, r)| r.overall_gat_y());
        Some(find(f_d)? / find(0.0)?)
    }

    /// Long table: one row per `(f_d, snr)`, plus pooled rows tagged `all`.
    pub fn to_csv(&self, provenance: Provenance) -> Csv {
        let mut csv = Csv::new(provenance, vec!["f_d_hz", "snr_db", "nmse_gat_y", "nmse_gat_cascaded", "nmse_ls_cascaded"]);
        for (f_d, r) in &self.sweeps {
            for p in &r.points {
                csv.rows.push(vec![
                    f_d.to_string(),
                    p.snr_db.to_string(),
                    sci(p.gat_y.value()),
                    sci(p.gat_cascaded.value()),
                    sci(p.ls_cascaded.value()),
                ]);
            }
            let ls = pooled(r.points.iter().map(|p| &p.ls_cascaded));
            csv.rows.push(vec![f_d.to_string(), "all".into(), sci(r.overall_gat_y()), sci(r.overall_gat_cascaded()), sci(ls)]);
        }
        for (f_d, _) in &self.sweeps {
            if let Some(d) = self.degradation(*f_d) {
                csv.notes.push((format!("degradation_y_{f_d}"), sci(d)));
            }
        }
        csv
    }
}

/// Regenerates `base` with each residual Doppler offset and evaluates `model` on it.
///
/// `base` must be Doppler free; `f_d = 0` reproduces the baseline corpus exactly.
pub fn doppler_sweep(model: &GatModel, base: &DatasetSpec, offsets_hz: &[f64], symbol_rate: f64, random_phase0: bool) -> Result<DopplerReport> {
    let mut sweeps = Vec::with_capacity(offsets_hz.len());
    for &f_d in offsets_hz {
        let spec = DatasetSpec {
            doppler: Some(risgat_core::dataset::DopplerSpec { f_d, symbol_rate, random_phase0 }),
            ..base.clone()
        };
        let test = store::generate(&spec)?;
        sweeps.push((f_d, run_nmse_experiment(model, &test)?));
    }
    Ok(DopplerReport { sweeps })
}

/// Monte Carlo stopping rule for one BER point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    /// Stop once this many errors were observed.
    pub min_errors: u64,
    /// Stop once this many bits were sent.
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { min_errors: 100, max_bits: 10_000_000 }
    }
}

/// One simulated BER point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    /// SNR, dB.
    pub snr_db: f64,
    /// Accumulated counts.
    pub count: ErrorCount,
}

impl BerPoint {
    /// Bit error rate.
    pub fn ber(&self) -> f64 {
        self.count.ber()
    }

    /// Binomial standard deviation of the BER estimate.
    pub fn sigma(&self) -> f64 {
        let p = self.ber();
        (p * (1.0 - p) / self.count.bits as f64).sqrt()
    }
}

/// A labelled BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    /// Estimator and phase-set tag.
    pub tag: String,
    /// RIS elements.
    pub n_ris: usize,
    /// Points in the order simulated.
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    /// SNR (dB) where the curve crosses `target`, by linear interpolation of `log10 BER`.
    pub fn snr_at(&self, target: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (w[0].ber(), w[1].ber());
            if a >= target && b <= target && a > 0.0 && b > 0.0 && a != b {
                let t = (a.log10() - target.log10()) / (a.log10() - b.log10());
                Some(w[0].snr_db + t * (w[1].snr_db - w[0].snr_db))
            } else {
                None
            }
        })
    }
}

const FIRST_BLOCK: u64 = 64;
const MAX_BLOCK: u64 = 1 << 16;

/// Simulates one BER point in blocks of frames until `stop` is met.
///
/// Frame `k` at SNR `s` draws from `substream(seed, [bits(s), k])`, so curves that share a
/// seed see the same channels and noise.
pub fn ber_point(link: &LinkConfig, csi: CsiSource<'_>, snr_db: f64, stop: StopRule, seed: u64) -> Result<BerPoint> {
    let mut count = ErrorCount::default();
    let mut next_frame = 0u64;
    let mut block = FIRST_BLOCK;
    let bits_per_frame = link.bits_per_frame as u64;
    while count.errors < stop.min_errors && count.bits < stop.max_bits {
        let frames_left = (stop.max_bits - count.bits).div_ceil(bits_per_frame);
        let n = block.min(frames_left);
        let counts: Vec<ErrorCount> = (next_frame..next_frame + n)
            .into_par_iter()
            .map(|k| {
                let mut stream = rng::substream(seed, &[snr_db.to_bits(), k]);
                simulate_frame(link, csi, snr_db, &mut stream)
            })
            .collect::<std::result::Result<_, _>>()?;
        count = counts.into_iter().fold(count, ErrorCount::merge);
        next_frame += n;
        block = (block * 2).min(MAX_BLOCK);
    }
    Ok(BerPoint { snr_db, count })
}

/// BER over an SNR grid.
pub fn run_ber_experiment(link: &LinkConfig, csi: CsiSource<'_>, snrs: &[f64], stop: StopRule, seed: u64) -> Result<BerCurve> {
    let points = snrs.iter().map(|&s| ber_point(link, csi, s, stop, seed)).collect::<Result<_>>()?;
    Ok(BerCurve { tag: format!("{}+{}", csi.tag(), link.phase_set.label()), n_ris: link.n_ris, points })
}

/// Long table of several curves.
pub fn ber_csv(curves: &[BerCurve], provenance: Provenance) -> Csv {
    let mut csv = Csv::new(provenance, vec!["curve", "n_ris", "snr_db", "ber", "sigma", "errors", "bits", "zero_phase_events"]);
    for c in curves {
        for p in &c.points {
            csv.rows.push(vec![
                c.tag.clone(),
                c.n_ris.to_string(),
                p.snr_db.to_string(),
                sci(p.ber()),
                sci(p.sigma()),
                p.count.errors.to_string(),
                p.count.bits.to_string(),
                p.count.zero_phase_events.to_string(),
            ]);
        }
    }
    csv
}

/// Pointwise spread of BER across independently trained models.
#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    /// One curve per model.
    pub curves: Vec<BerCurve>,
}

impl BandReport {
    /// `(snr, min, mean, max)` per grid point.
    pub fn band(&self) -> Vec<(f64, f64, f64, f64)> {
        let first = &self.curves[0].points;
        (0..first.len())
            .map(|i| {
                let bers: Vec<f64> = self.curves.iter().map(|c| c.points[i].ber()).collect();
                let min = bers.iter().copied().fold(f64::INFINITY, f64::min);
                let max = bers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mean = bers.iter().sum::<f64>() / bers.len() as f64;
                (first[i].snr_db, min, mean, max)
            })
            .collect()
    }

    /// Columns `snr_db, ber_min, ber_mean, ber_max, ber_model_1..R`.
    pub fn to_csv(&self, provenance: Provenance) -> Csv {
        let mut csv = Csv::new(provenance, vec!["snr_db", "ber_min", "ber_mean", "ber_max"]);
        csv.notes.push(("models".into(), self.curves.len().to_string()));
        for (i, (snr, min, mean, max)) in self.band().into_iter().enumerate() {
            let mut row = vec![snr.to_string(), sci(min), sci(mean), sci(max)];
            row.extend(self.curves.iter().map(|c| sci(c.points[i].ber())));
            csv.rows.push(row);
        }
        csv.columns.extend(self.curves.iter().enumerate().map(|(i, _)| ["ber_model_1", "ber_model_2", "ber_model_3", "ber_model_4", "ber_model_5", "ber_model_6", "ber_model_7", "ber_model_8"].get(i).copied().unwrap_or("ber_model")));
        csv
    }
}

/// Trains `replicas` models with `train_fn(replica)` and evaluates each with `eval_fn`.
pub fn confidence_band(
    replicas: usize,
    mut train_fn: impl FnMut(u64) -> Result<GatModel>,
    mut eval_fn: impl FnMut(&GatModel) -> Result<BerCurve>,
) -> Result<BandReport> {
    if replicas == 0 {
        return Err(Error::Config("confidence band needs at least one model".into()));
    }
    let mut curves = Vec::with_capacity(replicas);
    for r in 1..=replicas as u64 {
        let model = train_fn(r)?;
        curves.push(eval_fn(&model)?);
    }
    Ok(BandReport { curves })
}

/// Histograms of the per-element cascaded phase, true and estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramReport {
    /// `∠(h_i g_i)` of the true channels.
    pub truth: PhaseHistogram,
    /// `∠(ĥ_i ĝ_i)` of the estimates.
    pub estimate: PhaseHistogram,
}

impl HistogramReport {
    /// Columns `bin_lower, bin_upper, truth_count, estimate_count, truth_freq, estimate_freq`.
    pub fn to_csv(&self, provenance: Provenance) -> Result<Csv> {
        let mut csv = Csv::new(provenance, vec!["bin_lower", "bin_upper", "truth_count", "estimate_count", "truth_freq", "estimate_freq"]);
        csv.notes.push(("total_variation".into(), sci(self.truth.total_variation(&self.estimate)?)));
        let (tf, ef) = (self.truth.frequencies(), self.estimate.frequencies());
        for k in 0..self.truth.counts.len() {
            csv.rows.push(vec![
                sci(self.truth.lower_edge(k)),
                sci(self.truth.lower_edge(k) + self.truth.width()),
                self.truth.counts[k].to_string(),
                self.estimate.counts[k].to_string(),
                sci(tf[k]),
                sci(ef[k]),
            ]);
        }
        Ok(csv)
    }
}

/// Phase histograms over a corpus; `model = None` uses the true channels as estimates.
pub fn phase_histogram(samples: &[GraphSample], model: Option<&GatModel>, bins: usize) -> Result<HistogramReport> {
    let mut truth = PhaseHistogram::new(bins)?;
    let mut estimate = PhaseHistogram::new(bins)?;
    let estimated: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| match model {
            Some(m) => gat_estimate(m, s).map(|e| cascaded_phases(&e.h_hat, &e.g_hat).collect()),
            None => Ok(cascaded_phases(&s.h, &s.g).collect()),
        })
        .collect::<std::result::Result<_, _>>()?;
    for (s, est) in samples.iter().zip(estimated) {
        cascaded_phases(&s.h, &s.g).for_each(|a| truth.add(a));
        est.into_iter().for_each(|a| estimate.add(a));
    }
    Ok(HistogramReport { truth, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use risgat_core::channel::ChannelModel;
    use risgat_core::estimate::PhaseSet;
    use risgat_core::signaling::{LfsrConfig, PilotSequence};

    fn unit_link(n_ris: usize) -> LinkConfig {
        LinkConfig {
            n_ris,
            channel: ChannelModel::unit_amplitude(),
            phase_set: PhaseSet::continuous(),
            pilot: PilotSequence::from_lfsr(&LfsrConfig::default(), 16).unwrap(),
            bits_per_frame: 64,
        }
    }

    #[test]
    fn ber_point_respects_stop_rule() {
        let stop = StopRule { min_errors: 50, max_bits: 20_000 };
        let p = ber_point(&unit_link(1), CsiSource::Perfect, 0.0, stop, 3).unwrap();
        assert!(p.count.errors >= 50);
        let q = ber_point(&unit_link(1), CsiSource::Perfect, 30.0, stop, 3).unwrap();
        assert_eq!(q.count.errors, 0);
        assert_eq!(q.count.bits, 20_032);
    }

    #[test]
    fn crossing_interpolates_in_log_domain() {
        let pt = |snr_db, errors, bits| BerPoint { snr_db, count: ErrorCount { errors, bits, zero_phase_events: 0 } };
        let curve = BerCurve { tag: "t".into(), n_ris: 1, points: vec![pt(0.0, 100, 10_000), pt(2.0, 10, 100_000)] };
        assert!((curve.snr_at(1e-3).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(curve.snr_at(1e-9), None);
    }

    #[test]
    fn band_orders_min_mean_max() {
        let pt = |errors| BerPoint { snr_db: 0.0, count: ErrorCount { errors, bits: 1000, zero_phase_events: 0 } };
        let curve = |e| BerCurve { tag: "gat".into(), n_ris: 4, points: vec![pt(e)] };
        let single = BandReport { curves: vec![curve(7)] };
        assert_eq!(single.band(), vec![(0.0, 0.007, 0.007, 0.007)]);
        let band = BandReport { curves: vec![curve(3), curve(9), curve(6)] }.band();
        assert!(band[0].1 <= band[0].2 && band[0].2 <= band[0].3);
        assert_eq!(band[0].1, 0.003);
    }

    #[test]
    fn csv_header_carries_provenance() {
        let prov = Provenance { manifest_sha256: "ab".into(), estimator: "perfect".into(), seed: 4 };
        let mut csv = Csv::new(prov, vec!["a", "b"]);
        csv.rows.push(vec!["1".into(), "2".into()]);
        assert_eq!(csv.render(), "# manifest_sha256 = ab\n# estimator = perfect\n# seed = 4\na,b\n1,2\n");
    }
}
