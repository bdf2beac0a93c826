//! `RISD` dataset directories.
//!
//! A dataset directory holds `samples.risd`, a binary tensor container, and `manifest.txt`, a
//! `key = value` document that echoes the generating [`DatasetSpec`] and records the SHA-256
//! of every data file.
//!
//! Container layout (little-endian): magic `RISD`, `u32` version, `u32` record count, then per
//! record: `u32` name length, UTF-8 name, `u32` rank, `rank × u32` dims, `f64` payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use risgat_core::channel::{ChannelModel, FadingModel, RicianParams};
use risgat_core::dataset::{encode_sample, generate_sample, DatasetSpec, DopplerSpec, GraphSample, SnrGrid};
use risgat_core::signaling::{LfsrConfig, PilotSequence};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RISD";
/// Container version written by this build.
pub const VERSION: u32 = 1;
/// Tensor file name inside a dataset directory.
pub const SAMPLES_FILE: &str = "samples.risd";
/// Manifest file name inside a dataset directory.
pub const MANIFEST_FILE: &str = "manifest.txt";
const GENERATOR: &str = concat!("risgat ", env!("CARGO_PKG_VERSION"));

/// A named dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    /// Record name.
    pub name: String,
    /// Dimensions, outermost first.
    pub dims: Vec<usize>,
    /// Row-major payload.
    pub data: Vec<f64>,
}

/// Serializes tensor records.
pub fn encode_records(records: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for t in records {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.path, format!("truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

/// Parses tensor records; `path` is only used in error messages.
pub fn decode_records(bytes: &[u8], path: &Path) -> Result<Vec<Tensor>> {
    let mut r = Reader { bytes, at: 0, path };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::format(path, "missing RISD header"));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(Error::Version { path: path.into(), found: version, expected: VERSION });
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32()?;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::format(path, "record name is not UTF-8"))?;
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| Error::format(path, "dims overflow"))?;
        let payload = r.take(n.checked_mul(8).ok_or_else(|| Error::format(path, "dims overflow"))?)?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push(Tensor { name, dims, data });
    }
    if r.at != bytes.len() {
        return Err(Error::format(path, "trailing bytes after the last record"));
    }
    Ok(out)
}

fn complex_tensor(name: &str, rows: impl Iterator<Item = Complex64>, s: usize, n: usize) -> Tensor {
    Tensor { name: name.into(), dims: vec![s, n, 2], data: rows.flat_map(|c| [c.re, c.im]).collect() }
}

/// Packs samples into records `x`, `adjacency`, `edges`, `label`, `snr_db`, `h`, `g`.
pub fn samples_to_records(samples: &[GraphSample]) -> Result<Vec<Tensor>> {
    let first = samples.first().ok_or_else(|| Error::Config("cannot store an empty dataset".into()))?;
    let (s, m_p, n) = (samples.len(), first.x.cols(), first.n_ris());
    if samples.iter().any(|x| x.x.cols() != m_p || x.n_ris() != n) {
        return Err(Error::Config("samples disagree on N or M_p".into()));
    }
    let flat = |f: &dyn Fn(&GraphSample) -> &[f64]| samples.iter().flat_map(|x| f(x).iter().copied()).collect::<Vec<f64>>();
    Ok(vec![
        Tensor { name: "x".into(), dims: vec![s, 2, m_p], data: flat(&|x| x.x.as_slice()) },
        Tensor { name: "adjacency".into(), dims: vec![s, 2, 2], data: flat(&|x| x.adjacency.as_slice()) },
        Tensor { name: "edges".into(), dims: vec![s, 2, 2, m_p], data: flat(&|x| x.edges.as_slice()) },
        Tensor { name: "label".into(), dims: vec![s, 4 * n], data: flat(&|x| &x.label) },
        Tensor { name: "snr_db".into(), dims: vec![s], data: samples.iter().map(|x| x.snr_db).collect() },
        complex_tensor("h", samples.iter().flat_map(|x| x.h.iter().copied()), s, n),
        complex_tensor("g", samples.iter().flat_map(|x| x.g.iter().copied()), s, n),
    ])
}

/// Rebuilds samples from records written by [`samples_to_records`].
pub fn records_to_samples(records: &[Tensor], path: &Path) -> Result<Vec<GraphSample>> {
    let get = |name: &str, rank: usize| -> Result<&Tensor> {
        let t = records.iter().find(|t| t.name == name).ok_or_else(|| Error::format(path, format!("missing record `{name}`")))?;
        if t.dims.len() != rank {
            return Err(Error::format(path, format!("record `{name}` has rank {}", t.dims.len())));
        }
        Ok(t)
    };
    let x = get("x", 3)?;
    let edges = get("edges", 4)?;
    let snr = get("snr_db", 1)?;
    let h = get("h", 3)?;
    let g = get("g", 3)?;
    let (s, m_p, n) = (x.dims[0], x.dims[2], h.dims[1]);
    if x.dims[1] != 2 || edges.dims != [s, 2, 2, m_p] || snr.dims != [s] || h.dims != [s, n, 2] || g.dims != [s, n, 2] {
        return Err(Error::format(path, "records disagree on sample count, N or M_p"));
    }
    let complex = |t: &Tensor, i: usize| -> Vec<Complex64> {
        t.data[i * 2 * n..(i + 1) * 2 * n].chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
    };
    (0..s)
        .map(|i| {
            let row = |k: usize| &x.data[(2 * i + k) * m_p..(2 * i + k + 1) * m_p];
            let r: Vec<Complex64> = row(0).iter().zip(row(1)).map(|(&re, &im)| Complex64::new(re, im)).collect();
            let pilot_bits = edges.data[(4 * i + 1) * m_p..(4 * i + 2) * m_p].iter().map(|&v| u8::from(v < 0.0)).collect();
            let pilot = PilotSequence::from_bits(pilot_bits);
            encode_sample(&r, &pilot, &complex(h, i), &complex(g, i), snr.data[i]).map_err(Error::from)
        })
        .collect()
}

/// Manifest of a dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Generating spec.
    pub spec: DatasetSpec,
    /// Producer and version.
    pub generator: String,
    /// Number of samples.
    pub samples: usize,
    /// SHA-256 (lower-case hex) per data file name.
    pub checksums: BTreeMap<String, String>,
}

impl DatasetManifest {
    /// Manifest document.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            "format = RISD".to_string(),
            format!("version = {VERSION}"),
            format!("generator = {}", self.generator),
            format!("samples = {}", self.samples),
            "order = snr-major".to_string(),
        ];
        lines.extend(self.checksums.iter().map(|(f, h)| format!("sha256.{f} = {h}")));
        lines.extend(spec_pairs(&self.spec).into_iter().map(|(k, v)| format!("spec.{k} = {v}")));
        lines.join("\n") + "\n"
    }

    /// Parses a manifest document.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(path, m);
        let mut kv = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad line `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| kv.get(k).cloned().ok_or_else(|| bad(format!("missing `{k}`")));
        if field("format")? != "RISD" {
            return Err(bad("not a RISD manifest".into()));
        }
        let version: u32 = field("version")?.parse().map_err(|_| bad("bad version".into()))?;
        if version != VERSION {
            return Err(Error::Version { path: path.into(), found: version, expected: VERSION });
        }
        let samples = field("samples")?.parse().map_err(|_| bad("bad sample count".into()))?;
        let checksums = kv
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("sha256.").map(|f| (f.to_string(), v.clone())))
            .collect();
        let spec_kv: BTreeMap<&str, &str> =
            kv.iter().filter_map(|(k, v)| k.strip_prefix("spec.").map(|s| (s, v.as_str()))).collect();
        let spec = spec_from_pairs(&spec_kv).map_err(bad)?;
        Ok(DatasetManifest { spec, generator: field("generator")?, samples, checksums })
    }
}

fn spec_pairs(spec: &DatasetSpec) -> Vec<(&'static str, String)> {
    let f = |x: f64| format!("{x:?}");
    let ch = &spec.channel;
    let fading = match ch.fading {
        FadingModel::Rician => "rician",
        FadingModel::UniformPhase => "uniform_phase",
        FadingModel::UnitAmplitude => "unit_amplitude",
    };
    let mut v = vec![
        ("n_ris", spec.n_ris.to_string()),
        ("m_p", spec.m_p.to_string()),
        ("fading", fading.to_string()),
        ("h.k", f(ch.h.k)),
        ("h.omega", f(ch.h.omega)),
        ("h.los_phase", f(ch.h.los_phase)),
        ("g.k", f(ch.g.k)),
        ("g.omega", f(ch.g.omega)),
        ("g.los_phase", f(ch.g.los_phase)),
        ("snr", format!("{}:{}:{}", f(spec.snrs.start_db), f(spec.snrs.step_db), f(spec.snrs.stop_db))),
        ("samples_per_snr", spec.samples_per_snr.to_string()),
        ("lfsr_poly", spec.lfsr.poly.to_string()),
        ("lfsr_seed", spec.lfsr.seed.to_string()),
        ("seed", spec.seed.to_string()),
    ];
    match spec.doppler {
        None => v.push(("doppler", "none".into())),
        Some(d) => {
            v.push(("doppler", "on".into()));
            v.push(("doppler.f_d", f(d.f_d)));
            v.push(("doppler.symbol_rate", f(d.symbol_rate)));
            v.push(("doppler.random_phase0", d.random_phase0.to_string()));
        }
    }
    v
}

fn spec_from_pairs(kv: &BTreeMap<&str, &str>) -> std::result::Result<DatasetSpec, String> {
    fn get<T: std::str::FromStr>(kv: &BTreeMap<&str, &str>, k: &str) -> std::result::Result<T, String> {
        kv.get(k).ok_or(format!("missing `spec.{k}`"))?.parse().map_err(|_| format!("bad `spec.{k}`"))
    }
    let hop = |p: &str| -> std::result::Result<RicianParams, String> {
        Ok(RicianParams { k: get(kv, &format!("{p}.k"))?, omega: get(kv, &format!("{p}.omega"))?, los_phase: get(kv, &format!("{p}.los_phase"))? })
    };
    let fading = match kv.get("fading").copied() {
        Some("rician") => FadingModel::Rician,
        Some("uniform_phase") => FadingModel::UniformPhase,
        Some("unit_amplitude") => FadingModel::UnitAmplitude,
        _ => return Err("bad `spec.fading`".into()),
    };
    let grid: Vec<f64> = kv
        .get("snr")
        .ok_or("missing `spec.snr`")?
        .split(':')
        .map(|s| s.parse().map_err(|_| "bad `spec.snr`".to_string()))
        .collect::<std::result::Result<_, _>>()?;
    let [start, step, stop] = grid[..] else { return Err("bad `spec.snr`".into()) };
    let doppler = match kv.get("doppler").copied() {
        Some("none") => None,
        Some("on") => Some(DopplerSpec {
            f_d: get(kv, "doppler.f_d")?,
            symbol_rate: get(kv, "doppler.symbol_rate")?,
            random_phase0: get(kv, "doppler.random_phase0")?,
        }),
        _ => return Err("bad `spec.doppler`".into()),
    };
    Ok(DatasetSpec {
        n_ris: get(kv, "n_ris")?,
        m_p: get(kv, "m_p")?,
        channel: ChannelModel { fading, h: hop("h")?, g: hop("g")? },
        snrs: SnrGrid::new(start, step, stop),
        samples_per_snr: get(kv, "samples_per_snr")?,
        lfsr: LfsrConfig { poly: get(kv, "lfsr_poly")?, seed: get(kv, "lfsr_seed")? },
        doppler,
        seed: get(kv, "seed")?,
    })
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Generates the corpus of `spec` in parallel; the result equals the sequential generator.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<GraphSample>> {
    spec.validate()?;
    let pilot = PilotSequence::from_lfsr(&spec.lfsr, spec.m_p)?;
    let jobs: Vec<(usize, f64, usize)> = spec
        .snrs
        .points()
        .into_iter()
        .enumerate()
        .flat_map(|(level, snr)| (0..spec.samples_per_snr).map(move |i| (level, snr, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(level, snr, i)| generate_sample(spec, &pilot, level, snr, i).map_err(Error::from))
        .collect()
}

/// Writes `samples` and their manifest into directory `dir` (created if needed).
pub fn write_dataset(dir: &Path, spec: &DatasetSpec, samples: &[GraphSample]) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bytes = encode_records(&samples_to_records(samples)?);
    let manifest = DatasetManifest {
        spec: spec.clone(),
        generator: GENERATOR.into(),
        samples: samples.len(),
        checksums: BTreeMap::from([(SAMPLES_FILE.to_string(), sha256_hex(&bytes))]),
    };
    let data_path = dir.join(SAMPLES_FILE);
    fs::write(&data_path, &bytes).map_err(|e| Error::io(&data_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest.to_text()).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Reads only the manifest of a dataset directory.
pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::Missing(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    DatasetManifest::parse(&text, &path)
}

/// Reads a dataset directory, verifying checksums and the sample count.
pub fn read_dataset(dir: &Path) -> Result<(Vec<GraphSample>, DatasetManifest)> {
    let manifest = read_manifest(dir)?;
    let path: PathBuf = dir.join(SAMPLES_FILE);
    if !path.exists() {
        return Err(Error::Missing(path));
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let expected = manifest
        .checksums
        .get(SAMPLES_FILE)
        .ok_or_else(|| Error::format(dir.join(MANIFEST_FILE), "no checksum for samples.risd"))?;
    let actual = sha256_hex(&bytes);
    if &actual != expected {
        return Err(Error::Checksum { path, expected: expected.clone(), actual });
    }
    let samples = records_to_samples(&decode_records(&bytes, &path)?, &path)?;
    if samples.len() != manifest.samples {
        return Err(Error::format(&path, format!("{} samples, manifest says {}", samples.len(), manifest.samples)));
    }
    Ok((samples, manifest))
}
