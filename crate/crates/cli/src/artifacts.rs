//! File formats written and read by the binary: run manifests with
//! content digests, mark-law and count-vector files, seed specs, measure
//! JSON, tree JSONL and the flat binary path bundle.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use graphldp::diffusion::{PathBundle, Potentials};
use graphldp::ensembles::CountVectors;
use graphldp::entropy::{seed_pstar, Seed};
use graphldp::mark::{EdgePairLaw, MarkLaw, VertexLaw};

pub const ARTIFACT_VERSION: u32 = 1;

/// Reproducibility record written next to every output file.
///
/// Replaying the same subcommand with the recorded parameters yields
/// byte-identical outputs, hence identical digests.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    /// sha256 hex digest per input path.
    pub inputs: BTreeMap<String, String>,
    /// sha256 hex digest per output path.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let k = file.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_owned()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Digest the listed files and write the manifest next to the first
/// output.
pub fn write_manifest(
    subcommand: &str,
    parameters: serde_json::Value,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<PathBuf> {
    let digest_all = |paths: &[&Path]| -> Result<BTreeMap<String, String>> {
        paths
            .iter()
            .map(|p| Ok((p.display().to_string(), sha256_hex(p)?)))
            .collect()
    };
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION,
        subcommand: subcommand.to_string(),
        parameters,
        seed,
        inputs: digest_all(inputs)?,
        outputs: digest_all(outputs)?,
    };
    let path = manifest_path(outputs.first().context("manifest needs an output")?);
    write_json(&path, &serde_json::to_value(&manifest)?)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_value(read_json(path)?)?)
}

pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parse {}", path.display()))
}

/// Canonical JSON output: pretty, trailing newline, stable key order
/// (maps are BTreeMaps or serde structs with fixed field order).
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("write {}", path.display()))?;
    Ok(())
}

/// Mark-law file: {"nu": [...], "chi": [[...], ...]}.
#[derive(Debug, Serialize, Deserialize)]
pub struct LawFile {
    pub nu: Vec<f64>,
    pub chi: Vec<Vec<f64>>,
}

pub fn read_law(path: &Path) -> Result<LawFile> {
    let law: LawFile = serde_json::from_value(read_json(path)?)
        .with_context(|| format!("law file {}", path.display()))?;
    law.to_mark_law()?;
    Ok(law)
}

impl LawFile {
    pub fn to_mark_law(&self) -> Result<MarkLaw> {
        let law = MarkLaw {
            nu: VertexLaw::Finite(self.nu.clone()),
            chi: EdgePairLaw::Finite(self.chi.clone()),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn trivial() -> LawFile {
        LawFile {
            nu: vec![1.0],
            chi: vec![vec![1.0]],
        }
    }
}

/// Count-vector file:
/// {"u": [...], "m": [[x, x', count], ...], "xi_size": k}.
#[derive(Debug, Serialize, Deserialize)]
pub struct CountsFile {
    pub u: Vec<u64>,
    pub m: Vec<(u16, u16, u64)>,
    pub xi_size: usize,
}

pub fn read_counts(path: &Path) -> Result<CountVectors> {
    let doc: CountsFile = serde_json::from_value(read_json(path)?)
        .with_context(|| format!("counts file {}", path.display()))?;
    let m = doc.m.iter().map(|&(a, b, c)| ((a, b), c)).collect();
    Ok(CountVectors::new(doc.u, m, doc.xi_size)?)
}

/// A seed argument: either a path to a seed JSON file or the inline form
/// "pstar:<nu>;<chi rows, '|'-separated>;<d>".
pub fn parse_seed_spec(spec: &str) -> Result<Seed> {
    if let Some(rest) = spec.strip_prefix("pstar:") {
        let fields: Vec<&str> = rest.split(';').collect();
        if fields.len() != 3 {
            bail!("pstar seed needs three ';'-separated fields nu;chi;d, got {spec:?}");
        }
        let nu = parse_floats(fields[0]).context("pstar nu")?;
        let chi = fields[1]
            .split('|')
            .map(parse_floats)
            .collect::<Result<Vec<_>>>()
            .context("pstar chi")?;
        let d: f64 = fields[2].trim().parse().context("pstar d")?;
        return Ok(seed_pstar(nu, chi, d)?);
    }
    let value = read_json(Path::new(spec))?;
    Ok(serde_json::from_value(value).with_context(|| format!("seed file {spec}"))?)
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(Into::into))
        .collect()
}

/// One atom of a serialized empirical measure.
#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureAtom {
    /// Canonical neighborhood code, hex.
    pub code: String,
    pub count: u64,
    /// Exact weight "count/total".
    pub weight: String,
    pub weight_float: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub depth: u32,
    pub total: u64,
    pub atoms: Vec<MeasureAtom>,
}

pub fn read_measure(path: &Path) -> Result<MeasureDoc> {
    let doc: MeasureDoc = serde_json::from_value(read_json(path)?)
        .with_context(|| format!("measure file {}", path.display()))?;
    let mut sum = 0u64;
    for a in &doc.atoms {
        if a.weight != format!("{}/{}", a.count, doc.total) {
            bail!("atom {} carries inconsistent exact weight {}", a.code, a.weight);
        }
        sum += a.count;
    }
    if sum != doc.total {
        bail!("atom counts sum to {sum}, total says {}", doc.total);
    }
    Ok(doc)
}

/// Potentials spec: a preset name "kuramoto", "kuramoto:<scale>" or
/// "zero", or the same as a JSON file {"kind": ..., "scale": ...}.
#[derive(Debug, Serialize, Deserialize)]
pub struct PotentialsFile {
    pub kind: String,
    #[serde(default)]
    pub scale: Option<f64>,
}

pub fn parse_preset(name: &str) -> Result<Potentials> {
    let (kind, scale) = match name.split_once(':') {
        Some((k, s)) => (k, Some(s.parse::<f64>().context("preset scale")?)),
        None => (name, None),
    };
    build_potentials(kind, scale)
}

pub fn read_potentials(path: &Path) -> Result<Potentials> {
    let doc: PotentialsFile = serde_json::from_value(read_json(path)?)
        .with_context(|| format!("potentials file {}", path.display()))?;
    build_potentials(&doc.kind, doc.scale)
}

fn build_potentials(kind: &str, scale: Option<f64>) -> Result<Potentials> {
    match kind {
        "kuramoto" => Ok(Potentials::kuramoto(scale.unwrap_or(1.0))?),
        "zero" => {
            if scale.is_some() {
                bail!("the zero potential takes no scale");
            }
            Ok(Potentials::zero())
        }
        other => bail!("unknown potential preset {other:?}"),
    }
}

/// Flat binary path bundle. Little-endian layout:
/// n (u64), K (u64), dt (f64), then n rows of K+1 f64 values, vertex by
/// vertex.
pub fn write_paths_bin(path: &Path, bundle: &PathBundle) -> Result<()> {
    let n = bundle.paths.len() as u64;
    let k = bundle.steps() as u64;
    let mut file = fs::File::create(path).with_context(|| format!("create {}", path.display()))?;
    file.write_all(&n.to_le_bytes())?;
    file.write_all(&k.to_le_bytes())?;
    file.write_all(&bundle.dt.to_le_bytes())?;
    let mut row = Vec::with_capacity((k as usize + 1) * 8);
    for path_v in &bundle.paths {
        row.clear();
        for &x in path_v {
            row.extend_from_slice(&x.to_le_bytes());
        }
        file.write_all(&row)?;
    }
    Ok(())
}

pub fn read_paths_bin(path: &Path) -> Result<PathBundle> {
    let bytes = fs::read(path).with_context(|| format!("read {}", path.display()))?;
    if bytes.len() < 24 {
        bail!("path bundle shorter than its header");
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
    let n = u64::from_le_bytes(word(0)) as usize;
    let k = u64::from_le_bytes(word(1)) as usize;
    let dt = f64::from_le_bytes(word(2));
    let expected = 24 + n * (k + 1) * 8;
    if bytes.len() != expected {
        bail!("path bundle has {} bytes, header implies {expected}", bytes.len());
    }
    let mut paths = Vec::with_capacity(n);
    let mut at = 3;
    for _ in 0..n {
        let mut row = Vec::with_capacity(k + 1);
        for _ in 0..=k {
            row.push(f64::from_le_bytes(word(at)));
            at += 1;
        }
        paths.push(row);
    }
    Ok(PathBundle { dt, paths })
}
