//! File formats: trapezoid JSON, eigenvalue CSV with a JSON sidecar, scan and
//! transform CSVs, orbit JSON lines and run manifests.
//!
//! Every writer is deterministic: fixed column order, fixed float formatting,
//! no timestamps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::billiards::{BoundaryEvent, OrbitKind, OrbitRecord};
use crate::fem::{BoundaryCondition, Method, SpectrumData};
use crate::geometry::TrapezoidSpec;
use crate::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrapezoidFile {
    b: f64,
    h: f64,
    alpha: f64,
    beta: f64,
}

/// Parses `{"b", "h", "alpha", "beta"}`. Angles are radians unless `degrees`.
pub fn parse_trapezoid(text: &str, degrees: bool) -> Result<TrapezoidSpec> {
    let raw: TrapezoidFile = serde_json::from_str(text)?;
    let (alpha, beta) = if degrees {
        (raw.alpha.to_radians(), raw.beta.to_radians())
    } else {
        (raw.alpha, raw.beta)
    };
    TrapezoidSpec::new(raw.b, raw.h, alpha, beta)
}

pub fn read_trapezoid(path: &Path, degrees: bool) -> Result<TrapezoidSpec> {
    parse_trapezoid(&fs::read_to_string(path)?, degrees)
}

/// JSON sidecar of an eigenvalue CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumMeta {
    pub bc: BoundaryCondition,
    pub mesh_size: f64,
    pub count: usize,
    pub lambda_max_trust: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_complete: Option<f64>,
    pub method: Method,
}

impl SpectrumMeta {
    pub fn of(s: &SpectrumData) -> Self {
        Self {
            bc: s.bc(),
            mesh_size: s.mesh_size(),
            count: s.count(),
            lambda_max_trust: s.lambda_max_trust(),
            lambda_complete: Some(s.lambda_complete()),
            method: s.method(),
        }
    }
}

/// Sidecar path of an eigenvalue CSV: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `index,lambda` rows with 17 significant digits and the sidecar.
/// Returns both paths.
pub fn write_eigenvalues(csv_path: &Path, s: &SpectrumData) -> Result<[PathBuf; 2]> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(["index", "lambda"])?;
    for (i, v) in s.eigenvalues().iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:.16e}")])?;
    }
    w.flush()?;
    let side = sidecar_path(csv_path);
    write_json(&side, &SpectrumMeta::of(s))?;
    Ok([csv_path.to_path_buf(), side])
}

/// Reads an eigenvalue CSV and its sidecar. Without a sidecar the list is
/// trusted and complete up to its last value and `bc` must be given. A `bc`
/// that contradicts the sidecar is an error.
pub fn read_eigenvalues(csv_path: &Path, bc: Option<BoundaryCondition>) -> Result<SpectrumData> {
    let mut r = csv::Reader::from_path(csv_path)?;
    let header = r.headers()?.clone();
    if header.len() != 2 || &header[0] != "index" || &header[1] != "lambda" {
        return Err(Error::Precondition(format!(
            "{}: expected header \"index,lambda\"",
            csv_path.display()
        )));
    }
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Precondition(format!("{}: malformed row {}", csv_path.display(), row + 1));
        let index: usize = rec[0].trim().parse().map_err(|_| bad())?;
        let v: f64 = rec[1].trim().parse().map_err(|_| bad())?;
        if index != row {
            return Err(Error::Precondition(format!(
                "{}: index {index} at row {}",
                csv_path.display(),
                row + 1
            )));
        }
        values.push(v);
    }
    let side = sidecar_path(csv_path);
    if side.exists() {
        let meta: SpectrumMeta = serde_json::from_str(&fs::read_to_string(&side)?)?;
        if let Some(bc) = bc.filter(|b| *b != meta.bc) {
            return Err(Error::Precondition(format!("--bc {bc} contradicts the sidecar tag {}", meta.bc)));
        }
        if meta.count != values.len() {
            return Err(Error::Precondition(format!(
                "sidecar count {} but {} rows",
                meta.count,
                values.len()
            )));
        }
        let complete = meta.lambda_complete.unwrap_or(meta.lambda_max_trust);
        SpectrumData::new(meta.bc, values, meta.lambda_max_trust, complete, meta.mesh_size, meta.method)
    } else {
        let bc = bc.ok_or_else(|| {
            Error::Precondition(format!("{} has no sidecar; pass the boundary condition", csv_path.display()))
        })?;
        SpectrumData::from_values(bc, values, Method::Fem)
    }
}

/// Peak scan as `t0,abs_W`.
pub fn write_scan_csv(path: &Path, scan: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t0", "abs_W"])?;
    for (t, a) in scan {
        w.write_record([format!("{t:.16e}"), format!("{a:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Transform as `k,re_W,im_W,abs_W`.
pub fn write_transform_csv(path: &Path, k_grid: &[f64], w: &[Complex64]) -> Result<()> {
    if k_grid.len() != w.len() {
        return Err(Error::Precondition("transform and k grid differ in length".into()));
    }
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["k", "re_W", "im_W", "abs_W"])?;
    for (k, v) in k_grid.iter().zip(w) {
        out.write_record([
            format!("{k:.16e}"),
            format!("{:.16e}", v.re),
            format!("{:.16e}", v.im),
            format!("{:.16e}", v.norm()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct OrbitLine<'a> {
    kind: OrbitKind,
    length: f64,
    itinerary: &'a [BoundaryEvent],
}

/// One `{kind, length, itinerary}` object per line.
pub fn write_orbits_jsonl(path: &Path, orbits: &[OrbitRecord]) -> Result<()> {
    let mut text = String::new();
    for o in orbits {
        text.push_str(&serde_json::to_string(&OrbitLine { kind: o.kind, length: o.length, itinerary: &o.itinerary })?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Record of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    /// Output file names relative to the output directory.
    pub outputs: Vec<String>,
    pub versions: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C, inputs: &[PathBuf]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| Ok(InputHash { path: p.display().to_string(), sha256: sha256_file(p)? }))
            .collect::<Result<_>>()?;
        let mut versions = BTreeMap::new();
        versions.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
        Ok(Self { command: command.into(), config: serde_json::to_value(config)?, inputs, outputs: Vec::new(), versions })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}
