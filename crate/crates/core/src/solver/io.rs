//! On-disk form of a [`SolutionCurve`]: a directory holding `manifest.json`
//! and one measure CSV per sample time.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Provenance, ResidualCertificate, SolutionCurve};
use crate::error::{Error, Result};
use crate::measure::{read_csv, write_csv};

#[derive(Serialize, Deserialize)]
struct Manifest {
    key: String,
    label: String,
    provenance: Provenance,
    s: f64,
    horizon: f64,
    continuity_constant: f64,
    certificate: Option<ResidualCertificate>,
    times: Vec<f64>,
    files: Vec<String>,
}

pub fn write_curve(curve: &SolutionCurve, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files: Vec<String> = (0..curve.times().len())
        .map(|k| format!("marginal_{k:05}.csv"))
        .collect();
    for (name, m) in files.iter().zip(curve.marginals()) {
        write_csv(m, &dir.join(name))?;
    }
    let manifest = Manifest {
        key: curve.key().to_string(),
        label: curve.label().to_string(),
        provenance: curve.provenance(),
        s: curve.s(),
        horizon: curve.horizon(),
        continuity_constant: curve.continuity_constant(),
        certificate: curve.certificate().cloned(),
        times: curve.times().to_vec(),
        files,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

/// Read a curve back and verify its content hash.
pub fn read_curve(dir: &Path) -> Result<SolutionCurve> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let marginals = manifest
        .files
        .iter()
        .map(|f| read_csv(&dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = SolutionCurve::new(
        manifest.times,
        marginals,
        manifest.provenance,
        manifest.label,
    )?;
    if let Some(c) = manifest.certificate {
        curve = curve.with_certificate(c);
    }
    if curve.key() != manifest.key {
        return Err(Error::Parse {
            path,
            message: format!(
                "content hash {} does not match manifest key {}",
                curve.key(),
                manifest.key
            ),
        });
    }
    Ok(curve)
}
