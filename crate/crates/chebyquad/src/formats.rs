//! File formats: measure specs, node lists, cubature bundles, point lists and
//! the results log. Every float is written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use chebyquad_core::config::FORMAT_VERSION;
use chebyquad_core::cylinder::CylinderCubature;
use chebyquad_core::measure::{Measure1D, MeasureSpec};
use chebyquad_core::sphere::SphereCubature;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Parses JSON, reporting syntax and schema errors at their line and column.
pub fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// A measure spec file, parsed and validated.
pub struct MeasureFile {
    pub spec: MeasureSpec,
    pub measure: Measure1D,
    pub bytes: Vec<u8>,
}

pub fn read_measure(path: &Path) -> Result<MeasureFile> {
    let bytes = read_bytes(path)?;
    let spec: MeasureSpec = parse_json(path, &bytes)?;
    let measure = spec.build().map_err(|source| CliError::InvalidInput {
        path: path.into(),
        source,
    })?;
    Ok(MeasureFile {
        spec,
        measure,
        bytes,
    })
}

/// One node per line after a `#` header carrying the format version.
pub fn node_list(nodes: &[f64]) -> String {
    let mut s = format!(
        "# chebyquad node list, format_version = {FORMAT_VERSION}, n = {}\n",
        nodes.len()
    );
    for x in nodes {
        writeln!(s, "{x:?}").unwrap();
    }
    s
}

pub fn parse_node_list(path: &Path, bytes: &[u8]) -> Result<Vec<f64>> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::Parse {
        path: path.into(),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let x: f64 = t.parse().map_err(|_| CliError::Parse {
            path: path.into(),
            line: i + 1,
            column: 1,
            message: format!("expected a number, found '{t}'"),
        })?;
        if !x.is_finite() {
            return Err(CliError::Parse {
                path: path.into(),
                line: i + 1,
                column: 1,
                message: format!("node {x} is not finite"),
            });
        }
        out.push(x);
    }
    Ok(out)
}

/// The cubature inside a bundle file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cubature", rename_all = "snake_case")]
pub enum Cubature {
    Sphere(SphereCubature),
    Cylinder(CylinderCubature),
}

/// Factored cubature: the per-factor node lists and, per region, which factors it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub format_version: u32,
    #[serde(flatten)]
    pub cubature: Cubature,
}

impl Bundle {
    pub fn new(cubature: Cubature) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            cubature,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("bundle serializes")
    }
}

pub fn read_bundle(path: &Path) -> Result<(Bundle, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let bundle: Bundle = parse_json(path, &bytes)?;
    if bundle.format_version != FORMAT_VERSION {
        return Err(CliError::Usage(format!(
            "{}: format_version {} is not the supported {FORMAT_VERSION}",
            path.display(),
            bundle.format_version
        )));
    }
    Ok((bundle, bytes))
}

/// Every materialized point, one per line, prefixed with its region index.
pub fn point_list(regions: usize, mut points: impl FnMut(usize) -> Vec<Vec<f64>>) -> String {
    let mut s = format!(
        "# chebyquad point list, format_version = {FORMAT_VERSION}: region x_1 ... x_dim\n"
    );
    for i in 0..regions {
        for p in points(i) {
            write!(s, "{i}").unwrap();
            for x in p {
                write!(s, " {x:?}").unwrap();
            }
            s.push('\n');
        }
    }
    s
}

/// Appends one JSON record per line.
pub fn append_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    f.write_all(&buf).map_err(|e| CliError::io(path, e))
}

pub fn to_pretty_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report serializes");
    out.push(b'\n');
    out
}
