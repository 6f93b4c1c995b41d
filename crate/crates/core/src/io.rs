//! File formats: edge-list layers, sample manifests, label files, CSV
//! matrices and JSON documents.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::{Layer, MembershipMatrix, NetworkSample};

pub const FORMAT_VERSION: u32 = 1;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| NetError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| NetError::io(path, e))
}

/// Content lines with their 1-based line numbers; blank lines are skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_header(path: &Path, line: Option<(usize, &str)>, key: &str) -> Result<usize> {
    let (_, line) = line.ok_or_else(|| NetError::parse(path, format!("missing `{key} <count>` header")))?;
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next().map(str::parse::<usize>), parts.next()) {
        (Some(k), Some(Ok(v)), None) if k == key => Ok(v),
        _ => Err(NetError::parse(path, format!("malformed header `{line}`, expected `{key} <count>`"))),
    }
}

pub fn format_layer(layer: &Layer) -> String {
    let mut s = format!("n {}\n", layer.n());
    for &(i, j) in layer.edges() {
        let _ = writeln!(s, "{i} {j}");
    }
    s
}

pub fn parse_layer(path: &Path, text: &str) -> Result<Layer> {
    let mut lines = content_lines(text);
    let n = parse_header(path, lines.next(), "n")?;
    let mut edges = Vec::new();
    for (no, line) in lines {
        let mut parts = line.split_whitespace().map(str::parse::<usize>);
        let (i, j) = match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(i)), Some(Ok(j)), None) => (i, j),
            _ => return Err(NetError::parse(path, format!("line {no}: expected `i j`, got `{line}`"))),
        };
        if i > j {
            return Err(NetError::parse(path, format!("line {no}: edge ({i}, {j}) not upper-triangular")));
        }
        if j >= n {
            return Err(NetError::parse(path, format!("line {no}: index {j} out of range for n = {n}")));
        }
        edges.push((i, j));
    }
    Layer::from_edges(n, edges).map_err(|e| NetError::parse(path, e.to_string()))
}

pub fn write_layer(path: &Path, layer: &Layer) -> Result<()> {
    write_text(path, &format_layer(layer))
}

pub fn read_layer(path: &Path) -> Result<Layer> {
    parse_layer(path, &read_text(path)?)
}

/// JSON description of a sample; layer paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub n: usize,
    #[serde(rename = "L")]
    pub num_layers: usize,
    pub rho: f64,
    pub layers: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_labels: Option<Vec<usize>>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Drop diagonal entries after loading.
    pub no_self_loops: bool,
}

/// Writes `layer_000.txt`, ... and `manifest.json` into `dir`, returning the
/// manifest path.
pub fn write_sample(dir: &Path, sample: &NetworkSample) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| NetError::io(dir, e))?;
    let width = sample.num_layers().saturating_sub(1).to_string().len().max(3);
    let mut names = Vec::with_capacity(sample.num_layers());
    for (l, layer) in sample.layers().iter().enumerate() {
        let name = PathBuf::from(format!("layer_{l:0width$}.txt"));
        write_layer(&dir.join(&name), layer)?;
        names.push(name);
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n: sample.n(),
        num_layers: sample.num_layers(),
        rho: sample.rho(),
        layers: names,
        group_labels: sample.group_labels().map(<[usize]>::to_vec),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn ingest_sample(manifest_path: &Path, opts: IngestOptions) -> Result<NetworkSample> {
    let manifest: Manifest = read_json(manifest_path)?;
    if manifest.format_version > FORMAT_VERSION {
        return Err(NetError::parse(
            manifest_path,
            format!("unsupported format_version {}", manifest.format_version),
        ));
    }
    if manifest.layers.len() != manifest.num_layers {
        return Err(NetError::parse(
            manifest_path,
            format!("L = {} but {} layer files listed", manifest.num_layers, manifest.layers.len()),
        ));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for rel in &manifest.layers {
        let path = base.join(rel);
        let layer = read_layer(&path)?;
        if layer.n() != manifest.n {
            return Err(NetError::parse(
                &path,
                format!("header says n = {}, manifest says n = {}", layer.n(), manifest.n),
            ));
        }
        layers.push(layer);
    }
    let sample = NetworkSample::new(manifest.n, layers, manifest.rho, manifest.group_labels)?;
    Ok(if opts.no_self_loops { sample.without_self_loops() } else { sample })
}

pub fn format_labels(z: &MembershipMatrix) -> String {
    let mut s = format!("K {}\n", z.k());
    for g in z.labels() {
        let _ = writeln!(s, "{g}");
    }
    s
}

pub fn parse_labels(path: &Path, text: &str) -> Result<MembershipMatrix> {
    let mut lines = content_lines(text);
    let k = parse_header(path, lines.next(), "K")?;
    let labels = lines
        .map(|(no, l)| {
            l.parse::<usize>()
                .map_err(|_| NetError::parse(path, format!("line {no}: `{l}` is not a label")))
        })
        .collect::<Result<Vec<_>>>()?;
    MembershipMatrix::new(labels, k).map_err(|e| NetError::parse(path, e.to_string()))
}

pub fn write_labels(path: &Path, z: &MembershipMatrix) -> Result<()> {
    write_text(path, &format_labels(z))
}

pub fn read_labels(path: &Path) -> Result<MembershipMatrix> {
    parse_labels(path, &read_text(path)?)
}

/// Comma-separated rows after a `# format_version=1` line. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = format!("# format_version={FORMAT_VERSION}\n");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn parse_matrix_csv(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in content_lines(text) {
        if line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| NetError::parse(path, format!("line {no}: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(NetError::parse(
                    path,
                    format!("line {no}: {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_text(path, &format_matrix_csv(m))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(path, &read_text(path)?)
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| NetError::InvalidData(format!("serialization failed: {e}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| NetError::parse(path, e.to_string()))
}
