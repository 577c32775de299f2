//! File formats and atomic output.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transform::{grid_coordinate, GridFunction};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| file_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| file_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| file_err(path, e))?;
    tmp.persist(path).map_err(|e| file_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| format_err(path, e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let bytes = csv_bytes(rows).map_err(|e| format_err(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

/// JSON form of a grid function; `values[c][node]` as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDocument {
    pub n: usize,
    pub d: usize,
    pub size: usize,
    pub values: Vec<Vec<[f64; 2]>>,
}

impl From<&GridFunction> for GridDocument {
    fn from(u: &GridFunction) -> Self {
        GridDocument {
            n: u.n,
            d: u.d,
            size: u.size,
            values: (0..u.d)
                .map(|c| u.component(c).iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

impl GridDocument {
    pub fn into_grid(self) -> Result<GridFunction, String> {
        let nodes = self.size.checked_pow(self.n as u32).ok_or("grid too large")?;
        if self.n == 0 || self.d == 0 || self.size < 2 {
            return Err(format!("need n >= 1, d >= 1, size >= 2 (got {}, {}, {})", self.n, self.d, self.size));
        }
        if self.values.len() != self.d || self.values.iter().any(|c| c.len() != nodes) {
            return Err(format!("values must be {} components of {} nodes", self.d, nodes));
        }
        let values: Vec<Complex64> = self.values.iter().flatten().map(|&[re, im]| Complex64::new(re, im)).collect();
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err("non-finite value".into());
        }
        Ok(GridFunction {
            n: self.n,
            d: self.d,
            size: self.size,
            values,
        })
    }
}

pub fn grid_to_json(u: &GridFunction) -> String {
    serde_json::to_string(&GridDocument::from(u)).expect("grid documents always serialize")
}

pub fn grid_from_json(text: &str) -> Result<GridFunction, String> {
    let doc: GridDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
    doc.into_grid()
}

/// CSV with columns x0..x{n-1}, re0, im0, ..., one row per node.
pub fn grid_to_csv(u: &GridFunction) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..u.n).map(|j| format!("x{j}")).collect();
    for c in 0..u.d {
        header.push(format!("re{c}"));
        header.push(format!("im{c}"));
    }
    w.write_record(&header).expect("in-memory write");
    for node in 0..u.nodes() {
        let mut record: Vec<String> = u.coords(node).iter().map(|x| x.to_string()).collect();
        for z in u.at(node) {
            record.push(z.re.to_string());
            record.push(z.im.to_string());
        }
        w.write_record(&record).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn grid_from_csv(bytes: &[u8]) -> Result<GridFunction, String> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let n = header.iter().take_while(|h| h.starts_with('x')).count();
    let rest = header.len() - n;
    if n == 0 || rest == 0 || rest % 2 != 0 {
        return Err("header must be x0.., then re/im column pairs".into());
    }
    let d = rest / 2;
    let mut coords = Vec::new();
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("row {}: {e}", line + 2)))
            .collect::<Result<_, _>>()?;
        if nums.len() != header.len() {
            return Err(format!("row {}: expected {} columns", line + 2, header.len()));
        }
        coords.push(nums[..n].to_vec());
        samples.push(nums[n..].to_vec());
    }
    let nodes = samples.len();
    let size = (nodes as f64).powf(1.0 / n as f64).round() as usize;
    if size < 2 || size.pow(n as u32) != nodes {
        return Err(format!("{nodes} rows do not form an N^{n} grid"));
    }
    let mut u = GridFunction::zeros(n, d, size);
    for (node, (x, vals)) in coords.iter().zip(&samples).enumerate() {
        let idx = u.node_index(node);
        for (j, (&xj, &ij)) in x.iter().zip(&idx).enumerate() {
            if (xj - grid_coordinate(ij, size)).abs() > 1e-9 {
                return Err(format!("row {}: x{j} = {xj} is not the expected grid node", node + 2));
            }
        }
        for c in 0..d {
            u.values[c * nodes + node] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
        }
    }
    Ok(u)
}

/// Reads a grid function, choosing the format from the extension (`.csv` or JSON otherwise).
pub fn read_grid(path: &Path) -> Result<GridFunction, IoError> {
    let bytes = fs::read(path).map_err(|e| file_err(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        grid_from_csv(&bytes)
    } else {
        std::str::from_utf8(&bytes)
            .map_err(|e| e.to_string())
            .and_then(grid_from_json)
    };
    parsed.map_err(|m| format_err(path, m))
}

pub fn write_grid(path: &Path, u: &GridFunction) -> Result<(), IoError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_atomic(path, &grid_to_csv(u))
    } else {
        write_atomic(path, grid_to_json(u).as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridFunction {
        GridFunction::from_fn(2, 2, 4, |x| vec![Complex64::new(x[0].sin(), x[1]), Complex64::new(1.0 / 3.0, -x[0] * x[1])])
    }

    #[test]
    fn json_round_trip_is_exact() {
        let u = sample();
        assert_eq!(grid_from_json(&grid_to_json(&u)).unwrap(), u);
        assert!(grid_from_json(r#"{"n":1,"d":1,"size":4,"values":[[[0,0]]]}"#).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let u = sample();
        assert_eq!(grid_from_csv(&grid_to_csv(&u)).unwrap(), u);
        assert!(grid_from_csv(b"x0,re0,im0\n0.5,1,0\n").is_err());
    }

    #[test]
    fn atomic_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        write_grid(&p, &sample()).unwrap();
        assert_eq!(read_grid(&p).unwrap(), sample());
        let q = dir.path().join("u.json");
        write_grid(&q, &sample()).unwrap();
        assert_eq!(read_grid(&q).unwrap(), sample());
        assert!(matches!(read_grid(&dir.path().join("missing.json")), Err(IoError::File { .. })));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
