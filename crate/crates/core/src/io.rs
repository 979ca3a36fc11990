//! Array files: the magic `HOMGARR1`, a little-endian `u32` header length, a
//! JSON header, then little-endian `f64` samples (complex values as
//! interleaved real/imaginary pairs).

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cell::CellField;
use crate::error::{HomogError, Result};
use crate::grid::PeriodicGrid;
use crate::wave::{SpaceTimeGrid, WaveField};

pub const MAGIC: &[u8; 8] = b"HOMGARR1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrayHeader {
    WaveField {
        d: usize,
        n: usize,
        steps: usize,
        horizon: f64,
        epsilon: Option<f64>,
    },
    CellField {
        name: String,
        d: usize,
        m: usize,
        k: usize,
    },
}

fn encode(header: &ArrayHeader, values: impl Iterator<Item = f64>) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Result<(ArrayHeader, Vec<f64>)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(HomogError::Format("missing HOMGARR1 magic".into()));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes
        .get(12..12 + len)
        .ok_or_else(|| HomogError::Format("truncated header".into()))?;
    let header: ArrayHeader =
        serde_json::from_slice(body).map_err(|e| HomogError::Format(format!("bad header: {e}")))?;
    let data = &bytes[12 + len..];
    if !data.len().is_multiple_of(8) {
        return Err(HomogError::Format("payload is not a whole number of f64".into()));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| HomogError::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| HomogError::io(path, e))?;
    f.write_all(bytes).map_err(|e| HomogError::io(path, e))
}

pub fn wave_field_bytes(u: &WaveField) -> Vec<u8> {
    let g = u.grid();
    let header = ArrayHeader::WaveField {
        d: g.dim,
        n: g.n,
        steps: g.steps,
        horizon: g.horizon,
        epsilon: g.epsilon,
    };
    encode(&header, u.data().iter().flat_map(|c| [c.re, c.im]))
}

pub fn wave_field_from_bytes(bytes: &[u8]) -> Result<WaveField> {
    match decode(bytes)? {
        (
            ArrayHeader::WaveField {
                d,
                n,
                steps,
                horizon,
                epsilon,
            },
            values,
        ) => {
            let mut grid = SpaceTimeGrid::new(d, n, steps, horizon)?;
            grid.epsilon = epsilon;
            let data = values
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            WaveField::new(grid, data)
        }
        (other, _) => Err(HomogError::Format(format!(
            "expected a wave field, found {other:?}"
        ))),
    }
}

pub fn write_wave_field(path: impl AsRef<Path>, u: &WaveField) -> Result<()> {
    write_bytes(path.as_ref(), &wave_field_bytes(u))
}

pub fn read_wave_field(path: impl AsRef<Path>) -> Result<WaveField> {
    let path = path.as_ref();
    wave_field_from_bytes(&fs::read(path).map_err(|e| HomogError::io(path, e))?)
}

pub fn write_cell_field(path: impl AsRef<Path>, name: &str, field: &CellField) -> Result<()> {
    let g = field.grid();
    let header = ArrayHeader::CellField {
        name: name.to_string(),
        d: g.dim(),
        m: g.m(),
        k: g.k(),
    };
    write_bytes(path.as_ref(), &encode(&header, field.samples().iter().copied()))
}

/// Returns the stored name and field.
pub fn read_cell_field(path: impl AsRef<Path>) -> Result<(String, CellField)> {
    let path = path.as_ref();
    match decode(&fs::read(path).map_err(|e| HomogError::io(path, e))?)? {
        (ArrayHeader::CellField { name, d, m, k }, values) => {
            Ok((name, CellField::new(PeriodicGrid::new(d, m, k)?, values)?))
        }
        (other, _) => Err(HomogError::Format(format!(
            "expected a cell field, found {other:?}"
        ))),
    }
}

/// Down-sampled CSV (`t, x[, y], re, im`) keeping every `space_stride`-th
/// node per axis and every `time_stride`-th level.
pub fn write_wave_csv(
    path: impl AsRef<Path>,
    u: &WaveField,
    space_stride: usize,
    time_stride: usize,
) -> Result<()> {
    let path = path.as_ref();
    let g = u.grid();
    let (ss, ts) = (space_stride.max(1), time_stride.max(1));
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: &[&str] = if g.dim == 1 {
        &["t", "x", "re", "im"]
    } else {
        &["t", "x", "y", "re", "im"]
    };
    let csv_err = |e: csv::Error| HomogError::Format(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for m in (0..g.levels()).step_by(ts) {
        for k in 0..g.level_len() {
            let idx = g.node_indices(k);
            if idx[..g.dim].iter().any(|i| i % ss != 0) {
                continue;
            }
            let x = g.point(k);
            let v = u.at(m, k);
            let mut row = vec![format!("{:.16e}", g.time(m))];
            row.extend(x[..g.dim].iter().map(|x| format!("{x:.16e}")));
            row.push(format!("{:.16e}", v.re));
            row.push(format!("{:.16e}", v.im));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| HomogError::Format(e.to_string()))?;
    write_bytes(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wave_field_round_trip() {
        let g = SpaceTimeGrid::new(2, 3, 2, 0.5).unwrap().with_epsilon(0.25);
        let u = WaveField::from_fn(g, |x, t| Complex64::new(x[0] + t, x[1] * 1e-300));
        let back = wave_field_from_bytes(&wave_field_bytes(&u)).unwrap();
        assert_eq!(back, u);
        assert_eq!(back.grid().epsilon, Some(0.25));
    }

    #[test]
    fn cell_field_round_trip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let g = PeriodicGrid::new(1, 8, 2).unwrap();
        let f = CellField::from_fn(g, |y, t| y[0] * 3.0 + t);
        let path = dir.path().join("eta.bin");
        write_cell_field(&path, "eta", &f).unwrap();
        let (name, back) = read_cell_field(&path).unwrap();
        assert_eq!(name, "eta");
        assert_eq!(back.samples(), f.samples());
        assert!(read_wave_field(&path).is_err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(wave_field_from_bytes(b"NOTMAGIC0000").is_err());
        let g = SpaceTimeGrid::new(1, 3, 1, 1.0).unwrap();
        let mut bytes = wave_field_bytes(&WaveField::zeros(g));
        bytes.pop();
        assert!(wave_field_from_bytes(&bytes).is_err());
    }

    #[test]
    fn csv_is_down_sampled() {
        let dir = tempfile::tempdir().unwrap();
        let g = SpaceTimeGrid::new(1, 7, 4, 1.0).unwrap();
        let u = WaveField::from_fn(g, |x, _| Complex64::new(x[0], 0.0));
        let path = dir.path().join("u.csv");
        write_wave_csv(&path, &u, 2, 2).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        // 3 levels x 5 nodes + header
        assert_eq!(text.lines().count(), 16);
        assert!(text.starts_with("t,x,re,im\n"));
    }
}
