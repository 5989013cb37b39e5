//! Headerless numeric CSV in and out.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;

/// Reads a rectangular matrix of numbers. Errors name the file and the
/// 1-based row and column of the offending cell.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let name = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("{name}: cannot open"))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{name}: row {}: malformed CSV", r + 1))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                bail!("{name}: row {}: expected {w} columns, found {}", r + 1, record.len())
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .with_context(|| format!("{name}: row {}, column {}: cannot parse {cell:?} as a number", r + 1, c + 1))?;
            values.push(v);
        }
        rows += 1;
    }
    let Some(width) = width else {
        bail!("{name}: no data");
    };
    Ok(Array2::from_shape_vec((rows, width), values)?)
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("{}: cannot write", path.display()))
}

pub fn write_indices(path: &Path, indices: &[usize]) -> Result<()> {
    let mut out = String::new();
    for i in indices {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("{}: cannot write", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = array![[0.1 + 0.2, -1e-300, 12345.678901234567], [f64::MIN_POSITIVE, 1.0 / 3.0, -0.0]];
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn reports_bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.csv");
        fs::write(&path, "1,2\n3,abc\n").unwrap();
        let err = format!("{:#}", read_matrix(&path).unwrap_err());
        assert!(err.contains("row 2, column 2"), "{err}");
        fs::write(&path, "1,2\n3\n").unwrap();
        let err = format!("{:#}", read_matrix(&path).unwrap_err());
        assert!(err.contains("row 2"), "{err}");
    }
}
