//! Numeric CSV ingestion.

use std::path::{Path, PathBuf};

use codcov::dcov::PairedSample;
use codcov::Points;

use crate::error::{CliError, CliResult};

/// Where the paired sample comes from: one file split after `px` columns,
/// or separate files for `X` and `Y`.
#[derive(Clone, Debug)]
pub struct InputSpec {
    pub x: PathBuf,
    pub y: Option<PathBuf>,
    pub px: Option<usize>,
    pub has_header: bool,
    pub delimiter: u8,
}

/// Rows of a numeric CSV file, all of the same width.
pub fn read_matrix(path: &Path, has_header: bool, delimiter: u8) -> CliResult<(usize, Vec<f64>)> {
    let shown = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot open {shown}: {e}")))?;
    let mut width = None;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(String::from("?"), |p| p.line().to_string());
            CliError::Input(format!("{shown}: line {line}: malformed row: {e}"))
        })?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if let Some(w) = width {
            if record.len() != w {
                return Err(CliError::Input(format!(
                    "{shown}: line {line}: expected {w} columns, found {}",
                    record.len()
                )));
            }
        } else {
            width = Some(record.len());
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Input(format!("{shown}: line {line}, column {}: cannot parse {field:?} as a number", col + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "{shown}: row {}, column {}: non-finite value {field:?}",
                    row + 1,
                    col + 1
                )));
            }
            values.push(v);
        }
    }
    match width {
        Some(w) if w > 0 => Ok((w, values)),
        _ => Err(CliError::Input(format!("{shown}: no data rows"))),
    }
}

pub fn load_sample(spec: &InputSpec) -> CliResult<PairedSample> {
    let (wx, vx) = read_matrix(&spec.x, spec.has_header, spec.delimiter)?;
    let (x, y) = match &spec.y {
        Some(ypath) => {
            let (wy, vy) = read_matrix(ypath, spec.has_header, spec.delimiter)?;
            let (nx, ny) = (vx.len() / wx, vy.len() / wy);
            if nx != ny {
                return Err(CliError::Input(format!(
                    "{} has {nx} rows but {} has {ny}",
                    spec.x.display(),
                    ypath.display()
                )));
            }
            (Points::new(wx, vx)?, Points::new(wy, vy)?)
        }
        None => {
            let px = spec
                .px
                .ok_or_else(|| CliError::Input("single-file input needs --px (number of X columns)".into()))?;
            if px == 0 || px >= wx {
                return Err(CliError::Input(format!(
                    "--px must be between 1 and {} for a {wx}-column file, got {px}",
                    wx.saturating_sub(1)
                )));
            }
            let all = Points::new(wx, vx)?;
            let x: Vec<f64> = all.rows().flat_map(|r| r[..px].to_vec()).collect();
            let y: Vec<f64> = all.rows().flat_map(|r| r[px..].to_vec()).collect();
            (Points::new(px, x)?, Points::new(wx - px, y)?)
        }
    };
    Ok(PairedSample::new(x, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_scientific_and_header() {
        let f = file("a,b\n1e-3,2\n-4.5E2, 7\n");
        let (w, v) = read_matrix(f.path(), true, b',').unwrap();
        assert_eq!(w, 2);
        assert_eq!(v, vec![1e-3, 2.0, -450.0, 7.0]);
    }

    #[test]
    fn reports_line_and_column() {
        let f = file("1,2\n3,x\n");
        let e = read_matrix(f.path(), false, b',').unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("column 2"), "{e}");
        let f = file("1,2\n3,NaN\n");
        let e = read_matrix(f.path(), false, b',').unwrap_err().to_string();
        assert!(e.contains("row 2, column 2"), "{e}");
        let f = file("1,2\n3\n");
        let e = read_matrix(f.path(), false, b',').unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn split_and_two_file_modes() {
        let rows: String = (0..10).map(|i| format!("{i},{},{}\n", i * i, 10 - i)).collect();
        let f = file(&rows);
        let spec = InputSpec { x: f.path().into(), y: None, px: Some(1), has_header: false, delimiter: b',' };
        let s = load_sample(&spec).unwrap();
        assert_eq!((s.n(), s.p(), s.q()), (10, 1, 2));
        assert_eq!(s.y().row(3), &[9.0, 7.0]);
        let bad = InputSpec { px: Some(3), ..spec.clone() };
        assert!(load_sample(&bad).is_err());
        let g = file("1\n2\n");
        let two = InputSpec { y: Some(g.path().into()), px: None, ..spec };
        assert!(load_sample(&two).unwrap_err().to_string().contains("rows"));
    }
}
