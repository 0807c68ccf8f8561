//! Labeled and unlabeled samples, and the csv / svmlight readers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Header-free `label,f1,...,fd` rows; unlabeled files drop the label column.
    Csv,
    /// `label idx:val ...` with 1-based indices; unlabeled files drop the label.
    Svmlight,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "svmlight" | "libsvm" => Ok(DataFormat::Svmlight),
            other => Err(Error::Config(format!("unknown data format `{other}`"))),
        }
    }
}

/// Labeled sample S and unlabeled sample U over a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub s_points: Vec<Vec<f64>>,
    pub s_labels: Vec<i8>,
    pub u_points: Vec<Vec<f64>>,
    pub dim: usize,
}

impl Dataset {
    pub fn new(s_points: Vec<Vec<f64>>, s_labels: Vec<i8>, u_points: Vec<Vec<f64>>) -> Result<Self> {
        if s_points.is_empty() {
            return Err(Error::data(0, "labeled sample is empty"));
        }
        if s_points.len() != s_labels.len() {
            return Err(Error::data(0, "one label per labeled point is required"));
        }
        if let Some(pos) = s_labels.iter().position(|y| *y != 1 && *y != -1) {
            return Err(Error::data(pos + 1, format!("label {} is not -1 or +1", s_labels[pos])));
        }
        if u_points.len() < s_points.len() {
            return Err(Error::data(
                0,
                format!(
                    "unlabeled sample ({}) is smaller than the labeled sample ({})",
                    u_points.len(),
                    s_points.len()
                ),
            ));
        }
        let dim = s_points[0].len();
        for (i, x) in s_points.iter().chain(&u_points).enumerate() {
            if x.len() != dim {
                return Err(Error::data(
                    i + 1,
                    format!("point has dimension {}, expected {dim}", x.len()),
                ));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(i + 1, "point has non-finite coordinates"));
            }
        }
        Ok(Dataset {
            s_points,
            s_labels,
            u_points,
            dim,
        })
    }

    /// The case U = S (the unlabeled sample is the labeled one without labels).
    pub fn same_sample(points: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        Self::new(points.clone(), labels, points)
    }

    pub fn m(&self) -> usize {
        self.s_points.len()
    }

    pub fn u(&self) -> usize {
        self.u_points.len()
    }

    /// Labeled points followed by unlabeled points.
    pub fn all_points(&self) -> Vec<Vec<f64>> {
        self.s_points.iter().chain(&self.u_points).cloned().collect()
    }
}

struct RawRow {
    line: usize,
    label: Option<i8>,
    /// 0-based coordinate, value.
    entries: Vec<(usize, f64)>,
}

fn parse_label(tok: &str, line: usize) -> Result<i8> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::data(line, format!("cannot parse label `{tok}`")))?;
    if v == 1.0 {
        Ok(1)
    } else if v == -1.0 {
        Ok(-1)
    } else {
        Err(Error::data(line, format!("label `{tok}` is not -1 or +1")))
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::data(line, format!("cannot parse value `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::data(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn parse_rows(text: &str, format: DataFormat, labeled: bool) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let row = match format {
            DataFormat::Csv => {
                let fields: Vec<&str> = content.split(',').collect();
                let (label, feats) = if labeled {
                    (Some(parse_label(fields[0], line)?), &fields[1..])
                } else {
                    (None, &fields[..])
                };
                let entries = feats
                    .iter()
                    .enumerate()
                    .map(|(c, f)| parse_value(f, line).map(|v| (c, v)))
                    .collect::<Result<Vec<_>>>()?;
                RawRow { line, label, entries }
            }
            DataFormat::Svmlight => {
                let mut toks = content.split_whitespace().peekable();
                let label = if labeled {
                    let tok = toks.next().ok_or_else(|| Error::data(line, "missing label"))?;
                    Some(parse_label(tok, line)?)
                } else {
                    None
                };
                let mut entries = Vec::new();
                for tok in toks {
                    let (idx, val) = tok
                        .split_once(':')
                        .ok_or_else(|| Error::data(line, format!("expected index:value, got `{tok}`")))?;
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| Error::data(line, format!("bad feature index `{idx}`")))?;
                    if idx == 0 {
                        return Err(Error::data(line, "svmlight feature indices are 1-based"));
                    }
                    if let Some(&(prev, _)) = entries.last() {
                        if idx - 1 <= prev {
                            return Err(Error::data(line, "feature indices must be strictly increasing"));
                        }
                    }
                    entries.push((idx - 1, parse_value(val, line)?));
                }
                RawRow { line, label, entries }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn densify(rows: &[RawRow], format: DataFormat, dim: usize) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|row| {
            if format == DataFormat::Csv && row.entries.len() != dim {
                return Err(Error::data(
                    row.line,
                    format!("row has {} features, expected {dim}", row.entries.len()),
                ));
            }
            let mut x = vec![0.0; dim];
            for &(c, v) in &row.entries {
                if c >= dim {
                    return Err(Error::data(
                        row.line,
                        format!("feature index {} exceeds dimension {dim}", c + 1),
                    ));
                }
                x[c] = v;
            }
            Ok(x)
        })
        .collect()
}

fn inferred_dim(rows: &[RawRow], format: DataFormat) -> usize {
    match format {
        DataFormat::Csv => rows.first().map_or(0, |r| r.entries.len()),
        DataFormat::Svmlight => rows
            .iter()
            .filter_map(|r| r.entries.last().map(|e| e.0 + 1))
            .max()
            .unwrap_or(0),
    }
}

/// Parses a labeled file. Without `dim`, csv uses the first row's width and
/// svmlight the largest index present.
pub fn parse_labeled(text: &str, format: DataFormat, dim: Option<usize>) -> Result<(Vec<Vec<f64>>, Vec<i8>)> {
    let rows = parse_rows(text, format, true)?;
    let dim = dim.unwrap_or_else(|| inferred_dim(&rows, format));
    let points = densify(&rows, format, dim)?;
    Ok((points, rows.iter().map(|r| r.label.unwrap_or(1)).collect()))
}

pub fn parse_unlabeled(text: &str, format: DataFormat, dim: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let rows = parse_rows(text, format, false)?;
    let dim = dim.unwrap_or_else(|| inferred_dim(&rows, format));
    densify(&rows, format, dim)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::data(0, format!("cannot read {}: {e}", path.display())))
}

/// Loads S from `labeled` and U from `unlabeled` (U = S when absent).
pub fn load_dataset(
    labeled: &Path,
    unlabeled: Option<&Path>,
    format: DataFormat,
    dim: Option<usize>,
) -> Result<Dataset> {
    let s_rows = parse_rows(&read(labeled)?, format, true)?;
    let u_rows = match unlabeled {
        Some(path) => Some(parse_rows(&read(path)?, format, false)?),
        None => None,
    };
    let dim = dim.unwrap_or_else(|| {
        let s = inferred_dim(&s_rows, format);
        let u = u_rows.as_ref().map_or(0, |rows| inferred_dim(rows, format));
        match format {
            DataFormat::Csv => s,
            DataFormat::Svmlight => s.max(u),
        }
    });
    let s_points = densify(&s_rows, format, dim)?;
    let s_labels = s_rows.iter().map(|r| r.label.unwrap_or(1)).collect();
    match u_rows {
        Some(rows) => Dataset::new(s_points, s_labels, densify(&rows, format, dim)?),
        None => Dataset::same_sample(s_points, s_labels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row() {
        let (x, y) = parse_labeled("+1,0.5,1.0\n", DataFormat::Csv, None).unwrap();
        assert_eq!(x, vec![vec![0.5, 1.0]]);
        assert_eq!(y, vec![1]);
    }

    #[test]
    fn svmlight_row() {
        let (x, y) = parse_labeled("-1 3:2.5\n", DataFormat::Svmlight, Some(4)).unwrap();
        assert_eq!(x, vec![vec![0.0, 0.0, 2.5, 0.0]]);
        assert_eq!(y, vec![-1]);
    }

    #[test]
    fn bad_label_is_rejected_with_line() {
        let err = parse_labeled("1,0.1\n2,0.5\n", DataFormat::Csv, None).unwrap_err();
        assert!(matches!(err, Error::Data { line: 2, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn malformed_rows() {
        assert!(parse_labeled("1,0.1\n1,0.1,0.2\n", DataFormat::Csv, None).is_err());
        assert!(parse_labeled("1 0:1\n", DataFormat::Svmlight, None).is_err());
        assert!(parse_labeled("1 2:1 1:3\n", DataFormat::Svmlight, None).is_err());
        assert!(parse_labeled("1 5:1\n", DataFormat::Svmlight, Some(4)).is_err());
        assert!(parse_labeled("1,abc\n", DataFormat::Csv, None).is_err());
        assert!(parse_labeled("1,nan\n", DataFormat::Csv, None).is_err());
    }

    #[test]
    fn comments_blank_lines_and_unlabeled() {
        let text = "# header comment\n\n0.1,0.2\n0.3,0.4 # trailing\n";
        let u = parse_unlabeled(text, DataFormat::Csv, None).unwrap();
        assert_eq!(u, vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        let u = parse_unlabeled("1:1 3:2\n2:5\n", DataFormat::Svmlight, None).unwrap();
        assert_eq!(u, vec![vec![1.0, 0.0, 2.0], vec![0.0, 5.0, 0.0]]);
    }

    #[test]
    fn dataset_invariants() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(Dataset::new(pts.clone(), vec![1, -1], vec![vec![0.0]]).is_err());
        assert!(Dataset::new(pts.clone(), vec![1, 0], pts.clone()).is_err());
        assert!(Dataset::new(pts.clone(), vec![1, -1], vec![vec![0.0, 1.0], vec![1.0, 2.0]]).is_err());
        let d = Dataset::same_sample(pts, vec![1, -1]).unwrap();
        assert_eq!((d.m(), d.u(), d.dim), (2, 2, 1));
    }

    #[test]
    fn load_files_share_svmlight_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.svm");
        let u = dir.path().join("u.svm");
        std::fs::write(&s, "+1 1:1\n-1 2:1\n").unwrap();
        std::fs::write(&u, "1:1\n3:1\n2:2\n").unwrap();
        let d = load_dataset(&s, Some(&u), DataFormat::Svmlight, None).unwrap();
        assert_eq!(d.dim, 3);
        assert_eq!(d.s_points[1], vec![0.0, 1.0, 0.0]);
        assert_eq!(d.u_points[2], vec![0.0, 2.0, 0.0]);
    }
}
