use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Delimiter-separated rows with a header. One column holds the label:
/// the column named `label` when present, otherwise the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<S>>,
    pub labels: Vec<String>,
}

impl<S: Scalar> Dataset<S> {
    pub fn load(path: impl AsRef<Path>, delimiter: u8) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, delimiter)
    }

    pub fn parse(text: &str, delimiter: u8) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(&e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < 2 {
            return Err(Error::Parse {
                line: Some(1),
                field: None,
                message: "dataset needs at least one feature column and a label column".into(),
            });
        }
        let label_col = header.iter().position(|h| h == "label").unwrap_or(header.len() - 1);
        let feature_names = header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_col)
            .map(|(_, h)| h.clone())
            .collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(&e))?;
            let line = record.position().map(|p| p.line() as usize);
            let mut row = Vec::with_capacity(header.len() - 1);
            for (i, cell) in record.iter().enumerate() {
                if i == label_col {
                    labels.push(cell.to_string());
                } else {
                    row.push(S::parse_decimal(cell).ok_or_else(|| Error::Parse {
                        line,
                        field: Some(header[i].clone()),
                        message: format!("`{cell}` is not a number"),
                    })?);
                }
            }
            rows.push(row);
        }
        Ok(Dataset {
            feature_names,
            rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn csv_error(e: &csv::Error) -> Error {
    Error::Parse {
        line: e.position().map(|p| p.line() as usize),
        field: None,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_column_by_name_or_last() {
        let d: Dataset<f64> = Dataset::parse("label,x1,x2\n1,0.5,2\n0,0.1,3\n", b',').unwrap();
        assert_eq!(d.feature_names, vec!["x1", "x2"]);
        assert_eq!(d.rows[1], vec![0.1, 3.0]);
        assert_eq!(d.labels, vec!["1", "0"]);
        let d: Dataset<f64> = Dataset::parse("x1\ty\n0.7\t1\n", b'\t').unwrap();
        assert_eq!(d.rows, vec![vec![0.7]]);
        assert_eq!(d.labels, vec!["1"]);
    }

    #[test]
    fn bad_cell_reports_line_and_column() {
        match Dataset::<f64>::parse("x1,label\n0.5,1\nzz,0\n", b',') {
            Err(Error::Parse {
                line: Some(3),
                field: Some(f),
                ..
            }) => assert_eq!(f, "x1"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
