use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::types::{CostMatrix, Histogram};

fn parse_rows(bytes: &[u8]) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Parse { line: 0, message: format!("not UTF-8: {e}") })?;
    let mut rows = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let field = field.trim();
            let value: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("not a number: {field:?}") })?;
            if !value.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite value {field:?}") });
            }
            row.push(value);
        }
        rows.push((line, row));
    }
    if rows.is_empty() {
        return Err(Error::Empty("csv input"));
    }
    Ok(rows)
}

/// Reads a histogram written either one value per line or as one
/// comma-separated row.
pub fn read_histogram_csv(bytes: &[u8]) -> Result<Histogram> {
    let rows = parse_rows(bytes)?;
    let values = if rows.len() == 1 {
        rows.into_iter().next().map(|(_, r)| r).unwrap_or_default()
    } else {
        let mut values = Vec::with_capacity(rows.len());
        for (line, row) in rows {
            if row.len() != 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected one value per line, found {}", row.len()),
                });
            }
            values.push(row[0]);
        }
        values
    };
    Histogram::new(values)
}

/// One value per line, shortest representation that parses back exactly.
pub fn write_histogram_csv(h: &Histogram) -> Vec<u8> {
    let mut out = String::new();
    for v in h.values() {
        out.push_str(&format!("{v}\n"));
    }
    out.into_bytes()
}

pub fn read_cost_csv(bytes: &[u8]) -> Result<CostMatrix> {
    let rows = parse_rows(bytes)?;
    let width = rows[0].1.len();
    let mut flat = Vec::with_capacity(rows.len() * width);
    for (line, row) in &rows {
        if row.len() != width {
            return Err(Error::Parse {
                line: *line,
                message: format!("row has {} fields, expected {width}", row.len()),
            });
        }
        flat.extend_from_slice(row);
    }
    let entries = Array2::from_shape_vec((rows.len(), width), flat)
        .map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    CostMatrix::new(entries)
}

/// Comma-separated rows in shortest round-trip form.
pub fn write_matrix_csv(m: ArrayView2<'_, f64>) -> Vec<u8> {
    let mut out = String::new();
    for row in m.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn histogram_row_and_column_forms() {
        assert_eq!(read_histogram_csv(b"0.5,0.5").unwrap().values(), &[0.5, 0.5]);
        assert_eq!(read_histogram_csv(b"0.25\n0.75\n").unwrap().values(), &[0.25, 0.75]);
        assert_eq!(read_histogram_csv(b"1.0").unwrap().values(), &[1.0]);
    }

    #[test]
    fn histogram_off_by_more_than_tolerance_rejected() {
        assert!(matches!(read_histogram_csv(b"0.3,0.3,0.3"), Err(Error::NotNormalized { .. })));
        assert!(matches!(read_histogram_csv(b"1.5,-0.5"), Err(Error::NegativeEntry { .. })));
        assert!(matches!(read_histogram_csv(b"0.5\nx"), Err(Error::Parse { line: 2, .. })));
        assert!(read_histogram_csv(b"0.5,0.5\n0.5").is_err());
    }

    #[test]
    fn cost_matrices() {
        assert_eq!(read_cost_csv(b"0,1\n1,0").unwrap().entries(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(read_cost_csv(b"0").unwrap().entries(), &array![[0.0]]);
        assert!(read_cost_csv(b"0,inf").is_err());
        assert!(matches!(read_cost_csv(b"0,1\n1"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let h = Histogram::new(vec![0.25, 0.5, 0.125, 0.125]).unwrap();
        assert_eq!(read_histogram_csv(&write_histogram_csv(&h)).unwrap(), h);
        let m = array![[1.0 / 3.0, 2e-17], [5.0, 0.1]];
        assert_eq!(read_cost_csv(&write_matrix_csv(m.view())).unwrap().entries(), &m);
    }
}
