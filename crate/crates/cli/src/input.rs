//! Numeric CSV input.

use std::path::Path;

use sepspec::model::RMatrix;

use crate::error::CliError;

/// Reads a dense matrix of finite reals. Rows of the file become rows of the
/// matrix unless `transpose` is set.
pub fn read_matrix(path: &Path, header: bool, transpose: bool) -> Result<RMatrix, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let line = r + 1 + header as usize;
        let mut values = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::data(format!("{}: row {line}, column {}: `{field}` is not a number", path.display(), c + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::data(format!("{}: row {line}, column {}: value is not finite", path.display(), c + 1)));
            }
            values.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(CliError::data(format!(
                    "{}: row {line} has {} columns, expected {}",
                    path.display(),
                    values.len(),
                    first.len()
                )));
            }
        }
        rows.push(values);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::data(format!("{}: no data", path.display())));
    }
    let m = RMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    Ok(if transpose { m.transpose() } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_and_transposes() {
        let f = temp("1,2,3\n4,5,6\n");
        let m = read_matrix(f.path(), false, false).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 0)], 4.0);
        let t = read_matrix(f.path(), false, true).unwrap();
        assert_eq!(t.shape(), (3, 2));
        let h = temp("a,b\n1,2\n");
        assert_eq!(read_matrix(h.path(), true, false).unwrap().shape(), (1, 2));
    }

    #[test]
    fn names_bad_cells() {
        let f = temp("1,2\n3,x\n");
        let err = read_matrix(f.path(), false, false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("row 2, column 2"), "{err}");
        assert!(read_matrix(temp("1,2\n3\n").path(), false, false).is_err());
        assert!(read_matrix(temp("").path(), false, false).is_err());
        assert_eq!(read_matrix(Path::new("/nonexistent/file.csv"), false, false).unwrap_err().exit_code(), 1);
    }
}
