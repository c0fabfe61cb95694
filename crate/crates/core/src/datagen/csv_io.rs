use std::path::Path;

use super::{DataError, Dataset};

/// Column selection for [`load_csv_dataset`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub label_column: String,
    /// Feature columns in order; empty selects every column except the label.
    pub feature_columns: Vec<String>,
    /// Min-max scale each feature column to `[0, 1]`.
    pub normalize: bool,
}

/// Loads a headered, UTF-8, comma-separated file. Rows keep file order. Data
/// rows are numbered from 1 in error messages.
pub fn load_csv_dataset(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => DataError::Io {
                path: path.display().to_string(),
                source,
            },
            kind => DataError::InvalidArgument(format!("{kind:?}")),
        })?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                column: name.to_string(),
            })
    };
    let label_idx = find(&opts.label_column)?;
    let feature_idx: Vec<usize> = if opts.feature_columns.is_empty() {
        (0..headers.len()).filter(|&i| i != label_idx).collect()
    } else {
        opts.feature_columns
            .iter()
            .map(|c| find(c))
            .collect::<Result<_, _>>()?
    };
    if feature_idx.is_empty() {
        return Err(DataError::InvalidArgument("no feature columns selected".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_no + 1;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let raw_label = cell(label_idx);
        let label: usize = raw_label.parse().map_err(|_| DataError::Parse {
            row,
            column: headers[label_idx].to_string(),
            value: raw_label.to_string(),
        })?;
        labels.push(label);
        for &j in &feature_idx {
            let raw = cell(j);
            let v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::Parse {
                    row,
                    column: headers[j].to_string(),
                    value: raw.to_string(),
                })?;
            features.push(v);
        }
    }
    let m = feature_idx.len();
    if opts.normalize && !labels.is_empty() {
        for j in 0..m {
            let col = features.iter().skip(j).step_by(m);
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            let span = hi - lo;
            for v in features.iter_mut().skip(j).step_by(m) {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
    }
    let n_classes = labels.iter().max().map_or(0, |&c| c + 1);
    Dataset::new(features, labels, m, n_classes)
}

/// Writes `f0..f{m-1},label` with shortest round-trip float formatting.
pub fn write_csv_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = (0..ds.n_features()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.label(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn opts(features: &[&str]) -> CsvOptions {
        CsvOptions {
            label_column: "y".into(),
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            normalize: false,
        }
    }

    #[test]
    fn loads_well_formed_file() {
        let f = write("a,b,y\n1,2,0\n3,4,1\n5,6,0\n7.5,-8,2\n");
        let ds = load_csv_dataset(f.path(), &opts(&["a", "b"])).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.row(3), &[7.5, -8.0]);
        assert_eq!(ds.n_classes(), 3);
    }

    #[test]
    fn bad_label_cites_row() {
        let f = write("a,b,y\n1,2,0\n3,4,1\n5,6,abc\n");
        let err = load_csv_dataset(f.path(), &opts(&["a", "b"])).unwrap_err();
        match err {
            DataError::Parse { row, ref column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("row 3"));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let f = write("a,y\n1,0\n");
        let err = load_csv_dataset(f.path(), &opts(&["a", "zz"])).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn { ref column } if column == "zz"));
    }

    #[test]
    fn normalizes_columns() {
        let f = write("a,b,y\n0,5,0\n10,5,1\n5,5,0\n");
        let mut o = opts(&[]);
        o.normalize = true;
        let ds = load_csv_dataset(f.path(), &o).unwrap();
        assert_eq!(ds.row(0), &[0.0, 0.0]);
        assert_eq!(ds.row(1), &[1.0, 0.0]);
        assert_eq!(ds.row(2), &[0.5, 0.0]);
    }
}
