//! CSV export/import with header `label,f0,f1,…`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{dense_class_count, Dataset};
use crate::error::{Error, Result};

pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::format("<csv output>", e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..ds.dim()).map(|j| format!("f{j}")))
        .collect();
    w.write_record(&header).map_err(to_err)?;
    for (row, label) in ds.features().outer_iter().zip(ds.labels()) {
        let record: Vec<String> = std::iter::once(label.to_string())
            .chain(row.iter().map(|v| format!("{v:?}")))
            .collect();
        w.write_record(&record).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Reads a dataset written by [`write_csv`]. `source` names the input in errors.
pub fn read_csv<R: Read>(input: R, source: &Path, name: &str) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::format(source, e.to_string()))?.clone();
    let dim = header.len().saturating_sub(1);
    if header.get(0) != Some("label") || header.iter().skip(1).enumerate().any(|(j, h)| h != format!("f{j}")) {
        return Err(Error::format(source, format!("expected header label,f0,f1,…; got {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(source, e.to_string()))?;
        let row = line + 2;
        let label: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(source, format!("line {row}: label `{}` is not a class index", &rec[0])))?;
        labels.push(label);
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(source, format!("line {row}: `{field}` is not a number")))?;
            values.push(v);
        }
    }
    let features = Array2::from_shape_vec((labels.len(), dim), values).map_err(|e| Error::format(source, e.to_string()))?;
    let k = dense_class_count(&labels).map_err(|d| Error::format(source, d))?;
    Dataset::new(name, features, labels, k)
}
