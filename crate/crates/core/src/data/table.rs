use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Rows keyed by `track_id` with named numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub values: Matrix,
}

impl FeatureTable {
    pub fn new(ids: Vec<String>, names: Vec<String>, values: Matrix) -> Result<Self> {
        if values.rows() != ids.len() {
            return Err(Error::dim("feature table rows", ids.len(), values.rows()));
        }
        if values.cols() != names.len() {
            return Err(Error::dim("feature table columns", names.len(), values.cols()));
        }
        Ok(Self { ids, names, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Rows for `ids` in that order; any id absent from the table is an error.
    pub fn select(&self, ids: &[String]) -> Result<FeatureTable> {
        let index = self.index();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("track {id:?} missing from feature table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            ids: ids.to_vec(),
            names: self.names.clone(),
            values: self.values.select_rows(&rows),
        })
    }

    pub fn read_csv<R: Read>(source: R, context: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(source);
        let headers = reader.headers()?.clone();
        if headers.get(0).map(str::trim) != Some("track_id") {
            return Err(Error::InvalidInput(format!("{context}: first column must be track_id")));
        }
        let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != names.len() + 1 {
                return Err(Error::dim(
                    format!("{context} row {}", line + 2),
                    names.len() + 1,
                    record.len(),
                ));
            }
            ids.push(record[0].trim().to_string());
            for (c, field) in record.iter().skip(1).enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidInput(format!("{context} row {}: {:?} in column {} is not a number", line + 2, field, names[c]))
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("{context} row {}", line + 2)));
                }
                data.push(v);
            }
        }
        let values = Matrix::new(ids.len(), names.len(), data)?;
        Self::new(ids, names, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(BufReader::new(file), &path.display().to_string())
    }

    /// Values use the shortest representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["track_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(self.values.row_iter()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("writing table: {e}")))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        create_parent(path)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(file))
    }
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}
