//! Dataset files.
//!
//! CSV: a first record `p,C`, then one record per sample holding the
//! 1-based label followed by the `p` inputs.
//!
//! Binary (little-endian): the magic bytes `CRFS`, a `u32` version, `n`, `p`
//! and `C` as `u64`, the `n × p` inputs as row-major `f64`, then `n` labels
//! as 0-based `u32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::RawDataset;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"CRFS";
pub const BINARY_VERSION: u32 = 1;

pub fn write_csv(ds: &RawDataset, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(BufWriter::new(File::create(path)?));
    w.write_record([ds.n_inputs().to_string(), ds.classes().to_string()])?;
    let mut record = Vec::with_capacity(ds.n_inputs() + 1);
    for (row, &y) in ds.x().rows().into_iter().zip(ds.labels()) {
        record.clear();
        record.push((y + 1).to_string());
        record.extend(row.iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<RawDataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(File::open(path)?));
    let mut records = r.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(malformed(path, "empty file")),
    };
    let dims: Vec<usize> = header
        .iter()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| malformed(path, "expected two nonnegative integers `p,C`"))?;
    let [p, classes] = dims[..] else {
        return Err(malformed(path, "expected two fields `p,C`"));
    };
    if classes == 0 {
        return Err(malformed(path, "class count must be positive"));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != p + 1 {
            return Err(shape(path, format!("row {row} has {} fields, expected {}", rec.len(), p + 1)));
        }
        let label: i64 = rec[0]
            .parse()
            .map_err(|_| shape(path, format!("row {row}: label `{}` is not an integer", &rec[0])))?;
        if label < 1 || label as usize > classes {
            return Err(Error::LabelOutOfRange { row, label, classes });
        }
        labels.push(label as usize - 1);
        for f in rec.iter().skip(1) {
            values.push(
                f.parse::<f64>()
                    .map_err(|_| shape(path, format!("row {row}: `{f}` is not a number")))?,
            );
        }
    }
    let x = Array2::from_shape_vec((labels.len(), p), values).expect("row lengths checked");
    RawDataset::new(x, labels, classes)
}

pub fn write_binary(ds: &RawDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    for dim in [ds.n_samples(), ds.n_inputs(), ds.classes()] {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    for v in ds.x().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &y in ds.labels() {
        w.write_all(&(y as u32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<RawDataset> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 {
        return Err(malformed(path, "file shorter than the header"));
    }
    if bytes[..4] != BINARY_MAGIC {
        return Err(malformed(path, "missing CRFS magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::UnknownVersion(version));
    }
    let dim = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap());
    let (n, p, classes) = (dim(0), dim(1), dim(2));
    let body = (n as u128) * (p as u128) * 8 + (n as u128) * 4;
    if (bytes.len() - 32) as u128 != body {
        return Err(shape(
            path,
            format!("n={n}, p={p} needs {body} payload bytes, found {}", bytes.len() - 32),
        ));
    }
    let (n, p) = (n as usize, p as usize);
    let floats = &bytes[32..32 + n * p * 8];
    let values = floats
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels: Vec<usize> = bytes[32 + n * p * 8..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    if let Some(row) = labels.iter().position(|&y| y as u64 >= classes) {
        return Err(Error::LabelOutOfRange {
            row,
            label: labels[row] as i64 + 1,
            classes: classes as usize,
        });
    }
    let x = Array2::from_shape_vec((n, p), values).expect("payload length checked");
    RawDataset::new(x, labels, classes as usize)
}

fn malformed(path: &Path, reason: &str) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn shape(path: &Path, reason: String) -> Error {
    Error::DatasetShape {
        path: path.to_path_buf(),
        reason,
    }
}
