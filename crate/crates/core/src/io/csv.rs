//! Comma-separated numeric grids, one image row per line.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsvGrid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn decode_csv(bytes: &[u8]) -> Result<CsvGrid> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(bytes);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut record = csv::ByteRecord::new();
    loop {
        let at = rdr.position().byte() as usize;
        match rdr.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let offset = e.position().map_or(at, |p| p.byte() as usize);
                return Err(Error::parse(offset, e.to_string()));
            }
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let start = record.position().map_or(at, |p| p.byte() as usize);
        match cols {
            None => cols = Some(record.len()),
            Some(n) if n != record.len() => {
                return Err(Error::parse(start, format!("row {rows} has {} fields, expected {n}", record.len())));
            }
            _ => {}
        }
        for k in 0..record.len() {
            let field = &record[k];
            let v = std::str::from_utf8(field).ok().and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
            match v {
                Some(v) => values.push(v),
                None => {
                    let offset = field_offset(bytes, start, k);
                    return Err(Error::parse(offset, format!("field `{}` is not a finite number", String::from_utf8_lossy(field))));
                }
            }
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(bytes.len(), "empty image"))?;
    Ok(CsvGrid { rows, cols, values })
}

/// Byte offset of the `k`-th field of the line starting at `start`.
fn field_offset(bytes: &[u8], start: usize, k: usize) -> usize {
    let mut commas = 0;
    let mut p = start;
    while p < bytes.len() && commas < k {
        if bytes[p] == b',' {
            commas += 1;
        }
        p += 1;
    }
    while p < bytes.len() && (bytes[p] == b' ' || bytes[p] == b'\t') {
        p += 1;
    }
    p
}

/// One line per row, values written with shortest round-trip formatting.
pub fn encode_csv<T: std::fmt::Display>(rows: usize, cols: usize, values: &[T]) -> Result<Vec<u8>> {
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch { what: "grid", expected: rows * cols, found: values.len() });
    }
    let mut out = String::new();
    for row in values.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out.into_bytes())
}
