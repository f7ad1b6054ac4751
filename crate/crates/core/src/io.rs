//! npy (version 1.0, 2-D, C-order, little-endian f4/f8) and csv readers and writers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Npy,
    Csv,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("npy") => Ok(FileFormat::Npy),
            Some("csv") | Some("txt") => Ok(FileFormat::Csv),
            _ => Err(Error::Format(format!(
                "{}: cannot infer format from extension (expected .npy or .csv)",
                path.display()
            ))),
        }
    }
}

pub fn load_embeddings<T: Real>(path: &Path, format: FileFormat) -> Result<EmbeddingSet<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let set = match format {
        FileFormat::Npy => read_npy(&mut reader).map_err(|e| annotate(e, path))?,
        FileFormat::Csv => read_csv(&mut reader).map_err(|e| annotate(e, path))?,
    };
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(set
        .with_label(stem)
        .with_source(path.display().to_string()))
}

pub fn save_embeddings<T: Real>(set: &EmbeddingSet<T>, path: &Path, format: FileFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        FileFormat::Npy => write_npy(&mut w, set.rows(), set.dims(), set.as_slice()),
        FileFormat::Csv => write_csv(&mut w, set),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn annotate(err: Error, path: &Path) -> Error {
    match err {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

#[derive(Debug, PartialEq)]
struct NpyHeader {
    dtype: Dtype,
    shape: (usize, usize),
}

pub fn read_npy<T: Real, R: Read>(reader: &mut R) -> Result<EmbeddingSet<T>> {
    let header = read_npy_header(reader)?;
    let (rows, dims) = header.shape;
    let count = rows
        .checked_mul(dims)
        .ok_or_else(|| Error::Format("npy shape overflows".into()))?;
    let width = match header.dtype {
        Dtype::F4 => 4,
        Dtype::F8 => 8,
    };
    let mut bytes = vec![0u8; count * width];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("npy payload shorter than {rows}x{dims} values")))?;
    let mut trailing = [0u8; 1];
    if matches!(reader.read(&mut trailing), Ok(n) if n > 0) {
        return Err(Error::Format("npy payload longer than its declared shape".into()));
    }
    let data: Vec<T> = match header.dtype {
        Dtype::F4 => bytes
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect(),
        Dtype::F8 => bytes
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect(),
    };
    EmbeddingSet::from_flat(rows, dims, data)
}

fn read_npy_header<R: Read>(reader: &mut R) -> Result<NpyHeader> {
    let mut preamble = [0u8; 10];
    reader
        .read_exact(&mut preamble)
        .map_err(|_| Error::Format("file too short for an npy header".into()))?;
    if &preamble[..6] != NPY_MAGIC {
        return Err(Error::Format("missing npy magic string".into()));
    }
    if preamble[6] != 1 || preamble[7] != 0 {
        return Err(Error::Format(format!(
            "unsupported npy version {}.{} (only 1.0)",
            preamble[6], preamble[7]
        )));
    }
    let len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut dict = vec![0u8; len];
    reader
        .read_exact(&mut dict)
        .map_err(|_| Error::Format("truncated npy header".into()))?;
    let dict = std::str::from_utf8(&dict)
        .map_err(|_| Error::Format("npy header is not ASCII".into()))?;
    parse_header_dict(dict)
}

/// Parse the python-literal dict of an npy v1.0 header.
fn parse_header_dict(text: &str) -> Result<NpyHeader> {
    let bad = |m: &str| Error::Format(format!("malformed npy header: {m}"));
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.trim_end().strip_suffix('}'))
        .ok_or_else(|| bad("not a dict"))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest).ok_or_else(|| bad("expected quoted key"))?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| bad("expected ':'"))?
            .trim_start();
        let after = match key {
            "descr" => {
                let (v, a) = take_quoted(after).ok_or_else(|| bad("descr must be a string"))?;
                descr = Some(v.to_string());
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else {
                    return Err(bad("fortran_order must be True or False"));
                }
            }
            "shape" => {
                let inner = after.strip_prefix('(').ok_or_else(|| bad("shape must be a tuple"))?;
                let close = inner.find(')').ok_or_else(|| bad("unterminated shape"))?;
                let dims: Vec<usize> = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("shape entries must be integers"))?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(bad(&format!("unexpected key {other:?}"))),
        };
        let after = after.trim_start();
        rest = after.strip_prefix(',').unwrap_or(after).trim_start();
        if !after.starts_with(',') && !rest.is_empty() {
            return Err(bad("expected ',' between entries"));
        }
    }

    let descr = descr.ok_or_else(|| bad("missing 'descr'"))?;
    let dtype = match descr.as_str() {
        "<f4" => Dtype::F4,
        "<f8" => Dtype::F8,
        other => {
            return Err(Error::Format(format!(
                "unsupported npy dtype {other:?} (expected '<f4' or '<f8')"
            )))
        }
    };
    if fortran.ok_or_else(|| bad("missing 'fortran_order'"))? {
        return Err(Error::Format("Fortran-order npy arrays are not supported".into()));
    }
    let shape = shape.ok_or_else(|| bad("missing 'shape'"))?;
    if shape.len() != 2 {
        return Err(Error::Format(format!(
            "npy array must be 2-D, found {} dimensions",
            shape.len()
        )));
    }
    Ok(NpyHeader {
        dtype,
        shape: (shape[0], shape[1]),
    })
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let inner = &s[1..];
    let end = inner.find(q)?;
    Some((&inner[..end], &inner[end + 1..]))
}

/// Write a 2-D C-order npy v1.0 array; header padded so the payload is 64-byte aligned.
pub fn write_npy<T: Real, W: Write>(
    w: &mut W,
    rows: usize,
    dims: usize,
    data: &[T],
) -> std::io::Result<()> {
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({rows}, {dims}), }}",
        T::NPY_DESCR
    );
    let unpadded = NPY_MAGIC.len() + 4 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');
    w.write_all(NPY_MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&(dict.len() as u16).to_le_bytes())?;
    w.write_all(dict.as_bytes())?;
    let mut buf = Vec::with_capacity(std::mem::size_of_val(data));
    for &v in data {
        match T::NPY_DESCR {
            "<f4" => buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes()),
            _ => buf.extend_from_slice(&v.as_f64().to_le_bytes()),
        }
    }
    w.write_all(&buf)
}

pub fn read_csv<T: Real, R: Read>(reader: R) -> Result<EmbeddingSet<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut data = Vec::new();
    let mut dims = None;
    let mut row = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("csv: {e}")))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            // A non-numeric first line is a header.
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(Error::Format(format!(
                    "csv line {}: non-numeric field",
                    line + 1
                )))
            }
        };
        match dims {
            None => dims = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Format(format!(
                    "csv line {}: {} fields, expected {d}",
                    line + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        data.extend(values.into_iter().map(T::lit));
        row += 1;
    }
    let dims = dims.ok_or_else(|| Error::Format("csv contains no numeric rows".into()))?;
    EmbeddingSet::from_flat(row, dims, data)
}

/// One row per line; values printed with the shortest representation that
/// parses back to the identical float.
pub fn write_csv<T: Real, W: Write>(w: &mut W, set: &EmbeddingSet<T>) -> std::io::Result<()> {
    for r in set.iter_rows() {
        let line = r
            .iter()
            .map(|v| format!("{:e}", v.as_f64()))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn npy_bytes(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut out = NPY_MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn csv_three_by_two() {
        let set: EmbeddingSet<f64> = read_csv("0,0\n1,0\n0,1".as_bytes()).unwrap();
        assert_eq!((set.rows(), set.dims()), (3, 2));
        assert_eq!(set.row(2), &[0.0, 1.0]);
    }

    #[test]
    fn csv_header_is_skipped() {
        let set: EmbeddingSet<f64> = read_csv("x,y\n1.5,2\n".as_bytes()).unwrap();
        assert_eq!(set.as_slice(), &[1.5, 2.0]);
    }

    #[test]
    fn csv_nan_is_data_error_at_cell() {
        let err = read_csv::<f64, _>("0,0\n1,nan\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }), "{err:?}");
    }

    #[test]
    fn csv_ragged_is_format_error() {
        let err = read_csv::<f64, _>("0,0\n1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn npy_round_trip_is_bit_exact() {
        let vals = [
            std::f64::consts::PI,
            std::f64::consts::E,
            std::f64::consts::SQRT_2,
            -1e-300,
            1.0 / 3.0,
            f64::MAX,
        ];
        let mut buf = Vec::new();
        write_npy(&mut buf, 2, 3, &vals).unwrap();
        assert_eq!((buf.len() - 48) % 64, 0); // padded header + payload
        let set: EmbeddingSet<f64> = read_npy(&mut buf.as_slice()).unwrap();
        for (a, b) in set.as_slice().iter().zip(vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn npy_f4_is_widened() {
        let payload: Vec<u8> = [1.5f32, -2.25]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let bytes = npy_bytes(
            "{'descr': '<f4', 'fortran_order': False, 'shape': (1, 2), }",
            &payload,
        );
        let set: EmbeddingSet<f64> = read_npy(&mut bytes.as_slice()).unwrap();
        assert_eq!(set.as_slice(), &[1.5, -2.25]);
    }

    #[test]
    fn npy_rejects_unsupported_headers() {
        let cases = [
            "{'descr': '>f8', 'fortran_order': False, 'shape': (1, 1), }",
            "{'descr': '<i8', 'fortran_order': False, 'shape': (1, 1), }",
            "{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1), }",
            "{'descr': '<f8', 'fortran_order': False, 'shape': (1,), }",
            "{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1, 1), }",
            "{'descr': '<f8', 'shape': (1, 1), }",
            "garbage",
        ];
        for h in cases {
            let bytes = npy_bytes(h, &1.0f64.to_le_bytes());
            let err = read_npy::<f64, _>(&mut bytes.as_slice()).unwrap_err();
            assert!(matches!(err, Error::Format(_)), "{h}: {err:?}");
        }
        let mut v2 = npy_bytes(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1), }",
            &1.0f64.to_le_bytes(),
        );
        v2[6] = 2;
        assert!(matches!(
            read_npy::<f64, _>(&mut v2.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn npy_truncated_payload() {
        let bytes = npy_bytes(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }",
            &1.0f64.to_le_bytes(),
        );
        assert!(matches!(
            read_npy::<f64, _>(&mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn npy_non_finite_is_data_error() {
        let payload: Vec<u8> = [1.0f64, f64::INFINITY]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let bytes = npy_bytes(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 1), }",
            &payload,
        );
        assert!(matches!(
            read_npy::<f64, _>(&mut bytes.as_slice()),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }
}
