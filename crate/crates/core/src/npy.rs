//! Minimal NPY (format 1.0) reader/writer for little-endian `f4`/`f8`
//! arrays in C order.
//!
//! Headers are laid out exactly as numpy writes them: the dict literal,
//! spare spaces for the leading axis to grow, then space padding so that
//! the data starts on a 64-byte boundary, then a newline.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
const GROWTH_AXIS_MAX_DIGITS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F4,
    F8,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F4 => "<f4",
            Dtype::F8 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }
}

/// A decoded array; values are widened to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NpyArray {
    pub fn into_array2(self) -> Result<Array2<f64>> {
        match self.shape[..] {
            [r, c] => Ok(Array2::from_shape_vec((r, c), self.data).expect("validated on read")),
            _ => Err(Error::Npy(format!("expected a 2-D array, got shape {:?}", self.shape))),
        }
    }

    pub fn into_arrayd(self) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&self.shape), self.data).expect("validated on read")
    }
}

fn shape_repr(shape: &[usize]) -> String {
    match shape {
        [] => "()".into(),
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    }
}

/// The full preamble: magic, version, header length and padded header.
pub fn header_bytes(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_repr(shape)
    );
    if let Some(first) = shape.first() {
        header.push_str(&" ".repeat(GROWTH_AXIS_MAX_DIGITS - first.to_string().len()));
    }
    // magic(6) + version(2) + length(2) + header + newline
    let unpadded = 10 + header.len() + 1;
    let pad = ALIGN - unpadded % ALIGN;
    header.push_str(&" ".repeat(pad));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out
}

/// Writes `data` (C order) with the given shape and on-disk dtype.
pub fn write_to<W: Write>(mut w: W, dtype: Dtype, shape: &[usize], data: &[f64]) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::Npy(format!(
            "shape {shape:?} needs {expected} values, got {}",
            data.len()
        )));
    }
    let io_err = |e: io::Error| Error::Npy(e.to_string());
    w.write_all(&header_bytes(dtype, shape)).map_err(io_err)?;
    let mut bytes = Vec::with_capacity(data.len() * dtype.size());
    match dtype {
        Dtype::F4 => data.iter().for_each(|&v| bytes.extend_from_slice(&(v as f32).to_le_bytes())),
        Dtype::F8 => data.iter().for_each(|&v| bytes.extend_from_slice(&v.to_le_bytes())),
    }
    w.write_all(&bytes).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn write_file(path: impl AsRef<Path>, dtype: Dtype, shape: &[usize], data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_to(BufWriter::new(file), dtype, shape, data)
}

/// Writes a 2-D array in logical (row-major) order regardless of layout.
pub fn write_array2(path: impl AsRef<Path>, dtype: Dtype, array: &Array2<f64>) -> Result<()> {
    let data: Vec<f64> = array.iter().copied().collect();
    write_file(path, dtype, &[array.nrows(), array.ncols()], &data)
}

fn parse_header(header: &str) -> Result<(Dtype, bool, Vec<usize>)> {
    let value_after = |key: &str| -> Result<&str> {
        let pat = format!("'{key}':");
        let at = header
            .find(&pat)
            .ok_or_else(|| Error::Npy(format!("header lacks {key}: {header}")))?;
        Ok(header[at + pat.len()..].trim_start())
    };

    let descr = value_after("descr")?;
    let dtype = if descr.starts_with("'<f4'") {
        Dtype::F4
    } else if descr.starts_with("'<f8'") {
        Dtype::F8
    } else {
        let end = descr.find(',').unwrap_or(descr.len());
        return Err(Error::Npy(format!("unsupported dtype {}", &descr[..end])));
    };

    let fortran = value_after("fortran_order")?;
    let fortran = if fortran.starts_with("False") {
        false
    } else if fortran.starts_with("True") {
        true
    } else {
        return Err(Error::Npy("bad fortran_order value".into()));
    };

    let shape = value_after("shape")?;
    let close = shape
        .find(')')
        .ok_or_else(|| Error::Npy("unterminated shape tuple".into()))?;
    let dims = shape[..close]
        .trim_start_matches('(')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| Error::Npy(format!("bad dimension {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((dtype, fortran, dims))
}

pub fn read_from<R: Read>(mut r: R) -> Result<NpyArray> {
    let io_err = |e: io::Error| Error::Npy(e.to_string());
    let mut preamble = [0u8; 8];
    r.read_exact(&mut preamble).map_err(io_err)?;
    if &preamble[..6] != MAGIC {
        return Err(Error::Npy("missing \\x93NUMPY magic".into()));
    }
    let header_len = match preamble[6] {
        1 => {
            let mut len = [0u8; 2];
            r.read_exact(&mut len).map_err(io_err)?;
            u16::from_le_bytes(len) as usize
        }
        2 | 3 => {
            let mut len = [0u8; 4];
            r.read_exact(&mut len).map_err(io_err)?;
            u32::from_le_bytes(len) as usize
        }
        v => return Err(Error::Npy(format!("unsupported format version {v}"))),
    };
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header).map_err(io_err)?;
    let header = String::from_utf8(header).map_err(|_| Error::Npy("header is not UTF-8".into()))?;
    let (dtype, fortran, shape) = parse_header(&header)?;
    if fortran {
        return Err(Error::Npy("Fortran-order arrays are not supported".into()));
    }

    let count: usize = shape.iter().product();
    let mut bytes = vec![0u8; count * dtype.size()];
    r.read_exact(&mut bytes).map_err(io_err)?;
    let data = match dtype {
        Dtype::F4 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F8 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok(NpyArray { dtype, shape, data })
}

pub fn read_file(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(BufReader::new(file))
}
