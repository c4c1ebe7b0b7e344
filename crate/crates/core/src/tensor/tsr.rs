//! TSR tensor files.
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "TSR1"
//! 4       1           element type (0 = f64, 1 = f32)
//! 5       1           rank (always 2)
//! 6       2           reserved, 0
//! 8       8 * rank    dimensions as u64 (rows, cols)
//! 24      ...         row-major payload
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ElementType, Matrix, Real};

pub const MAGIC: &[u8; 4] = b"TSR1";
pub const HEADER_LEN: usize = 8 + 2 * 8;

pub fn encode<T: Real>(m: &Matrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.bytes());
    out.extend_from_slice(MAGIC);
    out.push(T::ELEMENT.tag());
    out.push(2);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &x in m.as_slice() {
        x.write_le(&mut out);
    }
    out
}

/// Parsed header fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub element: ElementType,
    pub rows: usize,
    pub cols: usize,
}

pub fn decode_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            what: "header",
            expected: 8,
            found: bytes.len() as u64,
        });
    }
    let element = ElementType::from_tag(bytes[4]).ok_or(Error::UnknownElementType(bytes[4]))?;
    let rank = bytes[5];
    if rank != 2 {
        return Err(Error::UnsupportedRank(rank));
    }
    let reserved = u16::from_le_bytes([bytes[6], bytes[7]]);
    if reserved != 0 {
        return Err(Error::ReservedNonZero(reserved));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            what: "dimensions",
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let dim = |at: usize| {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[at..at + 8]);
        u64::from_le_bytes(b)
    };
    let (rows64, cols64) = (dim(8), dim(16));
    let rows = usize::try_from(rows64).map_err(|_| overflow_of(rows64, cols64))?;
    let cols = usize::try_from(cols64).map_err(|_| overflow_of(rows64, cols64))?;
    rows.checked_mul(cols)
        .and_then(|n| n.checked_mul(element.size()))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| overflow_of(rows64, cols64))?;
    Ok(Header {
        element,
        rows,
        cols,
    })
}

fn overflow_of(rows: u64, cols: u64) -> Error {
    Error::DimensionOverflow { rows, cols }
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<Matrix<T>> {
    let header = decode_header(bytes)?;
    if header.element != T::ELEMENT {
        return Err(Error::ElementTypeMismatch {
            expected: T::ELEMENT.name(),
            found: header.element.name(),
        });
    }
    let size = T::ELEMENT.size();
    let payload_len = header.rows * header.cols * size;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::Truncated {
            what: "payload",
            expected: payload_len as u64,
            found: payload.len() as u64,
        });
    }
    if payload.len() > payload_len {
        return Err(Error::TrailingBytes {
            trailing: (payload.len() - payload_len) as u64,
        });
    }
    let data = payload.chunks_exact(size).map(T::read_le).collect();
    Matrix::from_vec(header.rows, header.cols, data)
}

pub fn write<T: Real>(m: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(m)).map_err(|e| Error::io(path, e))
}

pub fn read<T: Real>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
