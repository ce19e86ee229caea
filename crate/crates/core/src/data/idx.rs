//! IDX container files as used by the MNIST distribution.

use std::path::Path;

use ndarray::{Array1, Array3};

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    /// `n × rows × cols` pixel intensities.
    Images(Array3<u8>),
    Labels(Array1<u8>),
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::TruncatedPayload {
            expected: at + 4,
            actual: bytes.len(),
        })
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = read_u32(bytes, 0)?;
    let ndims = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => return Err(Error::BadMagic(other)),
    };
    let dims = (0..ndims)
        .map(|d| read_u32(bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndims;
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let payload = bytes[header..].to_vec();
    Ok(match ndims {
        3 => IdxData::Images(
            Array3::from_shape_vec((dims[0], dims[1], dims[2]), payload).expect("size checked"),
        ),
        _ => IdxData::Labels(Array1::from_vec(payload)),
    })
}

pub fn write_idx(data: &IdxData) -> Vec<u8> {
    let mut out = Vec::new();
    match data {
        IdxData::Images(images) => {
            out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
            let (n, r, c) = images.dim();
            for d in [n, r, c] {
                out.extend_from_slice(&(d as u32).to_be_bytes());
            }
            out.extend(images.iter().copied());
        }
        IdxData::Labels(labels) => {
            out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
            out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
            out.extend(labels.iter().copied());
        }
    }
    out
}

pub fn read_idx_file(path: impl AsRef<Path>) -> Result<IdxData> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)
        .map_err(|e| Error::MissingData(format!("{}: {e}", path.display())))?;
    parse_idx(&bytes)
}
