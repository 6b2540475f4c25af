//! RSEB: a little-endian binary container for one `f32` matrix.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RSEB"
//! 4       4     version (u32) = 1
//! 8       8     rows (u64)
//! 16      8     dim (u64)
//! 24      4     flags (u32), bit 0 = rows are unit-norm
//! 28      ...   rows × dim binary32 values, row-major
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rsvl_core::EmbeddingMatrix;

pub const MAGIC: [u8; 4] = *b"RSEB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
pub const FLAG_NORMALIZED: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RsebError {
    #[error("bad magic {found:?}, expected \"RSEB\"")]
    BadMagic { found: [u8; 4] },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("unsupported version {0}")]
    VersionUnsupported(u32),
    #[error("unknown flag bits {0:#x}")]
    UnknownFlags(u32),
    #[error("{extra} bytes of trailing data after the matrix")]
    TrailingData { extra: u64 },
    #[error("matrix shape {rows}×{dim} does not fit in memory")]
    TooLarge { rows: u64, dim: u64 },
    #[error(transparent)]
    Matrix(#[from] rsvl_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingMatrix, RsebError> {
    let found = bytes.len() as u64;
    if bytes.len() < 4 {
        return Err(RsebError::TruncatedFile {
            expected: HEADER_LEN as u64,
            found,
        });
    }
    if bytes[..4] != MAGIC {
        return Err(RsebError::BadMagic {
            found: bytes[..4].try_into().expect("4-byte slice"),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(RsebError::TruncatedFile {
            expected: HEADER_LEN as u64,
            found,
        });
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(RsebError::VersionUnsupported(version));
    }
    let (rows, dim, flags) = (u64_at(bytes, 8), u64_at(bytes, 16), u32_at(bytes, 24));
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(RsebError::UnknownFlags(flags));
    }
    let too_large = || RsebError::TooLarge { rows, dim };
    let values = rows.checked_mul(dim).ok_or_else(too_large)?;
    let expected = values
        .checked_mul(4)
        .and_then(|b| b.checked_add(HEADER_LEN as u64))
        .ok_or_else(too_large)?;
    if found < expected {
        return Err(RsebError::TruncatedFile { expected, found });
    }
    if found > expected {
        return Err(RsebError::TrailingData {
            extra: found - expected,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    let rows = usize::try_from(rows).map_err(|_| too_large())?;
    let dim = usize::try_from(dim).map_err(|_| too_large())?;
    let m = EmbeddingMatrix::new(rows, dim, data)?;
    Ok(m.with_normalized_flag(flags & FLAG_NORMALIZED != 0)?)
}

pub fn encode(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u64).to_le_bytes());
    let flags = if m.is_normalized() {
        FLAG_NORMALIZED
    } else {
        0
    };
    out.extend_from_slice(&flags.to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, RsebError> {
    decode(&fs::read(path)?)
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), RsebError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&encode(m))?;
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rsvl_core::matrix::l2_normalize;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = EmbeddingMatrix::new(
            2,
            3,
            vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5, f32::MAX, -1e-30],
        )
        .unwrap();
        let bytes = encode(&m);
        assert_eq!(bytes.len(), HEADER_LEN + 24);
        let back = decode(&bytes).unwrap();
        assert_eq!(encode(&back), bytes);
        let bits: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(
            bits,
            m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn normalized_flag_survives() {
        let m = l2_normalize(&EmbeddingMatrix::new(1, 2, vec![3.0, 4.0]).unwrap()).unwrap();
        let back = decode(&encode(&m)).unwrap();
        assert!(back.is_normalized());
        assert_eq!(u32_at(&encode(&m), 24), FLAG_NORMALIZED);
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let m = EmbeddingMatrix::zeros(0, 7);
        let bytes = encode(&m);
        assert_eq!(bytes.len(), HEADER_LEN);
        let back = decode(&bytes).unwrap();
        assert_eq!((back.rows(), back.dim()), (0, 7));
    }

    #[test]
    fn malformed_inputs() {
        let good = encode(&EmbeddingMatrix::zeros(2, 2));
        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bad), Err(RsebError::BadMagic { found }) if &found == b"XXXX"));
        assert!(matches!(
            decode(&good[..good.len() - 1]),
            Err(RsebError::TruncatedFile { .. })
        ));
        assert!(matches!(
            decode(&good[..10]),
            Err(RsebError::TruncatedFile { .. })
        ));
        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(decode(&v2), Err(RsebError::VersionUnsupported(2))));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(
            decode(&long),
            Err(RsebError::TrailingData { extra: 1 })
        ));
        let mut huge = good;
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&huge), Err(RsebError::TooLarge { .. })));
    }

    #[test]
    fn flag_is_checked_against_data() {
        let mut bytes = encode(&EmbeddingMatrix::new(1, 2, vec![3.0, 4.0]).unwrap());
        bytes[24] = 1;
        assert!(matches!(decode(&bytes), Err(RsebError::Matrix(_))));
    }
}
