//! Message store file: `"MPIR1"`, `q: u64`, `K: u32`, `m: u32` (all
//! little-endian), then `K * m` elements as little-endian `u64`,
//! message-major.

use std::fs;
use std::io;
use std::path::Path;

use mpir_core::gf::{Field, MessageStore};
use rand::RngCore;

pub const MAGIC: &[u8; 5] = b"MPIR1";
pub const HEADER_LEN: usize = 21;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic, not a store file")]
    BadMagic,
    #[error("store file is {actual} bytes, expected {expected}")]
    Length { expected: usize, actual: usize },
    #[error("invalid store: {0}")]
    Invalid(#[from] mpir_core::Error),
}

/// A decoded store file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreFile {
    pub store: MessageStore,
}

impl StoreFile {
    pub fn random<R: RngCore>(q: u64, k: usize, m: usize, rng: &mut R) -> Result<Self, StoreError> {
        let field = Field::new(q)?;
        Ok(StoreFile { store: MessageStore::random(field, k, m, rng) })
    }

    pub fn encode(&self) -> Vec<u8> {
        let s = &self.store;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * s.k() * s.m());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&s.field().order().to_le_bytes());
        out.extend_from_slice(&(s.k() as u32).to_le_bytes());
        out.extend_from_slice(&(s.m() as u32).to_le_bytes());
        for x in s.messages().iter().flatten() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.len() < HEADER_LEN {
            return Err(StoreError::Length { expected: HEADER_LEN, actual: bytes.len() });
        }
        if &bytes[..5] != MAGIC {
            return Err(StoreError::BadMagic);
        }
        let q = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes"));
        let k = u32::from_le_bytes(bytes[13..17].try_into().expect("4 bytes")) as usize;
        let m = u32::from_le_bytes(bytes[17..21].try_into().expect("4 bytes")) as usize;
        let expected = k
            .checked_mul(m)
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or(StoreError::Length { expected: usize::MAX, actual: bytes.len() })?;
        if bytes.len() != expected {
            return Err(StoreError::Length { expected, actual: bytes.len() });
        }
        let elems: Vec<u64> =
            bytes[HEADER_LEN..].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let messages = if m == 0 { vec![Vec::new(); k] } else { elems.chunks(m).map(<[u64]>::to_vec).collect() };
        let store = MessageStore::new(Field::new(q)?, m, messages)?;
        Ok(StoreFile { store })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::decode(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        fs::write(path, self.encode())?;
        Ok(())
    }
}
