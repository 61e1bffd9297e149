//! Seed derivation, stable hashing, and atomic file writes.

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

/// Stream tags for [`derive_seed`], one per independent randomness consumer.
pub mod stream {
    pub const INIT: u64 = 0x01;
    pub const SHUFFLE: u64 = 0x02;
    pub const TUPLE: u64 = 0x03;
    pub const VAL_TUPLE: u64 = 0x04;
    pub const MINE_RANDOM: u64 = 0x05;
    pub const SPLIT: u64 = 0x06;
    pub const TOY_TEXT: u64 = 0x07;
    pub const ORTHO: u64 = 0x08;
    pub const TSNE: u64 = 0x09;
    pub const SYNTH: u64 = 0x0a;
    pub const HEAD_INIT: u64 = 0x0b;
    pub const GRAD_CHECK: u64 = 0x0c;
}

fn splitmix64(mut state: u64) -> u64 {
    state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a base seed and a tag sequence.
///
/// The same (base, tags) always yields the same seed; distinct tag sequences
/// yield decorrelated streams.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    state
}

/// Stable 64-bit content hash (first 8 bytes of SHA-256, big-endian).
pub fn stable_hash64(data: &str) -> u64 {
    let digest = Sha256::digest(data.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Hex SHA-256 of a string, used as an embedding-cache key component.
pub fn sha256_hex(data: &str) -> String {
    let digest = Sha256::digest(data.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(out, "{byte:02x}").expect("writing to String cannot fail");
    }
    out
}

/// Writes `contents` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn atomic_write(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp = dir.to_path_buf();
    tmp.push(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
