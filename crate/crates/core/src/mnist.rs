//! Reader for the IDX files the MNIST digits are distributed in.
//!
//! Headers are big-endian: a magic word (`0x00000803` for images,
//! `0x00000801` for labels), the item count, then rows and columns for
//! images. Pixel bytes follow in row-major order.

use std::path::{Path, PathBuf};

use crate::error::{Error, IdxError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const SIDE: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub pixels: [[u8; SIDE]; SIDE],
    pub label: u8,
}

impl RawImage {
    pub fn filled(value: u8, label: u8) -> Self {
        Self {
            pixels: [[value; SIDE]; SIDE],
            label,
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            needed: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found });
    }
    Ok(())
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let body = bytes.get(8..8 + n).ok_or(IdxError::Truncated {
        needed: 8 + n,
        found: bytes.len(),
    })?;
    Ok(body.to_vec())
}

pub fn decode_images(bytes: &[u8]) -> Result<Vec<[[u8; SIDE]; SIDE]>, IdxError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(IdxError::BadShape { rows, cols });
    }
    let needed = 16 + n * SIDE * SIDE;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    Ok(bytes[16..needed]
        .chunks_exact(SIDE * SIDE)
        .map(|chunk| {
            let mut img = [[0u8; SIDE]; SIDE];
            for (row, src) in img.iter_mut().zip(chunk.chunks_exact(SIDE)) {
                row.copy_from_slice(src);
            }
            img
        })
        .collect())
}

/// Zips decoded images with their labels.
pub fn decode_pair(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Vec<RawImage>, IdxError> {
    let images = decode_images(image_bytes)?;
    let labels = decode_labels(label_bytes)?;
    if images.len() != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(images
        .into_iter()
        .zip(labels)
        .map(|(pixels, label)| RawImage { pixels, label })
        .collect())
}

const FETCH_HINT: &str = " (run scripts/fetch_mnist.sh or point --data-dir or MNIST_DIR at the uncompressed IDX files)";

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Path {
        path: path.to_path_buf(),
        source,
        hint: FETCH_HINT,
    })
}

pub fn parse_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Vec<RawImage>> {
    let images = read_file(images_path.as_ref())?;
    let labels = read_file(labels_path.as_ref())?;
    Ok(decode_pair(&images, &labels)?)
}

/// The standard train/test split loaded from one directory.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: Vec<RawImage>,
    pub test: Vec<RawImage>,
}

impl Mnist {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            train: parse_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?,
            test: parse_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?,
        })
    }

    /// `MNIST_DIR` if set, otherwise `data/mnist` under the workspace root.
    pub fn default_dir() -> PathBuf {
        std::env::var_os("MNIST_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
    }
}
