//! Turning pictures into dipole signals.
//!
//! A 28x28 digit is cropped to 27x27, binarized and cut into a 9x9 grid of
//! non-overlapping 3x3 patches. Each patch becomes a 10-component unit vector:
//! slot 0 is the rest state (always 0 here) and slots 1..=9 carry the pixels
//! mapped `on -> +1`, `off -> -1`, scaled by 1/3. The class target is the
//! fully excited patch `(0, 1/3, ..., 1/3)`, so a patch with `k` pixels on has
//! similarity `(2k - 9) / 9` with it.

use std::ops::{Add, Index};

use serde::{Deserialize, Serialize};

use crate::geometry::{GridCoord, TargetSite, GRID_EXTENT};
use crate::mnist::RawImage;

pub const PATCH_PIXELS: usize = 9;
pub const SIGNAL_DIM: usize = PATCH_PIXELS + 1;
const CROP: usize = 27;

/// A real vector treated as a magnetic dipole; similarity is the dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dipole(Vec<f64>);

impl Dipole {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Dipole) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Dipole> {
        let n = self.norm();
        (n > 0.0).then(|| Dipole(self.0.iter().map(|x| x / n).collect()))
    }

    pub fn add_assign(&mut self, other: &Dipole) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

impl Add<&Dipole> for &Dipole {
    type Output = Dipole;

    fn add(self, rhs: &Dipole) -> Dipole {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
}

impl Index<usize> for Dipole {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A dipole emitted by source `source` (an index into the geometry's source
/// list) at timestamp `emit_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub dipole: Dipole,
    pub source: usize,
    pub emit_time: u32,
}

impl Signal {
    pub fn similarity(&self, field: &TargetField) -> f64 {
        self.dipole.dot(&field.dipole)
    }
}

/// The constant host vector of one class receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetField {
    pub dipole: Dipole,
    pub site: TargetSite,
}

pub fn make_target(site: TargetSite) -> TargetField {
    let mut v = vec![1.0 / 3.0; SIGNAL_DIM];
    v[0] = 0.0;
    TargetField {
        dipole: Dipole(v),
        site,
    }
}

/// Binary 3x3 patches in row-major grid order; pixels row-major within a patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub patches: [[[u8; PATCH_PIXELS]; GRID_EXTENT as usize]; GRID_EXTENT as usize],
}

impl PatchGrid {
    pub fn patch(&self, coord: GridCoord) -> &[u8; PATCH_PIXELS] {
        &self.patches[coord.row as usize][coord.col as usize]
    }

    /// Patches in source-index order (`row * 9 + col`).
    pub fn iter(&self) -> impl Iterator<Item = &[u8; PATCH_PIXELS]> {
        self.patches.iter().flatten()
    }

    /// Writes the grid back as a 28x28 picture (`on -> 255`) at the given crop
    /// offset.
    pub fn to_image(&self, row_offset: usize, col_offset: usize) -> [[u8; 28]; 28] {
        let mut out = [[0u8; 28]; 28];
        for (pr, prow) in self.patches.iter().enumerate() {
            for (pc, patch) in prow.iter().enumerate() {
                for (k, &bit) in patch.iter().enumerate() {
                    out[row_offset + pr * 3 + k / 3][col_offset + pc * 3 + k % 3] = bit * 255;
                }
            }
        }
        out
    }
}

/// Crop window and binarization threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocess {
    /// Pixels `>= threshold` are on.
    pub threshold: u8,
    /// First kept row; the 27 rows `row_offset..row_offset + 27` are used.
    pub row_offset: usize,
    pub col_offset: usize,
}

impl Default for Preprocess {
    /// Any ink counts as on. Dropping the first row and column puts pixel
    /// (14, 14), where MNIST centres each digit's mass, in the middle patch.
    fn default() -> Self {
        Self {
            threshold: 1,
            row_offset: 1,
            col_offset: 1,
        }
    }
}

impl Preprocess {
    pub fn patch_grid(&self, pixels: &[[u8; 28]; 28]) -> PatchGrid {
        assert!(
            self.row_offset + CROP <= 28 && self.col_offset + CROP <= 28,
            "crop window out of bounds"
        );
        let mut patches = [[[0u8; PATCH_PIXELS]; GRID_EXTENT as usize]; GRID_EXTENT as usize];
        for r in 0..CROP {
            for c in 0..CROP {
                let on = pixels[self.row_offset + r][self.col_offset + c] >= self.threshold;
                patches[r / 3][c / 3][(r % 3) * 3 + c % 3] = u8::from(on);
            }
        }
        PatchGrid { patches }
    }

    pub fn signals(&self, img: &RawImage) -> Vec<Signal> {
        encode_grid(&self.patch_grid(&img.pixels))
    }
}

/// Top-left 27x27 crop binarized at `threshold`.
pub fn binarize_truncate(img: &RawImage, threshold: u8) -> PatchGrid {
    Preprocess {
        threshold,
        row_offset: 0,
        col_offset: 0,
    }
    .patch_grid(&img.pixels)
}

pub fn encode_patch(patch: &[u8; PATCH_PIXELS], source: usize, emit_time: u32) -> Signal {
    let mut v = Vec::with_capacity(SIGNAL_DIM);
    v.push(0.0);
    v.extend(patch.iter().map(|&b| if b != 0 { 1.0 / 3.0 } else { -1.0 / 3.0 }));
    Signal {
        dipole: Dipole(v),
        source,
        emit_time,
    }
}

/// All 81 patches emitted at `t = 0`, source index `row * 9 + col`.
pub fn encode_grid(grid: &PatchGrid) -> Vec<Signal> {
    grid.iter().enumerate().map(|(s, p)| encode_patch(p, s, 0)).collect()
}
