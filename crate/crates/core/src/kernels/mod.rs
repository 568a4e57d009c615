//! Sequential tile kernels.
//!
//! Every kernel operates in place on column-major `b x b` tile buffers and is
//! a pure function of its arguments: repeated invocation on the same input is
//! bitwise reproducible, and no kernel touches anything but its argument
//! buffers, so kernels are safe to run concurrently on disjoint tiles.
//!
//! The QR and LU factor kernels accept an inner block size `s` (with `s`
//! dividing `b`); transformations are computed and applied in groups of `s`
//! columns, which bounds the extra cost of the coupled update kernels to a
//! `(1 + s/4b)` (QR) or `(1 + s/2b)` (LU) factor over the unblocked counts.

mod chol;
mod lu;
mod qr;

pub use chol::{gsmm, potf2, trsm};
pub use lu::{gessm, getrf, ssssm, tstrf};
pub use qr::{geqrt, larfb, ssrfb, tsqrt};

use std::fmt;

/// Flat index of element `(r, c)` in a column-major buffer with leading
/// dimension `ld`.
#[inline]
pub(crate) fn at(r: usize, c: usize, ld: usize) -> usize {
    c * ld + r
}

/// Numerical failures surfaced by the factor kernels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelError {
    /// A non-positive pivot was met while factoring a tile that was supposed
    /// to be symmetric positive definite. Carries the failing diagonal index.
    NotPositiveDefinite { index: usize },
    /// A triangular solve hit an exactly zero diagonal entry.
    SingularTriangle { index: usize },
    /// An exactly zero pivot column inside a tile LU factorization.
    SingularTile { col: usize },
    /// An exactly zero pivot while factoring a coupled tile pair.
    SingularCouple { col: usize },
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::NotPositiveDefinite { index } => {
                write!(f, "tile is not positive definite at diagonal index {index}")
            }
            KernelError::SingularTriangle { index } => {
                write!(f, "triangular factor has zero diagonal at index {index}")
            }
            KernelError::SingularTile { col } => {
                write!(f, "tile is singular: zero pivot column {col}")
            }
            KernelError::SingularCouple { col } => {
                write!(f, "coupled tiles are singular: zero pivot column {col}")
            }
        }
    }
}

impl std::error::Error for KernelError {}

/// The eleven kernel kinds, used for task identities, priorities, flop
/// models and text dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelKind {
    Potf2,
    Trsm,
    Gsmm,
    Geqrt,
    Larfb,
    Tsqrt,
    Ssrfb,
    Getrf,
    Gessm,
    Tstrf,
    Ssssm,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Potf2 => "potf2",
            KernelKind::Trsm => "trsm",
            KernelKind::Gsmm => "gsmm",
            KernelKind::Geqrt => "geqrt",
            KernelKind::Larfb => "larfb",
            KernelKind::Tsqrt => "tsqrt",
            KernelKind::Ssrfb => "ssrfb",
            KernelKind::Getrf => "getrf",
            KernelKind::Gessm => "gessm",
            KernelKind::Tstrf => "tstrf",
            KernelKind::Ssssm => "ssssm",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Leading-order flop model for one kernel call on a `b x b` tile with inner
/// block size `s`.
pub fn kernel_flops(kind: KernelKind, b: usize, s: usize) -> f64 {
    let b = b as f64;
    let s = s as f64;
    match kind {
        KernelKind::Potf2 => b * b * b / 3.0,
        KernelKind::Trsm => b * b * b,
        KernelKind::Gsmm => 2.0 * b * b * b,
        KernelKind::Geqrt => 4.0 * b * b * b / 3.0,
        KernelKind::Larfb => 2.0 * b * b * b,
        KernelKind::Tsqrt => 2.0 * b * b * b,
        KernelKind::Ssrfb => 4.0 * b * b * b + s * b * b,
        KernelKind::Getrf => 2.0 * b * b * b / 3.0,
        KernelKind::Gessm => b * b * b,
        KernelKind::Tstrf => b * b * b,
        KernelKind::Ssssm => 2.0 * b * b * b + s * b * b,
    }
}

/// Compact accumulation factors for a tile's Householder reflectors: one
/// `s x s` upper-triangular block per inner panel, stored as an `s x b`
/// column-major strip (block `i` occupies strip columns `i*s .. (i+1)*s`).
#[derive(Debug, Clone, PartialEq)]
pub struct WyStrip {
    pub b: usize,
    pub s: usize,
    data: Vec<f64>,
}

impl WyStrip {
    pub fn zeros(b: usize, s: usize) -> Self {
        assert!(s >= 1 && b.is_multiple_of(s), "inner block size must divide tile size");
        WyStrip { b, s, data: vec![0.0; s * b] }
    }

    pub fn block_count(&self) -> usize {
        self.b / self.s
    }

    /// Column-major `s x s` view of accumulation block `i`.
    #[inline]
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.s * self.s..(i + 1) * self.s * self.s]
    }

    #[inline]
    pub fn get(&self, block: usize, r: usize, c: usize) -> f64 {
        self.data[(block * self.s + c) * self.s + r]
    }

    #[inline]
    pub(crate) fn set(&mut self, block: usize, r: usize, c: usize, v: f64) {
        self.data[(block * self.s + c) * self.s + r] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Pivot rows of a tile or coupled-tile LU factorization, 0-based. Entry `j`
/// is the row index swapped into position `j` at elimination step `j`:
/// within `[j, b)` for a single tile, or `j` itself / `b + r` (bottom-tile
/// row `r`) for a coupled factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotVector(Vec<usize>);

impl PivotVector {
    pub(crate) fn new(rows: Vec<usize>) -> Self {
        PivotVector(rows)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> usize {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// True when no step actually swapped rows.
    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(j, &r)| r == j)
    }
}

/// The unit-lower-triangular `s x s` blocks forming the upper half of a
/// coupled LU factor, stored as an `s x b` column-major strip like
/// [`WyStrip`]. Diagonals are stored explicitly as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LStrip {
    pub b: usize,
    pub s: usize,
    data: Vec<f64>,
}

impl LStrip {
    pub(crate) fn identity(b: usize, s: usize) -> Self {
        assert!(s >= 1 && b.is_multiple_of(s), "inner block size must divide tile size");
        let mut data = vec![0.0; s * b];
        for block in 0..b / s {
            for d in 0..s {
                data[(block * s + d) * s + d] = 1.0;
            }
        }
        LStrip { b, s, data }
    }

    pub fn block_count(&self) -> usize {
        self.b / self.s
    }

    /// Column-major `s x s` view of unit-lower block `i`.
    #[inline]
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.s * self.s..(i + 1) * self.s * self.s]
    }

    #[inline]
    pub fn get(&self, block: usize, r: usize, c: usize) -> f64 {
        self.data[(block * self.s + c) * self.s + r]
    }

    #[inline]
    pub(crate) fn set(&mut self, block: usize, r: usize, c: usize, v: f64) {
        self.data[(block * self.s + c) * self.s + r] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_flop_models() {
        let (b, s) = (32.0f64, 8.0f64);
        assert_eq!(kernel_flops(KernelKind::Ssrfb, 32, 8), 4.0 * b * b * b + s * b * b);
        assert_eq!(kernel_flops(KernelKind::Ssssm, 32, 8), 2.0 * b * b * b + s * b * b);
        assert_eq!(kernel_flops(KernelKind::Gsmm, 32, 8), 2.0 * b * b * b);
    }

    #[test]
    fn strip_layout() {
        let mut t = WyStrip::zeros(8, 4);
        t.set(1, 0, 3, 5.0);
        assert_eq!(t.block_count(), 2);
        assert_eq!(t.block(1)[3 * 4], 5.0);
        assert_eq!(t.get(1, 0, 3), 5.0);

        let l = LStrip::identity(8, 2);
        assert_eq!(l.block_count(), 4);
        for blk in 0..4 {
            assert_eq!(l.get(blk, 0, 0), 1.0);
            assert_eq!(l.get(blk, 1, 1), 1.0);
            assert_eq!(l.get(blk, 0, 1), 0.0);
        }
    }
}
