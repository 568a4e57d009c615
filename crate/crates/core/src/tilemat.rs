//! Matrix containers: a plain column-major dense matrix and the tiled
//! block-data-layout container used by the factorization drivers.
//!
//! A `TileMatrix` stores a `p x q` grid of square `b x b` tiles. Every tile is
//! a contiguous column-major buffer, and the tiles themselves are ordered
//! column-major in the grid. Tile `(i, j)` (0-based) holds the element block
//! `A[i*b .. (i+1)*b, j*b .. (j+1)*b]` of the logical matrix.

use std::fmt;

/// Error raised when a dense matrix cannot be cut into square tiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutError {
    /// Tile size does not divide one of the matrix dimensions.
    NotDivisible { m: usize, n: usize, b: usize },
}

impl fmt::Display for LayoutError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutError::NotDivisible { m, n, b } => {
                write!(f, "tile size {b} does not divide matrix dimensions {m}x{n}")
            }
        }
    }
}

impl std::error::Error for LayoutError {}

/// Column-major dense matrix of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub m: usize,
    pub n: usize,
    /// `m * n` values, column-major: element `(r, c)` lives at `c * m + r`.
    pub values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(m: usize, n: usize) -> Self {
        DenseMatrix { m, n, values: vec![0.0; m * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            a.values[i * n + i] = 1.0;
        }
        a
    }

    /// Builds a matrix from an element function, filling column-major.
    pub fn from_fn(m: usize, n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(m * n);
        for c in 0..n {
            for r in 0..m {
                values.push(f(r, c));
            }
        }
        DenseMatrix { m, n, values }
    }

    pub fn from_column_major(m: usize, n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), m * n, "storage length must equal m*n");
        DenseMatrix { m, n, values }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.m && c < self.n);
        self.values[c * self.m + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.m && c < self.n);
        self.values[c * self.m + r] = v;
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.m, |r, c| self.get(c, r))
    }

    /// Entrywise absolute value, used for `‖|N|·|U|‖` style quantities.
    pub fn abs(&self) -> DenseMatrix {
        DenseMatrix {
            m: self.m,
            n: self.n,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Plain triple-loop product `self * other`, column-major friendly.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.m, "inner dimensions must agree");
        let mut out = DenseMatrix::zeros(self.m, other.n);
        for j in 0..other.n {
            for k in 0..self.n {
                let w = other.get(k, j);
                if w != 0.0 {
                    let col = &self.values[k * self.m..(k + 1) * self.m];
                    let dst = &mut out.values[j * self.m..(j + 1) * self.m];
                    for r in 0..self.m {
                        dst[r] += col[r] * w;
                    }
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert!(self.m == other.m && self.n == other.n);
        DenseMatrix {
            m: self.m,
            n: self.n,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Matrix-vector product `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.m];
        for (c, &w) in x.iter().enumerate() {
            let col = &self.values[c * self.m..(c + 1) * self.m];
            for r in 0..self.m {
                y[r] += col[r] * w;
            }
        }
        y
    }

    /// Infinity norm: maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let mut row_sums = vec![0.0f64; self.m];
        for c in 0..self.n {
            let col = &self.values[c * self.m..(c + 1) * self.m];
            for r in 0..self.m {
                row_sums[r] += col[r].abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }
}

/// Infinity norm of a vector: maximum absolute entry.
pub fn vec_inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Block-data-layout matrix: a `p x q` grid of contiguous `b x b` tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct TileMatrix {
    /// Tile-row count.
    pub p: usize,
    /// Tile-column count.
    pub q: usize,
    /// Tile edge length in elements.
    pub b: usize,
    /// `p * q` tile buffers of `b * b` values each, column-major within the
    /// tile, tiles ordered column-major in the grid.
    tiles: Vec<Box<[f64]>>,
}

impl TileMatrix {
    pub fn zeros(p: usize, q: usize, b: usize) -> Self {
        assert!(p >= 1 && q >= 1 && b >= 1);
        let tiles = (0..p * q)
            .map(|_| vec![0.0; b * b].into_boxed_slice())
            .collect();
        TileMatrix { p, q, b, tiles }
    }

    /// Element-row count `p * b`.
    pub fn m(&self) -> usize {
        self.p * self.b
    }

    /// Element-column count `q * b`.
    pub fn n(&self) -> usize {
        self.q * self.b
    }

    #[inline]
    pub fn tile_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.p && j < self.q);
        j * self.p + i
    }

    #[inline]
    pub fn tile(&self, i: usize, j: usize) -> &[f64] {
        &self.tiles[self.tile_index(i, j)]
    }

    #[inline]
    pub fn tile_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let idx = self.tile_index(i, j);
        &mut self.tiles[idx]
    }

    /// Disjoint mutable access to several tiles at once. Coordinates must be
    /// pairwise distinct.
    pub fn tiles_mut<const N: usize>(
        &mut self,
        coords: [(usize, usize); N],
    ) -> [&mut Box<[f64]>; N] {
        let idx = coords.map(|(i, j)| self.tile_index(i, j));
        self.tiles
            .get_disjoint_mut(idx)
            .expect("tile coordinates must be disjoint and in range")
    }

    pub(crate) fn raw_tiles(&mut self) -> &mut [Box<[f64]>] {
        &mut self.tiles
    }

    /// Element read through the tile layout.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let b = self.b;
        self.tile(r / b, c / b)[(c % b) * b + (r % b)]
    }

    /// Converts a dense matrix into block data layout.
    ///
    /// The tile size must divide both dimensions; ragged edges are rejected
    /// rather than padded.
    pub fn from_dense(d: &DenseMatrix, b: usize) -> Result<Self, LayoutError> {
        if b == 0 || !d.m.is_multiple_of(b) || !d.n.is_multiple_of(b) {
            return Err(LayoutError::NotDivisible { m: d.m, n: d.n, b });
        }
        let p = d.m / b;
        let q = d.n / b;
        let mut out = TileMatrix::zeros(p, q, b);
        for j in 0..q {
            for i in 0..p {
                let tile = out.tile_mut(i, j);
                for c in 0..b {
                    // One tile column is a contiguous run of b elements
                    // inside dense column j*b + c.
                    let src = (j * b + c) * d.m + i * b;
                    tile[c * b..(c + 1) * b].copy_from_slice(&d.values[src..src + b]);
                }
            }
        }
        Ok(out)
    }

    /// Converts back to a column-major dense matrix. Exact inverse of
    /// [`TileMatrix::from_dense`].
    pub fn to_dense(&self) -> DenseMatrix {
        let (m, n, b) = (self.m(), self.n(), self.b);
        let mut d = DenseMatrix::zeros(m, n);
        for j in 0..self.q {
            for i in 0..self.p {
                let tile = self.tile(i, j);
                for c in 0..b {
                    let dst = (j * b + c) * m + i * b;
                    d.values[dst..dst + b].copy_from_slice(&tile[c * b..(c + 1) * b]);
                }
            }
        }
        d
    }
}

/// SplitMix64 stream. Fixed algorithm so test matrices are reproducible from
/// a seed across reimplementations: the state advances by 0x9E3779B97F4A7C15
/// and the output is the standard two-round xor-shift-multiply finalizer.
#[derive(Debug, Clone)]
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in (0, 1]: 53 random bits shifted into the unit interval,
    /// never exactly zero so it is safe under a logarithm.
    fn next_unit_open(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Uniform in [0, 1).
    fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64) * (1.0 / 9007199254740992.0)
    }
}

/// Standard-normal sampler: Box-Muller over the SplitMix64 stream, consuming
/// two uniforms per pair and caching the second deviate.
#[derive(Debug, Clone)]
pub(crate) struct NormalSource {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalSource {
    pub(crate) fn new(seed: u64) -> Self {
        NormalSource { rng: SplitMix64::new(seed), spare: None }
    }

    pub(crate) fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = self.rng.next_unit_open();
        let u2 = self.rng.next_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Dense matrix with i.i.d. standard-normal entries, filled column-major.
/// Bitwise reproducible for a given seed.
pub fn gen_random(m: usize, n: usize, seed: u64) -> DenseMatrix {
    assert!(m >= 1 && n >= 1);
    let mut src = NormalSource::new(seed);
    let values = (0..m * n).map(|_| src.next()).collect();
    DenseMatrix { m, n, values }
}

/// Symmetric positive definite test matrix: `(G + G^T)/2 + n*I` for
/// standard-normal `G`. Symmetry is bitwise exact.
pub fn gen_spd(n: usize, seed: u64) -> DenseMatrix {
    assert!(n >= 1);
    let g = gen_random(n, n, seed);
    let mut a = DenseMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            let v = (g.get(r, c) + g.get(c, r)) / 2.0;
            a.set(r, c, if r == c { v + n as f64 } else { v });
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_dense_single_element() {
        let d = DenseMatrix::from_column_major(1, 1, vec![5.0]);
        let t = TileMatrix::from_dense(&d, 1).unwrap();
        assert_eq!(t.tile(0, 0), &[5.0]);
    }

    #[test]
    fn from_dense_block_mapping() {
        // a_rc = 10*(r+1) + (c+1); tile (1,0) of a 4x4, b=2 cut holds rows
        // 2..4 of columns 0..2: column-major buffer [31, 41, 32, 42].
        let d = DenseMatrix::from_fn(4, 4, |r, c| (10 * (r + 1) + (c + 1)) as f64);
        let t = TileMatrix::from_dense(&d, 2).unwrap();
        assert_eq!(t.tile(1, 0), &[31.0, 41.0, 32.0, 42.0]);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let d = gen_random(6, 4, 7);
        let t = TileMatrix::from_dense(&d, 2).unwrap();
        assert_eq!(t.to_dense(), d);
    }

    #[test]
    fn to_dense_single_tile_verbatim() {
        let d = gen_random(3, 3, 1);
        let t = TileMatrix::from_dense(&d, 3).unwrap();
        assert_eq!(t.tile(0, 0), d.values.as_slice());
        assert_eq!(t.to_dense(), d);
    }

    #[test]
    fn to_dense_matches_elementwise_reconstruction() {
        let d = gen_random(6, 4, 42);
        let t = TileMatrix::from_dense(&d, 2).unwrap();
        let back = t.to_dense();
        for r in 0..6 {
            for c in 0..4 {
                assert_eq!(back.get(r, c), d.get(r, c));
                assert_eq!(t.get(r, c), d.get(r, c));
            }
        }
    }

    #[test]
    fn non_divisible_rejected() {
        let d = DenseMatrix::zeros(5, 4);
        match TileMatrix::from_dense(&d, 2) {
            Err(LayoutError::NotDivisible { m: 5, n: 4, b: 2 }) => {}
            other => panic!("expected NotDivisible, got {other:?}"),
        }
    }

    #[test]
    fn inf_norm_identity_and_hand_case() {
        assert_eq!(DenseMatrix::identity(3).inf_norm(), 1.0);
        // [[1, -2], [3, 4]] row sums: 3 and 7.
        let a = DenseMatrix::from_column_major(2, 2, vec![1.0, 3.0, -2.0, 4.0]);
        assert_eq!(a.inf_norm(), 7.0);
    }

    #[test]
    fn inf_norm_matches_loop_oracle() {
        let a = gen_random(50, 50, 3);
        let mut expected = 0.0f64;
        for r in 0..50 {
            let mut s = 0.0;
            for c in 0..50 {
                s += a.get(r, c).abs();
            }
            expected = expected.max(s);
        }
        assert_eq!(a.inf_norm(), expected);
    }

    #[test]
    fn gen_random_deterministic_and_seed_sensitive() {
        assert_eq!(gen_random(8, 8, 11), gen_random(8, 8, 11));
        assert_ne!(gen_random(8, 8, 11).values, gen_random(8, 8, 12).values);
    }

    #[test]
    fn gen_random_moments() {
        let a = gen_random(100, 100, 5);
        let n = a.values.len() as f64;
        let mean = a.values.iter().sum::<f64>() / n;
        let var = a.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn gen_spd_symmetric_and_reproducible() {
        let a = gen_spd(16, 9);
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(a.get(r, c).to_bits(), a.get(c, r).to_bits());
            }
        }
        assert_eq!(a, gen_spd(16, 9));
    }
}
