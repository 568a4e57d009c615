//! Stability laboratory for Gaussian elimination variants.
//!
//! Tiled pairwise pivoting (the LU driver's strategy, run here with the
//! inner block size pinned to the tile size so each tile-level elimination
//! is plain partial pivoting) is compared against classic partial pivoting
//! and no pivoting. The tiled factorization is kept as an ordered list of
//! elementary couples (a unit-lower transformation plus a permutation); the
//! non-triangular left factor `N` with `N U = A` is assembled explicitly
//! from the inverted couples only when a report needs it, since everything
//! else can be applied couple by couple.
//!
//! Backward errors are floored at machine precision before any ratios are
//! taken.

pub mod mtx;

use crate::kernels::{self, LStrip, PivotVector};
use crate::tilemat::{gen_random, vec_inf_norm, DenseMatrix, LayoutError, TileMatrix};
use std::fmt;

/// Machine precision floor applied to every backward error.
pub fn floor_eps(be: f64) -> f64 {
    be.max(f64::EPSILON)
}

/// Where a factorization hit an exactly zero pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularInfo {
    /// Outer step (tile row/column for the tiled method, 0 otherwise).
    pub k: usize,
    /// Tile row involved (equals `k` for diagonal factorizations).
    pub i: usize,
    /// Column within the tile where the zero pivot appeared.
    pub col: usize,
}

impl fmt::Display for SingularInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zero pivot at step {}, tile row {}, column {}", self.k, self.i, self.col)
    }
}

/// One elementary transformation of the tiled elimination, in application
/// order: a permutation followed by a unit-lower elimination, acting either
/// on one diagonal block or on a coupled pair of block rows.
#[derive(Debug, Clone)]
pub enum Couple {
    /// Partial-pivoting factorization of diagonal block `k`.
    Diag { k: usize, lower: DenseMatrix, pivots: PivotVector },
    /// Coupled factorization folding block row `i` into the triangle at `k`,
    /// applied one inner panel at a time: the panel's row exchanges, the
    /// solve against the strip's unit-lower block on block row `k`, then the
    /// rank-`s` update of block row `i` with the dense multipliers `l2`.
    /// The lab records these with the inner block pinned to the tile size
    /// (one panel); records harvested from a driver run keep the driver's
    /// inner blocking.
    Coupled { k: usize, i: usize, strip: LStrip, l2: DenseMatrix, pivots: PivotVector },
}

/// Full record of a tiled pairwise-pivoting elimination: the couples in
/// application order plus the final upper factor.
#[derive(Debug, Clone)]
pub struct EliminationRecord {
    pub n: usize,
    pub b: usize,
    pub couples: Vec<Couple>,
    /// Upper factor (diagonal included); partial if `singular` is set.
    pub u: DenseMatrix,
    pub singular: Option<SingularInfo>,
}

impl EliminationRecord {
    pub fn p(&self) -> usize {
        self.n / self.b
    }

    /// Largest multiplier magnitude stored across all couples.
    pub fn max_multiplier(&self) -> f64 {
        let mut m = 0.0f64;
        for c in &self.couples {
            match c {
                Couple::Diag { lower, .. } => {
                    for col in 0..lower.n {
                        for row in col + 1..lower.m {
                            m = m.max(lower.get(row, col).abs());
                        }
                    }
                }
                Couple::Coupled { strip, l2, .. } => {
                    for blk in 0..strip.block_count() {
                        for col in 0..strip.s {
                            for row in col + 1..strip.s {
                                m = m.max(strip.get(blk, row, col).abs());
                            }
                        }
                    }
                    m = m.max(l2.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
                }
            }
        }
        m
    }
}

fn unit_lower_copy(tile: &[f64], b: usize) -> DenseMatrix {
    DenseMatrix::from_fn(b, b, |r, c| {
        if r == c {
            1.0
        } else if r > c {
            tile[c * b + r]
        } else {
            0.0
        }
    })
}

/// Partial-pivoting elimination of one tile that tolerates an exactly zero
/// pivot column: there is nothing to eliminate there, so the step records an
/// identity pivot and moves on, leaving the zero on the diagonal of `U`.
/// The lab needs this because a zero inside one diagonal tile is routinely
/// repaired by the coupled steps below it.
fn tile_lu_tolerant(a: &mut [f64], b: usize) -> PivotVector {
    let mut piv: Vec<usize> = (0..b).collect();
    for j in 0..b {
        let (mut pr, mut pv) = (j, a[j * b + j].abs());
        for r in j + 1..b {
            let v = a[j * b + r].abs();
            if v > pv {
                pv = v;
                pr = r;
            }
        }
        if pv == 0.0 {
            continue;
        }
        piv[j] = pr;
        if pr != j {
            for c in 0..b {
                a.swap(c * b + j, c * b + pr);
            }
        }
        let d = a[j * b + j];
        for r in j + 1..b {
            a[j * b + r] /= d;
        }
        for jj in j + 1..b {
            let (left, right) = a.split_at_mut(jj * b);
            let lcol = &left[j * b..(j + 1) * b];
            let ccol = &mut right[..b];
            let u = ccol[j];
            if u != 0.0 {
                for r in j + 1..b {
                    ccol[r] -= lcol[r] * u;
                }
            }
        }
    }
    PivotVector::new(piv)
}

/// Coupled elimination of an upper triangle over a square tile, tolerant of
/// exactly zero pivot columns like [`tile_lu_tolerant`]. Runs with the inner
/// block pinned to the tile size, so there is a single unit-lower block.
fn couple_lu_tolerant(u: &mut [f64], a: &mut [f64], b: usize) -> (PivotVector, LStrip) {
    let at = |r: usize, c: usize| c * b + r;
    let mut piv: Vec<usize> = (0..b).collect();
    let mut strip = LStrip::identity(b, b);
    for j in 0..b {
        let (mut pr, mut pv) = (j, u[at(j, j)].abs());
        for r in 0..b {
            let v = a[at(r, j)].abs();
            if v > pv {
                pv = v;
                pr = b + r;
            }
        }
        if pv == 0.0 {
            continue;
        }
        piv[j] = pr;
        if pr >= b {
            let r = pr - b;
            for c in 0..j {
                strip.set(0, j, c, a[at(r, c)]);
                a[at(r, c)] = 0.0;
            }
            for c in j..b {
                std::mem::swap(&mut u[at(j, c)], &mut a[at(r, c)]);
            }
        }
        let d = u[at(j, j)];
        for r in 0..b {
            a[at(r, j)] /= d;
        }
        for jj in j + 1..b {
            let uj = u[at(j, jj)];
            if uj != 0.0 {
                let (left, right) = a.split_at_mut(jj * b);
                let lcol = &left[j * b..(j + 1) * b];
                let ccol = &mut right[..b];
                for r in 0..b {
                    ccol[r] -= lcol[r] * uj;
                }
            }
        }
    }
    (PivotVector::new(piv), strip)
}

fn first_zero_diag(u: &DenseMatrix, b: usize) -> Option<SingularInfo> {
    (0..u.n).find(|&c| u.get(c, c) == 0.0).map(|c| SingularInfo {
        k: c / b,
        i: c / b,
        col: c % b,
    })
}

/// Gaussian elimination with tiled pairwise pivoting: the tiled LU driver's
/// elimination run on a `p = n/b` tiling with partial pivoting inside each
/// block step, recording every elementary couple.
///
/// The elimination always runs to completion; the record is flagged singular
/// when the final upper factor carries an exact zero on its diagonal.
pub fn getwp(a: &DenseMatrix, b: usize) -> Result<EliminationRecord, LayoutError> {
    assert_eq!(a.m, a.n, "square matrices only");
    let n = a.n;
    let mut tm = TileMatrix::from_dense(a, b)?;
    let p = tm.p;
    let mut couples = Vec::new();

    for k in 0..p {
        let pivots = tile_lu_tolerant(tm.tile_mut(k, k), b);
        let lower = unit_lower_copy(tm.tile(k, k), b);
        let l_flat: Vec<f64> = tm.tile(k, k).to_vec();
        couples.push(Couple::Diag { k, lower, pivots: pivots.clone() });
        for j in k + 1..p {
            kernels::gessm(tm.tile_mut(k, j), &l_flat, &pivots, b);
        }
        for i in k + 1..p {
            let [u_kk, a_ik] = tm.tiles_mut([(k, k), (i, k)]);
            let (pivots, strip) = couple_lu_tolerant(u_kk, a_ik, b);
            let l2 = DenseMatrix::from_column_major(b, b, tm.tile(i, k).to_vec());
            couples.push(Couple::Coupled { k, i, strip: strip.clone(), l2, pivots: pivots.clone() });
            for j in k + 1..p {
                let [u_kj, a_ij, l_ik] = tm.tiles_mut([(k, j), (i, j), (i, k)]);
                kernels::ssssm(u_kj, a_ij, l_ik, &strip, &pivots, b);
            }
        }
    }

    let dense = tm.to_dense();
    let u = DenseMatrix::from_fn(n, n, |r, c| if r <= c { dense.get(r, c) } else { 0.0 });
    let singular = first_zero_diag(&u, b);
    Ok(EliminationRecord { n, b, couples, u, singular })
}

/// Harvests an elimination record from an executed LU plan: the auxiliary
/// grid supplies the pivots and unit-lower factors, the factored tiles the
/// dense multipliers and the upper factor. The record carries the plan's
/// inner blocking.
pub fn record_from_lu_run(factored: &TileMatrix, aux: &crate::factor::LuAux) -> EliminationRecord {
    let (p, q, b) = (factored.p, factored.q, factored.b);
    assert_eq!(p, q, "square tile grids only");
    let n = p * b;
    let mut couples = Vec::new();
    for k in 0..p {
        let diag = aux.get(k, k).expect("diagonal factor populated");
        let lower = match &diag.factor {
            crate::factor::LuAuxFactor::DiagCopy(tile) => unit_lower_copy(tile, b),
            crate::factor::LuAuxFactor::Strip(_) => unreachable!("diagonal entries hold copies"),
        };
        couples.push(Couple::Diag { k, lower, pivots: diag.pivots.clone() });
        for i in k + 1..p {
            let entry = aux.get(i, k).expect("coupled factor populated");
            let strip = match &entry.factor {
                crate::factor::LuAuxFactor::Strip(s) => s.clone(),
                crate::factor::LuAuxFactor::DiagCopy(_) => {
                    unreachable!("subdiagonal entries hold strips")
                }
            };
            let l2 = DenseMatrix::from_column_major(b, b, factored.tile(i, k).to_vec());
            couples.push(Couple::Coupled { k, i, strip, l2, pivots: entry.pivots.clone() });
        }
    }
    let dense = factored.to_dense();
    let u = DenseMatrix::from_fn(n, n, |r, c| if r <= c { dense.get(r, c) } else { 0.0 });
    let singular = first_zero_diag(&u, b);
    EliminationRecord { n, b, couples, u, singular }
}

/// Factors from classic partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct GeppFactors {
    pub l: DenseMatrix,
    pub u: DenseMatrix,
    pub pivots: PivotVector,
    pub singular: Option<SingularInfo>,
}

/// Gaussian elimination with partial pivoting, realized as the tolerant
/// tile elimination applied to the whole matrix as a single tile: the exact
/// elimination path the tiled method takes when `b = n`.
pub fn gepp(a: &DenseMatrix) -> GeppFactors {
    assert_eq!(a.m, a.n, "square matrices only");
    let n = a.n;
    let mut buf = a.values.clone();
    let pivots = tile_lu_tolerant(&mut buf, n);
    let packed = DenseMatrix::from_column_major(n, n, buf);
    let singular = first_zero_diag(&packed, n);
    let l = DenseMatrix::from_fn(n, n, |r, c| {
        if r == c {
            1.0
        } else if r > c {
            packed.get(r, c)
        } else {
            0.0
        }
    });
    let u = DenseMatrix::from_fn(n, n, |r, c| if r <= c { packed.get(r, c) } else { 0.0 });
    GeppFactors { l, u, pivots, singular }
}

/// Factors from elimination without pivoting, `A = L U`.
#[derive(Debug, Clone)]
pub struct GenpFactors {
    pub l: DenseMatrix,
    pub u: DenseMatrix,
    pub singular: Option<SingularInfo>,
}

/// Gaussian elimination with no pivoting.
pub fn genp(a: &DenseMatrix) -> GenpFactors {
    assert_eq!(a.m, a.n, "square matrices only");
    let n = a.n;
    let mut w = a.clone();
    let mut singular = None;
    for j in 0..n {
        let d = w.get(j, j);
        if d == 0.0 {
            singular = Some(SingularInfo { k: 0, i: 0, col: j });
            break;
        }
        for r in j + 1..n {
            w.set(r, j, w.get(r, j) / d);
        }
        for c in j + 1..n {
            let u = w.get(j, c);
            if u != 0.0 {
                for r in j + 1..n {
                    w.set(r, c, w.get(r, c) - w.get(r, j) * u);
                }
            }
        }
    }
    let l = DenseMatrix::from_fn(n, n, |r, c| {
        if r == c {
            1.0
        } else if r > c {
            w.get(r, c)
        } else {
            0.0
        }
    });
    let u = DenseMatrix::from_fn(n, n, |r, c| if r <= c { w.get(r, c) } else { 0.0 });
    GenpFactors { l, u, singular }
}

fn swap_cols(m: &mut DenseMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for r in 0..m.m {
        let t = m.get(r, a);
        m.set(r, a, m.get(r, b));
        m.set(r, b, t);
    }
}

/// Assembles the left factor `N` with `N U = A` by accumulating the inverted
/// couples in application order: for each couple, permute the columns of the
/// running product and fold in the unit-lower factor from the right.
pub fn assemble_n(record: &EliminationRecord) -> DenseMatrix {
    assert!(record.singular.is_none(), "cannot assemble N from a singular record");
    let n = record.n;
    let b = record.b;
    let mut nm = DenseMatrix::identity(n);
    for couple in &record.couples {
        match couple {
            Couple::Diag { k, lower, pivots } => {
                for j in 0..b {
                    let pr = pivots.get(j);
                    swap_cols(&mut nm, k * b + j, k * b + pr);
                }
                // block column k := block column k * L, lower triangular so
                // ascending columns update in place
                for c in 0..b {
                    let dst = k * b + c;
                    for kk in c + 1..b {
                        let w = lower.get(kk, c);
                        if w != 0.0 {
                            let src = k * b + kk;
                            for r in 0..n {
                                let v = nm.get(r, dst) + nm.get(r, src) * w;
                                nm.set(r, dst, v);
                            }
                        }
                    }
                }
            }
            Couple::Coupled { k, i, strip, l2, pivots } => {
                let s = strip.s;
                for ib in 0..strip.block_count() {
                    let j0 = ib * s;
                    for j in j0..j0 + s {
                        let pr = pivots.get(j);
                        if pr >= b {
                            swap_cols(&mut nm, k * b + j, i * b + (pr - b));
                        }
                    }
                    // panel columns of block k := panel columns * L1 block
                    let lblk = strip.block(ib);
                    for c in 0..s {
                        let dst = k * b + j0 + c;
                        for kk in c + 1..s {
                            let w = lblk[c * s + kk];
                            if w != 0.0 {
                                let src = k * b + j0 + kk;
                                for r in 0..n {
                                    let v = nm.get(r, dst) + nm.get(r, src) * w;
                                    nm.set(r, dst, v);
                                }
                            }
                        }
                    }
                    // then += block-i columns * the panel's dense multipliers
                    for c in 0..s {
                        let dst = k * b + j0 + c;
                        for kk in 0..b {
                            let w = l2.get(kk, j0 + c);
                            if w != 0.0 {
                                let src = i * b + kk;
                                for r in 0..n {
                                    let v = nm.get(r, dst) + nm.get(r, src) * w;
                                    nm.set(r, dst, v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    nm
}

/// Attempted use of singular factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingularFactors(pub SingularInfo);

impl fmt::Display for SingularFactors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "factors are singular: {}", self.0)
    }
}

impl std::error::Error for SingularFactors {}

/// A computed factorization of one matrix, in whichever form the method
/// produces.
#[derive(Debug, Clone)]
pub enum Factorization {
    Tiled(EliminationRecord),
    PartialPivot(GeppFactors),
    NoPivot(GenpFactors),
}

impl Factorization {
    pub fn singular(&self) -> Option<SingularInfo> {
        match self {
            Factorization::Tiled(r) => r.singular,
            Factorization::PartialPivot(f) => f.singular,
            Factorization::NoPivot(f) => f.singular,
        }
    }

    /// Solves `A x = y` by applying the recorded transformations to `y` and
    /// back-substituting the upper factor.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>, SingularFactors> {
        if let Some(info) = self.singular() {
            return Err(SingularFactors(info));
        }
        match self {
            Factorization::Tiled(record) => {
                let b = record.b;
                let mut z = y.to_vec();
                for couple in &record.couples {
                    match couple {
                        Couple::Diag { k, lower, pivots } => {
                            for j in 0..b {
                                let pr = pivots.get(j);
                                if pr != j {
                                    z.swap(k * b + j, k * b + pr);
                                }
                            }
                            for c in 0..b {
                                let x = z[k * b + c];
                                if x != 0.0 {
                                    for r in c + 1..b {
                                        z[k * b + r] -= lower.get(r, c) * x;
                                    }
                                }
                            }
                        }
                        Couple::Coupled { k, i, strip, l2, pivots } => {
                            let s = strip.s;
                            for ib in 0..strip.block_count() {
                                let j0 = ib * s;
                                for j in j0..j0 + s {
                                    let pr = pivots.get(j);
                                    if pr >= b {
                                        z.swap(k * b + j, i * b + (pr - b));
                                    }
                                }
                                let lblk = strip.block(ib);
                                for c in 0..s {
                                    let x = z[k * b + j0 + c];
                                    if x != 0.0 {
                                        for r in c + 1..s {
                                            z[k * b + j0 + r] -= lblk[c * s + r] * x;
                                        }
                                    }
                                }
                                for c in 0..s {
                                    let x = z[k * b + j0 + c];
                                    if x != 0.0 {
                                        for r in 0..b {
                                            z[i * b + r] -= l2.get(r, j0 + c) * x;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                back_substitute(&record.u, &mut z)?;
                Ok(z)
            }
            Factorization::PartialPivot(f) => {
                let n = f.l.n;
                let mut z = y.to_vec();
                for j in 0..n {
                    let pr = f.pivots.get(j);
                    if pr != j {
                        z.swap(j, pr);
                    }
                }
                forward_substitute_unit(&f.l, &mut z);
                back_substitute(&f.u, &mut z)?;
                Ok(z)
            }
            Factorization::NoPivot(f) => {
                let mut z = y.to_vec();
                forward_substitute_unit(&f.l, &mut z);
                back_substitute(&f.u, &mut z)?;
                Ok(z)
            }
        }
    }
}

fn forward_substitute_unit(l: &DenseMatrix, z: &mut [f64]) {
    let n = l.n;
    for c in 0..n {
        let x = z[c];
        if x != 0.0 {
            for (r, zr) in z.iter_mut().enumerate().take(n).skip(c + 1) {
                *zr -= l.get(r, c) * x;
            }
        }
    }
}

fn back_substitute(u: &DenseMatrix, z: &mut [f64]) -> Result<(), SingularFactors> {
    let n = u.n;
    for c in (0..n).rev() {
        let d = u.get(c, c);
        if d == 0.0 {
            return Err(SingularFactors(SingularInfo { k: 0, i: 0, col: c }));
        }
        let x = z[c] / d;
        z[c] = x;
        if x != 0.0 {
            for (r, zr) in z.iter_mut().enumerate().take(c) {
                *zr -= u.get(r, c) * x;
            }
        }
    }
    Ok(())
}

/// Backward error of a solution: `‖y - A x‖_inf / (‖A‖_inf ‖x‖_inf)`,
/// floored at machine precision.
pub fn backward_error_solution(a: &DenseMatrix, x: &[f64], y: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let mut rmax = 0.0f64;
    for (yi, axi) in y.iter().zip(ax.iter()) {
        rmax = rmax.max((yi - axi).abs());
    }
    let denom = a.inf_norm() * vec_inf_norm(x);
    if denom == 0.0 {
        return floor_eps(rmax);
    }
    floor_eps(rmax / denom)
}

/// Iterative refinement outcome.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub x: Vec<f64>,
    /// Correction steps actually applied (0 when the first solve already met
    /// the tolerance).
    pub steps: usize,
    pub backward_error: f64,
    pub converged: bool,
}

/// Solves and refines: repeats `x += solve(y - A x)` until the solution
/// backward error meets `tol` or `max_steps` corrections were spent, keeping
/// the best iterate. Non-convergence is reported, not fatal.
pub fn iterative_refinement(
    factors: &Factorization,
    a: &DenseMatrix,
    y: &[f64],
    max_steps: usize,
    tol: f64,
) -> Result<Refinement, SingularFactors> {
    let mut x = factors.solve(y)?;
    let mut be = backward_error_solution(a, &x, y);
    let mut best = (x.clone(), be, 0usize);
    let mut steps = 0;
    while be > tol && steps < max_steps {
        let ax = a.matvec(&x);
        let r: Vec<f64> = y.iter().zip(ax.iter()).map(|(yi, axi)| yi - axi).collect();
        let dx = factors.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(dx.iter()) {
            *xi += di;
        }
        steps += 1;
        be = backward_error_solution(a, &x, y);
        if be < best.1 {
            best = (x.clone(), be, steps);
        }
    }
    let converged = best.1 <= tol;
    Ok(Refinement { x: best.0, steps: best.2, backward_error: best.1, converged })
}

/// Elimination method under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Getwp,
    Gepp,
    Genp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Getwp => "getwp",
            Method::Gepp => "gepp",
            Method::Genp => "genp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Options controlling report cost.
#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    /// Assemble the dense left factor (and the factorization backward error
    /// that needs it) only for orders up to this cap.
    pub factor_error_cap: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { factor_error_cap: 2048 }
    }
}

/// All stability quantities for one matrix and method.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub method: Method,
    pub n: usize,
    pub b: usize,
    pub p: usize,
    pub backward_error_fact: Option<f64>,
    pub backward_error_soln: Option<f64>,
    pub norm_n: Option<f64>,
    pub norm_u: Option<f64>,
    pub norm_abs_nu: Option<f64>,
    pub singular: bool,
}

impl StabilityReport {
    fn flagged(method: Method, n: usize, b: usize) -> Self {
        StabilityReport {
            method,
            n,
            b,
            p: n.checked_div(b).unwrap_or(0),
            backward_error_fact: None,
            backward_error_soln: None,
            norm_n: None,
            norm_u: None,
            norm_abs_nu: None,
            singular: true,
        }
    }

    pub fn flags(&self) -> &'static str {
        if self.singular {
            "singular"
        } else {
            ""
        }
    }
}

fn option_fmt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6e}"),
        None => String::new(),
    }
}

/// CSV header shared by the stability outputs.
pub const REPORT_CSV_HEADER: &str = "matrix,n,b,p,method,be_fact,be_soln,norm_N,norm_U,norm_absNU,flags";

/// One CSV row for a report, with a caller-chosen matrix label.
pub fn report_csv_row(label: &str, r: &StabilityReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        label,
        r.n,
        r.b,
        r.p,
        r.method,
        option_fmt(r.backward_error_fact),
        option_fmt(r.backward_error_soln),
        option_fmt(r.norm_n),
        option_fmt(r.norm_u),
        option_fmt(r.norm_abs_nu),
        r.flags()
    )
}

/// Factors `a` with `method` and fills a full report: factorization and
/// solution backward errors (floored), the factor norms, and
/// `‖|N|·|U|‖_inf` with the absolute values taken entrywise before the
/// product. The right-hand side is standard normal from `rhs_seed`.
pub fn report(
    a: &DenseMatrix,
    method: Method,
    b: usize,
    rhs_seed: u64,
    opts: &ReportOptions,
) -> StabilityReport {
    let n = a.n;
    let y: Vec<f64> = gen_random(n, 1, rhs_seed).values;
    let factors = match method {
        Method::Getwp => match getwp(a, b) {
            Ok(record) => Factorization::Tiled(record),
            Err(_) => return StabilityReport::flagged(method, n, b),
        },
        Method::Gepp => Factorization::PartialPivot(gepp(a)),
        Method::Genp => Factorization::NoPivot(genp(a)),
    };
    if factors.singular().is_some() {
        return StabilityReport::flagged(method, n, b);
    }

    let a_norm = a.inf_norm();
    let (n_factor, u_factor) = match &factors {
        Factorization::Tiled(record) => {
            let nf = if n <= opts.factor_error_cap { Some(assemble_n(record)) } else { None };
            (nf, record.u.clone())
        }
        Factorization::PartialPivot(f) => {
            // N = P^T L: rows of L sent back through the permutation.
            let mut nmat = f.l.clone();
            for j in (0..n).rev() {
                let pr = f.pivots.get(j);
                if pr != j {
                    for c in 0..n {
                        let t = nmat.get(j, c);
                        nmat.set(j, c, nmat.get(pr, c));
                        nmat.set(pr, c, t);
                    }
                }
            }
            (Some(nmat), f.u.clone())
        }
        Factorization::NoPivot(f) => (Some(f.l.clone()), f.u.clone()),
    };

    let backward_error_fact = n_factor.as_ref().map(|nf| {
        let residual = nf.matmul(&u_factor).sub(a).inf_norm();
        floor_eps(residual / a_norm)
    });
    let norm_n = n_factor.as_ref().map(|nf| nf.inf_norm());
    let norm_abs_nu = n_factor
        .as_ref()
        .map(|nf| nf.abs().matmul(&u_factor.abs()).inf_norm());
    let backward_error_soln = factors
        .solve(&y)
        .ok()
        .map(|x| backward_error_solution(a, &x, &y));

    StabilityReport {
        method,
        n,
        b,
        p: n / b.max(1),
        backward_error_fact,
        backward_error_soln,
        norm_n,
        norm_u: Some(u_factor.inf_norm()),
        norm_abs_nu,
        singular: false,
    }
}

/// Mean report over a seeded sample of standard-normal matrices for one
/// tile count.
#[derive(Debug, Clone)]
pub struct CampaignRow {
    pub p: usize,
    pub b: usize,
    pub n: usize,
    pub samples: usize,
    pub singular_samples: usize,
    pub mean_be_fact: f64,
    pub mean_be_soln: f64,
    pub mean_norm_n: f64,
    pub mean_norm_u: f64,
    pub mean_norm_abs_nu: f64,
}

impl CampaignRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "randn-mean,{},{},{},getwp,{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            self.n,
            self.b,
            self.p,
            self.mean_be_fact,
            self.mean_be_soln,
            self.mean_norm_n,
            self.mean_norm_u,
            self.mean_norm_abs_nu,
            if self.singular_samples > 0 { "singular-samples" } else { "" }
        )
    }
}

/// Salt mixed into the matrix seed to derive the right-hand-side seed.
const RHS_SALT: u64 = 0x5D5A_1F0C_3B9E_77D1;

/// Runs the tiled method over a seeded sample of random matrices for each
/// tile count in `p_list` (each must divide `n`) and averages the reports.
/// `p = 1` is plain partial pivoting by construction.
pub fn campaign_random(
    n: usize,
    p_list: &[usize],
    sample: usize,
    base_seed: u64,
    opts: &ReportOptions,
) -> Vec<CampaignRow> {
    let mut rows = Vec::new();
    for &p in p_list {
        assert!(p >= 1 && n.is_multiple_of(p), "tile count {p} must divide order {n}");
        let b = n / p;
        let mut acc = CampaignRow {
            p,
            b,
            n,
            samples: 0,
            singular_samples: 0,
            mean_be_fact: 0.0,
            mean_be_soln: 0.0,
            mean_norm_n: 0.0,
            mean_norm_u: 0.0,
            mean_norm_abs_nu: 0.0,
        };
        for idx in 0..sample {
            let seed = base_seed + idx as u64;
            let a = gen_random(n, n, seed);
            let r = report(&a, Method::Getwp, b, seed ^ RHS_SALT, opts);
            if r.singular {
                acc.singular_samples += 1;
                continue;
            }
            acc.samples += 1;
            acc.mean_be_fact += r.backward_error_fact.unwrap_or(0.0);
            acc.mean_be_soln += r.backward_error_soln.unwrap_or(0.0);
            acc.mean_norm_n += r.norm_n.unwrap_or(0.0);
            acc.mean_norm_u += r.norm_u.unwrap_or(0.0);
            acc.mean_norm_abs_nu += r.norm_abs_nu.unwrap_or(0.0);
        }
        if acc.samples > 0 {
            let s = acc.samples as f64;
            acc.mean_be_fact /= s;
            acc.mean_be_soln /= s;
            acc.mean_norm_n /= s;
            acc.mean_norm_u /= s;
            acc.mean_norm_abs_nu /= s;
        }
        rows.push(acc);
    }
    rows
}
