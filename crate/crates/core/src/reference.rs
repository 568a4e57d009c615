//! Naive dense reference implementations used as correctness oracles for the
//! tiled paths, plus explicit assembly of the orthogonal factor from tile
//! outputs.
//!
//! Everything here favors obviousness over speed and shares no code with the
//! tile kernels.
#![allow(clippy::needless_range_loop)]

use crate::factor::QrAux;
use crate::tilemat::{DenseMatrix, TileMatrix};

/// Unblocked scalar Cholesky; returns the lower factor, or `None` if a pivot
/// is not positive.
pub fn cholesky_lower(a: &DenseMatrix) -> Option<DenseMatrix> {
    assert_eq!(a.m, a.n);
    let n = a.n;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / d);
        }
    }
    Some(l)
}

/// Dense Householder QR with the explicit orthogonal factor.
/// Returns `(q, r)` with `q` square `m x m` and `r` upper trapezoidal.
pub fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = (a.m, a.n);
    let mut work = a.clone();
    let mut taus = vec![0.0; n.min(m)];
    for j in 0..n.min(m) {
        // Build the reflector for column j.
        let mut sumsq = 0.0;
        for r in j + 1..m {
            sumsq += work.get(r, j) * work.get(r, j);
        }
        if sumsq == 0.0 {
            continue;
        }
        let alpha = work.get(j, j);
        let norm = (alpha * alpha + sumsq).sqrt();
        let beta = -norm.copysign(alpha);
        let tau = (beta - alpha) / beta;
        let scale = 1.0 / (alpha - beta);
        for r in j + 1..m {
            work.set(r, j, work.get(r, j) * scale);
        }
        work.set(j, j, beta);
        taus[j] = tau;
        for jj in j + 1..n {
            let mut w = work.get(j, jj);
            for r in j + 1..m {
                w += work.get(r, j) * work.get(r, jj);
            }
            w *= tau;
            work.set(j, jj, work.get(j, jj) - w);
            for r in j + 1..m {
                work.set(r, jj, work.get(r, jj) - work.get(r, j) * w);
            }
        }
    }
    // Assemble Q = H_0 H_1 ... applied to the identity, last reflector first.
    let mut q = DenseMatrix::identity(m);
    for j in (0..n.min(m)).rev() {
        let tau = taus[j];
        if tau == 0.0 {
            continue;
        }
        for c in 0..m {
            let mut w = q.get(j, c);
            for r in j + 1..m {
                w += work.get(r, j) * q.get(r, c);
            }
            w *= tau;
            q.set(j, c, q.get(j, c) - w);
            for r in j + 1..m {
                q.set(r, c, q.get(r, c) - work.get(r, j) * w);
            }
        }
    }
    let mut r = DenseMatrix::zeros(m, n);
    for c in 0..n {
        for row in 0..=c.min(m - 1) {
            r.set(row, c, work.get(row, c));
        }
    }
    (q, r)
}

/// Dense LU with partial pivoting. Returns `(l, u, pivots)` where `pivots[j]`
/// is the row swapped into position `j` at step `j`, or `None` on an exactly
/// zero pivot column.
pub fn lu_partial(a: &DenseMatrix) -> Option<(DenseMatrix, DenseMatrix, Vec<usize>)> {
    assert_eq!(a.m, a.n);
    let n = a.n;
    let mut w = a.clone();
    let mut piv = vec![0usize; n];
    for j in 0..n {
        let (mut pr, mut pv) = (j, w.get(j, j).abs());
        for r in j + 1..n {
            if w.get(r, j).abs() > pv {
                pv = w.get(r, j).abs();
                pr = r;
            }
        }
        if pv == 0.0 {
            return None;
        }
        piv[j] = pr;
        if pr != j {
            for c in 0..n {
                let t = w.get(j, c);
                w.set(j, c, w.get(pr, c));
                w.set(pr, c, t);
            }
        }
        let d = w.get(j, j);
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
    let mut l = DenseMatrix::identity(n);
    let mut u = DenseMatrix::zeros(n, n);
    for c in 0..n {
        for r in c + 1..n {
            l.set(r, c, w.get(r, c));
        }
        for r in 0..=c {
            u.set(r, c, w.get(r, c));
        }
    }
    Some((l, u, piv))
}

/// Applies a swap sequence to the rows of a matrix, step order.
pub fn permute_rows(a: &DenseMatrix, pivots: &[usize]) -> DenseMatrix {
    let mut out = a.clone();
    for (j, &pr) in pivots.iter().enumerate() {
        if pr != j {
            for c in 0..out.n {
                let t = out.get(j, c);
                out.set(j, c, out.get(pr, c));
                out.set(pr, c, t);
            }
        }
    }
    out
}

/// Upper trapezoid (diagonal included) of a matrix, zeros below.
pub fn upper_trapezoid(d: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(d.m, d.n, |r, c| if r <= c { d.get(r, c) } else { 0.0 })
}

/// Lower triangle (diagonal included) of a matrix, zeros above.
pub fn lower_triangle(d: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(d.m, d.n, |r, c| if r >= c { d.get(r, c) } else { 0.0 })
}

/// Strict lower triangle with a unit diagonal placed on top.
pub fn unit_lower(d: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(d.m, d.n, |r, c| {
        if r == c {
            1.0
        } else if r > c {
            d.get(r, c)
        } else {
            0.0
        }
    })
}

/// Relative difference `‖a - b‖_inf / max(‖b‖_inf, 1)`.
pub fn rel_diff_inf(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).inf_norm() / b.inf_norm().max(1.0)
}

/// Explicit orthogonal factor of a tiled QR run, assembled from the stored
/// reflector tiles and accumulation strips by plain dense products.
///
/// `factored` is the tile matrix after the run (reflectors below the
/// diagonal of each factored column), `aux` the populated auxiliary grid.
/// The result is the square `m x m` factor `Q` with `A = Q R`.
pub fn tiled_q(factored: &TileMatrix, aux: &QrAux) -> DenseMatrix {
    let (p, q, b) = (factored.p, factored.q, factored.b);
    let m = p * b;
    let mut g = DenseMatrix::identity(m);
    for k in 0..p.min(q) {
        let diag = aux.get(k, k).expect("diagonal factor present");
        let v_kk = diag.v_diag.as_deref().expect("diagonal reflector copy");
        let s = diag.t.s;
        // Right-multiply G by the diagonal tile's reflector product, one
        // group at a time: touches only block column k.
        for ib in 0..diag.t.block_count() {
            let j0 = ib * s;
            let tblk = diag.t.block(ib);
            let mut w = vec![0.0; s];
            for row in 0..m {
                // w = G[row, kblk] * V_i
                for (c, slot) in w.iter_mut().enumerate() {
                    let jc = j0 + c;
                    let mut acc = g.get(row, k * b + jc);
                    for rr in jc + 1..b {
                        acc += g.get(row, k * b + rr) * v_kk[c_at(rr, jc, b)];
                    }
                    *slot = acc;
                }
                // w := w * T_i (upper triangular)
                for c in (0..s).rev() {
                    let mut acc = 0.0;
                    for r in 0..=c {
                        acc += w[r] * tblk[c * s + r];
                    }
                    w[c] = acc;
                }
                // G[row, kblk] -= w * V_i^T
                for (c, &wc) in w.iter().enumerate() {
                    if wc == 0.0 {
                        continue;
                    }
                    let jc = j0 + c;
                    g.set(row, k * b + jc, g.get(row, k * b + jc) - wc);
                    for rr in jc + 1..b {
                        let idx = k * b + rr;
                        g.set(row, idx, g.get(row, idx) - wc * v_kk[c_at(rr, jc, b)]);
                    }
                }
            }
        }
        // Coupled reflectors of the step, in row order: touch block columns
        // k and i.
        for i in k + 1..p {
            let entry = aux.get(i, k).expect("coupled factor present");
            let vlow = factored.tile(i, k);
            let s = entry.t.s;
            for ib in 0..entry.t.block_count() {
                let j0 = ib * s;
                let tblk = entry.t.block(ib);
                let mut w = vec![0.0; s];
                for row in 0..m {
                    for (c, slot) in w.iter_mut().enumerate() {
                        let mut acc = g.get(row, k * b + j0 + c);
                        for rr in 0..b {
                            acc += g.get(row, i * b + rr) * vlow[c_at(rr, j0 + c, b)];
                        }
                        *slot = acc;
                    }
                    for c in (0..s).rev() {
                        let mut acc = 0.0;
                        for r in 0..=c {
                            acc += w[r] * tblk[c * s + r];
                        }
                        w[c] = acc;
                    }
                    for (c, &wc) in w.iter().enumerate() {
                        if wc == 0.0 {
                            continue;
                        }
                        let idx = k * b + j0 + c;
                        g.set(row, idx, g.get(row, idx) - wc);
                        for rr in 0..b {
                            let idx = i * b + rr;
                            g.set(row, idx, g.get(row, idx) - wc * vlow[c_at(rr, j0 + c, b)]);
                        }
                    }
                }
            }
        }
    }
    g
}

#[inline]
fn c_at(r: usize, c: usize, ld: usize) -> usize {
    c * ld + r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{execute_sequential, plan_qr, FactorAux};
    use crate::tilemat::{gen_random, gen_spd};

    #[test]
    fn cholesky_oracle_reconstructs() {
        let a = gen_spd(12, 2);
        let l = cholesky_lower(&a).unwrap();
        let res = rel_diff_inf(&l.matmul(&l.transpose()), &a);
        assert!(res < 1e-14);
    }

    #[test]
    fn generated_spd_matrices_are_positive_definite() {
        // A successful scalar Cholesky certifies every eigenvalue positive.
        for seed in 0..8u64 {
            assert!(cholesky_lower(&gen_spd(8, seed)).is_some());
        }
    }

    #[test]
    fn householder_qr_orthogonal_and_reconstructs() {
        let a = gen_random(10, 6, 4);
        let (q, r) = householder_qr(&a);
        let qr = q.matmul(&r);
        assert!(rel_diff_inf(&qr, &a) < 1e-14);
        let qtq = q.transpose().matmul(&q);
        assert!(qtq.sub(&DenseMatrix::identity(10)).inf_norm() < 1e-13);
    }

    #[test]
    fn lu_partial_reconstructs() {
        let a = gen_random(12, 12, 6);
        let (l, u, piv) = lu_partial(&a).unwrap();
        let pa = permute_rows(&a, &piv);
        assert!(rel_diff_inf(&l.matmul(&u), &pa) < 1e-13);
    }

    #[test]
    fn tiled_q_reconstructs_and_is_orthogonal() {
        let (p, b, s) = (3, 8, 4);
        let n = p * b;
        let a = gen_random(n, n, 15);
        let plan = plan_qr(p, p, b, s);
        let mut tiles = TileMatrix::from_dense(&a, b).unwrap();
        let mut aux = FactorAux::for_plan(&plan);
        execute_sequential(&plan, &mut tiles, &mut aux).unwrap();
        let q = tiled_q(&tiles, aux.qr().unwrap());
        let r = upper_trapezoid(&tiles.to_dense());
        let resid = q.matmul(&r).sub(&a).inf_norm() / a.inf_norm();
        let orth = q.transpose().matmul(&q).sub(&DenseMatrix::identity(n)).inf_norm();
        assert!(resid < 1e-13, "residual {resid}");
        assert!(orth < 1e-13, "orthogonality {orth}");
    }
}
