//! QR tile kernels: blocked tile factorization, the block-reflector update,
//! and the coupled triangle-on-square factorization with its update.
//!
//! Reflectors follow the usual convention where the resulting diagonal entry
//! of `R` is `-sign(x_1) * ‖x‖`. A group of `s` reflectors is accumulated
//! into an `s x s` upper-triangular block `T` so a whole group applies as
//! `I - V T V^T`; the transposed operator `I - V T^T V^T` is what the update
//! kernels apply.

use super::{at, WyStrip};

/// Computes a Householder reflector for the vector `[alpha; x]` such that
/// `H [alpha; x] = [beta; 0]` with `H = I - tau [1; v] [1; v]^T`.
///
/// `alpha` is overwritten with `beta`, `x` with `v` (the unit head stays
/// implicit). Returns `tau`; a zero tail yields `tau = 0` and no reflection.
fn reflector(alpha: &mut f64, x: &mut [f64]) -> f64 {
    let mut sumsq = 0.0;
    for v in x.iter() {
        sumsq += v * v;
    }
    if sumsq == 0.0 {
        return 0.0;
    }
    let a = *alpha;
    let norm = (a * a + sumsq).sqrt();
    let beta = -norm.copysign(a);
    let tau = (beta - a) / beta;
    let scale = 1.0 / (a - beta);
    for v in x.iter_mut() {
        *v *= scale;
    }
    *alpha = beta;
    tau
}

/// Fills strip block `ib` from reflector columns and their `tau` values
/// (already stored on the block diagonal): `T[0..c, c] = -tau_c * T * w`
/// where `w` holds the dot products of earlier reflectors with column `c`.
///
/// `dot` computes `v_k^T v_c` for local panel columns `k < c`.
fn accumulate_t(t: &mut WyStrip, ib: usize, s: usize, mut dot: impl FnMut(usize, usize) -> f64) {
    let mut w = vec![0.0; s];
    for c in 1..s {
        let tau = t.get(ib, c, c);
        if tau == 0.0 {
            continue;
        }
        for (k, slot) in w.iter_mut().enumerate().take(c) {
            *slot = dot(k, c);
        }
        for r in 0..c {
            let mut acc = 0.0;
            for (k, &wk) in w.iter().enumerate().take(c).skip(r) {
                acc += t.get(ib, r, k) * wk;
            }
            t.set(ib, r, c, -tau * acc);
        }
    }
}

/// Applies `(I - V T V^T)^T` for one reflector group to columns of `c`.
///
/// `v_cols` holds the `s` reflector columns (full tile height, entries above
/// the implicit unit at row `j0 + k` are ignored), `tblk` the `s x s`
/// accumulation block. `c` is a contiguous run of full-height columns.
fn apply_group_qt(v_cols: &[f64], tblk: &[f64], b: usize, s: usize, j0: usize, c: &mut [f64]) {
    let ncols = c.len() / b;
    let mut w = vec![0.0; s];
    for col in 0..ncols {
        let ccol = &mut c[col * b..(col + 1) * b];
        for k in 0..s {
            let vcol = &v_cols[k * b..(k + 1) * b];
            let mut d = ccol[j0 + k];
            for r in j0 + k + 1..b {
                d += vcol[r] * ccol[r];
            }
            w[k] = d;
        }
        // w := T^T w, computed high-to-low so lower entries stay original.
        for k in (0..s).rev() {
            let mut acc = 0.0;
            for r in 0..=k {
                acc += tblk[k * s + r] * w[r];
            }
            w[k] = acc;
        }
        for k in 0..s {
            let wk = w[k];
            ccol[j0 + k] -= wk;
            if wk != 0.0 {
                let vcol = &v_cols[k * b..(k + 1) * b];
                for r in j0 + k + 1..b {
                    ccol[r] -= vcol[r] * wk;
                }
            }
        }
    }
}

/// Blocked QR factorization of a `b x b` tile with inner block size `s`.
///
/// On return the upper triangle of `a` holds `R` and the strict lower
/// triangle the Householder vectors `V` (unit diagonal implicit); the
/// returned strip holds the accumulation blocks. No failure mode: rank
/// deficient columns simply produce zero reflectors.
pub fn geqrt(a: &mut [f64], b: usize, s: usize) -> WyStrip {
    debug_assert_eq!(a.len(), b * b);
    let mut t = WyStrip::zeros(b, s);
    for ib in 0..b / s {
        let j0 = ib * s;
        let jend = j0 + s;
        for j in j0..jend {
            let tau = {
                let col = &mut a[j * b + j..(j + 1) * b];
                let (head, tail) = col.split_first_mut().unwrap();
                reflector(head, tail)
            };
            t.set(ib, j - j0, j - j0, tau);
            if tau == 0.0 {
                continue;
            }
            // Apply the new reflector to the rest of the panel.
            for jj in j + 1..jend {
                let (left, right) = a.split_at_mut(jj * b);
                let vcol = &left[j * b..(j + 1) * b];
                let ccol = &mut right[..b];
                let mut d = ccol[j];
                for r in j + 1..b {
                    d += vcol[r] * ccol[r];
                }
                d *= tau;
                ccol[j] -= d;
                for r in j + 1..b {
                    ccol[r] -= vcol[r] * d;
                }
            }
        }
        accumulate_t(&mut t, ib, s, |k, c| {
            // v_k^T v_c with v_c's implicit unit at row j0 + c.
            let jk = j0 + k;
            let jc = j0 + c;
            let mut d = a[at(jc, jk, b)];
            for r in jc + 1..b {
                d += a[at(r, jk, b)] * a[at(r, jc, b)];
            }
            d
        });
        if jend < b {
            let (panel, trailing) = a.split_at_mut(jend * b);
            apply_group_qt(&panel[j0 * b..], t.block(ib), b, s, j0, trailing);
        }
    }
    t
}

/// Applies the transformation computed by [`geqrt`] to a tile on the same
/// tile row: `a_kj := (I - V T V^T)^T a_kj`, one reflector group at a time.
pub fn larfb(a_kj: &mut [f64], v_kk: &[f64], t_kk: &WyStrip, b: usize) {
    debug_assert_eq!(a_kj.len(), b * b);
    debug_assert_eq!(v_kk.len(), b * b);
    let s = t_kk.s;
    for ib in 0..t_kk.block_count() {
        let j0 = ib * s;
        apply_group_qt(&v_kk[j0 * b..(j0 + s) * b], t_kk.block(ib), b, s, j0, a_kj);
    }
}

/// Applies one reflector group of a coupled factorization to columns
/// `cols` of the couple `[top; bot]`.
///
/// The group's reflectors have an implicit unit at top row `j0 + k` and a
/// full-height dense part `vlow` over the bottom tile; the top tile is only
/// touched in rows `j0 .. j0+s`. `bot` is a contiguous run of bottom-tile
/// columns starting at global column `bot_col0`.
#[allow(clippy::too_many_arguments)]
fn apply_couple_group(
    vlow: &[f64],
    tblk: &[f64],
    b: usize,
    s: usize,
    j0: usize,
    top: &mut [f64],
    bot: &mut [f64],
    bot_col0: usize,
    cols: std::ops::Range<usize>,
) {
    let mut w = vec![0.0; s];
    for col in cols {
        let bcol = &mut bot[(col - bot_col0) * b..(col - bot_col0 + 1) * b];
        for k in 0..s {
            let vcol = &vlow[k * b..(k + 1) * b];
            let mut d = top[at(j0 + k, col, b)];
            for r in 0..b {
                d += vcol[r] * bcol[r];
            }
            w[k] = d;
        }
        for k in (0..s).rev() {
            let mut acc = 0.0;
            for r in 0..=k {
                acc += tblk[k * s + r] * w[r];
            }
            w[k] = acc;
        }
        for k in 0..s {
            let wk = w[k];
            top[at(j0 + k, col, b)] -= wk;
            if wk != 0.0 {
                let vcol = &vlow[k * b..(k + 1) * b];
                for r in 0..b {
                    bcol[r] -= vcol[r] * wk;
                }
            }
        }
    }
}

/// Blocked QR factorization of the couple formed by an upper triangular tile
/// `r_kk` stacked over a square tile `a_ik`.
///
/// `r_kk` is replaced by the new `R`; `a_ik` is overwritten with the dense
/// bottom half of the structured reflectors (the top half is the implicit
/// identity pattern of the inner panels). Returns the accumulation strip.
pub fn tsqrt(r_kk: &mut [f64], a_ik: &mut [f64], b: usize, s: usize) -> WyStrip {
    debug_assert_eq!(r_kk.len(), b * b);
    debug_assert_eq!(a_ik.len(), b * b);
    let mut t = WyStrip::zeros(b, s);
    for ib in 0..b / s {
        let j0 = ib * s;
        let jend = j0 + s;
        for j in j0..jend {
            let tau = {
                let mut alpha = r_kk[at(j, j, b)];
                let tau = reflector(&mut alpha, &mut a_ik[j * b..(j + 1) * b]);
                r_kk[at(j, j, b)] = alpha;
                tau
            };
            t.set(ib, j - j0, j - j0, tau);
            if tau == 0.0 {
                continue;
            }
            for jj in j + 1..jend {
                let (left, right) = a_ik.split_at_mut(jj * b);
                let vcol = &left[j * b..(j + 1) * b];
                let ccol = &mut right[..b];
                let mut d = r_kk[at(j, jj, b)];
                for r in 0..b {
                    d += vcol[r] * ccol[r];
                }
                d *= tau;
                r_kk[at(j, jj, b)] -= d;
                for r in 0..b {
                    ccol[r] -= vcol[r] * d;
                }
            }
        }
        accumulate_t(&mut t, ib, s, |k, c| {
            // Top parts of distinct reflectors are orthogonal unit vectors,
            // so only the dense bottom halves contribute.
            let ck = &a_ik[(j0 + k) * b..(j0 + k + 1) * b];
            let cc = &a_ik[(j0 + c) * b..(j0 + c + 1) * b];
            let mut d = 0.0;
            for r in 0..b {
                d += ck[r] * cc[r];
            }
            d
        });
        if jend < b {
            let (vpart, trailing) = a_ik.split_at_mut(jend * b);
            apply_couple_group(
                &vpart[j0 * b..],
                t.block(ib),
                b,
                s,
                j0,
                r_kk,
                trailing,
                jend,
                jend..b,
            );
        }
    }
    t
}

/// Applies the transformation computed by [`tsqrt`] to the couple
/// `[r_kj; a_ij]`, one reflector group at a time.
pub fn ssrfb(r_kj: &mut [f64], a_ij: &mut [f64], v_ik: &[f64], t_ik: &WyStrip, b: usize) {
    debug_assert_eq!(r_kj.len(), b * b);
    debug_assert_eq!(a_ij.len(), b * b);
    debug_assert_eq!(v_ik.len(), b * b);
    let s = t_ik.s;
    for ib in 0..t_ik.block_count() {
        let j0 = ib * s;
        apply_couple_group(
            &v_ik[j0 * b..(j0 + s) * b],
            t_ik.block(ib),
            b,
            s,
            j0,
            r_kj,
            a_ij,
            0,
            0..b,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilemat::gen_random;

    fn identity(b: usize) -> Vec<f64> {
        let mut a = vec![0.0; b * b];
        for i in 0..b {
            a[at(i, i, b)] = 1.0;
        }
        a
    }

    #[test]
    fn reflector_zero_tail() {
        let mut alpha = 3.0;
        let mut x = [0.0, 0.0];
        assert_eq!(reflector(&mut alpha, &mut x), 0.0);
        assert_eq!(alpha, 3.0);
    }

    #[test]
    fn reflector_maps_to_minus_sign_norm() {
        let mut alpha = 3.0;
        let mut x = [4.0];
        let tau = reflector(&mut alpha, &mut x);
        assert!((alpha + 5.0).abs() < 1e-15); // beta = -sign(3)*5
        // Check H [3; 4] = [beta; 0]: head = 3 - tau*(3 + v*4)
        let w = tau * (3.0 + x[0] * 4.0);
        assert!((3.0 - w - alpha).abs() < 1e-14);
        assert!((4.0 - x[0] * w).abs() < 1e-14);
    }

    #[test]
    fn geqrt_identity_input() {
        let b = 4;
        let mut a = identity(b);
        let t = geqrt(&mut a, b, 2);
        assert_eq!(a, identity(b));
        assert!(t.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn geqrt_r_sign_convention() {
        let b = 4;
        let mut a = gen_random(b, b, 21).values;
        let first = a[0];
        let col_norm: f64 = (0..b).map(|r| a[r] * a[r]).sum::<f64>().sqrt();
        geqrt(&mut a, b, b);
        assert!((a[0] + col_norm.copysign(first)).abs() < 1e-14);
    }

    #[test]
    fn geqrt_inner_blockings_agree_up_to_column_signs() {
        let b = 4;
        let orig = gen_random(b, b, 33).values;
        let mut a_full = orig.clone();
        let mut a_inner = orig.clone();
        geqrt(&mut a_full, b, 4);
        geqrt(&mut a_inner, b, 2);
        for c in 0..b {
            // Sign-normalize each R row segment by the sign of its diagonal.
            let sign_full = a_full[at(c, c, b)].signum();
            let sign_inner = a_inner[at(c, c, b)].signum();
            for cc in c..b {
                let vf = sign_full * a_full[at(c, cc, b)];
                let vi = sign_inner * a_inner[at(c, cc, b)];
                assert!((vf - vi).abs() < 1e-13, "row {c} col {cc}: {vf} vs {vi}");
            }
        }
    }

    #[test]
    fn larfb_zero_reflectors_is_identity() {
        let b = 4;
        let mut v = identity(b);
        let t = geqrt(&mut v, b, 2);
        let mut a = gen_random(b, b, 8).values;
        let orig = a.clone();
        larfb(&mut a, &v, &t, b);
        assert_eq!(a, orig);
    }

    #[test]
    fn larfb_matches_joint_factorization() {
        // Factoring [A | B] jointly must produce the same leading R block and
        // transformed B as geqrt(A) followed by larfb on B.
        let b = 4;
        let a0 = gen_random(b, b, 101).values;
        let b0 = gen_random(b, b, 102).values;

        let mut a = a0.clone();
        let t = geqrt(&mut a, b, 2);
        let mut bt = b0.clone();
        larfb(&mut bt, &a, &t, b);

        // Joint oracle on the b x 2b matrix via plain dense Householder QR.
        let m = b;
        let n = 2 * b;
        let mut joint = vec![0.0; m * n];
        joint[..m * b].copy_from_slice(&a0);
        joint[m * b..].copy_from_slice(&b0);
        for j in 0..m.min(n) {
            let col = &mut joint[j * m + j..(j + 1) * m];
            let (head, tail) = col.split_first_mut().unwrap();
            let tau = reflector(head, tail);
            if tau == 0.0 {
                continue;
            }
            for jj in j + 1..n {
                let (left, right) = joint.split_at_mut(jj * m);
                let vcol = &left[j * m..(j + 1) * m];
                let ccol = &mut right[..m];
                let mut d = ccol[j];
                for r in j + 1..m {
                    d += vcol[r] * ccol[r];
                }
                d *= tau;
                ccol[j] -= d;
                for r in j + 1..m {
                    ccol[r] -= vcol[r] * d;
                }
            }
        }
        for c in 0..b {
            for r in 0..=c.min(b - 1) {
                assert!(
                    (a[at(r, c, b)] - joint[at(r, c, m)]).abs() < 1e-12,
                    "R mismatch at ({r},{c})"
                );
            }
            for r in 0..b {
                assert!(
                    (bt[at(r, c, b)] - joint[at(r, c + b, m)]).abs() < 1e-12,
                    "B mismatch at ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn tsqrt_zero_bottom_is_noop() {
        let b = 4;
        let mut r = identity(b);
        // make an upper triangular R with some content
        r[at(0, 2, b)] = 3.0;
        let r0 = r.clone();
        let mut a = vec![0.0; b * b];
        let t = tsqrt(&mut r, &mut a, b, 2);
        assert_eq!(r, r0);
        assert!(a.iter().all(|&v| v == 0.0));
        assert!(t.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tsqrt_identity_couple_diagonal() {
        // Stacking I over I: every couple column has norm sqrt(2), so the new
        // R diagonal magnitudes are sqrt(2).
        let b = 2;
        let mut r = identity(b);
        let mut a = identity(b);
        tsqrt(&mut r, &mut a, b, 2);
        for j in 0..b {
            assert!((r[at(j, j, b)].abs() - 2.0f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn ssrfb_zero_reflectors_is_identity() {
        let b = 4;
        let mut rkk = identity(b);
        let mut v = vec![0.0; b * b];
        let t = tsqrt(&mut rkk, &mut v, b, 2);
        let mut top = gen_random(b, b, 61).values;
        let mut bot = gen_random(b, b, 62).values;
        let (t0, b0) = (top.clone(), bot.clone());
        ssrfb(&mut top, &mut bot, &v, &t, b);
        assert_eq!(top, t0);
        assert_eq!(bot, b0);
    }

    #[test]
    fn ssrfb_reproduces_tsqrt_columns() {
        // Applying the tsqrt transformation to a copy of the columns it
        // factored must reproduce the computed R (bottom annihilated).
        let b = 4;
        let r0 = {
            let mut u = gen_random(b, b, 71).values;
            for c in 0..b {
                for r in c + 1..b {
                    u[at(r, c, b)] = 0.0;
                }
            }
            u
        };
        let a0 = gen_random(b, b, 72).values;
        let mut r = r0.clone();
        let mut v = a0.clone();
        let t = tsqrt(&mut r, &mut v, b, 2);

        let mut top = r0.clone();
        let mut bot = a0.clone();
        ssrfb(&mut top, &mut bot, &v, &t, b);
        for c in 0..b {
            for row in 0..=c {
                assert!(
                    (top[at(row, c, b)] - r[at(row, c, b)]).abs() < 1e-13,
                    "R mismatch at ({row},{c})"
                );
            }
            for row in 0..b {
                assert!(bot[at(row, c, b)].abs() < 1e-13, "bottom not annihilated");
            }
        }
    }
}
