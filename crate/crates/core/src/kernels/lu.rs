//! LU tile kernels: partial-pivoting factorization of a tile, the pivoted
//! forward-substitution update, and the coupled triangle-on-square
//! factorization with its update.
//!
//! The coupled factorization eliminates each column of the couple using
//! either the current diagonal row of the upper tile or any row of the
//! square tile below, whichever carries the largest magnitude, so every
//! multiplier is at most 1 in absolute value. Row exchanges that pull a
//! square-tile row into a pivot position carry that row's in-panel
//! multipliers into the upper tile; those form the unit-lower blocks of the
//! returned strip, while the square tile keeps the dense bottom half of the
//! factor.

use super::{at, KernelError, LStrip, PivotVector};

/// Blocked LU factorization of a tile with partial pivoting and inner block
/// size `s`.
///
/// On success `a` holds the unit-lower factor below the diagonal and the
/// upper factor on and above it, with `P A = L U` for the permutation
/// recorded in the returned pivot vector.
pub fn getrf(a: &mut [f64], b: usize, s: usize) -> Result<PivotVector, KernelError> {
    debug_assert_eq!(a.len(), b * b);
    assert!(s >= 1 && b.is_multiple_of(s), "inner block size must divide tile size");
    let mut piv = vec![0usize; b];
    for j0 in (0..b).step_by(s) {
        let jend = j0 + s;
        for j in j0..jend {
            let (mut pr, mut pv) = (j, a[at(j, j, b)].abs());
            for r in j + 1..b {
                let v = a[at(r, j, b)].abs();
                if v > pv {
                    pv = v;
                    pr = r;
                }
            }
            if pv == 0.0 {
                return Err(KernelError::SingularTile { col: j });
            }
            piv[j] = pr;
            if pr != j {
                for c in 0..b {
                    a.swap(at(j, c, b), at(pr, c, b));
                }
            }
            let d = a[at(j, j, b)];
            for r in j + 1..b {
                a[at(r, j, b)] /= d;
            }
            for jj in j + 1..jend {
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
        // Panel transformations applied at once to the trailing columns:
        // forward substitution through the panel rows folds in the update of
        // the rows below in the same sweep.
        if jend < b {
            let (panel, trailing) = a.split_at_mut(jend * b);
            let ncols = b - jend;
            for col in 0..ncols {
                let ccol = &mut trailing[col * b..(col + 1) * b];
                for j in j0..jend {
                    let u = ccol[j];
                    if u != 0.0 {
                        let lcol = &panel[j * b..(j + 1) * b];
                        for r in j + 1..b {
                            ccol[r] -= lcol[r] * u;
                        }
                    }
                }
            }
        }
    }
    Ok(PivotVector::new(piv))
}

/// Applies the transformation computed by [`getrf`] to a tile on the same
/// tile row: `a_kj := L^{-1} P a_kj`.
pub fn gessm(a_kj: &mut [f64], l_kk: &[f64], piv: &PivotVector, b: usize) {
    debug_assert_eq!(a_kj.len(), b * b);
    debug_assert_eq!(l_kk.len(), b * b);
    debug_assert_eq!(piv.len(), b);
    for j in 0..b {
        let pr = piv.get(j);
        if pr != j {
            for c in 0..b {
                a_kj.swap(at(j, c, b), at(pr, c, b));
            }
        }
    }
    for c in 0..b {
        let acol = &mut a_kj[c * b..(c + 1) * b];
        for j in 0..b {
            let x = acol[j];
            if x != 0.0 {
                let lcol = &l_kk[j * b..(j + 1) * b];
                for r in j + 1..b {
                    acol[r] -= lcol[r] * x;
                }
            }
        }
    }
}

/// Blocked LU factorization of the couple formed by an upper triangular tile
/// `u_kk` stacked over a square tile `a_ik`, pivoting per column between the
/// diagonal row of the upper tile and every row of the square tile.
///
/// `u_kk` is replaced by the new upper factor, `a_ik` by the dense bottom
/// half of the unit-lower factor; the returned strip holds the factor's
/// upper unit-lower blocks and the pivot vector the row exchanges
/// (`piv[j] = j` keeps the diagonal, `piv[j] = b + r` pulls square-tile row
/// `r` into position `j`). Only the upper triangle of `u_kk` is ever read or
/// written, so a tile carrying a packed lower factor below the diagonal
/// keeps it.
pub fn tstrf(
    u_kk: &mut [f64],
    a_ik: &mut [f64],
    b: usize,
    s: usize,
) -> Result<(PivotVector, LStrip), KernelError> {
    debug_assert_eq!(u_kk.len(), b * b);
    debug_assert_eq!(a_ik.len(), b * b);
    assert!(s >= 1 && b.is_multiple_of(s), "inner block size must divide tile size");
    let mut piv = vec![0usize; b];
    let mut strip = LStrip::identity(b, s);
    for ib in 0..b / s {
        let j0 = ib * s;
        let jend = j0 + s;
        for j in j0..jend {
            let (mut pr, mut pv) = (j, u_kk[at(j, j, b)].abs());
            for r in 0..b {
                let v = a_ik[at(r, j, b)].abs();
                if v > pv {
                    pv = v;
                    pr = b + r;
                }
            }
            if pv == 0.0 {
                return Err(KernelError::SingularCouple { col: j });
            }
            piv[j] = pr;
            if pr >= b {
                let r = pr - b;
                // The incoming row's in-panel multipliers go straight into
                // the strip; the departing pristine row leaves structural
                // zeros behind. Positions below the diagonal of `u_kk` are
                // never touched.
                for c in j0..j {
                    strip.set(ib, j - j0, c - j0, a_ik[at(r, c, b)]);
                    a_ik[at(r, c, b)] = 0.0;
                }
                for c in j..jend {
                    std::mem::swap(&mut u_kk[at(j, c, b)], &mut a_ik[at(r, c, b)]);
                }
            }
            let d = u_kk[at(j, j, b)];
            for r in 0..b {
                a_ik[at(r, j, b)] /= d;
            }
            for jj in j + 1..jend {
                let u = u_kk[at(j, jj, b)];
                if u != 0.0 {
                    let (left, right) = a_ik.split_at_mut(jj * b);
                    let lcol = &left[j * b..(j + 1) * b];
                    let ccol = &mut right[..b];
                    for r in 0..b {
                        ccol[r] -= lcol[r] * u;
                    }
                }
            }
        }
        if jend < b {
            for j in j0..jend {
                if piv[j] >= b {
                    let r = piv[j] - b;
                    for c in jend..b {
                        std::mem::swap(&mut u_kk[at(j, c, b)], &mut a_ik[at(r, c, b)]);
                    }
                }
            }
            let lblk = strip.block(ib);
            for c in jend..b {
                for jj in 0..s {
                    let x = u_kk[at(j0 + jj, c, b)];
                    if x != 0.0 {
                        for rr in jj + 1..s {
                            u_kk[at(j0 + rr, c, b)] -= lblk[jj * s + rr] * x;
                        }
                    }
                }
            }
            let (panel, trailing) = a_ik.split_at_mut(jend * b);
            for c in jend..b {
                let ccol = &mut trailing[(c - jend) * b..(c - jend + 1) * b];
                for jj in 0..s {
                    let x = u_kk[at(j0 + jj, c, b)];
                    if x != 0.0 {
                        let lcol = &panel[(j0 + jj) * b..(j0 + jj + 1) * b];
                        for r in 0..b {
                            ccol[r] -= lcol[r] * x;
                        }
                    }
                }
            }
        }
    }
    Ok((PivotVector::new(piv), strip))
}

/// Applies the transformation computed by [`tstrf`] to the couple
/// `[u_kj; a_ij]`, one inner panel at a time: the recorded row exchanges,
/// the solve against the panel's unit-lower block, then the rank-`s` update
/// with the dense multipliers `l2` (the square tile left by [`tstrf`]).
pub fn ssssm(
    u_kj: &mut [f64],
    a_ij: &mut [f64],
    l2: &[f64],
    l1: &LStrip,
    piv: &PivotVector,
    b: usize,
) {
    debug_assert_eq!(u_kj.len(), b * b);
    debug_assert_eq!(a_ij.len(), b * b);
    debug_assert_eq!(l2.len(), b * b);
    debug_assert_eq!(piv.len(), b);
    let s = l1.s;
    for ib in 0..l1.block_count() {
        let j0 = ib * s;
        let jend = j0 + s;
        for j in j0..jend {
            let pr = piv.get(j);
            if pr >= b {
                let r = pr - b;
                for c in 0..b {
                    std::mem::swap(&mut u_kj[at(j, c, b)], &mut a_ij[at(r, c, b)]);
                }
            }
        }
        let lblk = l1.block(ib);
        for c in 0..b {
            for jj in 0..s {
                let x = u_kj[at(j0 + jj, c, b)];
                if x != 0.0 {
                    for rr in jj + 1..s {
                        u_kj[at(j0 + rr, c, b)] -= lblk[jj * s + rr] * x;
                    }
                }
            }
            let acol = &mut a_ij[c * b..(c + 1) * b];
            for jj in 0..s {
                let x = u_kj[at(j0 + jj, c, b)];
                if x != 0.0 {
                    let lcol = &l2[(j0 + jj) * b..(j0 + jj + 1) * b];
                    for r in 0..b {
                        acol[r] -= lcol[r] * x;
                    }
                }
            }
        }
    }
}
