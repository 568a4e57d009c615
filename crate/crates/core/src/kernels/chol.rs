//! Cholesky tile kernels: diagonal factorization, triangular solve against
//! the diagonal factor, and the symmetric-rank update of trailing tiles.

use super::{at, KernelError};

/// Unblocked Cholesky factorization of a symmetric positive definite tile.
///
/// Only the lower triangle of `a` is read. On success the lower triangle
/// holds `L` with `A = L L^T` and positive diagonal; the strict upper
/// triangle is zeroed.
pub fn potf2(a: &mut [f64], b: usize) -> Result<(), KernelError> {
    debug_assert_eq!(a.len(), b * b);
    for j in 0..b {
        // Fold the trailing parts of the already-factored columns into
        // column j, then scale by the new diagonal.
        for k in 0..j {
            let ljk = a[at(j, k, b)];
            if ljk != 0.0 {
                let (done, rest) = a.split_at_mut(j * b);
                let lcol = &done[k * b..(k + 1) * b];
                let jcol = &mut rest[..b];
                for r in j..b {
                    jcol[r] -= ljk * lcol[r];
                }
            }
        }
        let d = a[at(j, j, b)];
        if d <= 0.0 || d.is_nan() {
            return Err(KernelError::NotPositiveDefinite { index: j });
        }
        let d = d.sqrt();
        a[at(j, j, b)] = d;
        for r in j + 1..b {
            a[at(r, j, b)] /= d;
        }
    }
    for c in 1..b {
        for r in 0..c {
            a[at(r, c, b)] = 0.0;
        }
    }
    Ok(())
}

/// Triangular update of a subdiagonal tile: `a := a * l^{-T}` for the lower
/// triangular factor `l` produced by [`potf2`].
pub fn trsm(l: &[f64], a: &mut [f64], b: usize) -> Result<(), KernelError> {
    debug_assert_eq!(l.len(), b * b);
    debug_assert_eq!(a.len(), b * b);
    for j in 0..b {
        if l[at(j, j, b)] == 0.0 {
            return Err(KernelError::SingularTriangle { index: j });
        }
    }
    // X L^T = A column recurrence: X[:,j] = (A[:,j] - sum_{k<j} X[:,k] L[j,k]) / L[j,j].
    for j in 0..b {
        for k in 0..j {
            let ljk = l[at(j, k, b)];
            if ljk != 0.0 {
                let (done, rest) = a.split_at_mut(j * b);
                let xcol = &done[k * b..(k + 1) * b];
                let jcol = &mut rest[..b];
                for r in 0..b {
                    jcol[r] -= ljk * xcol[r];
                }
            }
        }
        let d = l[at(j, j, b)];
        for r in 0..b {
            a[at(r, j, b)] /= d;
        }
    }
    Ok(())
}

/// Trailing update `a := a - l_ik * l_jk^T`.
///
/// With `diagonal` set (the `i == j` tile) only the lower triangle of `a` is
/// updated; the strict upper triangle is left untouched.
pub fn gsmm(l_ik: &[f64], l_jk: &[f64], a: &mut [f64], b: usize, diagonal: bool) {
    debug_assert_eq!(l_ik.len(), b * b);
    debug_assert_eq!(l_jk.len(), b * b);
    debug_assert_eq!(a.len(), b * b);
    for j in 0..b {
        let rstart = if diagonal { j } else { 0 };
        let acol = &mut a[j * b..(j + 1) * b];
        for k in 0..b {
            let w = l_jk[at(j, k, b)];
            if w != 0.0 {
                let lcol = &l_ik[k * b..(k + 1) * b];
                for r in rstart..b {
                    acol[r] -= lcol[r] * w;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilemat::gen_spd;

    #[test]
    fn potf2_scalar_tile() {
        let mut a = [4.0];
        potf2(&mut a, 1).unwrap();
        assert_eq!(a, [2.0]);
    }

    #[test]
    fn potf2_identity() {
        let mut a = vec![0.0; 9];
        for i in 0..3 {
            a[at(i, i, 3)] = 1.0;
        }
        let expected = a.clone();
        potf2(&mut a, 3).unwrap();
        assert_eq!(a, expected);
    }

    #[test]
    fn potf2_hand_case() {
        // [[4, 2], [2, 5]] -> L = [[2, 0], [1, 2]].
        let mut a = vec![4.0, 2.0, 2.0, 5.0];
        potf2(&mut a, 2).unwrap();
        assert_eq!(a, vec![2.0, 1.0, 0.0, 2.0]);
    }

    #[test]
    fn potf2_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalues 3 and -1
        match potf2(&mut a, 2) {
            Err(KernelError::NotPositiveDefinite { index: 1 }) => {}
            other => panic!("expected failure at index 1, got {other:?}"),
        }
    }

    #[test]
    fn trsm_identity_leaves_input() {
        let b = 3;
        let mut l = vec![0.0; 9];
        for i in 0..3 {
            l[at(i, i, 3)] = 1.0;
        }
        let mut a: Vec<f64> = (0..9).map(|v| v as f64).collect();
        let expected = a.clone();
        trsm(&l, &mut a, b).unwrap();
        assert_eq!(a, expected);
    }

    #[test]
    fn trsm_scaling() {
        // l = 2I, a = [[2,4],[6,8]] -> a * (2I)^{-T} = [[1,2],[3,4]].
        let l = vec![2.0, 0.0, 0.0, 2.0];
        let mut a = vec![2.0, 6.0, 4.0, 8.0];
        trsm(&l, &mut a, 2).unwrap();
        assert_eq!(a, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn trsm_singular_diag() {
        let l = vec![1.0, 5.0, 0.0, 0.0];
        let mut a = vec![1.0; 4];
        assert_eq!(
            trsm(&l, &mut a, 2),
            Err(KernelError::SingularTriangle { index: 1 })
        );
    }

    #[test]
    fn trsm_multiply_back() {
        let b = 4;
        let spd = gen_spd(b, 3);
        let mut l = spd.values.clone();
        potf2(&mut l, b).unwrap();
        let a0 = crate::tilemat::gen_random(b, b, 17).values;
        let mut a = a0.clone();
        trsm(&l, &mut a, b).unwrap();
        // result * l^T should reconstruct a0
        for r in 0..b {
            for c in 0..b {
                let mut acc = 0.0;
                for k in 0..b {
                    acc += a[at(r, k, b)] * l[at(c, k, b)];
                }
                assert!(
                    (acc - a0[at(r, c, b)]).abs() <= 1e-13 * a0.iter().fold(1.0f64, |m, v| m.max(v.abs())),
                    "reconstruction mismatch at ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn gsmm_zero_and_identity() {
        let b = 2;
        let zero = vec![0.0; 4];
        let ident = vec![1.0, 0.0, 0.0, 1.0];
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        let orig = a.clone();
        gsmm(&zero, &ident, &mut a, b, false);
        assert_eq!(a, orig);
        gsmm(&ident, &ident, &mut a, b, false);
        assert_eq!(a, vec![0.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn gsmm_matches_triple_loop() {
        let b = 4;
        let l_ik = crate::tilemat::gen_random(b, b, 1).values;
        let l_jk = crate::tilemat::gen_random(b, b, 2).values;
        let mut a = crate::tilemat::gen_random(b, b, 3).values;
        let mut expected = a.clone();
        for r in 0..b {
            for c in 0..b {
                let mut acc = 0.0;
                for k in 0..b {
                    acc += l_ik[at(r, k, b)] * l_jk[at(c, k, b)];
                }
                expected[at(r, c, b)] -= acc;
            }
        }
        gsmm(&l_ik, &l_jk, &mut a, b, false);
        for idx in 0..b * b {
            assert!((a[idx] - expected[idx]).abs() <= 1e-13);
        }
    }

    #[test]
    fn gsmm_diagonal_leaves_upper() {
        let b = 3;
        let l = crate::tilemat::gen_random(b, b, 5).values;
        let mut a = crate::tilemat::gen_random(b, b, 6).values;
        let orig = a.clone();
        gsmm(&l, &l, &mut a, b, true);
        for c in 0..b {
            for r in 0..c {
                assert_eq!(a[at(r, c, b)], orig[at(r, c, b)]);
            }
            for r in c..b {
                assert_ne!(a[at(r, c, b)], orig[at(r, c, b)]);
            }
        }
    }
}
