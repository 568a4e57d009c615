//! Factorization drivers: task-plan construction for the three tiled
//! factorizations, sequential (program-order) execution, and whole-problem
//! flop models.

mod exec;
pub(crate) mod plan;

pub use exec::{
    execute_in_order, execute_sequential, FactorAux, LuAux, LuAuxEntry, LuAuxFactor, QrAux,
    QrAuxEntry,
};
pub(crate) use plan::default_rank;
pub use plan::{plan_cholesky, plan_lu, plan_qr, FactorPlan, Loc, Task};

pub(crate) use exec::{run_task, AuxPtrs, TilePtrs};

use crate::kernels::KernelError;
use crate::kernels::KernelKind;
use std::fmt;

/// Which factorization a plan computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Cholesky,
    Qr,
    Lu,
}

impl FactorKind {
    pub fn name(self) -> &'static str {
        match self {
            FactorKind::Cholesky => "chol",
            FactorKind::Qr => "qr",
            FactorKind::Lu => "lu",
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Errors raised while executing a plan.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    /// The matrix or auxiliary storage does not match the plan.
    Shape { detail: String },
    /// A replay order is not a topological permutation of the plan.
    BadOrder { position: usize },
    /// A kernel failed; carries the task identity for context.
    Task {
        kind: KernelKind,
        k: usize,
        i: usize,
        j: usize,
        source: KernelError,
    },
}

impl FactorError {
    pub(crate) fn task(t: &Task, source: KernelError) -> Self {
        FactorError::Task { kind: t.kind, k: t.k, i: t.i, j: t.j, source }
    }
}

impl fmt::Display for FactorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorError::Shape { detail } => write!(f, "shape mismatch: {detail}"),
            FactorError::BadOrder { position } => {
                write!(f, "replay order violates dependencies at position {position}")
            }
            FactorError::Task { kind, k, i, j, source } => {
                write!(f, "{kind}(k={k}, i={i}, j={j}) failed: {source}")
            }
        }
    }
}

impl std::error::Error for FactorError {}

/// Model flop count for a whole factorization of an `m x n` matrix with tile
/// size `b` and inner block size `s`.
///
/// QR and LU carry the blocking overhead factors `1 + s/(4b)` and
/// `1 + s/(2b)` over the unblocked leading-order counts; Cholesky has no
/// inner blocking.
pub fn total_flops(kind: FactorKind, m: usize, n: usize, b: usize, s: usize) -> f64 {
    let (mf, nf, bf, sf) = (m as f64, n as f64, b as f64, s as f64);
    match kind {
        FactorKind::Cholesky => nf * nf * nf / 3.0,
        FactorKind::Qr => 2.0 * nf * nf * (mf - nf / 3.0) * (1.0 + sf / (4.0 * bf)),
        FactorKind::Lu => nf * nf * (mf - nf / 3.0) * (1.0 + sf / (2.0 * bf)),
    }
}

/// The conventional unblocked operation count for the same factorization,
/// used when reporting rates so they reflect time to completion rather than
/// the extra work of blocking.
pub fn lapack_equivalent_flops(kind: FactorKind, m: usize, n: usize) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    match kind {
        FactorKind::Cholesky => nf * nf * nf / 3.0,
        FactorKind::Qr => 2.0 * nf * nf * (mf - nf / 3.0),
        FactorKind::Lu => nf * nf * (mf - nf / 3.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_flops_reductions() {
        let n = 512usize;
        let nf = n as f64;
        // s -> 0 recovers the unblocked square count 4n^3/3.
        let base = total_flops(FactorKind::Qr, n, n, 64, 0);
        assert!((base - 4.0 * nf * nf * nf / 3.0).abs() / base < 1e-12);
        // s = b costs exactly 25% more.
        let sb = total_flops(FactorKind::Qr, n, n, 64, 64);
        assert!((sb / base - 1.25).abs() < 1e-12);
    }

    #[test]
    fn lu_flops_reduction() {
        let n = 512usize;
        let base = total_flops(FactorKind::Lu, n, n, 64, 0);
        let sb = total_flops(FactorKind::Lu, n, n, 64, 64);
        assert!((sb / base - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lapack_counts() {
        let n = 100usize;
        let nf = n as f64;
        assert_eq!(
            lapack_equivalent_flops(FactorKind::Cholesky, n, n),
            nf * nf * nf / 3.0
        );
        assert!(
            (lapack_equivalent_flops(FactorKind::Qr, n, n) - 4.0 * nf * nf * nf / 3.0).abs()
                < 1e-6
        );
    }
}
