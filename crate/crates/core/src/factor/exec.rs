//! Plan execution: auxiliary factor storage, the kernel dispatcher shared by
//! the sequential and concurrent paths, and program-order execution.

use super::plan::{FactorPlan, Task};
use super::{FactorError, FactorKind};
use crate::kernels::{self, KernelKind, LStrip, PivotVector, WyStrip};
use crate::tilemat::TileMatrix;

/// Auxiliary results of a QR plan: per tile coordinate, the accumulation
/// strip, plus a copy of the diagonal reflector tile so row updates never
/// touch the diagonal tile the coupled chain keeps rewriting.
#[derive(Debug, Clone)]
pub struct QrAux {
    p: usize,
    q: usize,
    entries: Vec<Option<QrAuxEntry>>,
}

#[derive(Debug, Clone)]
pub struct QrAuxEntry {
    pub t: WyStrip,
    /// Reflector tile copy; populated only for diagonal entries.
    pub v_diag: Option<Box<[f64]>>,
}

/// Auxiliary results of an LU plan: pivots everywhere, plus either a copy of
/// the diagonal unit-lower factor (diagonal entries) or the coupled factor's
/// unit-lower strip (subdiagonal entries).
#[derive(Debug, Clone)]
pub struct LuAux {
    p: usize,
    q: usize,
    entries: Vec<Option<LuAuxEntry>>,
}

#[derive(Debug, Clone)]
pub struct LuAuxEntry {
    pub pivots: PivotVector,
    pub factor: LuAuxFactor,
}

#[derive(Debug, Clone)]
pub enum LuAuxFactor {
    /// Unit-lower factor of a diagonal tile (strict lower stored, unit
    /// diagonal implicit), copied out of the tile.
    DiagCopy(Box<[f64]>),
    /// Unit-lower blocks of a coupled factorization.
    Strip(LStrip),
}

macro_rules! aux_grid_impl {
    ($ty:ident, $entry:ident) => {
        impl $ty {
            pub fn new(p: usize, q: usize) -> Self {
                $ty { p, q, entries: (0..p * q).map(|_| None).collect() }
            }

            #[inline]
            fn slot(&self, i: usize, j: usize) -> usize {
                debug_assert!(i < self.p && j < self.q, "aux index out of range");
                j * self.p + i
            }

            pub fn get(&self, i: usize, j: usize) -> Option<&$entry> {
                self.entries[self.slot(i, j)].as_ref()
            }

            pub fn set(&mut self, i: usize, j: usize, entry: $entry) {
                let slot = self.slot(i, j);
                self.entries[slot] = Some(entry);
            }

            pub fn populated(&self) -> usize {
                self.entries.iter().filter(|e| e.is_some()).count()
            }
        }
    };
}

aux_grid_impl!(QrAux, QrAuxEntry);
aux_grid_impl!(LuAux, LuAuxEntry);

/// Auxiliary storage for one factorization run.
#[derive(Debug, Clone)]
pub enum FactorAux {
    Cholesky,
    Qr(QrAux),
    Lu(LuAux),
}

impl FactorAux {
    /// Empty auxiliary storage sized for a plan.
    pub fn for_plan(plan: &FactorPlan) -> Self {
        match plan.kind {
            FactorKind::Cholesky => FactorAux::Cholesky,
            FactorKind::Qr => FactorAux::Qr(QrAux::new(plan.p, plan.q)),
            FactorKind::Lu => FactorAux::Lu(LuAux::new(plan.p, plan.q)),
        }
    }

    pub fn qr(&self) -> Option<&QrAux> {
        match self {
            FactorAux::Qr(a) => Some(a),
            _ => None,
        }
    }

    pub fn lu(&self) -> Option<&LuAux> {
        match self {
            FactorAux::Lu(a) => Some(a),
            _ => None,
        }
    }
}

/// Raw per-tile pointers shared with worker threads. The dependency graph
/// guarantees a written tile has no concurrent reader or writer, so handing
/// out disjoint slices through these pointers is sound.
pub(crate) struct TilePtrs {
    ptrs: Vec<*mut f64>,
    tile_len: usize,
    p: usize,
}

unsafe impl Send for TilePtrs {}
unsafe impl Sync for TilePtrs {}

impl TilePtrs {
    pub(crate) fn new(m: &mut TileMatrix) -> Self {
        let p = m.p;
        let tile_len = m.b * m.b;
        let ptrs = m.raw_tiles().iter_mut().map(|t| t.as_mut_ptr()).collect();
        TilePtrs { ptrs, tile_len, p }
    }

    /// # Safety
    /// No other live reference to tile `(i, j)` may exist; the dependency
    /// graph is what guarantees it, so the lifetime is intentionally
    /// detached from `&self`.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn tile_mut(&self, i: usize, j: usize) -> &mut [f64] {
        unsafe { std::slice::from_raw_parts_mut(self.ptrs[j * self.p + i], self.tile_len) }
    }

    /// # Safety
    /// No live mutable reference to tile `(i, j)` may exist.
    #[inline]
    pub(crate) unsafe fn tile(&self, i: usize, j: usize) -> &[f64] {
        unsafe { std::slice::from_raw_parts(self.ptrs[j * self.p + i], self.tile_len) }
    }
}

/// Raw pointers into the auxiliary grids, same discipline as [`TilePtrs`]:
/// each slot has exactly one writing task, and readers are ordered after it
/// by the dependency graph.
pub(crate) enum AuxPtrs {
    Cholesky,
    Qr { entries: *mut Option<QrAuxEntry>, p: usize },
    Lu { entries: *mut Option<LuAuxEntry>, p: usize },
}

unsafe impl Send for AuxPtrs {}
unsafe impl Sync for AuxPtrs {}

impl AuxPtrs {
    pub(crate) fn new(aux: &mut FactorAux) -> Self {
        match aux {
            FactorAux::Cholesky => AuxPtrs::Cholesky,
            FactorAux::Qr(a) => AuxPtrs::Qr { entries: a.entries.as_mut_ptr(), p: a.p },
            FactorAux::Lu(a) => AuxPtrs::Lu { entries: a.entries.as_mut_ptr(), p: a.p },
        }
    }

    unsafe fn qr_slot(&self, i: usize, j: usize) -> *mut Option<QrAuxEntry> {
        match self {
            AuxPtrs::Qr { entries, p } => unsafe { entries.add(j * p + i) },
            _ => panic!("QR auxiliary storage expected"),
        }
    }

    unsafe fn lu_slot(&self, i: usize, j: usize) -> *mut Option<LuAuxEntry> {
        match self {
            AuxPtrs::Lu { entries, p } => unsafe { entries.add(j * p + i) },
            _ => panic!("LU auxiliary storage expected"),
        }
    }
}

/// Runs one task against the shared tile and auxiliary storage.
///
/// # Safety
/// The caller must guarantee exclusive access to the task's write set and
/// absence of concurrent writers on its read set; the scheduler's dependency
/// tracking provides exactly that.
pub(crate) unsafe fn run_task(
    task: &Task,
    b: usize,
    s: usize,
    tiles: &TilePtrs,
    aux: &AuxPtrs,
) -> Result<(), kernels::KernelError> {
    let (k, i, j) = (task.k, task.i, task.j);
    unsafe {
        match task.kind {
            KernelKind::Potf2 => kernels::potf2(tiles.tile_mut(k, k), b),
            KernelKind::Trsm => kernels::trsm(tiles.tile(k, k), tiles.tile_mut(i, k), b),
            KernelKind::Gsmm => {
                let l_ik = tiles.tile(i, k);
                let l_jk = tiles.tile(j, k);
                kernels::gsmm(l_ik, l_jk, tiles.tile_mut(i, j), b, i == j);
                Ok(())
            }
            KernelKind::Geqrt => {
                let a = tiles.tile_mut(k, k);
                let t = kernels::geqrt(a, b, s);
                let v_diag = Some(a.to_vec().into_boxed_slice());
                *aux.qr_slot(k, k) = Some(QrAuxEntry { t, v_diag });
                Ok(())
            }
            KernelKind::Larfb => {
                let entry = (*aux.qr_slot(k, k)).as_ref().expect("diagonal factor ready");
                let v = entry.v_diag.as_deref().expect("diagonal reflector copy");
                kernels::larfb(tiles.tile_mut(k, j), v, &entry.t, b);
                Ok(())
            }
            KernelKind::Tsqrt => {
                let t = kernels::tsqrt(tiles.tile_mut(k, k), tiles.tile_mut(i, k), b, s);
                *aux.qr_slot(i, k) = Some(QrAuxEntry { t, v_diag: None });
                Ok(())
            }
            KernelKind::Ssrfb => {
                let entry = (*aux.qr_slot(i, k)).as_ref().expect("coupled factor ready");
                kernels::ssrfb(
                    tiles.tile_mut(k, j),
                    tiles.tile_mut(i, j),
                    tiles.tile(i, k),
                    &entry.t,
                    b,
                );
                Ok(())
            }
            KernelKind::Getrf => {
                let a = tiles.tile_mut(k, k);
                let pivots = kernels::getrf(a, b, s)?;
                let factor = LuAuxFactor::DiagCopy(a.to_vec().into_boxed_slice());
                *aux.lu_slot(k, k) = Some(LuAuxEntry { pivots, factor });
                Ok(())
            }
            KernelKind::Gessm => {
                let entry = (*aux.lu_slot(k, k)).as_ref().expect("diagonal factor ready");
                let l = match &entry.factor {
                    LuAuxFactor::DiagCopy(l) => l,
                    LuAuxFactor::Strip(_) => unreachable!("diagonal entry holds a copy"),
                };
                kernels::gessm(tiles.tile_mut(k, j), l, &entry.pivots, b);
                Ok(())
            }
            KernelKind::Tstrf => {
                let (pivots, strip) =
                    kernels::tstrf(tiles.tile_mut(k, k), tiles.tile_mut(i, k), b, s)?;
                *aux.lu_slot(i, k) = Some(LuAuxEntry { pivots, factor: LuAuxFactor::Strip(strip) });
                Ok(())
            }
            KernelKind::Ssssm => {
                let entry = (*aux.lu_slot(i, k)).as_ref().expect("coupled factor ready");
                let strip = match &entry.factor {
                    LuAuxFactor::Strip(s) => s,
                    LuAuxFactor::DiagCopy(_) => unreachable!("subdiagonal entry holds a strip"),
                };
                kernels::ssssm(
                    tiles.tile_mut(k, j),
                    tiles.tile_mut(i, j),
                    tiles.tile(i, k),
                    strip,
                    &entry.pivots,
                    b,
                );
                Ok(())
            }
        }
    }
}

fn check_shapes(plan: &FactorPlan, a: &TileMatrix) -> Result<(), FactorError> {
    if a.p != plan.p || a.q != plan.q || a.b != plan.b {
        return Err(FactorError::Shape {
            detail: format!(
                "plan is {}x{} tiles of {}, matrix is {}x{} tiles of {}",
                plan.p, plan.q, plan.b, a.p, a.q, a.b
            ),
        });
    }
    Ok(())
}

/// Executes a plan's tasks in program order, overwriting the tiles with the
/// factors and populating the auxiliary storage.
pub fn execute_sequential(
    plan: &FactorPlan,
    a: &mut TileMatrix,
    aux: &mut FactorAux,
) -> Result<(), FactorError> {
    let order: Vec<usize> = (0..plan.len()).collect();
    execute_in_order(plan, &order, a, aux)
}

/// Replays a plan's tasks in an arbitrary topological order. Any valid order
/// produces bitwise-identical tiles: per-tile update chains pin the
/// floating-point accumulation order.
pub fn execute_in_order(
    plan: &FactorPlan,
    order: &[usize],
    a: &mut TileMatrix,
    aux: &mut FactorAux,
) -> Result<(), FactorError> {
    check_shapes(plan, a)?;
    plan.check_topological(order)
        .map_err(|position| FactorError::BadOrder { position })?;
    let tiles = TilePtrs::new(a);
    let auxp = AuxPtrs::new(aux);
    for &idx in order {
        let task = &plan.tasks[idx];
        // Single-threaded: this call has exclusive access to everything.
        unsafe { run_task(task, plan.b, plan.s, &tiles, &auxp) }
            .map_err(|e| FactorError::task(task, e))?;
    }
    Ok(())
}
