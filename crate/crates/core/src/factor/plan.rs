//! Task plans: the loop nests of the three tiled factorizations flattened
//! into task lists, with dependency edges derived from per-location access
//! order.

use super::FactorKind;
use crate::kernels::{kernel_flops, KernelKind};
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

/// A storage location a task reads or writes: a matrix tile or the auxiliary
/// slot (accumulation strip, pivots, diagonal-factor copy) attached to a
/// tile coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Loc {
    Tile { i: usize, j: usize },
    Aux { i: usize, j: usize },
}

/// One kernel invocation inside a factorization.
///
/// `(kind, k, i, j)` uniquely identifies a task within a plan; `k` is the
/// outer step, `i`/`j` the tile row/column the kernel targets (factor tasks
/// on the diagonal use `i = j = k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub kind: KernelKind,
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub reads: Vec<Loc>,
    pub writes: Vec<Loc>,
    /// Scheduling rank: factor kernels above coupled factorizations above
    /// row updates above coupled updates.
    pub priority: u8,
}

/// Default scheduling rank for a kernel kind.
pub(crate) fn default_rank(kind: KernelKind) -> u8 {
    match kind {
        KernelKind::Potf2 | KernelKind::Geqrt | KernelKind::Getrf => 3,
        KernelKind::Trsm | KernelKind::Tsqrt | KernelKind::Tstrf => 2,
        KernelKind::Larfb | KernelKind::Gessm => 1,
        KernelKind::Gsmm | KernelKind::Ssrfb | KernelKind::Ssssm => 0,
    }
}

impl Task {
    fn new(kind: KernelKind, k: usize, i: usize, j: usize, reads: Vec<Loc>, writes: Vec<Loc>) -> Self {
        Task { kind, k, i, j, reads, writes, priority: default_rank(kind) }
    }

    /// Model flop count of this task. Unlike the per-kind model this knows a
    /// diagonal trailing update does half the work of a square one.
    pub fn model_flops(&self, b: usize, s: usize) -> f64 {
        if self.kind == KernelKind::Gsmm && self.i == self.j {
            let bf = b as f64;
            bf * bf * bf
        } else {
            kernel_flops(self.kind, b, s)
        }
    }
}

/// An ordered task list in algorithm loop order plus the derived dependency
/// edges. Edges run from each task to its immediate successors: a task
/// depends on the last writer of everything it touches and on the readers a
/// write would overtake. The graph is acyclic by construction and replaying
/// the tasks in any topological order gives bitwise-identical results.
#[derive(Debug, Clone)]
pub struct FactorPlan {
    pub kind: FactorKind,
    pub p: usize,
    pub q: usize,
    pub b: usize,
    pub s: usize,
    pub tasks: Vec<Task>,
    /// Immediate dependency edges `(src, dst)` over task indices, in task
    /// order of `dst`.
    pub edges: Vec<(usize, usize)>,
}

impl FactorPlan {
    fn finish(kind: FactorKind, p: usize, q: usize, b: usize, s: usize, tasks: Vec<Task>) -> Self {
        let edges = derive_edges(&tasks);
        FactorPlan { kind, p, q, b, s, tasks, edges }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Successor adjacency lists over task indices.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.tasks.len()];
        for &(u, v) in &self.edges {
            succ[u].push(v);
        }
        succ
    }

    /// Number of immediate predecessors per task.
    pub fn predecessor_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.tasks.len()];
        for &(_, v) in &self.edges {
            counts[v] += 1;
        }
        counts
    }

    /// Checks that an index sequence is a topological permutation of the
    /// plan; returns the first offending position otherwise.
    pub fn check_topological(&self, order: &[usize]) -> Result<(), usize> {
        if order.len() != self.tasks.len() {
            return Err(order.len().min(self.tasks.len()));
        }
        let mut position = vec![usize::MAX; self.tasks.len()];
        for (pos, &t) in order.iter().enumerate() {
            if t >= self.tasks.len() || position[t] != usize::MAX {
                return Err(pos);
            }
            position[t] = pos;
        }
        for &(u, v) in &self.edges {
            if position[u] > position[v] {
                return Err(position[v]);
            }
        }
        Ok(())
    }

    /// Task count per kernel kind.
    pub fn count_kind(&self, kind: KernelKind) -> usize {
        self.tasks.iter().filter(|t| t.kind == kind).count()
    }

    /// Sum of the per-task model flop counts.
    pub fn model_flops(&self) -> f64 {
        self.tasks.iter().map(|t| t.model_flops(self.b, self.s)).sum()
    }

    /// Line-oriented text dump: one task per line (`kind k i j priority`,
    /// task ids are 0-based line positions), then one edge per line
    /// (`src_id -> dst_id`).
    pub fn dump_dag(&self) -> String {
        let mut out = String::new();
        for t in &self.tasks {
            writeln!(out, "{} {} {} {} {}", t.kind, t.k, t.i, t.j, t.priority).unwrap();
        }
        for &(u, v) in &self.edges {
            writeln!(out, "{u} -> {v}").unwrap();
        }
        out
    }

    /// Reachability matrix over task indices (for structural tests).
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.tasks.len();
        let succ = self.successors();
        let mut reach = vec![vec![false; n]; n];
        // tasks are topologically ordered as listed, so a reverse sweep
        // accumulates reachability in one pass
        for u in (0..n).rev() {
            for &v in &succ[u] {
                reach[u][v] = true;
                let (row_u, row_v) = {
                    // borrow two rows disjointly
                    let (a, b) = reach.split_at_mut(u.max(v));
                    if u < v {
                        (&mut a[u], &b[0])
                    } else {
                        unreachable!("edges go forward in task order")
                    }
                };
                for idx in 0..n {
                    if row_v[idx] {
                        row_u[idx] = true;
                    }
                }
            }
        }
        reach
    }
}

fn derive_edges(tasks: &[Task]) -> Vec<(usize, usize)> {
    let mut last_writer: HashMap<Loc, usize> = HashMap::new();
    let mut readers: HashMap<Loc, Vec<usize>> = HashMap::new();
    let mut edges = Vec::new();
    for (idx, task) in tasks.iter().enumerate() {
        let mut deps = BTreeSet::new();
        for loc in &task.reads {
            if let Some(&w) = last_writer.get(loc) {
                deps.insert(w);
            }
        }
        for loc in &task.writes {
            if let Some(&w) = last_writer.get(loc) {
                deps.insert(w);
            }
            if let Some(rs) = readers.get(loc) {
                deps.extend(rs.iter().copied());
            }
        }
        deps.remove(&idx);
        edges.extend(deps.into_iter().map(|u| (u, idx)));
        for loc in &task.reads {
            readers.entry(*loc).or_default().push(idx);
        }
        for loc in &task.writes {
            last_writer.insert(*loc, idx);
            readers.insert(*loc, Vec::new());
        }
    }
    edges
}

fn tile(i: usize, j: usize) -> Loc {
    Loc::Tile { i, j }
}

fn aux(i: usize, j: usize) -> Loc {
    Loc::Aux { i, j }
}

/// Task plan for the tiled Cholesky factorization of a `p x p` tile matrix.
///
/// Per step `k`: factor the diagonal tile, solve the `p-k-1` tiles below it,
/// then update the trailing triangle.
pub fn plan_cholesky(p: usize, b: usize) -> FactorPlan {
    assert!(p >= 1 && b >= 1);
    let mut tasks = Vec::new();
    for k in 0..p {
        tasks.push(Task::new(
            KernelKind::Potf2,
            k,
            k,
            k,
            vec![tile(k, k)],
            vec![tile(k, k)],
        ));
        for i in k + 1..p {
            tasks.push(Task::new(
                KernelKind::Trsm,
                k,
                i,
                k,
                vec![tile(k, k), tile(i, k)],
                vec![tile(i, k)],
            ));
        }
        for i in k + 1..p {
            for j in k + 1..=i {
                let mut reads = vec![tile(i, k), tile(i, j)];
                if j != i {
                    reads.insert(1, tile(j, k));
                }
                tasks.push(Task::new(KernelKind::Gsmm, k, i, j, reads, vec![tile(i, j)]));
            }
        }
    }
    FactorPlan::finish(FactorKind::Cholesky, p, p, b, b, tasks)
}

/// Task plan for the tiled QR factorization of a `p x q` tile matrix.
///
/// Per step `k`: factor the diagonal tile, apply it across the tile row,
/// then fold each tile below the diagonal into the triangle, updating the
/// trailing couple rows as the fold proceeds. The coupled factorizations of
/// one step chain on the diagonal tile in row order.
pub fn plan_qr(p: usize, q: usize, b: usize, s: usize) -> FactorPlan {
    assert!(p >= 1 && q >= 1 && b >= 1 && s >= 1 && b.is_multiple_of(s));
    let mut tasks = Vec::new();
    for k in 0..p.min(q) {
        tasks.push(Task::new(
            KernelKind::Geqrt,
            k,
            k,
            k,
            vec![tile(k, k)],
            vec![tile(k, k), aux(k, k)],
        ));
        for j in k + 1..q {
            tasks.push(Task::new(
                KernelKind::Larfb,
                k,
                k,
                j,
                vec![aux(k, k), tile(k, j)],
                vec![tile(k, j)],
            ));
        }
        for i in k + 1..p {
            tasks.push(Task::new(
                KernelKind::Tsqrt,
                k,
                i,
                k,
                vec![tile(k, k), tile(i, k)],
                vec![tile(k, k), tile(i, k), aux(i, k)],
            ));
            for j in k + 1..q {
                tasks.push(Task::new(
                    KernelKind::Ssrfb,
                    k,
                    i,
                    j,
                    vec![tile(i, k), aux(i, k), tile(k, j), tile(i, j)],
                    vec![tile(k, j), tile(i, j)],
                ));
            }
        }
    }
    FactorPlan::finish(FactorKind::Qr, p, q, b, s, tasks)
}

/// Task plan for the tiled LU factorization of a `p x q` tile matrix; same
/// loop nest as the QR plan with the LU kernel set.
pub fn plan_lu(p: usize, q: usize, b: usize, s: usize) -> FactorPlan {
    assert!(p >= 1 && q >= 1 && b >= 1 && s >= 1 && b.is_multiple_of(s));
    let mut tasks = Vec::new();
    for k in 0..p.min(q) {
        tasks.push(Task::new(
            KernelKind::Getrf,
            k,
            k,
            k,
            vec![tile(k, k)],
            vec![tile(k, k), aux(k, k)],
        ));
        for j in k + 1..q {
            tasks.push(Task::new(
                KernelKind::Gessm,
                k,
                k,
                j,
                vec![aux(k, k), tile(k, j)],
                vec![tile(k, j)],
            ));
        }
        for i in k + 1..p {
            tasks.push(Task::new(
                KernelKind::Tstrf,
                k,
                i,
                k,
                vec![tile(k, k), tile(i, k)],
                vec![tile(k, k), tile(i, k), aux(i, k)],
            ));
            for j in k + 1..q {
                tasks.push(Task::new(
                    KernelKind::Ssssm,
                    k,
                    i,
                    j,
                    vec![tile(i, k), aux(i, k), tile(k, j), tile(i, j)],
                    vec![tile(k, j), tile(i, j)],
                ));
            }
        }
    }
    FactorPlan::finish(FactorKind::Lu, p, q, b, s, tasks)
}
