//! Graph-driven asynchronous execution: a pool of self-scheduled workers
//! draining a shared progress table.
//!
//! Each worker repeatedly consults the table for a runnable task, claims it,
//! runs the kernel outside any lock, then posts the completion, which may
//! unlock successors and wake parked workers. Claims and completions are
//! linearized by the table lock and stamped with a logical tick, so traces
//! can be replayed and checked exactly. Results are bitwise independent of
//! the schedule: the per-tile dependency chains fix the floating-point
//! accumulation order no matter which worker runs what when.

use crate::factor::{run_task, AuxPtrs, FactorAux, FactorError, FactorPlan, Loc, TilePtrs};
use crate::kernels::KernelKind;
use crate::tilemat::TileMatrix;
use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::{Condvar, Mutex};
use std::time::Instant;

fn kind_slot(kind: KernelKind) -> usize {
    match kind {
        KernelKind::Potf2 => 0,
        KernelKind::Trsm => 1,
        KernelKind::Gsmm => 2,
        KernelKind::Geqrt => 3,
        KernelKind::Larfb => 4,
        KernelKind::Tsqrt => 5,
        KernelKind::Ssrfb => 6,
        KernelKind::Getrf => 7,
        KernelKind::Gessm => 8,
        KernelKind::Tstrf => 9,
        KernelKind::Ssssm => 10,
    }
}

const ALL_KINDS: [KernelKind; 11] = [
    KernelKind::Potf2,
    KernelKind::Trsm,
    KernelKind::Gsmm,
    KernelKind::Geqrt,
    KernelKind::Larfb,
    KernelKind::Tsqrt,
    KernelKind::Ssrfb,
    KernelKind::Getrf,
    KernelKind::Gessm,
    KernelKind::Tstrf,
    KernelKind::Ssssm,
];

/// Scheduling ranks per kernel kind; higher runs first. The default puts
/// the diagonal factor kernels highest, then the coupled factorizations,
/// then row updates, then coupled updates: favoring the tasks with the most
/// successors keeps the ready set large.
#[derive(Debug, Clone)]
pub struct PriorityPolicy {
    ranks: [u8; 11],
}

impl Default for PriorityPolicy {
    fn default() -> Self {
        let mut ranks = [0u8; 11];
        for kind in ALL_KINDS {
            ranks[kind_slot(kind)] = crate::factor::default_rank(kind);
        }
        PriorityPolicy { ranks }
    }
}

impl PriorityPolicy {
    #[inline]
    pub fn rank(&self, kind: KernelKind) -> u8 {
        self.ranks[kind_slot(kind)]
    }

    pub fn with_rank(mut self, kind: KernelKind, rank: u8) -> Self {
        assert!(rank <= 3, "ranks range over 0..=3");
        self.ranks[kind_slot(kind)] = rank;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskState {
    Pending,
    Ready,
    Claimed,
    Done,
}

/// Shared scheduling state: per-task remaining-predecessor counters, task
/// states, per-rank ready lists, and the per-location completion frontier.
/// This is the implicit form of the dependency graph the workers consult;
/// the explicit edge list exists only for planning and validation.
#[derive(Debug)]
pub struct ProgressTable {
    rank: Vec<u8>,
    remaining: Vec<u32>,
    state: Vec<TaskState>,
    ready: [Vec<usize>; 4],
    completed: usize,
    /// Last completed writer per location; the step recorded for a location
    /// never decreases.
    frontier: HashMap<Loc, usize>,
}

impl ProgressTable {
    pub fn new(plan: &FactorPlan, policy: &PriorityPolicy) -> Self {
        let rank: Vec<u8> = plan.tasks.iter().map(|t| policy.rank(t.kind)).collect();
        let remaining = plan.predecessor_counts();
        let mut state = vec![TaskState::Pending; plan.len()];
        let mut ready: [Vec<usize>; 4] = Default::default();
        for (idx, &r) in remaining.iter().enumerate() {
            if r == 0 {
                state[idx] = TaskState::Ready;
                ready[rank[idx] as usize].push(idx);
            }
        }
        ProgressTable { rank, remaining, state, ready, completed: 0, frontier: HashMap::new() }
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn is_complete(&self, plan: &FactorPlan) -> bool {
        self.completed == plan.len()
    }

    /// Step and kind of the last completed task that wrote `loc`.
    pub fn completed_step(&self, plan: &FactorPlan, loc: Loc) -> Option<(usize, KernelKind)> {
        self.frontier
            .get(&loc)
            .map(|&idx| (plan.tasks[idx].k, plan.tasks[idx].kind))
    }

    /// Claims the best ready task: highest rank, most recently unlocked
    /// within a rank.
    fn pop_best(&mut self) -> Option<usize> {
        for rank in (0..4usize).rev() {
            if let Some(idx) = self.ready[rank].pop() {
                self.state[idx] = TaskState::Claimed;
                return Some(idx);
            }
        }
        None
    }

    /// Posts a completion: marks the task done, advances the per-location
    /// frontier, and unlocks successors. Accepts ready (unclaimed) tasks too
    /// so single-threaded table walks can drive it directly. Returns the
    /// newly ready tasks.
    pub fn mark_done(&mut self, plan: &FactorPlan, succ: &[Vec<usize>], task: usize) -> Vec<usize> {
        match self.state[task] {
            TaskState::Ready => {
                self.ready[self.rank[task] as usize].retain(|&t| t != task);
            }
            TaskState::Claimed => {}
            other => panic!("task {task} cannot complete from state {other:?}"),
        }
        self.state[task] = TaskState::Done;
        self.completed += 1;
        for loc in &plan.tasks[task].writes {
            if let Some(prev) = self.frontier.insert(*loc, task) {
                debug_assert!(
                    plan.tasks[prev].k <= plan.tasks[task].k,
                    "completion frontier moved backwards"
                );
            }
        }
        let mut unlocked = Vec::new();
        for &v in &succ[task] {
            self.remaining[v] -= 1;
            if self.remaining[v] == 0 {
                self.state[v] = TaskState::Ready;
                self.ready[self.rank[v] as usize].push(v);
                unlocked.push(v);
            }
        }
        unlocked
    }
}

/// The tasks currently runnable: dependencies complete, not yet claimed.
pub fn ready_tasks(table: &ProgressTable, _plan: &FactorPlan) -> Vec<usize> {
    let mut out: Vec<usize> = table
        .state
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == TaskState::Ready)
        .map(|(idx, _)| idx)
        .collect();
    out.sort_unstable();
    out
}

/// Deterministic choice among ready tasks: maximal policy rank, ties broken
/// by smallest `(k, i, j)`.
pub fn pick_task(ready: &[usize], plan: &FactorPlan, policy: &PriorityPolicy) -> Option<usize> {
    ready.iter().copied().min_by_key(|&idx| {
        let t = &plan.tasks[idx];
        (std::cmp::Reverse(policy.rank(t.kind)), t.k, t.i, t.j)
    })
}

/// One executed task in a trace: who ran it and when. Ticks are logical
/// timestamps linearized by the scheduler lock (every claim and completion
/// gets a fresh tick); nanoseconds come from one monotonic clock anchored at
/// the start of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpan {
    pub task: usize,
    pub worker: usize,
    pub start_tick: u64,
    pub end_tick: u64,
    pub start_ns: u64,
    pub end_ns: u64,
}

/// Execution record of one parallel run.
#[derive(Debug, Clone)]
pub struct ExecutionTrace {
    pub nthreads: usize,
    pub spans: Vec<TaskSpan>,
}

impl ExecutionTrace {
    /// Spans of one worker, ordered by start tick.
    pub fn worker_spans(&self, worker: usize) -> Vec<TaskSpan> {
        let mut spans: Vec<TaskSpan> =
            self.spans.iter().copied().filter(|s| s.worker == worker).collect();
        spans.sort_by_key(|s| s.start_tick);
        spans
    }

    /// Wall-clock extent of the run in nanoseconds.
    pub fn makespan_ns(&self) -> u64 {
        let start = self.spans.iter().map(|s| s.start_ns).min().unwrap_or(0);
        let end = self.spans.iter().map(|s| s.end_ns).max().unwrap_or(0);
        end.saturating_sub(start)
    }

    /// Total busy nanoseconds across workers.
    pub fn busy_ns(&self) -> u64 {
        self.spans.iter().map(|s| s.end_ns - s.start_ns).sum()
    }

    /// CSV export: `worker,task_kind,k,i,j,start_ns,end_ns`, one row per
    /// task in start order.
    pub fn to_csv(&self, plan: &FactorPlan) -> String {
        let mut rows = self.spans.clone();
        rows.sort_by_key(|s| s.start_tick);
        let mut out = String::from("worker,task_kind,k,i,j,start_ns,end_ns\n");
        for s in rows {
            let t = &plan.tasks[s.task];
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.worker, t.kind, t.k, t.i, t.j, s.start_ns, s.end_ns
            )
            .unwrap();
        }
        out
    }
}

/// A trace inconsistency found by [`validate_trace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    MissingTask { task: usize },
    DuplicateTask { task: usize },
    WorkerOverlap { worker: usize, first: usize, second: usize },
    DependencyViolation { pred: usize, succ: usize },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::MissingTask { task } => write!(f, "task {task} never ran"),
            TraceViolation::DuplicateTask { task } => write!(f, "task {task} ran twice"),
            TraceViolation::WorkerOverlap { worker, first, second } => {
                write!(f, "worker {worker} overlapped tasks {first} and {second}")
            }
            TraceViolation::DependencyViolation { pred, succ } => {
                write!(f, "task {succ} started before its predecessor {pred} ended")
            }
        }
    }
}

impl std::error::Error for TraceViolation {}

/// Checks a trace against a plan: every task ran exactly once, spans on one
/// worker do not overlap, and every task started strictly after all of its
/// predecessors ended. Returns the first violation found.
pub fn validate_trace(trace: &ExecutionTrace, plan: &FactorPlan) -> Result<(), TraceViolation> {
    let mut span_of: Vec<Option<&TaskSpan>> = vec![None; plan.len()];
    for s in &trace.spans {
        if s.task >= plan.len() || span_of[s.task].is_some() {
            return Err(TraceViolation::DuplicateTask { task: s.task });
        }
        span_of[s.task] = Some(s);
    }
    if let Some(task) = span_of.iter().position(|s| s.is_none()) {
        return Err(TraceViolation::MissingTask { task });
    }
    for worker in 0..trace.nthreads {
        let spans = trace.worker_spans(worker);
        for pair in spans.windows(2) {
            if pair[1].start_tick <= pair[0].end_tick {
                return Err(TraceViolation::WorkerOverlap {
                    worker,
                    first: pair[0].task,
                    second: pair[1].task,
                });
            }
        }
    }
    for &(u, v) in &plan.edges {
        let pu = span_of[u].unwrap();
        let pv = span_of[v].unwrap();
        if pu.end_tick >= pv.start_tick {
            return Err(TraceViolation::DependencyViolation { pred: u, succ: v });
        }
    }
    Ok(())
}

struct Sched {
    table: ProgressTable,
    tick: u64,
    canceled: bool,
    error: Option<(usize, FactorError)>,
}

struct Shared<'a> {
    sched: Mutex<Sched>,
    cv: Condvar,
    plan: &'a FactorPlan,
    succ: Vec<Vec<usize>>,
    tiles: TilePtrs,
    aux: AuxPtrs,
    clock: Instant,
}

/// Executes a plan on `nthreads` self-scheduled workers.
///
/// Output tiles and auxiliary data are bitwise identical to
/// [`crate::factor::execute_sequential`] regardless of thread count. On a
/// kernel failure, outstanding work is cancelled and the failure earliest in
/// task order is returned.
pub fn execute_parallel(
    plan: &FactorPlan,
    a: &mut TileMatrix,
    aux: &mut FactorAux,
    nthreads: usize,
    policy: &PriorityPolicy,
) -> Result<ExecutionTrace, FactorError> {
    assert!(nthreads >= 1, "worker pool needs at least one thread");
    if a.p != plan.p || a.q != plan.q || a.b != plan.b {
        return Err(FactorError::Shape {
            detail: format!(
                "plan is {}x{} tiles of {}, matrix is {}x{} tiles of {}",
                plan.p, plan.q, plan.b, a.p, a.q, a.b
            ),
        });
    }
    let shared = Shared {
        sched: Mutex::new(Sched {
            table: ProgressTable::new(plan, policy),
            tick: 0,
            canceled: false,
            error: None,
        }),
        cv: Condvar::new(),
        plan,
        succ: plan.successors(),
        tiles: TilePtrs::new(a),
        aux: AuxPtrs::new(aux),
        clock: Instant::now(),
    };

    let mut spans = Vec::with_capacity(plan.len());
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(nthreads);
        for worker in 0..nthreads {
            let shared = &shared;
            handles.push(scope.spawn(move || worker_loop(worker, shared)));
        }
        for handle in handles {
            spans.extend(handle.join().expect("worker panicked"));
        }
    });

    let sched = shared.sched.into_inner().unwrap();
    if let Some((_, err)) = sched.error {
        return Err(err);
    }
    debug_assert_eq!(sched.table.completed, plan.len());
    Ok(ExecutionTrace { nthreads, spans })
}

fn worker_loop(worker: usize, shared: &Shared<'_>) -> Vec<TaskSpan> {
    let mut spans = Vec::new();
    let ntasks = shared.plan.len();
    loop {
        // Claim phase: short spin, then park until a completion wakes us.
        let mut spins = 0u32;
        let claimed = {
            let mut g = shared.sched.lock().unwrap();
            loop {
                if g.canceled || g.table.completed == ntasks {
                    break None;
                }
                if let Some(t) = g.table.pop_best() {
                    g.tick += 1;
                    let start_tick = g.tick;
                    let start_ns = shared.clock.elapsed().as_nanos() as u64;
                    break Some((t, start_tick, start_ns));
                }
                if spins < 64 {
                    spins += 1;
                    drop(g);
                    std::hint::spin_loop();
                    g = shared.sched.lock().unwrap();
                } else {
                    g = shared.cv.wait(g).unwrap();
                }
            }
        };
        let Some((task, start_tick, start_ns)) = claimed else {
            return spans;
        };

        // The dependency graph gives this task exclusive access to its
        // write set; run the kernel without holding the lock.
        let result = unsafe {
            run_task(
                &shared.plan.tasks[task],
                shared.plan.b,
                shared.plan.s,
                &shared.tiles,
                &shared.aux,
            )
        };

        let mut g = shared.sched.lock().unwrap();
        g.tick += 1;
        let end_tick = g.tick;
        let end_ns = shared.clock.elapsed().as_nanos() as u64;
        spans.push(TaskSpan { task, worker, start_tick, end_tick, start_ns, end_ns });
        match result {
            Ok(()) => {
                let unlocked = g.table.mark_done(shared.plan, &shared.succ, task);
                let finished = g.table.completed == ntasks;
                drop(g);
                if !unlocked.is_empty() || finished {
                    shared.cv.notify_all();
                }
            }
            Err(e) => {
                g.canceled = true;
                let err = FactorError::task(&shared.plan.tasks[task], e);
                match &g.error {
                    Some((prev, _)) if *prev <= task => {}
                    _ => g.error = Some((task, err)),
                }
                drop(g);
                shared.cv.notify_all();
            }
        }
    }
}
