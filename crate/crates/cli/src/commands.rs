//! Subcommand implementations.

use crate::config::{
    failure, peak_per_core, resolve_threads, usage, validate_shape, BenchArgs, CliError,
    DagArgs, FactorArgs, StabilityArgs,
};
use std::fs;
use std::path::Path;
use std::time::Instant;
use tilefact::factor::{
    lapack_equivalent_flops, plan_cholesky, plan_lu, plan_qr, total_flops, FactorAux, FactorKind,
    FactorPlan,
};
use tilefact::reference;
use tilefact::runtime::{execute_parallel, PriorityPolicy};
use tilefact::stability::{
    assemble_n, campaign_random, record_from_lu_run, ReportOptions,
    REPORT_CSV_HEADER,
};
use tilefact::stability::mtx::campaign_mtx;
use tilefact::tilemat::{gen_random, gen_spd, DenseMatrix, TileMatrix};

const EPS: f64 = f64::EPSILON;

fn build_plan(kind: FactorKind, p: usize, q: usize, b: usize, s: usize) -> FactorPlan {
    match kind {
        FactorKind::Cholesky => plan_cholesky(p, b),
        FactorKind::Qr => plan_qr(p, q, b, s),
        FactorKind::Lu => plan_lu(p, q, b, s),
    }
}

fn generate(kind: FactorKind, m: usize, n: usize, seed: u64) -> DenseMatrix {
    match kind {
        FactorKind::Cholesky => gen_spd(n, seed),
        _ => gen_random(m, n, seed),
    }
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| failure(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// FNV-1a over the factored matrix bytes in dense column-major order;
/// schedule-independent by construction.
fn output_hash(tiles: &TileMatrix) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for v in tiles.to_dense().values {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn cmd_factor(args: &FactorArgs) -> Result<(), CliError> {
    let n = args.n;
    let m = args.m.unwrap_or(n);
    let b = args.b;
    let s = args.s.unwrap_or(b);
    validate_shape(m, n, b, s)?;
    if args.kind == FactorKind::Cholesky && m != n {
        return Err(usage("cholesky needs a square matrix"));
    }
    let threads = resolve_threads(args.threads)?;
    let (p, q) = (m / b, n / b);
    let plan = build_plan(args.kind, p, q, b, s);
    let dense = generate(args.kind, m, n, args.seed);

    let conv_start = Instant::now();
    let mut tiles = TileMatrix::from_dense(&dense, b)
        .map_err(|e| usage(e.to_string()))?;
    let conv_s = conv_start.elapsed().as_secs_f64();

    let mut aux = FactorAux::for_plan(&plan);
    let start = Instant::now();
    let trace = execute_parallel(&plan, &mut tiles, &mut aux, threads, &PriorityPolicy::default())
        .map_err(|e| failure(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();

    let gflops = lapack_equivalent_flops(args.kind, m, n) / wall / 1e9;
    println!(
        "factor kind={} m={m} n={n} b={b} s={s} threads={threads} wall_s={wall:.6} gflops={gflops:.3}",
        args.kind
    );
    if args.layout_cost {
        println!("layout-conversion_s={conv_s:.6}");
    }
    if let Some(path) = &args.trace {
        fs::write(path, trace.to_csv(&plan))
            .map_err(|e| failure(format!("cannot write {}: {e}", path.display())))?;
    }

    if args.check {
        println!("output-hash: {:016x}", output_hash(&tiles));
        let ok = match args.kind {
            FactorKind::Cholesky => {
                let tol = 1e3 * n as f64 * EPS;
                let dense_f = tiles.to_dense();
                let l = DenseMatrix::from_fn(n, n, |r, c| if r >= c { dense_f.get(r, c) } else { 0.0 });
                let res = l.matmul(&l.transpose()).sub(&dense).inf_norm() / dense.inf_norm();
                println!("check residual={res:.3e} bound={tol:.3e}");
                res <= tol
            }
            FactorKind::Qr => {
                let tol = 1e3 * n.max(m) as f64 * EPS;
                let qmat = reference::tiled_q(&tiles, aux.qr().expect("qr auxiliary data"));
                let rmat = reference::upper_trapezoid(&tiles.to_dense());
                let res = qmat.matmul(&rmat).sub(&dense).inf_norm() / dense.inf_norm();
                let orth = qmat
                    .transpose()
                    .matmul(&qmat)
                    .sub(&DenseMatrix::identity(m))
                    .inf_norm();
                println!("check residual={res:.3e} orthogonality={orth:.3e} bound={tol:.3e}");
                res <= tol && orth <= tol
            }
            FactorKind::Lu => {
                if m != n {
                    return Err(usage("--check for lu needs a square matrix"));
                }
                let tol = 1e4 * n as f64 * EPS;
                let record = record_from_lu_run(&tiles, aux.lu().expect("lu auxiliary data"));
                if record.singular.is_some() {
                    return Err(failure("factorization is singular"));
                }
                let nf = assemble_n(&record);
                let res = nf.matmul(&record.u).sub(&dense).inf_norm() / dense.inf_norm();
                println!("check residual={res:.3e} bound={tol:.3e}");
                res <= tol
            }
        };
        if !ok {
            return Err(failure("check failed: residual above bound"));
        }
        println!("check: ok");
    }
    Ok(())
}

pub const BENCH_CSV_HEADER: &str =
    "kind,m,n,b,s,threads,rep,wall_s,model_flops,gflops,true_model_flops,status";

struct BenchRecord {
    kind: FactorKind,
    m: usize,
    n: usize,
    b: usize,
    s: usize,
    threads: usize,
    rep: usize,
    wall_s: f64,
    model_flops: f64,
    gflops: f64,
    true_model_flops: f64,
    status: &'static str,
}

impl BenchRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6e},{:.3},{:.6e},{}",
            self.kind,
            self.m,
            self.n,
            self.b,
            self.s,
            self.threads,
            self.rep,
            self.wall_s,
            self.model_flops,
            self.gflops,
            self.true_model_flops,
            self.status
        )
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let b = args.b;
    let s = args.s.unwrap_or(b);
    let threads_list: Vec<usize> = match (&args.threads_list, args.threads) {
        (Some(list), _) => list.0.clone(),
        (None, flag) => vec![resolve_threads(flag)?],
    };
    if threads_list.contains(&0) {
        return Err(usage("thread counts must be at least 1"));
    }

    // One cell per (n, threads): strong scaling sweeps sizes at fixed
    // threads, weak scaling derives the size from the worker count.
    let cells: Vec<(usize, usize)> = if args.weak {
        let nloc = args.nloc.ok_or_else(|| usage("--weak needs --nloc"))?;
        threads_list
            .iter()
            .map(|&t| {
                let target = (nloc as f64) * (t as f64).sqrt();
                let n = ((target / b as f64).ceil() as usize).max(1) * b;
                (n, t)
            })
            .collect()
    } else {
        let sizes: Vec<usize> = match (&args.n_list, args.n) {
            (Some(list), _) => list.0.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => return Err(usage("bench needs --n or --n-list")),
        };
        sizes
            .iter()
            .flat_map(|&n| threads_list.iter().map(move |&t| (n, t)))
            .collect()
    };

    let peak = peak_per_core();
    let policy = PriorityPolicy::default();
    let mut csv = String::from(BENCH_CSV_HEADER);
    csv.push('\n');
    let mut medians: Vec<(usize, usize, f64)> = Vec::new();
    for (cell_idx, &(n, threads)) in cells.iter().enumerate() {
        let m = args.m.unwrap_or(n);
        validate_shape(m, n, b, s)?;
        if args.kind == FactorKind::Cholesky && m != n {
            return Err(usage("cholesky needs square sizes"));
        }
        let plan = build_plan(args.kind, m / b, n / b, b, s);
        let dense = generate(args.kind, m, n, args.seed + cell_idx as u64);
        let template = TileMatrix::from_dense(&dense, b).map_err(|e| usage(e.to_string()))?;
        let model = lapack_equivalent_flops(args.kind, m, n);
        let true_model = total_flops(args.kind, m, n, b, s);

        let mut walls = Vec::with_capacity(args.reps);
        let mut cell_failed = false;
        // warmup rep excluded from the records
        for rep in 0..=args.reps {
            let mut tiles = template.clone();
            let mut aux = FactorAux::for_plan(&plan);
            let start = Instant::now();
            let result = execute_parallel(&plan, &mut tiles, &mut aux, threads, &policy);
            let wall = start.elapsed().as_secs_f64();
            if rep == 0 {
                if result.is_err() {
                    cell_failed = true;
                }
                continue;
            }
            let gflops = model / wall / 1e9;
            let status = if result.is_err() || cell_failed {
                cell_failed = true;
                "failed"
            } else if peak.is_some_and(|pk| gflops > pk * threads as f64) {
                "suspect-rate"
            } else {
                "ok"
            };
            walls.push(wall);
            csv.push_str(
                &BenchRecord {
                    kind: args.kind,
                    m,
                    n,
                    b,
                    s,
                    threads,
                    rep: rep - 1,
                    wall_s: wall,
                    model_flops: model,
                    gflops,
                    true_model_flops: true_model,
                    status,
                }
                .csv_row(),
            );
            csv.push('\n');
        }
        walls.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = walls[walls.len() / 2];
        medians.push((n, threads, median));
        println!(
            "bench kind={} m={m} n={n} b={b} s={s} threads={threads} reps={} median_wall_s={median:.6} gflops={:.3}{}",
            args.kind,
            args.reps,
            model / median / 1e9,
            if cell_failed { " status=failed" } else { "" }
        );
    }
    // More workers on the same problem should not run slower; flag
    // inversions, they are measurement noise or oversubscription.
    if !args.weak {
        for a in &medians {
            for b2 in &medians {
                if a.0 == b2.0 && b2.1 > a.1 && b2.2 > a.2 * 1.05 {
                    eprintln!(
                        "note: wall time inverted for n={}: {} threads took {:.6}s vs {:.6}s at {} threads",
                        a.0, b2.1, b2.2, a.2, a.1
                    );
                }
            }
        }
    }
    write_or_print(args.out.as_deref(), &csv)
}

pub fn cmd_stability(args: &StabilityArgs) -> Result<(), CliError> {
    match args.experiment.as_str() {
        "random" => {
            let n = args.n.ok_or_else(|| usage("random experiment needs --n"))?;
            let p_list = args
                .p_list
                .clone()
                .ok_or_else(|| usage("random experiment needs --p-list"))?
                .0;
            if args.sample == 0 {
                return Err(usage("--sample must be at least 1"));
            }
            for &p in &p_list {
                if p == 0 || n % p != 0 {
                    return Err(usage(format!("tile count {p} must divide the order {n}")));
                }
            }
            let rows = campaign_random(n, &p_list, args.sample, args.seed, &ReportOptions::default());
            let mut csv = String::from(REPORT_CSV_HEADER);
            csv.push('\n');
            for row in &rows {
                csv.push_str(&row.to_csv_row());
                csv.push('\n');
                eprintln!(
                    "p={:>3} b={:>5} mean be_fact={:.3e} be_soln={:.3e} ‖N‖={:.3e} ‖U‖={:.3e}",
                    row.p, row.b, row.mean_be_fact, row.mean_be_soln, row.mean_norm_n, row.mean_norm_u
                );
            }
            write_or_print(args.out.as_deref(), &csv)
        }
        "mtx" => {
            let dir = args.dir.as_deref().ok_or_else(|| usage("mtx experiment needs --dir"))?;
            if !dir.is_dir() {
                return Err(usage(format!("not a directory: {}", dir.display())));
            }
            if args.p == 0 {
                return Err(usage("--p must be at least 1"));
            }
            let campaign = campaign_mtx(dir, args.p, args.seed, &ReportOptions::default())
                .map_err(|e| failure(e.to_string()))?;
            for (name, reason) in &campaign.skipped {
                eprintln!("skipped {name}: {reason}");
            }
            for row in &campaign.rows {
                eprintln!(
                    "{}: n={} b={} ratio_fact={} ratio_soln={}{}",
                    row.name,
                    row.n,
                    row.b,
                    row.ratio_fact.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into()),
                    row.ratio_soln.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into()),
                    if row.flags().is_empty() { String::new() } else { format!(" [{}]", row.flags()) }
                );
            }
            let reports = campaign.reports_csv();
            let hist = campaign.histogram_csv();
            match &args.out {
                Some(path) => {
                    fs::write(path, reports)
                        .map_err(|e| failure(format!("cannot write {}: {e}", path.display())))?;
                    let mut hist_path = path.as_os_str().to_owned();
                    hist_path.push(".hist.csv");
                    fs::write(&hist_path, hist).map_err(|e| {
                        failure(format!("cannot write {}: {e}", Path::new(&hist_path).display()))
                    })?;
                    Ok(())
                }
                None => {
                    print!("{reports}");
                    println!("-- histogram --");
                    print!("{hist}");
                    Ok(())
                }
            }
        }
        other => Err(usage(format!("unknown experiment {other}; expected random or mtx"))),
    }
}

pub fn cmd_dag(args: &DagArgs) -> Result<(), CliError> {
    if args.p == 0 {
        return Err(usage("--p must be at least 1"));
    }
    let q = args.q.unwrap_or(args.p);
    if args.kind == FactorKind::Cholesky && q != args.p {
        return Err(usage("cholesky plans are square; --q must equal --p"));
    }
    let s = args.s.unwrap_or(args.b);
    if args.b == 0 || s == 0 || !args.b.is_multiple_of(s) {
        return Err(usage("inner block size must divide the tile size"));
    }
    let plan = build_plan(args.kind, args.p, q, args.b, s);
    write_or_print(args.out.as_deref(), &plan.dump_dag())
}
