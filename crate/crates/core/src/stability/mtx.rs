//! Matrix Market reader (coordinate and array formats, real or integer
//! values, general or symmetric) and the file-driven stability campaign
//! comparing tiled pairwise pivoting against partial pivoting per matrix.

use super::{floor_eps, report, Method, ReportOptions, StabilityReport, REPORT_CSV_HEADER};
use crate::tilemat::DenseMatrix;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MtxError {
    Io(String),
    Parse { line: usize, msg: String },
    Unsupported(String),
    NotSquare { m: usize, n: usize },
}

impl fmt::Display for MtxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MtxError::Io(e) => write!(f, "io error: {e}"),
            MtxError::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            MtxError::Unsupported(what) => write!(f, "unsupported matrix: {what}"),
            MtxError::NotSquare { m, n } => write!(f, "matrix is {m}x{n}, not square"),
        }
    }
}

impl std::error::Error for MtxError {}

/// Reads a Matrix Market file into a dense matrix. Symmetric inputs are
/// expanded to full storage; pattern and complex fields are rejected.
pub fn read_mtx(path: &Path) -> Result<DenseMatrix, MtxError> {
    let text = fs::read_to_string(path).map_err(|e| MtxError::Io(e.to_string()))?;
    parse_mtx(&text)
}

pub fn parse_mtx(text: &str) -> Result<DenseMatrix, MtxError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(MtxError::Parse { line: 1, msg: "empty file".into() })?;
    let fields: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(MtxError::Parse { line: 1, msg: "missing MatrixMarket banner".into() });
    }
    let format = fields[2].as_str();
    let field = fields[3].as_str();
    let symmetry = fields[4].as_str();
    match field {
        "real" | "integer" => {}
        other => return Err(MtxError::Unsupported(format!("field type {other}"))),
    }
    let symmetric = match symmetry {
        "general" => false,
        "symmetric" => true,
        other => return Err(MtxError::Unsupported(format!("symmetry {other}"))),
    };

    let mut data = lines.filter(|(_, l)| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let (size_lineno, size_line) = data
        .next()
        .ok_or(MtxError::Parse { line: 2, msg: "missing size line".into() })?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| MtxError::Parse { line: size_lineno + 1, msg: format!("bad size token {t}") }))
        .collect::<Result<_, _>>()?;

    match format {
        "coordinate" => {
            if sizes.len() != 3 {
                return Err(MtxError::Parse {
                    line: size_lineno + 1,
                    msg: "coordinate size line needs rows cols nnz".into(),
                });
            }
            let (m, n, nnz) = (sizes[0], sizes[1], sizes[2]);
            let mut a = DenseMatrix::zeros(m, n);
            let mut seen = 0usize;
            for (lineno, line) in data {
                let mut toks = line.split_whitespace();
                let (i, j) = match (toks.next(), toks.next()) {
                    (Some(i), Some(j)) => (
                        i.parse::<usize>().map_err(|_| MtxError::Parse {
                            line: lineno + 1,
                            msg: format!("bad row index {i}"),
                        })?,
                        j.parse::<usize>().map_err(|_| MtxError::Parse {
                            line: lineno + 1,
                            msg: format!("bad column index {j}"),
                        })?,
                    ),
                    _ => {
                        return Err(MtxError::Parse { line: lineno + 1, msg: "short entry line".into() })
                    }
                };
                let v: f64 = toks
                    .next()
                    .ok_or(MtxError::Parse { line: lineno + 1, msg: "missing value".into() })?
                    .parse()
                    .map_err(|_| MtxError::Parse { line: lineno + 1, msg: "bad value".into() })?;
                if i < 1 || i > m || j < 1 || j > n {
                    return Err(MtxError::Parse {
                        line: lineno + 1,
                        msg: format!("index ({i},{j}) out of bounds"),
                    });
                }
                let (r, c) = (i - 1, j - 1);
                a.set(r, c, a.get(r, c) + v);
                if symmetric && r != c {
                    a.set(c, r, a.get(c, r) + v);
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(MtxError::Parse {
                    line: size_lineno + 1,
                    msg: format!("expected {nnz} entries, found {seen}"),
                });
            }
            Ok(a)
        }
        "array" => {
            if sizes.len() != 2 {
                return Err(MtxError::Parse {
                    line: size_lineno + 1,
                    msg: "array size line needs rows cols".into(),
                });
            }
            let (m, n) = (sizes[0], sizes[1]);
            let mut values = Vec::with_capacity(m * n);
            for (lineno, line) in data {
                for tok in line.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|_| MtxError::Parse {
                        line: lineno + 1,
                        msg: format!("bad value {tok}"),
                    })?;
                    values.push(v);
                }
            }
            let mut a = DenseMatrix::zeros(m, n);
            if symmetric {
                // column-major lower triangle, expanded to full
                let expected: usize = (0..n).map(|j| m - j).sum();
                if values.len() != expected {
                    return Err(MtxError::Parse {
                        line: size_lineno + 1,
                        msg: format!("expected {expected} packed values, found {}", values.len()),
                    });
                }
                let mut it = values.into_iter();
                for j in 0..n {
                    for i in j..m {
                        let v = it.next().unwrap();
                        a.set(i, j, v);
                        if i != j {
                            a.set(j, i, v);
                        }
                    }
                }
            } else {
                if values.len() != m * n {
                    return Err(MtxError::Parse {
                        line: size_lineno + 1,
                        msg: format!("expected {} values, found {}", m * n, values.len()),
                    });
                }
                a.values = values;
            }
            Ok(a)
        }
        other => Err(MtxError::Unsupported(format!("format {other}"))),
    }
}

/// Largest tile size `b` dividing `n` with at least `p_min` tiles per side.
pub fn tile_size_for(n: usize, p_min: usize) -> Option<usize> {
    if p_min == 0 || n < p_min {
        return None;
    }
    (1..=n / p_min).rev().find(|&b| n.is_multiple_of(b))
}

/// Per-matrix outcome of the file campaign.
#[derive(Debug, Clone)]
pub struct MtxRow {
    pub name: String,
    pub n: usize,
    pub b: usize,
    pub p: usize,
    pub wp: StabilityReport,
    pub pp: StabilityReport,
    /// Ratio of floored factorization backward errors (tiled over partial);
    /// absent when either factorization was singular or the factor error was
    /// not computed.
    pub ratio_fact: Option<f64>,
    /// Same for the solution backward errors.
    pub ratio_soln: Option<f64>,
}

impl MtxRow {
    pub fn flags(&self) -> &'static str {
        if self.wp.singular || self.pp.singular {
            "singular"
        } else {
            ""
        }
    }
}

/// Outcome of a directory campaign: one row per usable matrix, plus the
/// files skipped and why.
#[derive(Debug, Clone)]
pub struct MtxCampaign {
    pub rows: Vec<MtxRow>,
    pub skipped: Vec<(String, String)>,
}

/// Histogram bin edges: powers of ten from 1e-2 up to 1e8.
pub const HIST_DECADES: std::ops::Range<i32> = -2..9;

impl MtxCampaign {
    /// Per-matrix report CSV (both methods per matrix plus the ratios).
    pub fn reports_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push_str(",ratio_fact,ratio_soln\n");
        for row in &self.rows {
            for r in [&row.wp, &row.pp] {
                out.push_str(&super::report_csv_row(&row.name, r));
                match (r.method, row.ratio_fact, row.ratio_soln) {
                    (Method::Getwp, rf, rs) => {
                        out.push_str(&format!(
                            ",{},{}",
                            rf.map(|v| format!("{v:.6e}")).unwrap_or_default(),
                            rs.map(|v| format!("{v:.6e}")).unwrap_or_default()
                        ));
                    }
                    _ => out.push_str(",,"),
                }
                out.push('\n');
            }
        }
        out
    }

    /// Histogram CSV over decades of the two ratios: each bin counts ratios
    /// at or below its decade edge (and above the previous one); the last
    /// bin collects everything beyond the largest edge.
    pub fn histogram_csv(&self) -> String {
        let nbins = HIST_DECADES.len() + 1;
        let mut soln = vec![0usize; nbins];
        let mut fact = vec![0usize; nbins];
        let bin_of = |ratio: f64| -> usize {
            HIST_DECADES
                .clone()
                .position(|d| ratio <= 10f64.powi(d))
                .unwrap_or(nbins - 1)
        };
        for row in &self.rows {
            if let Some(r) = row.ratio_soln {
                soln[bin_of(r)] += 1;
            }
            if let Some(r) = row.ratio_fact {
                fact[bin_of(r)] += 1;
            }
        }
        let mut out = String::from("bin_upper,count_soln,count_fact\n");
        for (idx, d) in HIST_DECADES.clone().enumerate() {
            out.push_str(&format!("1e{},{},{}\n", d, soln[idx], fact[idx]));
        }
        out.push_str(&format!("inf,{},{}\n", soln[nbins - 1], fact[nbins - 1]));
        out
    }
}

/// Runs both methods over every `.mtx` file in a directory, keeping the tile
/// count per side at `p_min` or above via the largest dividing tile size.
/// Unreadable, non-square, unsupported, or too-small matrices are skipped
/// with a reason; singular matrices are flagged and excluded from ratios.
pub fn campaign_mtx(
    dir: &Path,
    p_min: usize,
    rhs_base_seed: u64,
    opts: &ReportOptions,
) -> Result<MtxCampaign, MtxError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| MtxError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("mtx"))
        .collect();
    files.sort();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (idx, path) in files.iter().enumerate() {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("unnamed")
            .to_string();
        let a = match read_mtx(path) {
            Ok(a) => a,
            Err(e) => {
                skipped.push((name, e.to_string()));
                continue;
            }
        };
        if a.m != a.n {
            skipped.push((name, MtxError::NotSquare { m: a.m, n: a.n }.to_string()));
            continue;
        }
        let Some(b) = tile_size_for(a.n, p_min) else {
            skipped.push((name, format!("order {} below the minimum tile count {p_min}", a.n)));
            continue;
        };
        let rhs_seed = rhs_base_seed + idx as u64;
        let wp = report(&a, Method::Getwp, b, rhs_seed, opts);
        let pp = report(&a, Method::Gepp, a.n, rhs_seed, opts);
        let ratio = |x: Option<f64>, y: Option<f64>| -> Option<f64> {
            match (x, y) {
                (Some(x), Some(y)) => Some(floor_eps(x) / floor_eps(y)),
                _ => None,
            }
        };
        let (ratio_fact, ratio_soln) = if wp.singular || pp.singular {
            (None, None)
        } else {
            (
                ratio(wp.backward_error_fact, pp.backward_error_fact),
                ratio(wp.backward_error_soln, pp.backward_error_soln),
            )
        };
        rows.push(MtxRow { name, n: a.n, b, p: a.n / b, wp, pp, ratio_fact, ratio_soln });
    }
    Ok(MtxCampaign { rows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_coordinate_general() {
        let text = "%%MatrixMarket matrix coordinate real general\n\
                    % a comment\n\
                    2 2 3\n\
                    1 1 2.0\n\
                    2 1 -1.5\n\
                    2 2 4.0\n";
        let a = parse_mtx(text).unwrap();
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 0), -1.5);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.get(1, 1), 4.0);
    }

    #[test]
    fn parses_coordinate_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n\
                    3 3 4\n\
                    1 1 1.0\n\
                    2 1 5.0\n\
                    3 3 2.0\n\
                    3 2 -3.0\n";
        let a = parse_mtx(text).unwrap();
        assert_eq!(a.get(0, 1), 5.0);
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(1, 2), -3.0);
        assert_eq!(a.get(2, 1), -3.0);
    }

    #[test]
    fn parses_array_formats() {
        let gen = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
        let a = parse_mtx(gen).unwrap();
        assert_eq!(a.values, vec![1.0, 2.0, 3.0, 4.0]);

        let sym = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n";
        let a = parse_mtx(sym).unwrap();
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 1), 3.0);
    }

    #[test]
    fn rejects_unsupported() {
        let pat = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n";
        assert!(matches!(parse_mtx(pat), Err(MtxError::Unsupported(_))));
        let cpx = "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 2.0\n";
        assert!(matches!(parse_mtx(cpx), Err(MtxError::Unsupported(_))));
        assert!(matches!(
            parse_mtx("not a banner\n1 1 1\n"),
            Err(MtxError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn tile_size_selection() {
        // largest divisor with at least 32 tiles per side
        assert_eq!(tile_size_for(64, 32), Some(2));
        assert_eq!(tile_size_for(96, 32), Some(3));
        assert_eq!(tile_size_for(48, 32), Some(1));
        assert_eq!(tile_size_for(2529, 32), Some(9)); // divisors of 2529 at or below 79: 1, 3, 9
        assert_eq!(tile_size_for(16, 32), None);
    }
}
