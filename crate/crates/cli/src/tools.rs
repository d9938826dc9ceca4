//! `lanczos`, `bound` and `embed`: decomposition export, error-bound audit and diffusion maps.

use std::fmt::Write as _;

use lanczos_net::io::write_decomposition;
use lanczos_net::lanczos::{bound_theorem1, lowrank_error_sq, lowrank_reconstruct, LanczosOptions, StartVector};
use lanczos_net::spectral::{dense_eigensystem, diffusion_map};
use lanczos_net::{
    build_operator, lanczos_decompose, Error as CoreError, Graph, LanczosDecomposition, LaplacianKind, Matrix,
    SparseMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CliError, CliResult};

/// Largest size for which dense reconstruction errors and bounds are computed.
pub const DENSE_LIMIT: usize = 256;
/// Slack allowed between the observed error and the bound.
pub const BOUND_SLACK: f64 = 1e-9;

pub struct LanczosReport {
    pub decomposition: LanczosDecomposition,
    /// Serialized decomposition.
    pub file: String,
    pub report: String,
}

pub fn run_lanczos(s: &SparseMatrix, opts: &LanczosOptions) -> CliResult<LanczosReport> {
    let d = lanczos_decompose(s, opts)?;
    let n = s.dim();
    let mut r = String::new();
    writeln!(r, "nodes {n}").unwrap();
    writeln!(r, "requested_steps {}", opts.k).unwrap();
    writeln!(r, "steps_completed {}", d.steps_completed).unwrap();
    if opts.k > n {
        writeln!(
            r,
            "note: K = {} exceeds N = {n}; the Krylov dimension caps it at {n}",
            opts.k
        )
        .unwrap();
    }
    match (d.breakdown, d.steps_completed) {
        (true, k) => writeln!(r, "breakdown at step {k}").unwrap(),
        (false, _) => writeln!(r, "breakdown none").unwrap(),
    }
    match opts.start.seed() {
        Some(seed) => writeln!(r, "seed {seed}").unwrap(),
        None => writeln!(r, "seed none").unwrap(),
    }
    writeln!(r, "reorthogonalized {}", opts.reorthogonalize).unwrap();
    writeln!(r, "orthogonality_drift {:e}", d.orthogonality_drift()).unwrap();
    if n <= DENSE_LIMIT {
        let err = lowrank_reconstruct(&d).sub(&s.to_dense()).frobenius_norm();
        writeln!(r, "reconstruction_error {err:e}").unwrap();
    } else {
        writeln!(r, "reconstruction_error skipped (N > {DENSE_LIMIT})").unwrap();
    }
    let ritz: Vec<String> = d.ritz_values.iter().map(|x| format!("{x:e}")).collect();
    writeln!(r, "ritz_values {}", ritz.join(" ")).unwrap();
    Ok(LanczosReport {
        file: write_decomposition(&d),
        decomposition: d,
        report: r,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundRow {
    /// `tail` is `Σ_{i>j} λ_i²`, the best any rank-`j` approximation can do.
    Checked {
        trial: usize,
        j: usize,
        lhs: f64,
        bound: f64,
        tail: f64,
    },
    /// Every admissible `j` hit a degenerate spectrum.
    Skipped { trial: usize, lhs: f64, reason: String },
}

impl BoundRow {
    pub fn holds(&self) -> Option<bool> {
        match self {
            BoundRow::Checked { lhs, bound, .. } => Some(*lhs <= bound + BOUND_SLACK),
            BoundRow::Skipped { .. } => None,
        }
    }
}

pub struct BoundTable {
    pub rows: Vec<BoundRow>,
    pub report: String,
}

impl BoundTable {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.holds() == Some(false)).count()
    }
}

/// Random unit start vectors, one Lanczos run each, against the tightest bound over `j`.
pub fn run_bound(s: &Matrix, k: usize, trials: usize, seed: u64) -> CliResult<BoundTable> {
    let n = s.rows();
    if n > DENSE_LIMIT {
        return Err(CliError::Usage(format!("bound needs N <= {DENSE_LIMIT}, got {n}")));
    }
    if k == 0 {
        return Err(CliError::Usage("bound needs K >= 1".into()));
    }
    let sparse = SparseMatrix::from_dense(s);
    sparse.check_symmetric(1e-12)?;
    let lambda = dense_eigensystem(s)?.lambda;
    let tail = |j: usize| lambda[j..].iter().map(|l| l * l).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let opts = LanczosOptions::new(k)
            .reorthogonalized(true)
            .with_start(StartVector::Given(v.clone()));
        let d = lanczos_decompose(&sparse, &opts)?;
        let lhs = lowrank_error_sq(s, &d);
        let mut best: Option<(usize, f64)> = None;
        let mut reason = format!("no j with 1 < j < min(K, N) for K = {k}, N = {n}");
        for j in 2..k.min(n) {
            match bound_theorem1(s, &v, k, j) {
                Ok(b) if best.is_none_or(|(_, cur)| b < cur) => best = Some((j, b)),
                Ok(_) => {}
                Err(CoreError::DegenerateSpectrum(m)) => reason = m,
                Err(e) => return Err(e.into()),
            }
        }
        rows.push(match best {
            Some((j, bound)) => BoundRow::Checked {
                trial,
                j,
                lhs,
                bound,
                tail: tail(j),
            },
            None => BoundRow::Skipped { trial, lhs, reason },
        });
    }
    let mut report = String::from("trial j lhs bound tail holds\n");
    for row in &rows {
        match row {
            BoundRow::Checked {
                trial,
                j,
                lhs,
                bound,
                tail,
            } => writeln!(
                report,
                "{trial} {j} {lhs:e} {bound:e} {tail:e} {}",
                row.holds() == Some(true)
            )
            .unwrap(),
            BoundRow::Skipped { trial, lhs, reason } => {
                writeln!(report, "{trial} - {lhs:e} - - skipped ({reason})").unwrap()
            }
        }
    }
    let checked = rows.iter().filter(|r| r.holds().is_some()).count();
    let violations = rows.iter().filter(|r| r.holds() == Some(false)).count();
    writeln!(
        report,
        "checked {checked} skipped {} violations {violations}",
        rows.len() - checked
    )
    .unwrap();
    Ok(BoundTable { rows, report })
}

/// Diffusion-map coordinates, one CSV row per node.
pub fn run_embed(g: &Graph, t: u32, top: Option<usize>) -> CliResult<String> {
    let dm = diffusion_map(g, t, top)?;
    Ok(lanczos_net::io::write_matrix_csv(&dm.embedding))
}

/// Operator of `g` as a sparse matrix.
pub fn operator(g: &Graph, kind: LaplacianKind) -> CliResult<SparseMatrix> {
    Ok(build_operator(g, kind)?)
}
