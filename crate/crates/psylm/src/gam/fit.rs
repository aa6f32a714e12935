//! Penalized least-squares fitting with GCV smoothing-parameter selection.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::design::{AssembledDesign, BlockKind};

const RIDGE: f64 = 1e-10;
const LOG10_LAMBDA_MIN: f64 = -6.0;
const LOG10_LAMBDA_MAX: f64 = 6.0;
const SWEEP_TOL_LOG10: f64 = 1e-3;
const MAX_SWEEPS: usize = 50;
const GOLDEN_TOL_LOG10: f64 = 1e-4;

/// How smoothing parameters are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPolicy {
    /// Use this vector as-is; length must equal the number of smoothing
    /// parameters in the design.
    Fixed(Vec<f64>),
    /// Minimize GCV by cyclic golden-section search on log10 lambda.
    Gcv,
}

/// Per-term summary of a fitted block.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TermSummary {
    pub name: String,
    pub kind: BlockKind,
    pub n_columns: usize,
    pub lambdas: Vec<f64>,
    pub edf: f64,
}

/// A fitted penalized regression model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FittedGam {
    pub coefficients: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub loglik_ml: f64,
    pub edf: f64,
    pub rss: f64,
    pub n: usize,
    pub sigma2_ml: f64,
    pub gcv: f64,
    pub converged: bool,
    pub terms: Vec<TermSummary>,
    pub dropped: Vec<String>,
}

/// Gaussian ML log-likelihood at the ML variance estimate sigma2 = rss/n.
pub fn gaussian_loglik_ml(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    let sigma2 = rss / n;
    -(n / 2.0) * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

struct Solver {
    x: DMatrix<f64>,
    y: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    /// Penalty matrices embedded into the full coefficient space, one per
    /// smoothing parameter.
    penalties: Vec<DMatrix<f64>>,
    /// Diagonal indices the conditioning ridge applies to (everything
    /// outside the intercept column).
    ridge_cols: Vec<usize>,
    block_spans: Vec<(String, BlockKind, usize, usize, Vec<usize>)>,
}

struct Solution {
    beta: DVector<f64>,
    rss: f64,
    edf: f64,
    edf_diag: DVector<f64>,
    gcv: f64,
}

impl Solver {
    fn new(design: &AssembledDesign) -> Self {
        let n = design.response.len();
        let p = design.n_columns();
        let mut x = DMatrix::zeros(n, p);
        let mut penalties = vec![DMatrix::zeros(p, p); design.n_lambdas];
        let mut ridge_cols = Vec::new();
        let mut block_spans = Vec::new();
        let mut offset = 0;
        for block in &design.blocks {
            let w = block.columns.ncols();
            x.view_mut((0, offset), (n, w)).copy_from(&block.columns);
            let mut lambda_indices = Vec::new();
            for pen in &block.penalties {
                lambda_indices.push(pen.lambda_index);
                penalties[pen.lambda_index]
                    .view_mut((offset, offset), (w, w))
                    .copy_from(&pen.matrix);
            }
            if block.kind != BlockKind::Intercept {
                ridge_cols.extend(offset..offset + w);
            }
            block_spans.push((block.name.clone(), block.kind, offset, w, lambda_indices));
            offset += w;
        }
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &design.response;
        Solver {
            x,
            y: design.response.clone(),
            xtx,
            xty,
            penalties,
            ridge_cols,
            block_spans,
        }
    }

    fn solve(&self, lambdas: &[f64]) -> Result<Solution> {
        let mut a = self.xtx.clone();
        for (lambda, s) in lambdas.iter().zip(&self.penalties) {
            a += s * *lambda;
        }
        for &i in &self.ridge_cols {
            a[(i, i)] += RIDGE;
        }
        let chol = Cholesky::new(a).ok_or_else(|| {
            Error::Numerical("penalized normal equations are singular beyond ridge repair".into())
        })?;
        let beta = chol.solve(&self.xty);
        let residual = &self.y - &self.x * &beta;
        let rss = residual.dot(&residual);
        let hat_diag_source = chol.solve(&self.xtx);
        let edf_diag = DVector::from_iterator(
            self.xtx.nrows(),
            (0..self.xtx.nrows()).map(|i| hat_diag_source[(i, i)]),
        );
        let edf = edf_diag.sum();
        let n = self.y.len() as f64;
        let denom = n - edf;
        let gcv = if denom > 0.0 {
            n * rss / (denom * denom)
        } else {
            f64::INFINITY
        };
        Ok(Solution {
            beta,
            rss,
            edf,
            edf_diag,
            gcv,
        })
    }

    fn gcv_at(&self, log_lambdas: &[f64]) -> f64 {
        let lambdas: Vec<f64> = log_lambdas.iter().map(|l| 10f64.powf(*l)).collect();
        self.solve(&lambdas).map(|s| s.gcv).unwrap_or(f64::INFINITY)
    }

    /// Golden-section minimization of GCV in one coordinate.
    fn minimize_coordinate(&self, log_lambdas: &mut [f64], j: usize) {
        const PHI: f64 = 0.618_033_988_749_894_9;
        let mut lo = LOG10_LAMBDA_MIN;
        let mut hi = LOG10_LAMBDA_MAX;
        let eval = |v: f64, log_lambdas: &mut [f64]| {
            let old = log_lambdas[j];
            log_lambdas[j] = v;
            let g = self.gcv_at(log_lambdas);
            log_lambdas[j] = old;
            g
        };
        let mut c = hi - PHI * (hi - lo);
        let mut d = lo + PHI * (hi - lo);
        let mut fc = eval(c, log_lambdas);
        let mut fd = eval(d, log_lambdas);
        while hi - lo > GOLDEN_TOL_LOG10 {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - PHI * (hi - lo);
                fc = eval(c, log_lambdas);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + PHI * (hi - lo);
                fd = eval(d, log_lambdas);
            }
        }
        let mid = (lo + hi) / 2.0;
        // keep the endpoint value if the interior never improved on it
        let candidates = [mid, LOG10_LAMBDA_MIN, LOG10_LAMBDA_MAX, log_lambdas[j]];
        let best = candidates
            .iter()
            .cloned()
            .min_by(|a, b| {
                eval(*a, log_lambdas)
                    .partial_cmp(&eval(*b, log_lambdas))
                    .unwrap()
            })
            .unwrap();
        log_lambdas[j] = best;
    }
}

/// Fits the penalized model, selecting smoothing parameters per policy.
pub fn fit(design: &AssembledDesign, policy: &LambdaPolicy) -> Result<FittedGam> {
    let n = design.response.len();
    let p = design.n_columns();
    if p >= n {
        return Err(Error::Argument(format!(
            "design has {p} columns but only {n} rows"
        )));
    }
    let solver = Solver::new(design);

    let (lambdas, converged) = match policy {
        LambdaPolicy::Fixed(v) => {
            if v.len() != design.n_lambdas {
                return Err(Error::Argument(format!(
                    "expected {} smoothing parameters, got {}",
                    design.n_lambdas,
                    v.len()
                )));
            }
            if v.iter().any(|l| *l < 0.0 || !l.is_finite()) {
                return Err(Error::Argument(
                    "smoothing parameters must be finite and >= 0".into(),
                ));
            }
            (v.clone(), true)
        }
        LambdaPolicy::Gcv => {
            let mut log_lambdas = vec![0.0f64; design.n_lambdas];
            let mut converged = design.n_lambdas == 0;
            for _ in 0..MAX_SWEEPS {
                let mut max_move = 0.0f64;
                for j in 0..log_lambdas.len() {
                    let before = log_lambdas[j];
                    solver.minimize_coordinate(&mut log_lambdas, j);
                    max_move = max_move.max((log_lambdas[j] - before).abs());
                }
                if max_move <= SWEEP_TOL_LOG10 {
                    converged = true;
                    break;
                }
            }
            (
                log_lambdas.iter().map(|l| 10f64.powf(*l)).collect(),
                converged,
            )
        }
    };

    let solution = solver.solve(&lambdas)?;
    let terms = solver
        .block_spans
        .iter()
        .map(|(name, kind, offset, width, lambda_indices)| TermSummary {
            name: name.clone(),
            kind: *kind,
            n_columns: *width,
            lambdas: lambda_indices.iter().map(|&i| lambdas[i]).collect(),
            edf: solution.edf_diag.rows(*offset, *width).sum(),
        })
        .collect();

    let sigma2_ml = solution.rss / n as f64;
    Ok(FittedGam {
        coefficients: solution.beta.iter().cloned().collect(),
        lambdas,
        loglik_ml: gaussian_loglik_ml(solution.rss, n),
        edf: solution.edf,
        rss: solution.rss,
        n,
        sigma2_ml,
        gcv: solution.gcv,
        converged,
        terms,
        dropped: design.dropped.clone(),
    })
}

/// Log-likelihood gain of the surprisal model over the baseline.
pub fn delta_loglik(full: &FittedGam, baseline: &FittedGam) -> Result<f64> {
    if full.n != baseline.n {
        return Err(Error::Argument(format!(
            "models were fit on different row counts: {} vs {}",
            full.n, baseline.n
        )));
    }
    Ok(full.loglik_ml - baseline.loglik_ml)
}
