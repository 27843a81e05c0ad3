use std::time::Instant;

use ndarray::Array1;

use super::{train_warm, SolverConfig, SolverTrace};
use crate::error::{Error, Result};
use crate::model::{CorrectedFeatureSet, GramCache, Hyperparams, ProblemView};

/// `count` ratios spaced evenly on a log scale from `hi` down to `lo`.
pub fn beta_ratio_grid(count: usize, hi: f64, lo: f64) -> Vec<f64> {
    assert!(count >= 1 && hi > 0.0 && lo > 0.0, "invalid grid");
    if count == 1 {
        return vec![hi];
    }
    let step = (lo / hi).ln() / (count - 1) as f64;
    (0..count)
        .map(|k| match k {
            0 => hi,
            k if k + 1 == count => lo,
            k => hi * (step * k as f64).exp(),
        })
        .collect()
}

/// Solution at one grid point.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub alpha: f64,
    pub beta: f64,
    /// Full-length weights, zero on the screened features.
    pub w: Array1<f64>,
    pub gap: f64,
    pub converged: bool,
    pub epochs: usize,
    pub screened: Vec<usize>,
    pub trace: SolverTrace,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PathResult {
    pub points: Vec<PathPoint>,
}

impl PathResult {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    pub fn total_epochs(&self) -> usize {
        self.points.iter().map(|p| p.epochs).sum()
    }

    pub fn elapsed_s(&self) -> f64 {
        self.points.iter().map(|p| p.elapsed_s).sum()
    }
}

/// Solves along `grid` (pairs `(alpha, beta)`, `beta` nonincreasing), each
/// solve warm-started from the previous solution and step estimate, with the
/// cached Gram columns shared along the way. The
/// screened set starts empty at every grid point.
pub fn train_path(
    data: &CorrectedFeatureSet,
    grid: &[(f64, f64)],
    config: &SolverConfig,
) -> Result<PathResult> {
    if grid.windows(2).any(|p| p[1].1 > p[0].1) {
        return Err(Error::Config("grid betas must be nonincreasing".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut warm = Array1::zeros(data.n_features());
    let mut lipschitz = None;
    let mut gram = GramCache::new();
    for &(alpha, beta) in grid {
        let view = ProblemView::new(data, Hyperparams::new(alpha, beta)?);
        let w0 = view.restrict_full(&warm);
        let tic = Instant::now();
        let out;
        (out, gram) = train_warm(view, config, w0, lipschitz, gram)?;
        let elapsed_s = tic.elapsed().as_secs_f64();
        warm = out.w.clone();
        lipschitz = Some(out.lipschitz);
        points.push(PathPoint {
            alpha,
            beta,
            w: out.w,
            gap: out.gap,
            converged: out.converged,
            epochs: out.epochs,
            screened: out.active.screened().to_vec(),
            trace: out.trace,
            elapsed_s,
        });
    }
    Ok(PathResult { points })
}

/// Cold-started counterpart of [`train_path`], used for comparisons.
#[cfg(test)]
fn train_path_cold(
    data: &CorrectedFeatureSet,
    grid: &[(f64, f64)],
    config: &SolverConfig,
) -> Result<usize> {
    use super::train;
    use crate::model::PrimalVector;
    let mut epochs = 0;
    for &(alpha, beta) in grid {
        let view = ProblemView::new(data, Hyperparams::new(alpha, beta)?);
        let w0 = PrimalVector::zeros(data.n_features());
        epochs += train(view, config, w0)?.epochs;
    }
    Ok(epochs)
}
