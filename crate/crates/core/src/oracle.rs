//! Brute-force checks used by the test suite and the `oracle` subcommand.
//!
//! Nothing here shares code with the closed-form screening score: the
//! geometric minimizer walks the boundary of the feasible disk numerically.

use std::f64::consts::{FRAC_PI_2, TAU};

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DualPoint, PrimalVector, ProblemView};
use crate::screening::{min_linear_ball_halfspace, ClosedFormCase, ClosedFormInput, Minimum};
use crate::solver::{train, SolverConfig};

/// Relative step of [`finite_difference_gradient`].
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Angular spacing of the initial grid, in radians.
    pub resolution: f64,
    pub refinement_passes: usize,
    /// How far outside the disk the half-space may sit before the problem
    /// counts as infeasible, relative to `max(r, 1)`.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            resolution: 1e-4,
            refinement_passes: 3,
            tolerance: 1e-12,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!("invalid oracle config {self:?}")));
        }
        Ok(())
    }
}

/// Minimizes `f` over `[lo, hi]` by a grid of spacing `cfg.resolution`
/// followed by golden-section passes on shrinking windows around the best
/// point. Returns the smallest value seen.
fn scan_interval(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cfg: &OracleConfig) -> f64 {
    if hi <= lo {
        return f(lo);
    }
    let steps = ((hi - lo) / cfg.resolution).ceil().max(1.0) as usize;
    let mut best_x = lo;
    let mut best = f(lo);
    for s in 1..=steps {
        let x = if s == steps { hi } else { lo + (hi - lo) * s as f64 / steps as f64 };
        let fx = f(x);
        if fx < best {
            best = fx;
            best_x = x;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut half = (hi - lo) / steps as f64;
    for _ in 0..cfg.refinement_passes {
        let mut a = (best_x - half).max(lo);
        let mut b = (best_x + half).min(hi);
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = f(x2);
            }
        }
        for (x, fx) in [(x1, f1), (x2, f2)] {
            if fx < best {
                best = fx;
                best_x = x;
            }
        }
        half /= 8.0;
    }
    best
}

/// Numerical minimum of `⟨b, a⟩` over `{a : ⟨p, a⟩ ≤ c, ‖a - a₀‖ ≤ r}`.
///
/// After shifting by `a₀` the problem lives in the plane spanned by `p` and
/// the part of `b` orthogonal to `p`, with `x` along `p`. The feasible set is
/// the disk cut by the line `x = h`; the minimum of a linear function sits on
/// its boundary, which is scanned as an arc plus a chord.
pub fn oracle_min_linear_ball_halfspace(inp: &ClosedFormInput, cfg: &OracleConfig) -> Minimum {
    let p_norm = inp.p.dot(&inp.p).sqrt();
    assert!(p_norm > 0.0, "p must be nonzero");
    assert!(inp.r >= 0.0, "radius must be nonnegative");
    let base = inp.b.dot(&inp.a0);
    let r = inp.r;
    let h = (inp.c - inp.p.dot(&inp.a0)) / p_norm;
    if h < -r - cfg.tolerance * r.max(1.0) {
        return Minimum::Infeasible;
    }
    if r == 0.0 {
        return Minimum::Attained(base);
    }

    // Coordinates of b in the (p̂, q̂) frame.
    let bx = inp.b.dot(&inp.p) / p_norm;
    let by = {
        let perp = &inp.b - &(&inp.p * (bx / p_norm));
        perp.dot(&perp).sqrt()
    };
    let linear = |x: f64, y: f64| bx * x + by * y;

    let cos_edge = (h / r).clamp(-1.0, 1.0);
    let phi0 = cos_edge.acos();
    let arc = scan_interval(
        |phi| linear(r * phi.cos(), r * phi.sin()),
        phi0,
        TAU - phi0,
        cfg,
    );
    let mut best = arc;
    if h.abs() < r {
        let half_chord = (r * r - h * h).sqrt();
        let chord = scan_interval(
            |t| linear(h, half_chord * t.sin()),
            -FRAC_PI_2,
            FRAC_PI_2,
            cfg,
        );
        best = best.min(chord);
    }
    Minimum::Attained(base + best)
}

/// Central differences with step `h · max(1, |x_i|)` in coordinate `i`.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Array1<f64> {
    let mut probe = x.to_vec();
    Array1::from_iter((0..x.len()).map(|i| {
        let step = h * x[i].abs().max(1.0);
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        (up - down) / (2.0 * step)
    }))
}

/// Solves `view` without screening to duality gap `tol`, starting from zero.
/// Returns the full-length weights and the final dual point.
pub fn reference_solve(view: ProblemView<'_>, tol: f64) -> Result<(Array1<f64>, DualPoint)> {
    reference_solve_with(view, tol, 1_000_000)
}

/// [`reference_solve`] with an explicit epoch budget.
pub fn reference_solve_with(
    view: ProblemView<'_>,
    tol: f64,
    max_epochs: usize,
) -> Result<(Array1<f64>, DualPoint)> {
    let config = SolverConfig {
        epsilon: tol,
        max_epochs,
        screening_enabled: false,
        ..SolverConfig::default()
    };
    let d = view.n_surviving();
    let out = train(view, &config, PrimalVector::zeros(d))?;
    if !out.converged {
        return Err(Error::NotConverged {
            target: tol,
            epochs: out.epochs,
            gap: out.gap,
        });
    }
    Ok((out.w, out.theta))
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_iter((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

/// Random instance of dimension `dim` whose geometry targets `case`.
pub fn stratified_instance(rng: &mut ChaCha8Rng, case: ClosedFormCase, dim: usize) -> ClosedFormInput {
    assert!(dim >= 2, "need at least two dimensions");
    let a0 = Array1::from_iter((0..dim).map(|_| rng.random_range(-2.0..2.0)));
    let p_hat = unit_vector(rng, dim);
    let p = &p_hat * rng.random_range(0.2..3.0);
    let r = rng.random_range(0.1..2.0);
    let b_norm = rng.random_range(0.1..3.0);

    // A unit vector orthogonal to p.
    let q_hat = loop {
        let v = unit_vector(rng, dim);
        let w = &v - &(&p_hat * v.dot(&p_hat));
        let n = w.dot(&w).sqrt();
        if n > 1e-3 {
            break w / n;
        }
    };
    let b_at = |cos: f64| (&p_hat * cos + &q_hat * (1.0 - cos * cos).max(0.0).sqrt()) * b_norm;

    let (d, b) = match case {
        ClosedFormCase::Infeasible => (rng.random_range(1.05..3.0), unit_vector(rng, dim) * b_norm),
        ClosedFormCase::BallOnly => (rng.random_range(-3.0..-1.05), unit_vector(rng, dim) * b_norm),
        ClosedFormCase::Unconstrained => {
            let d = rng.random_range(-0.95..0.9);
            (d, b_at(rng.random_range(d + 0.05..1.0)))
        }
        ClosedFormCase::BothActive => {
            let d = rng.random_range(-0.9..0.95);
            (d, b_at(rng.random_range(-0.99..d - 0.05)))
        }
        ClosedFormCase::AntiParallel => (rng.random_range(-0.95..1.0), &p_hat * -b_norm),
    };
    let p_norm = p.dot(&p).sqrt();
    let c = p.dot(&a0) - d * r * p_norm;
    ClosedFormInput { b, p, c, a0, r }
}

/// One row of the closed-form property suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub index: usize,
    pub case: &'static str,
    pub dim: usize,
    pub closed: Option<f64>,
    pub oracle: Option<f64>,
    pub pass: bool,
}

/// Agreement test: `|a - b| ≤ tol`, measured relative to `|a|` once it
/// exceeds one, with matching infeasibility verdicts.
pub fn values_agree(closed: Minimum, oracle: Minimum, tol: f64) -> bool {
    match (closed.value(), oracle.value()) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol * a.abs().max(1.0),
        _ => false,
    }
}

/// Compares the closed form with the oracle on `per_case` random instances
/// of every case, dimensions cycling through 2..=8.
pub fn closed_form_suite(per_case: usize, seed: u64, cfg: &OracleConfig, tol: f64) -> Vec<SuiteRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(per_case * ClosedFormCase::ALL.len());
    for case in ClosedFormCase::ALL {
        for k in 0..per_case {
            let dim = 2 + k % 7;
            let inp = stratified_instance(&mut rng, case, dim);
            let closed = min_linear_ball_halfspace(&inp);
            let oracle = oracle_min_linear_ball_halfspace(&inp, cfg);
            rows.push(SuiteRow {
                index: rows.len(),
                case: case.name(),
                dim,
                closed: closed.value(),
                oracle: oracle.value(),
                pass: values_agree(closed, oracle, tol),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{beta_max, Hyperparams};
    use crate::solver::tests::random_data;
    use ndarray::array;

    fn input(b: [f64; 2], p: [f64; 2], c: f64, a0: [f64; 2], r: f64) -> ClosedFormInput {
        ClosedFormInput {
            b: Array1::from(b.to_vec()),
            p: Array1::from(p.to_vec()),
            c,
            a0: Array1::from(a0.to_vec()),
            r,
        }
    }

    fn oracle(inp: &ClosedFormInput) -> Option<f64> {
        oracle_min_linear_ball_halfspace(inp, &OracleConfig::default()).value()
    }

    #[test]
    fn small_planar_examples() {
        let v = oracle(&input([0.0, 1.0], [0.0, 1.0], 2.0, [0.0, 0.0], 1.0)).unwrap();
        assert!((v + 1.0).abs() < 1e-9, "{v}");
        let v = oracle(&input([0.0, -1.0], [0.0, 1.0], 0.5, [0.0, 0.0], 1.0)).unwrap();
        assert!((v + 0.5).abs() < 1e-9, "{v}");
        let v = oracle(&input([1.0, 0.0], [0.0, 1.0], -0.5, [0.0, 0.0], 1.0)).unwrap();
        assert!((v + 0.75f64.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn degenerate_geometry() {
        // Orthogonal b and a far-away plane: plain disk minimum.
        let inp = input([3.0, 0.0], [0.0, 1.0], 1e9, [1.0, 2.0], 0.5);
        assert!((oracle(&inp).unwrap() - (3.0 - 1.5)).abs() < 1e-9);
        // Zero radius with a feasible center.
        let inp = input([3.0, -1.0], [1.0, 1.0], 4.0, [1.0, 2.0], 0.0);
        assert_eq!(oracle(&inp), Some(1.0));
        // Plane beyond the disk.
        let inp = input([1.0, 0.0], [0.0, 1.0], -1.5, [0.0, 0.0], 1.0);
        assert_eq!(oracle(&inp), None);
        // Tangent plane leaves one point.
        let inp = input([1.0, 1.0], [0.0, 1.0], -1.0, [0.0, 0.0], 1.0);
        assert!((oracle(&inp).unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn finer_grid_is_consistent() {
        let coarse = OracleConfig::default();
        let fine = OracleConfig { resolution: coarse.resolution / 2.0, ..coarse };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in ClosedFormCase::ALL {
            for k in 0..20 {
                let inp = stratified_instance(&mut rng, case, 2 + k % 7);
                let a = oracle_min_linear_ball_halfspace(&inp, &coarse).value();
                let b = oracle_min_linear_ball_halfspace(&inp, &fine).value();
                match (a, b) {
                    (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-6, "{a} vs {b}"),
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }

    #[test]
    fn extra_orthogonal_dimensions_do_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = OracleConfig::default();
        for case in ClosedFormCase::ALL {
            for _ in 0..10 {
                let inp = stratified_instance(&mut rng, case, 3);
                let base = oracle_min_linear_ball_halfspace(&inp, &cfg).value();
                let pad = |v: &Array1<f64>| {
                    let mut out = v.to_vec();
                    out.extend([0.0, 0.0]);
                    Array1::from(out)
                };
                let mut a0 = pad(&inp.a0);
                // Moving a₀ along the new axes changes neither objective nor constraint.
                a0[3] = rng.random_range(-1.0..1.0);
                a0[4] = rng.random_range(-1.0..1.0);
                let wide = ClosedFormInput {
                    b: pad(&inp.b),
                    p: pad(&inp.p),
                    c: inp.c,
                    a0,
                    r: inp.r,
                };
                let padded = oracle_min_linear_ball_halfspace(&wide, &cfg).value();
                match (base, padded) {
                    (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9, "{a} vs {b}"),
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }

    #[test]
    fn stratification_hits_every_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in ClosedFormCase::ALL {
            for dim in 2..=8 {
                let inp = stratified_instance(&mut rng, case, dim);
                assert_eq!(inp.scalars().classify(), case);
            }
        }
    }

    #[test]
    fn suite_agrees_with_closed_form() {
        let rows = closed_form_suite(30, 8, &OracleConfig::default(), 1e-5);
        assert_eq!(rows.len(), 150);
        let bad: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn finite_differences_of_a_quadratic() {
        let f = |x: &[f64]| 0.5 * x[0] * x[0] + 3.0 * x[0] * x[1] - 2.0 * x[1] * x[1] + x[2];
        let x = [1.5, -2.0, 40.0];
        let g = finite_difference_gradient(f, &x, FD_STEP);
        let exact = array![x[0] + 3.0 * x[1], 3.0 * x[0] - 4.0 * x[1], 1.0];
        for (a, b) in g.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn reference_at_beta_max_is_trivial() {
        let data = random_data(31, 25, 6);
        let bmax = beta_max(&data);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, 1.5 * bmax).unwrap());
        let (w, theta) = reference_solve(view, 1e-10).unwrap();
        assert!(w.iter().all(|&x| x == 0.0));
        assert!(theta.max_deviation_from_uniform() < 1e-12);
    }

    #[test]
    fn reference_is_stable_in_the_epoch_budget() {
        let data = random_data(32, 30, 8);
        let bmax = beta_max(&data);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, 0.2 * bmax).unwrap());
        let (w, _) = reference_solve(view.clone(), 1e-12).unwrap();
        let (w2, _) = reference_solve_with(view.clone(), 1e-12, 2_000_000).unwrap();
        let dev = (&w - &w2).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(dev <= 1e-9);
        let (w, theta) = reference_solve(view.clone(), 1e-12).unwrap();
        let gap = view.duality_gap(&PrimalVector(w), &theta);
        assert!(gap <= 1e-12, "{gap}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(OracleConfig { resolution: 0.0, ..Default::default() }.validate().is_err());
        assert!(OracleConfig::default().validate().is_ok());
    }
}
