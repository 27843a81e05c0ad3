//! Accelerated proximal gradient with gap-triggered dynamic screening.
//!
//! Each epoch takes one proximal gradient step on the primal objective of
//! the current view, maps the iterate to a dual point through the softmax
//! KKT condition and evaluates the duality gap. Whenever the gap falls below
//! `gamma` times the gap recorded at the previous trigger, the dual region is
//! rebuilt, the surviving features are scored and the certified zeros are
//! removed from the view.

mod path;

pub use path::{beta_ratio_grid, train_path, PathPoint, PathResult};

use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ball_estimate_with;
use crate::model::{
    shrink, ActiveSet, DualPoint, GramCache, PrimalVector, ProblemView, EPS_SIMPLEX,
};
use crate::screening::{screen_with_affine, SampleChoice};

/// How the half-space `H_k` is chosen at each trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KPolicy {
    /// `k` cycles through the samples, starting at `seed mod n`.
    RoundRobin,
    /// Minimum score over every `k`.
    FullMin,
}

/// Step-size rule of the inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `1/L` with `L = (1/2n) Σ_i ‖A_i‖_F²` over the surviving rows.
    FixedFromBound,
    /// Armijo-type backtracking from `L₀ = αβ + (1/4n) Σ_i ‖A_i‖_F²`.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub max_epochs: usize,
    pub k_policy: KPolicy,
    pub seed: u64,
    pub screening_enabled: bool,
    pub step_rule: StepRule,
    /// The dual point and gap are evaluated every this many epochs.
    pub dual_update_interval: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-6,
            gamma: 0.5,
            max_epochs: 100_000,
            k_policy: KPolicy::RoundRobin,
            seed: 0,
            screening_enabled: true,
            step_rule: StepRule::Backtracking,
            dual_update_interval: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if self.dual_update_interval == 0 {
            return Err(Error::Config("dual_update_interval must be positive".into()));
        }
        Ok(())
    }
}

/// `S_{tβ}(v) / (1 + tαβ)`, the proximal map of `t β (α/2 ‖·‖² + ‖·‖₁)`.
pub fn prox_elastic_net(v: ArrayView1<'_, f64>, t: f64, alpha: f64, beta: f64) -> Array1<f64> {
    assert!(t > 0.0, "step must be positive");
    let scale = 1.0 + t * alpha * beta;
    v.mapv(|x| shrink(x, t * beta) / scale)
}

/// One gap evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub gap: f64,
    pub n_screened: usize,
    pub newly_screened: usize,
    pub elapsed_s: f64,
    pub screening_s: f64,
}

/// One firing of the screening rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriggerRecord {
    pub epoch: usize,
    /// Gap that fired the trigger.
    pub trigger_gap: f64,
    /// Gap recomputed on the shrunk problem; the next trigger needs a gap
    /// below `gamma` times this.
    pub reset_gap: f64,
    pub newly_screened: usize,
    pub n_screened: usize,
    pub elapsed_s: f64,
    pub screening_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverTrace {
    pub epochs: Vec<EpochRecord>,
    pub triggers: Vec<TriggerRecord>,
    /// Total seconds spent building balls, scoring and shrinking.
    pub screening_s: f64,
    /// Objective value after every epoch.
    pub objective: Vec<f64>,
}

/// The iterate of [`train`] together with everything needed to continue it.
#[derive(Debug, Clone)]
pub struct SolverState<'a> {
    pub view: ProblemView<'a>,
    pub w: PrimalVector,
    pub theta: DualPoint,
    /// Gap at the last trigger (`+∞` before the first).
    pub g: f64,
    /// Lowest dual value seen on the current view.
    pub best_dual_value: f64,
    pub gap: f64,
    pub epoch: usize,
    pub trace: SolverTrace,
    z: Vec<f64>,
    w_prev: PrimalVector,
    z_prev: Vec<f64>,
    objective: f64,
    momentum_t: f64,
    lipschitz: f64,
    calm_steps: usize,
    triggers: usize,
    started: Instant,
    /// Smooth-loss gradient at the next extrapolated point, when a screening
    /// trigger already computed it.
    next_grad: Option<Array1<f64>>,
    /// Columns of the Gram-type matrix behind the ball centers.
    gram: GramCache,
}

/// Backtracking halves `L` after this many steps without an increase.
const CALM_STEPS_BEFORE_DECREASE: usize = 1;

impl<'a> SolverState<'a> {
    /// Starts at `w0` (indexed by the view's surviving features).
    pub fn new(view: ProblemView<'a>, w0: PrimalVector, config: &SolverConfig) -> Result<Self> {
        Self::with_lipschitz(view, w0, config, None, GramCache::new())
    }

    /// [`new`](Self::new) with backtracking started from `lipschitz` when
    /// given, finite and positive.
    fn with_lipschitz(
        view: ProblemView<'a>,
        w0: PrimalVector,
        config: &SolverConfig,
        lipschitz: Option<f64>,
        gram: GramCache,
    ) -> Result<Self> {
        if w0.len() != view.n_surviving() {
            return Err(Error::DimensionMismatch {
                what: "initial weights",
                expected: view.n_surviving(),
                found: w0.len(),
            });
        }
        let z = view.scores(w0.as_slice());
        let (loss, probs) = view.loss_from_scores(&z);
        let objective = loss + view.params().penalty(w0.as_slice());
        let theta = DualPoint::from_probabilities_clamped(view.layout().clone(), probs);
        let lipschitz = match (config.step_rule, lipschitz) {
            (StepRule::Backtracking, Some(l)) if l > 0.0 && l.is_finite() => l,
            _ => initial_lipschitz(&view, config.step_rule),
        };
        let mut state = SolverState {
            w_prev: w0.clone(),
            z_prev: z.clone(),
            view,
            w: w0,
            theta,
            g: f64::INFINITY,
            best_dual_value: f64::INFINITY,
            gap: f64::INFINITY,
            epoch: 0,
            trace: SolverTrace::default(),
            z,
            objective,
            momentum_t: 1.0,
            lipschitz,
            calm_steps: 0,
            triggers: 0,
            started: Instant::now(),
            next_grad: None,
            gram,
        };
        state.trace.objective.push(objective);
        Ok(state)
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Current weights embedded into `R^d` with zeros on screened features.
    pub fn full_weights(&self) -> Array1<f64> {
        self.view.embed(&self.w)
    }

    /// Momentum weight of the next step and the momentum parameter after it.
    fn extrapolation(&self) -> (f64, f64) {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * self.momentum_t * self.momentum_t).sqrt());
        ((self.momentum_t - 1.0) / t_next, t_next)
    }

    /// The point `y = w + mom (w - w_prev)` and its scores.
    fn extrapolated(&self, mom: f64) -> (Array1<f64>, Vec<f64>) {
        let w = &self.w.0;
        if mom > 0.0 {
            let y = w + &((w - &self.w_prev.0) * mom);
            let z_y = self
                .z
                .iter()
                .zip(&self.z_prev)
                .map(|(a, b)| a + mom * (a - b))
                .collect();
            (y, z_y)
        } else {
            (w.clone(), self.z.clone())
        }
    }

    fn reset_momentum(&mut self) {
        self.w_prev = self.w.clone();
        self.z_prev = self.z.clone();
        self.momentum_t = 1.0;
    }

    /// Recomputes `θ̂` from the current scores, the dual value and the gap.
    /// Returns `v = (1/n) Σ A_i ∘ θ̂_i` for reuse by the ball.
    fn refresh_dual(&mut self) -> Result<(Array1<f64>, f64)> {
        let (_, probs) = self.view.loss_from_scores(&self.z);
        let unclamped = probs.iter().all(|&p| p >= EPS_SIMPLEX);
        self.theta = DualPoint::from_probabilities_clamped(self.view.layout().clone(), probs);
        let v = self.view.feature_sum(self.theta.full().as_slice().unwrap());
        // Without momentum the next step starts at `w`, where the loss
        // gradient is `-v` as long as no probability was clamped.
        if self.momentum_t == 1.0 && unclamped {
            self.next_grad = Some(-&v);
        }
        let dual = self.view.dual_objective_with(&self.theta, &v);
        if !dual.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch,
                what: "dual objective",
            });
        }
        self.best_dual_value = self.best_dual_value.min(dual);
        self.gap = self.objective + dual;
        Ok((v, dual))
    }

    /// One trial step from `y` (with scores `z_y` and, if known, the loss
    /// gradient). Returns the new point, its scores and its smooth loss.
    fn prox_step(
        &mut self,
        y: &Array1<f64>,
        z_y: &[f64],
        grad: Option<Array1<f64>>,
        step_rule: StepRule,
    ) -> (Array1<f64>, Vec<f64>, f64) {
        let params = self.view.params();
        let (fy, probs) = self.view.loss_from_scores(z_y);
        let grad = grad.unwrap_or_else(|| -self.view.feature_sum(&probs));
        let mut increased = false;
        loop {
            let l = self.lipschitz;
            let forward = y - &(&grad / l);
            let w_new = prox_elastic_net(forward.view(), 1.0 / l, params.alpha, params.beta);
            let z_new = self.view.scores(w_new.as_slice().unwrap());
            let f_new = self.view.loss_value(&z_new);
            if step_rule == StepRule::FixedFromBound {
                return (w_new, z_new, f_new);
            }
            let diff = &w_new - y;
            let model = fy + grad.dot(&diff) + 0.5 * l * diff.dot(&diff);
            if f_new <= model || l > 1e300 {
                if increased {
                    self.calm_steps = 0;
                } else {
                    self.calm_steps += 1;
                    if self.calm_steps >= CALM_STEPS_BEFORE_DECREASE {
                        self.lipschitz *= 0.5;
                        self.calm_steps = 0;
                    }
                }
                return (w_new, z_new, f_new);
            }
            self.lipschitz *= 2.0;
            increased = true;
        }
    }
}

fn initial_lipschitz(view: &ProblemView<'_>, rule: StepRule) -> f64 {
    let n = view.n_samples() as f64;
    let fro = view.matrix().frobenius_sq();
    let bound = match rule {
        StepRule::FixedFromBound => fro / (2.0 * n),
        StepRule::Backtracking => view.params().alpha * view.params().beta + fro / (4.0 * n),
    };
    // An all-zero matrix leaves only the penalty; any positive step works.
    if bound > 0.0 {
        bound
    } else {
        1.0
    }
}

/// One accelerated proximal gradient step on the current view, followed by
/// the dual update when due.
pub fn inner_epoch(state: &mut SolverState<'_>, config: &SolverConfig) -> Result<()> {
    state.epoch += 1;
    let (mom, t_next) = state.extrapolation();
    let w = state.w.0.clone();
    let (y, z_y) = state.extrapolated(mom);
    let grad = state.next_grad.take();
    let (mut w_new, mut z_new, f_new) = state.prox_step(&y, &z_y, grad, config.step_rule);
    let mut obj_new = f_new + state.view.params().penalty(w_new.as_slice().unwrap());
    let mut restarted = false;
    if mom > 0.0 && !(obj_new <= state.objective) {
        // Monotone safeguard: fall back to a plain proximal gradient step.
        let z_w = state.z.clone();
        let f_plain;
        (w_new, z_new, f_plain) = state.prox_step(&w, &z_w, None, config.step_rule);
        obj_new = f_plain + state.view.params().penalty(w_new.as_slice().unwrap());
        restarted = true;
    }
    if !obj_new.is_finite() {
        return Err(Error::NonFinite {
            epoch: state.epoch,
            what: "primal objective",
        });
    }
    // Gradient-based restart: the step points against the momentum.
    let against = (&y - &w_new).dot(&(&w_new - &w)) > 0.0;
    state.w_prev = std::mem::replace(&mut state.w, PrimalVector(w_new));
    state.z_prev = std::mem::replace(&mut state.z, z_new);
    state.objective = obj_new;
    state.momentum_t = if restarted || against { 1.0 } else { t_next };
    state.trace.objective.push(state.objective);
    Ok(())
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Solution in `R^d`, zero on the screened features.
    pub w: Array1<f64>,
    pub theta: DualPoint,
    pub gap: f64,
    pub converged: bool,
    pub epochs: usize,
    pub active: ActiveSet,
    pub trace: SolverTrace,
    /// Final backtracking estimate of the Lipschitz constant.
    pub lipschitz: f64,
}

/// Dynamic screening loop around [`inner_epoch`]. `w0` is indexed by the
/// surviving features of `view`.
pub fn train(view: ProblemView<'_>, config: &SolverConfig, w0: PrimalVector) -> Result<TrainOutput> {
    train_with_lipschitz(view, config, w0, None)
}

/// [`train`] with backtracking started from `lipschitz` instead of `L₀`,
/// typically the final estimate of a neighboring solve.
pub fn train_with_lipschitz(
    view: ProblemView<'_>,
    config: &SolverConfig,
    w0: PrimalVector,
    lipschitz: Option<f64>,
) -> Result<TrainOutput> {
    Ok(train_warm(view, config, w0, lipschitz, GramCache::new())?.0)
}

/// [`train_with_lipschitz`] reusing the Gram columns of an earlier solve on
/// the same data, and handing them back.
pub(crate) fn train_warm(
    view: ProblemView<'_>,
    config: &SolverConfig,
    w0: PrimalVector,
    lipschitz: Option<f64>,
    gram: GramCache,
) -> Result<(TrainOutput, GramCache)> {
    config.validate()?;
    let mut state = SolverState::with_lipschitz(view, w0, config, lipschitz, gram)?;
    let mut first = true;
    loop {
        if !first {
            inner_epoch(&mut state, config)?;
        }
        first = false;
        if state.epoch % config.dual_update_interval != 0 {
            if state.epoch >= config.max_epochs {
                // Evaluate once more so the reported gap is current.
                state.refresh_dual()?;
                break;
            }
            continue;
        }
        let (v, dual) = state.refresh_dual()?;
        let mut newly = 0;
        let mut screening_s = 0.0;
        if config.screening_enabled && state.gap < config.gamma * state.g {
            let tic = Instant::now();
            let trigger_gap = state.gap;
            newly = screening_trigger(&mut state, config, &v, dual)?;
            screening_s = tic.elapsed().as_secs_f64();
            state.trace.screening_s += screening_s;
            state.trace.triggers.push(TriggerRecord {
                epoch: state.epoch,
                trigger_gap,
                reset_gap: state.g,
                newly_screened: newly,
                n_screened: state.view.active().screened().len(),
                elapsed_s: state.started.elapsed().as_secs_f64(),
                screening_s,
            });
        }
        state.trace.epochs.push(EpochRecord {
            epoch: state.epoch,
            gap: state.gap,
            n_screened: state.view.active().screened().len(),
            newly_screened: newly,
            elapsed_s: state.started.elapsed().as_secs_f64(),
            screening_s,
        });
        if state.gap < config.epsilon || state.epoch >= config.max_epochs {
            break;
        }
    }
    let out = TrainOutput {
        w: state.full_weights(),
        converged: state.gap < config.epsilon,
        gap: state.gap,
        epochs: state.epoch,
        active: state.view.active().clone(),
        theta: state.theta,
        trace: state.trace,
        lipschitz: state.lipschitz,
    };
    Ok((out, state.gram))
}

/// Builds the ball, scores the surviving features, shrinks the view and
/// resets `g`. Returns the number of newly screened features.
///
/// When every newly screened weight is already zero the iterates, scores and
/// any pending gradient carry over to the narrower view unchanged.
fn screening_trigger(
    state: &mut SolverState<'_>,
    config: &SolverConfig,
    v: &Array1<f64>,
    dual: f64,
) -> Result<usize> {
    let ball = ball_estimate_with(&state.view, &state.theta, v, dual, state.best_dual_value)?;
    let affine = state
        .view
        .center_affine(&state.theta, &state.z, &state.w, v, &mut state.gram)
        .unwrap_or_else(|| state.view.feature_sum(&ball.center.extend_affine()));
    let n = state.view.n_samples();
    let choice = match config.k_policy {
        KPolicy::RoundRobin => {
            SampleChoice::Single(((config.seed % n as u64) as usize + state.triggers) % n)
        }
        KPolicy::FullMin => SampleChoice::All,
    };
    state.triggers += 1;
    let beta = state.view.params().beta;
    let outcome = screen_with_affine(&state.view, &ball, beta, choice, &affine);
    let newly = outcome.newly_screened.len();
    if newly > 0 {
        let narrower = state.view.restrict(&outcome.newly_screened)?;
        let surviving = state.view.active().surviving();
        let clean = outcome.newly_screened.iter().all(|j| {
            let local = surviving.binary_search(j).expect("screened a surviving feature");
            state.w.0[local] == 0.0 && state.w_prev.0[local] == 0.0
        });
        let keep = |x: &Array1<f64>| state.view.project_onto(&narrower, &PrimalVector(x.clone())).0;
        // The dual values of the old view do not bound the new one.
        state.best_dual_value = f64::INFINITY;
        if clean {
            let v_narrow = keep(v);
            state.next_grad = state.next_grad.as_ref().map(&keep);
            state.w = PrimalVector(keep(&state.w.0));
            state.w_prev = PrimalVector(keep(&state.w_prev.0));
            state.view = narrower;
            let dual = state.view.dual_objective_with(&state.theta, &v_narrow);
            state.best_dual_value = dual;
            state.gap = state.objective + dual;
        } else {
            state.w = PrimalVector(keep(&state.w.0));
            state.view = narrower;
            state.z = state.view.scores(state.w.as_slice());
            let loss = state.view.loss_value(&state.z);
            state.objective = loss + state.view.params().penalty(state.w.as_slice());
            state.next_grad = None;
            state.reset_momentum();
            state.refresh_dual()?;
        }
        if config.step_rule == StepRule::FixedFromBound {
            state.lipschitz = initial_lipschitz(&state.view, config.step_rule);
        }
    }
    state.g = state.gap;
    Ok(newly)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{beta_max, CorrectedFeatureSet, Hyperparams};
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_data(seed: u64, n: usize, d: usize) -> CorrectedFeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let q = rng.random_range(2..5);
            let y = rng.random_range(0..q);
            let mut a = Array2::zeros((d, q));
            for ((_, c), v) in a.indexed_iter_mut() {
                if c != y && rng.random_bool(0.6) {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            blocks.push(a);
            labels.push(y);
        }
        CorrectedFeatureSet::from_dense(&blocks, &labels).unwrap()
    }

    /// Scalar minimizer of `(1/2t)(x - v)² + β(α/2 x² + |x|)`: zero when the
    /// subdifferential at zero contains zero, otherwise bisection on the
    /// (monotone) derivative.
    fn scalar_prox_oracle(v: f64, t: f64, alpha: f64, beta: f64) -> f64 {
        let slope = |x: f64| (x - v) / t + beta * (alpha * x + x.signum());
        if (-v / t).abs() <= beta {
            return 0.0;
        }
        let (mut lo, mut hi) = if v > 0.0 { (0.0, v) } else { (v, 0.0) };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn prox_threshold_zone_and_lasso_limit() {
        let v = ndarray::array![0.3, -0.2, 0.0];
        assert_eq!(prox_elastic_net(v.view(), 0.5, 2.0, 0.6), Array1::<f64>::zeros(3));
        let u = ndarray::array![2.0, -3.0];
        assert_eq!(prox_elastic_net(u.view(), 1.0, 0.0, 1.0), ndarray::array![1.0, -2.0]);
    }

    proptest! {
        #[test]
        fn prox_matches_scalar_oracle(
            v in -5.0f64..5.0, t in 0.01f64..3.0, alpha in 0.0f64..3.0, beta in 0.01f64..2.0
        ) {
            let got = prox_elastic_net(ndarray::array![v].view(), t, alpha, beta)[0];
            let want = scalar_prox_oracle(v, t, alpha, beta);
            prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        }
    }

    fn quiet(epsilon: f64) -> SolverConfig {
        SolverConfig {
            epsilon,
            screening_enabled: false,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn objective_is_monotone() {
        let data = random_data(1, 30, 12);
        let beta = 0.05 * beta_max(&data);
        for rule in [StepRule::Backtracking, StepRule::FixedFromBound] {
            let view = ProblemView::new(&data, Hyperparams::new(1.0, beta).unwrap());
            let config = SolverConfig {
                step_rule: rule,
                ..quiet(1e-9)
            };
            let mut state = SolverState::new(view, PrimalVector::zeros(12), &config).unwrap();
            for _ in 0..100 {
                inner_epoch(&mut state, &config).unwrap();
            }
            let obj = &state.trace.objective;
            for pair in obj.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-14, "{pair:?}");
            }
        }
    }

    #[test]
    fn fixed_point_is_stable() {
        let data = random_data(2, 25, 8);
        let beta = 0.2 * beta_max(&data);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, beta).unwrap());
        let config = quiet(1e-13);
        let mut state = SolverState::new(view.clone(), PrimalVector::zeros(8), &config).unwrap();
        for _ in 0..3000 {
            inner_epoch(&mut state, &config).unwrap();
        }
        let solved = state.w.clone();
        // A fresh state has no momentum, so this is one plain prox-gradient step.
        let mut state = SolverState::new(view, solved.clone(), &config).unwrap();
        inner_epoch(&mut state, &config).unwrap();
        let drift = (&state.w.0 - &solved.0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(drift < 1e-10, "{drift}");
    }

    #[test]
    fn zero_stays_zero_above_beta_max() {
        let data = random_data(3, 20, 6);
        let bmax = beta_max(&data);
        for ratio in [1.0, 1.5] {
            let view = ProblemView::new(&data, Hyperparams::new(1.0, ratio * bmax).unwrap());
            let config = quiet(1e-9);
            let mut state = SolverState::new(view, PrimalVector::zeros(6), &config).unwrap();
            for _ in 0..20 {
                inner_epoch(&mut state, &config).unwrap();
                // At exactly β_max the gradient sits on the threshold.
                assert!(state.w.max_abs() < 1e-15, "{}", state.w.max_abs());
            }
            let view = ProblemView::new(&data, Hyperparams::new(1.0, ratio * bmax).unwrap());
            let out = train(view, &SolverConfig::default(), PrimalVector::zeros(6)).unwrap();
            assert_eq!(out.epochs, 0);
            assert_eq!(out.w.iter().fold(0.0f64, |m, x| m.max(x.abs())), 0.0);
            assert!(out.theta.max_deviation_from_uniform() < 1e-12);
        }
    }

    #[test]
    fn screening_run_matches_plain_run() {
        let data = random_data(4, 40, 30);
        let beta = 0.3 * beta_max(&data);
        for policy in [KPolicy::RoundRobin, KPolicy::FullMin] {
            let view = ProblemView::new(&data, Hyperparams::new(1.0, beta).unwrap());
            let plain = train(view.clone(), &quiet(1e-12), PrimalVector::zeros(30)).unwrap();
            let config = SolverConfig {
                epsilon: 1e-12,
                k_policy: policy,
                ..SolverConfig::default()
            };
            let screened = train(view, &config, PrimalVector::zeros(30)).unwrap();
            assert!(plain.converged && screened.converged);
            assert!(!screened.active.screened().is_empty());
            for &j in screened.active.screened() {
                assert!(plain.w[j].abs() <= 1e-8, "feature {j}: {}", plain.w[j]);
            }
            // Both iterates lie within sqrt(2 gap / αβ) of the optimum.
            let dev = (&plain.w - &screened.w).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let bound = (2.0 * plain.gap / beta).sqrt() + (2.0 * screened.gap / beta).sqrt();
            assert!(dev <= bound, "{dev} > {bound}");
            let trig = &screened.trace.triggers;
            for pair in trig.windows(2) {
                assert!(pair[1].trigger_gap < config.gamma * pair[0].reset_gap);
                assert!(pair[1].n_screened >= pair[0].n_screened);
            }
            for pair in screened.trace.epochs.windows(2) {
                assert!(pair[1].epoch > pair[0].epoch);
                assert!(pair[1].n_screened >= pair[0].n_screened);
            }
        }
    }

    #[test]
    fn sparse_interval_still_converges() {
        let data = random_data(5, 30, 10);
        let beta = 0.2 * beta_max(&data);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, beta).unwrap());
        let config = SolverConfig {
            dual_update_interval: 7,
            epsilon: 1e-10,
            ..SolverConfig::default()
        };
        let out = train(view, &config, PrimalVector::zeros(10)).unwrap();
        assert!(out.converged);
        assert!(out.trace.epochs.iter().all(|r| r.epoch % 7 == 0));
    }

    #[test]
    fn max_epochs_reports_non_convergence() {
        let data = random_data(6, 30, 10);
        let beta = 0.05 * beta_max(&data);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, beta).unwrap());
        let config = SolverConfig {
            max_epochs: 3,
            epsilon: 1e-14,
            ..SolverConfig::default()
        };
        let out = train(view, &config, PrimalVector::zeros(10)).unwrap();
        assert!(!out.converged);
        assert_eq!(out.epochs, 3);
        assert!(out.gap.is_finite());
    }

    #[test]
    fn rejects_bad_config() {
        for bad in [
            SolverConfig { gamma: 1.0, ..SolverConfig::default() },
            SolverConfig { epsilon: 0.0, ..SolverConfig::default() },
            SolverConfig { dual_update_interval: 0, ..SolverConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
