use std::sync::Arc;

use ndarray::Array1;

use super::data::{BlockLayout, CorrectedFeatureSet, Hyperparams, RowSelection};
use super::dual::{BlockVector, DualPoint};
use super::ops::{neg_softmax_into, shrink, simplex_entropy};
use crate::error::{Error, Result};

/// Partition of the features into screened (`F̂`) and surviving (`F̂ᶜ`)
/// indices, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    screened: Vec<usize>,
    surviving: Vec<usize>,
}

impl ActiveSet {
    /// Nothing screened.
    pub fn full(d: usize) -> Self {
        ActiveSet {
            screened: Vec::new(),
            surviving: (0..d).collect(),
        }
    }

    pub fn screened(&self) -> &[usize] {
        &self.screened
    }

    pub fn surviving(&self) -> &[usize] {
        &self.surviving
    }

    pub fn n_features(&self) -> usize {
        self.screened.len() + self.surviving.len()
    }

    /// Moves `more` (global, surviving) indices into the screened set.
    fn extend(&self, more: &[usize]) -> Result<ActiveSet> {
        let d = self.n_features();
        let mut drop = vec![false; d];
        for &j in more {
            if j >= d || drop[j] {
                return Err(Error::FeatureIndex(j));
            }
            drop[j] = true;
        }
        for &j in &self.screened {
            if drop[j] {
                return Err(Error::FeatureIndex(j));
            }
            drop[j] = true;
        }
        let surviving = self.surviving.iter().copied().filter(|&j| !drop[j]).collect();
        let screened = (0..d).filter(|&j| drop[j]).collect();
        Ok(ActiveSet {
            screened,
            surviving,
        })
    }
}

/// Model weights over the surviving features of some [`ProblemView`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalVector(pub Array1<f64>);

impl PrimalVector {
    pub fn zeros(len: usize) -> Self {
        PrimalVector(Array1::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("contiguous")
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

impl From<Array1<f64>> for PrimalVector {
    fn from(a: Array1<f64>) -> Self {
        PrimalVector(a)
    }
}

impl From<Vec<f64>> for PrimalVector {
    fn from(v: Vec<f64>) -> Self {
        PrimalVector(Array1::from(v))
    }
}

/// The problem restricted to the surviving rows of every `A_i`.
///
/// All objective, gradient and KKT evaluations go through a view, so the
/// screened and unscreened code paths share one implementation.
#[derive(Debug, Clone)]
pub struct ProblemView<'a> {
    data: &'a CorrectedFeatureSet,
    active: ActiveSet,
    params: Hyperparams,
}

impl<'a> ProblemView<'a> {
    pub fn new(data: &'a CorrectedFeatureSet, params: Hyperparams) -> Self {
        ProblemView {
            data,
            active: ActiveSet::full(data.n_features()),
            params,
        }
    }

    pub fn data(&self) -> &'a CorrectedFeatureSet {
        self.data
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn params(&self) -> Hyperparams {
        self.params
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        self.data.layout()
    }

    pub fn n_samples(&self) -> usize {
        self.data.n_samples()
    }

    pub fn n_surviving(&self) -> usize {
        self.active.surviving.len()
    }

    /// The surviving rows of `M`, local row `r` being feature `surviving[r]`.
    pub(crate) fn matrix(&self) -> RowSelection<'_> {
        RowSelection::new(&self.data.matrix, &self.active.surviving)
    }

    /// Screens `new_screened` (global feature indices, all currently
    /// surviving) on top of the current screened set.
    pub fn restrict(&self, new_screened: &[usize]) -> Result<ProblemView<'a>> {
        if new_screened.is_empty() {
            return Ok(self.clone());
        }
        let active = self.active.extend(new_screened)?;
        Ok(ProblemView {
            data: self.data,
            active,
            params: self.params,
        })
    }

    /// Keeps the coordinates of `w` (indexed by this view) that survive in
    /// `narrower`, a restriction of this view.
    pub fn project_onto(&self, narrower: &ProblemView<'_>, w: &PrimalVector) -> PrimalVector {
        let mut out = Vec::with_capacity(narrower.n_surviving());
        let mut k = 0;
        for &j in narrower.active.surviving() {
            while self.active.surviving[k] != j {
                k += 1;
            }
            out.push(w.0[k]);
        }
        PrimalVector::from(out)
    }

    /// Picks the surviving coordinates out of a full-length weight vector.
    pub fn restrict_full(&self, w_full: &Array1<f64>) -> PrimalVector {
        PrimalVector::from(
            self.active
                .surviving
                .iter()
                .map(|&j| w_full[j])
                .collect::<Vec<_>>(),
        )
    }

    /// Embeds `w` into `R^d` with zeros on the screened features.
    pub fn embed(&self, w: &PrimalVector) -> Array1<f64> {
        let mut out = Array1::zeros(self.active.n_features());
        for (&j, &v) in self.active.surviving.iter().zip(w.0.iter()) {
            out[j] = v;
        }
        out
    }

    fn check_len(&self, w: &PrimalVector) {
        assert_eq!(w.len(), self.n_surviving(), "weight length must match the view");
    }

    /// Scores `z = Mᵀ w`, one entry per (sample, label) column.
    pub(crate) fn scores(&self, w: &[f64]) -> Vec<f64> {
        self.matrix().mul_transpose_vec(w)
    }

    /// `(1/n) M u` over the surviving rows. With `u` the affine extension of
    /// a reduced block vector this is `(1/n) Σ_i A_i ∘ θ_i`.
    pub fn feature_sum(&self, u: &[f64]) -> Array1<f64> {
        let n = self.n_samples() as f64;
        let mut v = self.matrix().mul_vec(u);
        v.mapv_inplace(|x| x / n);
        v
    }

    /// Loss `(1/n) Σ φ_i(-z_i)` and the per-sample softmax probabilities.
    pub(crate) fn loss_from_scores(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let layout = self.layout();
        let mut probs = vec![0.0; z.len()];
        let mut total = 0.0;
        for i in 0..layout.n_blocks() {
            let r = layout.full_range(i);
            total += neg_softmax_into(&z[r.clone()], &mut probs[r]);
        }
        (total / self.n_samples() as f64, probs)
    }

    /// Loss value only; cheaper than [`loss_from_scores`](Self::loss_from_scores).
    pub(crate) fn loss_value(&self, z: &[f64]) -> f64 {
        let layout = self.layout();
        let mut total = 0.0;
        for i in 0..layout.n_blocks() {
            let r = layout.full_range(i);
            total += super::ops::log_sum_exp(z[r].iter().map(|x| -x));
        }
        total / self.n_samples() as f64
    }

    /// `P̂(w) = (1/n) Σ φ_i(-A_iᵀ w) + β(α/2 ‖w‖² + ‖w‖₁)`.
    pub fn primal_objective(&self, w: &PrimalVector) -> f64 {
        self.check_len(w);
        let z = self.scores(w.as_slice());
        self.loss_value(&z) + self.params.penalty(w.as_slice())
    }

    /// Value and gradient of the smooth (loss) part of the primal objective.
    pub fn smooth_gradient(&self, w: &PrimalVector) -> (f64, Array1<f64>) {
        self.check_len(w);
        let z = self.scores(w.as_slice());
        let (loss, probs) = self.loss_from_scores(&z);
        let g = -self.feature_sum(&probs);
        (loss, g)
    }

    /// Dual objective given the precomputed `v = (1/n) Σ A_i ∘ θ_i`.
    pub(crate) fn dual_objective_with(&self, theta: &DualPoint, v: &Array1<f64>) -> f64 {
        let Hyperparams { alpha, beta } = self.params;
        let quad: f64 = v.iter().map(|&x| shrink(x, beta).powi(2)).sum();
        let layout = self.layout();
        let entropy: f64 = (0..layout.n_blocks())
            .map(|i| simplex_entropy(theta.full_block(i).iter().copied()))
            .sum();
        quad / (2.0 * alpha * beta) - entropy / self.n_samples() as f64
    }

    /// `D̂(θ) = (1/2αβ) ‖S_β((1/n) Σ A_i ∘ θ_i)‖² - (1/n) Σ H(θ_i)`.
    pub fn dual_objective(&self, theta: &DualPoint) -> f64 {
        let v = self.feature_sum(theta.full().as_slice().unwrap());
        self.dual_objective_with(theta, &v)
    }

    /// `w(θ) = S_β(v) / (αβ)` from a precomputed `v`.
    pub(crate) fn primal_from_sum(&self, v: &Array1<f64>) -> PrimalVector {
        let Hyperparams { alpha, beta } = self.params;
        PrimalVector(v.mapv(|x| shrink(x, beta) / (alpha * beta)))
    }

    pub(crate) fn dual_gradient_with(&self, theta: &DualPoint, v: &Array1<f64>) -> BlockVector {
        let w = self.primal_from_sum(v);
        let z = self.scores(w.as_slice());
        let layout = self.layout().clone();
        let n = self.n_samples() as f64;
        let mut g = Array1::zeros(layout.reduced_len());
        for i in 0..layout.n_blocks() {
            let full = layout.full_range(i);
            let red = layout.reduced_range(i);
            let zi = &z[full.clone()];
            let ti = theta.full_block(i);
            let q = full.len();
            let (z_last, t_last) = (zi[q - 1], ti[q - 1].ln());
            for (l, out) in red.enumerate() {
                g[out] = ((zi[l] - z_last) + (ti[l].ln() - t_last)) / n;
            }
        }
        BlockVector::new(layout, g).expect("layout-sized gradient")
    }

    /// Gradient of `D̂` with respect to the reduced coordinates.
    pub fn dual_gradient(&self, theta: &DualPoint) -> BlockVector {
        let v = self.feature_sum(theta.full().as_slice().unwrap());
        self.dual_gradient_with(theta, &v)
    }

    /// Primal point from a dual point through the first KKT condition.
    pub fn kkt_primal_from_dual(&self, theta: &DualPoint) -> PrimalVector {
        let v = self.feature_sum(theta.full().as_slice().unwrap());
        self.primal_from_sum(&v)
    }

    /// Dual point from a primal point through the second KKT condition
    /// (softmax of the negated scores), clamped into the interior.
    pub fn kkt_dual_from_primal(&self, w: &PrimalVector) -> DualPoint {
        self.check_len(w);
        let z = self.scores(w.as_slice());
        let (_, probs) = self.loss_from_scores(&z);
        DualPoint::from_probabilities_clamped(self.layout().clone(), probs)
    }

    /// `P̂(w) + D̂(θ)`; nonnegative up to round-off and zero at the optimum.
    pub fn duality_gap(&self, w: &PrimalVector, theta: &DualPoint) -> f64 {
        self.primal_objective(w) + self.dual_objective(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{beta_max, entropy, log_partition, soft_threshold};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> CorrectedFeatureSet {
        let mut blocks = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let q = rng.random_range(2..5);
            let y = rng.random_range(0..q);
            let mut a = Array2::zeros((d, q));
            for ((_, c), v) in a.indexed_iter_mut() {
                if c != y {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            blocks.push(a);
            labels.push(y);
        }
        CorrectedFeatureSet::from_dense(&blocks, &labels).unwrap()
    }

    fn random_interior(rng: &mut ChaCha8Rng, layout: &Arc<BlockLayout>) -> DualPoint {
        let blocks: Vec<_> = layout
            .sizes()
            .iter()
            .map(|&q| {
                let raw: Vec<f64> = (0..q).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                Array1::from(raw[..q - 1].iter().map(|r| r / s).collect::<Vec<_>>())
            })
            .collect();
        DualPoint::from_blocks(layout.clone(), &blocks).unwrap()
    }

    #[test]
    fn primal_objective_at_zero_is_mean_log_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_data(&mut rng, 6, 4);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, 0.3).unwrap());
        let expected =
            data.sizes().iter().map(|&q| (q as f64).ln()).sum::<f64>() / data.n_samples() as f64;
        let got = view.primal_objective(&PrimalVector::zeros(4));
        assert!((got - expected).abs() < 1e-14);

        let single = CorrectedFeatureSet::from_dense(&[array![[0.0, 1.0]]], &[0]).unwrap();
        let v = ProblemView::new(&single, Hyperparams::new(1.0, 1.0).unwrap());
        assert!((v.primal_objective(&PrimalVector::zeros(1)) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn objectives_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let data = random_data(&mut rng, 5, 3);
            let params = Hyperparams::new(0.7, 0.2).unwrap();
            let view = ProblemView::new(&data, params);
            let w = Array1::from((0..3).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            let n = data.n_samples() as f64;

            let mut loss = 0.0;
            for i in 0..data.n_samples() {
                loss += log_partition((-data.block(i).t().dot(&w)).view());
            }
            let primal = loss / n
                + params.beta * (0.5 * params.alpha * w.dot(&w) + w.iter().map(|x| x.abs()).sum::<f64>());
            let got = view.primal_objective(&PrimalVector(w.clone()));
            assert!((got - primal).abs() < 1e-12);

            let theta = random_interior(&mut rng, data.layout());
            let mut v = Array1::zeros(3);
            let mut ent = 0.0;
            for i in 0..data.n_samples() {
                v += &crate::model::affine_compose(data.block(i).view(), theta.block(i));
                ent += entropy(theta.block(i));
            }
            v /= n;
            let st = soft_threshold(v.view(), params.beta);
            let dual = st.dot(&st) / (2.0 * params.alpha * params.beta) - ent / n;
            assert!((view.dual_objective(&theta) - dual).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_at_uniform_above_beta_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_data(&mut rng, 7, 5);
        let bmax = beta_max(&data);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, bmax * 1.0001).unwrap());
        let theta = DualPoint::uniform(data.layout().clone());
        let expected =
            -data.sizes().iter().map(|&q| (q as f64).ln()).sum::<f64>() / data.n_samples() as f64;
        assert!((view.dual_objective(&theta) - expected).abs() < 1e-14);
        assert!(view.dual_gradient(&theta).values().iter().all(|g| g.abs() < 1e-15));
        assert_eq!(view.kkt_primal_from_dual(&theta).max_abs(), 0.0);
        let gap = view.duality_gap(&PrimalVector::zeros(5), &theta);
        assert!(gap.abs() < 1e-14);
    }

    #[test]
    fn kkt_dual_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_data(&mut rng, 4, 3);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, 0.1).unwrap());
        let t = view.kkt_dual_from_primal(&PrimalVector::zeros(3));
        assert_eq!(t.max_deviation_from_uniform(), 0.0);

        // -Aᵀw = (0, log 3) → block (1/4).
        let single = CorrectedFeatureSet::from_dense(&[array![[0.0, -(3f64.ln())]]], &[0]).unwrap();
        let v = ProblemView::new(&single, Hyperparams::new(1.0, 1.0).unwrap());
        let t = v.kkt_dual_from_primal(&PrimalVector::from(vec![1.0]));
        assert!((t.block(0)[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weak_duality_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let data = random_data(&mut rng, 6, 4);
            let view = ProblemView::new(&data, Hyperparams::new(0.5, 0.05).unwrap());
            let w = PrimalVector::from((0..4).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>());
            let theta = random_interior(&mut rng, data.layout());
            assert!(view.duality_gap(&w, &theta) >= -1e-10);
        }
    }

    #[test]
    fn restrict_matches_pinned_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = random_data(&mut rng, 8, 6);
        let view = ProblemView::new(&data, Hyperparams::new(1.0, 0.1).unwrap());
        assert_eq!(view.restrict(&[]).unwrap().active(), view.active());

        let screened = [1, 4];
        let narrow = view.restrict(&screened).unwrap();
        assert_eq!(narrow.active().surviving(), &[0, 2, 3, 5]);
        let mut w = Array1::from((0..6).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        for &j in &screened {
            w[j] = 0.0;
        }
        let full = view.primal_objective(&PrimalVector(w.clone()));
        let restricted = narrow.primal_objective(&narrow.restrict_full(&w));
        assert!((full - restricted).abs() < 1e-14);
        assert_eq!(narrow.embed(&narrow.restrict_full(&w)), w);

        let all = view.restrict(&(0..6).collect::<Vec<_>>()).unwrap();
        let expected =
            data.sizes().iter().map(|&q| (q as f64).ln()).sum::<f64>() / data.n_samples() as f64;
        assert!((all.primal_objective(&PrimalVector::zeros(0)) - expected).abs() < 1e-14);

        assert!(narrow.restrict(&[1]).is_err());
        assert!(view.restrict(&[6]).is_err());
        assert!(view.restrict(&[2, 2]).is_err());

        let twice = narrow.restrict(&[3]).unwrap();
        let w_narrow = narrow.restrict_full(&w);
        assert_eq!(narrow.project_onto(&twice, &w_narrow).0.to_vec(), vec![w[0], w[2], w[5]]);
    }
}
