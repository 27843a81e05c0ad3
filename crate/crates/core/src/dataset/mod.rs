//! Synthetic multiclass data, the multiclass feature map and dataset files.

mod io;

pub use io::{read_binary, read_csv, write_binary, write_csv, BINARY_MAGIC, BINARY_VERSION};

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CorrectedFeatureSet;

/// Labeled inputs. Labels are 0-based here and 1-based in files.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    x: Array2<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl RawDataset {
    pub fn new(x: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidData("class count must be positive".into()));
        }
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: x.nrows(),
                found: labels.len(),
            });
        }
        if let Some(row) = labels.iter().position(|&y| y >= classes) {
            return Err(Error::LabelOutOfRange {
                row,
                label: labels[row] as i64 + 1,
                classes,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite input".into()));
        }
        Ok(RawDataset { x, labels, classes })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.x.ncols()
    }
}

/// Parameters of the synthetic generator.
///
/// Inputs are `x = [x₁; x₂]`. The first part holds one block of
/// [`block_width`](Self::block_width) coordinates per class: a sample of
/// class `k` draws block `k` from `N(mu, var)` and every other coordinate of
/// `x₁` from `N(0, 1)`. Each coordinate of `x₂` is `N(0, 1)` with
/// probability `eta` and zero otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub p: usize,
    pub classes: usize,
    pub eta: f64,
    pub mu: f64,
    pub var: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n: 200,
            p: 50,
            classes: 4,
            eta: 0.2,
            mu: 1.5,
            var: 0.75,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Coordinates per class block: `max(1, floor(0.02 p / C))`.
    pub fn block_width(&self) -> usize {
        ((self.p as f64 * 0.02 / self.classes as f64).floor() as usize).max(1)
    }

    /// Length of `x₁`: `max(C · width, floor(0.02 p))`. Coordinates past the
    /// class blocks are plain standard normal.
    pub fn informative_len(&self) -> usize {
        (self.classes * self.block_width()).max((self.p as f64 * 0.02).floor() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::GeneratorConfig(m));
        if self.n == 0 || self.p == 0 || self.classes == 0 {
            return fail("n, p and C must be positive".into());
        }
        if !self.n.is_multiple_of(self.classes) {
            return fail(format!("C = {} does not divide n = {}", self.classes, self.n));
        }
        if self.informative_len() > self.p {
            return fail(format!(
                "p = {} is too small for {} class blocks",
                self.p, self.classes
            ));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return fail(format!("eta = {} is not a probability", self.eta));
        }
        if !(self.var > 0.0 && self.var.is_finite()) || !self.mu.is_finite() {
            return fail("mu must be finite and var positive".into());
        }
        Ok(())
    }
}

/// Draws a dataset. Sample `i` has label `i mod C` and its own ChaCha8
/// stream, so the output does not depend on generation order.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<RawDataset> {
    cfg.validate()?;
    let width = cfg.block_width();
    let head = cfg.informative_len();
    let own = Normal::new(cfg.mu, cfg.var.sqrt()).expect("validated variance");
    let mut x = Array2::zeros((cfg.n, cfg.p));
    let mut labels = Vec::with_capacity(cfg.n);
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let k = i % cfg.classes;
        let own_block = k * width..(k + 1) * width;
        for (j, v) in row.iter_mut().enumerate() {
            *v = if own_block.contains(&j) {
                own.sample(&mut rng)
            } else if j < head || rng.random_bool(cfg.eta) {
                StandardNormal.sample(&mut rng)
            } else {
                0.0
            };
        }
        labels.push(k);
    }
    RawDataset::new(x, labels, cfg.classes)
}

/// `F(x, y)`: `x` placed in block `y` of a length `p · C` vector.
pub fn multiclass_feature_map(x: ArrayView1<'_, f64>, y: usize, classes: usize) -> Array1<f64> {
    assert!(y < classes, "label {y} out of range for {classes} classes");
    let p = x.len();
    let mut f = Array1::zeros(p * classes);
    f.slice_mut(ndarray::s![y * p..(y + 1) * p]).assign(&x);
    f
}

/// `A_i` with column `y` equal to `F(x_i, y_i) - F(x_i, y)`, columns in label
/// order.
pub fn build_corrected_features(raw: &RawDataset) -> Result<CorrectedFeatureSet> {
    let (n, p, c) = (raw.n_samples(), raw.n_inputs(), raw.classes());
    if c < 2 {
        return Err(Error::InvalidData("at least two classes are needed".into()));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p * c];
    for (i, x) in raw.x().rows().into_iter().enumerate() {
        let yi = raw.labels()[i];
        let base = i * c;
        for (t, &v) in x.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for y in (0..c).filter(|&y| y != yi) {
                rows[yi * p + t].push((base + y, v));
                rows[y * p + t].push((base + y, -v));
            }
        }
    }
    CorrectedFeatureSet::from_sparse_rows(vec![c; n], raw.labels().to_vec(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyperparams, PrimalVector, ProblemView};
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn feature_map_examples() {
        let x = array![1.0, 2.0];
        assert_eq!(multiclass_feature_map(x.view(), 1, 3), array![0.0, 0.0, 1.0, 2.0, 0.0, 0.0]);
        assert_eq!(multiclass_feature_map(x.view(), 0, 1), x);
    }

    proptest! {
        #[test]
        fn feature_map_inner_products(
            x in prop::collection::vec(-3.0f64..3.0, 1..6), y in 0usize..4, y2 in 0usize..4
        ) {
            let x = Array1::from(x);
            let a = multiclass_feature_map(x.view(), y, 4);
            let b = multiclass_feature_map(x.view(), y2, 4);
            let expected = if y == y2 { x.dot(&x) } else { 0.0 };
            prop_assert!((a.dot(&b) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn two_class_corrected_columns() {
        let raw = RawDataset::new(array![[1.0]], vec![0], 2).unwrap();
        let data = build_corrected_features(&raw).unwrap();
        assert_eq!(data.block(0), array![[0.0, 1.0], [0.0, -1.0]]);
    }

    #[test]
    fn corrected_feature_identity() {
        let cfg = GeneratorConfig {
            n: 12,
            p: 100,
            classes: 3,
            ..GeneratorConfig::default()
        };
        let raw = generate_synthetic(&cfg).unwrap();
        let data = build_corrected_features(&raw).unwrap();
        for i in 0..12 {
            let x = raw.x().row(i);
            let yi = raw.labels()[i];
            let a = data.block(i);
            for y in 0..3 {
                let lhs = &a.column(y) + &multiclass_feature_map(x, y, 3);
                assert_eq!(lhs, multiclass_feature_map(x, yi, 3));
            }
        }
        let view = ProblemView::new(&data, Hyperparams::new(1.0, 0.1).unwrap());
        let p0 = view.primal_objective(&PrimalVector::zeros(300));
        assert!((p0 - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn generator_is_deterministic_and_shaped() {
        let cfg = GeneratorConfig {
            seed: 9,
            ..GeneratorConfig::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, generate_synthetic(&cfg).unwrap());
        assert_ne!(a, generate_synthetic(&GeneratorConfig { seed: 10, ..cfg.clone() }).unwrap());
        assert_eq!(a.x().dim(), (200, 50));
        for k in 0..4 {
            assert_eq!(a.labels().iter().filter(|&&y| y == k).count(), 50);
        }
        let dense = GeneratorConfig { eta: 0.0, ..cfg };
        let b = generate_synthetic(&dense).unwrap();
        let head = dense.informative_len();
        assert!(b.x().rows().into_iter().all(|r| r.iter().skip(head).all(|&v| v == 0.0)));
    }

    #[test]
    fn generator_statistics() {
        let cfg = GeneratorConfig {
            n: 100_000,
            p: 200,
            classes: 4,
            seed: 3,
            ..GeneratorConfig::default()
        };
        let raw = generate_synthetic(&cfg).unwrap();
        let w = cfg.block_width();
        let head = cfg.informative_len();
        let (mut own, mut count) = (0.0, 0usize);
        let (mut nonzero, mut draws) = (0usize, 0usize);
        for (i, row) in raw.x().rows().into_iter().enumerate() {
            if raw.labels()[i] == 1 {
                own += row.iter().skip(w).take(w).sum::<f64>();
                count += w;
            }
            nonzero += row.iter().skip(head).filter(|&&v| v != 0.0).count();
            draws += cfg.p - head;
        }
        assert!((own / count as f64 - 1.5).abs() < 0.02);
        assert!(draws >= 1_000_000);
        assert!((nonzero as f64 / draws as f64 - 0.2).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = GeneratorConfig::default();
        for bad in [
            GeneratorConfig { n: 201, ..base.clone() },
            GeneratorConfig { eta: 1.5, ..base.clone() },
            GeneratorConfig { p: 3, ..base.clone() },
            GeneratorConfig { var: 0.0, ..base.clone() },
        ] {
            assert!(matches!(generate_synthetic(&bad), Err(Error::GeneratorConfig(_))));
        }
        assert_eq!(base.block_width(), 1);
        assert_eq!(base.informative_len(), 4);
    }
}
