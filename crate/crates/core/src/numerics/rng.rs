use super::tensor::Tensor;
use crate::{Error, Result};
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Covariance of a Gaussian draw: identity or a per-component diagonal.
/// General covariances are out of scope.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    Identity,
    Diagonal(Vec<f64>),
}

/// Seeded generator. The same seed always yields the same stream,
/// bit for bit, which is what makes every run in this crate replayable.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child generator with an independent stream, derived from this
    /// generator's seed and a label so sibling streams never collide.
    pub fn derive(&self, label: &str) -> Rng {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for b in label.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Rng::new(h)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }

    pub fn uniform_tensor(&mut self, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.inner.gen_range(lo..hi)).collect();
        Tensor::new(shape, data).expect("shape/data length agree by construction")
    }

    pub fn standard_normal(&mut self, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.inner.sample::<f64, _>(StandardNormal)).collect();
        Tensor::new(shape, data).expect("shape/data length agree by construction")
    }

    /// Draws `N(0, Σ)` with Σ identity or diagonal; the diagonal length must
    /// divide into the trailing dimension layout, i.e. equal the row width.
    pub fn sample_gaussian(&mut self, shape: Vec<usize>, sigma: &CovarianceSpec) -> Result<Tensor> {
        match sigma {
            CovarianceSpec::Identity => Ok(self.standard_normal(shape)),
            CovarianceSpec::Diagonal(diag) => {
                let width = *shape.last().ok_or_else(|| {
                    Error::InvalidArgument("sample_gaussian: empty shape".into())
                })?;
                if diag.len() != width {
                    return Err(Error::ShapeMismatch {
                        op: "sample_gaussian",
                        detail: format!(
                            "diagonal has {} entries, rows have {}",
                            diag.len(),
                            width
                        ),
                    });
                }
                if diag.iter().any(|&d| d < 0.0) {
                    return Err(Error::InvalidArgument(
                        "sample_gaussian: negative variance".into(),
                    ));
                }
                let scales: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
                let mut t = self.standard_normal(shape);
                let w = scales.len();
                for (i, v) in t.data_mut().iter_mut().enumerate() {
                    *v *= scales[i % w];
                }
                Ok(t)
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.inner.gen_range(0..=i);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn choose_k(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = self.inner.gen_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
