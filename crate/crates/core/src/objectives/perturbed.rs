use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::{FiniteSumObjective, SmoothFunction};

/// `f(x) = f̃(x) + (Σ_i ξ_i²) ‖x‖²` written as the mean of
/// `f_j(x) = f̃(x) + N ξ_j² ‖x‖²`.
pub struct PerturbedProblem {
    base: Box<dyn SmoothFunction>,
    xi_sq: Vec<f64>,
    xi_sq_sum: f64,
    sigma: f64,
}

impl PerturbedProblem {
    /// Draws `ξ_j ~ N(0, σ²)` once from `seed`.
    pub fn new(base: Box<dyn SmoothFunction>, n_components: usize, sigma: f64, seed: u64) -> Self {
        assert!(n_components > 0);
        let normal = Normal::new(0.0, sigma).expect("sigma must be finite and nonnegative");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi_sq: Vec<f64> = (0..n_components)
            .map(|_| {
                let xi: f64 = rng.sample(normal);
                xi * xi
            })
            .collect();
        Self::with_noise(base, xi_sq, sigma)
    }

    pub fn with_noise(base: Box<dyn SmoothFunction>, xi_sq: Vec<f64>, sigma: f64) -> Self {
        assert!(xi_sq.iter().all(|&v| v >= 0.0));
        let xi_sq_sum = xi_sq.iter().sum();
        Self {
            base,
            xi_sq,
            xi_sq_sum,
            sigma,
        }
    }

    pub fn xi_sq(&self) -> &[f64] {
        &self.xi_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn base(&self) -> &dyn SmoothFunction {
        self.base.as_ref()
    }
}

impl FiniteSumObjective for PerturbedProblem {
    fn num_components(&self) -> usize {
        self.xi_sq.len()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn component_value(&self, j: usize, x: &DVector<f64>) -> f64 {
        self.base.value(x) + self.xi_sq.len() as f64 * self.xi_sq[j] * x.norm_squared()
    }

    fn add_component_gradient(
        &self,
        j: usize,
        x: &DVector<f64>,
        scale: f64,
        out: &mut DVector<f64>,
    ) {
        self.base.add_gradient(x, scale, out);
        out.axpy(
            scale * 2.0 * self.xi_sq.len() as f64 * self.xi_sq[j],
            x,
            1.0,
        );
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.base.value(x) + self.xi_sq_sum * x.norm_squared()
    }

    fn full_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = self.base.gradient(x);
        g.axpy(2.0 * self.xi_sq_sum, x, 1.0);
        g
    }
}

/// A deterministic function viewed as a one-component finite sum.
pub struct SingleComponent(pub Box<dyn SmoothFunction>);

impl FiniteSumObjective for SingleComponent {
    fn num_components(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn component_value(&self, _j: usize, x: &DVector<f64>) -> f64 {
        self.0.value(x)
    }

    fn add_component_gradient(
        &self,
        _j: usize,
        x: &DVector<f64>,
        scale: f64,
        out: &mut DVector<f64>,
    ) {
        self.0.add_gradient(x, scale, out)
    }
}
