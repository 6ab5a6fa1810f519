//! Finite-sum objectives `f(x) = (1/N) Σ_j f_j(x)`.

mod hs50;
mod logistic;
mod perturbed;
mod quadratic;

pub use hs50::{hs50, Hs50};
pub use logistic::{LogisticError, LogisticProblem};
pub use perturbed::{PerturbedProblem, SingleComponent};
pub use quadratic::{quadratic_oracle, QuadraticFunction, QuadraticOracle, QuadraticProblem};

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("gradient has a non-finite component")]
    NonFiniteGradient,
    #[error("objective value is not finite")]
    NonFiniteValue,
}

/// A sum of `N` smooth components over `R^n`.
///
/// Implementors supply per-component value and gradient; the full value and
/// gradient default to component means and may be overridden when a closed
/// form is cheaper.
pub trait FiniteSumObjective: Send + Sync {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    fn component_value(&self, j: usize, x: &DVector<f64>) -> f64;

    /// `out += scale * ∇f_j(x)`.
    fn add_component_gradient(
        &self,
        j: usize,
        x: &DVector<f64>,
        scale: f64,
        out: &mut DVector<f64>,
    );

    fn component_gradient(&self, j: usize, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        self.add_component_gradient(j, x, 1.0, &mut g);
        g
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let n = self.num_components();
        (0..n).map(|j| self.component_value(j, x)).sum::<f64>() / n as f64
    }

    fn full_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.num_components();
        let mut g = DVector::zeros(self.dim());
        for j in 0..n {
            self.add_component_gradient(j, x, 1.0, &mut g);
        }
        g / n as f64
    }
}

impl<T: FiniteSumObjective + ?Sized> FiniteSumObjective for Box<T> {
    fn num_components(&self) -> usize {
        (**self).num_components()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn component_value(&self, j: usize, x: &DVector<f64>) -> f64 {
        (**self).component_value(j, x)
    }
    fn add_component_gradient(
        &self,
        j: usize,
        x: &DVector<f64>,
        scale: f64,
        out: &mut DVector<f64>,
    ) {
        (**self).add_component_gradient(j, x, scale, out)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (**self).value(x)
    }
    fn full_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).full_gradient(x)
    }
}

/// A smooth deterministic function with gradient, used as the base `f̃` of
/// perturbed problems.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    /// `out += scale * ∇f̃(x)`.
    fn add_gradient(&self, x: &DVector<f64>, scale: f64, out: &mut DVector<f64>);

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        self.add_gradient(x, 1.0, &mut g);
        g
    }
}
