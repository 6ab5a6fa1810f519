use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use super::SmoothFunction;

/// Hock–Schittkowski problem 50:
/// `(x1-x2)² + (x2-x3)² + (x3-x4)⁴ + (x4-x5)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hs50;

impl SmoothFunction for Hs50 {
    fn dim(&self) -> usize {
        5
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (x[0] - x[1]).powi(2)
            + (x[1] - x[2]).powi(2)
            + (x[2] - x[3]).powi(4)
            + (x[3] - x[4]).powi(2)
    }

    fn add_gradient(&self, x: &DVector<f64>, scale: f64, out: &mut DVector<f64>) {
        let t1 = 2.0 * (x[0] - x[1]);
        let t2 = 2.0 * (x[1] - x[2]);
        let t3 = 4.0 * (x[2] - x[3]).powi(3);
        let t4 = 2.0 * (x[3] - x[4]);
        out[0] += scale * t1;
        out[1] += scale * (t2 - t1);
        out[2] += scale * (t3 - t2);
        out[3] += scale * (t4 - t3);
        out[4] -= scale * t4;
    }
}

/// HS50 objective, its constraint data `(A, b)` and the standard start.
pub fn hs50() -> (Hs50, DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let a = dmatrix![
        1.0, 2.0, 3.0, 0.0, 0.0;
        0.0, 1.0, 2.0, 3.0, 0.0;
        0.0, 0.0, 1.0, 2.0, 3.0
    ];
    let b = dvector![6.0, 6.0, 6.0];
    let x0 = dvector![35.0, -31.0, 11.0, 5.0, -5.0];
    (Hs50, a, b, x0)
}
