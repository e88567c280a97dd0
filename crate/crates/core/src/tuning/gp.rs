//! Fixed-hyperparameter Gaussian process used as the optimiser's surrogate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const LENGTH_SCALE: f64 = 1.0;
pub const SIGNAL_VARIANCE: f64 = 1.0;
pub const NOISE_VARIANCE: f64 = 1e-6;

/// Matérn covariance with smoothness 5/2.
pub fn matern52(a: &[f64], b: &[f64]) -> f64 {
    let r = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
        / LENGTH_SCALE;
    let s5r = 5f64.sqrt() * r;
    SIGNAL_VARIANCE * (1.0 + s5r + 5.0 * r * r / 3.0) * (-s5r).exp()
}

/// Zero-mean GP posterior over points in the unit cube.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    points: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

pub fn gp_fit(points: &[Vec<f64>], targets: &[f64]) -> Result<GpPosterior> {
    if points.is_empty() || points.len() != targets.len() {
        return Err(Error::InvalidParam(format!(
            "gp_fit needs matching nonempty inputs, got {} points and {} targets",
            points.len(),
            targets.len()
        )));
    }
    let n = points.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern52(&points[i], &points[j]) + if i == j { NOISE_VARIANCE } else { 0.0 }
    });
    let chol = Cholesky::new(k).ok_or_else(|| Error::InvalidParam("kernel matrix not positive definite".into()))?;
    let alpha = chol.solve(&DVector::from_column_slice(targets));
    Ok(GpPosterior {
        points: points.to_vec(),
        chol,
        alpha,
    })
}

impl GpPosterior {
    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let kx = DVector::from_iterator(self.points.len(), self.points.iter().map(|p| matern52(p, x)));
        let mean = kx.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&kx)
            .expect("cholesky factor is invertible");
        let var = (matern52(x, x) - v.dot(&v)).max(0.0);
        (mean, var)
    }

    pub fn ucb(&self, x: &[f64], kappa: f64) -> f64 {
        let (mean, var) = self.predict(x);
        mean + kappa * var.sqrt()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}
