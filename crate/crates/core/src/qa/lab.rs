//! Numerical check of the Newton-style refinement update on concave
//! quadratics `Q(x) = (x - x*)^T C (x - x*)` with `C` negative definite.
//!
//! The update uses the learning rate `step`, which is unrelated to the
//! relevance weight `alpha` in [`super::config::Weights`] even though both
//! are conventionally written with the same letter.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

pub const MAX_DIM: usize = 16;
const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabError {
    #[error("dimension {0} is outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("curvature is {rows}x{cols}, expected {dim}x{dim}")]
    Shape { rows: usize, cols: usize, dim: usize },
    #[error("curvature is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("curvature is not negative definite")]
    NotNegativeDefinite,
    #[error("step {0} is outside (0, 1]")]
    Step(f64),
    #[error("hessian is singular")]
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    optimum: DVector<f64>,
    curvature: DMatrix<f64>,
    step: f64,
}

impl QuadraticObjective {
    pub fn new(optimum: DVector<f64>, curvature: DMatrix<f64>, step: f64) -> Result<Self, LabError> {
        let dim = optimum.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::Dimension(dim));
        }
        if curvature.shape() != (dim, dim) {
            return Err(LabError::Shape {
                rows: curvature.nrows(),
                cols: curvature.ncols(),
                dim,
            });
        }
        let asym = (&curvature - curvature.transpose()).abs().max();
        if asym > SYMMETRY_TOLERANCE {
            return Err(LabError::Asymmetric(asym));
        }
        if (-&curvature).cholesky().is_none() {
            return Err(LabError::NotNegativeDefinite);
        }
        if !(step > 0.0 && step <= 1.0) {
            return Err(LabError::Step(step));
        }
        Ok(Self {
            optimum,
            curvature,
            step,
        })
    }

    pub fn dim(&self) -> usize {
        self.optimum.len()
    }

    pub fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    pub fn curvature(&self) -> &DMatrix<f64> {
        &self.curvature
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.optimum;
        d.dot(&(&self.curvature * &d))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.curvature * (x - &self.optimum)) * 2.0
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        &self.curvature * 2.0
    }

    /// `x - step * H^-1 grad(x)`.
    pub fn newton_step(&self, x: &DVector<f64>) -> Result<DVector<f64>, LabError> {
        let dir = self.hessian().lu().solve(&self.gradient(x)).ok_or(LabError::Singular)?;
        Ok(x - dir * self.step)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start and after every step.
    pub trajectory: Vec<f64>,
    pub point: Vec<f64>,
}

impl Convergence {
    pub fn is_non_decreasing(&self) -> bool {
        self.trajectory.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Iterates Newton steps until the iterate is within `tol` of the optimum
/// or `max_iter` steps were taken.
pub fn converge(obj: &QuadraticObjective, start: &DVector<f64>, tol: f64, max_iter: usize) -> Result<Convergence, LabError> {
    let mut x = start.clone();
    let mut trajectory = vec![obj.value(&x)];
    let mut iterations = 0;
    while (&x - obj.optimum()).norm() >= tol && iterations < max_iter {
        x = obj.newton_step(&x)?;
        trajectory.push(obj.value(&x));
        iterations += 1;
    }
    Ok(Convergence {
        iterations,
        converged: (&x - obj.optimum()).norm() < tol,
        trajectory,
        point: x.iter().copied().collect(),
    })
}

/// A random objective with eigenvalues in [-4, -0.25] and optimum in
/// [-5, 5]^dim, plus a start point in [-10, 10]^dim.
pub fn random_objective<R: Rng>(dim: usize, step: f64, rng: &mut R) -> Result<(QuadraticObjective, DVector<f64>), LabError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(LabError::Dimension(dim));
    }
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let eig = DVector::from_fn(dim, |_, _| rng.random_range(-4.0..-0.25));
    let c = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let optimum = DVector::from_fn(dim, |_, _| rng.random_range(-5.0..5.0));
    let start = DVector::from_fn(dim, |_, _| rng.random_range(-10.0..10.0));
    Ok((QuadraticObjective::new(optimum, c, step)?, start))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(step: f64) -> QuadraticObjective {
        QuadraticObjective::new(DVector::from_element(1, 3.0), DMatrix::from_element(1, 1, -1.0), step).unwrap()
    }

    #[test]
    fn newton_examples() {
        let x0 = DVector::from_element(1, 0.0);
        assert_eq!(one_d(1.0).newton_step(&x0).unwrap()[0], 3.0);
        assert_eq!(one_d(0.5).newton_step(&x0).unwrap()[0], 1.5);
        let at = DVector::from_element(1, 3.0);
        assert_eq!(one_d(0.5).newton_step(&at).unwrap()[0], 3.0);
    }

    #[test]
    fn rejects_bad_objectives() {
        let o = DVector::from_vec(vec![0.0, 0.0]);
        let indefinite = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(QuadraticObjective::new(o.clone(), indefinite, 1.0), Err(LabError::NotNegativeDefinite));
        let asym = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -1.0]);
        assert!(matches!(QuadraticObjective::new(o.clone(), asym, 1.0), Err(LabError::Asymmetric(_))));
        let c = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert_eq!(QuadraticObjective::new(o.clone(), c.clone(), 0.0), Err(LabError::Step(0.0)));
        assert_eq!(QuadraticObjective::new(o, c, 1.5), Err(LabError::Step(1.5)));
        assert_eq!(
            QuadraticObjective::new(DVector::zeros(0), DMatrix::zeros(0, 0), 1.0),
            Err(LabError::Dimension(0))
        );
    }

    #[test]
    fn full_step_converges_in_one() {
        let r = converge(&one_d(1.0), &DVector::from_element(1, -7.0), 1e-6, 50).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(r.trajectory, vec![-100.0, 0.0]);
    }
}
