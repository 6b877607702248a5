//! Least-squares regression and the masked-coefficient objective
//! `g(w) = -||A (x* . w) - b||^2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::path::check_mask;

/// A design `A`, targets `b` and the minimum-norm least-squares solution `x*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegProblem {
    design: DMatrix<f64>,
    targets: DVector<f64>,
    solution: DVector<f64>,
}

impl LinRegProblem {
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn solution(&self) -> &DVector<f64> {
        &self.solution
    }

    pub fn n_features(&self) -> usize {
        self.design.ncols()
    }

    /// `||A^T (A x* - b)||_inf`.
    pub fn normal_residual(&self) -> f64 {
        let r = &self.design * &self.solution - &self.targets;
        (self.design.transpose() * r).amax()
    }
}

/// Solves `min ||A x - b||^2` through a singular value decomposition,
/// returning the minimum-norm solution when `A` is rank deficient.
pub fn linreg_solve(design: DMatrix<f64>, targets: DVector<f64>) -> Result<LinRegProblem> {
    let (m, n) = design.shape();
    if m == 0 || n == 0 {
        return Err(Error::Empty(format!("design matrix is {m}x{n}")));
    }
    if targets.len() != m {
        return Err(Error::dims("regression targets", m, targets.len()));
    }
    let svd = design.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let cutoff = largest * (m.max(n) as f64) * f64::EPSILON;
    let solution = if largest == 0.0 {
        DVector::zeros(n)
    } else {
        svd.solve(&targets, cutoff)
            .map_err(|e| Error::InvalidConfig(format!("least-squares solve failed: {e}")))?
    };
    Ok(LinRegProblem {
        design,
        targets,
        solution,
    })
}

/// Row-major convenience constructor.
pub fn linreg_from_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<LinRegProblem> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::dims("design row", n, bad.len()));
    }
    let design = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    linreg_solve(design, DVector::from_column_slice(targets))
}

/// `g(w) = -||A (x* . w) - b||^2` with gradient
/// `-2 x* . A^T (A (x* . w) - b)`.
#[derive(Debug, Clone)]
pub struct LinRegObjective {
    problem: LinRegProblem,
}

impl LinRegObjective {
    pub fn new(problem: LinRegProblem) -> Self {
        Self { problem }
    }

    pub fn problem(&self) -> &LinRegProblem {
        &self.problem
    }
}

pub fn linreg_objective(problem: LinRegProblem) -> LinRegObjective {
    LinRegObjective::new(problem)
}

impl Objective for LinRegObjective {
    fn dim(&self) -> usize {
        self.problem.n_features()
    }

    fn value_and_gradient(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_mask(w, self.dim())?;
        let p = &self.problem;
        let coef = DVector::from_iterator(w.len(), p.solution.iter().zip(w).map(|(x, wi)| x * wi));
        let residual = &p.design * coef - &p.targets;
        let value = -residual.norm_squared();
        let back = p.design.transpose() * residual;
        let grad = back.iter().zip(p.solution.iter()).map(|(r, x)| -2.0 * x * r).collect();
        Ok((value, grad))
    }

    fn description(&self) -> String {
        let (m, n) = self.problem.design.shape();
        format!("linear regression ({m}x{n})")
    }
}
