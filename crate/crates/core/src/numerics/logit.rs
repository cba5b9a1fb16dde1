//! L2-regularised binary logistic regression fitted by damped Newton (IRLS).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_L2_LAMBDA: f64 = 1e-4;

/// Hessians with a condition estimate above this are treated as singular.
const MAX_CONDITION: f64 = 1e14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_lambda: f64,
}

impl LogitModel {
    pub fn new(weights: Vec<f64>, intercept: f64, l2_lambda: f64) -> Result<Self> {
        if weights.iter().chain([&intercept, &l2_lambda]).any(|v| !v.is_finite()) {
            return Err(Error::domain("logit model entries must be finite"));
        }
        if l2_lambda < 0.0 {
            return Err(Error::domain(format!("negative l2 lambda {l2_lambda}")));
        }
        Ok(LogitModel {
            weights,
            intercept,
            l2_lambda,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        LogitModel {
            weights: vec![0.0; dim],
            intercept: 0.0,
            l2_lambda: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Linear predictor `intercept + w . features`, unclipped.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        logit_score(self, features)
    }

    pub fn probability(&self, features: &[f64]) -> Result<f64> {
        self.score(features).map(sigmoid)
    }
}

pub fn logit_score(model: &LogitModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.weights.len() {
        return Err(Error::domain(format!(
            "feature dimension {} does not match model dimension {}",
            features.len(),
            model.weights.len()
        )));
    }
    Ok(model.intercept
        + model
            .weights
            .iter()
            .zip(features)
            .map(|(w, f)| w * f)
            .sum::<f64>())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Clone, Debug)]
pub struct LogitOptions {
    pub l2_lambda: f64,
    pub fit_intercept: bool,
    pub max_iter: usize,
    /// Stop once the gradient max-norm falls to this value.
    pub grad_tol: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions {
            l2_lambda: DEFAULT_L2_LAMBDA,
            fit_intercept: true,
            max_iter: 100,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LogitFit {
    pub model: LogitModel,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_max_norm: f64,
    /// Penalised negative log-likelihood at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Penalised negative log-likelihood of a fixed data set.
///
/// Parameters are laid out as `[intercept, w_1, .., w_d]` when the intercept is
/// fitted and `[w_1, .., w_d]` otherwise. The intercept is never penalised.
pub struct LogitProblem<'a> {
    design: DMatrix<f64>,
    labels: &'a [f64],
    l2_lambda: f64,
    fit_intercept: bool,
}

impl<'a> LogitProblem<'a> {
    pub fn new(
        features: &DMatrix<f64>,
        labels: &'a [f64],
        l2_lambda: f64,
        fit_intercept: bool,
    ) -> Result<Self> {
        let (n, d) = features.shape();
        if n == 0 {
            return Err(Error::domain("logistic fit needs at least one observation"));
        }
        if labels.len() != n {
            return Err(Error::domain(format!(
                "{} labels for {n} observations",
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite feature value"));
        }
        if let Some(y) = labels.iter().find(|y| **y != 0.0 && **y != 1.0) {
            return Err(Error::domain(format!("label {y} is not 0 or 1")));
        }
        if !l2_lambda.is_finite() || l2_lambda < 0.0 {
            return Err(Error::domain(format!("invalid l2 lambda {l2_lambda}")));
        }
        let design = if fit_intercept {
            let mut m = DMatrix::from_element(n, d + 1, 1.0);
            m.view_mut((0, 1), (n, d)).copy_from(features);
            m
        } else {
            features.clone()
        };
        Ok(LogitProblem {
            design,
            labels,
            l2_lambda,
            fit_intercept,
        })
    }

    pub fn n_params(&self) -> usize {
        self.design.ncols()
    }

    fn penalised(&self) -> std::ops::Range<usize> {
        let start = usize::from(self.fit_intercept);
        start..self.n_params()
    }

    fn linear(&self, params: &[f64]) -> DVector<f64> {
        &self.design * DVector::from_column_slice(params)
    }

    pub fn objective(&self, params: &[f64]) -> f64 {
        let eta = self.linear(params);
        let nll: f64 = eta
            .iter()
            .zip(self.labels)
            .map(|(z, y)| softplus(*z) - y * z)
            .sum();
        let ridge: f64 = params[self.penalised()].iter().map(|w| w * w).sum();
        nll + 0.5 * self.l2_lambda * ridge
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let eta = self.linear(params);
        let resid = DVector::from_iterator(
            eta.len(),
            eta.iter().zip(self.labels).map(|(z, y)| sigmoid(*z) - y),
        );
        let mut g = self.design.tr_mul(&resid);
        for j in self.penalised() {
            g[j] += self.l2_lambda * params[j];
        }
        g.as_slice().to_vec()
    }

    pub fn hessian(&self, params: &[f64]) -> DMatrix<f64> {
        let eta = self.linear(params);
        let mut weighted = self.design.clone();
        for (i, z) in eta.iter().enumerate() {
            let p = sigmoid(*z);
            let w = p * (1.0 - p);
            weighted.row_mut(i).scale_mut(w);
        }
        let mut h = self.design.tr_mul(&weighted);
        for j in self.penalised() {
            h[(j, j)] += self.l2_lambda;
        }
        h
    }

    fn to_model(&self, params: &[f64]) -> LogitModel {
        let (intercept, weights) = if self.fit_intercept {
            (params[0], params[1..].to_vec())
        } else {
            (0.0, params.to_vec())
        };
        LogitModel {
            weights,
            intercept,
            l2_lambda: self.l2_lambda,
        }
    }
}

/// Fits with default options and the given ridge strength.
pub fn fit_logit(features: &DMatrix<f64>, labels: &[f64], l2_lambda: f64) -> Result<LogitModel> {
    let opts = LogitOptions {
        l2_lambda,
        ..LogitOptions::default()
    };
    fit_logit_with(features, labels, &opts).map(|f| f.model)
}

pub fn fit_logit_with(
    features: &DMatrix<f64>,
    labels: &[f64],
    opts: &LogitOptions,
) -> Result<LogitFit> {
    let problem = LogitProblem::new(features, labels, opts.l2_lambda, opts.fit_intercept)?;
    let mut params = vec![0.0; problem.n_params()];
    let mut f = problem.objective(&params);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut gmax = f64::INFINITY;

    while iterations < opts.max_iter {
        let g = problem.gradient(&params);
        gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gmax <= opts.grad_tol {
            converged = true;
            break;
        }
        let h = problem.hessian(&params);
        let cond = condition_estimate(&h);
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::Numeric {
                message: format!("ill-conditioned logistic Hessian at iteration {iterations}"),
                condition: cond,
            });
        }
        let chol = h.cholesky().ok_or_else(|| Error::Numeric {
            message: "logistic Hessian is not positive definite".into(),
            condition: cond,
        })?;
        let step = chol.solve(&(-DVector::from_vec(g.clone())));
        let slope: f64 = step.iter().zip(&g).map(|(s, g)| s * g).sum();

        // Backtracking keeps the objective non-increasing.
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
            let fc = problem.objective(&cand);
            // Once the Newton decrement is at rounding level the objective can no
            // longer resolve progress; take the full step and let the gradient decide.
            let flat = t == 1.0 && -slope <= 1e-10 * (1.0 + f.abs());
            if fc <= f + 1e-4 * t * slope || flat {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((cand, fc)) => {
                params = cand;
                f = fc;
                trace.push(f);
            }
            // No representable decrease left: we are at the optimum to rounding.
            None => {
                converged = gmax <= opts.grad_tol.max(1e-6);
                break;
            }
        }
    }
    if !converged && iterations == opts.max_iter {
        let g = problem.gradient(&params);
        gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        converged = gmax <= opts.grad_tol;
    }

    Ok(LogitFit {
        model: problem.to_model(&params),
        iterations,
        converged,
        gradient_max_norm: gmax,
        objective_trace: trace,
    })
}

fn condition_estimate(h: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    let max = eig.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    #[test]
    fn table_one_score() {
        let m = LogitModel::new(vec![-8.17, 5.77], 0.0, 0.0).unwrap();
        // the exactly rounded dot product of these binary inputs is one ulp below 4.953
        let s = m.score(&[0.1, 1.0]).unwrap();
        assert!((s - 4.953).abs() <= 4.953 * f64::EPSILON, "{s}");
        let s = m.score(&[0.5, 0.0]).unwrap();
        assert!((s - -4.085).abs() < 1e-12);
        assert!(m.score(&[1.0]).is_err());
        assert_eq!(LogitModel::zeros(2).score(&[3.0, -7.0]).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_labels_give_zero_model() {
        let x = DMatrix::zeros(6, 1);
        let y = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let m = fit_logit(&x, &y, 1e-4).unwrap();
        assert!(m.intercept.abs() < 1e-10);
        assert!(m.weights[0].abs() < 1e-10);
    }

    #[test]
    fn separable_data_stays_finite() {
        let xs = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
        let y = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let x = DMatrix::from_column_slice(8, 1, &xs);
        let fit = fit_logit_with(&x, &y, &LogitOptions::default()).unwrap();
        let m = &fit.model;
        assert!(m.weights[0].is_finite() && m.intercept.is_finite());
        for (xi, yi) in xs.iter().zip(y) {
            let p = m.probability(&[*xi]).unwrap();
            if yi == 1.0 {
                assert!(p > 0.99, "p={p} at {xi}");
            } else {
                assert!(p < 0.01, "p={p} at {xi}");
            }
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = SeededRng::new(11, 0);
        let n = 200;
        let mut data = Vec::with_capacity(n * 2);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.uniform_in(-2.0, 2.0);
            let b = rng.uniform_in(-1.0, 1.0);
            data.extend([a, b]);
            let p = sigmoid(1.5 * a - 0.7 * b + 0.3);
            y.push(if rng.uniform() < p { 1.0 } else { 0.0 });
        }
        let x = DMatrix::from_row_slice(n, 2, &data);
        let fit = fit_logit_with(&x, &y, &LogitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.gradient_max_norm <= 1e-8);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn bad_inputs() {
        let x = DMatrix::zeros(2, 1);
        assert!(fit_logit(&x, &[0.0, 2.0], 1e-4).is_err());
        assert!(fit_logit(&x, &[0.0], 1e-4).is_err());
        assert!(fit_logit(&x, &[0.0, 1.0], -1.0).is_err());
        assert!(fit_logit(&DMatrix::zeros(0, 1), &[], 1e-4).is_err());
        let nan = DMatrix::from_element(2, 1, f64::NAN);
        assert!(fit_logit(&nan, &[0.0, 1.0], 1e-4).is_err());
    }

    #[test]
    fn unregularised_collinear_design_reports_condition() {
        // two identical columns, no ridge: Hessian is singular
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
        let opts = LogitOptions {
            l2_lambda: 0.0,
            ..LogitOptions::default()
        };
        match fit_logit_with(&x, &[0.0, 1.0, 0.0, 1.0], &opts) {
            Err(Error::Numeric { condition, .. }) => assert!(condition > 1e14),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }
}
