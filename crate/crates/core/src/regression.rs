//! Least-squares Monte Carlo conditional expectations.
//!
//! Payoffs are projected onto polynomials `1, x, ..., x^p` in the scaled
//! conditioning value `x = w / σ`, where `σ` is the sample RMS of `w`. The Gram
//! matrix depends only on the conditioning sample, so a [`RegressionBasis`] is
//! built once and reused for every payoff regressed on the same node.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{config, Result};
use crate::numeric::compensated_sum;

#[derive(Debug, Clone)]
pub struct RegressionBasis {
    degree: usize,
    values: Vec<f64>,
    scale: f64,
    gram: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
}

/// Least-squares fit of one payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub fitted: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Set when the design was rank deficient and the sample mean was used.
    pub fallback: bool,
}

#[inline]
fn powers(x: f64, out: &mut [f64]) {
    let mut v = 1.0;
    for o in out.iter_mut() {
        *o = v;
        v *= x;
    }
}

impl RegressionBasis {
    pub fn new(conditioning: &[f64], degree: usize) -> Result<Self> {
        let n = conditioning.len();
        if n < 10 * (degree + 1) {
            return Err(config(format!(
                "{n} samples is too few for a degree-{degree} regression (need at least {})",
                10 * (degree + 1)
            )));
        }
        let rms = (compensated_sum(conditioning.iter().map(|w| w * w)) / n as f64).sqrt();
        let m = degree + 1;
        let mut basis = RegressionBasis {
            degree,
            values: conditioning.to_vec(),
            scale: rms,
            gram: DMatrix::zeros(m, m),
            factor: None,
        };
        if degree == 0 || rms <= f64::MIN_POSITIVE || !rms.is_finite() {
            basis.gram[(0, 0)] = n as f64;
            return Ok(basis);
        }
        let mut row = vec![0.0; m];
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for &w in conditioning {
            powers(w / rms, &mut row);
            for a in 0..m {
                for b in 0..=a {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let factor = Cholesky::new(gram.clone()).filter(|c| {
            let d = c.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            lo > hi * 1e-7
        });
        if factor.is_none() {
            log::warn!("rank-deficient regression design; falling back to the sample mean");
            basis.gram = DMatrix::zeros(m, m);
            basis.gram[(0, 0)] = n as f64;
        } else {
            basis.gram = gram;
        }
        basis.factor = factor;
        Ok(basis)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_samples(&self) -> usize {
        self.values.len()
    }

    /// True when every fit through this basis reduces to the sample mean.
    pub fn is_fallback(&self) -> bool {
        self.factor.is_none()
    }

    pub fn conditioning(&self) -> &[f64] {
        &self.values
    }

    /// Regression coefficients (length `p + 1`) of `payoff` on the basis.
    pub fn fit(&self, payoff: &[f64]) -> Vec<f64> {
        assert_eq!(payoff.len(), self.values.len(), "payoff length differs from conditioning sample");
        let m = self.degree + 1;
        let mut coefficients = vec![0.0; m];
        match &self.factor {
            None => coefficients[0] = compensated_sum(payoff.iter().copied()) / payoff.len() as f64,
            Some(factor) => {
                let mut rhs = DVector::<f64>::zeros(m);
                let mut row = vec![0.0; m];
                for (&w, &y) in self.values.iter().zip(payoff) {
                    powers(w / self.scale, &mut row);
                    for (r, b) in rhs.iter_mut().zip(&row) {
                        *r += b * y;
                    }
                }
                let solution = factor.solve(&rhs);
                coefficients.copy_from_slice(solution.as_slice());
            }
        }
        coefficients
    }

    /// The fitted polynomial evaluated at an arbitrary conditioning value.
    #[inline]
    pub fn evaluate(&self, coefficients: &[f64], w: f64) -> f64 {
        if self.factor.is_none() {
            return coefficients[0];
        }
        let x = w / self.scale;
        coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn fitted(&self, coefficients: &[f64]) -> Vec<f64> {
        self.values.iter().map(|&w| self.evaluate(coefficients, w)).collect()
    }

    /// Sample mean of the squared fitted values, `cᵀGc / n`.
    pub fn mean_square(&self, coefficients: &[f64]) -> f64 {
        let c = DVector::from_column_slice(coefficients);
        (c.transpose() * &self.gram * &c)[(0, 0)].max(0.0) / self.values.len() as f64
    }

    pub fn project(&self, payoff: &[f64]) -> Projection {
        let coefficients = self.fit(payoff);
        Projection {
            fitted: self.fitted(&coefficients),
            coefficients,
            fallback: self.is_fallback(),
        }
    }
}

/// Degree-`p` least-squares estimate of `E[payoff | conditioning]`, per path.
pub fn conditional_expectation(payoff: &[f64], conditioning: &[f64], degree: usize) -> Result<Projection> {
    if payoff.len() != conditioning.len() {
        return Err(config(format!(
            "payoff has {} samples, conditioning has {}",
            payoff.len(),
            conditioning.len()
        )));
    }
    Ok(RegressionBasis::new(conditioning, degree)?.project(payoff))
}
