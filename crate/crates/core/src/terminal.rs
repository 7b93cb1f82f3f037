//! Terminal data `ψ(t)`, each a function of the path's terminal value `W(T)`.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Terminal families. Polynomials are given by ascending coefficients in `W(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TerminalFamily {
    /// `ψ(t) = c`.
    #[serde(rename = "constant")]
    Constant(f64),
    /// `ψ(t) = e^{T-t} ξ` with `ξ = g(W(T))`, so that `ψ(t) = e^{-t} ψ(0)`.
    #[serde(rename = "exp_decay")]
    ExpDecay(Vec<f64>),
    /// `ψ(t) = g(W(T))` for every `t`.
    #[serde(rename = "functional_of_wt")]
    FunctionalOfWT(Vec<f64>),
}

fn polynomial(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `E[W(T)^k]` for a centred Gaussian with variance `T`.
fn gaussian_moment(k: usize, variance: f64) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let double_factorial: f64 = (1..k).step_by(2).map(|m| m as f64).product();
    double_factorial * variance.powi((k / 2) as i32)
}

impl TerminalFamily {
    pub fn validate(&self) -> Result<()> {
        let coefficients: &[f64] = match self {
            TerminalFamily::Constant(c) => std::slice::from_ref(c),
            TerminalFamily::ExpDecay(g) | TerminalFamily::FunctionalOfWT(g) => g,
        };
        if coefficients.is_empty() {
            return Err(config("terminal polynomial needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(config("terminal coefficients must be finite"));
        }
        Ok(())
    }

    /// `ψ(t)` on a path whose terminal value is `w_terminal`.
    pub fn value(&self, t: f64, horizon: f64, w_terminal: f64) -> f64 {
        match self {
            TerminalFamily::Constant(c) => *c,
            TerminalFamily::ExpDecay(g) => (horizon - t).exp() * polynomial(g, w_terminal),
            TerminalFamily::FunctionalOfWT(g) => polynomial(g, w_terminal),
        }
    }

    /// `E[ψ(t)]`.
    pub fn mean(&self, t: f64, horizon: f64) -> f64 {
        let poly_mean =
            |g: &[f64]| -> f64 { g.iter().enumerate().map(|(k, c)| c * gaussian_moment(k, horizon)).sum() };
        match self {
            TerminalFamily::Constant(c) => *c,
            TerminalFamily::ExpDecay(g) => (horizon - t).exp() * poly_mean(g),
            TerminalFamily::FunctionalOfWT(g) => poly_mean(g),
        }
    }

    /// True when `ψ` does not depend on the Brownian path.
    pub fn is_deterministic(&self) -> bool {
        match self {
            TerminalFamily::Constant(_) => true,
            TerminalFamily::ExpDecay(g) | TerminalFamily::FunctionalOfWT(g) => g.iter().skip(1).all(|c| *c == 0.0),
        }
    }

    pub fn scaled(&self, factor: f64) -> TerminalFamily {
        let scale = |g: &[f64]| g.iter().map(|c| c * factor).collect();
        match self {
            TerminalFamily::Constant(c) => TerminalFamily::Constant(c * factor),
            TerminalFamily::ExpDecay(g) => TerminalFamily::ExpDecay(scale(g)),
            TerminalFamily::FunctionalOfWT(g) => TerminalFamily::FunctionalOfWT(scale(g)),
        }
    }
}
