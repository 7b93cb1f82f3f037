//! Discretized Picard iteration for the delayed BSVIE
//! `Y(t) = ψ(t) + ∫_t^T f(t,s,Y_s,Z_{t,s}) ds - ∫_t^T Z(t,s) dW(s)`.
//!
//! Each step freezes `(Yⁿ, Zⁿ)`, forms the running payoff
//! `P_i = ψ(t_i) + Σ_{j>=i} f(t_i, s_j, Yⁿ, Zⁿ) dt` on every path, and recovers
//! `Y^{n+1}(t_i) = E[P_i | W(t_i)]` and `Z^{n+1}(t_i, ·)` by regression on the
//! Brownian ensemble. `Z` is kept as per-node regression coefficients rather than
//! per-path values; a path's surface is evaluated on demand through [`PathZ`].

use std::f64::consts::E;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::generator::GeneratorSpec;
use crate::grid::{weighted_norms, BrownianEnsemble, TimeGrid, YEnsemble, YPath, ZEnsemble, ZSurface};
use crate::measure::{DelayMeasure, SnappedMeasure};
use crate::numeric::{compensated_sum, fit_line};
use crate::regression::RegressionBasis;
use crate::terminal::TerminalFamily;

fn default_max_iterations() -> usize {
    50
}

fn default_degree() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub n_steps: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Stopping threshold on successive distances; `1e-6 (1 + d_0)` when absent.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Norm weight; `1/T` when absent.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_degree")]
    pub basis_degree: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(n_steps: usize, n_paths: usize, seed: u64) -> Self {
        SolverConfig {
            n_steps,
            max_iterations: default_max_iterations(),
            tolerance: None,
            beta: None,
            basis_degree: default_degree(),
            n_paths,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(config("n_steps must be at least 2"));
        }
        if self.max_iterations == 0 {
            return Err(config("max_iterations must be at least 1"));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(config(format!("tolerance must be positive, got {tol}")));
            }
        }
        if let Some(beta) = self.beta {
            if !(beta >= 0.0 && beta.is_finite()) {
                return Err(config(format!("beta must be nonnegative, got {beta}")));
            }
        }
        if self.n_paths <= 10 * (self.basis_degree + 1) {
            return Err(config(format!(
                "n_paths = {} must exceed 10 (p + 1) = {}",
                self.n_paths,
                10 * (self.basis_degree + 1)
            )));
        }
        Ok(())
    }

    pub fn beta_for(&self, horizon: f64) -> f64 {
        self.beta.unwrap_or(1.0 / horizon)
    }
}

/// Minimum of `(K/β) e^{βγ}` over `β > 0` and its verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallDelayReport {
    pub gamma: f64,
    pub constant: f64,
    pub contracts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub horizon: f64,
    pub lipschitz: f64,
    /// `4 T K e max(1, T)`.
    pub constant: f64,
    pub contracts: bool,
    /// Present for generators that do not depend on `y`.
    pub small_delay: Option<SmallDelayReport>,
}

impl ContractionReport {
    /// Contraction verdict for a generator and delay measure on `[0, T]`.
    pub fn assess(horizon: f64, generator: &GeneratorSpec, measure: &DelayMeasure) -> Self {
        let mut report = contraction_constant(horizon, generator.lipschitz());
        if !generator.depends_on_y() {
            report.small_delay = Some(small_delay_bound(generator.lipschitz(), measure.support_radius()));
        }
        report
    }

    /// True when either sufficient condition holds.
    pub fn permits_solve(&self) -> bool {
        self.contracts || self.small_delay.is_some_and(|s| s.contracts)
    }
}

pub fn contraction_constant(horizon: f64, lipschitz: f64) -> ContractionReport {
    let constant = 4.0 * horizon * lipschitz * E * horizon.max(1.0);
    ContractionReport {
        horizon,
        lipschitz,
        constant,
        contracts: constant < 1.0,
        small_delay: None,
    }
}

/// `min_β (K/β) e^{βγ} = K γ e`, attained at `β = 1/γ`; zero when `γ = 0`.
pub fn small_delay_bound(lipschitz: f64, gamma: f64) -> SmallDelayReport {
    let constant = if gamma == 0.0 { 0.0 } else { lipschitz * gamma * E };
    SmallDelayReport {
        gamma,
        constant,
        contracts: constant < 1.0,
    }
}

/// Regression bases on `W(t_j)` for every node `j = 0..=N`.
#[derive(Debug)]
pub struct NodeBases {
    grid: TimeGrid,
    degree: usize,
    bases: Vec<RegressionBasis>,
}

impl NodeBases {
    pub fn new(ensemble: &BrownianEnsemble, degree: usize) -> Result<Self> {
        let grid = *ensemble.grid();
        let bases = (0..grid.n_nodes())
            .into_par_iter()
            .map(|j| RegressionBasis::new(&ensemble.at_node(j), degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(NodeBases { grid, degree, bases })
    }

    pub fn node(&self, j: usize) -> &RegressionBasis {
        &self.bases[j]
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
}

/// `Z` for every path, stored as coefficients `c_{ij}` so that
/// `Z(t_i, s_j) = Σ_k c_{ijk} (W(s_j)/σ_j)^k`.
#[derive(Debug, Clone)]
pub struct ZCoefficients {
    bases: Arc<NodeBases>,
    coefficients: Vec<f64>,
    n_paths: usize,
}

impl ZCoefficients {
    pub fn zeros(bases: Arc<NodeBases>) -> Self {
        let m = bases.grid.n_nodes();
        let n_paths = bases.bases[0].n_samples();
        ZCoefficients {
            coefficients: vec![0.0; m * m * (bases.degree + 1)],
            bases,
            n_paths,
        }
    }

    fn width(&self) -> usize {
        self.bases.degree + 1
    }

    pub fn coefficients(&self, i: usize, j: usize) -> &[f64] {
        let m = self.bases.grid.n_nodes();
        let w = self.width();
        let start = (i * m + j) * w;
        &self.coefficients[start..start + w]
    }

    /// `Z(t_i, s_j)` on a path whose Brownian value at `s_j` is `w`.
    #[inline]
    pub fn value(&self, i: usize, j: usize, w: f64) -> f64 {
        self.bases.bases[j].evaluate(self.coefficients(i, j), w)
    }

    /// Ensemble mean of `Z(t_i, s_j)`.
    pub fn node_mean(&self, i: usize, j: usize) -> f64 {
        let basis = &self.bases.bases[j];
        let c = self.coefficients(i, j);
        compensated_sum(basis.conditioning().iter().map(|&w| basis.evaluate(c, w))) / self.n_paths as f64
    }

    pub fn surface<'a>(&'a self, brownian_path: &'a [f64]) -> PathZ<'a> {
        PathZ {
            z: self,
            w: brownian_path,
        }
    }

    pub fn difference(&self, other: &ZCoefficients) -> Result<ZCoefficients> {
        if !Arc::ptr_eq(&self.bases, &other.bases) {
            return Err(config("Z estimates were fitted on different ensembles"));
        }
        Ok(ZCoefficients {
            bases: Arc::clone(&self.bases),
            coefficients: self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a - b).collect(),
            n_paths: self.n_paths,
        })
    }

    /// `sqrt(Σ_{j>=i} E|Z(t_i, s_j)|² dt)`.
    pub fn row_norm(&self, i: usize) -> f64 {
        let grid = self.bases.grid;
        (compensated_sum((i..grid.n_steps()).map(|j| self.mean_square(i, j))) * grid.dt()).sqrt()
    }
}

impl ZEnsemble for ZCoefficients {
    fn grid(&self) -> &TimeGrid {
        &self.bases.grid
    }

    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn mean_square(&self, i: usize, j: usize) -> f64 {
        self.bases.bases[j].mean_square(self.coefficients(i, j))
    }
}

/// One path's view of a [`ZCoefficients`] surface.
#[derive(Debug, Clone, Copy)]
pub struct PathZ<'a> {
    z: &'a ZCoefficients,
    w: &'a [f64],
}

impl ZSurface for PathZ<'_> {
    fn grid(&self) -> &TimeGrid {
        &self.z.bases.grid
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.z.value(i, j, self.w[j])
    }
}

#[derive(Debug, Clone)]
pub struct SolutionEstimate {
    pub y: YEnsemble,
    pub z: ZCoefficients,
    /// Coefficients of `Y(t_i)` as a polynomial in `W(t_i)`.
    pub y_coeffs: Vec<Vec<f64>>,
    ensemble: Arc<BrownianEnsemble>,
}

impl SolutionEstimate {
    pub fn zero(ensemble: Arc<BrownianEnsemble>, bases: Arc<NodeBases>) -> Self {
        let grid = *ensemble.grid();
        SolutionEstimate {
            y: YEnsemble::zeros(grid, ensemble.n_paths()),
            z: ZCoefficients::zeros(Arc::clone(&bases)),
            y_coeffs: vec![vec![0.0; bases.degree + 1]; grid.n_nodes()],
            ensemble,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        self.y.grid()
    }

    pub fn ensemble(&self) -> &BrownianEnsemble {
        &self.ensemble
    }

    pub fn y_means(&self) -> Vec<f64> {
        self.y.node_means()
    }

    pub fn y_standard_errors(&self) -> Vec<f64> {
        self.y.node_standard_errors()
    }

    pub fn z_path(&self, p: usize) -> PathZ<'_> {
        self.z.surface(self.ensemble.path(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    /// `d_n = ‖Y^{n+1} - Yⁿ‖²_{H1} + ‖Z^{n+1} - Zⁿ‖²_{H2}`, starting from `n = 0`.
    pub distances: Vec<f64>,
    /// `d_{n+1}/d_n`, only where both distances are positive.
    pub ratios: Vec<f64>,
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Nodes whose regression fell back to the sample mean.
    pub fallback_nodes: Vec<usize>,
}

fn successive_ratios(distances: &[f64]) -> Vec<f64> {
    distances
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / w[0])
        .collect()
}

/// Shared state for repeated Picard steps on one ensemble.
pub struct PicardContext {
    ensemble: Arc<BrownianEnsemble>,
    bases: Arc<NodeBases>,
    increments: Vec<Vec<f64>>,
}

impl PicardContext {
    pub fn new(ensemble: Arc<BrownianEnsemble>, degree: usize) -> Result<Self> {
        let bases = Arc::new(NodeBases::new(&ensemble, degree)?);
        Ok(Self::with_bases(ensemble, bases))
    }

    fn with_bases(ensemble: Arc<BrownianEnsemble>, bases: Arc<NodeBases>) -> Self {
        let increments = (0..ensemble.grid().n_steps()).map(|j| ensemble.increments_at(j)).collect();
        PicardContext {
            ensemble,
            bases,
            increments,
        }
    }

    pub fn simulate(grid: TimeGrid, config: &SolverConfig) -> Result<Self> {
        let ensemble = BrownianEnsemble::simulate(grid, config.n_paths, config.seed)?;
        Self::new(Arc::new(ensemble), config.basis_degree)
    }

    pub fn grid(&self) -> &TimeGrid {
        self.ensemble.grid()
    }

    pub fn zero_estimate(&self) -> SolutionEstimate {
        SolutionEstimate::zero(Arc::clone(&self.ensemble), Arc::clone(&self.bases))
    }

    pub fn bases(&self) -> &NodeBases {
        &self.bases
    }

    /// `P_i` on every path, laid out by node.
    pub fn payoffs(
        &self,
        generator: &GeneratorSpec,
        terminal: &TerminalFamily,
        measure: &SnappedMeasure,
        prev: &SolutionEstimate,
    ) -> Result<Vec<Vec<f64>>> {
        let grid = *self.grid();
        let (n, horizon) = (grid.n_steps(), grid.horizon());
        let per_path = (0..self.ensemble.n_paths())
            .into_par_iter()
            .map(|p| {
                let w = self.ensemble.path(p);
                let rows = if generator.is_zero() {
                    vec![0.0; n + 1]
                } else {
                    let y = YPath::new(grid, prev.y.path(p).to_vec())?;
                    generator.row_integrals(measure, &y, &prev.z.surface(w))?
                };
                Ok(rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| terminal.value(grid.time(i as isize), horizon, w[n]) + r)
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..=n).map(|i| per_path.iter().map(|row| row[i]).collect()).collect())
    }

    /// Regression coefficients of `Z(t_i, s_j)` for every `j`, given the
    /// running payoff `P_i`. The martingale `X(s_j) = E[P_i | W(s_j)]` is
    /// differenced against `ΔW_j`; column `N` repeats column `N - 1`.
    pub fn estimate_z(&self, payoff: &[f64]) -> Vec<f64> {
        let n = self.grid().n_steps();
        let dt = self.grid().dt();
        let width = self.bases.degree + 1;
        let mut out = vec![0.0; (n + 1) * width];
        let mut next: Vec<f64> = payoff.to_vec();
        let mut target = vec![0.0; payoff.len()];
        for j in (0..n).rev() {
            let basis = self.bases.node(j);
            let current = basis.fitted(&basis.fit(payoff));
            for (((t, x1), x0), dw) in target.iter_mut().zip(&next).zip(&current).zip(&self.increments[j]) {
                *t = (x1 - x0) * dw;
            }
            let coefficients = basis.fit(&target);
            for (o, c) in out[j * width..(j + 1) * width].iter_mut().zip(&coefficients) {
                *o = c / dt;
            }
            next = current;
        }
        out.copy_within((n - 1) * width..n * width, n * width);
        out
    }

    pub fn step(
        &self,
        generator: &GeneratorSpec,
        terminal: &TerminalFamily,
        measure: &SnappedMeasure,
        prev: &SolutionEstimate,
    ) -> Result<SolutionEstimate> {
        if measure.grid() != self.grid() || prev.grid() != self.grid() {
            return Err(config("measure, estimate and ensemble grids differ"));
        }
        let grid = *self.grid();
        let n = grid.n_steps();
        let n_paths = self.ensemble.n_paths();
        let payoffs = self.payoffs(generator, terminal, measure, prev)?;

        let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = payoffs
            .par_iter()
            .enumerate()
            .map(|(i, payoff)| {
                let basis = self.bases.node(i);
                let y_coeffs = basis.fit(payoff);
                let y_values = if i == n { payoff.clone() } else { basis.fitted(&y_coeffs) };
                (y_coeffs, y_values, self.estimate_z(payoff))
            })
            .collect();

        let mut y_values = vec![0.0; n_paths * (n + 1)];
        let mut y_coeffs = Vec::with_capacity(n + 1);
        let mut z = ZCoefficients::zeros(Arc::clone(&self.bases));
        let row_width = (n + 1) * (self.bases.degree + 1);
        for (i, (coeffs, values, z_row)) in rows.into_iter().enumerate() {
            for (p, v) in values.iter().enumerate() {
                y_values[p * (n + 1) + i] = *v;
            }
            y_coeffs.push(coeffs);
            z.coefficients[i * row_width..(i + 1) * row_width].copy_from_slice(&z_row);
        }
        Ok(SolutionEstimate {
            y: YEnsemble::new(grid, n_paths, y_values)?,
            z,
            y_coeffs,
            ensemble: Arc::clone(&self.ensemble),
        })
    }

    /// `‖ΔY‖²_{H1} + ‖ΔZ‖²_{H2}` between two estimates.
    pub fn distance(&self, a: &SolutionEstimate, b: &SolutionEstimate, beta: f64) -> Result<f64> {
        let norms = weighted_norms(&a.y.difference(&b.y)?, &a.z.difference(&b.z)?, beta)?;
        Ok(norms.h1 + norms.h2)
    }

    /// Picard iteration from `(Y⁰, Z⁰) = 0` without the contraction check.
    pub fn iterate(
        &self,
        config: &SolverConfig,
        generator: &GeneratorSpec,
        terminal: &TerminalFamily,
        measure: &SnappedMeasure,
    ) -> Result<(SolutionEstimate, IterationDiagnostics)> {
        let beta = config.beta_for(self.grid().horizon());
        let mut current = self.zero_estimate();
        let mut distances = Vec::new();
        let mut tolerance = config.tolerance.unwrap_or(f64::INFINITY);
        let mut converged = false;
        let mut iterations = 0;
        let frozen = !(generator.depends_on_y() || generator.depends_on_z()) || generator.is_zero();
        while iterations < config.max_iterations {
            let next = self.step(generator, terminal, measure, &current)?;
            let d = self.distance(&next, &current, beta)?;
            iterations += 1;
            if distances.is_empty() {
                tolerance = config.tolerance.unwrap_or(1e-6 * (1.0 + d));
            }
            distances.push(d);
            current = next;
            log::debug!("picard iteration {iterations}: d = {d:.6e}");
            if frozen {
                distances.push(0.0);
                converged = true;
                break;
            }
            if d <= tolerance {
                converged = true;
                break;
            }
        }
        let fallback_nodes = (0..self.grid().n_nodes())
            .filter(|&j| self.bases.node(j).is_fallback())
            .collect();
        Ok((
            current,
            IterationDiagnostics {
                ratios: successive_ratios(&distances),
                distances,
                tolerance,
                converged,
                iterations,
                fallback_nodes,
            },
        ))
    }
}

/// One Picard step on a given ensemble.
pub fn picard_step(
    config: &SolverConfig,
    generator: &GeneratorSpec,
    terminal: &TerminalFamily,
    measure: &SnappedMeasure,
    prev: &SolutionEstimate,
) -> Result<SolutionEstimate> {
    if prev.z.bases.degree != config.basis_degree {
        return Err(crate::error::config("estimate was fitted with a different basis degree"));
    }
    let context = PicardContext::with_bases(Arc::clone(&prev.ensemble), Arc::clone(&prev.z.bases));
    context.step(generator, terminal, measure, prev)
}

/// Solves on `[0, T]` after checking the contraction conditions.
///
/// Without `override_contraction`, configurations where neither
/// `4TKe max(1,T) < 1` nor the small-delay bound holds are refused.
pub fn solve(
    horizon: f64,
    config: &SolverConfig,
    generator: &GeneratorSpec,
    terminal: &TerminalFamily,
    measure: &DelayMeasure,
    override_contraction: bool,
) -> Result<(SolutionEstimate, IterationDiagnostics)> {
    config.validate()?;
    terminal.validate()?;
    measure.validate(horizon)?;
    let report = ContractionReport::assess(horizon, generator, measure);
    if !report.permits_solve() && !override_contraction {
        return Err(Error::Refused(report));
    }
    let grid = TimeGrid::new(horizon, config.n_steps)?;
    let snapped = measure.snap(&grid)?;
    let context = PicardContext::simulate(grid, config)?;
    context.iterate(config, generator, terminal, &snapped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub max_ratio: Option<f64>,
    /// `exp` of the least-squares slope of `log d_n` against `n`.
    pub rate: Option<f64>,
}

pub fn convergence_ratios(diagnostics: &IterationDiagnostics) -> Result<ConvergenceSummary> {
    if diagnostics.distances.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} recorded distances, need at least 3",
            diagnostics.distances.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = diagnostics
        .distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(n, d)| (n as f64, d.ln()))
        .unzip();
    Ok(ConvergenceSummary {
        max_ratio: diagnostics.ratios.iter().copied().reduce(f64::max),
        rate: fit_line(&xs, &ys).map(|fit| fit.slope.exp()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(n_steps: usize, n_paths: usize) -> SolverConfig {
        SolverConfig::new(n_steps, n_paths, 7)
    }

    #[test]
    fn contraction_examples() {
        let zero = contraction_constant(3.0, 0.0);
        assert_eq!(zero.constant, 0.0);
        assert!(zero.contracts);
        let c = contraction_constant(0.1, 0.5);
        assert!((c.constant - 0.2 * E).abs() < 1e-12 && c.contracts);
        let c = contraction_constant(1.0, 1.0);
        assert!((c.constant - 4.0 * E).abs() < 1e-12 && !c.contracts);
        let c = contraction_constant(2.0, 0.01);
        assert!((c.constant - 16.0 * 0.01 * E).abs() < 1e-12);
    }

    #[test]
    fn small_delay_examples() {
        assert_eq!(small_delay_bound(5.0, 0.0).constant, 0.0);
        assert!(small_delay_bound(5.0, 0.0).contracts);
        let s = small_delay_bound(10.0, 0.01);
        assert!((s.constant - 0.1 * E).abs() < 1e-12 && s.contracts);
        let s = small_delay_bound(1.0, 1.0);
        assert!((s.constant - E).abs() < 1e-12 && !s.contracts);
        let grid_min = (1..20000)
            .map(|k| {
                let beta = k as f64 * 0.01;
                10.0 / beta * (beta * 0.01).exp()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((grid_min - s_for(10.0, 0.01)).abs() < 1e-6);
    }

    fn s_for(k: f64, g: f64) -> f64 {
        small_delay_bound(k, g).constant
    }

    #[test]
    fn config_validation() {
        assert!(small_config(16, 41).validate().is_ok());
        assert!(small_config(16, 40).validate().is_err());
        assert!(small_config(1, 100).validate().is_err());
        let mut c = small_config(16, 100);
        c.tolerance = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn refuses_non_contracting_problem() {
        let err = solve(
            1.0,
            &small_config(8, 100),
            &GeneratorSpec::dirac_linear_y(1.0),
            &TerminalFamily::Constant(1.0),
            &DelayMeasure::Dirac(-1.0),
            false,
        )
        .unwrap_err();
        match err {
            Error::Refused(report) => assert!((report.constant - 4.0 * E).abs() < 1e-12),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn small_delay_admits_z_generator() {
        let report = ContractionReport::assess(1.0, &GeneratorSpec::linear_delayed_z(2.0), &DelayMeasure::Dirac(-0.1));
        assert!(!report.contracts);
        assert!(report.permits_solve());
        let report = ContractionReport::assess(1.0, &GeneratorSpec::uniform_linear_y(2.0), &DelayMeasure::Dirac(-0.1));
        assert!(report.small_delay.is_none() && !report.permits_solve());
    }

    #[test]
    fn first_step_from_zero_returns_terminal() {
        let grid = TimeGrid::new(0.5, 16).unwrap();
        let config = small_config(16, 200);
        let context = PicardContext::simulate(grid, &config).unwrap();
        let measure = DelayMeasure::Dirac(-0.5).snap(&grid).unwrap();
        let prev = context.zero_estimate();
        let next = context
            .step(&GeneratorSpec::dirac_linear_y(1.0), &TerminalFamily::Constant(1.0), &measure, &prev)
            .unwrap();
        assert!(next.y.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn deterministic_dirac_matches_recursion() {
        let (horizon, k) = (0.5, 1.0);
        let mut config = small_config(32, 100);
        config.tolerance = Some(1e-20);
        config.max_iterations = 200;
        let (solution, diag) = solve(
            horizon,
            &config,
            &GeneratorSpec::dirac_linear_y(k),
            &TerminalFamily::Constant(1.0),
            &DelayMeasure::Dirac(-horizon),
            true,
        )
        .unwrap();
        assert!(diag.converged);
        let means = solution.y_means();
        assert!((means[0] - 2.0).abs() < 1e-8, "{}", means[0]);
        for (i, m) in means.iter().enumerate() {
            let t = solution.grid().time(i as isize);
            let exact = 1.0 + k * (horizon - t) / ((t + 1.0) * (1.0 - k * horizon));
            assert!((m - exact).abs() < 1e-8, "node {i}");
        }
    }

    #[test]
    fn terminal_row_and_adaptedness() {
        let mut config = small_config(16, 300);
        config.basis_degree = 2;
        let terminal = TerminalFamily::FunctionalOfWT(vec![0.0, 1.0, 1.0]);
        let (solution, _) = solve(
            0.2,
            &config,
            &GeneratorSpec::dirac_linear_y(0.4),
            &terminal,
            &DelayMeasure::Dirac(-0.1),
            false,
        )
        .unwrap();
        let n = 16;
        for p in 0..300 {
            let w = solution.ensemble().path(p);
            assert_eq!(solution.y.path(p)[n], terminal.value(0.2, 0.2, w[n]));
            for i in 0..n {
                let refit = solution.z.bases.node(i).evaluate(&solution.y_coeffs[i], w[i]);
                assert_eq!(solution.y.path(p)[i], refit);
            }
        }
    }

    #[test]
    fn zero_generator_converges_in_one_iteration() {
        let (solution, diag) = solve(
            1.0,
            &small_config(16, 2000),
            &GeneratorSpec::zero(),
            &TerminalFamily::FunctionalOfWT(vec![0.0, 1.0]),
            &DelayMeasure::Dirac(-1.0),
            false,
        )
        .unwrap();
        assert!(diag.converged);
        assert_eq!(diag.iterations, 1);
        assert_eq!(diag.distances.len(), 2);
        assert_eq!(diag.distances[1], 0.0);
        assert!(diag.ratios.is_empty());
        assert!(convergence_ratios(&diag).is_err());
        let mut sq = 0.0;
        for p in 0..2000 {
            let w = solution.ensemble().path(p);
            sq += (0..16).map(|i| (solution.y.path(p)[i] - w[i]).powi(2)).sum::<f64>();
        }
        assert!((sq / (2000.0 * 16.0)).sqrt() < 0.05);
        for i in 0..16 {
            let row: f64 = (0..16).map(|j| solution.z.node_mean(i, j)).sum::<f64>() / 16.0;
            assert!((row - 1.0).abs() < 0.1, "row {i}: {row}");
        }
    }

    #[test]
    fn constant_terminal_has_no_martingale_part() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let context = PicardContext::simulate(grid, &small_config(8, 400)).unwrap();
        let coeffs = context.estimate_z(&[2.5; 400]);
        assert!(coeffs.iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn geometric_sequence_rate() {
        let diag = IterationDiagnostics {
            distances: (0..6).map(|n| 3.0 * 0.4f64.powi(n)).collect(),
            ratios: vec![0.4; 5],
            tolerance: 0.0,
            converged: true,
            iterations: 6,
            fallback_nodes: vec![],
        };
        let s = convergence_ratios(&diag).unwrap();
        assert!((s.rate.unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(s.max_ratio, Some(0.4));
    }

    #[test]
    fn ratios_skip_zero_distances() {
        assert_eq!(successive_ratios(&[4.0, 2.0, 0.0, 0.0]), vec![0.5]);
    }

    #[test]
    fn seed_determinism() {
        let run = || {
            solve(
                0.1,
                &small_config(16, 200),
                &GeneratorSpec::linear_delayed_z(1.0),
                &TerminalFamily::FunctionalOfWT(vec![0.0, 1.0, 0.5]),
                &DelayMeasure::Dirac(-0.05),
                false,
            )
            .unwrap()
        };
        let (a, da) = run();
        let (b, db) = run();
        assert_eq!(a.y.values(), b.y.values());
        assert_eq!(a.z.coefficients, b.z.coefficients);
        assert_eq!(da, db);
    }
}
