//! Time discretization, Brownian ensembles, path storage with the negative-time
//! extension conventions, and the discrete weighted norms.
//!
//! Every stored object lives on a uniform grid `t_i = i * dt`, `i = 0..=N`, over
//! `[0, T]`. Queries at negative times follow the extension used by delayed
//! equations: `Y(t) = Y(0)` for `t < 0`, and `Z(t, s) = 0` whenever `t < 0` or
//! `s < 0`. The stored domain of `Y` is therefore `[-T, T]` with index set
//! `{-N, ..., N}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

/// Uniform discretization of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(config(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps < 2 {
            return Err(config(format!("need at least 2 steps, got {n_steps}")));
        }
        Ok(Self {
            horizon,
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// Time of (possibly negative) node index `k`. The last node is exactly `T`.
    pub fn time(&self, k: isize) -> f64 {
        if k == self.n_steps as isize {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps as isize).map(|k| self.time(k)).collect()
    }

    /// Nearest node index of a time in `[-T, T]`, rounding half away from zero.
    pub fn nearest_index(&self, t: f64) -> isize {
        let k = (t / self.dt).round() as isize;
        k.clamp(-(self.n_steps as isize), self.n_steps as isize)
    }

    fn check_upper(&self, t: f64, what: &str) -> Result<()> {
        if t.is_nan() || t > self.horizon * (1.0 + 1e-12) {
            return Err(domain(format!("{what} = {t} exceeds horizon {}", self.horizon)));
        }
        Ok(())
    }
}

/// Seeded ensemble of scalar Brownian paths on a [`TimeGrid`].
///
/// Path `p` is drawn from a ChaCha stream keyed by `(seed, p)`, so the ensemble
/// is bit-reproducible whatever order the paths are generated in.
#[derive(Debug, Clone)]
pub struct BrownianEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    increments: Vec<f64>,
    values: Vec<f64>,
}

impl BrownianEnsemble {
    pub fn simulate(grid: TimeGrid, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(config("n_paths must be at least 1"));
        }
        let n = grid.n_steps();
        let sd = grid.dt().sqrt();
        let mut increments = vec![0.0; n_paths * n];
        let mut values = vec![0.0; n_paths * (n + 1)];
        increments
            .par_chunks_mut(n)
            .zip(values.par_chunks_mut(n + 1))
            .enumerate()
            .for_each(|(p, (dw, w))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p as u64);
                let mut acc = 0.0;
                w[0] = 0.0;
                for i in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    dw[i] = sd * z;
                    acc += dw[i];
                    w[i + 1] = acc;
                }
            });
        Ok(Self {
            grid,
            n_paths,
            seed,
            increments,
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `W(t_0), ..., W(t_N)` of path `p`.
    pub fn path(&self, p: usize) -> &[f64] {
        let m = self.grid.n_nodes();
        &self.values[p * m..(p + 1) * m]
    }

    /// `ΔW_0, ..., ΔW_{N-1}` of path `p`.
    pub fn increments(&self, p: usize) -> &[f64] {
        let n = self.grid.n_steps();
        &self.increments[p * n..(p + 1) * n]
    }

    /// Cross-section `W(t_j)` over all paths.
    pub fn at_node(&self, j: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.path(p)[j]).collect()
    }

    /// Cross-section `ΔW_j` over all paths.
    pub fn increments_at(&self, j: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.increments(p)[j]).collect()
    }
}

/// One sampled `Y` path on the grid, anchored at `Y(0)` for negative times.
#[derive(Debug, Clone, PartialEq)]
pub struct YPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl YPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(config(format!(
                "path has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn anchor(&self) -> f64 {
        self.values[0]
    }

    /// Value at a (possibly negative) node index; `Y(0)` for `k < 0`.
    #[inline]
    pub fn at_index(&self, k: isize) -> f64 {
        if k < 0 {
            self.values[0]
        } else {
            self.values[k as usize]
        }
    }

    /// Extended query: `Y(0)` for `t < 0`, nearest stored node on `[0, T]`.
    pub fn extend(&self, t: f64) -> Result<f64> {
        self.grid.check_upper(t, "t")?;
        if t < 0.0 {
            return Ok(self.values[0]);
        }
        Ok(self.at_index(self.grid.nearest_index(t)))
    }
}

/// A `Z(t, s)` surface on the grid square, zero-extended to negative arguments.
pub trait ZSurface {
    fn grid(&self) -> &TimeGrid;

    /// Stored value at nodes `(t_i, s_j)`, `0 <= i, j <= N`.
    fn node(&self, i: usize, j: usize) -> f64;

    #[inline]
    fn at_index(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 {
            0.0
        } else {
            self.node(i as usize, j as usize)
        }
    }

    /// Extended query: `0` if `t < 0` or `s < 0`, nearest node otherwise.
    fn extend(&self, t: f64, s: f64) -> Result<f64> {
        let grid = *self.grid();
        grid.check_upper(t, "t")?;
        grid.check_upper(s, "s")?;
        if t < 0.0 || s < 0.0 {
            return Ok(0.0);
        }
        Ok(self.at_index(grid.nearest_index(t), grid.nearest_index(s)))
    }
}

/// Row-major `(N+1) x (N+1)` surface.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseZSurface {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl DenseZSurface {
    pub fn zeros(grid: TimeGrid) -> Self {
        let m = grid.n_nodes();
        Self {
            grid,
            values: vec![0.0; m * m],
        }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let nodes = grid.nodes();
        let values = nodes
            .iter()
            .flat_map(|&t| nodes.iter().map(move |&s| (t, s)))
            .map(|(t, s)| f(t, s))
            .collect();
        Self { grid, values }
    }

    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let m = grid.n_nodes();
        if values.len() != m * m {
            return Err(config(format!("surface needs {} values, got {}", m * m, values.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let m = self.grid.n_nodes();
        self.values[i * m + j] = v;
    }
}

impl ZSurface for DenseZSurface {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    fn node(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_nodes() + j]
    }
}

/// Per-path `Y` values on the grid, row-major by path.
#[derive(Debug, Clone, PartialEq)]
pub struct YEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    values: Vec<f64>,
}

impl YEnsemble {
    pub fn new(grid: TimeGrid, n_paths: usize, values: Vec<f64>) -> Result<Self> {
        if n_paths == 0 || values.len() != n_paths * grid.n_nodes() {
            return Err(config(format!(
                "ensemble of {n_paths} paths needs {} values, got {}",
                n_paths * grid.n_nodes(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            n_paths,
            values,
        })
    }

    pub fn zeros(grid: TimeGrid, n_paths: usize) -> Self {
        Self {
            grid,
            n_paths,
            values: vec![0.0; n_paths * grid.n_nodes()],
        }
    }

    pub fn from_paths(grid: TimeGrid, paths: &[Vec<f64>]) -> Result<Self> {
        let values = paths.iter().flatten().copied().collect();
        Self::new(grid, paths.len(), values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let m = self.grid.n_nodes();
        &self.values[p * m..(p + 1) * m]
    }

    pub fn ypath(&self, p: usize) -> YPath {
        YPath {
            grid: self.grid,
            values: self.path(p).to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Ensemble mean of `Y(t_i)` at every node.
    pub fn node_means(&self) -> Vec<f64> {
        (0..self.grid.n_nodes())
            .map(|i| compensated_sum((0..self.n_paths).map(|p| self.path(p)[i])) / self.n_paths as f64)
            .collect()
    }

    /// Standard error of the node means (zero for a single path).
    pub fn node_standard_errors(&self) -> Vec<f64> {
        let means = self.node_means();
        if self.n_paths < 2 {
            return vec![0.0; means.len()];
        }
        let n = self.n_paths as f64;
        means
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let ss = compensated_sum((0..self.n_paths).map(|p| (self.path(p)[i] - m).powi(2)));
                (ss / (n - 1.0) / n).sqrt()
            })
            .collect()
    }

    pub fn difference(&self, other: &YEnsemble) -> Result<YEnsemble> {
        if self.grid != other.grid || self.n_paths != other.n_paths {
            return Err(config("ensembles differ in grid or path count"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(YEnsemble {
            grid: self.grid,
            n_paths: self.n_paths,
            values,
        })
    }

    pub fn scaled(&self, factor: f64) -> YEnsemble {
        YEnsemble {
            grid: self.grid,
            n_paths: self.n_paths,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// An ensemble of `Z` surfaces, accessed through ensemble second moments.
pub trait ZEnsemble {
    fn grid(&self) -> &TimeGrid;
    fn n_paths(&self) -> usize;
    /// Ensemble average of `Z(t_i, s_j)^2`.
    fn mean_square(&self, i: usize, j: usize) -> f64;
}

/// Explicitly stored surfaces, one per path.
#[derive(Debug, Clone)]
pub struct DenseZEnsemble {
    surfaces: Vec<DenseZSurface>,
    grid: TimeGrid,
}

impl DenseZEnsemble {
    pub fn new(surfaces: Vec<DenseZSurface>) -> Result<Self> {
        let grid = *surfaces
            .first()
            .ok_or_else(|| config("empty surface ensemble"))?
            .grid();
        if surfaces.iter().any(|s| *s.grid() != grid) {
            return Err(config("surfaces do not share a grid"));
        }
        Ok(Self { surfaces, grid })
    }

    pub fn surfaces(&self) -> &[DenseZSurface] {
        &self.surfaces
    }
}

impl ZEnsemble for DenseZEnsemble {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn n_paths(&self) -> usize {
        self.surfaces.len()
    }

    fn mean_square(&self, i: usize, j: usize) -> f64 {
        compensated_sum(self.surfaces.iter().map(|s| s.node(i, j).powi(2))) / self.surfaces.len() as f64
    }
}

/// Squared discrete weighted norms `(‖Y‖²_H1, ‖Z‖²_H2, ‖Y‖²_S2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    pub h1: f64,
    pub h2: f64,
    pub s2: f64,
}

/// Left Riemann sums of `E∫_{-T}^{T} e^{βs}|Y(s)|² ds`, `E∫∫ e^{βs}|Z(t,s)|² ds dt`
/// over `[0,T]²`, and `E sup_{[0,T]} e^{βs}|Y(s)|²`, with `Y(s) = Y(0)` on `[-T, 0)`.
pub fn weighted_norms<Z: ZEnsemble + ?Sized>(y: &YEnsemble, z: &Z, beta: f64) -> Result<WeightedNorms> {
    if y.grid() != z.grid() {
        return Err(config("Y and Z ensembles live on different grids"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(config(format!("beta must be finite and nonnegative, got {beta}")));
    }
    let grid = *y.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let mean_sq: Vec<f64> = (0..=n)
        .map(|i| compensated_sum((0..y.n_paths()).map(|p| y.path(p)[i].powi(2))) / y.n_paths() as f64)
        .collect();

    let mut h1 = CompensatedSum::new();
    for k in -(n as isize)..0 {
        h1.add((beta * grid.time(k)).exp() * mean_sq[0]);
    }
    for (i, m) in mean_sq.iter().enumerate().take(n) {
        h1.add((beta * grid.time(i as isize)).exp() * m);
    }

    let weights: Vec<f64> = (0..n).map(|j| (beta * grid.time(j as isize)).exp()).collect();
    let mut h2 = CompensatedSum::new();
    for i in 0..n {
        for (j, w) in weights.iter().enumerate() {
            h2.add(w * z.mean_square(i, j));
        }
    }

    let s2 = compensated_sum((0..y.n_paths()).map(|p| {
        y.path(p)
            .iter()
            .enumerate()
            .map(|(i, v)| (beta * grid.time(i as isize)).exp() * v * v)
            .fold(0.0_f64, f64::max)
    })) / y.n_paths() as f64;

    Ok(WeightedNorms {
        h1: h1.value() * dt,
        h2: h2.value() * dt * dt,
        s2,
    })
}
