//! Delay measures on `[-T, 0]` and quadrature of past path segments against them.
//!
//! A [`DelayMeasure`] is the continuous description (used for closed-form
//! moments). Before it touches sampled paths it is snapped onto the grid as a
//! [`SnappedMeasure`]: a list of non-positive node offsets with probability
//! weights. Dirac and atom locations snap to the nearest node; a uniform
//! measure snaps its endpoints and becomes trapezoidal weights over the nodes
//! in between.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::grid::{TimeGrid, YPath, ZSurface};
use crate::numeric::CompensatedSum;

const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMeasure {
    /// Unit mass at `u0 ∈ [-T, 0]`.
    Dirac(f64),
    /// Uniform on `[a, b]` with `-T <= a < b <= 0`.
    Uniform(f64, f64),
    /// Finite atoms `(u_k, w_k)` with positive weights summing to one.
    Atoms(Vec<(f64, f64)>),
}

impl DelayMeasure {
    pub fn dirac(u0: f64) -> Result<Self> {
        let m = DelayMeasure::Dirac(u0);
        m.check_shape()?;
        Ok(m)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let m = DelayMeasure::Uniform(a, b);
        m.check_shape()?;
        Ok(m)
    }

    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let m = DelayMeasure::Atoms(atoms);
        m.check_shape()?;
        Ok(m)
    }

    /// Checks everything that does not depend on the horizon.
    pub fn check_shape(&self) -> Result<()> {
        match self {
            DelayMeasure::Dirac(u) => {
                if !(u.is_finite() && *u <= 0.0) {
                    return Err(config(format!("dirac location {u} must be <= 0")));
                }
            }
            DelayMeasure::Uniform(a, b) => {
                if !(a.is_finite() && b.is_finite() && a < b && *b <= 0.0) {
                    return Err(config(format!("uniform interval [{a}, {b}] must satisfy a < b <= 0")));
                }
            }
            DelayMeasure::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Err(config("atom list is empty"));
                }
                for &(u, w) in atoms {
                    if !(u.is_finite() && u <= 0.0) {
                        return Err(config(format!("atom location {u} must be <= 0")));
                    }
                    if !(w.is_finite() && w > 0.0) {
                        return Err(config(format!("atom weight {w} must be positive")));
                    }
                }
                let mass: f64 = atoms.iter().map(|a| a.1).sum();
                if (mass - 1.0).abs() > MASS_TOLERANCE {
                    return Err(config(format!("atom weights sum to {mass}, expected 1")));
                }
            }
        }
        Ok(())
    }

    /// Shape checks plus `support ⊆ [-T, 0]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        self.check_shape()?;
        let r = self.support_radius();
        if r > horizon * (1.0 + 1e-12) {
            return Err(config(format!("measure support [-{r}, 0] exceeds delay horizon {horizon}")));
        }
        Ok(())
    }

    /// Smallest `γ >= 0` with support inside `[-γ, 0]`.
    pub fn support_radius(&self) -> f64 {
        match self {
            DelayMeasure::Dirac(u) => -u,
            DelayMeasure::Uniform(a, _) => -a,
            DelayMeasure::Atoms(atoms) => atoms.iter().map(|&(u, _)| -u).fold(0.0, f64::max),
        }
        .max(0.0)
    }

    /// `∫ e^{-βu} α(du)` in closed form.
    pub fn exp_moment(&self, beta: f64) -> f64 {
        match self {
            DelayMeasure::Dirac(u) => (-beta * u).exp(),
            DelayMeasure::Uniform(a, b) => {
                let width = b - a;
                let x = beta * width;
                if x == 0.0 {
                    1.0
                } else {
                    // (e^{-βa} - e^{-βb}) / (β(b-a)) = e^{-βb} · expm1(β(b-a)) / (β(b-a))
                    (-beta * b).exp() * x.exp_m1() / x
                }
            }
            DelayMeasure::Atoms(atoms) => atoms.iter().map(|&(u, w)| w * (-beta * u).exp()).sum(),
        }
    }

    pub fn snap(&self, grid: &TimeGrid) -> Result<SnappedMeasure> {
        self.validate(grid.horizon())?;
        let dt = grid.dt();
        let snap = |u: f64| {
            let k = grid.nearest_index(u);
            (k, (u - k as f64 * dt).abs())
        };
        let (weights, snap_distance) = match self {
            DelayMeasure::Dirac(u) => {
                let (k, d) = snap(*u);
                (vec![(k, 1.0)], d)
            }
            DelayMeasure::Atoms(atoms) => {
                let mut dist = 0.0_f64;
                let w = atoms
                    .iter()
                    .map(|&(u, w)| {
                        let (k, d) = snap(u);
                        dist = dist.max(d);
                        (k, w)
                    })
                    .collect();
                (w, dist)
            }
            DelayMeasure::Uniform(a, b) => {
                let (ka, da) = snap(*a);
                let (kb, db) = snap(*b);
                let dist = da.max(db);
                if ka == kb {
                    (vec![(ka, 1.0)], dist)
                } else {
                    let span = (kb - ka) as f64;
                    let w = (ka..=kb)
                        .map(|k| {
                            let w = if k == ka || k == kb { 0.5 } else { 1.0 };
                            (k, w / span)
                        })
                        .collect();
                    (w, dist)
                }
            }
        };
        Ok(SnappedMeasure {
            grid: *grid,
            weights,
            snap_distance,
        })
    }
}

/// A delay measure restricted to grid offsets `k <= 0` (in units of `dt`).
#[derive(Debug, Clone, PartialEq)]
pub struct SnappedMeasure {
    grid: TimeGrid,
    weights: Vec<(isize, f64)>,
    snap_distance: f64,
}

impl SnappedMeasure {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `(offset, weight)` pairs.
    pub fn weights(&self) -> &[(isize, f64)] {
        &self.weights
    }

    /// Largest distance any atom or endpoint moved while snapping.
    pub fn snap_distance(&self) -> f64 {
        self.snap_distance
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().map(|w| w.1).sum()
    }

    /// `Σ_k w_k f(k)` over the snapped offsets.
    #[inline]
    pub fn expect(&self, mut f: impl FnMut(isize) -> f64) -> f64 {
        if let [(k, w)] = self.weights[..] {
            return w * f(k);
        }
        let mut acc = CompensatedSum::new();
        for &(k, w) in &self.weights {
            acc.add(w * f(k));
        }
        acc.value()
    }

    /// `∫ y(s_j + u) α(du)` with `y(v) = y(0)` for `v < 0`.
    #[inline]
    pub fn past_y_at(&self, path: &YPath, j: usize) -> f64 {
        self.expect(|k| path.at_index(j as isize + k))
    }

    /// `∫ y(s_j + u) 1{s_j + u >= 0} α(du)`: negative times contribute nothing.
    #[inline]
    pub fn past_y_truncated_at(&self, path: &YPath, j: usize) -> f64 {
        self.expect(|k| {
            let idx = j as isize + k;
            if idx < 0 {
                0.0
            } else {
                path.at_index(idx)
            }
        })
    }

    /// `∫ z(t_i + u, s_j + u) α(du)` with zero extension.
    #[inline]
    pub fn past_z_at<Z: ZSurface + ?Sized>(&self, surface: &Z, i: usize, j: usize) -> f64 {
        self.expect(|k| surface.at_index(i as isize + k, j as isize + k))
    }

    /// Time-based quadrature of the extended past `Y` segment at `s ∈ [0, T]`.
    pub fn integrate_past_y(&self, path: &YPath, s: f64) -> Result<f64> {
        let j = self.node_in_range(s, "s")?;
        Ok(self.past_y_at(path, j))
    }

    /// Time-based quadrature of the diagonal `Z` segment at `0 <= t <= s <= T`.
    pub fn integrate_past_z<Z: ZSurface + ?Sized>(&self, surface: &Z, t: f64, s: f64) -> Result<f64> {
        if t > s {
            return Err(domain(format!("(t, s) = ({t}, {s}) lies outside t <= s")));
        }
        let i = self.node_in_range(t, "t")?;
        let j = self.node_in_range(s, "s")?;
        Ok(self.past_z_at(surface, i, j))
    }

    fn node_in_range(&self, x: f64, what: &str) -> Result<usize> {
        let t = self.grid.horizon();
        if !(x >= 0.0 && x <= t * (1.0 + 1e-12)) {
            return Err(domain(format!("{what} = {x} outside [0, {t}]")));
        }
        Ok(self.grid.nearest_index(x) as usize)
    }
}
