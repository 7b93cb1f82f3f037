//! Delayed generators `f(t, s, Y_s, Z_{t,s})`.
//!
//! Generators see whole paths plus the snapped delay measure and read their
//! segments only through measure integrals. Every generator vanishes when
//! `t < 0` or `s < 0`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{DenseZSurface, TimeGrid, YPath, ZSurface};
use crate::measure::SnappedMeasure;
use crate::numeric::fit_line;

/// Built-in generator families, tagged as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinGenerator {
    Zero,
    /// `K/(t+1) · ∫ Y(s+u) α(du)`, with `Y(v) = Y(0)` for `v < 0`.
    DiracLinearY(f64),
    /// `K · ∫ Y(s+u) 1{s+u >= 0} α(du)`; for α uniform on `[-T,0]` this is
    /// `(K/T) ∫_0^s Y(v) dv`.
    UniformLinearY(f64),
    /// `K · ∫ Z(t+u, s+u) α(du)`, independent of `Y`.
    LinearDelayedZ(f64),
}

/// Arguments handed to a generator evaluation.
///
/// `t` is the explicit time argument; `t_index`/`s_index` locate the segment
/// on the grid. They normally agree with `t`/`s`, except when probing the
/// explicit time dependence with a frozen segment.
pub struct GeneratorInput<'a> {
    pub t: f64,
    pub s: f64,
    pub t_index: usize,
    pub s_index: usize,
    pub y: &'a YPath,
    pub z: &'a dyn ZSurface,
    pub measure: &'a SnappedMeasure,
}

type CustomFn = dyn Fn(&GeneratorInput<'_>) -> std::result::Result<f64, String> + Send + Sync;

#[derive(Clone)]
pub struct CustomGenerator {
    name: String,
    eval: Arc<CustomFn>,
}

impl fmt::Debug for CustomGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGenerator").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum GeneratorKind {
    Builtin(BuiltinGenerator),
    Custom(CustomGenerator),
}

/// A generator together with its declared regularity constants.
///
/// `lipschitz` is the constant `L` in
/// `|f(y,z) - f(y',z')| <= L (∫|y-y'|² dα + ∫|z-z'|² dα)^{1/2}`, and it is the
/// `K` that enters the contraction constant. `holder_constant`/`holder_exponent`
/// bound the explicit time dependence `|f(t',s,·) - f(t,s,·)| <= K'|t'-t|^γ`.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    kind: GeneratorKind,
    lipschitz: f64,
    holder_constant: f64,
    holder_exponent: f64,
    depends_on_y: bool,
    depends_on_z: bool,
}

impl From<BuiltinGenerator> for GeneratorSpec {
    fn from(b: BuiltinGenerator) -> Self {
        let (lipschitz, holder_constant, dy, dz) = match b {
            BuiltinGenerator::Zero => (0.0, 0.0, false, false),
            BuiltinGenerator::DiracLinearY(k) => (k.abs(), k.abs(), true, false),
            BuiltinGenerator::UniformLinearY(k) => (k.abs(), 0.0, true, false),
            BuiltinGenerator::LinearDelayedZ(k) => (k.abs(), 0.0, false, true),
        };
        GeneratorSpec {
            kind: GeneratorKind::Builtin(b),
            lipschitz,
            holder_constant,
            holder_exponent: 0.5,
            depends_on_y: dy,
            depends_on_z: dz,
        }
    }
}

impl GeneratorSpec {
    pub fn zero() -> Self {
        BuiltinGenerator::Zero.into()
    }

    pub fn dirac_linear_y(k: f64) -> Self {
        BuiltinGenerator::DiracLinearY(k).into()
    }

    pub fn uniform_linear_y(k: f64) -> Self {
        BuiltinGenerator::UniformLinearY(k).into()
    }

    pub fn linear_delayed_z(k: f64) -> Self {
        BuiltinGenerator::LinearDelayedZ(k).into()
    }

    /// A user-supplied generator. The declared constants are trusted.
    #[allow(clippy::too_many_arguments)]
    pub fn custom<F>(
        name: impl Into<String>,
        lipschitz: f64,
        holder_constant: f64,
        holder_exponent: f64,
        depends_on_y: bool,
        depends_on_z: bool,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(&GeneratorInput<'_>) -> std::result::Result<f64, String> + Send + Sync + 'static,
    {
        if !(lipschitz >= 0.0 && holder_constant >= 0.0) {
            return Err(domain("declared constants must be nonnegative"));
        }
        if !(holder_exponent > 0.0 && holder_exponent <= 0.5) {
            return Err(domain(format!("holder exponent {holder_exponent} outside (0, 1/2]")));
        }
        Ok(GeneratorSpec {
            kind: GeneratorKind::Custom(CustomGenerator {
                name: name.into(),
                eval: Arc::new(eval),
            }),
            lipschitz,
            holder_constant,
            holder_exponent,
            depends_on_y,
            depends_on_z,
        })
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn builtin(&self) -> Option<BuiltinGenerator> {
        match self.kind {
            GeneratorKind::Builtin(b) => Some(b),
            GeneratorKind::Custom(_) => None,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    pub fn depends_on_y(&self) -> bool {
        self.depends_on_y
    }

    pub fn depends_on_z(&self) -> bool {
        self.depends_on_z
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, GeneratorKind::Builtin(BuiltinGenerator::Zero))
    }

    /// `f(t, s, Y_s, Z_{t,s})` at arbitrary times; zero when `t < 0` or `s < 0`.
    pub fn evaluate<Z: ZSurface>(
        &self,
        measure: &SnappedMeasure,
        t: f64,
        s: f64,
        y: &YPath,
        z: &Z,
    ) -> Result<f64> {
        if t < 0.0 || s < 0.0 {
            return Ok(0.0);
        }
        let grid = measure.grid();
        let horizon = grid.horizon() * (1.0 + 1e-12);
        if t > horizon || s > horizon {
            return Err(domain(format!("(t, s) = ({t}, {s}) beyond horizon {}", grid.horizon())));
        }
        let input = GeneratorInput {
            t,
            s,
            t_index: grid.nearest_index(t) as usize,
            s_index: grid.nearest_index(s) as usize,
            y,
            z,
            measure,
        };
        self.evaluate_input(&input)
    }

    /// Evaluation at grid nodes `(t_i, s_j)`.
    pub fn evaluate_at<Z: ZSurface>(
        &self,
        measure: &SnappedMeasure,
        i: usize,
        j: usize,
        y: &YPath,
        z: &Z,
    ) -> Result<f64> {
        let grid = measure.grid();
        let input = GeneratorInput {
            t: grid.time(i as isize),
            s: grid.time(j as isize),
            t_index: i,
            s_index: j,
            y,
            z,
            measure,
        };
        self.evaluate_input(&input)
    }

    pub fn evaluate_input(&self, input: &GeneratorInput<'_>) -> Result<f64> {
        if input.t < 0.0 || input.s < 0.0 {
            return Ok(0.0);
        }
        let m = input.measure;
        Ok(match &self.kind {
            GeneratorKind::Builtin(b) => match *b {
                BuiltinGenerator::Zero => 0.0,
                BuiltinGenerator::DiracLinearY(k) => k / (input.t + 1.0) * m.past_y_at(input.y, input.s_index),
                BuiltinGenerator::UniformLinearY(k) => k * m.past_y_truncated_at(input.y, input.s_index),
                BuiltinGenerator::LinearDelayedZ(k) => k * m.past_z_at(input.z, input.t_index, input.s_index),
            },
            GeneratorKind::Custom(c) => (c.eval)(input).map_err(Error::Evaluation)?,
        })
    }

    /// Left-endpoint time integrals `R_i = Σ_{j=i}^{N-1} f(t_i, s_j) dt` for
    /// every node `i` (with `R_N = 0`).
    pub fn row_integrals<Z: ZSurface>(&self, measure: &SnappedMeasure, y: &YPath, z: &Z) -> Result<Vec<f64>> {
        let grid = *measure.grid();
        let n = grid.n_steps();
        let dt = grid.dt();
        let separable = |coef: &dyn Fn(usize) -> f64, g: &dyn Fn(usize) -> f64| {
            let mut rows = vec![0.0; n + 1];
            let mut tail = 0.0;
            for i in (0..n).rev() {
                tail += g(i) * dt;
                rows[i] = coef(i) * tail;
            }
            rows
        };
        match &self.kind {
            GeneratorKind::Builtin(BuiltinGenerator::Zero) => Ok(vec![0.0; n + 1]),
            GeneratorKind::Builtin(BuiltinGenerator::DiracLinearY(k)) => Ok(separable(
                &|i| k / (grid.time(i as isize) + 1.0),
                &|j| measure.past_y_at(y, j),
            )),
            GeneratorKind::Builtin(BuiltinGenerator::UniformLinearY(k)) => {
                Ok(separable(&|_| *k, &|j| measure.past_y_truncated_at(y, j)))
            }
            _ => {
                let mut rows = vec![0.0; n + 1];
                for (i, row) in rows.iter_mut().enumerate().take(n) {
                    let mut acc = 0.0;
                    for j in (i..n).rev() {
                        acc += self.evaluate_at(measure, i, j, y, z)? * dt;
                    }
                    *row = acc;
                }
                Ok(rows)
            }
        }
    }
}

fn random_path(grid: TimeGrid, rng: &mut ChaCha8Rng) -> YPath {
    let values = (0..grid.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
    YPath::new(grid, values).expect("sized to grid")
}

fn random_surface(grid: TimeGrid, rng: &mut ChaCha8Rng) -> DenseZSurface {
    let m = grid.n_nodes();
    let values = (0..m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseZSurface::new(grid, values).expect("sized to grid")
}

/// Largest observed `|f(y,z) - f(y',z')| / (∫|Δy|² dα + ∫|Δz|² dα)^{1/2}` over
/// random piecewise-constant segment pairs and random node pairs `t_i <= s_j`.
pub fn empirical_lipschitz(
    generator: &GeneratorSpec,
    measure: &SnappedMeasure,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    if probes == 0 {
        return Err(domain("need at least one probe"));
    }
    let grid = *measure.grid();
    let n = grid.n_steps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for _ in 0..probes {
        let (y1, y2) = (random_path(grid, &mut rng), random_path(grid, &mut rng));
        let (z1, z2) = (random_surface(grid, &mut rng), random_surface(grid, &mut rng));
        let i = rng.random_range(0..=n);
        let j = rng.random_range(i..=n);
        let f1 = generator.evaluate_at(measure, i, j, &y1, &z1)?;
        let f2 = generator.evaluate_at(measure, i, j, &y2, &z2)?;
        let dy = measure.expect(|k| {
            let d = y1.at_index(j as isize + k) - y2.at_index(j as isize + k);
            d * d
        });
        let dz = measure.expect(|k| {
            let (a, b) = (i as isize + k, j as isize + k);
            let d = z1.at_index(a, b) - z2.at_index(a, b);
            d * d
        });
        let denom = (dy + dz).sqrt();
        if denom > 1e-300 {
            best = best.max((f1 - f2).abs() / denom);
        }
    }
    Ok(best)
}

/// Log-log fit of the explicit time dependence of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub khat: f64,
    /// `None` when fewer than two probes showed a nonzero increment.
    pub gammahat: Option<f64>,
}

/// Fits `|f(t',s,y,z) - f(t,s,y,z)| ≈ K' |t'-t|^γ` over random frozen segments
/// and lags spanning twelve octaves below `T`.
pub fn empirical_holder_t(
    generator: &GeneratorSpec,
    measure: &SnappedMeasure,
    probes: usize,
    seed: u64,
) -> Result<HolderEstimate> {
    if probes < 2 {
        return Err(domain("need at least two probes"));
    }
    let grid = *measure.grid();
    let horizon = grid.horizon();
    let n = grid.n_steps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_lag = Vec::with_capacity(probes);
    let mut log_inc = Vec::with_capacity(probes);
    let mut largest = 0.0_f64;
    for _ in 0..probes {
        let y = random_path(grid, &mut rng);
        let z = random_surface(grid, &mut rng);
        let octave: i32 = rng.random_range(1..=12);
        let lag = horizon * 0.5f64.powi(octave);
        let t = rng.random_range(0.0..(horizon - lag));
        let i = grid.nearest_index(t) as usize;
        let j = rng.random_range(i..=n);
        let s = grid.time(j as isize);
        let at = |time: f64| {
            generator.evaluate_input(&GeneratorInput {
                t: time,
                s,
                t_index: i,
                s_index: j,
                y: &y,
                z: &z,
                measure,
            })
        };
        let inc = (at(t + lag)? - at(t)?).abs();
        largest = largest.max(inc);
        if inc > 0.0 {
            log_lag.push(lag.ln());
            log_inc.push(inc.ln());
        }
    }
    match fit_line(&log_lag, &log_inc) {
        Some(fit) if log_lag.len() >= 2 => Ok(HolderEstimate {
            khat: fit.intercept.exp(),
            gammahat: Some(fit.slope),
        }),
        _ => Ok(HolderEstimate {
            khat: largest,
            gammahat: None,
        }),
    }
}
