//! State solver: age transport along characteristics, implicit degenerate
//! diffusion per age layer, renewal of the newborn layer.
//!
//! One step `n -> n+1` is `Y ↦ P M_n (Y + Δt χ_ω F^n)`: `M_n` diffuses every age
//! layer, `P` shifts each layer one age cell, drops the last one (outflow at
//! `a = A`) and fills layer 0 with the renewal integral of the new level.

use crate::coefficients::DiffusionCoefficient;
use crate::error::{Error, Result};
use crate::field::{weighted_norm, Field, Rank, SubBox, Weight};
use crate::grid::Grid;
use crate::rates::RateSpec;
use crate::region::ControlRegion;
use crate::scheme::{Propagator, TimeScheme};

#[derive(Debug, Clone)]
pub struct ForwardProblem {
    pub coeff: DiffusionCoefficient,
    pub rates: RateSpec,
    pub region: ControlRegion,
    pub grid: Grid,
    /// Slice over `(a, x)`.
    pub y0: Field,
    /// Trajectory; only its values on `ω` enter the equation.
    pub f: Option<Field>,
    pub scheme: TimeScheme,
}

impl ForwardProblem {
    pub fn new(coeff: DiffusionCoefficient, rates: RateSpec, region: ControlRegion, grid: Grid, y0: Field) -> Self {
        ForwardProblem { coeff, rates, region, grid, y0, f: None, scheme: TimeScheme::default() }
    }

    pub fn with_control(mut self, f: Field) -> Self {
        self.f = Some(f);
        self
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `‖y(t_n)‖²` for every level.
    pub norms_sq: Vec<f64>,
    /// `sup_t ‖y(t)‖²`.
    pub sup_norm_sq: f64,
    /// `∫₀^T ∫₀^A ∫₀¹ k y_x² dx da dt`.
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub trajectory: Field,
    pub energy: EnergyReport,
}

impl ForwardSolution {
    pub fn terminal(&self) -> Field {
        self.trajectory.slice_at(self.trajectory.grid().nt())
    }
}

/// Renewal operator of one time level, reused by the forward and backward marches.
#[derive(Debug, Clone)]
pub(crate) struct Renewal {
    /// `β(a_j, x_i)`, row-major `(a, x)`.
    beta: Vec<f64>,
    /// `1 / (1 - Δa β(a_0, x_i))`.
    gain: Vec<f64>,
    active: bool,
}

impl Renewal {
    pub(crate) fn new(rates: &RateSpec, grid: &Grid) -> Result<Self> {
        let beta = rates.beta_table(grid);
        let da = grid.da();
        let mut gain = Vec::with_capacity(grid.nx());
        for i in 0..grid.nx() {
            let d = 1.0 - da * beta[i];
            if !(d > 0.0) {
                return Err(Error::param(format!(
                    "da * beta(a_0, x_{i}) = {} must be below 1 for the renewal to be solvable",
                    da * beta[i]
                )));
            }
            gain.push(1.0 / d);
        }
        let active = beta.iter().any(|&b| b != 0.0);
        Ok(Renewal { beta, gain, active })
    }

    /// In-place `P`: shift ages, drop the last cell, renew layer 0.
    pub(crate) fn shift(&self, grid: &Grid, s: &mut [f64]) {
        let nx = grid.nx();
        let len = s.len();
        s.copy_within(0..len - nx, nx);
        s[..nx].iter_mut().for_each(|v| *v = 0.0);
        if self.active {
            let da = grid.da();
            for i in 0..nx {
                let mut acc = 0.0;
                for j in 1..grid.na() {
                    acc += self.beta[j * nx + i] * s[j * nx + i];
                }
                s[i] = self.gain[i] * da * acc;
            }
        }
    }

    /// In-place `Pᵀ`.
    pub(crate) fn shift_transpose(&self, grid: &Grid, v: &mut [f64]) {
        let nx = grid.nx();
        let len = v.len();
        let newborn: Vec<f64> = v[..nx].to_vec();
        v.copy_within(nx..len, 0);
        v[len - nx..].iter_mut().for_each(|x| *x = 0.0);
        if self.active {
            let da = grid.da();
            for j in 0..grid.na() - 1 {
                for i in 0..nx {
                    v[j * nx + i] += self.gain[i] * da * self.beta[(j + 1) * nx + i] * newborn[i];
                }
            }
        }
    }
}

pub(crate) fn check_slice(field: &Field, grid: &Grid, what: &str) -> Result<()> {
    field.expect_grid(grid, what)?;
    field.expect_rank(Rank::Slice, what)
}

pub(crate) fn check_trajectory(field: &Field, grid: &Grid, what: &str) -> Result<()> {
    field.expect_grid(grid, what)?;
    field.expect_rank(Rank::Trajectory, what)
}

/// Marches the state; `f` must already be a trajectory on `grid`.
pub(crate) fn march_forward(
    prop: &Propagator,
    renewal: &Renewal,
    mask: &[f64],
    y0: &[f64],
    f: Option<&Field>,
) -> Result<Field> {
    let grid = *prop.grid();
    let mut values = Vec::with_capacity(grid.trajectory_len());
    values.extend_from_slice(y0);
    march(prop, renewal, mask, y0, f, |s| values.extend_from_slice(s))?;
    Field::from_values(&grid, Rank::Trajectory, values)
}

/// Same march, keeping only the final level.
pub(crate) fn march_forward_terminal(
    prop: &Propagator,
    renewal: &Renewal,
    mask: &[f64],
    y0: &[f64],
    f: Option<&Field>,
) -> Result<Vec<f64>> {
    march(prop, renewal, mask, y0, f, |_| ())
}

fn march(
    prop: &Propagator,
    renewal: &Renewal,
    mask: &[f64],
    y0: &[f64],
    f: Option<&Field>,
    mut keep: impl FnMut(&[f64]),
) -> Result<Vec<f64>> {
    let grid = *prop.grid();
    let nx = grid.nx();
    let dt = grid.dt();
    let mut s = y0.to_vec();
    for n in 0..grid.nt() {
        if let Some(f) = f {
            let fl = f.level(n);
            for (k, v) in s.iter_mut().enumerate() {
                if mask[k % nx] != 0.0 {
                    *v += dt * fl[k];
                }
            }
        }
        prop.diffuse(n, &mut s)?;
        renewal.shift(&grid, &mut s);
        keep(&s);
    }
    Ok(s)
}

/// Solves the state system. Walls are homogeneous Dirichlet through the
/// finite-volume ghost cells, so `y0` needs no projection.
pub fn solve_forward(problem: &ForwardProblem) -> Result<ForwardSolution> {
    let grid = problem.grid;
    check_slice(&problem.y0, &grid, "y0")?;
    if let Some(f) = &problem.f {
        check_trajectory(f, &grid, "control")?;
    }
    let prop = Propagator::new(&problem.coeff, &problem.rates, &grid, problem.scheme)?;
    let renewal = Renewal::new(&problem.rates, &grid)?;
    let mask = problem.region.mask(&grid);
    let trajectory = march_forward(&prop, &renewal, &mask, problem.y0.values(), problem.f.as_ref())?;
    let energy = energy_of(&trajectory, &prop);
    Ok(ForwardSolution { trajectory, energy })
}

fn energy_of(traj: &Field, prop: &Propagator) -> EnergyReport {
    let grid = traj.grid();
    let (nx, da, dx) = (grid.nx(), grid.da(), grid.dx());
    let mut norms_sq = Vec::with_capacity(grid.levels());
    let mut layer_energy = Vec::with_capacity(grid.levels());
    for n in 0..grid.levels() {
        let lvl = traj.level(n);
        norms_sq.push(da * dx * lvl.iter().map(|v| v * v).sum::<f64>());
        let e: f64 = lvl.chunks(nx).map(|layer| prop.operator().dirichlet_energy(layer)).sum();
        layer_energy.push(da * e);
    }
    let dt = grid.dt();
    let last = layer_energy.len() - 1;
    let dissipation = layer_energy
        .iter()
        .enumerate()
        .map(|(n, e)| if n == 0 || n == last { 0.5 * dt * e } else { dt * e })
        .sum();
    let sup_norm_sq = norms_sq.iter().cloned().fold(0.0, f64::max);
    EnergyReport { norms_sq, sup_norm_sq, dissipation }
}

/// `Δa Σ_j β(a_j, x) slice(a_j, x)`: midpoint rule over the age cells.
pub fn renewal_integral(slice: &Field, beta: &dyn Fn(f64, f64) -> f64) -> Result<Field> {
    slice.expect_rank(Rank::Slice, "renewal input")?;
    let grid = slice.grid();
    let nx = grid.nx();
    let mut out = vec![0.0; nx];
    for j in 0..grid.na() {
        let a = grid.a(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += beta(a, grid.x(i)) * slice.values()[j * nx + i];
        }
    }
    out.iter_mut().for_each(|v| *v *= grid.da());
    Field::from_values(grid, Rank::Profile, out)
}

/// `[sup_t ‖y‖² + ∫∫ ‖√k y_x‖²] / [‖y0‖² + ‖χ_ω f‖²_{L²(Q)}]`, with `0/0 = 0`.
pub fn energy_estimate_check(solution: &ForwardSolution, problem: &ForwardProblem) -> Result<f64> {
    let num = solution.energy.sup_norm_sq + solution.energy.dissipation;
    let y0 = weighted_norm(&problem.y0, Weight::Constant(1.0), &SubBox::full())?;
    let f = match &problem.f {
        Some(f) => {
            let mask = Field::from_values(&problem.grid, Rank::Profile, problem.region.mask(&problem.grid))?;
            weighted_norm(f, Weight::Field(&mask), &SubBox::full())?
        }
        None => 0.0,
    };
    let den = y0 + f;
    if den == 0.0 {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Inconsistency(format!("zero data produced energy {num}")));
    }
    Ok(num / den)
}
