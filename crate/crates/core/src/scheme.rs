//! Spatial operator and the implicit diffusion–absorption step shared by the
//! forward and backward solvers.
//!
//! For one age layer the step maps `u` to `r(Δt L) u`, where
//! `L = K + diag(μ)` and `K` is the finite-volume matrix of `-(k u_x)_x` with
//! homogeneous Dirichlet walls. `r` is a rational function, so the step matrix
//! is symmetric and equal to its own transpose; the backward solver reuses it
//! unchanged.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::coefficients::DiffusionCoefficient;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rates::RateSpec;
use crate::tridiag::{SymTridiag, Thomas};

/// Relative residual accepted from any tridiagonal solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    BackwardEuler,
    /// Trapezoid stage followed by BDF2 (L-stable, second order).
    #[default]
    TrBdf2,
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

/// Finite-volume matrix of `-(k u_x)_x` on the x-cells.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    k: SymTridiag,
    dx: f64,
}

impl DiffusionOperator {
    pub fn new(coeff: &DiffusionCoefficient, grid: &Grid) -> Self {
        let nx = grid.nx();
        let h2 = grid.dx() * grid.dx();
        // edge conductances; the walls see a ghost cell at distance dx/2
        let c: Vec<f64> = (0..=nx)
            .map(|e| {
                let k = coeff.k(grid.x_edge(e));
                if e == 0 || e == nx {
                    2.0 * k / h2
                } else {
                    k / h2
                }
            })
            .collect();
        let diag = (0..nx).map(|i| c[i] + c[i + 1]).collect();
        let off = (1..nx).map(|e| -c[e]).collect();
        DiffusionOperator { k: SymTridiag::new(diag, off), dx: grid.dx() }
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.k
    }

    /// `K + diag(mu)`.
    pub fn with_mortality(&self, mu: &[f64]) -> SymTridiag {
        let diag = self.k.diag.iter().zip(mu).map(|(d, m)| d + m).collect();
        SymTridiag::new(diag, self.k.off.clone())
    }

    /// Discrete `∫ k u_x² dx`.
    pub fn dirichlet_energy(&self, u: &[f64]) -> f64 {
        self.dx * self.k.quad(u)
    }
}

/// One implicit step `u ↦ r(Δt L) u` with factored systems.
#[derive(Debug, Clone)]
pub struct StepMap {
    scheme: TimeScheme,
    explicit: Option<SymTridiag>,
    first: Option<Thomas>,
    last: Thomas,
}

impl StepMap {
    pub fn new(l: &SymTridiag, dt: f64, scheme: TimeScheme) -> Result<Self> {
        match scheme {
            TimeScheme::BackwardEuler => Ok(StepMap {
                scheme,
                explicit: None,
                first: None,
                last: l.shifted_identity(dt).factor()?,
            }),
            TimeScheme::TrBdf2 => {
                let half = 0.5 * GAMMA * dt;
                let w = (1.0 - GAMMA) / (2.0 - GAMMA);
                Ok(StepMap {
                    scheme,
                    explicit: Some(l.shifted_identity(-half)),
                    first: Some(l.shifted_identity(half).factor()?),
                    last: l.shifted_identity(w * dt).factor()?,
                })
            }
        }
    }

    pub fn scheme(&self) -> TimeScheme {
        self.scheme
    }

    /// Applies the step in place; returns the largest relative solve residual.
    pub fn apply(&self, u: &mut [f64], work: &mut Workspace) -> f64 {
        let n = u.len();
        work.ensure(n);
        match self.scheme {
            TimeScheme::BackwardEuler => self.last.solve_checked(u, &mut work.scratch),
            TimeScheme::TrBdf2 => {
                let a1 = 1.0 / (GAMMA * (2.0 - GAMMA));
                let a0 = (1.0 - GAMMA) * (1.0 - GAMMA) / (GAMMA * (2.0 - GAMMA));
                self.explicit.as_ref().unwrap().mul(u, &mut work.stage);
                let r1 = self.first.as_ref().unwrap().solve_checked(&mut work.stage, &mut work.scratch);
                for i in 0..n {
                    u[i] = a1 * work.stage[i] - a0 * u[i];
                }
                let r2 = self.last.solve_checked(u, &mut work.scratch);
                r1.max(r2)
            }
        }
    }
}

/// Scratch buffers for [`StepMap::apply`].
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    stage: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, n: usize) {
        if self.stage.len() != n {
            self.stage = vec![0.0; n];
            self.scratch = vec![0.0; n];
        }
    }
}

enum Maps {
    Stationary(StepMap),
    Varying,
}

/// Per-step, per-age-layer step maps for one `(coeff, rates, grid, scheme)`.
///
/// The map of step `n -> n+1` on layer `j` uses `μ` at the midpoint
/// `(t_n + Δt/2, a_j + Δa/2)` of the characteristic segment.
pub struct Propagator {
    grid: Grid,
    op: DiffusionOperator,
    rates: RateSpec,
    scheme: TimeScheme,
    maps: Maps,
}

impl Propagator {
    pub fn new(coeff: &DiffusionCoefficient, rates: &RateSpec, grid: &Grid, scheme: TimeScheme) -> Result<Self> {
        let op = DiffusionOperator::new(coeff, grid);
        let maps = if rates.mu_stationary() {
            let mu: Vec<f64> = (0..grid.nx()).map(|i| rates.mu(0.5 * grid.dt(), 0.5 * grid.da(), grid.x(i))).collect();
            Maps::Stationary(StepMap::new(&op.with_mortality(&mu), grid.dt(), scheme)?)
        } else {
            Maps::Varying
        };
        Ok(Propagator { grid: *grid, op, rates: rates.clone(), scheme, maps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn operator(&self) -> &DiffusionOperator {
        &self.op
    }
    pub fn scheme(&self) -> TimeScheme {
        self.scheme
    }

    fn map(&self, n: usize, j: usize) -> Result<Cow<'_, StepMap>> {
        match &self.maps {
            Maps::Stationary(m) => Ok(Cow::Borrowed(m)),
            Maps::Varying => {
                let g = &self.grid;
                let t = g.t(n) + 0.5 * g.dt();
                let a = g.a(j) + 0.5 * g.da();
                let mu: Vec<f64> = (0..g.nx()).map(|i| self.rates.mu(t, a, g.x(i))).collect();
                let m = StepMap::new(&self.op.with_mortality(&mu), g.dt(), self.scheme).map_err(|e| at_step(e, n))?;
                Ok(Cow::Owned(m))
            }
        }
    }

    /// Applies the step maps of step `n` to every age layer of `slice`.
    pub fn diffuse(&self, n: usize, slice: &mut [f64]) -> Result<()> {
        let nx = self.grid.nx();
        let worst = slice
            .par_chunks_mut(nx)
            .enumerate()
            .map_init(Workspace::default, |work, (j, layer)| -> Result<f64> {
                Ok(self.map(n, j)?.apply(layer, work))
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        if !(worst <= RESIDUAL_TOL) || slice.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver { step: n, detail: format!("relative residual {worst:e} or non-finite state") });
        }
        Ok(())
    }
}

fn at_step(e: Error, n: usize) -> Error {
    match e {
        Error::Solver { detail, .. } => Error::Solver { step: n, detail },
        other => other,
    }
}
