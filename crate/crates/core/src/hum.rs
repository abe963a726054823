//! Null controls by the penalized Hilbert Uniqueness Method.
//!
//! For terminal adjoint data `w` supported on the target ages `(δ, A)`, the
//! Gramian is `Λ w = R y(T)` where `y` starts from zero and is driven by
//! `χ_ω v[w]`, `v[w]` the backward solution from `w`. It is symmetric and
//! positive semidefinite in the slice inner product because the backward
//! solver is the exact transpose of the forward one. The control is
//! `f = χ_ω v[w*]` with `(Λ + ε I) w* = -R y_free(T)`, solved by conjugate
//! residuals.

use crate::coefficients::DiffusionCoefficient;
use crate::adjoint::march_backward;
use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::forward::{check_slice, march_forward_terminal, Renewal};
use crate::grid::Grid;
use crate::rates::RateSpec;
use crate::region::ControlRegion;
use crate::scheme::{Propagator, TimeScheme};

pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_CG_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct HumProblem {
    pub coeff: DiffusionCoefficient,
    pub rates: RateSpec,
    pub region: ControlRegion,
    pub grid: Grid,
    pub y0: Field,
    pub delta: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub cg_tol: f64,
    pub scheme: TimeScheme,
}

/// Admissible `δ` for the horizon: `(T, A)` when `T < A`, `(ā, A)` when `A < T`.
pub fn check_regime(grid: &Grid, abar: f64, delta: f64) -> Result<()> {
    let (t, a) = (grid.t_final(), grid.a_max());
    let lo = if t < a {
        t
    } else if a < t {
        abar
    } else {
        return Err(Error::param("T = A is not covered: need T < A or A < T"));
    };
    if !(delta > lo && delta < a) {
        let which = if t < a { "T" } else { "abar" };
        return Err(Error::param(format!("delta = {delta} must lie in ({which}, A) = ({lo}, {a})")));
    }
    Ok(())
}

impl HumProblem {
    pub fn new(
        coeff: DiffusionCoefficient,
        rates: RateSpec,
        region: ControlRegion,
        grid: Grid,
        y0: Field,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let p = HumProblem {
            coeff,
            rates,
            region,
            grid,
            y0,
            delta,
            epsilon,
            max_iters: DEFAULT_MAX_ITERS,
            cg_tol: DEFAULT_CG_TOL,
            scheme: TimeScheme::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_iterations(mut self, max_iters: usize, cg_tol: f64) -> Result<Self> {
        self.max_iters = max_iters;
        self.cg_tol = cg_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_regime(&self.grid, self.rates.abar(), self.delta)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::param(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        check_slice(&self.y0, &self.grid, "y0")
    }

    /// Indicator of the target age cells `a_j ∈ (δ, A)`.
    pub fn target_ages(&self) -> Vec<bool> {
        (0..self.grid.na()).map(|j| self.grid.a(j) > self.delta).collect()
    }
}

#[derive(Debug, Clone)]
pub struct HumResult {
    /// `χ_ω v[w]`, exactly zero off `ω`.
    pub control: Field,
    /// Converged (or last) dual iterate, zero off the target ages.
    pub dual: Field,
    /// `y(T)` of the controlled state.
    pub terminal_state: Field,
    /// `‖y(T)‖` over `(δ, A) × (0, 1)`.
    pub terminal_residual: f64,
    /// `‖f‖_{L²(Q)}`.
    pub control_norm: f64,
    /// `control_norm / ‖y0‖` (0 when `y0 = 0`).
    pub cost_ratio: f64,
    /// `½‖f‖² + ‖R y(T)‖² / (2ε)`.
    pub penalized_cost: f64,
    pub iterations: usize,
    /// `‖r_k‖ / ‖r_0‖`, starting with 1 at iteration 0.
    pub cg_residual_trace: Vec<f64>,
    /// `½⟨(Λ+εI)w_k, w_k⟩ + ⟨b, w_k⟩` per iteration.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
}

/// Matrix-free `Λ` and the pieces around it for one problem.
struct Operators<'a> {
    problem: &'a HumProblem,
    prop: Propagator,
    renewal: Renewal,
    mask: Vec<f64>,
    target: Vec<bool>,
}

impl<'a> Operators<'a> {
    fn new(problem: &'a HumProblem) -> Result<Self> {
        problem.validate()?;
        let g = problem.grid;
        Ok(Operators {
            problem,
            prop: Propagator::new(&problem.coeff, &problem.rates, &g, problem.scheme)?,
            renewal: Renewal::new(&problem.rates, &g)?,
            mask: problem.region.mask(&g),
            target: problem.target_ages(),
        })
    }

    fn restrict(&self, s: &mut [f64]) {
        let nx = self.problem.grid.nx();
        for (j, keep) in self.target.iter().enumerate() {
            if !keep {
                s[j * nx..(j + 1) * nx].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    fn control(&self, w: &[f64]) -> Result<Field> {
        let mut wt = w.to_vec();
        self.restrict(&mut wt);
        let mut v = march_backward(&self.prop, Some(&self.renewal), &wt, None, None)?;
        let nx = self.problem.grid.nx();
        for (k, x) in v.values_mut().iter_mut().enumerate() {
            if self.mask[k % nx] == 0.0 {
                *x = 0.0;
            }
        }
        Ok(v)
    }

    fn terminal(&self, y0: &[f64], f: Option<&Field>) -> Result<Vec<f64>> {
        march_forward_terminal(&self.prop, &self.renewal, &self.mask, y0, f)
    }

    fn gramian(&self, w: &[f64]) -> Result<Vec<f64>> {
        let f = self.control(w)?;
        let zero = vec![0.0; self.problem.grid.slice_len()];
        let mut y = self.terminal(&zero, Some(&f))?;
        self.restrict(&mut y);
        Ok(y)
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let g = &self.problem.grid;
        g.da() * g.dx() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }
}

/// `Λ w`, as a slice field zero outside the target ages.
pub fn gramian_apply(w: &Field, problem: &HumProblem) -> Result<Field> {
    check_slice(w, &problem.grid, "dual datum")?;
    let ops = Operators::new(problem)?;
    Field::from_values(&problem.grid, Rank::Slice, ops.gramian(w.values())?)
}

/// Control driven by the dual datum `w` (zero-extended outside the target).
pub fn control_from_dual(w: &Field, problem: &HumProblem) -> Result<Field> {
    check_slice(w, &problem.grid, "dual datum")?;
    Operators::new(problem)?.control(w.values())
}

fn norm_sq_scheme(f: &Field) -> f64 {
    f.scheme_norm_sq()
}

/// Penalized HUM: conjugate residuals on `(Λ + εI) w = -R y_free(T)`.
///
/// Returns [`Error::NotConverged`] with the last iterate's full result when
/// `max_iters` is exhausted.
pub fn synthesize_control(problem: &HumProblem) -> Result<HumResult> {
    let ops = Operators::new(problem)?;
    let g = problem.grid;
    let eps = problem.epsilon;
    let n = g.slice_len();

    let mut b = ops.terminal(problem.y0.values(), None)?;
    ops.restrict(&mut b);
    let rhs: Vec<f64> = b.iter().map(|v| -v).collect();
    let b_norm = ops.dot(&rhs, &rhs).sqrt();

    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let mut y = ops.gramian(x)?;
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += eps * xi;
        }
        Ok(y)
    };
    let energy = |w: &[f64], aw: &[f64]| 0.5 * ops.dot(aw, w) - ops.dot(&rhs, w);

    let mut w = vec![0.0; n];
    let mut trace = vec![1.0];
    let mut energies = vec![0.0];
    let mut iterations = 0;
    let mut converged = b_norm == 0.0;

    if !converged {
        let mut r = rhs.clone();
        let mut ar = apply(&r)?;
        let mut p = r.clone();
        let mut ap = ar.clone();
        let mut rar = ops.dot(&r, &ar);
        // A w, tracked by recurrence for the energy trace
        let mut aw = vec![0.0; n];
        while iterations < problem.max_iters {
            let app = ops.dot(&ap, &ap);
            if !(app > 0.0) || !(rar > 0.0) {
                break;
            }
            let alpha = rar / app;
            for k in 0..n {
                w[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
                aw[k] += alpha * ap[k];
            }
            iterations += 1;
            let rel = ops.dot(&r, &r).sqrt() / b_norm;
            trace.push(rel);
            energies.push(energy(&w, &aw));
            if rel <= problem.cg_tol {
                converged = true;
                break;
            }
            if iterations == problem.max_iters {
                break;
            }
            ar = apply(&r)?;
            let rar_new = ops.dot(&r, &ar);
            let beta = rar_new / rar;
            rar = rar_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
                ap[k] = ar[k] + beta * ap[k];
            }
        }
    }

    let result = finish(&ops, w, trace, energies, iterations, converged)?;
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

fn finish(
    ops: &Operators<'_>,
    w: Vec<f64>,
    trace: Vec<f64>,
    energies: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> Result<HumResult> {
    let p = ops.problem;
    let g = p.grid;
    let control = ops.control(&w)?;
    let yt = ops.terminal(p.y0.values(), Some(&control))?;
    let mut target = yt.clone();
    ops.restrict(&mut target);
    let terminal_residual = ops.dot(&target, &target).sqrt();
    let control_norm = norm_sq_scheme(&control).sqrt();
    let y0_norm = p.y0.scheme_norm_sq().sqrt();
    let cost_ratio = if y0_norm > 0.0 { control_norm / y0_norm } else { 0.0 };
    let penalized_cost = 0.5 * control_norm * control_norm + terminal_residual * terminal_residual / (2.0 * p.epsilon);
    let mut dual = w;
    ops.restrict(&mut dual);
    Ok(HumResult {
        control,
        dual: Field::from_values(&g, Rank::Slice, dual)?,
        terminal_state: Field::from_values(&g, Rank::Slice, yt)?,
        terminal_residual,
        control_norm,
        cost_ratio,
        penalized_cost,
        iterations,
        cg_residual_trace: trace,
        energy_trace: energies,
        converged,
    })
}

/// Independent replay of a synthesized control.
#[derive(Debug, Clone, PartialEq)]
pub struct NullReport {
    pub terminal_residual: f64,
    pub reported_residual: f64,
    pub control_norm: f64,
    pub cost_ratio: f64,
    /// Largest `|f|` outside `ω` (must be 0).
    pub leakage: f64,
}

pub const VERIFY_TOL: f64 = 1e-10;

/// Re-runs the state solver from `y0` under the synthesized control and
/// recomputes the terminal residual on `(δ, A) × (0, 1)`.
pub fn verify_null(result: &HumResult, problem: &HumProblem) -> Result<NullReport> {
    use crate::forward::{solve_forward, ForwardProblem};
    problem.validate()?;
    let g = problem.grid;
    let fp = ForwardProblem::new(problem.coeff.clone(), problem.rates.clone(), problem.region, g, problem.y0.clone())
        .with_control(result.control.clone())
        .with_scheme(problem.scheme);
    let sol = solve_forward(&fp)?;
    let yt = sol.terminal();
    let nx = g.nx();
    let target = problem.target_ages();
    let mut acc = 0.0;
    for (j, keep) in target.iter().enumerate() {
        if *keep {
            acc += yt.values()[j * nx..(j + 1) * nx].iter().map(|v| v * v).sum::<f64>();
        }
    }
    let terminal_residual = (g.da() * g.dx() * acc).sqrt();
    let mask = problem.region.mask(&g);
    let leakage = result
        .control
        .values()
        .iter()
        .enumerate()
        .filter(|(k, _)| mask[k % nx] == 0.0)
        .fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
    let scale = result.terminal_residual.max(problem.y0.scheme_norm_sq().sqrt()).max(f64::MIN_POSITIVE);
    if (terminal_residual - result.terminal_residual).abs() > VERIFY_TOL * scale || leakage != 0.0 {
        return Err(Error::Inconsistency(format!(
            "replayed residual {terminal_residual:e} vs reported {:e}, leakage {leakage:e}",
            result.terminal_residual
        )));
    }
    let control_norm = result.control.scheme_norm_sq().sqrt();
    let y0n = problem.y0.scheme_norm_sq().sqrt();
    Ok(NullReport {
        terminal_residual,
        reported_residual: result.terminal_residual,
        control_norm,
        cost_ratio: if y0n > 0.0 { control_norm / y0n } else { 0.0 },
        leakage,
    })
}
