//! Backward solver, the pure-diffusion semigroup, the characteristic-line
//! representation, and the discrete duality pairing.
//!
//! The backward step is the algebraic transpose of the forward step:
//! `V^n = M_n (Pᵀ V^{n+1} - Δt F^n)`. With the pairing of
//! [`Field::scheme_inner`] this gives, for the state `y` driven by `f`,
//! `⟨y(T), v_T⟩ = ⟨y(0), v(0)⟩ + Δt Σ_{n<N} ⟨χ_ω f^n, v^n⟩` up to rounding.
//! The age-boundary condition `v(t, A, ·) = 0` is carried by the transpose of
//! the outflow: the last age cell of every level below `T` is zero.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::coefficients::DiffusionCoefficient;
use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::forward::{check_slice, check_trajectory, Renewal};
use crate::grid::Grid;
use crate::rates::RateSpec;
use crate::region::ControlRegion;
use crate::scheme::{DiffusionOperator, Propagator, StepMap, TimeScheme, Workspace};

#[derive(Debug, Clone)]
pub struct AdjointProblem {
    pub coeff: DiffusionCoefficient,
    pub rates: RateSpec,
    pub grid: Grid,
    /// Terminal slice over `(a, x)`.
    pub vt: Field,
    /// Source `f` of the inhomogeneous system; applied on all of `Q`.
    pub source: Option<Field>,
    /// Include the renewal-dual term `β(a, x) v(t, 0, x)`.
    pub nonlocal: bool,
    pub scheme: TimeScheme,
}

impl AdjointProblem {
    pub fn new(coeff: DiffusionCoefficient, rates: RateSpec, grid: Grid, vt: Field) -> Self {
        AdjointProblem { coeff, rates, grid, vt, source: None, nonlocal: true, scheme: TimeScheme::default() }
    }

    pub fn with_source(mut self, f: Field) -> Self {
        self.source = Some(f);
        self
    }

    pub fn local(mut self) -> Self {
        self.nonlocal = false;
        self
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }
}

pub(crate) fn march_backward(
    prop: &Propagator,
    renewal: Option<&Renewal>,
    vt: &[f64],
    source: Option<&Field>,
    mask: Option<&[f64]>,
) -> Result<Field> {
    let grid = *prop.grid();
    let len = grid.slice_len();
    let nx = grid.nx();
    let nt = grid.nt();
    let dt = grid.dt();
    let mut values = vec![0.0; grid.trajectory_len()];
    values[nt * len..].copy_from_slice(vt);
    let mut v = vt.to_vec();
    for n in (0..nt).rev() {
        match renewal {
            Some(r) => r.shift_transpose(&grid, &mut v),
            None => {
                v.copy_within(nx..len, 0);
                v[len - nx..].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        if let Some(f) = source {
            let fl = f.level(n);
            for (k, x) in v.iter_mut().enumerate() {
                if mask.is_none_or(|m| m[k % nx] != 0.0) {
                    *x -= dt * fl[k];
                }
            }
        }
        prop.diffuse(n, &mut v)?;
        values[n * len..(n + 1) * len].copy_from_slice(&v);
    }
    Field::from_values(&grid, Rank::Trajectory, values)
}

/// Solves the adjoint system backward from `v(T) = v_T`.
pub fn solve_backward(problem: &AdjointProblem) -> Result<Field> {
    let grid = problem.grid;
    check_slice(&problem.vt, &grid, "terminal datum")?;
    if let Some(f) = &problem.source {
        check_trajectory(f, &grid, "adjoint source")?;
    }
    let prop = Propagator::new(&problem.coeff, &problem.rates, &grid, problem.scheme)?;
    let renewal = if problem.nonlocal { Some(Renewal::new(&problem.rates, &grid)?) } else { None };
    march_backward(&prop, renewal.as_ref(), problem.vt.values(), problem.source.as_ref(), None)
}

/// Number of whole steps in `tau`.
fn step_count(tau: f64, grid: &Grid) -> Result<usize> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("semigroup time must be a finite nonnegative number, got {tau}")));
    }
    Ok((tau / grid.dt()).round() as usize)
}

/// Pure diffusion–absorption `u_t = (k u_x)_x - μ u` for time `tau`, stepped
/// with the solvers' time scheme (`tau` rounded to whole steps).
pub fn semigroup_apply(
    profile: &Field,
    tau: f64,
    coeff: &DiffusionCoefficient,
    mu_frozen: &dyn Fn(f64) -> f64,
    scheme: TimeScheme,
) -> Result<Field> {
    profile.expect_rank(Rank::Profile, "semigroup input")?;
    let grid = profile.grid();
    let m = step_count(tau, grid)?;
    let mut u = profile.values().to_vec();
    if m == 0 {
        return Field::from_values(grid, Rank::Profile, u);
    }
    let op = DiffusionOperator::new(coeff, grid);
    let mu: Vec<f64> = (0..grid.nx()).map(|i| mu_frozen(grid.x(i))).collect();
    let map = StepMap::new(&op.with_mortality(&mu), grid.dt(), scheme)?;
    let mut work = Workspace::default();
    for _ in 0..m {
        map.apply(&mut u, &mut work);
    }
    Field::from_values(grid, Rank::Profile, u)
}

/// Space-discrete semigroup `exp(-τ L)`, `L = K + diag(μ)`, from the
/// eigendecomposition of `L`. Exact in time.
#[derive(Debug, Clone)]
pub struct SpectralSemigroup {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl SpectralSemigroup {
    pub fn new(coeff: &DiffusionCoefficient, mu: &[f64], grid: &Grid) -> Self {
        let l = DiffusionOperator::new(coeff, grid).with_mortality(mu);
        let n = l.len();
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = l.diag[i];
            if i + 1 < n {
                dense[(i, i + 1)] = l.off[i];
                dense[(i + 1, i)] = l.off[i];
            }
        }
        let eig = SymmetricEigen::new(dense);
        SpectralSemigroup { vectors: eig.eigenvectors, values: eig.eigenvalues }
    }

    pub fn apply(&self, u: &[f64], tau: f64) -> Vec<f64> {
        if tau == 0.0 {
            return u.to_vec();
        }
        let mut c = self.vectors.tr_mul(&DVector::from_column_slice(u));
        for (ci, lam) in c.iter_mut().zip(self.values.iter()) {
            *ci *= (-tau * lam).exp();
        }
        (&self.vectors * c).as_slice().to_vec()
    }
}

/// `v_T` at an arbitrary age, linear in `a` between cell centers, constant
/// below the first center, zero at and beyond `A`.
fn vt_at_age(vt: &Field, age: f64) -> Vec<f64> {
    let g = vt.grid();
    let nx = g.nx();
    let row = |j: usize| &vt.values()[j * nx..(j + 1) * nx];
    if age >= g.a_max() {
        return vec![0.0; nx];
    }
    let r = age / g.da() - 0.5;
    if r <= 0.0 {
        return row(0).to_vec();
    }
    let j = r.floor() as usize;
    let w = r - j as f64;
    if j + 1 >= g.na() {
        // between the last center and A, decay linearly to the wall value 0
        return row(g.na() - 1).iter().map(|v| v * (1.0 - 2.0 * w)).collect();
    }
    row(j).iter().zip(row(j + 1)).map(|(a, b)| (1.0 - w) * a + w * b).collect()
}

/// Characteristic-line representation of the adjoint solution at `(t, a)`.
///
/// `t` must be a time level and `a` an age-cell center or `0`. The leading
/// term is `S(T - t) v_T(T + a - t)` when `T + a - t ≤ A`, else zero. At
/// `a = 0` this is `S(T - t) v_T(T - t)`. When `β ≢ 0` one integral of
/// `S(s - a) β(s) v(s + t - a, 0)` is added, the newborn trace taken from the
/// `a = 0` formula; deeper terms are dropped. The semigroup is exact in time,
/// so this route shares only the spatial matrix with [`solve_backward`].
/// Time-dependent mortality is not supported.
pub fn characteristic_eval(vt: &Field, t: f64, a: f64, coeff: &DiffusionCoefficient, rates: &RateSpec) -> Result<Field> {
    CharacteristicEvaluator::new(vt, coeff, rates)?.eval(t, a)
}

/// [`characteristic_eval`] with the eigendecomposition kept between calls.
pub struct CharacteristicEvaluator<'a> {
    vt: &'a Field,
    rates: RateSpec,
    semigroup: SpectralSemigroup,
    beta_active: bool,
}

impl<'a> CharacteristicEvaluator<'a> {
    pub fn new(vt: &'a Field, coeff: &DiffusionCoefficient, rates: &RateSpec) -> Result<Self> {
        vt.expect_rank(Rank::Slice, "terminal datum")?;
        if !rates.mu_stationary() {
            return Err(Error::Precondition("characteristic formula needs mortality independent of (t, a)".into()));
        }
        let g = vt.grid();
        let mu: Vec<f64> = (0..g.nx()).map(|i| rates.mu(0.0, 0.0, g.x(i))).collect();
        Ok(CharacteristicEvaluator {
            vt,
            rates: rates.clone(),
            semigroup: SpectralSemigroup::new(coeff, &mu, g),
            beta_active: rates.has_fertility(g),
        })
    }

    pub fn eval(&self, t: f64, a: f64) -> Result<Field> {
        let vt = self.vt;
        let g = *vt.grid();
        let n = g.level_of(t).ok_or_else(|| Error::param(format!("t = {t} is not a time level")))?;
        let j = if a == 0.0 {
            None
        } else {
            Some(g.age_cell_of(a).ok_or_else(|| Error::param(format!("a = {a} is not an age-cell center")))?)
        };
        let sg = &self.semigroup;
        let nx = g.nx();
        let tf = g.t_final();
        let steps_left = g.nt() - n;
        let tau = steps_left as f64 * g.dt();

        let mut out = match j {
            None => sg.apply(&vt_at_age(vt, tau), tau),
            Some(j) if j + steps_left < g.na() => {
                sg.apply(&vt.values()[(j + steps_left) * nx..(j + steps_left + 1) * nx], tau)
            }
            Some(_) => vec![0.0; nx],
        };

        if let (Some(j), true) = (j, self.beta_active) {
            // ∫_a^{min(T+a-t, A)} S(s-a) β(s) v(s+t-a, 0) ds, summed over age-cell centers
            let upper = (a + tau).min(g.a_max());
            for m in 1..g.na() - j {
                let s = g.a(j + m);
                if s > upper + 1e-12 {
                    break;
                }
                let back = (tf - (t + s - a)).max(0.0);
                let newborn = sg.apply(&vt_at_age(vt, back), back);
                let evolved = sg.apply(&newborn, s - a);
                for (i, o) in out.iter_mut().enumerate() {
                    *o += g.da() * self.rates.beta(s, g.x(i)) * evolved[i];
                }
            }
        }
        Field::from_values(&g, Rank::Profile, out)
    }
}

/// Terms of the duality identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    /// `|⟨y(T), v(T)⟩ - ⟨y(0), v(0)⟩ - ⟨χ_ω f, v⟩|`.
    pub residual: f64,
    /// `‖y(T)‖‖v(T)‖ + ‖y(0)‖‖v(0)‖ + ‖χ_ω f‖‖v‖`.
    pub scale: f64,
}

impl DualityReport {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.residual / self.scale
        }
    }
}

pub fn duality_report(y: &Field, v: &Field, f: &Field, region: &ControlRegion) -> Result<DualityReport> {
    let grid = *y.grid();
    check_trajectory(y, &grid, "state")?;
    check_trajectory(v, &grid, "adjoint")?;
    check_trajectory(f, &grid, "control")?;
    let nt = grid.nt();
    let yt = y.slice_at(nt);
    let vt = v.slice_at(nt);
    let y0 = y.slice_at(0);
    let v0 = v.slice_at(0);
    let mask = region.mask(&grid);
    let nx = grid.nx();
    let mut cf = f.clone();
    for (k, x) in cf.values_mut().iter_mut().enumerate() {
        if mask[k % nx] == 0.0 {
            *x = 0.0;
        }
    }
    let end = yt.scheme_inner(&vt)?;
    let start = y0.scheme_inner(&v0)?;
    let src = cf.scheme_inner(v)?;
    let scale = (yt.scheme_norm_sq() * vt.scheme_norm_sq()).sqrt()
        + (y0.scheme_norm_sq() * v0.scheme_norm_sq()).sqrt()
        + (cf.scheme_norm_sq() * v.scheme_norm_sq()).sqrt();
    Ok(DualityReport { residual: (end - start - src).abs(), scale })
}

/// `|⟨y(T), v_T⟩ - ⟨y0, v(0)⟩ - ⟨χ_ω f, v⟩|` in the scheme's inner products.
pub fn duality_residual(y: &Field, v: &Field, f: &Field, region: &ControlRegion) -> Result<f64> {
    Ok(duality_report(y, v, f, region)?.residual)
}
