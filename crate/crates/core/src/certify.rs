//! Empirical certificates: both sides of the weighted inequalities evaluated
//! on discrete solutions.
//!
//! Quadrature: cell centers in `a` and `x`, trapezoid over time levels.
//! Spatial gradients live on cell edges; at the walls the one-sided
//! second-order trace `(9 v_0 - v_1) / (3h)` is used.

use rayon::prelude::*;

use crate::adjoint::{solve_backward, AdjointProblem};
use crate::coefficients::DiffusionCoefficient;
use crate::error::{Error, Result};
use crate::field::{Field, Interval, Rank};
use crate::grid::Grid;
use crate::hum::check_regime;
use crate::rates::RateSpec;
use crate::region::ControlRegion;
use crate::weights::{carleman_factor, exp_clamped, theta_raw, NondegWeights, WeightSet, LOG_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InequalityId {
    Carleman31,
    CarlemanNondeg,
    CarlemanLocal,
    Caccioppoli,
    Observability,
}

impl InequalityId {
    pub fn tag(self) -> &'static str {
        match self {
            InequalityId::Carleman31 => "carleman",
            InequalityId::CarlemanNondeg => "carleman_nondeg",
            InequalityId::CarlemanLocal => "carleman_local",
            InequalityId::Caccioppoli => "caccioppoli",
            InequalityId::Observability => "observability",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub id: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; 0 for `0/0`, infinite (and `anomaly`) for `lhs > 0 = rhs`.
    pub ratio: f64,
    pub anomaly: bool,
    pub s: Option<f64>,
    pub delta: Option<f64>,
    pub sample_id: u64,
    pub seed: Option<u64>,
    pub grid: String,
    /// Named auxiliary quantity, e.g. the weight gradient bound.
    pub diagnostic: Option<(&'static str, f64)>,
}

impl CertificateReport {
    pub fn new(id: InequalityId, lhs: f64, rhs: f64, grid: &Grid) -> Self {
        let (ratio, anomaly) = if rhs > 0.0 {
            (lhs / rhs, false)
        } else if lhs > 0.0 {
            (f64::INFINITY, true)
        } else {
            (0.0, false)
        };
        CertificateReport {
            id,
            lhs,
            rhs,
            ratio,
            anomaly,
            s: None,
            delta: None,
            sample_id: 0,
            seed: None,
            grid: grid.summary(),
            diagnostic: None,
        }
    }

    pub fn with_sample(mut self, sample_id: u64, seed: Option<u64>) -> Self {
        self.sample_id = sample_id;
        self.seed = seed;
        self
    }

    pub const CSV_HEADER: &'static str = "inequality_id,s,delta,sample_id,lhs,rhs,ratio,grid,seed";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
            self.id.tag(),
            opt(self.s),
            opt(self.delta),
            self.sample_id,
            self.lhs,
            self.rhs,
            self.ratio,
            self.grid.replace(',', ";"),
            self.seed.map(|s| s.to_string()).unwrap_or_default()
        )
    }
}

fn time_weight(grid: &Grid, n: usize) -> f64 {
    if n == 0 || n == grid.nt() {
        0.5 * grid.dt()
    } else {
        grid.dt()
    }
}

fn check_pair(v: &Field, f: &Field, grid: &Grid) -> Result<()> {
    v.expect_rank(Rank::Trajectory, "v")?;
    f.expect_rank(Rank::Trajectory, "f")?;
    v.expect_grid(grid, "v")?;
    f.expect_grid(grid, "f")
}

/// Sum of per-level contributions, reduced in level order.
fn sum_levels(grid: &Grid, per_level: impl Fn(usize) -> [f64; 2] + Sync) -> [f64; 2] {
    let parts: Vec<[f64; 2]> = (0..grid.levels()).into_par_iter().map(|n| per_level(n)).collect();
    parts.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]])
}

/// One-sided wall traces of `v_x` for a row with Dirichlet walls.
fn wall_traces(row: &[f64], h: f64) -> (f64, f64) {
    let n = row.len();
    let left = (9.0 * row[0] - row[1]) / (3.0 * h);
    let right = -(9.0 * row[n - 1] - row[n - 2]) / (3.0 * h);
    (left, right)
}

/// Degenerate weight data sampled on the grid.
struct Profiles {
    psi_c: Vec<f64>,
    psi_e: Vec<f64>,
    k_e: Vec<f64>,
    /// `(x - x0)² / k` at centers, 0 on the cell holding `x0`.
    sing_c: Vec<f64>,
    psi_max: f64,
}

impl Profiles {
    fn new(ws: &WeightSet, grid: &Grid) -> Self {
        let coeff = ws.coeff();
        let x0 = coeff.x0();
        let skip = grid.x0_cell();
        let psi_c = ws.psi_profile(grid);
        let psi_e: Vec<f64> = (0..=grid.nx()).map(|e| ws.psi(grid.x_edge(e))).collect();
        let k_e: Vec<f64> = (0..=grid.nx()).map(|e| coeff.k(grid.x_edge(e))).collect();
        let sing_c = (0..grid.nx())
            .map(|i| {
                if i == skip {
                    return 0.0;
                }
                let x = grid.x(i);
                (x - x0) * (x - x0) / coeff.k(x)
            })
            .collect();
        let psi_max = psi_e.iter().chain(&psi_c).copied().fold(f64::NEG_INFINITY, f64::max);
        Profiles { psi_c, psi_e, k_e, sing_c, psi_max }
    }
}

/// `∫_Q (sΘ k v_x² + s³Θ³ (x-x0)²/k v²) e^{2sφ}` over one `(t, a)` row,
/// per unit `da dt`.
fn degenerate_lhs_row(s: f64, theta: f64, p: &Profiles, row: &[f64], h: f64) -> f64 {
    let nx = row.len();
    let mut acc = 0.0;
    for i in 0..nx {
        let f3 = carleman_factor(s, theta, p.psi_c[i], 3);
        acc += h * p.sing_c[i] * f3 * row[i] * row[i];
    }
    for e in 1..nx {
        let g = (row[e] - row[e - 1]) / h;
        acc += h * p.k_e[e] * carleman_factor(s, theta, p.psi_e[e], 1) * g * g;
    }
    let (gl, gr) = wall_traces(row, h);
    acc += 0.5 * h * p.k_e[0] * carleman_factor(s, theta, p.psi_e[0], 1) * gl * gl;
    acc += 0.5 * h * p.k_e[nx] * carleman_factor(s, theta, p.psi_e[nx], 1) * gr * gr;
    acc
}

/// True when every degenerate factor with power `≤ 3` underflows on the row.
fn row_negligible(s: f64, theta: f64, psi_max: f64) -> bool {
    if !theta.is_finite() {
        return true;
    }
    let st = s * theta;
    3.0 * st.ln().max(0.0) + 2.0 * st * psi_max < LOG_FLOOR
}

/// Degenerate global Carleman estimate: `lhs` as above, `rhs` is
/// `∫_Q f² e^{2sφ} + s c1 ∫∫ [kΘ e^{2sφ} (x-x0) v_x²]_{x=0}^{x=1}`.
pub fn carleman_report(v: &Field, f: &Field, ws: &WeightSet, coeff: &DiffusionCoefficient, grid: &Grid) -> Result<CertificateReport> {
    check_pair(v, f, grid)?;
    if coeff.x0() != ws.coeff().x0() {
        return Err(Error::Inconsistency("weight set and coefficient have different x0".into()));
    }
    let p = Profiles::new(ws, grid);
    let (s, c1, h, x0) = (ws.s, ws.c1, grid.dx(), coeff.x0());
    let (k0, k1) = (coeff.k(0.0), coeff.k(1.0));
    let nx = grid.nx();
    let [lhs, rhs] = sum_levels(grid, |n| {
        let t = grid.t(n);
        let wt = time_weight(grid, n) * grid.da();
        let (vl, fl) = (v.level(n), f.level(n));
        let mut out = [0.0, 0.0];
        for j in 0..grid.na() {
            let theta = theta_raw(t, grid.a(j), grid.t_final());
            if row_negligible(s, theta, p.psi_max) {
                continue;
            }
            let row = &vl[j * nx..(j + 1) * nx];
            let frow = &fl[j * nx..(j + 1) * nx];
            out[0] += wt * degenerate_lhs_row(s, theta, &p, row, h);
            let mut r = 0.0;
            for i in 0..nx {
                r += h * frow[i] * frow[i] * carleman_factor(s, theta, p.psi_c[i], 0);
            }
            let (gl, gr) = wall_traces(row, h);
            // s c1 kΘ e^{2sφ} = c1 k (sΘ) e^{2sφ}
            r += c1 * k1 * (1.0 - x0) * carleman_factor(s, theta, p.psi_e[nx], 1) * gr * gr;
            r += c1 * k0 * x0 * carleman_factor(s, theta, p.psi_e[0], 1) * gl * gl;
            out[1] += wt * r;
        }
        out
    });
    let mut rep = CertificateReport::new(InequalityId::Carleman31, lhs, rhs, grid);
    rep.s = Some(s);
    Ok(rep)
}

/// Non-degenerate `Ψ` for the ω-local estimate: the non-degenerate family on
/// `[0, ρ1]` and on `[λ2, 1]`, where `ρ1` and `λ2` are the inner ends of the
/// side intervals of `ω`, joined linearly across the degeneracy.
fn local_big_psi(ws: &WeightSet, region: &ControlRegion, grid: &Grid) -> Result<Vec<f64>> {
    let coeff = ws.coeff();
    let (left, right) = region.side_intervals(coeff.x0());
    let (rho1, lambda2) = (left.hi, right.lo);
    let (tf, am) = (ws.t_final(), ws.a_max());
    let wl = NondegWeights::new(coeff, Interval::new(0.0, rho1), ws.kappa, tf, am)?;
    let wr = NondegWeights::new(coeff, Interval::new(lambda2, 1.0), ws.kappa, tf, am)?;
    let big = |w: &NondegWeights, x: f64| (w.kappa * w.sigma(x)).exp() - (2.0 * w.kappa * w.sigma_max).exp();
    let (pl, pr) = (big(&wl, rho1), big(&wr, lambda2));
    Ok((0..grid.nx())
        .map(|i| {
            let x = grid.x(i);
            if x <= rho1 {
                big(&wl, x)
            } else if x >= lambda2 {
                big(&wr, x)
            } else {
                pl + (pr - pl) * (x - rho1) / (lambda2 - rho1)
            }
        })
        .collect())
}

/// ω-local Carleman estimate: same `lhs` as [`carleman_report`],
/// `rhs = ∫_Q f² e^{2sΦ} + ∫∫∫_ω v²`.
pub fn carleman_local_report(
    v: &Field,
    f: &Field,
    ws: &WeightSet,
    region: &ControlRegion,
    grid: &Grid,
) -> Result<CertificateReport> {
    check_pair(v, f, grid)?;
    let p = Profiles::new(ws, grid);
    let big_psi = local_big_psi(ws, region, grid)?;
    let mask = region.mask(grid);
    let (s, h, nx) = (ws.s, grid.dx(), grid.nx());
    let [lhs, rhs] = sum_levels(grid, |n| {
        let t = grid.t(n);
        let wt = time_weight(grid, n) * grid.da();
        let (vl, fl) = (v.level(n), f.level(n));
        let mut out = [0.0, 0.0];
        for j in 0..grid.na() {
            let row = &vl[j * nx..(j + 1) * nx];
            let frow = &fl[j * nx..(j + 1) * nx];
            let mut r = 0.0;
            for i in 0..nx {
                r += h * mask[i] * row[i] * row[i];
            }
            let theta = theta_raw(t, grid.a(j), grid.t_final());
            if theta.is_finite() {
                for i in 0..nx {
                    r += h * frow[i] * frow[i] * exp_clamped(2.0 * s * theta * big_psi[i]);
                }
                if !row_negligible(s, theta, p.psi_max) {
                    out[0] += wt * degenerate_lhs_row(s, theta, &p, row, h);
                }
            }
            out[1] += wt * r;
        }
        out
    });
    let mut rep = CertificateReport::new(InequalityId::CarlemanLocal, lhs, rhs, grid);
    rep.s = Some(s);
    Ok(rep)
}

/// Non-degenerate Carleman estimate on `[0, 1]` for a coefficient with
/// `k > 0`: `lhs = ∫ (s³φ̂³ z² + s φ̂ z_x²) e^{2sΦ}`,
/// `rhs = ∫ f² e^{2sΦ} - sκ ∫∫ [k e^{2sΦ} φ̂ z_x²]_0^1`.
pub fn carleman_nondeg_report(v: &Field, f: &Field, w: &NondegWeights, s: f64, grid: &Grid) -> Result<CertificateReport> {
    check_pair(v, f, grid)?;
    if w.interval != Interval::new(0.0, 1.0) {
        return Err(Error::Precondition("the trajectory solves the problem on [0, 1]; weights must use that interval".into()));
    }
    if !(s > 0.0) {
        return Err(Error::param("s must be positive"));
    }
    let (h, nx) = (grid.dx(), grid.nx());
    let big = (2.0 * w.kappa * w.sigma_max).exp();
    let es_c: Vec<f64> = (0..nx).map(|i| (w.kappa * w.sigma(grid.x(i))).exp()).collect();
    let es_e: Vec<f64> = (0..=nx).map(|e| (w.kappa * w.sigma(grid.x_edge(e))).exp()).collect();
    let (k0, k1) = (w.k(0.0), w.k(1.0));
    // (sφ̂)^p e^{2sΦ} with φ̂ = Θ e, Φ = Θ (e - big)
    let fac = |theta: f64, e: f64, p: i32| -> f64 {
        if !theta.is_finite() {
            return 0.0;
        }
        let sp = s * theta * e;
        exp_clamped(p as f64 * sp.ln() + 2.0 * s * theta * (e - big))
    };
    let [lhs, rhs] = sum_levels(grid, |n| {
        let t = grid.t(n);
        let wt = time_weight(grid, n) * grid.da();
        let (vl, fl) = (v.level(n), f.level(n));
        let mut out = [0.0, 0.0];
        for j in 0..grid.na() {
            let theta = theta_raw(t, grid.a(j), grid.t_final());
            if !theta.is_finite() {
                continue;
            }
            let row = &vl[j * nx..(j + 1) * nx];
            let frow = &fl[j * nx..(j + 1) * nx];
            let (mut l, mut r) = (0.0, 0.0);
            for i in 0..nx {
                l += h * fac(theta, es_c[i], 3) * row[i] * row[i];
                r += h * fac(theta, es_c[i], 0) * frow[i] * frow[i];
            }
            for e in 1..nx {
                let g = (row[e] - row[e - 1]) / h;
                l += h * fac(theta, es_e[e], 1) * g * g;
            }
            let (gl, gr) = wall_traces(row, h);
            l += 0.5 * h * (fac(theta, es_e[0], 1) * gl * gl + fac(theta, es_e[nx], 1) * gr * gr);
            // -sκ [k e^{2sΦ} φ̂ z_x²]_0^1 = κ (k0 (sφ̂ e^{2sΦ})(0) z_x(0)² - k1 (...)(1) z_x(1)²)
            r += w.kappa * (k0 * fac(theta, es_e[0], 1) * gl * gl - k1 * fac(theta, es_e[nx], 1) * gr * gr);
            out[0] += wt * l;
            out[1] += wt * r;
        }
        out
    });
    let mut rep = CertificateReport::new(InequalityId::CarlemanNondeg, lhs, rhs.max(0.0), grid);
    rep.s = Some(s);
    rep.diagnostic = Some(("raw_rhs", rhs));
    if rhs < 0.0 {
        rep.anomaly = true;
    }
    Ok(rep)
}

/// Summary of a Carleman `s` sweep.
#[derive(Debug, Clone)]
pub struct CarlemanSweep {
    pub s_values: Vec<f64>,
    /// Reports grouped by `s`, in sample order.
    pub reports: Vec<Vec<CertificateReport>>,
    pub max_ratios: Vec<f64>,
    /// Smallest `s` beyond which the max ratio stops increasing.
    pub plateau_s: Option<f64>,
}

impl CarlemanSweep {
    pub fn flat(&self) -> Vec<CertificateReport> {
        self.reports.iter().flatten().cloned().collect()
    }
}

/// One adjoint trajectory with its source.
#[derive(Debug, Clone)]
pub struct CarlemanSample {
    pub sample_id: u64,
    pub seed: Option<u64>,
    pub v: Field,
    pub f: Field,
}

impl CarlemanSample {
    /// Seeded smooth `v_T` and `f`; `v` solves the adjoint system without
    /// the renewal term.
    pub fn generate(coeff: &DiffusionCoefficient, rates: &RateSpec, grid: &Grid, seed: u64, id: u64) -> Result<Self> {
        let vt = crate::samples::terminal_sample(grid, seed, id);
        let f = crate::samples::source_sample(grid, seed, id);
        let prob = AdjointProblem::new(coeff.clone(), rates.clone(), *grid, vt).with_source(f.clone()).local();
        let v = solve_backward(&prob)?;
        Ok(CarlemanSample { sample_id: id, seed: Some(seed), v, f })
    }
}

pub fn carleman_s_sweep(samples: &[CarlemanSample], ws: &WeightSet, s_values: &[f64]) -> Result<CarlemanSweep> {
    if s_values.is_empty() {
        return Err(Error::param("s sweep needs at least one value"));
    }
    if s_values.iter().any(|&s| !(s > 0.0)) || s_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("s values must be positive and increasing"));
    }
    if samples.is_empty() {
        return Err(Error::param("s sweep needs at least one sample"));
    }
    let mut reports = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let w = ws.with_s(s);
        let row = samples
            .iter()
            .map(|smp| {
                let g = *smp.v.grid();
                carleman_report(&smp.v, &smp.f, &w, ws.coeff(), &g).map(|r| r.with_sample(smp.sample_id, smp.seed))
            })
            .collect::<Result<Vec<_>>>()?;
        reports.push(row);
    }
    let max_ratios: Vec<f64> = reports.iter().map(|r| r.iter().map(|x| x.ratio).fold(0.0, f64::max)).collect();
    let plateau_s = (0..s_values.len())
        .find(|&i| max_ratios[i..].windows(2).all(|w| w[1] <= w[0]))
        .map(|i| s_values[i]);
    Ok(CarlemanSweep { s_values: s_values.to_vec(), reports, max_ratios, plateau_s })
}

/// Interior estimate: `lhs = ∫∫∫_{ω'} v_x² e^{2sψ̂}`,
/// `rhs = ∫∫∫_ω v² + ∫_Q f² e^{2sψ̂}` with `ψ̂ = Θ ψ`. The diagnostic
/// records `max_{ω'} |ψ_x| √k`.
pub fn caccioppoli_report(
    v: &Field,
    f: &Field,
    omega_inner: Interval,
    omega: Interval,
    ws: &WeightSet,
    grid: &Grid,
) -> Result<CertificateReport> {
    check_pair(v, f, grid)?;
    let x0 = ws.coeff().x0();
    if !(omega.lo < omega_inner.lo && omega_inner.lo < omega_inner.hi && omega_inner.hi < omega.hi) {
        return Err(Error::Precondition(format!(
            "({}, {}) is not compactly inside ({}, {})",
            omega_inner.lo, omega_inner.hi, omega.lo, omega.hi
        )));
    }
    if omega_inner.contains(x0) {
        return Err(Error::Precondition(format!("x0 = {x0} lies in the closure of the inner interval")));
    }
    let p = Profiles::new(ws, grid);
    let (s, h, nx) = (ws.s, grid.dx(), grid.nx());
    let inner_edges: Vec<usize> = (1..nx).filter(|&e| omega_inner.contains(grid.x_edge(e))).collect();
    let outer: Vec<f64> = (0..nx).map(|i| if omega.contains(grid.x(i)) { 1.0 } else { 0.0 }).collect();
    let coeff = ws.coeff();
    let bound = inner_edges
        .iter()
        .map(|&e| {
            let x = grid.x_edge(e);
            ws.c1 * (x - x0).abs() / coeff.k(x).sqrt()
        })
        .fold(0.0, f64::max);
    let [lhs, rhs] = sum_levels(grid, |n| {
        let t = grid.t(n);
        let wt = time_weight(grid, n) * grid.da();
        let (vl, fl) = (v.level(n), f.level(n));
        let mut out = [0.0, 0.0];
        for j in 0..grid.na() {
            let theta = theta_raw(t, grid.a(j), grid.t_final());
            let row = &vl[j * nx..(j + 1) * nx];
            let frow = &fl[j * nx..(j + 1) * nx];
            let mut r = 0.0;
            for i in 0..nx {
                r += h * outer[i] * row[i] * row[i];
            }
            if theta.is_finite() {
                for i in 0..nx {
                    r += h * frow[i] * frow[i] * carleman_factor(s, theta, p.psi_c[i], 0);
                }
                let mut l = 0.0;
                for &e in &inner_edges {
                    let g = (row[e] - row[e - 1]) / h;
                    l += h * carleman_factor(s, theta, p.psi_e[e], 0) * g * g;
                }
                out[0] += wt * l;
            }
            out[1] += wt * r;
        }
        out
    });
    let mut rep = CertificateReport::new(InequalityId::Caccioppoli, lhs, rhs, grid);
    rep.s = Some(s);
    rep.diagnostic = Some(("weight_gradient_bound", bound));
    Ok(rep)
}

/// Right-hand side variant of the observability inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObservabilityForm {
    /// `∫_0^δ∫ v_T² + ∫∫∫_ω v²`, `δ` in the regime interval.
    #[default]
    Sharp,
    /// Adds `∫_0^T∫_0^δ∫ v²` and uses `∫_0^T∫ v_T²`; any `δ ∈ (0, A)`.
    WithAgeStrip,
}

/// `lhs = ∫∫ v²(T - ā, a, x)` for the adjoint solution with terminal data
/// `vT`; the right-hand side follows `form`.
pub fn observability_report(
    vt: &Field,
    delta: f64,
    region: &ControlRegion,
    rates: &RateSpec,
    coeff: &DiffusionCoefficient,
    grid: &Grid,
    form: ObservabilityForm,
) -> Result<CertificateReport> {
    vt.expect_rank(Rank::Slice, "vT")?;
    vt.expect_grid(grid, "vT")?;
    check_observability(grid, rates.abar(), delta, form)?;
    let v = solve_backward(&AdjointProblem::new(coeff.clone(), rates.clone(), *grid, vt.clone()))?;
    observability_from_trajectory(&v, delta, region, rates.abar(), form)
}

fn check_observability(grid: &Grid, abar: f64, delta: f64, form: ObservabilityForm) -> Result<usize> {
    let (tf, am) = (grid.t_final(), grid.a_max());
    if !(abar < tf) {
        return Err(Error::param(format!("need abar < T, got abar = {abar}, T = {tf}")));
    }
    match form {
        ObservabilityForm::Sharp => check_regime(grid, abar, delta)?,
        ObservabilityForm::WithAgeStrip => {
            if !(delta > 0.0 && delta < am) {
                return Err(Error::param(format!("delta = {delta} must lie in (0, A) = (0, {am})")));
            }
        }
    }
    grid.level_of(tf - abar).ok_or_else(|| Error::param(format!("T - abar = {} is not a time level", tf - abar)))
}

/// Observability report from an adjoint trajectory already computed with
/// the renewal term; `vT` is its last level.
pub fn observability_from_trajectory(
    v: &Field,
    delta: f64,
    region: &ControlRegion,
    abar: f64,
    form: ObservabilityForm,
) -> Result<CertificateReport> {
    v.expect_rank(Rank::Trajectory, "v")?;
    let grid = *v.grid();
    let level = check_observability(&grid, abar, delta, form)?;
    let tf = grid.t_final();
    let (nx, cell) = (grid.nx(), grid.da() * grid.dx());
    let sq = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>();
    let lhs = cell * sq(v.level(level));

    let young: Vec<bool> = (0..grid.na()).map(|j| grid.a(j) < delta).collect();
    let data_cut = match form {
        ObservabilityForm::Sharp => delta,
        ObservabilityForm::WithAgeStrip => tf,
    };
    let vtv = v.level(grid.nt());
    let data: f64 = (0..grid.na())
        .filter(|&j| grid.a(j) < data_cut)
        .map(|j| cell * sq(&vtv[j * nx..(j + 1) * nx]))
        .sum();
    let mask = region.mask(&grid);
    let strip = form == ObservabilityForm::WithAgeStrip;
    let [obs, band] = sum_levels(&grid, |n| {
        let wt = time_weight(&grid, n) * cell;
        let lv = v.level(n);
        let mut out = [0.0, 0.0];
        for j in 0..grid.na() {
            let row = &lv[j * nx..(j + 1) * nx];
            out[0] += wt * row.iter().zip(&mask).map(|(u, m)| m * u * u).sum::<f64>();
            if strip && young[j] {
                out[1] += wt * sq(row);
            }
        }
        out
    });
    let mut rep = CertificateReport::new(InequalityId::Observability, lhs, data + obs + band, &grid);
    rep.delta = Some(delta);
    Ok(rep)
}

/// Maximum ratio over a homogeneous stream of reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalConstant {
    pub id: InequalityId,
    pub value: f64,
    pub samples: usize,
}

pub fn empirical_constant(reports: &[CertificateReport]) -> Result<EmpiricalConstant> {
    let first = reports.first().ok_or_else(|| Error::param("no reports"))?;
    if reports.iter().any(|r| r.id != first.id) {
        return Err(Error::param("reports mix inequality ids"));
    }
    let value = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(EmpiricalConstant { id: first.id, value, samples: reports.len() })
}
