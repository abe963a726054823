//! Mortality `μ(t, a, x)` and fertility `β(a, x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub type MortalityFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type FertilityFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mortality {
    Constant(f64),
    /// `height * exp(-(x - center)^2 / (2 width^2))`.
    GaussianBump { height: f64, center: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fertility {
    Zero,
    /// `slope * max(0, a - abar)`.
    Ramp { slope: f64 },
    /// `height * sin²(π (a - abar) / (A - abar))` on `(abar, A)`, zero elsewhere.
    Bump { height: f64 },
    /// `value` for `a > abar`. Violates nothing, but is discontinuous at `abar`.
    Step { value: f64 },
}

#[derive(Clone)]
pub struct RateSpec {
    mu: MortalityFn,
    beta: FertilityFn,
    abar: f64,
    /// True when `μ` depends on `x` only; lets the solvers reuse factorizations.
    mu_stationary: bool,
    label: String,
}

impl fmt::Debug for RateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateSpec").field("label", &self.label).field("abar", &self.abar).finish()
    }
}

impl RateSpec {
    pub fn new(mu: MortalityFn, beta: FertilityFn, abar: f64, mu_stationary: bool, label: impl Into<String>) -> Self {
        RateSpec { mu, beta, abar, mu_stationary, label: label.into() }
    }

    /// `μ ≡ 0`, `β ≡ 0`.
    pub fn zero(abar: f64) -> Self {
        RateSpec::new(Arc::new(|_, _, _| 0.0), Arc::new(|_, _| 0.0), abar, true, "zero")
    }

    pub fn from_presets(mortality: Mortality, fertility: Fertility, abar: f64, a_max: f64) -> Result<Self> {
        if !(abar > 0.0 && abar < a_max) {
            return Err(Error::param(format!("fertility onset abar must lie in (0, A) = (0, {a_max}), got {abar}")));
        }
        let mu: MortalityFn = match mortality {
            Mortality::Constant(c) => Arc::new(move |_, _, _| c),
            Mortality::GaussianBump { height, center, width } => {
                if !(width > 0.0) {
                    return Err(Error::param("bump width must be positive"));
                }
                Arc::new(move |_, _, x| height * (-(x - center).powi(2) / (2.0 * width * width)).exp())
            }
        };
        let beta: FertilityFn = match fertility {
            Fertility::Zero => Arc::new(|_, _| 0.0),
            Fertility::Ramp { slope } => Arc::new(move |a, _| slope * (a - abar).max(0.0)),
            Fertility::Bump { height } => {
                let span = a_max - abar;
                Arc::new(move |a, _| {
                    if a <= abar || a >= a_max {
                        0.0
                    } else {
                        height * (std::f64::consts::PI * (a - abar) / span).sin().powi(2)
                    }
                })
            }
            Fertility::Step { value } => Arc::new(move |a, _| if a > abar { value } else { 0.0 }),
        };
        Ok(RateSpec::new(mu, beta, abar, true, format!("{mortality:?}/{fertility:?}")))
    }

    pub fn mu(&self, t: f64, a: f64, x: f64) -> f64 {
        (self.mu)(t, a, x)
    }
    pub fn beta(&self, a: f64, x: f64) -> f64 {
        (self.beta)(a, x)
    }
    pub fn abar(&self) -> f64 {
        self.abar
    }
    pub fn mu_stationary(&self) -> bool {
        self.mu_stationary
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Same rates with fertility switched off.
    pub fn without_fertility(&self) -> Self {
        RateSpec { beta: Arc::new(|_, _| 0.0), label: format!("{} (beta=0)", self.label), ..self.clone() }
    }

    /// `β` sampled at age cell centers, `[j * nx + i]`.
    pub fn beta_table(&self, grid: &Grid) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.slice_len());
        for j in 0..grid.na() {
            for i in 0..grid.nx() {
                out.push(self.beta(grid.a(j), grid.x(i)));
            }
        }
        out
    }

    pub fn has_fertility(&self, grid: &Grid) -> bool {
        self.beta_table(grid).iter().any(|&b| b != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub mu_nonnegative: bool,
    pub beta_nonnegative: bool,
    pub beta_support_ok: bool,
    pub max_mu_violation: f64,
    pub max_beta_violation: f64,
    pub max_support_violation: f64,
}

impl RateReport {
    pub fn all_ok(&self) -> bool {
        self.mu_nonnegative && self.beta_nonnegative && self.beta_support_ok
    }
}

/// Samples `μ` on all grid nodes and `β` on `(a, x)` nodes plus `a = abar`.
pub fn check_rates(rates: &RateSpec, grid: &Grid) -> RateReport {
    let mut mu_v: f64 = 0.0;
    for n in 0..grid.levels() {
        for j in 0..grid.na() {
            for i in 0..grid.nx() {
                mu_v = mu_v.max(-rates.mu(grid.t(n), grid.a(j), grid.x(i)));
            }
        }
    }
    let mut beta_v: f64 = 0.0;
    let mut supp_v: f64 = 0.0;
    let mut ages: Vec<f64> = (0..grid.na()).map(|j| grid.a(j)).collect();
    ages.push(rates.abar());
    ages.push(0.0);
    for &a in &ages {
        for i in 0..grid.nx() {
            let b = rates.beta(a, grid.x(i));
            beta_v = beta_v.max(-b);
            if a <= rates.abar() {
                supp_v = supp_v.max(b.abs());
            }
        }
    }
    RateReport {
        mu_nonnegative: mu_v <= 0.0,
        beta_nonnegative: beta_v <= 0.0,
        beta_support_ok: supp_v == 0.0,
        max_mu_violation: mu_v.max(0.0),
        max_beta_violation: beta_v.max(0.0),
        max_support_violation: supp_v,
    }
}
