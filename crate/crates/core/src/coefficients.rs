//! The diffusion coefficient `k` and its degeneracy classification.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::composite_gauss;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Degeneracy class of `k` at `x0`, with the estimated exponent `M`.
#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    /// `M ∈ (0, 1)`.
    WeaklyDegenerate { m: f64 },
    /// `M ∈ [1, 2)`.
    StronglyDegenerate { m: f64 },
    /// `k > 0` on `[0, 1]`.
    NonDegenerate,
    /// Outside the WD/SD theory; the solver still accepts it.
    Invalid { reason: String, m: Option<f64> },
}

impl Classification {
    pub fn m(&self) -> Option<f64> {
        match self {
            Classification::WeaklyDegenerate { m } | Classification::StronglyDegenerate { m } => Some(*m),
            Classification::Invalid { m, .. } => *m,
            Classification::NonDegenerate => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Classification::WeaklyDegenerate { .. } => "WD",
            Classification::StronglyDegenerate { .. } => "SD",
            Classification::NonDegenerate => "NonDegenerate",
            Classification::Invalid { .. } => "Invalid",
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Classification::WeaklyDegenerate { .. } | Classification::StronglyDegenerate { .. }
        )
    }

    fn from_m(m: f64) -> Self {
        if m > 0.0 && m < 1.0 {
            Classification::WeaklyDegenerate { m }
        } else if (1.0..2.0).contains(&m) {
            Classification::StronglyDegenerate { m }
        } else {
            Classification::Invalid {
                reason: format!("degeneracy exponent {m} is outside (0, 2)"),
                m: Some(m),
            }
        }
    }
}

/// Declared Sobolev class of `k`; recorded, not verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrability {
    W11,
    #[default]
    W1Inf,
}

/// Witness for the structural condition on `k` needed by the non-degenerate
/// Carleman estimate when `k` is only `W^{1,1}`: functions `g ≥ g0 > 0`, `h`
/// and a constant `h0 > 0` with
/// `-k'(x) / (2 sqrt k(x)) (∫_x^B g + h0) + sqrt k(x) g(x) = h(x, B)`.
#[derive(Clone)]
pub struct DegeneracyWitness {
    pub g: ScalarFn,
    pub h: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub g0: f64,
    pub h0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub g_lower_bound_holds: bool,
    pub max_identity_defect: f64,
    pub points_checked: usize,
}

#[derive(Clone)]
pub struct DiffusionCoefficient {
    k: ScalarFn,
    kprime: Option<ScalarFn>,
    x0: f64,
    classification: Classification,
    power: Option<f64>,
    theta: Option<f64>,
    gamma: Option<f64>,
    integrability: Integrability,
    label: String,
}

impl fmt::Debug for DiffusionCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionCoefficient")
            .field("label", &self.label)
            .field("x0", &self.x0)
            .field("classification", &self.classification)
            .finish()
    }
}

const POSITIVITY_TOL: f64 = 1e-12;

/// Classifies `k` from its samples on the grid x-centers plus `x0`.
///
/// `M̂ = max (x - x0) k'(x) / k(x)` over samples with `|x - x0| > 2 dx`.
/// Without an analytic derivative, `k'` is a centered difference with step
/// `dx²`, so the estimate converges as the grid is refined.
pub fn classify(k: &dyn Fn(f64) -> f64, kprime: Option<&dyn Fn(f64) -> f64>, x0: f64, grid: &Grid) -> Classification {
    let dx = grid.dx();
    let mut xs = grid.x_centers();
    xs.push(x0);
    let vals: Vec<f64> = xs.iter().map(|&x| k(x)).collect();
    let kmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    if let Some(i) = vals.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Classification::Invalid { reason: format!("k({}) = {} is negative or not finite", xs[i], vals[i]), m: None };
    }
    if kmax == 0.0 {
        return Classification::Invalid { reason: "k vanishes identically".into(), m: None };
    }
    let tol = POSITIVITY_TOL * kmax;
    let k_at_x0 = *vals.last().unwrap();
    let min_off = vals[..vals.len() - 1]
        .iter()
        .zip(&xs)
        .filter(|(_, &x)| (x - x0).abs() > 2.0 * dx)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    if k_at_x0 > tol {
        if min_off > tol {
            return Classification::NonDegenerate;
        }
        return Classification::Invalid {
            reason: format!("k({x0}) = {k_at_x0} > 0 but k nearly vanishes elsewhere"),
            m: None,
        };
    }
    if min_off <= tol {
        return Classification::Invalid { reason: "k vanishes away from x0".into(), m: None };
    }
    let step = dx * dx;
    let mut m_hat = f64::NEG_INFINITY;
    for &x in &xs[..xs.len() - 1] {
        if (x - x0).abs() <= 2.0 * dx {
            continue;
        }
        let d = match kprime {
            Some(kp) => kp(x),
            None => (k(x + step) - k(x - step)) / (2.0 * step),
        };
        m_hat = m_hat.max((x - x0) * d / k(x));
    }
    Classification::from_m(m_hat)
}

impl DiffusionCoefficient {
    /// General coefficient, classified on `grid`.
    pub fn new(k: ScalarFn, kprime: Option<ScalarFn>, x0: f64, grid: &Grid, label: impl Into<String>) -> Self {
        let kp = kprime.as_ref().map(|f| f.as_ref() as &dyn Fn(f64) -> f64);
        let classification = classify(k.as_ref(), kp, x0, grid);
        DiffusionCoefficient {
            k,
            kprime,
            x0,
            classification,
            power: None,
            theta: None,
            gamma: None,
            integrability: Integrability::default(),
            label: label.into(),
        }
    }

    /// `k(x) = |x - x0|^alpha` with its analytic derivative.
    pub fn power_law(alpha: f64, x0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(format!("power-law exponent must be positive, got {alpha}")));
        }
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::param(format!("x0 must lie in (0,1), got {x0}")));
        }
        let k: ScalarFn = Arc::new(move |x: f64| (x - x0).abs().powf(alpha));
        let kprime: ScalarFn = Arc::new(move |x: f64| {
            let d = x - x0;
            if d == 0.0 {
                0.0
            } else {
                alpha * d.signum() * d.abs().powf(alpha - 1.0)
            }
        });
        let mut classification = Classification::from_m(alpha);
        if let Classification::Invalid { reason, .. } = &mut classification {
            *reason = format!("|x - x0|^{alpha} is outside the WD/SD scope (alpha >= 2)");
        }
        Ok(DiffusionCoefficient {
            k,
            kprime: Some(kprime),
            x0,
            classification,
            power: Some(alpha),
            theta: None,
            gamma: None,
            integrability: if alpha < 1.0 { Integrability::W11 } else { Integrability::W1Inf },
            label: format!("power_law(alpha={alpha}, x0={x0})"),
        })
    }

    /// Strictly positive constant coefficient.
    pub fn constant(c: f64, x0: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param(format!("constant coefficient must be positive, got {c}")));
        }
        Ok(DiffusionCoefficient {
            k: Arc::new(move |_| c),
            kprime: Some(Arc::new(|_| 0.0)),
            x0,
            classification: Classification::NonDegenerate,
            power: None,
            theta: None,
            gamma: None,
            integrability: Integrability::W1Inf,
            label: format!("constant({c})"),
        })
    }

    /// Records the Hypothesis constants used by the Carleman certificates.
    pub fn with_hypothesis_constants(mut self, theta: f64, gamma: f64) -> Self {
        self.theta = Some(theta);
        self.gamma = Some(gamma);
        self
    }

    pub fn with_integrability(mut self, integrability: Integrability) -> Self {
        self.integrability = integrability;
        self
    }

    pub fn k(&self, x: f64) -> f64 {
        (self.k)(x)
    }

    /// Analytic derivative when available, otherwise a centered difference.
    pub fn kprime(&self, x: f64) -> f64 {
        match &self.kprime {
            Some(kp) => kp(x),
            None => {
                let h = 1e-7;
                ((self.k)(x + h) - (self.k)(x - h)) / (2.0 * h)
            }
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.kprime.is_some()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn classification(&self) -> &Classification {
        &self.classification
    }
    pub fn power(&self) -> Option<f64> {
        self.power
    }
    pub fn theta(&self) -> Option<f64> {
        self.theta
    }
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }
    pub fn integrability(&self) -> Integrability {
        self.integrability
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    /// `c * k`, reclassified.
    pub fn scaled(&self, c: f64, grid: &Grid) -> Self {
        let k = self.k.clone();
        let kp = self.kprime.clone();
        let ks: ScalarFn = Arc::new(move |x| c * k(x));
        let kps: Option<ScalarFn> = kp.map(|kp| Arc::new(move |x| c * kp(x)) as ScalarFn);
        let mut out = DiffusionCoefficient::new(ks, kps, self.x0, grid, format!("{c}*{}", self.label));
        out.power = self.power;
        out
    }

    /// `(x - x0)^2 / k(x)`, with the power-law limit at `x0` (0 for alpha < 2).
    pub fn singular_ratio(&self, x: f64) -> f64 {
        let d = x - self.x0;
        let kv = self.k(x);
        if kv > 0.0 {
            d * d / kv
        } else {
            match self.power {
                Some(alpha) if alpha > 2.0 => f64::INFINITY,
                Some(alpha) if alpha == 2.0 => 1.0,
                _ => 0.0,
            }
        }
    }

    /// Checks the witness identity on `samples` points per side, for each
    /// `B` on the same side of `x0` beyond `x`.
    pub fn check_witness(&self, witness: &DegeneracyWitness, samples: usize) -> WitnessReport {
        let x0 = self.x0;
        let mut defect: f64 = 0.0;
        let mut g_ok = true;
        let mut count = 0;
        let pts: Vec<f64> = (1..samples).map(|i| i as f64 / samples as f64).filter(|x| (x - x0).abs() > 1e-3).collect();
        for &x in &pts {
            if (witness.g)(x) < witness.g0 {
                g_ok = false;
            }
            for &b in &pts {
                let same_side = (x < b && b < x0) || (x0 < x && x < b);
                if !same_side {
                    continue;
                }
                let kx = self.k(x);
                let int_g = composite_gauss(&|t| (witness.g)(t), x, b, 4);
                let lhs = -self.kprime(x) / (2.0 * kx.sqrt()) * (int_g + witness.h0) + kx.sqrt() * (witness.g)(x);
                defect = defect.max((lhs - (witness.h)(x, b)).abs());
                count += 1;
            }
        }
        WitnessReport { g_lower_bound_holds: g_ok, max_identity_defect: defect, points_checked: count }
    }
}

/// Outcome of one condition of the Hypothesis on `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    /// Whether the condition is required at this `M`.
    pub required: bool,
    /// Whether it holds on the samples.
    pub holds: bool,
}

impl ConditionCheck {
    /// Satisfied or not needed.
    pub fn ok(&self) -> bool {
        self.holds || !self.required
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis31Report {
    pub m: f64,
    pub theta: f64,
    pub gamma: f64,
    /// `k / |x - x0|^θ` nonincreasing left of `x0`, nondecreasing right of it (needed for `M > 4/3`).
    pub monotone_ratio: ConditionCheck,
    /// The same ratio bounded below away from zero (needed for `M > 3/2`).
    pub ratio_bounded_below: ConditionCheck,
    /// `|k'| <= Γ |x - x0|^{2θ-3}` (needed for `M > 3/2`).
    pub derivative_bound: ConditionCheck,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Hypothesis31Report {
    pub fn all_ok(&self) -> bool {
        self.monotone_ratio.ok() && self.ratio_bounded_below.ok() && self.derivative_bound.ok()
    }
}

const MONO_TOL: f64 = 1e-10;

/// Checks the structural Hypothesis on `k` at the grid x-centers.
pub fn check_hypothesis_3_1(coeff: &DiffusionCoefficient, theta: f64, gamma: f64, grid: &Grid) -> Result<Hypothesis31Report> {
    let m = match coeff.classification() {
        c @ (Classification::WeaklyDegenerate { .. } | Classification::StronglyDegenerate { .. }) => c.m().unwrap(),
        other => {
            return Err(Error::Precondition(format!("k must be WD or SD, got {}", other.tag())));
        }
    };
    if !(theta > 0.0 && theta <= m) {
        return Err(Error::param(format!("theta must lie in (0, M] = (0, {m}], got {theta}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    let x0 = coeff.x0();
    let xs = grid.x_centers();
    let ratio = |x: f64| coeff.k(x) / (x - x0).abs().powf(theta);

    let left: Vec<f64> = xs.iter().filter(|&&x| x < x0).map(|&x| ratio(x)).collect();
    let right: Vec<f64> = xs.iter().filter(|&&x| x > x0).map(|&x| ratio(x)).collect();
    let left_ok = left.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONO_TOL));
    let right_ok = right.windows(2).all(|w| w[1] >= w[0] * (1.0 - MONO_TOL));
    let all: Vec<f64> = left.iter().chain(&right).cloned().collect();
    let ratio_min = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio_max = all.iter().cloned().fold(0.0, f64::max);

    let deriv_ok = xs.iter().filter(|&&x| x != x0).all(|&x| {
        let bound = gamma * (x - x0).abs().powf(2.0 * theta - 3.0);
        coeff.kprime(x).abs() <= bound * (1.0 + 1e-12)
    });

    Ok(Hypothesis31Report {
        m,
        theta,
        gamma,
        monotone_ratio: ConditionCheck { required: m > 4.0 / 3.0, holds: left_ok && right_ok },
        ratio_bounded_below: ConditionCheck { required: m > 1.5, holds: ratio_min > 0.0 && ratio_min.is_finite() },
        derivative_bound: ConditionCheck { required: m > 1.5, holds: deriv_ok },
        ratio_min,
        ratio_max,
    })
}
