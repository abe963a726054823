//! Carleman weights.
//!
//! Degenerate family: `Θ(t,a) = 1/([t(T-t)]⁴ a⁴)`,
//! `ψ(x) = c1 [∫_{x0}^x (y-x0)/k(y) dy - c2]`, `φ = Θ ψ`.
//! Non-degenerate family on `[B1, B2]` with `k > 0`:
//! `σ(x) = 𝔡 ∫_x^{B2} 1/k`, `φ̂ = Θ e^{κσ}`, `Φ = Θ (e^{κσ} - e^{2κ‖σ‖∞})`.
//!
//! Exponential factors are handled as logarithms; [`exp_clamped`] turns them
//! into numbers, flushing anything below `e^{-700}` to zero.

use crate::coefficients::DiffusionCoefficient;
use crate::error::{Error, Result};
use crate::field::Interval;
use crate::grid::Grid;
use crate::quadrature::{composite_gauss, graded_integral};

pub const LOG_FLOOR: f64 = -700.0;
pub const DFRAK_FLOOR: f64 = 1e-6;
const PSI_LEVELS: usize = 40;

/// `e^l`, or 0 when `l < -700` (including `-∞`).
pub fn exp_clamped(l: f64) -> f64 {
    if l < LOG_FLOOR {
        0.0
    } else {
        l.exp()
    }
}

/// `1/([t(h - t)]⁴ a⁴)` for horizon `h`.
pub fn theta_raw(t: f64, a: f64, horizon: f64) -> f64 {
    let q = t * (horizon - t) * a;
    1.0 / (q * q * q * q)
}

/// Shifted time weight `1/((t-T1)⁴ (T2-t)⁴ (a-δ)⁴)`.
pub fn theta_shifted(t: f64, a: f64, t1: f64, t2: f64, delta: f64) -> Result<f64> {
    if !(t > t1 && t < t2 && a > delta) {
        return Err(Error::Singularity(format!("(t, a) = ({t}, {a}) outside ({t1}, {t2}) x ({delta}, ∞)")));
    }
    Ok(theta_raw(t - t1, a - delta, t2 - t1))
}

/// `∫_{x0}^x (y - x0)/k(y) dy`, nonnegative on both sides of `x0`.
pub fn psi_integral(coeff: &DiffusionCoefficient, x: f64) -> f64 {
    let x0 = coeff.x0();
    if x == x0 {
        return 0.0;
    }
    graded_integral(&|y: f64| (y - x0) / coeff.k(y), x0, x, PSI_LEVELS)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WeightOptions {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct WeightSet {
    pub c1: f64,
    pub c2: f64,
    pub s: f64,
    pub kappa: f64,
    /// `max_x ∫_{x0}^x (y-x0)/k`.
    pub psi_integral_max: f64,
    t_final: f64,
    a_max: f64,
    coeff: DiffusionCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEval {
    pub theta: f64,
    pub psi: f64,
    pub phi: f64,
    /// `2 s φ`, the logarithm of `e^{2sφ}`.
    pub log_exp_factor: f64,
}

impl WeightSet {
    /// Defaults: `c1 = 1`, `c2 = 1.5 max ∫_{x0}^x (y-x0)/k`, `κ = 1`.
    pub fn new(coeff: &DiffusionCoefficient, t_final: f64, a_max: f64, s: f64, opts: WeightOptions) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::param(format!("Carleman parameter s must be positive, got {s}")));
        }
        if !coeff.classification().is_degenerate() {
            return Err(Error::Precondition(format!(
                "degenerate weights need a WD or SD coefficient, got {}",
                coeff.classification().tag()
            )));
        }
        // the integral grows away from x0 on both sides
        let imax = psi_integral(coeff, 0.0).max(psi_integral(coeff, 1.0));
        if !imax.is_finite() {
            return Err(Error::Singularity("∫ (y-x0)/k diverges; need M < 2".into()));
        }
        let c1 = opts.c1.unwrap_or(1.0);
        let c2 = opts.c2.unwrap_or(1.5 * imax);
        let kappa = opts.kappa.unwrap_or(1.0);
        if !(c1 > 0.0) || !(kappa > 0.0) {
            return Err(Error::param("c1 and kappa must be positive"));
        }
        if !(c2 > imax) {
            return Err(Error::param(format!("c2 = {c2} must exceed max ∫(y-x0)/k = {imax} so that psi < 0")));
        }
        Ok(WeightSet { c1, c2, s, kappa, psi_integral_max: imax, t_final, a_max, coeff: coeff.clone() })
    }

    pub fn with_s(&self, s: f64) -> Self {
        WeightSet { s, ..self.clone() }
    }

    pub fn coeff(&self) -> &DiffusionCoefficient {
        &self.coeff
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn theta(&self, t: f64, a: f64) -> Result<f64> {
        if !(t > 0.0 && t < self.t_final) || !(a > 0.0) {
            return Err(Error::Singularity(format!("Θ is singular at (t, a) = ({t}, {a})")));
        }
        if a > self.a_max {
            return Err(Error::param(format!("a = {a} exceeds A = {}", self.a_max)));
        }
        Ok(theta_raw(t, a, self.t_final))
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.c1 * (psi_integral(&self.coeff, x) - self.c2)
    }

    /// `ψ` at the grid x-centers.
    pub fn psi_profile(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.nx()).map(|i| self.psi(grid.x(i))).collect()
    }
}

pub fn eval_weights(ws: &WeightSet, t: f64, a: f64, x: f64) -> Result<WeightEval> {
    let theta = ws.theta(t, a)?;
    let psi = ws.psi(x);
    let phi = theta * psi;
    Ok(WeightEval { theta, psi, phi, log_exp_factor: 2.0 * ws.s * phi })
}

/// `(s Θ)^p e^{2 s Θ ψ}` through logarithms; 0 where `Θ` is infinite.
pub fn carleman_factor(s: f64, theta: f64, psi: f64, p: i32) -> f64 {
    if !theta.is_finite() {
        return 0.0;
    }
    let st = s * theta;
    exp_clamped(p as f64 * st.ln() + 2.0 * st * psi)
}

/// Non-degenerate weights on `[B1, B2]`.
#[derive(Debug, Clone)]
pub struct NondegWeights {
    pub interval: Interval,
    pub kappa: f64,
    pub dfrak: f64,
    /// `𝔡` was raised to [`DFRAK_FLOOR`].
    pub dfrak_floored: bool,
    pub sigma_max: f64,
    t_final: f64,
    a_max: f64,
    coeff: DiffusionCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegEval {
    pub theta: f64,
    pub sigma: f64,
    pub phat: f64,
    pub big_phi: f64,
    /// `2 s Φ`.
    pub log_exp_factor: f64,
}

const DFRAK_SAMPLES: usize = 2000;

impl NondegWeights {
    pub fn new(coeff: &DiffusionCoefficient, interval: Interval, kappa: f64, t_final: f64, a_max: f64) -> Result<Self> {
        let (b1, b2) = (interval.lo, interval.hi);
        if !(0.0 <= b1 && b1 < b2 && b2 <= 1.0) {
            return Err(Error::domain(format!("[{b1}, {b2}] is not a subinterval of [0, 1]")));
        }
        if !(kappa > 0.0) {
            return Err(Error::param("kappa must be positive"));
        }
        let mut pts: Vec<f64> = (0..=DFRAK_SAMPLES).map(|i| b1 + (b2 - b1) * i as f64 / DFRAK_SAMPLES as f64).collect();
        if interval.contains(coeff.x0()) {
            pts.push(coeff.x0());
        }
        let kmin = pts.iter().map(|&x| coeff.k(x)).fold(f64::INFINITY, f64::min);
        if !(kmin > 0.0) {
            return Err(Error::domain(format!("k is not strictly positive on [{b1}, {b2}] (min {kmin})")));
        }
        let raw = pts.iter().map(|&x| coeff.kprime(x).abs()).fold(0.0, f64::max);
        let (dfrak, dfrak_floored) = if raw < DFRAK_FLOOR { (DFRAK_FLOOR, true) } else { (raw, false) };
        let mut w = NondegWeights {
            interval,
            kappa,
            dfrak,
            dfrak_floored,
            sigma_max: 0.0,
            t_final,
            a_max,
            coeff: coeff.clone(),
        };
        w.sigma_max = w.sigma(b1);
        Ok(w)
    }

    pub fn k(&self, x: f64) -> f64 {
        self.coeff.k(x)
    }

    /// `𝔡 ∫_x^{B2} 1/k`.
    pub fn sigma(&self, x: f64) -> f64 {
        let b2 = self.interval.hi;
        if x >= b2 {
            return 0.0;
        }
        self.dfrak * composite_gauss(&|y: f64| 1.0 / self.coeff.k(y), x, b2, 16)
    }

    pub fn eval(&self, t: f64, a: f64, x: f64, s: f64) -> Result<NondegEval> {
        if !(t > 0.0 && t < self.t_final) || !(a > 0.0 && a <= self.a_max) {
            return Err(Error::Singularity(format!("Θ is singular at (t, a) = ({t}, {a})")));
        }
        if !self.interval.contains(x) {
            return Err(Error::domain(format!("x = {x} outside [{}, {}]", self.interval.lo, self.interval.hi)));
        }
        let theta = theta_raw(t, a, self.t_final);
        let sigma = self.sigma(x);
        let e = (self.kappa * sigma).exp();
        let big = (2.0 * self.kappa * self.sigma_max).exp();
        let big_phi = theta * (e - big);
        Ok(NondegEval { theta, sigma, phat: theta * e, big_phi, log_exp_factor: 2.0 * s * big_phi })
    }
}

/// Non-degenerate weights of `ws` (its `κ`, `s`, horizon) on `[B1, B2]`.
pub fn eval_nondeg_weights(ws: &WeightSet, t: f64, a: f64, x: f64, interval: Interval) -> Result<NondegEval> {
    NondegWeights::new(&ws.coeff, interval, ws.kappa, ws.t_final, ws.a_max)?.eval(t, a, x, ws.s)
}

/// Weight `p` of the Hardy–Poincaré inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardyWeight {
    /// `|x - x0|^{4/3}`.
    Power,
    /// `(k |x - x0|⁴)^{1/3}`.
    Mixed,
}

impl HardyWeight {
    pub fn eval(self, coeff: &DiffusionCoefficient, x: f64) -> f64 {
        let d = (x - coeff.x0()).abs();
        match self {
            HardyWeight::Power => d.powf(4.0 / 3.0),
            HardyWeight::Mixed => (coeff.k(x) * d.powi(4)).cbrt(),
        }
    }
}

/// `∫ p v²/(x-x0)² / ∫ p v_x²` on the grid; the cell holding `x0` is left
/// out of the numerator, `v_x` lives on cell edges with Dirichlet walls.
pub fn hardy_poincare_ratio(p: HardyWeight, v: &crate::field::Field, coeff: &DiffusionCoefficient) -> Result<f64> {
    v.expect_rank(crate::field::Rank::Profile, "Hardy–Poincaré input")?;
    let g = v.grid();
    let (nx, h) = (g.nx(), g.dx());
    let x0 = coeff.x0();
    let u = v.values();
    let skip = g.x0_cell();
    let mut num = 0.0;
    for (i, ui) in u.iter().enumerate() {
        if i == skip {
            continue;
        }
        let x = g.x(i);
        num += h * p.eval(coeff, x) * ui * ui / ((x - x0) * (x - x0));
    }
    let mut den = 0.0;
    for e in 0..=nx {
        let (grad, len) = if e == 0 {
            (u[0] / (0.5 * h), 0.5 * h)
        } else if e == nx {
            (-u[nx - 1] / (0.5 * h), 0.5 * h)
        } else {
            ((u[e] - u[e - 1]) / h, h)
        };
        den += len * p.eval(coeff, g.x_edge(e)) * grad * grad;
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use proptest::prelude::*;

    fn ws(alpha: f64) -> WeightSet {
        let c = DiffusionCoefficient::power_law(alpha, 0.3).unwrap();
        WeightSet::new(&c, 1.0, 1.0, 2.0, WeightOptions::default()).unwrap()
    }

    #[test]
    fn theta_value_at_centre() {
        let w = ws(0.5);
        assert_eq!(w.theta(0.5, 1.0).unwrap(), 256.0);
        assert!(matches!(w.theta(0.0, 0.5), Err(Error::Singularity(_))));
        assert!(matches!(w.theta(0.5, 0.0), Err(Error::Singularity(_))));
        assert!(matches!(eval_weights(&w, 1.0, 0.5, 0.5), Err(Error::Singularity(_))));
    }

    #[test]
    fn psi_matches_closed_form() {
        for alpha in [0.5, 1.0, 1.5] {
            let w = ws(alpha);
            for x in [0.0, 0.1, 0.29, 0.31, 0.6, 1.0] {
                let exact = w.c1 * ((x - 0.3f64).abs().powf(2.0 - alpha) / (2.0 - alpha) - w.c2);
                assert!((w.psi(x) - exact).abs() < 1e-8, "alpha {alpha} x {x}: {} vs {exact}", w.psi(x));
            }
            assert_eq!(w.psi(0.3), -w.c1 * w.c2);
        }
    }

    #[test]
    fn psi_is_negative_and_v_shaped() {
        let w = ws(1.5);
        let g = Grid::aligned(1.0, 1.0, 8, 101, 0.3).unwrap();
        let p = w.psi_profile(&g);
        assert!(p.iter().all(|&v| v < 0.0));
        let c = g.x0_cell();
        assert!(p[..=c].windows(2).all(|w| w[1] <= w[0]));
        assert!(p[c + 1..].windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn c2_must_keep_psi_negative() {
        let c = DiffusionCoefficient::power_law(0.5, 0.3).unwrap();
        let o = WeightOptions { c2: Some(0.1), ..Default::default() };
        assert!(matches!(WeightSet::new(&c, 1.0, 1.0, 1.0, o), Err(Error::Parameter(_))));
    }

    #[test]
    fn shifted_theta_is_affine_substitution() {
        let v = theta_shifted(0.75, 1.5, 0.25, 1.25, 0.5).unwrap();
        assert_eq!(v, theta_raw(0.5, 1.0, 1.0));
        assert!(theta_shifted(0.1, 1.6, 0.2, 1.2, 0.5).is_err());
    }

    #[test]
    fn nondegenerate_family() {
        let w = ws(0.5);
        let iv = Interval::new(0.5, 1.0);
        let e = eval_nondeg_weights(&w, 0.5, 0.5, 1.0, iv).unwrap();
        assert_eq!(e.sigma, 0.0);
        assert_eq!(e.phat, e.theta);
        assert!(e.big_phi < 0.0);
        let nd = NondegWeights::new(w.coeff(), iv, 1.0, 1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..=20).map(|i| 0.5 + 0.025 * i as f64).collect();
        assert!(xs.windows(2).all(|p| nd.sigma(p[1]) <= nd.sigma(p[0])));
        assert!(matches!(
            eval_nondeg_weights(&w, 0.5, 0.5, 0.3, Interval::new(0.2, 0.4)),
            Err(Error::Domain(_))
        ));
        // constant k: floored 𝔡
        let c = DiffusionCoefficient::constant(1.0, 0.3).unwrap();
        let nd = NondegWeights::new(&c, iv, 2.0, 1.0, 1.0).unwrap();
        assert!(nd.dfrak_floored);
        let e = nd.eval(0.5, 0.5, 0.6, 1.0).unwrap();
        assert!(e.big_phi < 0.0);
    }

    #[test]
    fn hardy_ratio_conventions() {
        let g = Grid::aligned(1.0, 1.0, 8, 101, 0.5).unwrap();
        let c = DiffusionCoefficient::power_law(0.5, 0.5).unwrap();
        let zero = Field::zeros(&g, crate::field::Rank::Profile);
        assert_eq!(hardy_poincare_ratio(HardyWeight::Power, &zero, &c).unwrap(), 0.0);
        let v = Field::profile_from_fn(&g, |x| (std::f64::consts::PI * x).sin());
        let r1 = hardy_poincare_ratio(HardyWeight::Power, &v, &c).unwrap();
        let r2 = hardy_poincare_ratio(HardyWeight::Power, &v.scaled(-3.5), &c).unwrap();
        assert!(r1.is_finite() && r1 > 0.0);
        assert!((r1 - r2).abs() <= 1e-14 * r1);
    }

    #[test]
    fn clamp_flushes_underflow() {
        assert_eq!(exp_clamped(-701.0), 0.0);
        assert_eq!(exp_clamped(f64::NEG_INFINITY), 0.0);
        assert_eq!(carleman_factor(1.0, f64::INFINITY, -1.0, 3), 0.0);
    }

    proptest! {
        #[test]
        fn theta_time_symmetric(k in 1u32..1024, a in 0.01f64..1.0) {
            let w = ws(0.5);
            let t = k as f64 / 1024.0;
            prop_assert_eq!(w.theta(t, a).unwrap(), theta_raw(1.0 - t, a, 1.0));
            prop_assert!(eval_weights(&w, t, a, 0.8).unwrap().log_exp_factor < 0.0);
        }
    }
}
