//! Gauss–Legendre rules and a geometrically graded composite rule for
//! integrands with an integrable endpoint singularity.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

/// 10-point Gauss–Legendre on `[lo, hi]`.
pub fn gauss10(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (nodes, weights) = gl10();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Composite 10-point Gauss–Legendre on `pieces` equal subintervals.
pub fn composite_gauss(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, pieces: usize) -> f64 {
    let h = (hi - lo) / pieces as f64;
    (0..pieces).map(|p| gauss10(f, lo + p as f64 * h, lo + (p + 1) as f64 * h)).sum()
}

/// `∫_from^to f` where `f` may be singular (but integrable) at `from`.
///
/// The interval is split into `levels` pieces whose lengths halve toward
/// `from`, each integrated by Gauss–Legendre. The innermost remainder of
/// relative length `2^-levels` is closed with a local power-law fit
/// `f ~ c |t - from|^p`, which is exact for power-type singularities.
pub fn graded_integral(f: &impl Fn(f64) -> f64, from: f64, to: f64, levels: usize) -> f64 {
    let d = to - from;
    if d == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut outer = 1.0;
    for _ in 0..levels {
        let inner = 0.5 * outer;
        total += gauss10(f, from + inner * d, from + outer * d);
        outer = inner;
    }
    let eps = outer * d;
    let (f1, f2) = (f(from + eps), f(from + 2.0 * eps));
    if f1 != 0.0 && f2 != 0.0 && f1.signum() == f2.signum() {
        let p = (f2 / f1).log2();
        if p > -1.0 && p.is_finite() {
            total += f1 * eps / (p + 1.0);
        }
    }
    total
}
