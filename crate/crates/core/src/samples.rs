//! Seeded smooth random data for the certificates.
//!
//! Every sample is `Σ_{m,n ≤ 3} c_mn sin(nπx) cos((2m-1)πa/(2A))`, with
//! coefficients uniform in `(-1, 1)`. The age factor vanishes at `a = A`.
//! Sample `id` draws from stream `id` of a ChaCha8 generator seeded with
//! `seed`, so samples are independent of evaluation order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{Field, Rank};
use crate::grid::Grid;

pub const MODES: usize = 3;

/// Which datum a sample is for; each kind uses its own sub-stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Terminal,
    Initial,
    Source,
}

fn rng(seed: u64, id: u64, kind: SampleKind) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let k = match kind {
        SampleKind::Terminal => 0,
        SampleKind::Initial => 1,
        SampleKind::Source => 2,
    };
    r.set_stream(id.wrapping_mul(4).wrapping_add(k));
    r
}

fn coefficients(r: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| r.gen_range(-1.0..1.0)).collect()
}

fn age_mode(m: usize, a: f64, a_max: f64) -> f64 {
    ((2 * m - 1) as f64 * PI * a / (2.0 * a_max)).cos()
}

fn age_table(grid: &Grid) -> Vec<Vec<f64>> {
    (1..=MODES).map(|m| (0..grid.na()).map(|j| age_mode(m, grid.a(j), grid.a_max())).collect()).collect()
}

fn space_table(grid: &Grid) -> Vec<Vec<f64>> {
    (1..=MODES).map(|n| (0..grid.nx()).map(|i| (n as f64 * PI * grid.x(i)).sin()).collect()).collect()
}

/// Fills one `(a, x)` slice from mode weights `w[m][n]`.
fn fill_slice(out: &mut [f64], w: &[f64], ages: &[Vec<f64>], xs: &[Vec<f64>]) {
    let nx = xs[0].len();
    for (j, row) in out.chunks_mut(nx).enumerate() {
        let mut d = [0.0; MODES];
        for (n, dn) in d.iter_mut().enumerate() {
            *dn = (0..MODES).map(|m| w[m * MODES + n] * ages[m][j]).sum();
        }
        for (i, r) in row.iter_mut().enumerate() {
            *r = (0..MODES).map(|n| d[n] * xs[n][i]).sum();
        }
    }
}

/// Smooth `(a, x)` slice.
pub fn slice_sample(grid: &Grid, seed: u64, id: u64, kind: SampleKind) -> Field {
    let c = coefficients(&mut rng(seed, id, kind), MODES * MODES);
    let mut v = vec![0.0; grid.slice_len()];
    fill_slice(&mut v, &c, &age_table(grid), &space_table(grid));
    Field::from_values(grid, Rank::Slice, v).expect("slice length")
}

pub fn terminal_sample(grid: &Grid, seed: u64, id: u64) -> Field {
    slice_sample(grid, seed, id, SampleKind::Terminal)
}

pub fn initial_sample(grid: &Grid, seed: u64, id: u64) -> Field {
    slice_sample(grid, seed, id, SampleKind::Initial)
}

/// Smooth `(t, a, x)` source: slice modes with coefficients `c + c' cos(πt/T)`.
pub fn source_sample(grid: &Grid, seed: u64, id: u64) -> Field {
    let mm = MODES * MODES;
    let c = coefficients(&mut rng(seed, id, SampleKind::Source), 2 * mm);
    let (ages, xs) = (age_table(grid), space_table(grid));
    let mut v = vec![0.0; grid.trajectory_len()];
    for (n, level) in v.chunks_mut(grid.slice_len()).enumerate() {
        let tl = (PI * grid.t(n) / grid.t_final()).cos();
        let w: Vec<f64> = (0..mm).map(|q| c[q] + tl * c[mm + q]).collect();
        fill_slice(level, &w, &ages, &xs);
    }
    Field::from_values(grid, Rank::Trajectory, v).expect("trajectory length")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        let g = Grid::aligned(1.0, 2.0, 8, 17, 0.3).unwrap();
        assert_eq!(terminal_sample(&g, 42, 3), terminal_sample(&g, 42, 3));
        assert_ne!(terminal_sample(&g, 42, 3), terminal_sample(&g, 42, 4));
        assert_ne!(terminal_sample(&g, 42, 3), terminal_sample(&g, 43, 3));
        assert_ne!(terminal_sample(&g, 42, 3).values(), initial_sample(&g, 42, 3).values());
        assert!(source_sample(&g, 1, 0).is_finite());
    }

    #[test]
    fn matches_mode_formula() {
        let g = Grid::aligned(1.0, 2.0, 8, 17, 0.3).unwrap();
        let c = coefficients(&mut rng(5, 2, SampleKind::Terminal), MODES * MODES);
        let direct = Field::slice_from_fn(&g, |a, x| {
            let mut s = 0.0;
            for m in 1..=MODES {
                for n in 1..=MODES {
                    s += c[(m - 1) * MODES + n - 1] * age_mode(m, a, 2.0) * (n as f64 * PI * x).sin();
                }
            }
            s
        });
        let v = terminal_sample(&g, 5, 2);
        for (p, q) in v.values().iter().zip(direct.values()) {
            assert!((p - q).abs() < 1e-13);
        }
        let f = source_sample(&g, 5, 2);
        let last = f.slice_at(g.nt());
        let c = coefficients(&mut rng(5, 2, SampleKind::Source), 2 * MODES * MODES);
        let a = g.a(3);
        let x = g.x(4);
        let mut e = 0.0;
        for m in 1..=MODES {
            for n in 1..=MODES {
                let q = (m - 1) * MODES + n - 1;
                e += (c[q] - c[MODES * MODES + q]) * age_mode(m, a, 2.0) * (n as f64 * PI * x).sin();
            }
        }
        assert!((last.values()[3 * g.nx() + 4] - e).abs() < 1e-13);
    }

    #[test]
    fn age_factor_vanishes_at_max_age() {
        for m in 1..=MODES {
            assert!(age_mode(m, 2.0, 2.0).abs() < 1e-15);
        }
    }
}
