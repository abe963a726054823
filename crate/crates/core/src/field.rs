//! Scalar fields on a [`Grid`] and the quadrature built on them.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Which axes a field spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    /// `x` only.
    Profile,
    /// `(a, x)`.
    Slice,
    /// `(t, a, x)` over all `nt + 1` time levels.
    Trajectory,
}

impl Rank {
    pub fn len(self, grid: &Grid) -> usize {
        match self {
            Rank::Profile => grid.nx(),
            Rank::Slice => grid.slice_len(),
            Rank::Trajectory => grid.trajectory_len(),
        }
    }
}

/// Real values sampled on a grid, row-major in `(t, a, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    rank: Rank,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid, rank: Rank) -> Self {
        Field { grid: *grid, rank, values: vec![0.0; rank.len(grid)] }
    }

    pub fn from_values(grid: &Grid, rank: Rank, values: Vec<f64>) -> Result<Self> {
        let want = rank.len(grid);
        if values.len() != want {
            return Err(Error::shape(format!(
                "{rank:?} field needs {want} values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value at index {bad}")));
        }
        Ok(Field { grid: *grid, rank, values })
    }

    pub fn profile_from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.nx()).map(|i| f(grid.x(i))).collect();
        Field { grid: *grid, rank: Rank::Profile, values }
    }

    pub fn slice_from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.slice_len());
        for j in 0..grid.na() {
            let a = grid.a(j);
            for i in 0..grid.nx() {
                values.push(f(a, grid.x(i)));
            }
        }
        Field { grid: *grid, rank: Rank::Slice, values }
    }

    pub fn trajectory_from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.trajectory_len());
        for n in 0..grid.levels() {
            let t = grid.t(n);
            for j in 0..grid.na() {
                let a = grid.a(j);
                for i in 0..grid.nx() {
                    values.push(f(t, a, grid.x(i)));
                }
            }
        }
        Field { grid: *grid, rank: Rank::Trajectory, values }
    }

    /// Stacks `levels` slices into a trajectory.
    pub fn from_levels(grid: &Grid, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.len() != grid.levels() {
            return Err(Error::shape(format!(
                "expected {} levels, got {}",
                grid.levels(),
                levels.len()
            )));
        }
        let mut values = Vec::with_capacity(grid.trajectory_len());
        for l in levels {
            if l.len() != grid.slice_len() {
                return Err(Error::shape("level has wrong length"));
            }
            values.extend(l);
        }
        Field::from_values(grid, Rank::Trajectory, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn rank(&self) -> Rank {
        self.rank
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn expect_rank(&self, rank: Rank, what: &str) -> Result<()> {
        if self.rank != rank {
            return Err(Error::shape(format!("{what} must be a {rank:?} field, got {:?}", self.rank)));
        }
        Ok(())
    }

    pub fn expect_grid(&self, grid: &Grid, what: &str) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::shape(format!("{what} lives on a different grid")));
        }
        Ok(())
    }

    /// Values of time level `n` (a trajectory) as an `(a, x)` block.
    pub fn level(&self, n: usize) -> &[f64] {
        debug_assert_eq!(self.rank, Rank::Trajectory);
        let len = self.grid.slice_len();
        &self.values[n * len..(n + 1) * len]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        debug_assert_eq!(self.rank, Rank::Trajectory);
        let len = self.grid.slice_len();
        &mut self.values[n * len..(n + 1) * len]
    }

    /// Time level `n` of a trajectory as a slice field.
    pub fn slice_at(&self, n: usize) -> Field {
        Field { grid: self.grid, rank: Rank::Slice, values: self.level(n).to_vec() }
    }

    /// Age layer `j` of a slice field as a profile.
    pub fn layer(&self, j: usize) -> Field {
        debug_assert_eq!(self.rank, Rank::Slice);
        let nx = self.grid.nx();
        Field { grid: self.grid, rank: Rank::Profile, values: self.values[j * nx..(j + 1) * nx].to_vec() }
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field { grid: self.grid, rank: self.rank, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(Field { grid: self.grid, rank: self.rank, values })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Discrete inner product used by the time-stepping scheme.
    ///
    /// Profiles and slices use the cell-centered rule. Trajectories pair the
    /// levels `0..nt` with weight `dt` each: a source at level `n` acts on the
    /// step `n -> n+1`, so this is the pairing under which the backward solver
    /// is the exact adjoint of the forward one.
    pub fn scheme_inner(&self, other: &Field) -> Result<f64> {
        self.check_same(other)?;
        let g = &self.grid;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        Ok(match self.rank {
            Rank::Profile => g.dx() * dot(&self.values, &other.values),
            Rank::Slice => g.da() * g.dx() * dot(&self.values, &other.values),
            Rank::Trajectory => {
                let len = g.slice_len() * g.nt();
                g.dt() * g.da() * g.dx() * dot(&self.values[..len], &other.values[..len])
            }
        })
    }

    pub fn scheme_norm_sq(&self) -> f64 {
        self.scheme_inner(self).expect("same field")
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.rank != other.rank {
            return Err(Error::shape(format!(
                "fields differ in grid or rank ({:?} vs {:?})",
                self.rank, other.rank
            )));
        }
        Ok(())
    }
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Axis-aligned sub-box of `Q`; `None` on an axis means the full range.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubBox {
    pub t: Option<Interval>,
    pub a: Option<Interval>,
    pub x: Option<Interval>,
}

impl SubBox {
    pub fn full() -> Self {
        SubBox::default()
    }
    pub fn with_t(mut self, lo: f64, hi: f64) -> Self {
        self.t = Some(Interval::new(lo, hi));
        self
    }
    pub fn with_a(mut self, lo: f64, hi: f64) -> Self {
        self.a = Some(Interval::new(lo, hi));
        self
    }
    pub fn with_x(mut self, lo: f64, hi: f64) -> Self {
        self.x = Some(Interval::new(lo, hi));
        self
    }
}

/// Cell/level membership of a sub-box on a grid.
struct Selection {
    t: Vec<f64>,
    a: Vec<f64>,
    x: Vec<f64>,
}

const LEVEL_TOL: f64 = 1e-12;

fn axis_weights(
    interval: Option<Interval>,
    n: usize,
    step: f64,
    coord: impl Fn(usize) -> f64,
    name: &str,
) -> Result<Vec<f64>> {
    if let Some(iv) = interval {
        if !(iv.lo < iv.hi) {
            return Err(Error::domain(format!("{name}-interval [{}, {}] is empty", iv.lo, iv.hi)));
        }
    }
    let w: Vec<f64> = (0..n)
        .map(|k| match interval {
            Some(iv) if !iv.contains(coord(k)) => 0.0,
            _ => step,
        })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::domain(format!("no {name} cell lies inside the requested box")));
    }
    Ok(w)
}

/// Composite trapezoid weights over the contiguous run of time levels inside `interval`.
fn level_weights(grid: &Grid, interval: Option<Interval>) -> Result<Vec<f64>> {
    let dt = grid.dt();
    let (lo, hi) = match interval {
        Some(iv) => {
            if !(iv.lo < iv.hi) {
                return Err(Error::domain(format!("t-interval [{}, {}] is empty", iv.lo, iv.hi)));
            }
            (iv.lo, iv.hi)
        }
        None => (0.0, grid.t_final()),
    };
    let inside: Vec<usize> = (0..grid.levels())
        .filter(|&n| {
            let t = grid.t(n);
            t >= lo - LEVEL_TOL * dt && t <= hi + LEVEL_TOL * dt
        })
        .collect();
    if inside.is_empty() {
        return Err(Error::domain("no time level lies inside the requested box"));
    }
    let mut w = vec![0.0; grid.levels()];
    if inside.len() == 1 {
        return Ok(w);
    }
    let (first, last) = (inside[0], *inside.last().unwrap());
    for n in first..=last {
        w[n] = if n == first || n == last { 0.5 * dt } else { dt };
    }
    Ok(w)
}

impl Selection {
    fn new(grid: &Grid, rank: Rank, domain: &SubBox) -> Result<Self> {
        let x = axis_weights(domain.x, grid.nx(), grid.dx(), |i| grid.x(i), "x")?;
        let a = if rank == Rank::Profile {
            vec![1.0]
        } else {
            axis_weights(domain.a, grid.na(), grid.da(), |j| grid.a(j), "a")?
        };
        let t = if rank == Rank::Trajectory { level_weights(grid, domain.t)? } else { vec![1.0] };
        Ok(Selection { t, a, x })
    }
}

/// Pointwise weight in [`weighted_norm`].
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    Constant(f64),
    /// Same rank as the field, or a profile broadcast along `t` and `a`.
    Field(&'a Field),
}

/// Quadrature of `weight * field^2` over `domain`: cell-centered in `a` and
/// `x`, composite trapezoid over time levels.
pub fn weighted_norm(field: &Field, weight: Weight<'_>, domain: &SubBox) -> Result<f64> {
    let grid = field.grid();
    if let Weight::Field(w) = weight {
        w.expect_grid(grid, "weight")?;
        if w.rank != field.rank && w.rank != Rank::Profile {
            return Err(Error::shape(format!(
                "weight rank {:?} incompatible with field rank {:?}",
                w.rank, field.rank
            )));
        }
    }
    let sel = Selection::new(grid, field.rank, domain)?;
    let nx = grid.nx();
    let na = sel.a.len();
    let mut total = 0.0;
    for (n, &wt) in sel.t.iter().enumerate() {
        if wt == 0.0 {
            continue;
        }
        for (j, &wa) in sel.a.iter().enumerate() {
            if wa == 0.0 {
                continue;
            }
            let base = (n * na + j) * nx;
            let mut row = 0.0;
            for (i, &wx) in sel.x.iter().enumerate() {
                if wx == 0.0 {
                    continue;
                }
                let v = field.values[base + i];
                let w = match weight {
                    Weight::Constant(c) => c,
                    Weight::Field(w) if w.rank == Rank::Profile => w.values[i],
                    Weight::Field(w) => w.values[base + i],
                };
                row += wx * w * v * v;
            }
            total += wt * wa * row;
        }
    }
    Ok(total)
}

/// Zeroes `field` outside `domain` (sharp indicator on cell centers / levels).
pub fn restrict(field: &Field, domain: &SubBox) -> Result<Field> {
    let grid = field.grid();
    let x = axis_weights(domain.x, grid.nx(), 1.0, |i| grid.x(i), "x")?;
    let a = if field.rank == Rank::Profile {
        vec![1.0]
    } else {
        axis_weights(domain.a, grid.na(), 1.0, |j| grid.a(j), "a")?
    };
    let t: Vec<f64> = if field.rank == Rank::Trajectory {
        let dt = grid.dt();
        let keep: Vec<f64> = (0..grid.levels())
            .map(|n| match domain.t {
                Some(iv) => {
                    let t = grid.t(n);
                    if t >= iv.lo - LEVEL_TOL * dt && t <= iv.hi + LEVEL_TOL * dt {
                        1.0
                    } else {
                        0.0
                    }
                }
                None => 1.0,
            })
            .collect();
        if let Some(iv) = domain.t {
            if !(iv.lo < iv.hi) || keep.iter().all(|&k| k == 0.0) {
                return Err(Error::domain("time range selects no level"));
            }
        }
        keep
    } else {
        vec![1.0]
    };
    let nx = grid.nx();
    let na = a.len();
    let mut out = field.clone();
    for (n, &kt) in t.iter().enumerate() {
        for (j, &ka) in a.iter().enumerate() {
            let base = (n * na + j) * nx;
            for (i, &kx) in x.iter().enumerate() {
                if kt == 0.0 || ka == 0.0 || kx == 0.0 {
                    out.values[base + i] = 0.0;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::aligned(1.0, 1.0, 8, 400, 0.3).unwrap()
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = grid();
        let f = Field::zeros(&g, Rank::Trajectory);
        assert_eq!(weighted_norm(&f, Weight::Constant(1.0), &SubBox::full()).unwrap(), 0.0);
    }

    #[test]
    fn unit_integrand_over_unit_interval() {
        let g = grid();
        let f = Field::profile_from_fn(&g, |_| 1.0);
        let v = weighted_norm(&f, Weight::Constant(1.0), &SubBox::full().with_x(0.0, 1.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_squared_is_second_order() {
        let mut errs = vec![];
        for nx in [100, 200, 400] {
            let g = Grid::aligned(1.0, 1.0, 8, nx, 0.3).unwrap();
            let f = Field::profile_from_fn(&g, |x| x);
            let v = weighted_norm(&f, Weight::Constant(1.0), &SubBox::full()).unwrap();
            errs.push((v - 1.0 / 3.0).abs());
        }
        assert!(errs[0] < 1e-4);
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn trapezoid_in_time() {
        let g = Grid::aligned(1.0, 1.0, 8, 9, 0.3).unwrap();
        // integrand t^0 * 1 over the full box has measure T * A * 1 = 1
        let f = Field::trajectory_from_fn(&g, |_, _, _| 1.0);
        let v = weighted_norm(&f, Weight::Constant(1.0), &SubBox::full()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let half = weighted_norm(&f, Weight::Constant(1.0), &SubBox::full().with_t(0.0, 0.5)).unwrap();
        assert!((half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_domain_is_an_error() {
        let g = grid();
        let f = Field::profile_from_fn(&g, |x| x);
        assert!(matches!(
            weighted_norm(&f, Weight::Constant(1.0), &SubBox::full().with_x(0.5, 0.5)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(restrict(&f, &SubBox::full().with_x(0.4, 0.4)), Err(Error::Domain(_))));
        // inside the unit interval but between two centers
        let g = Grid::aligned(1.0, 1.0, 8, 9, 0.3).unwrap();
        let f = Field::profile_from_fn(&g, |x| x);
        assert!(restrict(&f, &SubBox::full().with_x(0.0, 0.01)).is_err());
    }

    #[test]
    fn restrict_full_is_identity() {
        let g = Grid::aligned(1.0, 1.0, 8, 9, 0.3).unwrap();
        let f = Field::trajectory_from_fn(&g, |t, a, x| t + a * x);
        assert_eq!(restrict(&f, &SubBox::full()).unwrap(), f);
    }

    #[test]
    fn shape_errors() {
        let g = grid();
        let g2 = Grid::aligned(1.0, 1.0, 8, 41, 0.3).unwrap();
        let f = Field::profile_from_fn(&g, |x| x);
        let w = Field::profile_from_fn(&g2, |x| x);
        assert!(matches!(
            weighted_norm(&f, Weight::Field(&w), &SubBox::full()),
            Err(Error::Shape(_))
        ));
        assert!(Field::from_values(&g, Rank::Profile, vec![0.0; 3]).is_err());
        assert!(Field::from_values(&g, Rank::Profile, vec![f64::NAN; g.nx()]).is_err());
    }
}
