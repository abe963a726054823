//! Tensor-product discretization of `(0,T) x (0,A) x (0,1)`.
//!
//! Time is stored at the `nt + 1` levels `t_n = n dt`. Age and space are
//! cell-centered: `a_j = (j + 1/2) da`, `x_i = (i + 1/2) dx`. The time and age
//! steps coincide so that one time step moves every age cell exactly one cell
//! along its characteristic `t - a = const`.

use crate::error::{Error, Result};

/// Minimum number of cells along each axis.
pub const MIN_CELLS: usize = 4;

const ALIGN_TOL: f64 = 1e-9;
const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_final: f64,
    a_max: f64,
    nt: usize,
    na: usize,
    nx: usize,
    x0: f64,
}

impl Grid {
    /// Strict constructor: every invariant must already hold.
    pub fn new(t_final: f64, a_max: f64, nt: usize, na: usize, nx: usize, x0: f64) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::param(format!("final time must be positive, got {t_final}")));
        }
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(Error::param(format!("maximal age must be positive, got {a_max}")));
        }
        if nt < MIN_CELLS || na < MIN_CELLS || nx < MIN_CELLS {
            return Err(Error::param(format!(
                "need at least {MIN_CELLS} cells per axis, got nt={nt} na={na} nx={nx}"
            )));
        }
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::param(format!("degeneracy point must lie in (0,1), got {x0}")));
        }
        let dt = t_final / nt as f64;
        let da = a_max / na as f64;
        if (dt - da).abs() > ALIGN_TOL * dt.max(da) {
            return Err(Error::param(format!(
                "time step {dt} and age step {da} must coincide (T/nt = A/na)"
            )));
        }
        let grid = Grid { t_final, a_max, nt, na, nx, x0 };
        if grid.x0_on_edge() {
            return Err(Error::param(format!(
                "degeneracy point {x0} coincides with a cell edge for nx={nx}"
            )));
        }
        Ok(grid)
    }

    /// Builds an aligned grid from the time resolution alone: `na` follows from
    /// `A / (T / nt)`, and `nx` is bumped by one when `x0` would sit on a cell edge.
    pub fn aligned(t_final: f64, a_max: f64, nt: usize, nx: usize, x0: f64) -> Result<Self> {
        if nt == 0 {
            return Err(Error::param("nt must be positive"));
        }
        let ratio = a_max * nt as f64 / t_final;
        let na = ratio.round();
        if !ratio.is_finite() || (ratio - na).abs() > ALIGN_TOL * ratio.max(1.0) {
            return Err(Error::param(format!(
                "A/(T/nt) = {ratio} is not an integer; cannot align age and time steps"
            )));
        }
        let mut nx = nx;
        if nx >= 1 && edge_hit(x0, nx) {
            nx += 1;
        }
        Grid::new(t_final, a_max, nt, na as usize, nx, x0)
    }

    /// Same physical box with every cell count multiplied by `factor`
    /// (with the usual edge snapping for `x0`).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Grid::aligned(self.t_final, self.a_max, self.nt * factor, self.nx * factor, self.x0)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn a_max(&self) -> f64 {
        self.a_max
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn na(&self) -> usize {
        self.na
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn levels(&self) -> usize {
        self.nt + 1
    }
    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }
    pub fn da(&self) -> f64 {
        self.a_max / self.na as f64
    }
    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    /// Time level `n`.
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Age cell center `j`.
    pub fn a(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.da()
    }

    /// Space cell center `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Space cell edge `e` for `e = 0..=nx` (edges 0 and nx are the walls).
    pub fn x_edge(&self, e: usize) -> f64 {
        e as f64 * self.dx()
    }

    pub fn x_centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Index of the cell whose closure contains `x0`.
    pub fn x0_cell(&self) -> usize {
        ((self.x0 / self.dx()) as usize).min(self.nx - 1)
    }

    /// Level index of time `t` when `t` is a grid level (within a tiny tolerance).
    pub fn level_of(&self, t: f64) -> Option<usize> {
        let r = t / self.dt();
        let n = r.round();
        if n >= 0.0 && n <= self.nt as f64 && (r - n).abs() <= 1e-9 {
            Some(n as usize)
        } else {
            None
        }
    }

    /// Age cell index of `a` when `a` is a cell center.
    pub fn age_cell_of(&self, a: f64) -> Option<usize> {
        let r = a / self.da() - 0.5;
        let j = r.round();
        if j >= 0.0 && j < self.na as f64 && (r - j).abs() <= 1e-9 {
            Some(j as usize)
        } else {
            None
        }
    }

    pub fn slice_len(&self) -> usize {
        self.na * self.nx
    }

    pub fn trajectory_len(&self) -> usize {
        self.levels() * self.slice_len()
    }

    fn x0_on_edge(&self) -> bool {
        edge_hit(self.x0, self.nx)
    }

    pub fn summary(&self) -> String {
        format!(
            "T={} A={} nt={} na={} nx={} x0={}",
            self.t_final, self.a_max, self.nt, self.na, self.nx, self.x0
        )
    }
}

fn edge_hit(x0: f64, nx: usize) -> bool {
    let r = x0 * nx as f64;
    (r - r.round()).abs() <= EDGE_TOL
}
