use crate::error::{Error, Result};
use crate::field::Interval;
use crate::grid::Grid;

/// Spatial control set `ω ⊂ (0,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlRegion {
    /// One interval `(lo, hi)` containing the degeneracy point.
    Single(Interval),
    /// Two intervals, one strictly on each side of the degeneracy point.
    Pair(Interval, Interval),
}

fn check_open(iv: &Interval) -> Result<()> {
    if !(0.0 < iv.lo && iv.lo < iv.hi && iv.hi < 1.0) {
        return Err(Error::param(format!(
            "control interval ({}, {}) must satisfy 0 < lo < hi < 1",
            iv.lo, iv.hi
        )));
    }
    Ok(())
}

impl ControlRegion {
    pub fn single(lo: f64, hi: f64, x0: f64) -> Result<Self> {
        let iv = Interval::new(lo, hi);
        check_open(&iv)?;
        if !(lo < x0 && x0 < hi) {
            return Err(Error::param(format!("single region ({lo}, {hi}) must contain x0 = {x0}")));
        }
        Ok(ControlRegion::Single(iv))
    }

    pub fn pair(left: (f64, f64), right: (f64, f64), x0: f64) -> Result<Self> {
        let l = Interval::new(left.0, left.1);
        let r = Interval::new(right.0, right.1);
        check_open(&l)?;
        check_open(&r)?;
        if !(l.hi < x0 && x0 < r.lo) {
            return Err(Error::param(format!(
                "pair region needs ρ1 < x0 < λ2, got ρ1 = {}, x0 = {x0}, λ2 = {}",
                l.hi, r.lo
            )));
        }
        Ok(ControlRegion::Pair(l, r))
    }

    /// Single region without the `x0 ∈ ω` requirement; used for auxiliary
    /// sets such as the Caccioppoli neighbourhoods.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let iv = Interval::new(lo, hi);
        check_open(&iv)?;
        Ok(ControlRegion::Single(iv))
    }

    pub fn intervals(&self) -> Vec<Interval> {
        match *self {
            ControlRegion::Single(iv) => vec![iv],
            ControlRegion::Pair(l, r) => vec![l, r],
        }
    }

    /// Open-set membership.
    pub fn contains(&self, x: f64) -> bool {
        self.intervals().iter().any(|iv| iv.lo < x && x < iv.hi)
    }

    /// Indicator of the region on the x-cell centers.
    pub fn mask(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.nx()).map(|i| if self.contains(grid.x(i)) { 1.0 } else { 0.0 }).collect()
    }

    /// Subintervals `ω1 = (λ1, ρ1)` left of `x0` and `ω2 = (λ2, ρ2)` right of it.
    /// For a single interval around `x0` these are the middle thirds of each side.
    pub fn side_intervals(&self, x0: f64) -> (Interval, Interval) {
        match *self {
            ControlRegion::Pair(l, r) => (l, r),
            ControlRegion::Single(iv) => {
                let left = Interval::new(iv.lo + (x0 - iv.lo) / 3.0, iv.lo + 2.0 * (x0 - iv.lo) / 3.0);
                let right = Interval::new(x0 + (iv.hi - x0) / 3.0, x0 + 2.0 * (iv.hi - x0) / 3.0);
                (left, right)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ControlRegion::Single(iv) => format!("single({},{})", iv.lo, iv.hi),
            ControlRegion::Pair(l, r) => format!("pair({},{})+({},{})", l.lo, l.hi, r.lo, r.hi),
        }
    }
}
