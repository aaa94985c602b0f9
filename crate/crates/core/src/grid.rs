//! Uniform node grids and the cell tiling shared by every quadrature in the crate.
//!
//! Node `i` sits at `(offset + i) * dx` and owns the cell `[x - dx/2, x + dx/2]`.
//! Integrals over an interval `[a, b]` are taken cell by cell, each cell clipped
//! to the interval; the outermost nodes have their cells stretched to reach the
//! endpoints, so the cells of the nodes involved tile `[a, b]` exactly.

/// Uniform grid anchored on integer multiples of `dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid {
    /// Integer index of the first node (`x_0 = offset * dx`).
    pub offset: i64,
    pub dx: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(offset: i64, dx: f64, len: usize) -> Self {
        Self { offset, dx, len }
    }

    pub fn x(&self, i: usize) -> f64 {
        (self.offset + i as i64) as f64 * self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x(0)
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.len.saturating_sub(1))
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.x(i)).collect()
    }

    /// Index of the node nearest to `x`, if it lies on the grid.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let k = (x / self.dx).round() as i64 - self.offset;
        (k >= 0 && (k as usize) < self.len).then_some(k as usize)
    }

    /// Cells of the nodes strictly inside `(a, b)`.
    pub fn tile_open(&self, a: f64, b: f64) -> Tiling {
        let first = ((a / self.dx).floor() as i64 - self.offset).max(0);
        let mut lo = first;
        while (lo as usize) < self.len && self.x(lo as usize) <= a {
            lo += 1;
        }
        let mut hi = ((b / self.dx).ceil() as i64 - self.offset).min(self.len as i64 - 1);
        while hi >= 0 && self.x(hi as usize) >= b {
            hi -= 1;
        }
        Tiling::build(self, a, b, lo, hi)
    }

    /// Cells of the nodes inside the closed interval `[a, b]`.
    pub fn tile_closed(&self, a: f64, b: f64) -> Tiling {
        let mut lo = ((a / self.dx).floor() as i64 - self.offset).max(0);
        while (lo as usize) < self.len && self.x(lo as usize) < a {
            lo += 1;
        }
        let mut hi = ((b / self.dx).ceil() as i64 - self.offset).min(self.len as i64 - 1);
        while hi >= 0 && self.x(hi as usize) > b {
            hi -= 1;
        }
        Tiling::build(self, a, b, lo, hi)
    }
}

/// Nodes `first..=last` with their (clipped, boundary-stretched) cells over `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tiling {
    pub a: f64,
    pub b: f64,
    pub first: usize,
    pub last: usize,
    pub empty: bool,
    dx: f64,
    offset: i64,
}

impl Tiling {
    fn build(grid: &UniformGrid, a: f64, b: f64, lo: i64, hi: i64) -> Self {
        let empty = grid.len == 0 || lo > hi || lo as usize >= grid.len || hi < 0;
        let (first, last) = if empty { (0, 0) } else { (lo as usize, hi as usize) };
        Self {
            a,
            b,
            first,
            last,
            empty,
            dx: grid.dx,
            offset: grid.offset,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        if self.empty {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        self.first..=self.last
    }

    pub fn contains(&self, j: usize) -> bool {
        !self.empty && j >= self.first && j <= self.last
    }

    /// Cell `[lo, hi]` of node `j`; `j` must be in the tiling.
    pub fn cell(&self, j: usize) -> (f64, f64) {
        let x = (self.offset + j as i64) as f64 * self.dx;
        let lo = if j == self.first { self.a } else { x - 0.5 * self.dx };
        let hi = if j == self.last { self.b } else { x + 0.5 * self.dx };
        (lo, hi)
    }

    /// True for the stretched (or clipped) outermost cells.
    pub fn is_boundary(&self, j: usize) -> bool {
        j == self.first || j == self.last
    }

    /// Cell-rule integral of node values over `[a, b]`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.indices()
            .map(|j| {
                let (lo, hi) = self.cell(j);
                values[j] * (hi - lo)
            })
            .sum()
    }

    /// Cell-rule integral of `f(node value)` restricted to `[c, d] ∩ [a, b]`.
    pub fn integrate_within(&self, values: &[f64], c: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.indices()
            .map(|j| {
                let (lo, hi) = self.cell(j);
                let (lo, hi) = (lo.max(c), hi.min(d));
                if hi > lo {
                    f(values[j]) * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }
}
