//! Uniform centered lattices, equation domains and spatial slices.

use crate::field::Field;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub type Point = [f64; 2];
pub type Lattice = [i64; 2];

/// Nodes `i·h` for `i ∈ [-m, m]^n`, stored row-major (last axis fastest).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub m: i64,
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize, m: i64, h: f64) -> Self {
        assert!(n == 1 || n == 2, "only n = 1, 2 are supported");
        assert!(m >= 1 && h > 0.0);
        Grid { n, m, h }
    }

    /// Grid covering `[-half_width, half_width]^n` with spacing `h` (rounded so nodes hit the wall).
    pub fn covering(n: usize, half_width: f64, h: f64) -> Self {
        let m = (half_width / h).round().max(1.0) as i64;
        Grid::new(n, m, h)
    }

    pub fn side(&self) -> usize {
        (2 * self.m + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Half-width of the box in space units.
    pub fn radius(&self) -> f64 {
        self.m as f64 * self.h
    }

    pub fn lattice(&self, idx: usize) -> Lattice {
        let s = self.side();
        if self.n == 1 {
            [idx as i64 - self.m, 0]
        } else {
            [(idx / s) as i64 - self.m, (idx % s) as i64 - self.m]
        }
    }

    pub fn index(&self, l: Lattice) -> Option<usize> {
        let s = self.side() as i64;
        let a = l[0] + self.m;
        if a < 0 || a >= s {
            return None;
        }
        if self.n == 1 {
            return Some(a as usize);
        }
        let b = l[1] + self.m;
        if b < 0 || b >= s {
            return None;
        }
        Some((a * s + b) as usize)
    }

    pub fn coord(&self, l: Lattice) -> Point {
        [l[0] as f64 * self.h, l[1] as f64 * self.h]
    }

    pub fn point(&self, idx: usize) -> Point {
        self.coord(self.lattice(idx))
    }

    /// Nearest lattice index to a spatial point (may lie outside the box).
    pub fn nearest(&self, x: &[f64]) -> Lattice {
        let a = (x[0] / self.h).round() as i64;
        let b = if self.n > 1 { (x[1] / self.h).round() as i64 } else { 0 };
        [a, b]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, Point)> + '_ {
        (0..self.len()).map(move |i| (i, self.point(i)))
    }
}

pub fn norm(x: &Point, n: usize) -> f64 {
    if n == 1 {
        x[0].abs()
    } else {
        x[0].hypot(x[1])
    }
}

pub fn lattice_norm(l: &Lattice) -> f64 {
    ((l[0] * l[0] + l[1] * l[1]) as f64).sqrt()
}

/// The set where the equation holds; everything else is exterior data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Ball { radius: f64 },
    Cube { half_width: f64 },
}

impl Domain {
    pub fn contains(&self, x: &Point, n: usize) -> bool {
        const EPS: f64 = 1e-12;
        match self {
            Domain::Ball { radius } => norm(x, n) < radius - EPS,
            Domain::Cube { half_width } => x[..n].iter().all(|v| v.abs() < half_width - EPS),
        }
    }

    pub fn extent(&self) -> f64 {
        match self {
            Domain::Ball { radius } => *radius,
            Domain::Cube { half_width } => *half_width,
        }
    }
}

/// Values of `u(·, t)` on a grid box, with analytic data beyond it.
#[derive(Clone, Debug)]
pub struct SpatialSlice {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub exterior: Arc<Field>,
    pub t: f64,
}

impl SpatialSlice {
    pub fn new(grid: Grid, values: Vec<f64>, exterior: Arc<Field>, t: f64) -> Self {
        assert_eq!(values.len(), grid.len());
        SpatialSlice {
            grid,
            values,
            exterior,
            t,
        }
    }

    /// Sample a field on the box and use the same field outside it.
    pub fn sample(grid: Grid, field: &Field, t: f64) -> Self {
        let f = Arc::new(field.clone());
        Self::sample_with_exterior(grid, field, f, t)
    }

    pub fn sample_with_exterior(grid: Grid, field: &Field, exterior: Arc<Field>, t: f64) -> Self {
        let n = grid.n;
        let values = (0..grid.len())
            .map(|i| field.eval(&grid.point(i)[..n], t))
            .collect();
        SpatialSlice {
            grid,
            values,
            exterior,
            t,
        }
    }

    pub fn at(&self, l: Lattice) -> f64 {
        match self.grid.index(l) {
            Some(i) => self.values[i],
            None => self
                .exterior
                .eval(&self.grid.coord(l)[..self.grid.n], self.t),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64, exterior: Arc<Field>) -> Self {
        SpatialSlice {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            exterior,
            t: self.t,
        }
    }

    pub fn negated(&self) -> Self {
        let ext = Arc::new((*self.exterior).clone().scaled(-1.0));
        self.map(|v| -v, ext)
    }

    pub fn added(&self, other: &SpatialSlice) -> Self {
        assert_eq!(self.grid, other.grid);
        let ext = Arc::new((*self.exterior).clone().plus((*other.exterior).clone()));
        SpatialSlice {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
            exterior: ext,
            t: self.t,
        }
    }

    pub fn extend(&self, reach: i64) -> ExtendedSlice {
        ExtendedSlice::new(self, reach)
    }
}

/// Dense copy of a slice on the box enlarged by `reach` lattice steps.
/// Avoids calling the exterior field inside operator loops.
#[derive(Clone, Debug)]
pub struct ExtendedSlice {
    pub n: usize,
    pub half: i64,
    pub values: Vec<f64>,
}

impl ExtendedSlice {
    pub fn new(slice: &SpatialSlice, reach: i64) -> Self {
        let n = slice.grid.n;
        let half = slice.grid.m + reach;
        let side = (2 * half + 1) as usize;
        let mut values = Vec::with_capacity(side.pow(n as u32));
        if n == 1 {
            for a in -half..=half {
                values.push(slice.at([a, 0]));
            }
        } else {
            for a in -half..=half {
                for b in -half..=half {
                    values.push(slice.at([a, b]));
                }
            }
        }
        ExtendedSlice { n, half, values }
    }

    #[inline]
    pub fn get(&self, l: Lattice) -> f64 {
        let s = 2 * self.half + 1;
        let a = l[0] + self.half;
        if self.n == 1 {
            self.values[a as usize]
        } else {
            self.values[(a * s + l[1] + self.half) as usize]
        }
    }

    #[inline]
    pub fn flat(&self, l: Lattice) -> usize {
        let a = l[0] + self.half;
        if self.n == 1 {
            a as usize
        } else {
            (a * (2 * self.half + 1) + l[1] + self.half) as usize
        }
    }

    /// Flat index shift of the lattice offset `y`.
    #[inline]
    pub fn shift(&self, y: Lattice) -> isize {
        if self.n == 1 {
            y[0] as isize
        } else {
            (y[0] * (2 * self.half + 1) + y[1]) as isize
        }
    }

    /// `δ(u, x; y) = ½(u(x+y) + u(x−y)) − u(x)` with lattice arguments.
    #[inline]
    pub fn delta(&self, x: Lattice, y: Lattice) -> f64 {
        0.5 * (self.get([x[0] + y[0], x[1] + y[1]]) + self.get([x[0] - y[0], x[1] - y[1]]))
            - self.get(x)
    }
}
