//! Explicit monotone time stepping for `u_t − I u = f` with nonlocal Dirichlet data.

use crate::field::Field;
use crate::grid::{Domain, Grid, SpatialSlice};
use crate::kernel_ops::{DiscreteOperator, KernelClassParams, OperatorError, OperatorSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("time step {dt} exceeds the CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("grid box radius {radius} must exceed the domain extent {extent} by one cell")]
    BoxTooSmall { radius: f64, extent: f64 },
    #[error("time interval must end at 0 with t_start < 0, got {0}")]
    BadInterval(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub operator: OperatorSpec,
    pub params: KernelClassParams,
    pub grid: Grid,
    pub domain: Domain,
    pub t_start: f64,
    /// Number of time steps; chosen from the CFL bound when absent.
    #[serde(default)]
    pub steps: Option<usize>,
    /// Radius of the lattice stencil; defaults to twice the box radius.
    #[serde(default)]
    pub reach: Option<f64>,
    pub exterior: Field,
    pub initial: Field,
    pub rhs: Field,
}

impl Problem {
    pub fn reach(&self) -> f64 {
        self.reach.unwrap_or(2.0 * self.grid.radius())
    }

    pub fn horizon(&self) -> f64 {
        -self.t_start
    }
}

/// Interior mask: nodes where the equation is imposed.
pub fn interior_mask(grid: &Grid, domain: &Domain) -> Vec<bool> {
    (0..grid.len())
        .map(|i| domain.contains(&grid.point(i), grid.n))
        .collect()
}

/// A problem compiled against its discrete operator.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub problem: Problem,
    pub op: DiscreteOperator,
    pub interior: Vec<bool>,
    pub dt: f64,
    pub steps: usize,
    exterior: Arc<Field>,
}

pub fn cfl_bound(problem: &Problem) -> Result<f64, SolverError> {
    let op = DiscreteOperator::new(&problem.operator, &problem.params, &problem.grid, problem.reach())?;
    Ok(1.0 / op.rate_bound())
}

impl Scheme {
    pub fn new(problem: Problem) -> Result<Self, SolverError> {
        let op = DiscreteOperator::new(&problem.operator, &problem.params, &problem.grid, problem.reach())?;
        Self::with_operator(problem, op)
    }

    pub fn with_operator(problem: Problem, op: DiscreteOperator) -> Result<Self, SolverError> {
        if !(problem.t_start < 0.0) {
            return Err(SolverError::BadInterval(problem.t_start));
        }
        let extent = problem.domain.extent();
        if problem.grid.radius() < extent + problem.grid.h - 1e-12 {
            return Err(SolverError::BoxTooSmall {
                radius: problem.grid.radius(),
                extent,
            });
        }
        let bound = 1.0 / op.rate_bound();
        let horizon = problem.horizon();
        let steps = match problem.steps {
            Some(s) => s.max(1),
            None => (horizon / (0.9 * bound)).ceil() as usize,
        };
        let dt = horizon / steps as f64;
        if dt > bound * (1.0 + 1e-12) {
            return Err(SolverError::Cfl { dt, bound });
        }
        let interior = interior_mask(&problem.grid, &problem.domain);
        let exterior = Arc::new(problem.exterior.clone());
        Ok(Scheme {
            problem,
            op,
            interior,
            dt,
            steps,
            exterior,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            0.0
        } else {
            self.problem.t_start + k as f64 * self.dt
        }
    }

    pub fn initial_slice(&self) -> SpatialSlice {
        let g = self.problem.grid;
        let t = self.problem.t_start;
        let values = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                if self.interior[i] {
                    self.problem.initial.eval(&x[..g.n], t)
                } else {
                    self.problem.exterior.eval(&x[..g.n], t)
                }
            })
            .collect();
        SpatialSlice::new(g, values, self.exterior.clone(), t)
    }

    /// Discrete operator at every interior node (zero elsewhere).
    pub fn operator_values(&self, slice: &SpatialSlice) -> Vec<f64> {
        let ext = slice.extend(self.op.stencil.reach);
        let g = slice.grid;
        (0..g.len())
            .into_par_iter()
            .map(|i| {
                if self.interior[i] {
                    self.op.eval_at(slice, &ext, g.lattice(i)).value
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// One explicit Euler step from `slice` (at time `t_k`) to `t_next`.
    pub fn step_to(&self, slice: &SpatialSlice, t_next: f64) -> Result<SpatialSlice, SolverError> {
        let dt = t_next - slice.t;
        let bound = 1.0 / self.op.rate_bound();
        if dt > bound * (1.0 + 1e-12) {
            return Err(SolverError::Cfl { dt, bound });
        }
        let g = slice.grid;
        let lu = self.operator_values(slice);
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let x = g.point(i);
                if self.interior[i] {
                    let f = self.problem.rhs.eval(&x[..g.n], slice.t);
                    slice.values[i] + dt * (lu[i] + f)
                } else {
                    self.problem.exterior.eval(&x[..g.n], t_next)
                }
            })
            .collect();
        Ok(SpatialSlice::new(g, values, self.exterior.clone(), t_next))
    }

    pub fn step(&self, slice: &SpatialSlice) -> Result<SpatialSlice, SolverError> {
        self.step_to(slice, slice.t + self.dt)
    }

    pub fn solve(&self) -> Result<Trajectory, SolverError> {
        let mut cur = self.initial_slice();
        let mut slices = Vec::with_capacity(self.steps + 1);
        let mut times = Vec::with_capacity(self.steps + 1);
        times.push(cur.t);
        slices.push(cur.values.clone());
        for k in 1..=self.steps {
            cur = self.step_to(&cur, self.time(k))?;
            times.push(cur.t);
            slices.push(cur.values.clone());
        }
        Ok(Trajectory {
            grid: self.problem.grid,
            dt: self.dt,
            times,
            slices,
            exterior: self.exterior.clone(),
            interior: self.interior.clone(),
        })
    }

    /// `(u^k − u^{k−1})/Δt − I_h u^{k−1} − f(t_{k−1})` for k ≥ 1: the scheme's own residual.
    pub fn residual(&self, traj: &Trajectory) -> Residual {
        self.residual_with(traj, ResidualKind::Explicit)
    }

    pub fn residual_with(&self, traj: &Trajectory, kind: ResidualKind) -> Residual {
        let g = traj.grid;
        let levels = (1..traj.len())
            .map(|k| {
                let (at, t_op) = match kind {
                    ResidualKind::Explicit => (k - 1, traj.times[k - 1]),
                    ResidualKind::Backward => (k, traj.times[k]),
                };
                let s = traj.slice(at);
                let lu = self.operator_values(&s);
                let dt = traj.times[k] - traj.times[k - 1];
                let vals = (0..g.len())
                    .map(|i| {
                        if !self.interior[i] {
                            return 0.0;
                        }
                        let x = g.point(i);
                        let ut = (traj.slices[k][i] - traj.slices[k - 1][i]) / dt;
                        ut - lu[i] - self.problem.rhs.eval(&x[..g.n], t_op)
                    })
                    .collect();
                (traj.times[k], vals)
            })
            .collect();
        Residual {
            levels,
            interior: self.interior.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualKind {
    /// Operator at the previous level, matching the update rule.
    Explicit,
    /// Backward time difference with the operator at the current level.
    Backward,
}

pub fn step(slice: &SpatialSlice, scheme: &Scheme) -> Result<SpatialSlice, SolverError> {
    scheme.step(slice)
}

pub fn solve(problem: &Problem) -> Result<Trajectory, SolverError> {
    Scheme::new(problem.clone())?.solve()
}

#[derive(Clone, Debug)]
pub struct Residual {
    /// `(t_k, values)` for k ≥ 1.
    pub levels: Vec<(f64, Vec<f64>)>,
    pub interior: Vec<bool>,
}

impl Residual {
    pub fn interior_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().flat_map(move |(_, v)| {
            v.iter()
                .zip(&self.interior)
                .filter(|(_, m)| **m)
                .map(|(x, _)| *x)
        })
    }

    pub fn min(&self) -> f64 {
        self.interior_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.interior_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.interior_values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    pub dt: f64,
    pub times: Vec<f64>,
    pub slices: Vec<Vec<f64>>,
    pub exterior: Arc<Field>,
    pub interior: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice(&self, k: usize) -> SpatialSlice {
        SpatialSlice::new(self.grid, self.slices[k].clone(), self.exterior.clone(), self.times[k])
    }

    pub fn from_slices(grid: Grid, times: Vec<f64>, slices: Vec<Vec<f64>>, exterior: Arc<Field>, interior: Vec<bool>) -> Self {
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Trajectory {
            grid,
            dt,
            times,
            slices,
            exterior,
            interior,
        }
    }

    /// Sample an analytic space-time function on a uniform time grid.
    pub fn sample(grid: Grid, domain: &Domain, field: &Field, t_start: f64, steps: usize) -> Self {
        let dt = -t_start / steps as f64;
        let times: Vec<f64> = (0..=steps)
            .map(|k| if k == steps { 0.0 } else { t_start + k as f64 * dt })
            .collect();
        let slices = times
            .iter()
            .map(|&t| SpatialSlice::sample(grid, field, t).values)
            .collect();
        Trajectory {
            grid,
            dt,
            times,
            slices,
            exterior: Arc::new(field.clone()),
            interior: interior_mask(&grid, domain),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Trajectory {
            slices: self
                .slices
                .iter()
                .map(|s| s.iter().map(|v| v * factor).collect())
                .collect(),
            exterior: Arc::new((*self.exterior).clone().scaled(factor)),
            ..self.clone()
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.slices
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// One row per `(t, x, [y], u)`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.grid.n;
        if n == 1 {
            writeln!(w, "t,x,u")?;
        } else {
            writeln!(w, "t,x,y,u")?;
        }
        for (t, s) in self.times.iter().zip(&self.slices) {
            for (i, v) in s.iter().enumerate() {
                let x = self.grid.point(i);
                if n == 1 {
                    writeln!(w, "{},{},{}", fmt17(*t), fmt17(x[0]), fmt17(*v))?;
                } else {
                    writeln!(w, "{},{},{},{}", fmt17(*t), fmt17(x[0]), fmt17(x[1]), fmt17(*v))?;
                }
            }
        }
        Ok(())
    }

    /// Little-endian dump: magic `NLTR`, u32 version, u32 n, i64 m, f64 h,
    /// f64 dt, f64 t_start, u64 slice count, then all values row-major per slice.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"NLTR")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.m.to_le_bytes())?;
        w.write_all(&self.grid.h.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.times.first().copied().unwrap_or(0.0).to_le_bytes())?;
        w.write_all(&(self.slices.len() as u64).to_le_bytes())?;
        for s in &self.slices {
            for v in s {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_ops::Kernel;

    fn heat_problem(sigma: f64, m: i64) -> Problem {
        let h = 2.0 / m as f64;
        Problem {
            operator: OperatorSpec::Single {
                kernel: Kernel::power(1, sigma, 1.0),
            },
            params: KernelClassParams::new(1, sigma, 0.5, 1.0, 0.5),
            grid: Grid::new(1, m, h),
            domain: Domain::Ball { radius: 1.0 },
            t_start: -0.25,
            steps: None,
            reach: None,
            exterior: Field::Zero,
            initial: Field::Zero,
            rhs: Field::Zero,
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let tr = solve(&heat_problem(1.5, 16)).unwrap();
        assert!(tr.sup_abs() == 0.0);
        assert_eq!(*tr.times.last().unwrap(), 0.0);
    }

    #[test]
    fn constants_are_stationary() {
        let mut p = heat_problem(1.2, 16);
        p.exterior = Field::constant(2.5);
        p.initial = Field::constant(2.5);
        let tr = solve(&p).unwrap();
        for s in &tr.slices {
            for v in s {
                assert!((v - 2.5).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cfl_shrinks_with_resolution() {
        let a = cfl_bound(&heat_problem(1.5, 32)).unwrap();
        let b = cfl_bound(&heat_problem(1.5, 64)).unwrap();
        let ratio = b / a;
        assert!((ratio - 2f64.powf(-1.5)).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn oversized_step_is_rejected() {
        let mut p = heat_problem(1.5, 16);
        p.steps = Some(1);
        assert!(matches!(Scheme::new(p), Err(SolverError::Cfl { .. })));
    }

    #[test]
    fn scheme_residual_vanishes() {
        let mut p = heat_problem(1.5, 16);
        p.initial = Field::Gaussian {
            amplitude: 1.0,
            width: 0.4,
            center: vec![0.1],
        };
        p.rhs = Field::constant(0.3);
        let s = Scheme::new(p).unwrap();
        let tr = s.solve().unwrap();
        assert!(s.residual(&tr).sup_abs() < 1e-9);
    }

    #[test]
    fn binary_header_layout() {
        let tr = solve(&heat_problem(1.5, 8)).unwrap();
        let mut buf = Vec::new();
        tr.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"NLTR");
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 + 8 + 8 + 8 + 8 * tr.len() * tr.grid.len());
    }
}
