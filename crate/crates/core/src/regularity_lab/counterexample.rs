//! Fractional heat flow on `B_1` switched on at `t = −1/2` by exterior data
//! `(c(t+1/2) + χ_{B_3∖B_2}) χ_{[−1/2,0]}`: the solution is identically zero
//! before the switch and has a positive time derivative right after it.

use super::RegularityError;
use crate::field::Field;
use crate::grid::{Domain, Grid, SpatialSlice};
use crate::kernel_ops::{Kernel, KernelClassParams, OperatorSpec};
use crate::solver::{Problem, ResidualKind, Scheme, Trajectory};
use serde::Serialize;

pub const SWITCH_TIME: f64 = -0.5;

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Largest `c` with the exterior a discrete subsolution on `B_1`.
    pub c_max: f64,
    pub c: f64,
    /// `max (ū_t − L ū)` over interior nodes for the chosen `c`.
    pub subsolution_residual: f64,
    /// `sup |u|` over levels `t ≤ −1/2`.
    pub pre_switch_sup: f64,
    /// Largest data value, the `1` of the annulus plus the ramp at `t = 0`.
    pub data_scale: f64,
    /// `(u(0, −1/2 + Δ) − u(0, −1/2)) / Δ`.
    pub forward_difference: f64,
    pub window: f64,
}

fn exterior(c: f64) -> Field {
    Field::RampPlusAnnulus {
        c,
        t_on: SWITCH_TIME,
        r_in: 2.0,
        r_out: 3.0,
    }
}

fn heat_problem(params: &KernelClassParams, grid: Grid, c: f64, steps: usize) -> Problem {
    Problem {
        operator: OperatorSpec::Single {
            kernel: Kernel::power(params.n, params.sigma, 1.0),
        },
        params: *params,
        grid,
        domain: Domain::Ball { radius: 1.0 },
        t_start: -1.0,
        steps: Some(steps),
        // the stencil must see the annulus from anywhere in B_1
        reach: Some(4.5),
        exterior: exterior(c),
        initial: Field::Zero,
        rhs: Field::Zero,
    }
}

/// Power-of-two step count above the CFL minimum, so `−1/2` and `−1/2 + Δ` are levels.
fn dyadic_steps(params: &KernelClassParams, grid: Grid) -> Result<usize, RegularityError> {
    let probe = heat_problem(params, grid, 0.0, 1);
    let bound = crate::solver::cfl_bound(&probe)?;
    let mut steps = 2usize;
    while 1.0 / (steps as f64) > 0.9 * bound {
        steps *= 2;
    }
    Ok(steps)
}

/// `max (ū_t − L ū)` on interior nodes with `ū` sampled exactly on the time grid.
pub fn exterior_subsolution_residual(params: &KernelClassParams, grid: Grid, c: f64, steps: usize) -> Result<f64, RegularityError> {
    let problem = heat_problem(params, grid, c, steps);
    let scheme = Scheme::new(problem)?;
    let traj = Trajectory::sample(grid, &Domain::Ball { radius: 1.0 }, &exterior(c), -1.0, steps);
    Ok(scheme.residual_with(&traj, ResidualKind::Explicit).max())
}

/// `min_{B_1} L_h χ_{B_3∖B_2}`: the ramp is harmless exactly up to this slope.
pub fn largest_subsolution_slope(params: &KernelClassParams, grid: Grid) -> Result<f64, RegularityError> {
    let scheme = Scheme::new(heat_problem(params, grid, 0.0, dyadic_steps(params, grid)?))?;
    let ext = exterior(0.0);
    let s = SpatialSlice::sample(grid, &ext, SWITCH_TIME);
    let lu = scheme.operator_values(&s);
    Ok(lu
        .iter()
        .zip(&scheme.interior)
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min))
}

pub fn counterexample_demo(
    params: &KernelClassParams,
    grid: Grid,
    c_fraction: f64,
    window: f64,
) -> Result<CounterexampleReport, RegularityError> {
    let steps = dyadic_steps(params, grid)?;
    let dt = 1.0 / steps as f64;
    let c_max = largest_subsolution_slope(params, grid)?;
    let c = c_fraction * c_max;
    let subsolution_residual = exterior_subsolution_residual(params, grid, c, steps)?;
    let traj = Scheme::new(heat_problem(params, grid, c, steps))?.solve()?;
    let mut pre: f64 = 0.0;
    for (k, &t) in traj.times.iter().enumerate() {
        if t <= SWITCH_TIME + 1e-12 {
            pre = pre.max(traj.slices[k].iter().fold(0.0, |m, v| m.max(v.abs())));
        }
    }
    let level = |t: f64| {
        traj.times
            .iter()
            .position(|s| (s - t).abs() < 1e-12)
            .ok_or_else(|| RegularityError::Cutoff(format!("time {t} is not a grid level")))
    };
    let (k0, k1) = (level(SWITCH_TIME)?, level(SWITCH_TIME + window)?);
    let origin = grid.index([0, 0]).expect("origin is a node");
    let forward_difference = (traj.slices[k1][origin] - traj.slices[k0][origin]) / window;
    Ok(CounterexampleReport {
        h: grid.h,
        dt,
        steps,
        c_max,
        c,
        subsolution_residual,
        pre_switch_sup: pre,
        data_scale: 1.0 + c * (-SWITCH_TIME),
        forward_difference,
        window,
    })
}
