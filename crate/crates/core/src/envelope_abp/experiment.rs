//! Normalized supersolutions of `u_t − M⁻u ≥ −f(t) χ_{B_1/2}` and the full
//! chain of envelope diagnostics run on them.

use super::{
    abp_inequality_check, build_envelope, cone_inclusion_check, cone_lattice, contact_covering, delta_h_check,
    normalize, AbpOptions, AbpReport, ConeReport, CoveringOptions, CoveringRectangles, DeltaHReport, Envelope,
    EnvelopeError,
};
use crate::field::Field;
use crate::grid::{Domain, Grid};
use crate::kernel_ops::{KernelClassParams, OperatorSpec};
use crate::solver::{Problem, ResidualKind, Scheme, SolverError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbpRunError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("supersolution residual check failed: min {0}")]
    NotSupersolution(f64),
}

/// One member of the randomized family: `f(t)` and the spatial profile `a(x) ∈ [0, 1]`.
#[derive(Clone, Debug)]
pub struct AbpMember {
    pub seed: u64,
    pub forcing: Field,
    pub profile: Field,
}

impl AbpMember {
    pub fn random(seed: u64, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let radius = rng.gen_range(0.25..0.6);
        let amplitude = rng.gen_range(0.5..1.0);
        AbpMember {
            seed,
            forcing: Field::random_time_profile(seed.wrapping_mul(31).wrapping_add(7), 0.5, 2.0),
            profile: Field::Bump {
                amplitude,
                radius,
                center,
            }
            .truncated(0.5),
        }
    }

    /// `u_t − M⁻u = −f(t) a(x)` on `B_1 x (-1, 0]`, zero data elsewhere.
    pub fn problem(&self, params: &KernelClassParams, grid: Grid) -> Problem {
        Problem {
            operator: OperatorSpec::ExtremalMinus,
            params: *params,
            grid,
            domain: Domain::Ball { radius: 1.0 },
            t_start: -1.0,
            steps: None,
            reach: None,
            exterior: Field::Zero,
            initial: Field::Zero,
            rhs: self.forcing.clone().times(self.profile.clone()).scaled(-1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AbpRunOptions {
    pub c_threshold: f64,
    /// `C` in the `−2‖f‖Δt − C h_grid` Lipschitz bound.
    pub c_grid: f64,
    pub cone_h: usize,
    pub cone_p: usize,
    /// Time width `Δt` of the covering; `None` skips the covering.
    pub covering_dt: Option<f64>,
}

impl Default for AbpRunOptions {
    fn default() -> Self {
        AbpRunOptions {
            c_threshold: 1.0,
            c_grid: 1.0,
            cone_h: 20,
            cone_p: 10,
            covering_dt: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AbpRunReport {
    pub seed: u64,
    pub sigma: f64,
    /// Factor applied to normalize `sup u^- = 1`.
    pub scale: f64,
    /// `min (u_t − M⁻u + f χ_{B_1/2})` over interior nodes after normalization.
    pub supersolution_margin: f64,
    pub contact_points: usize,
    pub delta_h: DeltaHReport,
    pub cone: ConeReport,
    pub abp: AbpReport,
    pub covering: Option<CoveringRectangles>,
}

pub struct AbpRun {
    pub envelope: Envelope,
    /// The normalized forcing `f(t)`.
    pub forcing: Field,
    pub report: AbpRunReport,
}

pub fn run_member(member: &AbpMember, params: &KernelClassParams, grid: Grid, opts: &AbpRunOptions) -> Result<AbpRun, AbpRunError> {
    let problem = member.problem(params, grid);
    let scheme = Scheme::new(problem.clone())?;
    let traj = scheme.solve()?;
    let (norm_traj, scale) = normalize(&traj)?;
    let forcing = member.forcing.clone().scaled(scale);
    // the inequality with the profile replaced by the full indicator of B_1/2
    let check = Problem {
        rhs: forcing.clone().times(Field::constant(1.0).truncated(0.5)).scaled(-1.0),
        ..problem
    };
    let check = Scheme::with_operator(check, scheme.op.clone())?;
    let margin = check.residual_with(&norm_traj, ResidualKind::Explicit).min();
    if margin < -1e-9 {
        return Err(AbpRunError::NotSupersolution(margin));
    }
    let env = build_envelope(&norm_traj)?;
    let delta_h = delta_h_check(&env, &forcing, opts.c_grid);
    let cone = cone_inclusion_check(&env, &cone_lattice(grid.n, opts.cone_h, opts.cone_p));
    let abp = abp_inequality_check(
        &env,
        &forcing,
        &AbpOptions {
            sigma: params.sigma,
            rho0: params.rho0,
            c_threshold: opts.c_threshold,
        },
    );
    let covering = match opts.covering_dt {
        Some(dt) => Some(contact_covering(
            &env,
            &forcing,
            &CoveringOptions::new(grid.n, params.sigma, params.rho0, dt),
        )?),
        None => None,
    };
    let report = AbpRunReport {
        seed: member.seed,
        sigma: params.sigma,
        scale,
        supersolution_margin: margin,
        contact_points: env.contact_set().len(),
        delta_h,
        cone,
        abp,
        covering,
    };
    Ok(AbpRun {
        envelope: env,
        forcing,
        report,
    })
}
