//! Measured distribution bounds on randomized supersolution families.

use super::{linear_fit, RegularityError};
use crate::field::Field;
use crate::grid::{Domain, Grid};
use crate::kernel_ops::{KernelClassParams, OperatorSpec};
use crate::solver::{Problem, ResidualKind, Scheme, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Share of the space-time nodes of `{pred(x)} × [t_lo, t_hi]` where `u > s`.
/// Each level `t_k` stands for the interval `(t_{k−1}, t_k]`.
pub fn superlevel_fraction(traj: &Trajectory, pred: impl Fn(&[f64]) -> bool, t_lo: f64, t_hi: f64, s: f64) -> f64 {
    let g = traj.grid;
    let nodes: Vec<usize> = (0..g.len()).filter(|&i| pred(&g.point(i)[..g.n])).collect();
    let mut hit = 0.0;
    let mut total = 0.0;
    for k in 1..traj.len() {
        let (a, b) = (traj.times[k - 1].max(t_lo), traj.times[k].min(t_hi));
        if b <= a {
            continue;
        }
        let w = b - a;
        let above = nodes.iter().filter(|&&i| traj.slices[k][i] > s).count();
        hit += w * above as f64;
        total += w * nodes.len() as f64;
    }
    if total > 0.0 {
        hit / total
    } else {
        0.0
    }
}

fn in_cube(x: &[f64], side: f64) -> bool {
    x.iter().all(|v| v.abs() < 0.5 * side - 1e-12)
}

fn in_ball(x: &[f64], r: f64) -> bool {
    x.iter().map(|v| v * v).sum::<f64>().sqrt() < r - 1e-12
}

fn window_min(traj: &Trajectory, pred: impl Fn(&[f64]) -> bool, t_lo: f64, t_hi: f64) -> f64 {
    let g = traj.grid;
    let nodes: Vec<usize> = (0..g.len()).filter(|&i| pred(&g.point(i)[..g.n])).collect();
    let mut m = f64::INFINITY;
    for (k, &t) in traj.times.iter().enumerate() {
        if t >= t_lo - 1e-12 && t <= t_hi + 1e-12 {
            for &i in &nodes {
                m = m.min(traj.slices[k][i]);
            }
        }
    }
    m
}

/// Nonnegative supersolution data: spikes on a floor, forcing `−f(t)` with
/// `0 ≤ f ≤ f_max`, exterior equal to the floor.
#[derive(Clone, Debug, Serialize)]
pub struct SupersolutionMember {
    pub seed: u64,
    pub floor: f64,
    pub f_max: f64,
    /// `(amplitude, width, center)` of each spike.
    pub spikes: Vec<(f64, f64, f64)>,
}

impl SupersolutionMember {
    pub fn zero() -> Self {
        SupersolutionMember {
            seed: 0,
            floor: 0.0,
            f_max: 0.0,
            spikes: vec![],
        }
    }

    /// Spikes centered in `[−spread, spread]` (first coordinate) with peak up
    /// to `peak`; the floor outlasts the forcing over `horizon`.
    pub fn random(seed: u64, spread: f64, peak: f64, f_cap: f64, horizon: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f_max = rng.gen_range(0.0..=f_cap);
        let floor = f_max * horizon * rng.gen_range(1.0..2.0);
        let count = rng.gen_range(1..4);
        let spikes = (0..count)
            .map(|_| {
                (
                    peak * rng.gen_range(0.05f64..1.0).powi(2),
                    rng.gen_range(0.03..0.3),
                    rng.gen_range(-spread..spread),
                )
            })
            .collect();
        SupersolutionMember {
            seed,
            floor,
            f_max,
            spikes,
        }
    }

    fn initial(&self, n: usize) -> Field {
        let mut terms = vec![Field::constant(self.floor)];
        for &(a, w, c) in &self.spikes {
            let mut center = vec![0.0; n];
            center[0] = c;
            terms.push(Field::Gaussian {
                amplitude: a,
                width: w,
                center,
            });
        }
        Field::Sum { terms }
    }

    /// The time profile takes values in `[0, f_max]`.
    fn forcing(&self) -> Field {
        Field::random_time_profile(self.seed.wrapping_add(101), 0.0, 1.0).scaled(self.f_max)
    }

    pub fn problem(&self, params: &KernelClassParams, grid: Grid, domain: Domain, t_start: f64) -> Problem {
        let n = params.n;
        Problem {
            operator: OperatorSpec::ExtremalMinus,
            params: *params,
            grid,
            domain,
            t_start,
            steps: None,
            reach: None,
            exterior: Field::constant(self.floor),
            initial: self.initial(n),
            rhs: self.forcing().scaled(-1.0),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    /// `min (u_t − M⁻u + bound)` over interior nodes.
    pub residual_margin: f64,
    pub min_value: f64,
    pub accepted: bool,
}

fn check_supersolution(scheme: &Scheme, traj: &Trajectory, rhs_bound: f64) -> HypothesisCheck {
    let margin = scheme.residual_with(traj, ResidualKind::Explicit).min() + rhs_bound;
    let min_value = traj.slices.iter().flatten().fold(f64::INFINITY, |m, v| m.min(*v));
    HypothesisCheck {
        residual_margin: margin,
        min_value,
        accepted: margin >= -1e-9 && min_value >= -1e-12,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BaseMemberResult {
    pub seed: u64,
    pub sigma: f64,
    pub check: HypothesisCheck,
    /// `inf u` on `Q₃ × [1, 80]` before normalization.
    pub raw_inf: f64,
    /// Division applied so that the inf is at most 1.
    pub scale: f64,
    /// `|{u > M₀} ∩ Q₁ × [0,1]| / |Q₁ × [0,1]|` per candidate `M₀`.
    pub fractions: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaseConfiguration {
    pub candidates: Vec<f64>,
    pub members: Vec<BaseMemberResult>,
    pub rejected: usize,
    /// Worst fraction over the accepted family, per candidate.
    pub worst: Vec<f64>,
    pub big_m0: Option<f64>,
    pub mu0: Option<f64>,
}

pub const BASE_HORIZON: f64 = 80.0;

/// Runs `u_t − M⁻u ≥ −1` on `B_{4√n} × (0, 80]` (solver time shifted by −80)
/// for every member and σ and picks the smallest candidate `M₀` whose worst
/// measured fraction is below one.
pub fn base_configuration_experiment(
    params: &KernelClassParams,
    sigmas: &[f64],
    members: &[SupersolutionMember],
    grid: Grid,
    candidates: &[f64],
) -> Result<BaseConfiguration, RegularityError> {
    let n = params.n;
    let r_dom = 4.0 * (n as f64).sqrt();
    let jobs: Vec<(f64, &SupersolutionMember)> = sigmas
        .iter()
        .flat_map(|s| members.iter().map(move |m| (*s, m)))
        .collect();
    let runs: Vec<Result<BaseMemberResult, RegularityError>> = jobs
        .par_iter()
        .map(|(sigma, member)| {
            let p = params.with_sigma(*sigma);
            let problem = member.problem(&p, grid, Domain::Ball { radius: r_dom }, -BASE_HORIZON);
            let scheme = Scheme::new(problem)?;
            let traj = scheme.solve()?;
            let check = check_supersolution(&scheme, &traj, 1.0);
            // paper time τ ↦ solver time τ − 80
            let t0 = -BASE_HORIZON;
            let raw_inf = window_min(&traj, |x| in_cube(x, 3.0), t0 + 1.0, 0.0);
            let scale = raw_inf.max(1.0);
            let fractions = candidates
                .iter()
                .map(|m0| superlevel_fraction(&traj, |x| in_cube(x, 1.0), t0, t0 + 1.0, m0 * scale))
                .collect();
            Ok(BaseMemberResult {
                seed: member.seed,
                sigma: *sigma,
                check,
                raw_inf,
                scale,
                fractions,
            })
        })
        .collect();
    let mut out = Vec::new();
    for r in runs {
        out.push(r?);
    }
    let rejected = out.iter().filter(|r| !r.check.accepted).count();
    for r in out.iter().filter(|r| !r.check.accepted) {
        log::warn!(
            "base configuration: member {} at sigma {} rejected (margin {:.3e}, min {:.3e})",
            r.seed,
            r.sigma,
            r.check.residual_margin,
            r.check.min_value
        );
    }
    let worst: Vec<f64> = (0..candidates.len())
        .map(|j| {
            out.iter()
                .filter(|r| r.check.accepted)
                .map(|r| r.fractions[j])
                .fold(0.0, f64::max)
        })
        .collect();
    let pick = candidates
        .iter()
        .zip(&worst)
        .find(|(m, w)| **m > 1.0 && **w < 1.0)
        .map(|(m, w)| (*m, *w));
    Ok(BaseConfiguration {
        candidates: candidates.to_vec(),
        members: out,
        rejected,
        worst,
        big_m0: pick.map(|p| p.0),
        mu0: pick.map(|p| p.1),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DistributionMember {
    pub seed: u64,
    pub sigma: f64,
    pub check: HypothesisCheck,
    /// `inf_{B_1/2 × [−1/2, 0]} u + ‖f⁺‖_∞`.
    pub scale: f64,
    /// `(s / scale, measure fraction)` with nonzero fraction.
    pub samples: Vec<(f64, f64)>,
    /// Per-member log-log slope, `None` if the fit is degenerate.
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaFit {
    pub sigma: f64,
    pub epsilon: f64,
    pub c: f64,
    pub points: usize,
    pub members: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointEstimateFit {
    pub members: Vec<DistributionMember>,
    pub per_sigma: Vec<SigmaFit>,
    pub rejected: usize,
    /// Worst case over σ: smallest ε, largest C.
    pub epsilon: f64,
    pub c: f64,
    /// max ε / min ε over the sweep.
    pub epsilon_spread: f64,
}

/// `s` runs over `scale · 2^{j/2}`, `j = 0, 1, …`, until the superlevel set is empty.
pub fn point_estimate_experiment(
    params: &KernelClassParams,
    sigmas: &[f64],
    members: &[SupersolutionMember],
    grid: Grid,
    max_halvings: usize,
) -> Result<PointEstimateFit, RegularityError> {
    let jobs: Vec<(f64, &SupersolutionMember)> = sigmas
        .iter()
        .flat_map(|s| members.iter().map(move |m| (*s, m)))
        .collect();
    let runs: Vec<Result<DistributionMember, RegularityError>> = jobs
        .par_iter()
        .map(|(sigma, member)| {
            let p = params.with_sigma(*sigma);
            let problem = member.problem(&p, grid, Domain::Ball { radius: 1.0 }, -1.0);
            let f_sup = problem.rhs.sup_abs().min(member.f_max);
            let scheme = Scheme::new(problem)?;
            let traj = scheme.solve()?;
            let check = check_supersolution(&scheme, &traj, member.f_max);
            let scale = window_min(&traj, |x| in_ball(x, 0.5), -0.5, 0.0) + f_sup;
            let mut samples = Vec::new();
            if scale > 0.0 {
                for j in 0..max_halvings {
                    let ratio = 2f64.powf(j as f64 / 2.0);
                    let d = superlevel_fraction(&traj, |x| in_ball(x, 0.5), -1.0, -0.5, ratio * scale);
                    if d <= 0.0 {
                        break;
                    }
                    samples.push((ratio, d));
                }
            }
            let epsilon = fit_samples(&samples).map(|(e, _)| e);
            Ok(DistributionMember {
                seed: member.seed,
                sigma: *sigma,
                check,
                scale,
                samples,
                epsilon,
            })
        })
        .collect();
    let mut out = Vec::new();
    for r in runs {
        out.push(r?);
    }
    let rejected = out.iter().filter(|r| !r.check.accepted).count();
    let mut per_sigma = Vec::new();
    for &sigma in sigmas {
        let pooled: Vec<(f64, f64)> = out
            .iter()
            .filter(|r| r.sigma == sigma && r.check.accepted)
            .flat_map(|r| r.samples.iter().copied())
            .collect();
        let members = out
            .iter()
            .filter(|r| r.sigma == sigma && r.check.accepted && r.samples.len() > 1)
            .count();
        let (epsilon, c) = fit_samples(&pooled)
            .ok_or_else(|| RegularityError::DegenerateFit(format!("all measures vanish at sigma {sigma}")))?;
        per_sigma.push(SigmaFit {
            sigma,
            epsilon,
            c,
            points: pooled.len(),
            members,
        });
    }
    let epsilon = per_sigma.iter().map(|f| f.epsilon).fold(f64::INFINITY, f64::min);
    let emax = per_sigma.iter().map(|f| f.epsilon).fold(f64::NEG_INFINITY, f64::max);
    let c = per_sigma.iter().map(|f| f.c).fold(0.0, f64::max);
    Ok(PointEstimateFit {
        members: out,
        per_sigma,
        rejected,
        epsilon,
        c,
        epsilon_spread: emax / epsilon,
    })
}

/// Slope of `log D` against `log(s / scale)`, and the smallest `C` with
/// `D ≤ C (scale / s)^ε` at every sample.
pub fn fit_samples(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let xs: Vec<f64> = samples.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.1.ln()).collect();
    let (_, slope) = linear_fit(&xs, &ys)?;
    let eps = -slope;
    let c = samples
        .iter()
        .map(|(r, d)| d * r.powf(eps))
        .fold(0.0, f64::max);
    Some((eps, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_member_has_empty_superlevel_sets() {
        let params = KernelClassParams::new(1, 1.5, 0.5, 2.0, 0.3);
        let base = base_configuration_experiment(
            &params,
            &[1.5],
            &[SupersolutionMember::zero()],
            Grid::new(1, 20, 0.25),
            &[1.5, 4.0],
        )
        .unwrap();
        assert_eq!(base.rejected, 0);
        assert_eq!(base.worst, vec![0.0, 0.0]);
        assert_eq!(base.big_m0, Some(1.5));
    }

    #[test]
    fn constant_member_skips_the_fit() {
        // u ≡ 5, f ≡ 0: inf is 5 and {u > 5} is empty
        let params = KernelClassParams::new(1, 1.5, 0.5, 2.0, 0.3);
        let m = SupersolutionMember {
            seed: 3,
            floor: 5.0,
            f_max: 0.0,
            spikes: vec![],
        };
        let problem = m.problem(&params, Grid::new(1, 20, 1.0 / 16.0), Domain::Ball { radius: 1.0 }, -1.0);
        let traj = Scheme::new(problem).unwrap().solve().unwrap();
        assert!(traj.slices.iter().flatten().all(|v| (*v - 5.0).abs() < 1e-12));
        assert_eq!(superlevel_fraction(&traj, |x| in_ball(x, 0.5), -1.0, -0.5, 5.0), 0.0);
        assert!(fit_samples(&[(1.0, 0.5)]).is_none());
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let samples: Vec<(f64, f64)> = (0..8).map(|j| {
            let r = 2f64.powi(j);
            (r, 0.7 * r.powf(-0.4))
        }).collect();
        let (e, c) = fit_samples(&samples).unwrap();
        assert!((e - 0.4).abs() < 1e-12 && (c - 0.7).abs() < 1e-12);
    }
}
