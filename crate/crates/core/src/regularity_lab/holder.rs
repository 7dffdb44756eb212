//! Oscillation decay over parabolic cylinders, incremental quotients of
//! translation-invariant runs, and the truncation bookkeeping.

use super::{linear_fit, RegularityError};
use crate::field::Field;
use crate::grid::{norm, Domain, Grid, SpatialSlice};
use crate::kernel_ops::{
    weighted_norm, DiscreteOperator, IsaacsFamily, Kernel, KernelClassParams, OperatorSpec, Weight,
};
use crate::quadrature::Rule;
use crate::solver::{Problem, ResidualKind, Scheme, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

/// Scales dropped at each end of the fit window.
pub const FIT_TRIM: usize = 2;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cylinder {
    pub k: usize,
    pub radius: f64,
    pub duration: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderFit {
    pub alpha: f64,
    /// Slope before capping at 1.
    pub raw_slope: f64,
    /// Smallest `C` with `osc_k ≤ C 2^{−αk}` on the fitted range.
    pub c: f64,
    /// `sup |u(x,t) − u(c,0)| / (|x−c| + |t|^{1/σ})^α` on the largest fitted cylinder.
    pub seminorm: f64,
    pub cylinders: Vec<Cylinder>,
    pub oscillation: Vec<f64>,
    /// Inclusive range of fitted scale indices.
    pub fitted: (usize, usize),
}

/// Oscillation of `u` over `B_{2^{−k}}(c) × [−2^{−σk}, 0]` for every scale
/// the trajectory resolves inside `B_{max_radius}(c)`.
pub fn oscillation_decay(
    traj: &Trajectory,
    center: &[f64],
    sigma: f64,
    max_radius: f64,
) -> Result<HolderFit, RegularityError> {
    let g = traj.grid;
    let n = g.n;
    let cl = g.nearest(center);
    let c = g.coord(cl);
    let ci = g
        .index(cl)
        .ok_or_else(|| RegularityError::Cutoff("center outside the grid box".into()))?;
    let box_room = (0..n).map(|a| g.radius() - c[a].abs()).fold(f64::INFINITY, f64::min);
    let horizon = -traj.times[0];
    let mut cylinders = Vec::new();
    let mut osc = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for k in 0..64usize {
        let r = 0.5f64.powi(k as i32);
        let dur = r.powf(sigma);
        if r < g.h * (1.0 - 1e-9) {
            break;
        }
        if r > max_radius + 1e-12 || r > box_room + 1e-12 || dur > horizon + 1e-12 {
            continue;
        }
        let nodes: Vec<usize> = (0..g.len())
            .filter(|&i| {
                let p = g.point(i);
                let d = [p[0] - c[0], p[1] - c[1]];
                norm(&d, n) <= r + 1e-12
            })
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (kt, &t) in traj.times.iter().enumerate() {
            if t < -dur - 1e-12 {
                continue;
            }
            for &i in &nodes {
                let v = traj.slices[kt][i];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        cylinders.push(Cylinder {
            k,
            radius: r,
            duration: dur,
            nodes: nodes.len(),
        });
        osc.push(hi - lo);
        members.push(nodes);
    }
    let needed = 2 * FIT_TRIM + 2;
    if cylinders.len() < needed {
        return Err(RegularityError::TooFewScales {
            found: cylinders.len(),
            needed,
        });
    }
    let (a, b) = (FIT_TRIM, cylinders.len() - 1 - FIT_TRIM);
    let scale = osc[0].abs().max(1e-300);
    let (alpha, raw_slope) = if osc[a..=b].iter().all(|o| *o <= 1e-13 * scale) {
        (1.0, f64::INFINITY)
    } else {
        let xs: Vec<f64> = (a..=b).map(|j| cylinders[j].k as f64).collect();
        let ys: Vec<f64> = (a..=b).map(|j| osc[j].max(1e-300).log2()).collect();
        let (_, slope) = linear_fit(&xs, &ys).ok_or_else(|| RegularityError::DegenerateFit("single scale".into()))?;
        ((-slope).min(1.0), -slope)
    };
    let cfit = (a..=b)
        .map(|j| osc[j] * 2f64.powf(alpha * cylinders[j].k as f64))
        .fold(0.0, f64::max);
    let last = traj.len() - 1;
    let u0 = traj.slices[last][ci];
    let big = cylinders[a];
    let mut seminorm: f64 = 0.0;
    for (kt, &t) in traj.times.iter().enumerate() {
        if t < -big.duration - 1e-12 {
            continue;
        }
        for &i in &members[a] {
            let p = g.point(i);
            let d = norm(&[p[0] - c[0], p[1] - c[1]], n) + (-t).max(0.0).powf(1.0 / sigma);
            if d > 0.0 {
                seminorm = seminorm.max((traj.slices[kt][i] - u0).abs() / d.powf(alpha));
            }
        }
    }
    let fitted = (cylinders[a].k, cylinders[b].k);
    Ok(HolderFit {
        alpha,
        raw_slope,
        c: cfit,
        seminorm,
        cylinders,
        oscillation: osc,
        fitted,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TwoSidedCheck {
    /// `min (u_t − M⁻u)` over interior nodes.
    pub minus_min: f64,
    /// `max (u_t − M⁺u)` over interior nodes.
    pub plus_max: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Both inequalities `u_t − M⁻u ≥ −C₀`, `u_t − M⁺u ≤ C₀` on the scheme's own grid.
pub fn two_sided_check(problem: &Problem, traj: &Trajectory, c0: f64) -> Result<TwoSidedCheck, RegularityError> {
    let with = |op: OperatorSpec| Problem {
        operator: op,
        rhs: Field::Zero,
        ..problem.clone()
    };
    let minus = Scheme::new(with(OperatorSpec::ExtremalMinus))?;
    let plus = Scheme::new(with(OperatorSpec::ExtremalPlus))?;
    let minus_min = minus.residual_with(traj, ResidualKind::Explicit).min();
    let plus_max = plus.residual_with(traj, ResidualKind::Explicit).max();
    let slack = 1e-9 * (1.0 + c0);
    Ok(TwoSidedCheck {
        minus_min,
        plus_max,
        bound: c0,
        holds: minus_min >= -c0 - slack && plus_max <= c0 + slack,
    })
}

/// Step field on cells of width `cell` with values in `[−amp, amp]`, the prototype rough datum.
pub fn rough_field(seed: u64, n: usize, cell: f64, amp: f64, extent: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = (2.0 * extent / cell).ceil() as usize + 1;
    let cells = per.pow(n as u32);
    let table: Vec<f64> = (0..cells).map(|_| rng.gen_range(-amp..=amp)).collect();
    Field::from_fn(amp, move |x, _| {
        let mut idx = 0;
        for a in (0..n).rev() {
            let j = (((x[a] + extent) / cell).floor().max(0.0) as usize).min(per - 1);
            idx = idx * per + j;
        }
        table[idx]
    })
}

/// Isaacs family `inf_β sup_α` of random smooth L0 kernels without x-dependence.
pub fn random_isaacs(seed: u64, params: &KernelClassParams, rows: usize, cols: usize) -> IsaacsFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    IsaacsFamily {
        kernels: (0..rows)
            .map(|_| (0..cols).map(|_| Kernel::random_l0(&mut rng, params)).collect())
            .collect(),
        sup_inf: false,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoughRun {
    pub seed: u64,
    pub sigma: f64,
    pub rhs_bound: f64,
    pub check: TwoSidedCheck,
    pub fit: HolderFit,
}

/// Isaacs run on `B_R` with rough step data inside and outside and a rough
/// bounded forcing, followed by the oscillation fit at the origin.
pub fn rough_isaacs_run(
    seed: u64,
    params: &KernelClassParams,
    grid: Grid,
    domain_radius: f64,
    rhs_bound: f64,
) -> Result<RoughRun, RegularityError> {
    let n = params.n;
    let data = rough_field(seed, n, 1.0 / 16.0, 0.5, 4.0);
    let forcing = rough_field(seed.wrapping_add(17), n, 1.0 / 32.0, rhs_bound, 4.0);
    let problem = Problem {
        operator: OperatorSpec::Isaacs {
            family: random_isaacs(seed.wrapping_add(29), params, 2, 2),
        },
        params: *params,
        grid,
        domain: Domain::Ball { radius: domain_radius },
        t_start: -1.0,
        steps: None,
        reach: None,
        exterior: data.clone(),
        initial: data,
        rhs: forcing,
    };
    let traj = Scheme::new(problem.clone())?.solve()?;
    let check = two_sided_check(&problem, &traj, rhs_bound)?;
    let fit = oscillation_decay(&traj, &[0.0; 2][..n], params.sigma, domain_radius)?;
    Ok(RoughRun {
        seed,
        sigma: params.sigma,
        rhs_bound,
        check,
        fit,
    })
}

/// `ᾱ` nudged off reciprocals of integers, `K = ⌊1/ᾱ⌋` and `δ̄ = 1/(4K)`.
pub fn quotient_schedule(alpha_bar: f64) -> (f64, usize, f64) {
    let inv = 1.0 / alpha_bar;
    let a = if (inv - inv.round()).abs() < 1e-9 {
        alpha_bar * (1.0 - 1e-3)
    } else {
        alpha_bar
    };
    let k = (1.0 / a).floor() as usize;
    (a, k, 1.0 / (4.0 * k as f64))
}

/// `C^∞` cutoff equal to 1 on `B_{inner}` and vanishing outside `B_{outer}`.
pub fn cutoff(x: &[f64], inner: f64, outer: f64) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r <= inner {
        return 1.0;
    }
    if r >= outer {
        return 0.0;
    }
    let s = (outer - r) / (outer - inner);
    let f = |z: f64| if z > 0.0 { (-1.0 / z).exp() } else { 0.0 };
    f(s) / (f(s) + f(1.0 - s))
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientLevel {
    pub k: usize,
    pub shift: f64,
    /// `sup |w^{h,k}|` on `B_{3/4−kδ̄} × [−(3/4−kδ̄), 0]`.
    pub sup_w: f64,
    /// Running `sup` over all shifts `≥ h` tried so far.
    pub bound: f64,
    /// Hölder fit of `w₁^{h,k}` (cut-off quotient) inside `B_{3/4−(k+1)δ̄}`.
    pub cut_fit: Option<HolderFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientLevel {
    pub shift: f64,
    /// `sup |(u(x+he) − u(x))/h|` on `B_{1/4} × [−1/4, 0]`.
    pub lipschitz: f64,
    /// Pairwise seminorm of the Lipschitz quotient with exponent ᾱ there.
    pub seminorm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientReport {
    pub alpha_bar: f64,
    pub levels_k: usize,
    pub delta: f64,
    pub levels: Vec<QuotientLevel>,
    pub gradient: Vec<GradientLevel>,
}

fn quotient_trajectory(traj: &Trajectory, shift_cells: i64, axis: usize, denom: f64, weight: impl Fn(&[f64]) -> f64) -> Trajectory {
    let g = traj.grid;
    let n = g.n;
    let slices = traj
        .slices
        .iter()
        .enumerate()
        .map(|(kt, s)| {
            let sl = SpatialSlice::new(g, s.clone(), traj.exterior.clone(), traj.times[kt]);
            (0..g.len())
                .map(|i| {
                    let l = g.lattice(i);
                    let mut l2 = l;
                    l2[axis] += shift_cells;
                    let x = g.coord(l);
                    let x2 = g.coord(l2);
                    let a = weight(&x[..n]) * sl.at(l);
                    let b = weight(&x2[..n]) * sl.at(l2);
                    (b - a) / denom
                })
                .collect()
        })
        .collect();
    Trajectory::from_slices(g, traj.times.clone(), slices, Arc::new(Field::Zero), traj.interior.clone())
}

fn window_sup(traj: &Trajectory, radius: f64, duration: f64) -> f64 {
    let g = traj.grid;
    let mut m: f64 = 0.0;
    for (kt, &t) in traj.times.iter().enumerate() {
        if t < -duration - 1e-12 {
            continue;
        }
        for i in 0..g.len() {
            if norm(&g.point(i), g.n) <= radius + 1e-12 {
                m = m.max(traj.slices[kt][i].abs());
            }
        }
    }
    m
}

fn pair_seminorm(traj: &Trajectory, radius: f64, duration: f64, sigma: f64, alpha: f64, max_levels: usize) -> f64 {
    let g = traj.grid;
    let nodes: Vec<usize> = (0..g.len())
        .filter(|&i| norm(&g.point(i), g.n) <= radius + 1e-12)
        .collect();
    let levels: Vec<usize> = (0..traj.len())
        .filter(|&k| traj.times[k] >= -duration - 1e-12)
        .collect();
    let stride = levels.len().div_ceil(max_levels).max(1);
    let picked: Vec<usize> = levels.iter().rev().step_by(stride).copied().collect();
    let pts: Vec<(f64, [f64; 2], f64)> = picked
        .iter()
        .flat_map(|&k| nodes.iter().map(move |&i| (traj.times[k], g.point(i), traj.slices[k][i])))
        .collect();
    let mut best: f64 = 0.0;
    for (a, p) in pts.iter().enumerate() {
        for q in &pts[a + 1..] {
            let d = norm(&[p.1[0] - q.1[0], p.1[1] - q.1[1]], g.n) + (p.0 - q.0).abs().powf(1.0 / sigma);
            if d > 0.0 {
                best = best.max((p.2 - q.2).abs() / d.powf(alpha));
            }
        }
    }
    best
}

/// Quotients along coordinate `axis` for the given shifts (in grid cells),
/// largest shift first so the running bound accumulates toward small `h`.
pub fn incremental_quotient_fit(
    traj: &Trajectory,
    axis: usize,
    alpha_bar: f64,
    sigma: f64,
    shift_cells: &[i64],
) -> Result<QuotientReport, RegularityError> {
    let g = traj.grid;
    let (abar, kmax, delta) = quotient_schedule(alpha_bar);
    let mut shifts = shift_cells.to_vec();
    shifts.sort_unstable_by(|a, b| b.cmp(a));
    if let Some(&s) = shifts.first() {
        let h = s as f64 * g.h;
        if !(h > 0.0 && h < delta / 8.0) {
            return Err(RegularityError::Cutoff(format!("shift {h} outside (0, δ̄/8 = {})", delta / 8.0)));
        }
        if g.radius() < 0.75 + h {
            return Err(RegularityError::Cutoff(format!(
                "grid radius {} below 3/4 + h = {}",
                g.radius(),
                0.75 + h
            )));
        }
    }
    let mut levels = Vec::new();
    let mut running = vec![0.0f64; kmax + 1];
    for &sc in &shifts {
        let h = sc as f64 * g.h;
        for k in 1..=kmax {
            let r = 0.75 - k as f64 * delta;
            let denom = h.powf(abar * k as f64);
            let w = quotient_trajectory(traj, sc, axis, denom, |_| 1.0);
            let sup_w = window_sup(&w, r, r);
            running[k] = running[k].max(sup_w);
            let (inner, outer) = (r - delta / 2.0, r - delta / 4.0);
            let w1 = quotient_trajectory(traj, sc, axis, denom, |x| cutoff(x, inner, outer));
            let cut_fit = oscillation_decay(&w1, &[0.0; 2][..g.n], sigma, r - delta).ok();
            levels.push(QuotientLevel {
                k,
                shift: h,
                sup_w,
                bound: running[k],
                cut_fit,
            });
        }
    }
    let gradient = shifts
        .iter()
        .map(|&sc| {
            let h = sc as f64 * g.h;
            let q = quotient_trajectory(traj, sc, axis, h, |_| 1.0);
            GradientLevel {
                shift: h,
                lipschitz: window_sup(&q, 0.25, 0.25),
                seminorm: pair_seminorm(&q, 0.25, 0.25, sigma, abar, 24),
            }
        })
        .collect();
    Ok(QuotientReport {
        alpha_bar: abar,
        levels_k: kmax,
        delta,
        levels,
        gradient,
    })
}

/// Smooth translation-invariant Isaacs run on `B_1` used by the quotient study.
pub fn smooth_isaacs_run(seed: u64, params: &KernelClassParams, grid: Grid) -> Result<(Problem, Trajectory), RegularityError> {
    let n = params.n;
    let data = Field::random_fourier(seed, n, 4, 0.5, 3.0);
    let problem = Problem {
        operator: OperatorSpec::Isaacs {
            family: random_isaacs(seed.wrapping_add(7), params, 2, 2),
        },
        params: *params,
        grid,
        domain: Domain::Ball { radius: 1.0 },
        t_start: -1.0,
        steps: None,
        reach: None,
        exterior: data.clone(),
        initial: data,
        rhs: Field::constant(0.25),
    };
    let traj = Scheme::new(problem.clone())?.solve()?;
    Ok((problem, traj))
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationReport {
    /// `max |M⁻u − M⁻v|` over `B_1` nodes and sampled levels, `v = u χ_{B_2}`.
    pub inflation_minus: f64,
    pub inflation_plus: f64,
    pub l1_norm: f64,
    /// `(2−σ) Λ 2^{n+σ+1}`: kernel tail against the weight when `|x| < 1`, `|x+y| ≥ 2`.
    pub c_bound: f64,
    pub c_measured: f64,
    pub holds: bool,
}

/// `v = u χ_{B_2}` changes both extremal residuals on `B_1` by at most `C ‖u‖_{L¹(ω)}`.
pub fn truncation_check(
    traj: &Trajectory,
    params: &KernelClassParams,
    weight: &Weight,
    reach: f64,
    max_levels: usize,
) -> Result<TruncationReport, RegularityError> {
    let g = traj.grid;
    let n = g.n;
    let plus = DiscreteOperator::new(&OperatorSpec::ExtremalPlus, params, &g, reach)?;
    let minus = DiscreteOperator::new(&OperatorSpec::ExtremalMinus, params, &g, reach)?;
    let trunc_ext = Arc::new((*traj.exterior).clone().truncated(2.0));
    let stride = traj.len().div_ceil(max_levels.max(1)).max(1);
    let (mut inf_m, mut inf_p, mut l1): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in (0..traj.len()).rev().step_by(stride) {
        let u = traj.slice(k);
        let vals = (0..g.len())
            .map(|i| {
                if norm(&g.point(i), n) < 2.0 {
                    u.values[i]
                } else {
                    0.0
                }
            })
            .collect();
        let v = SpatialSlice::new(g, vals, trunc_ext.clone(), u.t);
        let (um, up) = (minus.apply_all(&u), plus.apply_all(&u));
        let (vm, vp) = (minus.apply_all(&v), plus.apply_all(&v));
        for i in 0..g.len() {
            if norm(&g.point(i), n) < 1.0 - 1e-12 {
                inf_m = inf_m.max((um[i].value - vm[i].value).abs());
                inf_p = inf_p.max((up[i].value - vp[i].value).abs());
            }
        }
        l1 = l1.max(weighted_norm(&u, weight));
    }
    let s = params.sigma;
    let c_bound = (2.0 - s) * params.lambda * 2f64.powf(n as f64 + s + 1.0);
    let worst = inf_m.max(inf_p);
    let c_measured = if l1 > 0.0 { worst / l1 } else { 0.0 };
    Ok(TruncationReport {
        inflation_minus: inf_m,
        inflation_plus: inf_p,
        l1_norm: l1,
        c_bound,
        c_measured,
        holds: worst <= c_bound * l1 * (1.0 + 1e-9) + 1e-12,
    })
}

/// `∫_{|x+y| ≥ 2} (2−σ)|y|^{−1−σ} dy` in one dimension, by Gauss quadrature
/// in `r = ρ/s` on each half line.
pub fn tail_outside_b2(x: f64, sigma: f64) -> f64 {
    let rule = Rule::composite(16, 0.0, 1.0, 16);
    let half = |rho: f64| rule.integrate(|s| (2.0 - sigma) * (rho / s).powf(-1.0 - sigma) * rho / (s * s));
    half(2.0 - x) + half(2.0 + x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_ops::unit_tail_mass;

    fn sample(field: &Field, m: i64, h: f64, steps: usize) -> Trajectory {
        Trajectory::sample(Grid::new(1, m, h), &Domain::Ball { radius: 1.0 }, field, -1.0, steps)
    }

    #[test]
    fn constant_gives_alpha_one() {
        let fit = oscillation_decay(&sample(&Field::constant(2.0), 80, 1.0 / 64.0, 64), &[0.0], 1.5, 1.0).unwrap();
        assert!(fit.oscillation.iter().all(|o| *o == 0.0));
        assert_eq!(fit.alpha, 1.0);
    }

    #[test]
    fn linear_profile_gives_alpha_one() {
        let line = Field::Affine {
            slope: vec![1.0],
            offset: 0.0,
        };
        let fit = oscillation_decay(&sample(&line, 80, 1.0 / 64.0, 64), &[0.0], 1.5, 1.0).unwrap();
        assert!((fit.raw_slope - 1.0).abs() < 1e-9, "{fit:?}");
        assert_eq!(fit.alpha, 1.0);
        assert!(fit.oscillation.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn square_root_cusp_gives_one_half() {
        let cusp = Field::from_fn(f64::INFINITY, |x, _| x[0].abs().sqrt());
        let fit = oscillation_decay(&sample(&cusp, 80, 1.0 / 64.0, 8), &[0.0], 1.5, 1.0).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-9, "{fit:?}");
    }

    #[test]
    fn coarse_grid_is_reported() {
        let r = oscillation_decay(&sample(&Field::Zero, 4, 0.25, 4), &[0.0], 1.5, 1.0);
        assert!(matches!(r, Err(RegularityError::TooFewScales { .. })));
    }

    #[test]
    fn schedule_formula() {
        let (a, k, d) = quotient_schedule(0.3);
        assert_eq!((a, k), (0.3, 3));
        assert!((d - 1.0 / 12.0).abs() < 1e-15);
        let (a, k, _) = quotient_schedule(0.5);
        assert!(a < 0.5 && k == 2);
    }

    #[test]
    fn cutoff_regions() {
        assert_eq!(cutoff(&[0.3], 0.5, 0.6), 1.0);
        assert_eq!(cutoff(&[0.6], 0.5, 0.6), 0.0);
        let v = cutoff(&[0.55], 0.5, 0.6);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn affine_quotients_are_constant() {
        let line = Field::Affine {
            slope: vec![0.7],
            offset: 0.2,
        };
        let traj = sample(&line, 128, 1.0 / 128.0, 16);
        let rep = incremental_quotient_fit(&traj, 0, 0.6, 1.5, &[2, 1]).unwrap();
        for g in &rep.gradient {
            assert!((g.lipschitz - 0.7).abs() < 1e-12);
            assert!(g.seminorm < 1e-9);
        }
        assert!(incremental_quotient_fit(&traj, 0, 0.6, 1.5, &[8]).is_err());
    }

    #[test]
    fn truncation_of_one_matches_tail_quadrature() {
        let params = KernelClassParams::new(1, 1.5, 0.5, 2.0, 0.3);
        let traj = sample(&Field::constant(1.0), 66, 1.0 / 64.0, 2);
        let rep = truncation_check(&traj, &params, &Weight { n: 1, sigma: 1.5 }, 6.0, 2).unwrap();
        // at x = 0 the closed form applies; the sup over B_1 is attained near |x| = 1
        let t0 = tail_outside_b2(0.0, 1.5);
        assert!((t0 - unit_tail_mass(1, 1.5, 2.0)).abs() < 1e-6 * t0, "{t0}");
        let worst_tail = tail_outside_b2(1.0 - 1.0 / 64.0, 1.5);
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert!(rel(rep.inflation_minus, params.lambda * worst_tail) < 0.05, "{rep:?} {worst_tail}");
        assert!(rel(rep.inflation_plus, worst_tail / params.lambda) < 0.05, "{rep:?}");
        assert!(rep.holds);
        // linear in the data
        let rep2 = truncation_check(&traj.scaled(3.0), &params, &Weight { n: 1, sigma: 1.5 }, 6.0, 2).unwrap();
        assert!(rel(rep2.inflation_minus, 3.0 * rep.inflation_minus) < 1e-9);
    }

    #[test]
    fn compact_data_inside_b2_has_no_inflation() {
        let params = KernelClassParams::new(1, 1.5, 0.5, 2.0, 0.3);
        let bump = Field::Bump {
            amplitude: 1.0,
            radius: 1.5,
            center: vec![0.0],
        };
        let traj = sample(&bump, 66, 1.0 / 64.0, 2);
        let rep = truncation_check(&traj, &params, &Weight { n: 1, sigma: 1.5 }, 6.0, 2).unwrap();
        assert_eq!(rep.inflation_minus, 0.0);
        assert_eq!(rep.inflation_plus, 0.0);
    }
}
