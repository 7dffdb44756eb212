//! Parabolic convex envelope of a normalized trajectory, its Legendre
//! transform, and the ABP-type diagnostics built on them.

pub mod covering;
pub mod experiment;
pub mod hull;

use crate::field::Field;
use crate::grid::{norm, Grid, Point};
use crate::solver::{fmt17, Trajectory};
use hull::SliceHull;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::{self, Write};
use thiserror::Error;

pub use covering::{contact_covering, CoveringOptions, CoveringRectangles, Rectangle};

/// Radius of the ball on which the envelope is supported.
pub const SUPPORT_RADIUS: f64 = 3.0;
/// Number of points used for the support circle in 2D.
pub const CIRCLE_POINTS: usize = 256;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("trajectory must start at or before t = -1 (starts at {0})")]
    StartsTooLate(f64),
    #[error("u has no negative part in B_1 x (-1, 0]")]
    NoNegativePart,
    #[error("normalization violated: sup u^- over B_1 x (-1, 0] is {0}, expected 1")]
    NotNormalized(f64),
    #[error("u = {value} < 0 at x = {x:?}, t = {t} where nonnegativity is required")]
    NegativeData { x: Point, t: f64, value: f64 },
    #[error("grid box must lie inside B_3")]
    BoxTooLarge,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no contact point found")]
    NoContact,
}

pub fn contact_tol(h: f64) -> f64 {
    (h * h).max(1e-8)
}

/// Values on a grid at a list of times.
#[derive(Clone, Debug)]
pub struct SpaceTimeSample {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// `ū(x, t) = min_{s ∈ [-1, t]} u(x, s)` at the trajectory slices with `t ≥ -1`.
#[derive(Clone, Debug)]
pub struct MonotoneEnvelope {
    pub sample: SpaceTimeSample,
}

#[derive(Clone, Debug)]
pub struct ParabolicConvexEnvelope {
    pub sample: SpaceTimeSample,
    pub hulls: Vec<SliceHull>,
    /// Minimum point of u over B_1 x (-1, 0]: `(x0, t0, slice index)`.
    pub anchor: (Point, f64, usize),
}

/// `h(p, t)` on a slope lattice, with the mask of slopes in `∂Γ(B_1, t)`.
#[derive(Clone, Debug, Serialize)]
pub struct LegendreTable {
    pub slopes: Vec<Point>,
    pub times: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub domain: Vec<Vec<bool>>,
}

/// Everything derived from one normalized trajectory.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub grid: Grid,
    /// The trajectory values at the kept slices (`t ≥ -1`).
    pub u: SpaceTimeSample,
    pub monotone: MonotoneEnvelope,
    pub convex: ParabolicConvexEnvelope,
    pub legendre: LegendreTable,
    /// Grid indices of the nodes in the open unit ball.
    pub ball_nodes: Vec<usize>,
    /// Points of the support sphere carrying the zero constraint.
    pub sphere: Vec<Point>,
    pub contact_tol: f64,
}

fn in_unit_ball(x: &Point, n: usize) -> bool {
    norm(x, n) < 1.0 - 1e-12
}

fn first_kept(traj: &Trajectory) -> Result<usize, EnvelopeError> {
    if traj.times[0] > -1.0 + 1e-12 {
        return Err(EnvelopeError::StartsTooLate(traj.times[0]));
    }
    Ok(traj.times.iter().position(|&t| t >= -1.0 - 1e-12).unwrap_or(0))
}

/// `sup u^-` over `B_1 x (-1, 0]`.
pub fn negative_sup(traj: &Trajectory) -> f64 {
    let g = traj.grid;
    let mut worst: f64 = 0.0;
    for (k, s) in traj.slices.iter().enumerate() {
        if traj.times[k] <= -1.0 + 1e-12 {
            continue;
        }
        for (i, v) in s.iter().enumerate() {
            if in_unit_ball(&g.point(i), g.n) {
                worst = worst.max(-v);
            }
        }
    }
    worst
}

/// Rescale so that `sup u^- = 1`; returns the trajectory and the factor applied.
pub fn normalize(traj: &Trajectory) -> Result<(Trajectory, f64), EnvelopeError> {
    let s = negative_sup(traj);
    if s <= 0.0 {
        return Err(EnvelopeError::NoNegativePart);
    }
    Ok((traj.scaled(1.0 / s), 1.0 / s))
}

/// Nonnegativity outside `B_1` and at times `t ≤ -1`, within `tol`.
pub fn check_data_sign(traj: &Trajectory, tol: f64) -> Result<(), EnvelopeError> {
    let g = traj.grid;
    for (k, s) in traj.slices.iter().enumerate() {
        let t = traj.times[k];
        for (i, &v) in s.iter().enumerate() {
            let x = g.point(i);
            if (t <= -1.0 + 1e-12 || !in_unit_ball(&x, g.n)) && v < -tol {
                return Err(EnvelopeError::NegativeData { x, t, value: v });
            }
        }
    }
    Ok(())
}

pub fn support_sphere(n: usize) -> Vec<Point> {
    if n == 1 {
        vec![[-SUPPORT_RADIUS, 0.0], [SUPPORT_RADIUS, 0.0]]
    } else {
        (0..CIRCLE_POINTS)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / CIRCLE_POINTS as f64;
                [SUPPORT_RADIUS * a.cos(), SUPPORT_RADIUS * a.sin()]
            })
            .collect()
    }
}

/// Slope lattice of spacing `h` in `|p| ≤ 1/2`.
pub fn slope_lattice(n: usize, h: f64) -> Vec<Point> {
    let k = (0.5 / h + 1e-9).floor() as i64;
    let mut out = Vec::new();
    for a in -k..=k {
        if n == 1 {
            out.push([a as f64 * h, 0.0]);
        } else {
            for b in -k..=k {
                let p = [a as f64 * h, b as f64 * h];
                if p[0].hypot(p[1]) <= 0.5 + 1e-12 {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn dotn(p: &Point, x: &Point, n: usize) -> f64 {
    if n == 1 {
        p[0] * x[0]
    } else {
        p[0] * x[0] + p[1] * x[1]
    }
}

/// Normalize-checked construction of `ū`, `Γ` and `h`. The trajectory must
/// already satisfy `sup u^- = 1` on `B_1 x (-1, 0]`.
pub fn build_envelope(traj: &Trajectory) -> Result<Envelope, EnvelopeError> {
    let g = traj.grid;
    let n = g.n;
    if g.radius() * (n as f64).sqrt() > SUPPORT_RADIUS {
        return Err(EnvelopeError::BoxTooLarge);
    }
    let s = negative_sup(traj);
    if (s - 1.0).abs() > 1e-9 {
        return Err(EnvelopeError::NotNormalized(s));
    }
    let tol = contact_tol(g.h);
    check_data_sign(traj, 1e-12)?;
    let k0 = first_kept(traj)?;
    let times: Vec<f64> = traj.times[k0..].to_vec();
    let u: Vec<Vec<f64>> = traj.slices[k0..].to_vec();
    let mut ubar = Vec::with_capacity(u.len());
    let mut cur = u[0].clone();
    for s in &u {
        for (c, v) in cur.iter_mut().zip(s) {
            *c = c.min(*v);
        }
        ubar.push(cur.clone());
    }
    let ball_nodes: Vec<usize> = (0..g.len()).filter(|&i| in_unit_ball(&g.point(i), n)).collect();
    let sphere = support_sphere(n);

    // anchor: first minimizer over B_1 x (-1, 0]
    let mut anchor = ([0.0; 2], 0.0, 0usize);
    let mut best = f64::INFINITY;
    for (k, s) in u.iter().enumerate() {
        if times[k] <= -1.0 + 1e-12 {
            continue;
        }
        for &i in &ball_nodes {
            if s[i] < best {
                best = s[i];
                anchor = (g.point(i), times[k], k);
            }
        }
    }

    let hulls: Vec<SliceHull> = ubar
        .par_iter()
        .map(|ub| {
            let mut pts: Vec<Point> = ball_nodes.iter().map(|&i| g.point(i)).collect();
            let mut vals: Vec<f64> = ball_nodes.iter().map(|&i| ub[i]).collect();
            pts.extend(sphere.iter().copied());
            vals.extend(std::iter::repeat(0.0).take(sphere.len()));
            SliceHull::build(n, &pts, &vals)
        })
        .collect();
    let gamma: Vec<Vec<f64>> = hulls
        .par_iter()
        .map(|h| (0..g.len()).map(|i| h.value(&g.point(i))).collect())
        .collect();

    let mut env = Envelope {
        grid: g,
        u: SpaceTimeSample {
            grid: g,
            times: times.clone(),
            values: u,
        },
        monotone: MonotoneEnvelope {
            sample: SpaceTimeSample {
                grid: g,
                times: times.clone(),
                values: ubar,
            },
        },
        convex: ParabolicConvexEnvelope {
            sample: SpaceTimeSample {
                grid: g,
                times: times.clone(),
                values: gamma,
            },
            hulls,
            anchor,
        },
        legendre: LegendreTable {
            slopes: Vec::new(),
            times,
            h: Vec::new(),
            domain: Vec::new(),
        },
        ball_nodes,
        sphere,
        contact_tol: tol,
    };
    env.legendre = env.legendre_table(&slope_lattice(n, g.h));
    Ok(env)
}

impl Envelope {
    pub fn len(&self) -> usize {
        self.u.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.times.is_empty()
    }

    pub fn x0(&self) -> Point {
        self.convex.anchor.0
    }

    /// The two terms of `h(p, t_k)`: the `B_1` constraint on `ū` and the
    /// zero constraint on the support sphere.
    pub fn legendre_terms(&self, k: usize, p: &Point) -> (f64, f64) {
        let n = self.grid.n;
        let x0 = self.x0();
        let ub = &self.monotone.sample.values[k];
        let a = self
            .ball_nodes
            .iter()
            .map(|&i| {
                let x = self.grid.point(i);
                ub[i] - dotn(p, &[x[0] - x0[0], x[1] - x0[1]], n)
            })
            .fold(f64::INFINITY, f64::min);
        let b = self
            .sphere
            .iter()
            .map(|z| -dotn(p, &[z[0] - x0[0], z[1] - x0[1]], n))
            .fold(f64::INFINITY, f64::min);
        (a, b)
    }

    /// `h(p, t_k) = sup{h : p·(x − x0) + h ≤ Γ(x, t_k) on B_3}`.
    pub fn legendre(&self, k: usize, p: &Point) -> f64 {
        let (a, b) = self.legendre_terms(k, p);
        a.min(b)
    }

    pub fn legendre_table(&self, slopes: &[Point]) -> LegendreTable {
        let tol = self.contact_tol;
        let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..self.len())
            .into_par_iter()
            .map(|k| {
                let mut hs = Vec::with_capacity(slopes.len());
                let mut dom = Vec::with_capacity(slopes.len());
                for p in slopes {
                    let (a, b) = self.legendre_terms(k, p);
                    hs.push(a.min(b));
                    dom.push(a <= b + tol);
                }
                (hs, dom)
            })
            .collect();
        let (h, domain) = rows.into_iter().unzip();
        LegendreTable {
            slopes: slopes.to_vec(),
            times: self.u.times.clone(),
            h,
            domain,
        }
    }

    pub fn gamma(&self, k: usize, i: usize) -> f64 {
        self.convex.sample.values[k][i]
    }

    /// Discrete contact `u − Γ ≤ tol` at ball node `i` of slice `k`.
    pub fn is_contact(&self, k: usize, i: usize) -> bool {
        self.u.values[k][i] - self.gamma(k, i) <= self.contact_tol
    }

    /// Contact nodes `(slice, node)` in `B_1 x (-1, 0]`.
    pub fn contact_set(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.len() {
            if self.u.times[k] <= -1.0 + 1e-12 {
                continue;
            }
            for &i in &self.ball_nodes {
                if self.is_contact(k, i) {
                    out.push((k, i));
                }
            }
        }
        out
    }

    /// `p ∈ ∂Γ(x, t_k)` up to `tol`, tested through the Legendre transform.
    pub fn in_subdifferential(&self, k: usize, x: &Point, p: &Point, tol: f64) -> bool {
        let n = self.grid.n;
        let x0 = self.x0();
        let gx = self.convex.hulls[k].value(x);
        gx - dotn(p, &[x[0] - x0[0], x[1] - x0[1]], n) - self.legendre(k, p) <= tol
    }

    /// `Γ ≤ ū ≤ u`, convexity along lattice lines, monotonicity in time.
    pub fn check_invariants(&self, tol: f64) -> Result<(), EnvelopeError> {
        let g = self.grid;
        for k in 0..self.len() {
            for i in 0..g.len() {
                let (gm, ub, u) = (self.gamma(k, i), self.monotone.sample.values[k][i], self.u.values[k][i]);
                if gm > ub + tol || ub > u + tol {
                    return Err(EnvelopeError::Precondition(format!("ordering fails at slice {k}, node {i}")));
                }
                if k > 0 {
                    if self.monotone.sample.values[k][i] > self.monotone.sample.values[k - 1][i] + tol {
                        return Err(EnvelopeError::Precondition(format!("ū increases at slice {k}")));
                    }
                    if gm > self.gamma(k - 1, i) + tol {
                        return Err(EnvelopeError::Precondition(format!("Γ increases at slice {k}")));
                    }
                }
            }
        }
        check_parabolic_convex(&self.convex.sample, tol)
    }
}

/// Convex in space along axis and diagonal lattice lines, nonincreasing in time.
pub fn check_parabolic_convex(s: &SpaceTimeSample, tol: f64) -> Result<(), EnvelopeError> {
    let g = s.grid;
    let dirs: &[[i64; 2]] = if g.n == 1 {
        &[[1, 0]]
    } else {
        &[[1, 0], [0, 1], [1, 1], [1, -1]]
    };
    for (k, v) in s.values.iter().enumerate() {
        for i in 0..g.len() {
            let l = g.lattice(i);
            for d in dirs {
                let (a, b) = (g.index([l[0] + d[0], l[1] + d[1]]), g.index([l[0] - d[0], l[1] - d[1]]));
                if let (Some(a), Some(b)) = (a, b) {
                    if v[a] + v[b] - 2.0 * v[i] < -tol {
                        return Err(EnvelopeError::Precondition(format!(
                            "not convex at slice {k}, node {l:?}"
                        )));
                    }
                }
            }
            if k > 0 && v[i] > s.values[k - 1][i] + tol {
                return Err(EnvelopeError::Precondition(format!("increases in time at slice {k}")));
            }
        }
    }
    Ok(())
}

/// Sup of a time-only forcing over `[a, b]`, sampled.
pub fn sup_on(f: &Field, a: f64, b: f64) -> f64 {
    let z = [0.0, 0.0];
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (0..=32)
        .map(|j| f.eval(&z, lo + (hi - lo) * j as f64 / 32.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaHViolation {
    pub p: Point,
    pub t: f64,
    pub x: Point,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaHReport {
    pub domain_monotone: bool,
    pub h_monotone: bool,
    pub triples: usize,
    pub min_margin: f64,
    /// Smallest `C` for which `Δh ≥ −2‖f‖Δt − C h_grid` holds on every triple.
    pub measured_c: f64,
    pub first_violation: Option<DeltaHViolation>,
}

impl DeltaHReport {
    pub fn passed(&self) -> bool {
        self.domain_monotone && self.h_monotone && self.first_violation.is_none()
    }
}

/// Domain and value monotonicity of `h`, and the time-Lipschitz bound at contact points.
pub fn delta_h_check(env: &Envelope, f: &Field, c_grid: f64) -> DeltaHReport {
    let tab = &env.legendre;
    let mut domain_monotone = true;
    let mut h_monotone = true;
    for k in 1..tab.times.len() {
        for j in 0..tab.slopes.len() {
            if tab.domain[k - 1][j] && !tab.domain[k][j] {
                domain_monotone = false;
            }
            if tab.h[k][j] > tab.h[k - 1][j] + 1e-12 {
                h_monotone = false;
            }
        }
    }
    let g = env.grid;
    let mut triples = 0;
    let mut min_margin = f64::INFINITY;
    let mut measured_c: f64 = 0.0;
    let mut first = None;
    for k in 0..env.len().saturating_sub(1) {
        let (t1, t2) = (env.u.times[k], env.u.times[k + 1]);
        if t1 <= -1.0 + 1e-12 {
            continue;
        }
        let df = 2.0 * sup_on(f, t1, t2).max(0.0) * (t2 - t1);
        for &i in &env.ball_nodes {
            if !env.is_contact(k, i) {
                continue;
            }
            let x = g.point(i);
            for p in env.convex.hulls[k].subgradients(&x) {
                let dh = env.legendre(k + 1, &p) - env.legendre(k, &p);
                let margin = dh + df + c_grid * g.h;
                triples += 1;
                measured_c = measured_c.max((-(dh + df)) / g.h);
                min_margin = min_margin.min(margin);
                if margin < -1e-12 && first.is_none() {
                    first = Some(DeltaHViolation { p, t: t1, x, margin });
                }
            }
        }
    }
    DeltaHReport {
        domain_monotone,
        h_monotone,
        triples,
        min_margin,
        measured_c: measured_c.max(0.0),
        first_violation: first,
    }
}

/// Default flatness threshold: half the relative measure of the cap
/// `{x·e > r/2}` inside the annulus `B_r \ B_{r/2}`.
pub fn default_flatness_eps(n: usize) -> f64 {
    if n == 1 {
        0.25
    } else {
        let cap = PI / 3.0 - 3f64.sqrt() / 4.0;
        0.5 * cap / (0.75 * PI)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatnessOutcome {
    pub fraction: f64,
    pub hypothesis: bool,
    /// `Some(Γ ≤ M on the inner cylinder)` when the hypothesis holds.
    pub conclusion: Option<bool>,
}

impl FlatnessOutcome {
    /// The implication holds (vacuously when the hypothesis fails).
    pub fn holds(&self) -> bool {
        self.conclusion != Some(false)
    }
}

/// Measure-to-pointwise flatness for a parabolic convex `Γ` on `[-Δt, 0]`,
/// centered at `center` with times taken relative to `t_end`.
pub fn flatness_check(
    gamma: &SpaceTimeSample,
    center: &Point,
    t_end: f64,
    m: f64,
    r: f64,
    dt: f64,
    eps0: f64,
) -> Result<FlatnessOutcome, EnvelopeError> {
    let g = gamma.grid;
    let within: Vec<usize> = (0..gamma.times.len())
        .filter(|&k| gamma.times[k] >= t_end - dt - 1e-12 && gamma.times[k] <= t_end + 1e-12)
        .collect();
    let sub = SpaceTimeSample {
        grid: g,
        times: within.iter().map(|&k| gamma.times[k]).collect(),
        values: within.iter().map(|&k| gamma.values[k].clone()).collect(),
    };
    check_parabolic_convex(&sub, 1e-9)?;
    let mut total = 0usize;
    let mut high = 0usize;
    let mut inner_max = f64::NEG_INFINITY;
    for &k in &within {
        let s = gamma.times[k] - t_end;
        for i in 0..g.len() {
            let x = g.point(i);
            let d = norm(&[x[0] - center[0], x[1] - center[1]], g.n);
            if s <= -dt / 2.0 + 1e-12 && d >= r / 2.0 && d < r {
                total += 1;
                if gamma.values[k][i] >= m {
                    high += 1;
                }
            }
            if s >= -dt / 2.0 - 1e-12 && d < r / 2.0 {
                inner_max = inner_max.max(gamma.values[k][i]);
            }
        }
    }
    if total == 0 {
        return Err(EnvelopeError::Precondition("empty annulus window".into()));
    }
    let fraction = high as f64 / total as f64;
    let hypothesis = fraction <= eps0;
    Ok(FlatnessOutcome {
        fraction,
        hypothesis,
        conclusion: hypothesis.then_some(inner_max <= m),
    })
}

/// Dyadic ring radii `r_i = 2^{-i} 2^{-1/(2-σ)} ρ0` and the depth `k ≈ 1/(2−σ)`.
#[derive(Clone, Debug, Serialize)]
pub struct RingSystem {
    pub radii: Vec<f64>,
    pub depth: usize,
}

impl RingSystem {
    pub fn new(sigma: f64, rho0: f64, count: usize) -> Self {
        let r0 = 2f64.powf(-1.0 / (2.0 - sigma)) * rho0;
        RingSystem {
            radii: (0..count).map(|i| r0 * 2f64.powi(-(i as i32))).collect(),
            depth: (1.0 / (2.0 - sigma)).ceil().max(1.0) as usize,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RingReport {
    pub radii: Vec<f64>,
    pub fractions: Vec<f64>,
    pub nodes: Vec<usize>,
    /// `min_r fraction(r) · M` over measured rings.
    pub measured_c: f64,
    pub achieved: bool,
}

/// Fraction of `(B_r \ B_{r/2})(x1) x (t1 − Δt, t1 − Δt/2]` where `u` sits
/// `‖f⁺‖ M r²` above the supporting plane `p1`, for each ring radius.
#[allow(clippy::too_many_arguments)]
pub fn ring_fraction_check(
    env: &Envelope,
    rings: &RingSystem,
    contact: (usize, usize),
    p1: &Point,
    f: &Field,
    m: f64,
    dt: f64,
    c_target: f64,
) -> Result<RingReport, EnvelopeError> {
    let (k1, i1) = contact;
    if !env.is_contact(k1, i1) {
        return Err(EnvelopeError::NoContact);
    }
    let g = env.grid;
    let n = g.n;
    let x0 = env.x0();
    let x1 = g.point(i1);
    let t1 = env.u.times[k1];
    let h1 = env.legendre(k1, p1);
    let fnorm = sup_on(f, t1 - dt, t1).max(0.0);
    let mut fractions = Vec::new();
    let mut nodes = Vec::new();
    let mut radii = Vec::new();
    for &r in &rings.radii {
        if r < 2.0 * g.h {
            break;
        }
        let thr = fnorm * m * r * r;
        let (mut tot, mut hit) = (0usize, 0usize);
        for k in 0..env.len() {
            let t = env.u.times[k];
            if !(t > t1 - dt + 1e-12 && t <= t1 - dt / 2.0 + 1e-12) {
                continue;
            }
            for i in 0..g.len() {
                let x = g.point(i);
                let d = norm(&[x[0] - x1[0], x[1] - x1[1]], n);
                if d >= r / 2.0 && d < r {
                    tot += 1;
                    let plane = dotn(p1, &[x[0] - x0[0], x[1] - x0[1]], n) + h1;
                    if env.u.values[k][i] - plane >= thr {
                        hit += 1;
                    }
                }
            }
        }
        if tot == 0 {
            continue;
        }
        radii.push(r);
        nodes.push(tot);
        fractions.push(hit as f64 / tot as f64);
    }
    let best = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let measured_c = if best.is_finite() { best * m } else { f64::INFINITY };
    Ok(RingReport {
        radii,
        fractions,
        nodes,
        measured_c,
        achieved: measured_c <= c_target,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeWitness {
    pub p: Point,
    pub h: f64,
    pub x: Point,
    pub t: f64,
    pub contact: bool,
    pub in_subdifferential: bool,
    /// `h(p, t_{k-1}) − h(p, t_k)`: the time-discretization slack around `h`.
    pub bracket: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeReport {
    pub tested: usize,
    pub witnessed: usize,
    pub max_bracket: f64,
    pub witnesses: Vec<ConeWitness>,
}

impl ConeReport {
    pub fn passed(&self) -> bool {
        self.tested > 0 && self.witnessed == self.tested
    }
}

/// Lattice of `h_count x p_count` points in `{h ∈ (-1, 0), |h| > 4|p|}`.
pub fn cone_lattice(n: usize, h_count: usize, p_count: usize) -> Vec<(Point, f64)> {
    let mut out = Vec::new();
    for a in 0..h_count {
        let h = -(a as f64 + 0.5) / h_count as f64;
        let pmax = 0.9 * h.abs() / 4.0;
        for b in 0..p_count {
            let s = if p_count > 1 { b as f64 / (p_count - 1) as f64 } else { 0.5 };
            let p = if n == 1 {
                [pmax * (2.0 * s - 1.0), 0.0]
            } else {
                let ang = 2.0 * PI * b as f64 / p_count as f64;
                [pmax * s * ang.cos(), pmax * s * ang.sin()]
            };
            out.push((p, h));
        }
    }
    out
}

/// Slide each cone plane forward in time from `t = -1` until it first
/// touches `ū` and verify the touching point is a contact point carrying `(p, h)`.
pub fn cone_inclusion_check(env: &Envelope, lattice: &[(Point, f64)]) -> ConeReport {
    let g = env.grid;
    let n = g.n;
    let x0 = env.x0();
    let witnesses: Vec<ConeWitness> = lattice
        .par_iter()
        .filter_map(|&(p, h)| {
            let mut prev = f64::INFINITY;
            for k in 0..env.len() {
                let ub = &env.monotone.sample.values[k];
                let (mut a, mut arg) = (f64::INFINITY, 0usize);
                for &i in &env.ball_nodes {
                    let x = g.point(i);
                    let v = ub[i] - dotn(&p, &[x[0] - x0[0], x[1] - x0[1]], n);
                    if v < a {
                        a = v;
                        arg = i;
                    }
                }
                let hk = env.legendre(k, &p);
                if a <= h {
                    let x = g.point(arg);
                    return Some(ConeWitness {
                        p,
                        h,
                        x,
                        t: env.u.times[k],
                        contact: env.is_contact(k, arg),
                        in_subdifferential: env.in_subdifferential(k, &x, &p, env.contact_tol),
                        bracket: if prev.is_finite() { prev - hk } else { 0.0 },
                    });
                }
                prev = hk;
            }
            None
        })
        .collect();
    let witnessed = witnesses
        .iter()
        .filter(|w| w.contact && w.in_subdifferential)
        .count();
    ConeReport {
        tested: lattice.len(),
        witnessed,
        max_bracket: witnesses.iter().map(|w| w.bracket).fold(0.0, f64::max),
        witnesses,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AbpOptions {
    pub sigma: f64,
    pub rho0: f64,
    /// The constant in the threshold `C 4^{-1/(2-σ)} f(t)`.
    pub c_threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbpReport {
    /// `1/2 + 9√n 2^{-1/(2-σ)} ρ0`, from the statement.
    pub statement_radius: f64,
    /// `9√n ρ0`, from the proof.
    pub proof_radius: f64,
    pub rhs_statement: f64,
    pub rhs_proof: f64,
    /// `(t, f(t), |A ∩ B_stmt|, |A ∩ B_proof|)` per slice.
    pub curve: Vec<(f64, f64, f64, f64)>,
}

impl AbpReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,f,measure_statement_ball,measure_proof_ball")?;
        for (t, f, a, b) in &self.curve {
            writeln!(w, "{},{},{},{}", fmt17(*t), fmt17(*f), fmt17(*a), fmt17(*b))?;
        }
        Ok(())
    }
}

/// Right-hand side `∫ f^{n+1} |{u < Γ + C 4^{-1/(2-σ)} f} ∩ B_ρ| dt` by slice-wise counting.
pub fn abp_inequality_check(env: &Envelope, f: &Field, opts: &AbpOptions) -> AbpReport {
    let g = env.grid;
    let n = g.n;
    let sq = (n as f64).sqrt();
    let rs = 0.5 + 9.0 * sq * 2f64.powf(-1.0 / (2.0 - opts.sigma)) * opts.rho0;
    let rp = 9.0 * sq * opts.rho0;
    let factor = opts.c_threshold * 4f64.powf(-1.0 / (2.0 - opts.sigma));
    let cell = g.cell_volume();
    let z = [0.0, 0.0];
    let mut curve = Vec::new();
    let (mut rhs_s, mut rhs_p) = (0.0, 0.0);
    for k in 1..env.len() {
        let t = env.u.times[k];
        if t <= -1.0 + 1e-12 {
            continue;
        }
        let dt = t - env.u.times[k - 1];
        let ft = f.eval(&z, t).max(0.0);
        let thr = (factor * ft).max(env.contact_tol);
        let (mut ms, mut mp) = (0.0, 0.0);
        for i in 0..g.len() {
            if env.u.values[k][i] - env.gamma(k, i) < thr {
                let r = norm(&g.point(i), n);
                if r < rs {
                    ms += cell;
                }
                if r < rp {
                    mp += cell;
                }
            }
        }
        let w = ft.powi(n as i32 + 1) * dt;
        rhs_s += w * ms;
        rhs_p += w * mp;
        curve.push((t, ft, ms, mp));
    }
    AbpReport {
        statement_radius: rs,
        proof_radius: rp,
        rhs_statement: rhs_s,
        rhs_proof: rhs_p,
        curve,
    }
}
