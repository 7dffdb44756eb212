//! Covering of the discrete contact set by space-time rectangles
//! `Q x I_l`, split dyadically until Γ is pinched, `Φ(K)` is small and `u`
//! stays close to Γ on a dilation.

use super::{default_flatness_eps, dotn, sup_on, Envelope, EnvelopeError};
use crate::field::Field;
use crate::grid::Point;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoveringOptions {
    pub rho0: f64,
    /// Width `Δt` of the time grid; slabs have length `Δt/2`.
    pub dt: f64,
    pub sigma: f64,
    /// Acceptance thresholds for the measured constants of (a), (b), (c).
    pub ca: f64,
    pub cb: f64,
    pub cc: f64,
    pub eps0: f64,
    pub max_generations: usize,
    /// Slope samples per axis when measuring `|Φ(K)|`.
    pub p_samples: usize,
}

impl CoveringOptions {
    pub fn new(n: usize, sigma: f64, rho0: f64, dt: f64) -> Self {
        CoveringOptions {
            rho0,
            dt,
            sigma,
            ca: 16.0,
            cb: 64.0,
            cc: 16.0,
            eps0: default_flatness_eps(n),
            max_generations: (2.0 / (2.0 - sigma)).ceil() as usize + 3,
            p_samples: if n == 1 { 64 } else { 24 },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Rectangle {
    pub center: Point,
    /// Half the side of the cube `Q`.
    pub half: f64,
    pub diameter: f64,
    pub generation: usize,
    /// Slab index: `I = (-(l+1)Δt/2, -lΔt/2)`.
    pub l: usize,
    pub contact_points: usize,
    pub f_norm: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub flag_a: bool,
    pub flag_b: bool,
    pub flag_c: bool,
}

impl Rectangle {
    pub fn accepted(&self) -> bool {
        self.flag_a && self.flag_b && self.flag_c
    }

    fn contains_closed(&self, x: &Point, n: usize) -> bool {
        (0..n).all(|k| (x[k] - self.center[k]).abs() <= self.half + 1e-12)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringRectangles {
    pub options: CoveringOptions,
    pub rectangles: Vec<Rectangle>,
    /// Rectangles still failing a flag at the generation cap or at grid resolution.
    pub unresolved: Vec<Rectangle>,
    pub generations: usize,
    pub contact_points: usize,
    /// Contact points not in the closure of any rectangle (should be 0).
    pub uncovered: usize,
}

impl CoveringRectangles {
    pub fn complete(&self) -> bool {
        self.unresolved.is_empty() && self.uncovered == 0
    }

    pub fn disjoint(&self) -> bool {
        let all: Vec<&Rectangle> = self.rectangles.iter().chain(&self.unresolved).collect();
        let n = if all.iter().any(|r| r.center[1] != 0.0) { 2 } else { 1 };
        for (a, r) in all.iter().enumerate() {
            for s in &all[a + 1..] {
                if r.l != s.l {
                    continue;
                }
                let overlap = (0..n).all(|k| (r.center[k] - s.center[k]).abs() < r.half + s.half - 1e-12);
                if overlap {
                    return false;
                }
            }
        }
        true
    }

    /// `max` of each measured constant over accepted rectangles.
    pub fn max_constants(&self) -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for r in &self.rectangles {
            m[0] = m[0].max(r.c_a);
            m[1] = m[1].max(r.c_b);
            m[2] = m[2].max(r.c_c);
        }
        m
    }
}

struct Ctx<'a> {
    env: &'a Envelope,
    f: &'a Field,
    opts: &'a CoveringOptions,
    contact: Vec<(usize, usize)>,
}

impl Ctx<'_> {
    fn slab(&self, l: usize) -> (f64, f64) {
        let half = self.opts.dt / 2.0;
        (-(l as f64 + 1.0) * half, -(l as f64) * half)
    }

    fn slices_in(&self, a: f64, b: f64) -> Vec<usize> {
        (0..self.env.len())
            .filter(|&k| {
                let t = self.env.u.times[k];
                t > a + 1e-12 && t <= b + 1e-12 && t > -1.0 + 1e-12
            })
            .collect()
    }

    fn nodes_in(&self, center: &Point, half: f64, closed: bool) -> Vec<usize> {
        let g = self.env.grid;
        let n = g.n;
        (0..g.len())
            .filter(|&i| {
                let x = g.point(i);
                (0..n).all(|k| {
                    let d = (x[k] - center[k]).abs();
                    if closed {
                        d <= half + 1e-12
                    } else {
                        d < half - 1e-12
                    }
                })
            })
            .collect()
    }

    fn measure(&self, center: Point, half: f64, l: usize, generation: usize) -> Option<Rectangle> {
        let env = self.env;
        let g = env.grid;
        let n = g.n;
        let opts = self.opts;
        let (a, b) = self.slab(l);
        let slices = self.slices_in(a, b);
        let mut r = Rectangle {
            center,
            half,
            diameter: 2.0 * half * (n as f64).sqrt(),
            generation,
            l,
            contact_points: 0,
            f_norm: sup_on(self.f, a, b).max(0.0),
            c_a: 0.0,
            c_b: 0.0,
            c_c: 0.0,
            flag_a: false,
            flag_b: false,
            flag_c: false,
        };
        let contacts: Vec<(usize, usize)> = self
            .contact
            .iter()
            .copied()
            .filter(|&(k, i)| slices.contains(&k) && r.contains_closed(&g.point(i), n))
            .collect();
        if contacts.is_empty() {
            return None;
        }
        r.contact_points = contacts.len();
        let d2 = r.diameter * r.diameter;
        let fd2 = (r.f_norm * d2).max(1e-300);
        let x0 = env.x0();
        let nodes = self.nodes_in(&center, half, true);

        // (a) pinching of Γ between the supporting plane of a contact point and a parallel copy
        let stride = (contacts.len() / 8).max(1);
        let mut best_a = f64::INFINITY;
        for &(k1, i1) in contacts.iter().step_by(stride) {
            let x1 = g.point(i1);
            for p in env.convex.hulls[k1].subgradients(&x1) {
                let h1 = env.legendre(k1, &p);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &k in &slices {
                    for &i in &nodes {
                        let x = g.point(i);
                        let d = env.gamma(k, i) - dotn(&p, &[x[0] - x0[0], x[1] - x0[1]], n) - h1;
                        lo = lo.min(d);
                        hi = hi.max(d);
                    }
                }
                best_a = best_a.min((hi - lo) / fd2);
            }
        }
        r.c_a = if best_a.is_finite() { best_a } else { 0.0 };

        // (b) |Φ(K)| by slope sampling: union over slices of [h(p, t_k), h(p, t_{k-1})]
        let (mut plo, mut phi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &k in &slices {
            for &i in &nodes {
                for p in env.convex.hulls[k].subgradients(&g.point(i)) {
                    for c in 0..n {
                        plo[c] = plo[c].min(p[c]);
                        phi[c] = phi[c].max(p[c]);
                    }
                }
            }
        }
        let mut phi_measure = 0.0;
        if plo[0].is_finite() {
            let m = opts.p_samples.max(2);
            let step: Vec<f64> = (0..n).map(|c| (phi[c] - plo[c]) / m as f64).collect();
            let cell: f64 = step.iter().product();
            if cell > 0.0 {
                let count = if n == 1 { m } else { m * m };
                for s in 0..count {
                    let ij = [s % m, s / m];
                    let mut p = [0.0; 2];
                    for c in 0..n {
                        p[c] = plo[c] + (ij[c] as f64 + 0.5) * step[c];
                    }
                    let mut len = 0.0;
                    for &k in &slices {
                        let hk = env.legendre(k, &p);
                        let touch = nodes
                            .iter()
                            .map(|&i| {
                                let x = g.point(i);
                                env.gamma(k, i) - dotn(&p, &[x[0] - x0[0], x[1] - x0[1]], n)
                            })
                            .fold(f64::INFINITY, f64::min);
                        if touch <= hk + env.contact_tol && k > 0 {
                            len += env.legendre(k - 1, &p) - hk;
                        }
                    }
                    phi_measure += len * cell;
                }
            }
        }
        let k_measure = (2.0 * half).powi(n as i32) * opts.dt / 2.0;
        r.c_b = phi_measure / (r.f_norm.powi(n as i32 + 1) * k_measure).max(1e-300);

        // (c) closeness of u to Γ on the dilation 16√n Q x [-(l+3)Δt/2, -lΔt/2]
        let wide = 16.0 * (n as f64).sqrt() * half;
        let wide_nodes = self.nodes_in(&center, wide, false);
        let wide_slices = self.slices_in(-(l as f64 + 3.0) * opts.dt / 2.0, b);
        let mut q: Vec<f64> = Vec::with_capacity(wide_nodes.len() * wide_slices.len());
        for &k in &wide_slices {
            for &i in &wide_nodes {
                q.push((env.u.values[k][i] - env.gamma(k, i)) / fd2);
            }
        }
        if !q.is_empty() {
            q.sort_by(|a, b| a.total_cmp(b));
            let idx = (((1.0 - opts.eps0) * q.len() as f64).ceil() as usize).clamp(1, q.len()) - 1;
            r.c_c = q[idx].max(0.0);
        }

        r.flag_a = r.c_a <= opts.ca;
        r.flag_b = r.c_b <= opts.cb;
        r.flag_c = r.c_c <= opts.cc;
        Some(r)
    }
}

/// Tile `B_1` by cubes of diameter `ρ0/4` per slab, drop those missing the
/// contact set, and split failing rectangles into `2^n` children.
pub fn contact_covering(env: &Envelope, f: &Field, opts: &CoveringOptions) -> Result<CoveringRectangles, EnvelopeError> {
    let g = env.grid;
    let n = g.n;
    if opts.dt / 2.0 < env.u.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) - 1e-12 {
        return Err(EnvelopeError::Precondition("slab length Δt/2 is below the trajectory time step".into()));
    }
    let contact = env.contact_set();
    let ctx = Ctx { env, f, opts, contact };
    let side0 = opts.rho0 / (4.0 * (n as f64).sqrt());
    let j = (1.0 / side0).ceil() as i64;
    let slabs = (2.0 / opts.dt).ceil() as usize;
    let mut rectangles = Vec::new();
    let mut unresolved = Vec::new();
    let mut generations = 0;
    let mut frontier: Vec<(Point, f64, usize)> = Vec::new();
    for l in 0..slabs {
        for a in -j..j {
            for b in if n == 1 { 0..1 } else { -j..j } {
                let c = [(a as f64 + 0.5) * side0, if n == 1 { 0.0 } else { (b as f64 + 0.5) * side0 }];
                frontier.push((c, side0 / 2.0, l));
            }
        }
    }
    let mut generation = 0;
    while !frontier.is_empty() {
        generations = generation + 1;
        let mut next = Vec::new();
        for (c, half, l) in frontier {
            let Some(r) = ctx.measure(c, half, l, generation) else {
                continue;
            };
            if r.accepted() {
                rectangles.push(r);
            } else if generation + 1 >= opts.max_generations || half < g.h {
                unresolved.push(r);
            } else {
                let q = half / 2.0;
                for s in 0..(1usize << n) {
                    let mut cc = c;
                    for k in 0..n {
                        cc[k] += if (s >> k) & 1 == 1 { q } else { -q };
                    }
                    next.push((cc, q, l));
                }
            }
        }
        frontier = next;
        generation += 1;
    }
    let all: Vec<&Rectangle> = rectangles.iter().chain(&unresolved).collect();
    let uncovered = ctx
        .contact
        .iter()
        .filter(|&&(k, i)| {
            let t = env.u.times[k];
            !all.iter().any(|r| {
                let (a, b) = ctx.slab(r.l);
                t > a + 1e-12 && t <= b + 1e-12 && r.contains_closed(&g.point(i), n)
            })
        })
        .count();
    Ok(CoveringRectangles {
        options: *opts,
        contact_points: ctx.contact.len(),
        rectangles,
        unresolved,
        generations,
        uncovered,
    })
}
