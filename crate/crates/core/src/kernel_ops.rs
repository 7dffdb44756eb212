//! Kernels, lattice weights and the linear, extremal and Isaacs operators.
//!
//! All operators share one lattice stencil. The integral over `|y|∞ ≤ (J+½)h`
//! is a weighted sum of second differences at lattice offsets; cell zero is
//! replaced by the quadratic model built from centered second differences;
//! beyond the stencil the exterior is replaced by its far-field limit and the
//! resulting error is bounded.
//!
//! Every weight is a positive combination `Σ a(y_q) c_q` of modulation values
//! with node coefficients `c_q` shared by all kernels, so the class bounds
//! `Λ⁻¹ ≤ a ≤ Λ` transfer to the weights and the extremal operators bound
//! every linear one term by term.

use crate::field::Field;
use crate::grid::{ExtendedSlice, Grid, Lattice, Point, SpatialSlice};
use crate::quadrature::{sphere_measure, Rule};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("truncation radius {reach} is smaller than the grid box radius {radius}")]
    ReachTooSmall { reach: f64, radius: f64 },
    #[error("kernel order {kernel} does not match stencil order {stencil}")]
    OrderMismatch { kernel: f64, stencil: f64 },
    #[error("Isaacs family is empty")]
    EmptyFamily,
    #[error("invalid class parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelClassParams {
    pub n: usize,
    pub sigma: f64,
    pub sigma0: f64,
    #[serde(rename = "lambda")]
    pub lambda: f64,
    pub rho0: f64,
}

impl KernelClassParams {
    pub fn new(n: usize, sigma: f64, sigma0: f64, lambda: f64, rho0: f64) -> Self {
        KernelClassParams {
            n,
            sigma,
            sigma0,
            lambda,
            rho0,
        }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        let bad = |s: String| Err(OperatorError::InvalidParams(s));
        if self.n != 1 && self.n != 2 {
            return bad(format!("n = {} (only 1 and 2 supported)", self.n));
        }
        if !(self.sigma0 > 0.0 && self.sigma0 < self.sigma && self.sigma < 2.0) {
            return bad(format!(
                "need 0 < sigma0 < sigma < 2, got sigma0 = {}, sigma = {}",
                self.sigma0, self.sigma
            ));
        }
        if !(self.lambda >= 1.0) {
            return bad(format!("lambda = {} < 1", self.lambda));
        }
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            return bad(format!("rho0 = {} outside (0,1)", self.rho0));
        }
        Ok(())
    }

    /// Radius of the measuring ball in the ABP statement.
    pub fn abp_ball_radius(&self) -> f64 {
        0.5 + 9.0 * (self.n as f64).sqrt() * 2f64.powf(-1.0 / (2.0 - self.sigma)) * self.rho0
    }

    pub fn validate_for_abp(&self) -> Result<(), OperatorError> {
        self.validate()?;
        let r = self.abp_ball_radius();
        if r >= 2.0 {
            return Err(OperatorError::InvalidParams(format!(
                "ABP measuring ball radius {r} is not below 2"
            )));
        }
        Ok(())
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        KernelClassParams { sigma, ..*self }
    }
}

/// Angular/radial modulation `a(y)` of `K(y) = (2−σ) a(y) |y|^{−n−σ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Modulation {
    Power {
        multiplier: f64,
    },
    /// Radial table; `step` selects piecewise-constant (value of the bracket's left node).
    Tabulated {
        radii: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        step: bool,
    },
    /// `base + amp · cos(freq |y| + phase) · cos(2 · angular · θ)`.
    Harmonic {
        base: f64,
        amp: f64,
        freq: f64,
        phase: f64,
        angular: u32,
    },
}

impl Modulation {
    pub fn eval(&self, y: &Point, n: usize) -> f64 {
        match self {
            Modulation::Power { multiplier } => *multiplier,
            Modulation::Tabulated {
                radii,
                values,
                step,
            } => {
                let r = crate::grid::norm(y, n);
                tabulated(radii, values, *step, r)
            }
            Modulation::Harmonic {
                base,
                amp,
                freq,
                phase,
                angular,
            } => {
                let r = crate::grid::norm(y, n);
                let ang = if n == 1 || *angular == 0 {
                    1.0
                } else {
                    (2.0 * *angular as f64 * y[1].atan2(y[0])).cos()
                };
                base + amp * (freq * r + phase).cos() * ang
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Modulation::Power { multiplier } => (*multiplier, *multiplier),
            Modulation::Tabulated { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(*v), hi.max(*v))
                }),
            Modulation::Harmonic { base, amp, .. } => (base - amp.abs(), base + amp.abs()),
        }
    }
}

fn tabulated(radii: &[f64], values: &[f64], step: bool, r: f64) -> f64 {
    if radii.is_empty() {
        return 1.0;
    }
    if r <= radii[0] {
        return values[0];
    }
    let last = radii.len() - 1;
    if r >= radii[last] {
        return values[last];
    }
    let k = radii.partition_point(|&x| x <= r) - 1;
    if step {
        values[k]
    } else {
        let s = (r - radii[k]) / (radii[k + 1] - radii[k]);
        values[k] + s * (values[k + 1] - values[k])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelClass {
    L0,
    L1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernel {
    pub n: usize,
    pub sigma: f64,
    pub modulation: Modulation,
    #[serde(default = "default_class")]
    pub class: KernelClass,
}

fn default_class() -> KernelClass {
    KernelClass::L0
}

impl Kernel {
    pub fn power(n: usize, sigma: f64, multiplier: f64) -> Self {
        Kernel {
            n,
            sigma,
            modulation: Modulation::Power { multiplier },
            class: KernelClass::L0,
        }
    }

    pub fn eval(&self, y: &Point) -> f64 {
        let r = crate::grid::norm(y, self.n);
        (2.0 - self.sigma) * self.modulation.eval(y, self.n) * r.powf(-(self.n as f64) - self.sigma)
    }

    pub fn in_class(&self, params: &KernelClassParams) -> bool {
        let (lo, hi) = self.modulation.bounds();
        let eps = 1e-12;
        lo >= 1.0 / params.lambda - eps && hi <= params.lambda + eps
    }

    /// Random smooth L0 kernel with modulation inside `[Λ⁻¹, Λ]`.
    pub fn random_l0(rng: &mut impl Rng, params: &KernelClassParams) -> Self {
        let lo = 1.0 / params.lambda;
        let hi = params.lambda;
        let base = rng.gen_range(lo..=hi);
        let room = (base - lo).min(hi - base);
        let amp = rng.gen_range(0.0..=1.0) * room;
        let modulation = Modulation::Harmonic {
            base,
            amp,
            freq: rng.gen_range(0.0..6.0),
            phase: rng.gen_range(0.0..2.0 * PI),
            angular: rng.gen_range(0..3),
        };
        Kernel {
            n: params.n,
            sigma: params.sigma,
            modulation,
            class: KernelClass::L0,
        }
    }
}

/// `ω(y) = 1 / (1 + |y|^{n+σ})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub n: usize,
    pub sigma: f64,
}

impl Weight {
    pub fn eval(&self, y: &Point) -> f64 {
        1.0 / (1.0 + crate::grid::norm(y, self.n).powf(self.n as f64 + self.sigma))
    }
}

/// Half-width of the direction fan used for the innermost 2D cells.
const WIDE_FAN: i64 = 2;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    slot: u32,
    y: Point,
    c: f64,
}

/// Per-kernel weights on the half stencil plus the mass of the far region.
#[derive(Clone, Debug)]
pub struct Weights {
    pub omega: Vec<f64>,
    pub tail: f64,
}

impl Weights {
    pub fn mass(&self) -> f64 {
        self.omega.iter().sum::<f64>() + self.tail
    }
}

/// Lattice offsets `j` with first nonzero coordinate positive, `|j|∞ ≤ J`.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub n: usize,
    pub sigma: f64,
    pub h: f64,
    pub reach: i64,
    pub offsets: Vec<Lattice>,
    pub unit: Weights,
    nodes: Vec<Node>,
    tail_nodes: Vec<(Point, f64)>,
}

impl Stencil {
    /// Stencil whose lattice cube reaches at least `radius` in every axis.
    pub fn new(n: usize, sigma: f64, h: f64, radius: f64) -> Self {
        assert!(n == 1 || n == 2);
        assert!(sigma > 0.0 && sigma < 2.0);
        let reach = ((radius / h) - 1e-9).ceil().max(1.0) as i64;
        let mut offsets = Vec::new();
        if n == 1 {
            for a in 1..=reach {
                offsets.push([a, 0]);
            }
        } else {
            for a in 0..=reach {
                for b in -reach..=reach {
                    if a > 0 || b > 0 {
                        offsets.push([a, b]);
                    }
                }
            }
        }
        let slot_of = |l: Lattice| -> u32 {
            if n == 1 {
                (l[0] - 1) as u32
            } else {
                // a = 0 row only holds b > 0
                let a = l[0];
                if a == 0 {
                    (l[1] - 1) as u32
                } else {
                    (reach + (a - 1) * (2 * reach + 1) + (l[1] + reach)) as u32
                }
            }
        };
        debug_assert!(offsets
            .iter()
            .enumerate()
            .all(|(i, l)| slot_of(*l) as usize == i));

        // In 2D the nodes of the innermost cells are charged to the
        // closest of a fan of primitive lattice directions instead of their
        // own cell, which resolves the sign of δ by angle.
        let wide = WIDE_FAN.min(reach);
        let fan: Vec<(u32, Point, f64)> = offsets
            .iter()
            .filter(|l| l[0].abs().max(l[1].abs()) <= wide && gcd(l[0].abs(), l[1].abs()) == 1)
            .map(|l| {
                let v = [l[0] as f64 * h, l[1] as f64 * h];
                let len2 = v[0] * v[0] + v[1] * v[1];
                let len = len2.sqrt();
                (slot_of(*l), [v[0] / len, v[1] / len], len2)
            })
            .collect();
        let nearest = |y: &Point| -> (u32, f64) {
            let mut best = (0u32, 1.0, f64::NEG_INFINITY);
            for (slot, d, len2) in &fan {
                let c = (y[0] * d[0] + y[1] * d[1]).abs();
                if c > best.2 {
                    best = (*slot, *len2, c);
                }
            }
            (best.0, best.1)
        };

        let nf = n as f64;
        let mut nodes = Vec::new();
        let near_rule = |c: f64| Rule::composite(6, c - 0.5 * h, c + 0.5 * h, 2);
        let far_rule = |c: f64| Rule::on_interval(if n == 1 { 4 } else { 3 }, c - 0.5 * h, c + 0.5 * h);
        for (slot, l) in offsets.iter().enumerate() {
            let yc = [l[0] as f64 * h, l[1] as f64 * h];
            let yc2 = yc[0] * yc[0] + yc[1] * yc[1];
            let near = l[0].abs().max(l[1].abs()) <= 2;
            let rx = if near { near_rule(yc[0]) } else { far_rule(yc[0]) };
            // pair cell −j has the same modulation values by symmetry
            let push = |nodes: &mut Vec<Node>, y: Point, w: f64| {
                let r2 = y[0] * y[0] + y[1] * y[1];
                let (slot, len2) = if n == 2 && near {
                    nearest(&y)
                } else {
                    (slot as u32, yc2)
                };
                let c = 2.0 * w * (2.0 - sigma) * r2.powf(0.5 * (2.0 - nf - sigma)) / len2;
                nodes.push(Node { slot, y, c });
            };
            if n == 1 {
                for (x, w) in rx.nodes.iter().zip(&rx.weights) {
                    push(&mut nodes, [*x, 0.0], *w);
                }
            } else {
                let ry = if near { near_rule(yc[1]) } else { far_rule(yc[1]) };
                for (x, wx) in rx.nodes.iter().zip(&rx.weights) {
                    for (y, wy) in ry.nodes.iter().zip(&ry.weights) {
                        push(&mut nodes, [*x, *y], wx * wy);
                    }
                }
            }
        }

        // Cell zero: ∫ y_i² K over the cell, in polar form with r = ρ s^{1/(2−σ)}.
        let s_rule = Rule::composite(12, 0.0, 1.0, 2);
        let e = 1.0 / (2.0 - sigma);
        let rho0 = 0.5 * h;
        if n == 1 {
            for dir in [1.0, -1.0] {
                for (s, ws) in s_rule.nodes.iter().zip(&s_rule.weights) {
                    let y = [dir * rho0 * s.powf(e), 0.0];
                    let c = ws * rho0.powf(2.0 - sigma) / (h * h);
                    nodes.push(Node { slot: 0, y, c });
                }
            }
        } else {
            for oct in 0..8 {
                let th = Rule::on_interval(12, oct as f64 * PI / 4.0, (oct + 1) as f64 * PI / 4.0);
                for (t, wt) in th.nodes.iter().zip(&th.weights) {
                    let (sn, cs) = t.sin_cos();
                    let rho = rho0 / cs.abs().max(sn.abs());
                    let (slot, len2) = nearest(&[cs, sn]);
                    for (s, ws) in s_rule.nodes.iter().zip(&s_rule.weights) {
                        let r = rho * s.powf(e);
                        let y = [r * cs, r * sn];
                        let c = wt * ws * rho.powf(2.0 - sigma) / len2;
                        nodes.push(Node { slot, y, c });
                    }
                }
            }
        }

        // Far region |y|∞ > L = (J+½)h, with r = ρ s^{−1/σ}.
        let big_l = (reach as f64 + 0.5) * h;
        let t_rule = Rule::composite(16, 0.0, 1.0, 4);
        let mut tail_nodes = Vec::new();
        let k = (2.0 - sigma) / sigma;
        if n == 1 {
            for dir in [1.0, -1.0] {
                for (s, ws) in t_rule.nodes.iter().zip(&t_rule.weights) {
                    let y = [dir * big_l * s.powf(-1.0 / sigma), 0.0];
                    tail_nodes.push((y, k * big_l.powf(-sigma) * ws));
                }
            }
        } else {
            for oct in 0..8 {
                let th = Rule::on_interval(12, oct as f64 * PI / 4.0, (oct + 1) as f64 * PI / 4.0);
                for (t, wt) in th.nodes.iter().zip(&th.weights) {
                    let (sn, cs) = t.sin_cos();
                    let rho = big_l / cs.abs().max(sn.abs());
                    for (s, ws) in t_rule.nodes.iter().zip(&t_rule.weights) {
                        let r = rho * s.powf(-1.0 / sigma);
                        tail_nodes.push(([r * cs, r * sn], k * rho.powf(-sigma) * wt * ws));
                    }
                }
            }
        }

        let mut st = Stencil {
            n,
            sigma,
            h,
            reach,
            offsets,
            unit: Weights {
                omega: vec![],
                tail: 0.0,
            },
            nodes,
            tail_nodes,
        };
        st.unit = st.accumulate(|_| 1.0);
        st
    }

    /// Radius in space units out to which the stencil samples the lattice.
    pub fn far_radius(&self) -> f64 {
        (self.reach as f64 + 0.5) * self.h
    }

    fn accumulate(&self, a: impl Fn(&Point) -> f64) -> Weights {
        let mut omega = vec![0.0; self.offsets.len()];
        for nd in &self.nodes {
            omega[nd.slot as usize] += a(&nd.y) * nd.c;
        }
        let tail = self.tail_nodes.iter().map(|(y, c)| a(y) * c).sum();
        Weights { omega, tail }
    }

    pub fn weights(&self, kernel: &Kernel) -> Result<Weights, OperatorError> {
        if (kernel.sigma - self.sigma).abs() > 1e-14 || kernel.n != self.n {
            return Err(OperatorError::OrderMismatch {
                kernel: kernel.sigma,
                stencil: self.sigma,
            });
        }
        Ok(self.accumulate(|y| kernel.modulation.eval(y, self.n)))
    }

    /// Far-field model at lattice point `x`: the limit of the exterior and a
    /// bound on how far the exterior may deviate from it beyond the stencil.
    pub fn far_model(&self, slice: &SpatialSlice, x: Lattice) -> FarModel {
        let g = &slice.exterior;
        let limit = g.far_limit(slice.t);
        let xs = slice.grid.coord(x);
        let xinf = xs[..self.n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let r = self.far_radius() - xinf;
        let deviation = if r > slice.grid.radius() {
            g.far_deviation(r)
        } else {
            // far offsets may land back inside the box
            let sup = slice.values.iter().fold(0.0f64, |m, v| m.max((v - limit).abs()));
            sup.max(g.far_deviation(r.max(0.0)))
        };
        FarModel { limit, deviation }
    }

    pub fn linear_at(&self, w: &Weights, ext: &ExtendedSlice, x: Lattice, far: FarModel) -> Evaluation {
        let (ix, u0) = (ext.flat(x), ext.get(x));
        let vals = &ext.values;
        let mut v = 0.0;
        for (j, om) in self.offsets.iter().zip(&w.omega) {
            let d = ext.shift(*j);
            v += om * (0.5 * (vals[ix.wrapping_add_signed(d)] + vals[ix.wrapping_add_signed(-d)]) - u0);
        }
        v += w.tail * (far.limit - ext.get(x));
        Evaluation {
            value: v,
            error_bound: w.tail * far.deviation,
        }
    }

    /// `Σ ω (Λ δ⁺ − Λ⁻¹ δ⁻)` for `plus`, coefficients swapped otherwise.
    pub fn extremal_at(&self, lambda: f64, plus: bool, ext: &ExtendedSlice, x: Lattice, far: FarModel) -> Evaluation {
        let (cp, cm) = if plus { (lambda, 1.0 / lambda) } else { (1.0 / lambda, lambda) };
        let split = |d: f64| if d > 0.0 { cp * d } else { cm * d };
        let (ix, u0) = (ext.flat(x), ext.get(x));
        let vals = &ext.values;
        let mut v = 0.0;
        for (j, om) in self.offsets.iter().zip(&self.unit.omega) {
            let d = ext.shift(*j);
            v += om * split(0.5 * (vals[ix.wrapping_add_signed(d)] + vals[ix.wrapping_add_signed(-d)]) - u0);
        }
        v += self.unit.tail * split(far.limit - ext.get(x));
        Evaluation {
            value: v,
            error_bound: lambda * self.unit.tail * far.deviation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarModel {
    pub limit: f64,
    pub deviation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub error_bound: f64,
}

/// `δ(u, x; y) = ½(u(x+y) + u(x−y)) − u(x)` for lattice `x` and offset `y`.
pub fn second_difference(u: &SpatialSlice, x: Lattice, y: Lattice) -> f64 {
    0.5 * (u.at([x[0] + y[0], x[1] + y[1]]) + u.at([x[0] - y[0], x[1] - y[1]])) - u.at(x)
}

/// Isaacs family: `inf_β sup_α L_{α,β}` (or `sup_α inf_β` when `sup_inf`).
/// Outer index is β.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsaacsFamily {
    pub kernels: Vec<Vec<Kernel>>,
    #[serde(default)]
    pub sup_inf: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Single { kernel: Kernel },
    ExtremalPlus,
    ExtremalMinus,
    Isaacs { family: IsaacsFamily },
}

#[derive(Clone, Debug)]
enum Compiled {
    Single(Weights),
    Extremal { plus: bool },
    Isaacs { weights: Vec<Vec<Weights>>, sup_inf: bool },
}

/// An operator bound to a grid spacing and truncation radius.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub params: KernelClassParams,
    pub stencil: Arc<Stencil>,
    compiled: Compiled,
}

impl DiscreteOperator {
    pub fn new(spec: &OperatorSpec, params: &KernelClassParams, grid: &Grid, reach: f64) -> Result<Self, OperatorError> {
        let stencil = Arc::new(Stencil::new(params.n, params.sigma, grid.h, reach));
        Self::with_stencil(spec, params, grid, stencil)
    }

    pub fn with_stencil(
        spec: &OperatorSpec,
        params: &KernelClassParams,
        grid: &Grid,
        stencil: Arc<Stencil>,
    ) -> Result<Self, OperatorError> {
        if stencil.far_radius() < grid.radius() {
            return Err(OperatorError::ReachTooSmall {
                reach: stencil.far_radius(),
                radius: grid.radius(),
            });
        }
        let compiled = match spec {
            OperatorSpec::Single { kernel } => Compiled::Single(stencil.weights(kernel)?),
            OperatorSpec::ExtremalPlus => Compiled::Extremal { plus: true },
            OperatorSpec::ExtremalMinus => Compiled::Extremal { plus: false },
            OperatorSpec::Isaacs { family } => {
                if family.kernels.is_empty() || family.kernels.iter().any(|r| r.is_empty()) {
                    return Err(OperatorError::EmptyFamily);
                }
                let weights = family
                    .kernels
                    .iter()
                    .map(|row| row.iter().map(|k| stencil.weights(k)).collect())
                    .collect::<Result<Vec<Vec<_>>, _>>()?;
                if weights.len() == 1 && weights[0].len() == 1 {
                    Compiled::Single(weights[0][0].clone())
                } else {
                    Compiled::Isaacs {
                        weights,
                        sup_inf: family.sup_inf,
                    }
                }
            }
        };
        Ok(DiscreteOperator {
            params: *params,
            stencil,
            compiled,
        })
    }

    /// Largest coefficient sum multiplying `u(x)`; its reciprocal is the CFL step.
    pub fn rate_bound(&self) -> f64 {
        match &self.compiled {
            Compiled::Single(w) => w.mass(),
            Compiled::Extremal { .. } => self.params.lambda * self.stencil.unit.mass(),
            Compiled::Isaacs { weights, .. } => weights
                .iter()
                .flatten()
                .map(Weights::mass)
                .fold(0.0, f64::max),
        }
    }

    pub fn eval_at(&self, slice: &SpatialSlice, ext: &ExtendedSlice, x: Lattice) -> Evaluation {
        let far = self.stencil.far_model(slice, x);
        self.eval_with(ext, x, far)
    }

    pub fn eval_with(&self, ext: &ExtendedSlice, x: Lattice, far: FarModel) -> Evaluation {
        let st = &self.stencil;
        match &self.compiled {
            Compiled::Single(w) => st.linear_at(w, ext, x, far),
            Compiled::Extremal { plus } => st.extremal_at(self.params.lambda, *plus, ext, x, far),
            Compiled::Isaacs { weights, sup_inf } => {
                let mut err: f64 = 0.0;
                let vals: Vec<Vec<f64>> = weights
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|w| {
                                let e = st.linear_at(w, ext, x, far);
                                err = err.max(e.error_bound);
                                e.value
                            })
                            .collect()
                    })
                    .collect();
                let value = if *sup_inf {
                    // sup over α of inf over β
                    let na = vals[0].len();
                    (0..na)
                        .map(|a| vals.iter().map(|r| r[a]).fold(f64::INFINITY, f64::min))
                        .fold(f64::NEG_INFINITY, f64::max)
                } else {
                    vals.iter()
                        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                        .fold(f64::INFINITY, f64::min)
                };
                Evaluation {
                    value,
                    error_bound: err,
                }
            }
        }
    }

    /// Evaluate at every node of the slice's grid.
    pub fn apply_all(&self, slice: &SpatialSlice) -> Vec<Evaluation> {
        let ext = slice.extend(self.stencil.reach);
        (0..slice.grid.len())
            .into_par_iter()
            .map(|i| self.eval_at(slice, &ext, slice.grid.lattice(i)))
            .collect()
    }
}

fn check_reach(slice: &SpatialSlice, reach: f64) -> Result<(), OperatorError> {
    if reach < slice.grid.radius() {
        return Err(OperatorError::ReachTooSmall {
            reach,
            radius: slice.grid.radius(),
        });
    }
    Ok(())
}

fn one_shot(spec: OperatorSpec, params: &KernelClassParams, u: &SpatialSlice, x: Lattice, reach: f64) -> Result<Evaluation, OperatorError> {
    check_reach(u, reach)?;
    let op = DiscreteOperator::new(&spec, params, &u.grid, reach)?;
    let ext = u.extend(op.stencil.reach);
    Ok(op.eval_at(u, &ext, x))
}

/// One-off evaluation of `∫ δ K` at a lattice point. For many points build a
/// [`DiscreteOperator`] instead.
pub fn apply_linear(kernel: &Kernel, u: &SpatialSlice, x: Lattice, reach: f64) -> Result<Evaluation, OperatorError> {
    let params = KernelClassParams::new(kernel.n, kernel.sigma, kernel.sigma * 0.5, 1.0, 0.5);
    one_shot(OperatorSpec::Single { kernel: kernel.clone() }, &params, u, x, reach)
}

pub fn extremal_plus(params: &KernelClassParams, u: &SpatialSlice, x: Lattice, reach: f64) -> Result<Evaluation, OperatorError> {
    one_shot(OperatorSpec::ExtremalPlus, params, u, x, reach)
}

pub fn extremal_minus(params: &KernelClassParams, u: &SpatialSlice, x: Lattice, reach: f64) -> Result<Evaluation, OperatorError> {
    one_shot(OperatorSpec::ExtremalMinus, params, u, x, reach)
}

pub fn isaacs_apply(family: &IsaacsFamily, u: &SpatialSlice, x: Lattice, reach: f64) -> Result<Evaluation, OperatorError> {
    let k = family
        .kernels
        .first()
        .and_then(|r| r.first())
        .ok_or(OperatorError::EmptyFamily)?;
    let lambda = family
        .kernels
        .iter()
        .flatten()
        .map(|k| {
            let (lo, hi) = k.modulation.bounds();
            hi.max(1.0 / lo)
        })
        .fold(1.0, f64::max);
    let params = KernelClassParams::new(k.n, k.sigma, k.sigma * 0.5, lambda, 0.5);
    one_shot(OperatorSpec::Isaacs { family: family.clone() }, &params, u, x, reach)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L1Check {
    pub passed: bool,
    pub measured_max: f64,
    pub per_shift: Vec<(f64, f64)>,
}

/// Measure `sup_h ∫_{|y|>ρ₀} |K(y) − K(y−h)| / |h| dy` over shifts
/// `|h| = ρ₀/2 · 2^{−k}`, `k < levels`.
pub fn l1_smoothness_check(kernel: &Kernel, params: &KernelClassParams, levels: usize, tol: f64) -> L1Check {
    let rho0 = params.rho0;
    let n = kernel.n;
    let sigma = kernel.sigma;
    let mut breaks = match &kernel.modulation {
        Modulation::Tabulated { radii, .. } => radii.clone(),
        _ => vec![],
    };
    breaks.retain(|r| *r > rho0);
    let mut per_shift = Vec::new();
    for k in 0..levels {
        let hm = 0.5 * rho0 * 0.5f64.powi(k as i32);
        let dirs: Vec<Point> = if n == 1 {
            vec![[1.0, 0.0]]
        } else {
            vec![[1.0, 0.0], [0.6, 0.8], [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]]
        };
        let mut worst: f64 = 0.0;
        for d in dirs {
            let hv = [hm * d[0], hm * d[1]];
            let integrand = |y: &Point| {
                let a = kernel.eval(y);
                let b = kernel.eval(&[y[0] - hv[0], y[1] - hv[1]]);
                (a - b).abs() / hm
            };
            let v = if n == 1 {
                // breakpoints at the table radii and at their shifts
                let mut pts = vec![rho0];
                for r in &breaks {
                    pts.push(*r);
                    pts.push(r + hm);
                }
                pts.push(rho0 + hm);
                let rmax = 64.0f64.max(pts.iter().cloned().fold(0.0, f64::max) * 4.0);
                pts.push(rmax);
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
                let mut acc = 0.0;
                for side in [1.0, -1.0] {
                    for w in pts.windows(2) {
                        let rule = Rule::composite(8, w[0], w[1], 16);
                        acc += rule.integrate(|r| integrand(&[side * r, 0.0]));
                    }
                    // beyond rmax: |K(y)−K(y−h)| ≲ (n+σ)|h| K/|y| , bounded analytically
                }
                acc
            } else {
                let mut radial = vec![rho0];
                for r in &breaks {
                    radial.push(r - hm);
                    radial.push(r + hm);
                }
                let rmax = 32.0f64.max(radial.iter().cloned().fold(0.0, f64::max) * 4.0);
                radial.push(rmax);
                radial.retain(|r| *r >= rho0);
                radial.sort_by(|a, b| a.partial_cmp(b).unwrap());
                radial.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
                let th = Rule::composite(8, 0.0, 2.0 * PI, 32);
                let mut acc = 0.0;
                for w in radial.windows(2) {
                    let rr = Rule::composite(8, w[0], w[1], 24);
                    for (t, wt) in th.nodes.iter().zip(&th.weights) {
                        let (s, c) = t.sin_cos();
                        acc += wt * rr.integrate(|r| r * integrand(&[r * c, r * s]));
                    }
                }
                acc
            };
            worst = worst.max(v);
        }
        let _ = sigma;
        per_shift.push((hm, worst));
    }
    let measured_max = per_shift.iter().map(|p| p.1).fold(0.0, f64::max);
    L1Check {
        passed: measured_max <= params.lambda * (1.0 + tol),
        measured_max,
        per_shift,
    }
}

/// `‖u‖_{L¹(ω)}`: trapezoid sum on the box plus quadrature of the exterior
/// outside it (substitution `r = ρ/s`).
pub fn weighted_norm(u: &SpatialSlice, w: &Weight) -> f64 {
    let g = &u.grid;
    let n = g.n;
    let m = g.m;
    let vol = g.cell_volume();
    let mut inner = 0.0;
    for (i, x) in g.points() {
        let l = g.lattice(i);
        let mut wt = vol;
        for ax in 0..n {
            if l[ax].abs() == m {
                wt *= 0.5;
            }
        }
        inner += wt * u.values[i].abs() * w.eval(&x);
    }
    let rho_box = g.radius();
    let s_rule = Rule::composite(16, 0.0, 1.0, 16);
    let ext = &u.exterior;
    let t = u.t;
    let outer = if n == 1 {
        let mut acc = 0.0;
        for dir in [1.0, -1.0] {
            acc += s_rule.integrate(|s| {
                let r = rho_box / s;
                let y = [dir * r, 0.0];
                ext.eval(&y[..1], t).abs() * w.eval(&y) * rho_box / (s * s)
            });
        }
        acc
    } else {
        let mut acc = 0.0;
        for oct in 0..8 {
            let th = Rule::on_interval(16, oct as f64 * PI / 4.0, (oct + 1) as f64 * PI / 4.0);
            for (tt, wt) in th.nodes.iter().zip(&th.weights) {
                let (sn, cs) = tt.sin_cos();
                let rho = rho_box / cs.abs().max(sn.abs());
                acc += wt
                    * s_rule.integrate(|s| {
                        let r = rho / s;
                        let y = [r * cs, r * sn];
                        ext.eval(&y, t).abs() * w.eval(&y) * r * rho / (s * s)
                    });
            }
        }
        acc
    };
    let _ = sphere_measure(n);
    inner + outer
}

/// Total mass `∫_{|y|>r} (2−σ)|y|^{−n−σ} dy` of the unit kernel outside a ball.
pub fn unit_tail_mass(n: usize, sigma: f64, r: f64) -> f64 {
    (2.0 - sigma) * sphere_measure(n) * r.powf(-sigma) / sigma
}

/// Convenience: sample a field on a grid and evaluate an operator at all nodes.
pub fn apply_field(op: &DiscreteOperator, grid: Grid, u: &Field, t: f64) -> Vec<Evaluation> {
    op.apply_all(&SpatialSlice::sample(grid, u, t))
}
