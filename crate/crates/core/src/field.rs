//! Analytic space-time fields: initial data, exterior data and right-hand sides.
//!
//! Every field knows a bound on its values and how it behaves far from the
//! origin. The operators use that far-field model to account for the part of
//! the integral beyond the truncation radius.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Code-defined field. Not serializable.
pub trait FieldFn: Send + Sync {
    fn eval(&self, x: &[f64], t: f64) -> f64;
    fn sup_abs(&self) -> f64 {
        f64::INFINITY
    }
    fn far_limit(&self, _t: f64) -> f64 {
        0.0
    }
    /// Bound on `|g(x,t) - far_limit(t)|` over `|x| >= r` and all `t`.
    fn far_deviation(&self, _r: f64) -> f64 {
        self.sup_abs()
    }
}

struct ClosureField<F> {
    f: F,
    sup: f64,
}

impl<F: Fn(&[f64], f64) -> f64 + Send + Sync> FieldFn for ClosureField<F> {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.f)(x, t)
    }
    fn sup_abs(&self) -> f64 {
        self.sup
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub wavevector: Vec<f64>,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Field {
    Zero,
    Constant {
        value: f64,
    },
    /// `a · x + b`.
    Affine {
        slope: Vec<f64>,
        offset: f64,
    },
    /// `slope · t + offset`, constant in space.
    TimeAffine {
        slope: f64,
        offset: f64,
    },
    /// `amplitude · exp(-|x - center|² / width²)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// `(c (t - t_on) + χ_{r_in < |x| < r_out}) χ_{t >= t_on}`.
    RampPlusAnnulus {
        c: f64,
        t_on: f64,
        r_in: f64,
        r_out: f64,
    },
    /// Indicator of the ball `|x - center| < radius`.
    BallIndicator {
        radius: f64,
        center: Vec<f64>,
    },
    /// `Σ a_k cos(k·x + φ_k)`; a bounded rough profile.
    Fourier {
        modes: Vec<FourierMode>,
    },
    /// Time profile `base + Σ a_k sin(ω_k t + φ_k)`, constant in space.
    TimeFourier {
        base: f64,
        modes: Vec<(f64, f64, f64)>,
    },
    /// Smooth bump `amplitude · exp(1 - 1/(1 - |x-c|²/r²))` inside the ball, 0 outside.
    Bump {
        amplitude: f64,
        radius: f64,
        center: Vec<f64>,
    },
    Sum {
        terms: Vec<Field>,
    },
    Product {
        left: Box<Field>,
        right: Box<Field>,
    },
    Scale {
        factor: f64,
        inner: Box<Field>,
    },
    /// `inner(x - shift, t)`.
    Shift {
        shift: Vec<f64>,
        inner: Box<Field>,
    },
    /// `inner · χ_{|x| < radius}`.
    Truncate {
        radius: f64,
        inner: Box<Field>,
    },
    /// `max(inner, 0)`.
    PositivePart {
        inner: Box<Field>,
    },
    #[serde(skip)]
    Custom(Arc<dyn FieldFn>),
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Custom(_) => write!(f, "Custom(..)"),
            other => write!(
                f,
                "{}",
                serde_json::to_string(other).unwrap_or_else(|_| "<field>".into())
            ),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let d = v - c.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum()
}

impl Field {
    pub fn constant(value: f64) -> Self {
        Field::Constant { value }
    }

    pub fn from_fn<F>(sup_abs: f64, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Field::Custom(Arc::new(ClosureField { f, sup: sup_abs }))
    }

    pub fn custom(f: impl FieldFn + 'static) -> Self {
        Field::Custom(Arc::new(f))
    }

    pub fn scaled(self, factor: f64) -> Self {
        Field::Scale {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn plus(self, other: Field) -> Self {
        Field::Sum {
            terms: vec![self, other],
        }
    }

    pub fn times(self, other: Field) -> Self {
        Field::Product {
            left: Box::new(self),
            right: Box::new(other),
        }
    }

    pub fn shifted(self, shift: Vec<f64>) -> Self {
        Field::Shift {
            shift,
            inner: Box::new(self),
        }
    }

    pub fn truncated(self, radius: f64) -> Self {
        Field::Truncate {
            radius,
            inner: Box::new(self),
        }
    }

    /// Random bounded smooth profile with `modes` Fourier terms, `|value| <= amplitude`.
    pub fn random_fourier(seed: u64, n: usize, modes: usize, amplitude: f64, max_freq: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw: Vec<FourierMode> = (0..modes)
            .map(|_| FourierMode {
                wavevector: (0..n).map(|_| rng.gen_range(-max_freq..max_freq)).collect(),
                amplitude: rng.gen_range(-1.0..1.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        let total: f64 = raw.iter().map(|m| m.amplitude.abs()).sum();
        if total > 0.0 {
            for m in &mut raw {
                m.amplitude *= amplitude / total;
            }
        }
        Field::Fourier { modes: raw }
    }

    /// Random positive time profile with values in `[lo, hi]`.
    pub fn random_time_profile(seed: u64, lo: f64, hi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = 0.5 * (lo + hi);
        let spread = 0.5 * (hi - lo);
        let k = 3;
        let mut modes = Vec::new();
        let mut budget = spread;
        for i in 0..k {
            let a = if i + 1 == k { budget } else { rng.gen_range(0.0..budget) };
            budget -= a;
            modes.push((a, rng.gen_range(0.5..6.0), rng.gen_range(0.0..std::f64::consts::TAU)));
        }
        Field::TimeFourier { base, modes }
    }

    pub fn is_serializable(&self) -> bool {
        match self {
            Field::Custom(_) => false,
            Field::Sum { terms } => terms.iter().all(Field::is_serializable),
            Field::Product { left, right } => left.is_serializable() && right.is_serializable(),
            Field::Scale { inner, .. }
            | Field::Shift { inner, .. }
            | Field::Truncate { inner, .. }
            | Field::PositivePart { inner } => inner.is_serializable(),
            _ => true,
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Field::Zero => 0.0,
            Field::Constant { value } => *value,
            Field::Affine { slope, offset } => {
                offset + x.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>()
            }
            Field::TimeAffine { slope, offset } => slope * t + offset,
            Field::Gaussian {
                amplitude,
                width,
                center,
            } => amplitude * (-dist2(x, center) / (width * width)).exp(),
            Field::RampPlusAnnulus { c, t_on, r_in, r_out } => {
                if t < *t_on {
                    0.0
                } else {
                    let r = norm(x);
                    let ring = if r > *r_in && r < *r_out { 1.0 } else { 0.0 };
                    c * (t - t_on) + ring
                }
            }
            Field::BallIndicator { radius, center } => {
                if dist2(x, center) < radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            Field::Fourier { modes } => modes
                .iter()
                .map(|m| {
                    let dot: f64 = m.wavevector.iter().zip(x).map(|(k, v)| k * v).sum();
                    m.amplitude * (dot + m.phase).cos()
                })
                .sum(),
            Field::TimeFourier { base, modes } => {
                base + modes
                    .iter()
                    .map(|(a, w, p)| a * (w * t + p).sin())
                    .sum::<f64>()
            }
            Field::Bump {
                amplitude,
                radius,
                center,
            } => {
                let s = dist2(x, center) / (radius * radius);
                if s < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Field::Sum { terms } => terms.iter().map(|f| f.eval(x, t)).sum(),
            Field::Product { left, right } => left.eval(x, t) * right.eval(x, t),
            Field::Scale { factor, inner } => factor * inner.eval(x, t),
            Field::Shift { shift, inner } => {
                let y: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v - shift.get(i).copied().unwrap_or(0.0))
                    .collect();
                inner.eval(&y, t)
            }
            Field::Truncate { radius, inner } => {
                if norm(x) < *radius {
                    inner.eval(x, t)
                } else {
                    0.0
                }
            }
            Field::PositivePart { inner } => inner.eval(x, t).max(0.0),
            Field::Custom(f) => f.eval(x, t),
        }
    }

    /// Upper bound on `|field|` over all of space-time (may be infinite).
    pub fn sup_abs(&self) -> f64 {
        match self {
            Field::Zero => 0.0,
            Field::Constant { value } => value.abs(),
            Field::Affine { slope, offset } => {
                if slope.iter().all(|s| *s == 0.0) {
                    offset.abs()
                } else {
                    f64::INFINITY
                }
            }
            Field::TimeAffine { slope, offset } => {
                if *slope == 0.0 {
                    offset.abs()
                } else {
                    f64::INFINITY
                }
            }
            Field::Gaussian { amplitude, .. } | Field::Bump { amplitude, .. } => amplitude.abs(),
            Field::RampPlusAnnulus { c, .. } => {
                if *c == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            Field::BallIndicator { .. } => 1.0,
            Field::Fourier { modes } => modes.iter().map(|m| m.amplitude.abs()).sum(),
            Field::TimeFourier { base, modes } => {
                base.abs() + modes.iter().map(|m| m.0.abs()).sum::<f64>()
            }
            Field::Sum { terms } => terms.iter().map(Field::sup_abs).sum(),
            Field::Product { left, right } => left.sup_abs() * right.sup_abs(),
            Field::Scale { factor, inner } => factor.abs() * inner.sup_abs(),
            Field::Shift { inner, .. }
            | Field::Truncate { inner, .. }
            | Field::PositivePart { inner } => inner.sup_abs(),
            Field::Custom(f) => f.sup_abs(),
        }
    }

    /// Value the field approaches as `|x| → ∞` at time `t`.
    pub fn far_limit(&self, t: f64) -> f64 {
        match self {
            Field::Zero
            | Field::Gaussian { .. }
            | Field::BallIndicator { .. }
            | Field::Bump { .. }
            | Field::Fourier { .. }
            | Field::Truncate { .. } => 0.0,
            Field::Constant { value } => *value,
            Field::Affine { offset, slope } => {
                if slope.iter().all(|s| *s == 0.0) {
                    *offset
                } else {
                    0.0
                }
            }
            Field::TimeAffine { .. } | Field::TimeFourier { .. } => self.eval(&[], t),
            Field::RampPlusAnnulus { c, t_on, .. } => {
                if t < *t_on {
                    0.0
                } else {
                    c * (t - t_on)
                }
            }
            Field::Sum { terms } => terms.iter().map(|f| f.far_limit(t)).sum(),
            Field::Product { left, right } => left.far_limit(t) * right.far_limit(t),
            Field::Scale { factor, inner } => factor * inner.far_limit(t),
            Field::Shift { inner, .. } => inner.far_limit(t),
            Field::PositivePart { inner } => inner.far_limit(t).max(0.0),
            Field::Custom(f) => f.far_limit(t),
        }
    }

    /// Bound on `|field(x,t) - far_limit(t)|` for `|x| >= r`, uniformly in `t`.
    pub fn far_deviation(&self, r: f64) -> f64 {
        match self {
            Field::Zero | Field::Constant { .. } | Field::TimeAffine { .. } | Field::TimeFourier { .. } => 0.0,
            Field::Affine { slope, .. } => {
                if slope.iter().all(|s| *s == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Field::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let c = norm(center);
                if r > c {
                    amplitude.abs() * (-(r - c).powi(2) / (width * width)).exp()
                } else {
                    amplitude.abs()
                }
            }
            Field::RampPlusAnnulus { r_out, .. } => {
                if r >= *r_out {
                    0.0
                } else {
                    1.0
                }
            }
            Field::BallIndicator { radius, center } | Field::Bump { radius, center, .. } => {
                if r >= radius + norm(center) {
                    0.0
                } else {
                    self.sup_abs()
                }
            }
            Field::Fourier { .. } => self.sup_abs(),
            Field::Sum { terms } => terms.iter().map(|f| f.far_deviation(r)).sum(),
            Field::Product { left, right } => {
                // |fg - LfLg| <= |f||g - Lg| + |Lg||f - Lf|
                let lg = right.far_limit_sup();
                left.sup_abs() * right.far_deviation(r) + lg * left.far_deviation(r)
            }
            Field::Scale { factor, inner } => factor.abs() * inner.far_deviation(r),
            Field::Shift { shift, inner } => inner.far_deviation((r - norm(shift)).max(0.0)),
            Field::Truncate { radius, inner } => {
                if r >= *radius {
                    0.0
                } else {
                    inner.sup_abs()
                }
            }
            Field::PositivePart { inner } => inner.far_deviation(r),
            Field::Custom(f) => f.far_deviation(r),
        }
    }

    fn far_limit_sup(&self) -> f64 {
        match self {
            Field::TimeAffine { .. } | Field::RampPlusAnnulus { .. } => f64::INFINITY,
            Field::TimeFourier { .. } => self.sup_abs(),
            _ => self.far_limit(0.0).abs().max(self.sup_abs().min(f64::MAX)),
        }
    }
}
