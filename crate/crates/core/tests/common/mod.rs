//! Independent oracles shared by the integration tests. Nothing here calls
//! into the lattice code: integrals are done by adaptive Gauss–Kronrod on
//! the analytic functions.
#![allow(dead_code)]

pub mod lp;

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XK[j];
        let s = f(c - x) + f(c + x);
        k += WK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod with absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, e) = gk15(f, a, b);
        if e <= tol.max(1e-14 * v.abs()).max(1e-17) || depth == 0 || (b - a).abs() < 1e-14 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, tol, 40)
}

#[derive(Clone, Copy, Debug)]
pub enum Mode {
    Linear,
    Plus(f64),
    Minus(f64),
}

impl Mode {
    pub fn apply(&self, d: f64) -> f64 {
        match *self {
            Mode::Linear => d,
            Mode::Plus(l) => {
                if d > 0.0 {
                    l * d
                } else {
                    d / l
                }
            }
            Mode::Minus(l) => {
                if d > 0.0 {
                    d / l
                } else {
                    l * d
                }
            }
        }
    }
}

/// `∫_0^∞ (2−σ) a(r) r^{−1−σ} φ(δ(r)) dr` where `δ(r)` is the second
/// difference along a fixed direction and `d2` its curvature at `r = 0`.
pub fn radial(delta: &dyn Fn(f64) -> f64, d2: f64, a: &dyn Fn(f64) -> f64, sigma: f64, mode: Mode, tol: f64) -> f64 {
    let r0: f64 = 1e-3;
    // δ ≈ ½ d2 r² below r0
    let small = a(0.0) * mode.apply(0.5 * d2) * r0.powf(2.0 - sigma);
    let k = 2.0 - sigma;
    let mid = integrate(
        &|r: f64| k * a(r) * r.powf(-1.0 - sigma) * mode.apply(delta(r)),
        r0,
        1.0,
        tol,
    );
    let far = integrate(
        &|s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            let r = 1.0 / s;
            k * a(r) * r.powf(-1.0 - sigma) * mode.apply(delta(r)) / (s * s)
        },
        0.0,
        1.0,
        tol,
    );
    small + mid + far
}

/// Oracle for `∫ φ(δ(u,x;y)) K(y) dy` with `K = (2−σ)a(|y|)|y|^{−n−σ}`.
pub fn nonlocal(u: &(dyn Fn(&[f64]) -> f64 + Sync), x: &[f64], sigma: f64, a: &dyn Fn(f64) -> f64, mode: Mode, tol: f64) -> f64 {
    let n = x.len();
    let ux = u(x);
    let along = |e: [f64; 2]| {
        let delta = move |r: f64| {
            let p: Vec<f64> = (0..n).map(|i| x[i] + r * e[i]).collect();
            let q: Vec<f64> = (0..n).map(|i| x[i] - r * e[i]).collect();
            0.5 * (u(&p) + u(&q)) - ux
        };
        // curvature along e by a 7-point stencil
        let hs = 1e-2;
        let d2 = (2.0 * delta(3.0 * hs) - 27.0 * delta(2.0 * hs) + 270.0 * delta(hs)) / (90.0 * hs * hs);
        radial(&delta, d2, a, sigma, mode, tol)
    };
    if n == 1 {
        2.0 * along([1.0, 0.0])
    } else {
        // the angular integrand is smooth: fixed 4 × 15-point Kronrod panels
        let pi = std::f64::consts::PI;
        let mut acc = 0.0;
        for k in 0..4 {
            let a = k as f64 * pi / 4.0;
            acc += gk15(&|th: f64| along([th.cos(), th.sin()]), a, a + pi / 4.0).0;
        }
        2.0 * acc
    }
}

/// Extrapolated `σ → 2` limit of `(2−σ)∫δ|y|^{−n−σ}` from values at three orders.
pub fn richardson_to_two(values: &[(f64, f64)]) -> f64 {
    // quadratic fit in ε = 2 − σ, evaluated at ε = 0 (Lagrange)
    let mut acc = 0.0;
    for (i, (si, vi)) in values.iter().enumerate() {
        let ei = 2.0 - si;
        let mut l = 1.0;
        for (j, (sj, _)) in values.iter().enumerate() {
            if i != j {
                let ej = 2.0 - sj;
                l *= (0.0 - ej) / (ei - ej);
            }
        }
        acc += l * vi;
    }
    acc
}
