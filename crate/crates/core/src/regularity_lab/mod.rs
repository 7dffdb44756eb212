//! Regularity experiments: the measure bounds behind the point estimate,
//! oscillation decay, incremental quotients and the time-derivative jump.

mod counterexample;
mod holder;
mod point_estimate;

pub use counterexample::*;
pub use holder::*;
pub use point_estimate::*;

use serde::Serialize;
use thiserror::Error;

use crate::kernel_ops::OperatorError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("only {found} usable scales, need at least {needed}")]
    TooFewScales { found: usize, needed: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("cutoff geometry does not fit the grid: {0}")]
    Cutoff(String),
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
}

/// Primitives of the point-estimate chain. Every derived constant is a method,
/// so nothing can go stale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointEstimateConstants {
    pub n: usize,
    pub sigma: f64,
    pub sigma0: f64,
    /// `M₀ > 1` from the base configuration.
    pub big_m0: f64,
    /// `μ₀ ∈ (0,1)` from the base configuration.
    pub mu0: f64,
    /// Stack multiplier `m`.
    pub m: u32,
    /// Multiplier `N` of the induction step.
    pub big_n: u32,
    /// Fitted `(ε, C)` of the distribution bound, when measured.
    pub fit: Option<(f64, f64)>,
}

impl PointEstimateConstants {
    pub fn new(n: usize, sigma: f64, sigma0: f64, big_m0: f64, mu0: f64, m: u32) -> Result<Self, RegularityError> {
        let bad = |s: String| Err(RegularityError::InvalidConstants(s));
        if !(sigma0 > 0.0 && sigma0 < sigma && sigma < 2.0) {
            return bad(format!("need 0 < sigma0 < sigma < 2, got {sigma0}, {sigma}"));
        }
        if !(mu0 > 0.0 && mu0 < 1.0) {
            return bad(format!("mu0 = {mu0} outside (0,1)"));
        }
        if !(big_m0 > 1.0) {
            return bad(format!("M0 = {big_m0} must exceed 1"));
        }
        if m == 0 {
            return bad("m must be positive".into());
        }
        Ok(PointEstimateConstants {
            n,
            sigma,
            sigma0,
            big_m0,
            mu0,
            m,
            big_n: 1,
            fit: None,
        })
    }

    /// Same primitives with the smallest stack multiplier satisfying
    /// `μ₂ < 1` and `d_m ≥ C₀`.
    pub fn with_smallest_m(mut self) -> Self {
        let mut m = 1;
        loop {
            self.m = m;
            if self.mu2() < 1.0 && self.d(m) >= self.c0() {
                return self;
            }
            m += 1;
        }
    }

    pub fn mu1(&self) -> f64 {
        (7.0 + self.mu0) / 8.0
    }

    pub fn mu2(&self) -> f64 {
        (self.m as f64 + 1.0) * self.mu1() / self.m as f64
    }

    pub fn mu3(&self) -> f64 {
        (1.0 + self.mu2()) / 2.0
    }

    /// `M₁ = M₀^m`.
    pub fn big_m1(&self) -> f64 {
        self.big_m0.powi(self.m as i32)
    }

    /// `M₂ = M₀^{max(m, N)}`, the smallest power covering both uses.
    pub fn big_m2(&self) -> f64 {
        self.big_m0.powi(self.m.max(self.big_n) as i32)
    }

    pub fn c0(&self) -> f64 {
        let s0 = self.sigma0;
        8.0 * (6.0 * (self.n as f64).sqrt()).powf(s0) / (3f64.powf(s0) - 1.0) + 2.0
    }

    /// `d_i = (3^{σ(i+1)} − 1)/(3^σ − 1) = 1 + 3^σ + … + 3^{σi}`.
    pub fn d(&self, i: u32) -> f64 {
        d_index(self.sigma, i)
    }

    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants {
            mu1: self.mu1(),
            mu2: self.mu2(),
            mu3: self.mu3(),
            big_m1: self.big_m1(),
            big_m2: self.big_m2(),
            c0: self.c0(),
            d_m: self.d(self.m),
            chain_ordered: self.mu0 < self.mu1() && self.mu1() < self.mu2() && self.mu2() < self.mu3() && self.mu3() < 1.0,
        }
    }
}

pub fn d_index(sigma: f64, i: u32) -> f64 {
    let b = 3f64.powf(sigma);
    (b.powi(i as i32 + 1) - 1.0) / (b - 1.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DerivedConstants {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub big_m1: f64,
    pub big_m2: f64,
    pub c0: f64,
    pub d_m: f64,
    pub chain_ordered: bool,
}

/// `{u > s}` on `Q₁ × [0, τ]` stored as `time_cells × space_cells`, with
/// `per_unit` time cells per unit of time.
#[derive(Clone, Debug)]
pub struct WindowIndicator {
    pub space_cells: usize,
    pub per_unit: usize,
    pub cells: Vec<bool>,
}

impl WindowIndicator {
    pub fn time_cells(&self) -> usize {
        self.cells.len() / self.space_cells
    }

    pub fn count(&self, t_lo: usize, t_hi: usize) -> usize {
        self.cells[t_lo * self.space_cells..t_hi * self.space_cells]
            .iter()
            .filter(|c| **c)
            .count()
    }

    pub fn fraction(&self, t_lo: usize, t_hi: usize) -> f64 {
        self.count(t_lo, t_hi) as f64 / ((t_hi - t_lo) * self.space_cells) as f64
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BasetauCheck {
    pub tau: f64,
    pub first_window: f64,
    pub total: f64,
    pub bound: f64,
    pub hypothesis: bool,
    pub holds: bool,
}

/// If `{u > M₀}` fills at most `μ₀` of `Q₁ × [0,1]`, then at most
/// `(7+μ₀)/8` of `Q₁ × [0,τ]` for `τ ∈ [1,8]`, whatever happens on `[1,τ]`.
pub fn basetau_check(ind: &WindowIndicator, mu0: f64) -> BasetauCheck {
    let tc = ind.time_cells();
    let tau = tc as f64 / ind.per_unit as f64;
    let first_window = ind.fraction(0, ind.per_unit);
    let total = ind.fraction(0, tc);
    let bound = (7.0 + mu0) / 8.0;
    let hypothesis = first_window <= mu0 + 1e-15;
    BasetauCheck {
        tau,
        first_window,
        total,
        bound,
        hypothesis,
        holds: !hypothesis || total <= bound + 1e-15,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationCheck {
    pub k: u32,
    /// Fraction of `{u > M₀^j}` in the first unit window, j = 1..k.
    pub planted: Vec<f64>,
    pub final_fraction: f64,
    pub bound: f64,
    /// `d_{i+1} = 1 + 3^σ d_i` for every rescaled window.
    pub offsets_consistent: bool,
    pub holds: bool,
}

/// The k-fold chain on synthetic data: `values` are samples of `u` on
/// `Q₁ × [0, τ]`, and every scale's hypothesis is checked before the final
/// threshold `M₀^k` is measured.
pub fn iteration_check(
    values: &[f64],
    space_cells: usize,
    per_unit: usize,
    big_m0: f64,
    mu0: f64,
    sigma: f64,
    k: u32,
) -> IterationCheck {
    let level = |s: f64| WindowIndicator {
        space_cells,
        per_unit,
        cells: values.iter().map(|v| *v > s).collect(),
    };
    let planted: Vec<f64> = (1..=k)
        .map(|j| level(big_m0.powi(j as i32)).fraction(0, per_unit))
        .collect();
    let fin = level(big_m0.powi(k as i32));
    let tc = fin.time_cells();
    let final_fraction = fin.fraction(0, tc);
    let b = 3f64.powf(sigma);
    let offsets_consistent = (0..k).all(|i| {
        let lhs = d_index(sigma, i + 1);
        let rhs = 1.0 + b * d_index(sigma, i);
        (lhs - rhs).abs() <= 1e-12 * lhs
    });
    let hyp = planted.iter().all(|f| *f <= mu0 + 1e-15);
    let bound = (7.0 + mu0) / 8.0;
    IterationCheck {
        k,
        planted,
        final_fraction,
        bound,
        offsets_consistent,
        holds: offsets_consistent && (!hyp || final_fraction <= bound + 1e-15),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StackCase {
    pub r: f64,
    pub tau: f64,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub x: Vec<f64>,
    pub t: f64,
    /// Index of the time slab containing `t`, if any.
    pub slab: Option<u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StackGeometryReport {
    pub sigma: f64,
    pub c0: f64,
    pub cases: usize,
    /// Cases with `d_{Nk} r^σ τ ≥ C₀`.
    pub admissible: usize,
    pub failures: Vec<StackCase>,
    pub holds: bool,
}

/// `Q₁ × [C₀−1, C₀] ⊆ ∪_{i<Nk} Q_{3^{σi} r}(x₀) × [t₀ + d_i r^σ τ, t₀ + d_{i+1} r^σ τ]`
/// by coordinate arithmetic on lattices of boxes and points.
pub fn stack_geometry_check(
    consts: &PointEstimateConstants,
    nk: u32,
    radii: &[f64],
    taus: &[f64],
    lattice: usize,
) -> StackGeometryReport {
    let n = consts.n;
    let sigma = consts.sigma;
    let c0 = consts.c0();
    let b = 3f64.powf(sigma);
    let pts1: Vec<f64> = (0..lattice)
        .map(|i| -0.5 + (i as f64 + 0.5) / lattice as f64)
        .collect();
    let space: Vec<Vec<f64>> = if n == 1 {
        pts1.iter().map(|p| vec![*p]).collect()
    } else {
        pts1.iter()
            .flat_map(|a| pts1.iter().map(move |c| vec![*a, *c]))
            .collect()
    };
    let times0: Vec<f64> = (0..=lattice).map(|i| i as f64 / lattice as f64).collect();
    let times: Vec<f64> = (0..=lattice).map(|i| c0 - 1.0 + i as f64 / lattice as f64).collect();
    let mut cases = 0;
    let mut admissible = 0;
    let mut failures = Vec::new();
    for &r in radii {
        for &tau in taus {
            let s = r.powf(sigma) * tau;
            cases += 1;
            if d_index(sigma, nk) * s < c0 {
                continue;
            }
            admissible += 1;
            for x0 in &space {
                for &t0 in &times0 {
                    for x in &space {
                        let dx = x.iter().zip(x0).fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
                        for &t in &times {
                            let dt = t - t0;
                            let slab = (1..nk).find(|&i| {
                                d_index(sigma, i) * s <= dt + 1e-12 && dt <= d_index(sigma, i + 1) * s + 1e-12
                            });
                            let ok = match slab {
                                Some(i) => dx <= 0.5 * b.powi(i as i32) * r + 1e-12,
                                None => false,
                            };
                            if !ok && failures.len() < 64 {
                                failures.push(StackCase {
                                    r,
                                    tau,
                                    x0: x0.clone(),
                                    t0,
                                    x: x.clone(),
                                    t,
                                    slab,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    StackGeometryReport {
        sigma,
        c0,
        cases,
        admissible,
        holds: failures.is_empty(),
        failures,
    }
}

/// Least-squares line `y = a + b x`; `None` with fewer than two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let k = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-300 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn derived_constants_are_coherent(
            mu0 in 0.01f64..0.99,
            sigma0 in 0.1f64..1.9,
            frac in 0.01f64..0.99,
            m0 in 1.01f64..50.0,
            n in 1usize..3,
        ) {
            let sigma = sigma0 + frac * (2.0 - sigma0);
            let pc = PointEstimateConstants::new(n, sigma, sigma0, m0, mu0, 1).unwrap().with_smallest_m();
            let mu1 = (7.0 + mu0) / 8.0;
            let m = pc.m as f64;
            let mu2 = (m + 1.0) * mu1 / m;
            prop_assert_eq!(pc.mu1(), mu1);
            prop_assert_eq!(pc.mu2(), mu2);
            prop_assert_eq!(pc.mu3(), (1.0 + mu2) / 2.0);
            prop_assert!(pc.derived().chain_ordered);
            prop_assert!(pc.d(pc.m) >= pc.c0());
            let c0 = 8.0 * (6.0 * (n as f64).sqrt()).powf(sigma0) / (3f64.powf(sigma0) - 1.0) + 2.0;
            prop_assert!((pc.c0() - c0).abs() <= 1e-12 * c0);
            for i in 0..12 {
                prop_assert!(pc.d(i + 1) > pc.d(i));
                let direct: f64 = (0..=i).map(|j| 3f64.powf(sigma * j as f64)).sum();
                prop_assert!((pc.d(i) - direct).abs() <= 1e-9 * direct);
            }
            if pc.big_m1().is_finite() {
                prop_assert!((pc.big_m1().ln() - pc.m as f64 * m0.ln()).abs() <= 1e-9 * pc.big_m1().ln());
            }
        }

        #[test]
        fn basetau_bound_from_the_first_window(
            seed in any::<u64>(),
            per_unit in 1usize..6,
            tau_units in 1usize..9,
            mu0 in 0.05f64..0.95,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let space_cells = 16;
            let tc = per_unit * tau_units;
            let mut cells = vec![false; tc * space_cells];
            // plant at most μ₀ in the first window and anything after it
            let budget = (mu0 * (per_unit * space_cells) as f64).floor() as usize;
            let mut placed = 0;
            for (i, c) in cells.iter_mut().enumerate() {
                if i < per_unit * space_cells {
                    if placed < budget && rng.gen_bool(0.8) {
                        *c = true;
                        placed += 1;
                    }
                } else {
                    *c = rng.gen_bool(0.9);
                }
            }
            let ind = WindowIndicator { space_cells, per_unit, cells };
            let chk = basetau_check(&ind, mu0);
            prop_assert!(chk.hypothesis);
            prop_assert!(chk.holds, "{:?}", chk);
        }
    }

    #[test]
    fn iteration_chain_on_planted_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (space_cells, per_unit, sigma, m0, mu0) = (32, 8, 1.5f64, 2.0f64, 0.4);
        for k in 1..5u32 {
            let tc = per_unit * 4;
            // level j set occupies a shrinking share of the first window
            let values: Vec<f64> = (0..tc * space_cells)
                .map(|i| {
                    if i < per_unit * space_cells {
                        if (i as f64) < mu0 * (per_unit * space_cells) as f64 - 1.0 {
                            m0.powf(1.0 + k as f64 * rng.gen::<f64>())
                        } else {
                            0.5
                        }
                    } else {
                        10.0 * m0.powi(k as i32)
                    }
                })
                .collect();
            let chk = iteration_check(&values, space_cells, per_unit, m0, mu0, sigma, k);
            assert!(chk.planted.iter().all(|f| *f <= mu0), "{chk:?}");
            assert!(chk.holds, "{chk:?}");
        }
    }

    #[test]
    fn stack_inclusion_on_a_lattice_of_boxes() {
        let radii: Vec<f64> = (1..7).map(|j| 0.5f64.powi(j)).collect();
        for sigma in [1.2, 1.5, 1.8, 1.95] {
            let pc = PointEstimateConstants::new(1, sigma, 0.5, 2.0, 0.5, 1).unwrap().with_smallest_m();
            let rep = stack_geometry_check(&pc, 40, &radii, &[1.0, 2.0, 4.0], 8);
            assert_eq!(rep.admissible, rep.cases);
            assert!(rep.holds, "sigma {sigma}: {:?}", rep.failures.first());
            let full = stack_geometry_check(&pc, 40, &radii, &[8.0], 8);
            // with τ = 8 and small σ the first slab's cube is too narrow
            assert_eq!(full.holds, sigma >= 1.8, "sigma {sigma}: {:?}", full.failures.first());
        }
    }

    #[test]
    fn reciprocal_exponent_bookkeeping() {
        let pc = PointEstimateConstants::new(1, 1.5, 0.5, 2.0, 0.5, 3).unwrap();
        assert_eq!(pc.d(0), 1.0);
        assert!((pc.d(1) - (1.0 + 3f64.powf(1.5))).abs() < 1e-12);
        assert!(PointEstimateConstants::new(1, 1.5, 1.6, 2.0, 0.5, 3).is_err());
        assert!(PointEstimateConstants::new(1, 1.5, 0.5, 0.9, 0.5, 3).is_err());
    }

    #[test]
    fn linear_fit_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (a, b) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
