//! One function per subcommand. Each fills a report builder; pass/fail lives in its assertions.

use super::config::RunConfig;
use super::report::{Assertion, Relation, ReportBuilder, Table};
use crate::barriers::{
    build_and_verify_boundary_barrier, build_special_function, search_capped_power, verify_bump,
    verify_special_function, BARRIER_TOL,
};
use crate::dyadic_cz::{cz_cover, export_json, stack_union_bound, verify_cover, Indicator, Resolution};
use crate::envelope_abp::experiment::{run_member, AbpMember, AbpRunOptions};
use crate::grid::{Domain, Grid};
use crate::regularity_lab::{
    base_configuration_experiment, counterexample_demo, incremental_quotient_fit, point_estimate_experiment,
    rough_isaacs_run, smooth_isaacs_run, PointEstimateConstants, SupersolutionMember,
};
use crate::solver::{Problem, Scheme};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CmdResult = Result<(), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn resolution(cfg: &RunConfig, default: u32) -> f64 {
    cfg.run.resolution.unwrap_or(default) as f64
}

/// Grid of spacing `1/res` reaching at least `half_width`.
fn grid_to(n: usize, half_width: f64, res: f64) -> Grid {
    Grid::new(n, (half_width * res).ceil() as i64, 1.0 / res)
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi / lo - 1.0
}

pub fn solve(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let s = &cfg.solve;
    let params = cfg.params.to_params();
    let res = resolution(cfg, 32);
    let h = 1.0 / res;
    let half = s.box_radius.unwrap_or(s.domain_radius + h);
    let problem = Problem {
        operator: s.operator.clone(),
        params,
        grid: grid_to(params.n, half, res),
        domain: Domain::Ball { radius: s.domain_radius },
        t_start: s.t_start,
        steps: s.steps,
        reach: s.reach,
        exterior: s.exterior.clone(),
        initial: s.initial.clone(),
        rhs: s.rhs.clone(),
    };
    let scheme = Scheme::new(problem).map_err(err)?;
    let traj = scheme.solve().map_err(err)?;
    let residual = scheme.residual(&traj).sup_abs();
    let sup = traj.sup_abs();
    // constants plus a linear ramp in t bound any solution of the scheme
    let bound = s.initial.sup_abs().max(s.exterior.sup_abs()) + (-s.t_start) * s.rhs.sup_abs();
    rep.scalar("h", traj.grid.h);
    rep.scalar("dt", traj.dt);
    rep.scalar("steps", (traj.len() - 1) as f64);
    rep.scalar("sup_abs_u", sup);
    rep.scalar("scheme_residual", residual);
    rep.assert(Assertion::new("scheme residual", residual, Relation::Le, 1e-9 * sup.max(1.0)));
    rep.assert(Assertion::new("sup |u| within the constant barrier", sup, Relation::Le, bound * (1.0 + 1e-12) + 1e-12));
    let g = traj.grid;
    let cols: &[&str] = if g.n == 1 { &["t", "x", "u"] } else { &["t", "x", "y", "u"] };
    let mut t = Table::new("trajectory", cols);
    t.block = Some(g.side());
    let mut last = Table::new("final_slice", &cols[1..]);
    last.block = t.block;
    for (k, (time, slice)) in traj.times.iter().zip(&traj.slices).enumerate() {
        for (i, v) in slice.iter().enumerate() {
            let x = g.point(i);
            let mut row = vec![*time];
            row.extend_from_slice(&x[..g.n]);
            row.push(*v);
            if k + 1 == traj.len() {
                last.push(row[1..].to_vec());
            }
            t.push(row);
        }
    }
    rep.table(t);
    rep.table(last);
    Ok(())
}

pub fn verify_barriers(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let params = cfg.params.to_params();
    let sigmas = &cfg.run.sigmas;
    let res = resolution(cfg, 32);
    let grid = grid_to(params.n, cfg.barriers.box_radius, res);
    let cp = search_capped_power(&params, sigmas, grid).map_err(err)?;
    let r = &cp.report;
    let mut t = Table::new("capped_power_margins", &["sigma", "min_outside", "margin", "c0"]);
    for m in &r.per_sigma {
        t.push(vec![m.sigma, m.min_outside, m.margin, m.c0]);
        rep.assert(Assertion::new(
            format!("capped power: min M-f outside B_1/4 at sigma {}", m.sigma),
            m.min_outside,
            Relation::Gt,
            0.0,
        ));
    }
    rep.table(t);
    let mut prof = Table::new("capped_power_profile", &["r", "f"]);
    for k in 0..=400 {
        let x = 4.0 * k as f64 / 400.0;
        prof.push(vec![x, r.barrier.radial(x)]);
    }
    rep.table(prof);
    rep.scalar("capped_power_p", r.barrier.p_exp);
    rep.scalar("capped_power_delta", r.barrier.delta);
    rep.scalar("c0", r.c0);

    let sf = build_special_function(&r.barrier, r.c0, params.sigma0, None, grid).map_err(err)?;
    let sr = verify_special_function(&sf, &params, sigmas, grid).map_err(err)?;
    rep.scalar("special_tau", sf.tau);
    rep.scalar("special_log_m_end", sf.log_m_end);
    rep.scalar("special_min_on_q3", sr.min_on_q3);
    rep.assert(Assertion::new("special function: min p on Q3 x [1,80]", sr.min_on_q3, Relation::Gt, 2.0));
    let mut t = Table::new("special_function", &["sigma", "c_measured", "max_excess"]);
    for s in &sr.per_sigma {
        t.push(vec![s.sigma, s.c_measured, s.max_excess]);
        rep.assert(Assertion::new(
            format!("special function: max excess over -1 + C chi at sigma {}", s.sigma),
            s.max_excess,
            Relation::Le,
            BARRIER_TOL,
        ));
    }
    rep.table(t);
    rep.assert(Assertion::flag("special function vanishes at t = 0", sr.zero_at_start));

    let bgrid = grid_to(params.n, cfg.barriers.boundary_box_radius, res);
    let bb = build_and_verify_boundary_barrier(&params, sigmas, bgrid).map_err(err)?;
    let mut t = Table::new("boundary_barrier", &["sigma", "min_margin"]);
    for (s, m) in &bb.margins {
        t.push(vec![*s, *m]);
        rep.assert(Assertion::new(
            format!("boundary barrier: margin outside B_1 at sigma {s}"),
            *m,
            Relation::Ge,
            -BARRIER_TOL,
        ));
    }
    rep.table(t);
    rep.assert(Assertion::flag("boundary barrier: profile found", bb.barrier.is_some()));
    rep.assert(Assertion::flag("boundary barrier: psi = 0 on B_1", bb.zero_on_b1));
    rep.assert(Assertion::flag("boundary barrier: psi >= 1 far out", bb.above_one_outside));
    if cfg.barriers.bump {
        let b = verify_bump(&params, sigmas, grid_to(params.n, 2.0, res)).map_err(err)?;
        rep.assert(Assertion::flag("bump: checks", b.passed));
        rep.detail("bump", &b);
    }
    rep.detail("capped_power", &cp);
    rep.detail("special_function", &sr);
    rep.detail("boundary_barrier", &bb);
    Ok(())
}

pub fn abp_check(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let a = &cfg.abp;
    let base = cfg.params.to_params();
    let res = resolution(cfg, if base.n == 1 { 32 } else { 8 });
    let grid = grid_to(base.n, 1.25, res);
    let opts = AbpRunOptions {
        c_threshold: a.c_threshold,
        c_grid: a.c_grid,
        ..AbpRunOptions::default()
    };
    let mut consts = Table::new("abp_constants", &["sigma", "c_min", "c_max"]);
    let mut curve = Table::new("abp_curve", &["t", "f", "measure_statement_ball", "measure_proof_ball"]);
    let mut per_sigma = Vec::new();
    let mut reports = Vec::new();
    for &sigma in &cfg.run.sigmas {
        let params = base.with_sigma(sigma);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for seed in cfg.run.seed..cfg.run.seed + a.members {
            let run = run_member(&AbpMember::random(seed, base.n), &params, grid, &opts)
                .map_err(|e| format!("sigma {sigma} seed {seed}: {e}"))?;
            let r = run.report;
            lo = lo.min(r.abp.rhs_statement);
            hi = hi.max(r.abp.rhs_statement);
            let d = &r.delta_h;
            rep.assert(Assertion::flag(
                format!("sigma {sigma} seed {seed}: Delta_h monotone"),
                d.domain_monotone && d.h_monotone,
            ));
            rep.assert(Assertion::new(
                format!("sigma {sigma} seed {seed}: contact-set Lipschitz constant"),
                d.measured_c,
                Relation::Le,
                a.c_grid,
            ));
            rep.assert(Assertion::new(
                format!("sigma {sigma} seed {seed}: cone points witnessed"),
                r.cone.witnessed as f64,
                Relation::Ge,
                r.cone.tested as f64,
            ));
            if reports.is_empty() {
                for (t, f, m1, m2) in &r.abp.curve {
                    curve.push(vec![*t, *f, *m1, *m2]);
                }
            }
            reports.push(r);
        }
        consts.push(vec![sigma, lo, hi]);
        rep.scalar(format!("c_sigma_{sigma}"), lo);
        rep.assert(Assertion::new(format!("implied constant at sigma {sigma}"), lo, Relation::Gt, 0.0));
        per_sigma.push(lo);
    }
    let ratio = per_sigma.iter().cloned().fold(0.0, f64::max) / per_sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.scalar("c_ratio", ratio);
    rep.assert(Assertion::new("implied constant ratio across the sweep", ratio, Relation::Lt, a.max_ratio));
    rep.table(consts);
    rep.table(curve);
    rep.detail("runs", &reports);
    Ok(())
}

pub fn point_estimate(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let p = &cfg.point_estimate;
    let params = cfg.params.to_params();
    let res = resolution(cfg, 32);
    let members: Vec<SupersolutionMember> = (cfg.run.seed..cfg.run.seed + p.members)
        .map(|s| SupersolutionMember::random(s, p.spread, p.peak, p.f_cap, 1.0))
        .collect();
    let fit = point_estimate_experiment(&params, &cfg.run.sigmas, &members, grid_to(params.n, 1.25, res), p.max_halvings)
        .map_err(err)?;
    let mut t = Table::new("epsilon_per_sigma", &["sigma", "epsilon", "c", "points", "members"]);
    for f in &fit.per_sigma {
        t.push(vec![f.sigma, f.epsilon, f.c, f.points as f64, f.members as f64]);
        rep.assert(Assertion::new(format!("epsilon at sigma {}", f.sigma), f.epsilon, Relation::Gt, 0.0));
    }
    rep.table(t);
    let mut d = Table::new("distribution", &["sigma", "seed", "s", "fraction"]);
    for m in &fit.members {
        for (s, frac) in &m.samples {
            d.push(vec![m.sigma, m.seed as f64, *s, *frac]);
        }
    }
    rep.table(d);
    rep.scalar("epsilon", fit.epsilon);
    rep.scalar("c", fit.c);
    rep.scalar("epsilon_spread", fit.epsilon_spread);
    rep.scalar("rejected", fit.rejected as f64);
    rep.assert(Assertion::new("epsilon spread across the sweep", fit.epsilon_spread, Relation::Le, p.max_spread));
    rep.assert(Assertion::new("members violating the hypotheses", fit.rejected as f64, Relation::Le, 0.0));
    if p.base_configuration {
        let base: Vec<SupersolutionMember> = std::iter::once(SupersolutionMember::zero())
            .chain((cfg.run.seed..cfg.run.seed + p.base_members).map(|s| SupersolutionMember::random(s, 1.0, 200.0, 0.01, 80.0)))
            .collect();
        let candidates: Vec<f64> = (0..12).map(|j| 1.5 * 1.5f64.powi(j)).collect();
        let br = p.base_resolution as f64;
        let bc = base_configuration_experiment(&params, &cfg.run.sigmas, &base, grid_to(params.n, 4.0 * (params.n as f64).sqrt() + 1.0 / br, br), &candidates)
            .map_err(err)?;
        rep.assert(Assertion::flag("base configuration: some candidate M0 works", bc.big_m0.is_some()));
        if let (Some(m0), Some(mu0)) = (bc.big_m0, bc.mu0) {
            rep.scalar("base_m0", m0);
            rep.scalar("base_mu0", mu0);
            rep.assert(Assertion::new("base configuration mu0", mu0, Relation::Lt, 1.0));
            let consts = PointEstimateConstants::new(params.n, params.sigma, params.sigma0, m0, mu0, 1)
                .map_err(err)?
                .with_smallest_m();
            let dc = consts.derived();
            rep.assert(Assertion::flag("derived constants ordered", dc.chain_ordered));
            rep.detail("constants", &dc);
        }
        rep.detail("base_configuration", &bc);
    }
    rep.detail("fit", &fit);
    Ok(())
}

pub fn holder_fit(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let hs = &cfg.holder;
    let base = cfg.params.to_params();
    let res = resolution(cfg, 64);
    let grid = grid_to(base.n, hs.domain_radius + 2.0 / res, res);
    let mut alphas = Table::new("alpha", &["sigma", "seed", "alpha", "raw_slope", "c"]);
    let mut osc = Table::new("oscillation", &["sigma", "seed", "radius", "oscillation"]);
    let mut per_sigma = Vec::new();
    let mut runs = Vec::new();
    for &sigma in &cfg.run.sigmas {
        let params = base.with_sigma(sigma);
        let mut worst = f64::INFINITY;
        for seed in cfg.run.seed..cfg.run.seed + hs.seeds {
            let r = rough_isaacs_run(seed, &params, grid, hs.domain_radius, hs.rhs_bound).map_err(err)?;
            alphas.push(vec![sigma, seed as f64, r.fit.alpha, r.fit.raw_slope, r.fit.c]);
            for (c, o) in r.fit.cylinders.iter().zip(&r.fit.oscillation) {
                osc.push(vec![sigma, seed as f64, c.radius, *o]);
            }
            rep.assert(Assertion::flag(format!("sigma {sigma} seed {seed}: two-sided residuals"), r.check.holds));
            worst = worst.min(r.fit.alpha);
            runs.push(r);
        }
        rep.scalar(format!("alpha_sigma_{sigma}"), worst);
        rep.assert(Assertion::new(format!("alpha at sigma {sigma}"), worst, Relation::Gt, 0.0));
        per_sigma.push((sigma, worst));
    }
    let top = per_sigma.iter().cloned().fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    if let Some(reference) = per_sigma.iter().find(|p| p.0 == hs.reference_sigma) {
        if top.0 > reference.0 {
            rep.assert(Assertion::new(
                format!("alpha({}) against {} alpha({})", top.0, hs.uniformity, reference.0),
                top.1,
                Relation::Ge,
                hs.uniformity * reference.1,
            ));
        }
    }
    rep.table(alphas);
    rep.table(osc);
    rep.detail("runs", &runs);
    Ok(())
}

pub fn c1a_fit(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let c = &cfg.c1a;
    let params = cfg.params.to_params();
    let res = resolution(cfg, 192);
    let grid = grid_to(params.n, 1.0 + 2.0 / res, res);
    let (_, traj) = smooth_isaacs_run(cfg.run.seed, &params, grid).map_err(err)?;
    let q = incremental_quotient_fit(&traj, 0, c.alpha_bar, params.sigma, &c.shifts).map_err(err)?;
    let mut levels = Table::new("quotient_levels", &["k", "shift", "sup_w", "bound"]);
    for l in &q.levels {
        levels.push(vec![l.k as f64, l.shift, l.sup_w, l.bound]);
    }
    for k in 1..=q.levels_k {
        let b: Vec<f64> = q.levels.iter().filter(|l| l.k == k).map(|l| l.bound).collect();
        rep.assert(Assertion::new(format!("relative spread of the level-{k} bound"), spread(&b), Relation::Le, c.tolerance));
    }
    let mut grad = Table::new("gradient", &["shift", "lipschitz", "seminorm"]);
    for g in &q.gradient {
        grad.push(vec![g.shift, g.lipschitz, g.seminorm]);
    }
    let lip: Vec<f64> = q.gradient.iter().map(|g| g.lipschitz).collect();
    let semi: Vec<f64> = q.gradient.iter().map(|g| g.seminorm).collect();
    rep.assert(Assertion::new("relative spread of the Lipschitz quotient", spread(&lip), Relation::Le, c.tolerance));
    rep.assert(Assertion::new("relative spread of the gradient seminorm", spread(&semi), Relation::Le, c.tolerance));
    rep.scalar("delta", q.delta);
    rep.scalar("levels_k", q.levels_k as f64);
    rep.table(levels);
    rep.table(grad);
    rep.detail("quotients", &q);
    Ok(())
}

pub fn cz_demo(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let z = &cfg.cz;
    let n = cfg.params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut sets = Table::new(
        "cz_sets",
        &["set", "sigma", "fraction", "boxes", "selected", "uncovered", "min_selected_fraction", "max_predecessor_fraction"],
    );
    let cols: &[&str] = if n == 1 { &["x", "r", "t0", "tau"] } else { &["x", "y", "r", "t0", "tau"] };
    let mut selected = Table::new("cz_selected", cols);
    for set in 0..z.sets {
        let sigma = cfg.run.sigmas[set % cfg.run.sigmas.len()];
        let res = Resolution::for_sigma(n, z.space_levels, sigma);
        let a = Indicator::random(&mut rng, res, z.fill * z.mu1);
        let cover = cz_cover(&a, sigma, z.mu1).map_err(err)?;
        let check = verify_cover(&a, &cover);
        sets.push(vec![
            set as f64,
            sigma,
            a.fraction(),
            cover.boxes.len() as f64,
            cover.selected.len() as f64,
            check.uncovered_cells as f64,
            check.min_selected_fraction,
            check.max_predecessor_fraction,
        ]);
        rep.assert(Assertion::flag(format!("set {set}: tau in [1,8]"), check.tau_in_range));
        rep.assert(Assertion::flag(format!("set {set}: selected boxes disjoint"), check.disjoint));
        rep.assert(Assertion::new(format!("set {set}: cells of A outside the cover"), check.uncovered_cells as f64, Relation::Le, 0.0));
        rep.assert(Assertion::new(format!("set {set}: min selected fraction"), check.min_selected_fraction, Relation::Gt, z.mu1));
        rep.assert(Assertion::new(format!("set {set}: max predecessor fraction"), check.max_predecessor_fraction, Relation::Le, z.mu1));
        for &m in &z.stack_m {
            let s = stack_union_bound(&a, &cover, m);
            rep.assert(Assertion::new(format!("set {set}: stack bound m = {m}"), s.a_measure, Relation::Le, s.bound * (1.0 + 1e-12)));
        }
        if set == 0 {
            for &j in &cover.selected {
                let b = &cover.boxes[j];
                let mut row = b.center(n);
                row.extend([b.side(), b.t0(), b.tau]);
                selected.push(row);
            }
            rep.detail("first_tree", export_json(&cover));
        }
    }
    rep.table(sets);
    rep.table(selected);
    Ok(())
}

pub fn counterexample(cfg: &RunConfig, rep: &mut ReportBuilder) -> CmdResult {
    let c = &cfg.counterexample;
    let params = cfg.params.to_params();
    let res = resolution(cfg, 32);
    let mut t = Table::new("counterexample", &["h", "dt", "c_max", "c", "pre_switch_sup", "forward_difference"]);
    let mut runs = Vec::new();
    for r in [res, 2.0 * res] {
        let grid = grid_to(params.n, 1.0 + 1.0 / r, r);
        let out = counterexample_demo(&params, grid, c.c_fraction, c.window).map_err(err)?;
        t.push(vec![out.h, out.dt, out.c_max, out.c, out.pre_switch_sup, out.forward_difference]);
        rep.assert(Assertion::new(
            format!("h = {}: sup |u| before the switch", out.h),
            out.pre_switch_sup,
            Relation::Le,
            c.zero_tolerance * out.data_scale,
        ));
        rep.assert(Assertion::new(format!("h = {}: exterior subsolution residual", out.h), out.subsolution_residual, Relation::Le, 1e-12));
        rep.assert(Assertion::new(format!("h = {}: forward difference", out.h), out.forward_difference, Relation::Gt, 0.0));
        runs.push(out);
    }
    let change = (runs[1].forward_difference - runs[0].forward_difference).abs() / runs[0].forward_difference.abs();
    rep.scalar("forward_difference_change", change);
    rep.assert(Assertion::new("relative change under refinement", change, Relation::Lt, c.max_change));
    rep.table(t);
    rep.detail("runs", &runs);
    Ok(())
}
