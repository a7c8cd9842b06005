//! One function per subcommand; each returns a finished report.

use anyhow::{anyhow, bail, Result};
use markov_llt::chain::{reverse_phi_exact, validate_assumptions, Backward, ChainSpec};
use markov_llt::error::Error;
use markov_llt::llt::{
    corange_scan, edgeworth_check, exact_moments, lattice_llt_check, nonlattice_llt_check, two_sided_llt, u_grid,
    variance_regime, CorangeConfig, LocalSource, Regime, RegimeConfig, TwoSidedConfig, DEFAULT_ATOM_BUDGET,
};
use markov_llt::matrix_products::{
    eps_study, lognorm_llt, lyapunov_splitting, random_perturbation, rrpf_certificate, sequential_pf, LogNormConfig,
};
use markov_llt::numeric::TestKernel;
use markov_llt::observables::WindowObservable;
use markov_llt::processes::{irf_window_observable, lipschitz_audit, simulate_irf, window_value};
use markov_llt::report::{Check, Provenance};
use markov_llt::sim::{batch_mean, empirical_local_counts, sample_paths, sample_sums};
use markov_llt::transfer::{complex_rpf, contracting_blocks, ly_constant, rpf_decay, RpfOptions, TwistedCocycle};
use markov_llt::window::{Window, WindowFn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::report::{Curve, Report};
use crate::scenario::{irf_family, CorangeCfg, LltMode, Scenario, SourceCfg};

pub const COMMANDS: [&str; 11] =
    ["validate", "moments", "rpf", "corange", "llt", "edgeworth", "blocks", "matrix", "lyapunov", "irf", "simulate"];

pub struct Ctx {
    pub scenario: Scenario,
    pub chain: ChainSpec,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

impl Ctx {
    fn observable(&self) -> Result<WindowObservable> {
        self.scenario
            .observable
            .as_ref()
            .ok_or_else(|| anyhow!("this analysis needs an `observable` block"))?
            .build(&self.chain)
    }

    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    fn require_assumptions(&self) -> Result<()> {
        validate_assumptions(&self.chain)?.require()?;
        Ok(())
    }

    /// Whether the scenario configures `command`.
    pub fn configured(&self, command: &str) -> bool {
        let a = &self.scenario.analysis;
        match command {
            "validate" => a.validate.is_some(),
            "moments" => a.moments.is_some(),
            "rpf" => a.rpf.is_some(),
            "corange" => a.corange.is_some(),
            "llt" => a.llt.is_some(),
            "edgeworth" => a.edgeworth.is_some(),
            "blocks" => a.blocks.is_some(),
            "matrix" => a.matrix.is_some(),
            "lyapunov" => a.lyapunov.is_some(),
            "irf" => a.irf.is_some(),
            "simulate" => a.simulate.is_some(),
            _ => false,
        }
    }
}

fn missing(command: &str) -> anyhow::Error {
    anyhow!("scenario has no `analysis.{command}` block")
}

fn to_value(v: &impl serde::Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn dispatch(ctx: &Ctx, command: &str) -> Result<Report> {
    let mut r = match command {
        "validate" => validate(ctx)?,
        "moments" => moments(ctx)?,
        "rpf" => rpf(ctx)?,
        "corange" => corange(ctx)?,
        "llt" => llt(ctx)?,
        "edgeworth" => edgeworth(ctx)?,
        "blocks" => blocks(ctx)?,
        "matrix" => matrix(ctx)?,
        "lyapunov" => lyapunov(ctx)?,
        "irf" => irf(ctx)?,
        "simulate" => simulate(ctx)?,
        other => bail!("unknown command {other}"),
    };
    r.scenario = ctx.scenario.name.clone();
    r.seed = ctx.seed;
    Ok(r)
}

fn validate(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.validate.as_ref();
    let rep = validate_assumptions(&ctx.chain)?;
    let mut checks = vec![
        Check::holds("backward Dobrushin contraction delta < 1", rep.contraction_pass, Provenance::Exact),
        Check::holds("backward kernels bounded below, zeta > 0", rep.ellipticity_pass, Provenance::Exact),
    ];
    let mut phi = Vec::new();
    if let Some(n_max) = cfg.and_then(|c| c.phi_n) {
        for n in 1..=n_max.min(ctx.chain.horizon()) {
            let v = reverse_phi_exact(&ctx.chain, n)?;
            checks.push(Check::at_most(format!("phi_R({n}) <= delta^{n}"), v, rep.delta.powi(n as i32) + 1e-12, Provenance::Exact));
            phi.push((n as f64, v));
        }
    }
    let mut result = to_value(&rep)?;
    result["phi"] = json!(phi.iter().map(|p| json!({"n": p.0, "phi": p.1})).collect::<Vec<_>>());
    let curves = vec![
        Curve::new("pi", "j", rep.pi.iter().enumerate().map(|(j, &p)| (j as f64, p))),
        Curve::new("phi", "n", phi),
    ];
    Ok(Report::new("validate", result, checks, curves))
}

fn moments(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.moments.as_ref().ok_or_else(|| missing("moments"))?;
    let f = ctx.observable()?;
    let m = exact_moments(&ctx.chain, &f, &cfg.n_grid)?;
    let mut result = json!({ "points": to_value(&m.points)? });
    let mut checks = Vec::new();
    if cfg.classify {
        let r = variance_regime(&ctx.chain, &f, &cfg.n_grid, &RegimeConfig::default())?;
        checks.push(Check::holds("variance regime is conclusive", r.regime != Regime::Inconclusive, Provenance::Exact));
        if let Some(res) = r.decomposition_residual {
            checks.push(Check::at_most("martingale-coboundary decomposition residual", res, 1e-8, Provenance::Exact));
        }
        result["regime"] = to_value(&r)?;
    }
    let curves = vec![
        Curve::new("mean", "n", m.points.iter().map(|p| (p.n as f64, p.mean))),
        Curve::new("variance", "n", m.points.iter().map(|p| (p.n as f64, p.var))),
        Curve::new("third", "n", m.points.iter().map(|p| (p.n as f64, p.third))),
    ];
    Ok(Report::new("moments", result, checks, curves))
}

fn rpf(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.rpf.as_ref().ok_or_else(|| missing("rpf"))?;
    ctx.require_assumptions()?;
    let f = ctx.observable()?;
    let bw = Backward::new(&ctx.chain)?;
    let tol = ctx.tol(cfg.tolerance);
    let mut checks = Vec::new();
    let mut triples = Vec::new();
    let mut curves = Vec::new();
    for (k, &[re, im]) in cfg.z.iter().enumerate() {
        let z = Complex64::new(re, im);
        let t = complex_rpf(&ctx.chain, &bw, &f, z, cfg.n, &RpfOptions::default())?;
        let res = t.interior_residual();
        checks.push(Check::at_most(format!("interior cocycle residual at z = {re}{im:+}i"), res, tol, Provenance::Exact));
        let lp = t.lambda_product(cfg.n);
        triples.push(json!({
            "z": [re, im],
            "burn_in": t.burn_in,
            "interior_residual": res,
            "interior_boundary": t.interior_boundary(),
            "lambda": t.lambda.iter().map(|l| [l.re, l.im]).collect::<Vec<_>>(),
            "lambda_product": [lp.re, lp.im],
        }));
        curves.push(Curve::new(format!("residual_{k}"), "j", t.residual_profile.iter().enumerate().map(|(j, &r)| (j as f64, r))));
    }
    let mut result = json!({ "triples": triples });
    if let Some(d) = &cfg.decay {
        let rep = validate_assumptions(&ctx.chain)?;
        if d.j + d.window > ctx.chain.horizon() + 1 {
            bail!("rpf.decay: window [{}, {}) exceeds the horizon", d.j, d.j + d.window);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(d.function_seed);
        let win = Window::new(d.j, ctx.chain.sizes()[d.j..d.j + d.window].to_vec());
        let g = WindowFn::from_fn(win, |_| rng.random::<f64>() * 2.0 - 1.0);
        let dec = rpf_decay(&ctx.chain, &bw, &g, d.n_max, rep.delta)?;
        checks.push(Check::holds("decay curve dominated by the fitted C gamma^n", dec.dominated, Provenance::Exact));
        checks.push(Check::at_most("fitted gamma <= delta + a", dec.gamma, dec.ceiling, Provenance::Exact));
        curves.push(Curve::new("decay", "n", dec.curve.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v))));
        result["decay"] = to_value(&dec)?;
    }
    Ok(Report::new("rpf", result, checks, curves))
}

fn corange_config(c: &CorangeCfg) -> CorangeConfig {
    let mut cfg = CorangeConfig::new(c.t_max, c.step, c.n_grid.clone());
    if let Some(t) = c.threshold {
        cfg.threshold = t;
    }
    cfg
}

fn corange(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.corange.as_ref().ok_or_else(|| missing("corange"))?;
    ctx.require_assumptions()?;
    let f = ctx.observable()?;
    let r = corange_scan(&ctx.chain, &f, &corange_config(cfg))?;
    let mut result = to_value(&r.outcome)?;
    result["centres"] = json!(r.centres);
    result["origin_cluster"] = json!(r.origin_cluster);
    result["message"] = json!(r.message);
    result["rates"] = json!(r.rates);
    let curves = vec![Curve::new("rates", "t", r.rates.iter().copied())];
    Ok(Report::new("corange", result, Vec::new(), curves))
}

fn llt(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.llt.as_ref().ok_or_else(|| missing("llt"))?;
    ctx.require_assumptions()?;
    let f = ctx.observable()?;
    let tol = ctx.tol(cfg.tolerance);
    let budget = cfg.budget.unwrap_or(DEFAULT_ATOM_BUDGET);
    match cfg.mode {
        LltMode::Lattice => {
            let r = lattice_llt_check(&ctx.chain, &f, &cfg.n_grid, tol, budget)?;
            let curves = vec![Curve::new("error", "n", r.points.iter().map(|p| (p.n as f64, p.error)))];
            let checks = r.checks.clone();
            Ok(Report::new("llt", json!({"mode": "lattice", "report": to_value(&r)?}), checks, curves))
        }
        LltMode::Nonlattice => {
            let source = match cfg.source.as_ref().ok_or_else(|| anyhow!("llt.source is required in nonlattice mode"))? {
                SourceCfg::Exact { lattice, budget: b } => LocalSource::Exact { lattice: *lattice, budget: b.unwrap_or(budget) },
                SourceCfg::MonteCarlo { samples } => LocalSource::MonteCarlo { samples: *samples, seed: ctx.seed },
            };
            let g = TestKernel::triangle(cfg.kernel_half_width);
            let mut checks = Vec::new();
            let mut reports = Vec::new();
            let mut curves = Vec::new();
            let mut errors = Vec::new();
            for &n in &cfg.n_grid {
                let m = exact_moments(&ctx.chain, &f, &[n])?.points[0];
                let grid = u_grid(m.mean, m.var.sqrt(), cfg.u_width, cfg.u_count);
                let r = nonlattice_llt_check(&ctx.chain, &f, n, &g, &grid, &source, tol)?;
                checks.push(Check::at_most(format!("non-lattice LLT sup error at n = {n}"), r.sup_error, tol, r.provenance));
                curves.push(match &source {
                    LocalSource::MonteCarlo { .. } => {
                        Curve::with_se(format!("lhs_n{n}"), "u", r.points.iter().map(|p| (p.u, p.lhs, p.se.unwrap_or(f64::NAN))))
                    }
                    LocalSource::Exact { .. } => Curve::new(format!("lhs_n{n}"), "u", r.points.iter().map(|p| (p.u, p.lhs))),
                });
                curves.push(Curve::new(format!("gaussian_n{n}"), "u", r.points.iter().map(|p| (p.u, p.rhs))));
                errors.push((n as f64, r.sup_error));
                reports.push(to_value(&r)?);
            }
            curves.push(Curve::new("error", "n", errors));
            Ok(Report::new("llt", json!({"mode": "nonlattice", "reports": reports}), checks, curves))
        }
        LltMode::TwoSided => {
            let corange = cfg.corange.as_ref().ok_or_else(|| anyhow!("llt.corange is required in two-sided mode"))?;
            let tcfg = TwoSidedConfig { corange: corange_config(corange), char_ts: cfg.char_ts.clone(), char_ns: cfg.char_ns.clone() };
            let r = two_sided_llt(&ctx.chain, &f, &tcfg)?;
            let checks = r.checks.clone();
            let curves = cfg
                .char_ns
                .iter()
                .map(|&n| {
                    Curve::new(
                        format!("char_ratio_n{n}"),
                        "t",
                        r.char_est.iter().filter(|p| p.n == n).map(|p| (p.t, p.lhs / p.rhs.max(1e-300))),
                    )
                })
                .collect();
            Ok(Report::new("llt", json!({"mode": "two-sided", "report": to_value(&r)?}), checks, curves))
        }
    }
}

fn edgeworth(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.edgeworth.as_ref().ok_or_else(|| missing("edgeworth"))?;
    ctx.require_assumptions()?;
    let f = ctx.observable()?;
    let r = edgeworth_check(&ctx.chain, &f, &cfg.n_grid, cfg.lattice, cfg.budget.unwrap_or(DEFAULT_ATOM_BUDGET))?;
    let mut checks = vec![Check::holds("scaled residual of the best variant is non-increasing", r.non_increasing, Provenance::Exact)];
    if let Some(t) = ctx.tolerance.or(cfg.tolerance) {
        let last = r.best_scaled.last().copied().unwrap_or(f64::INFINITY);
        checks.push(Check::at_most("scaled residual at the largest n", last, t, Provenance::Exact));
    }
    let curves = vec![
        Curve::new("cubic", "n", r.points.iter().map(|p| (p.n as f64, p.cubic_scaled))),
        Curve::new("classical", "n", r.points.iter().map(|p| (p.n as f64, p.classical_scaled))),
        Curve::new("gaussian", "n", r.points.iter().map(|p| (p.n as f64, p.gaussian_scaled))),
        Curve::new("correction_constant", "n", r.points.iter().map(|p| (p.n as f64, p.correction_constant))),
    ];
    Ok(Report::new("edgeworth", to_value(&r)?, checks, curves))
}

fn blocks(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.blocks.as_ref().ok_or_else(|| missing("blocks"))?;
    ctx.require_assumptions()?;
    let f = ctx.observable()?;
    let bw = Backward::new(&ctx.chain)?;
    let family = cfg
        .ts
        .iter()
        .map(|&t| TwistedCocycle::at_frequency(&ctx.chain, &bw, &f, t))
        .collect::<markov_llt::error::Result<Vec<_>>>()?;
    let c1 = ly_constant(&family, 6, 5);
    let b = contracting_blocks(&family, cfg.n, cfg.d, cfg.theta, c1)?;
    let checks = vec![Check::at_least("contracting blocks found", b.count as f64, 1.0, Provenance::CertifiedBound)];
    let mut result = to_value(&b)?;
    result["c1"] = json!(c1);
    let curves = vec![Curve::new(
        "block_lengths",
        "start",
        b.blocks.iter().map(|&(s, e)| (s as f64, (e - s) as f64)),
    )];
    Ok(Report::new("blocks", result, checks, curves))
}

fn matrix(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.matrix.as_ref().ok_or_else(|| missing("matrix"))?;
    let fam = cfg.family.build()?;
    let pf = sequential_pf(&fam, &ctx.chain, cfg.window)?;
    let lambda: Vec<f64> = pf.lambda.iter().flat_map(|l| l.values.iter().copied()).collect();
    let mut checks = vec![Check::holds("lambda within [d / C^2, d C^2]", pf.scale_ok, Provenance::Exact)];
    let mut curves = Vec::new();
    let mut result = json!({
        "birkhoff": to_value(&pf.birkhoff)?,
        "tail_constant": pf.tail_constant,
        "tail_bound": pf.tail_bound,
        "lambda_min": lambda.iter().copied().fold(f64::INFINITY, f64::min),
        "lambda_max": lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    if pf.lambda.iter().all(|l| l.values.len() == 1) {
        curves.push(Curve::new("lambda", "j", pf.lambda.iter().enumerate().map(|(j, l)| (j as f64, l.values[0]))));
    }
    if !cfg.n_grid.is_empty() {
        let lcfg = LogNormConfig {
            window: cfg.window,
            norm: cfg.norm,
            n_grid: cfg.n_grid.clone(),
            sandwich_n: cfg.sandwich_n,
            samples: cfg.samples,
            seed: ctx.seed,
        };
        let r = lognorm_llt(&fam, &ctx.chain, &lcfg)?;
        if !r.sandwich.is_empty() {
            checks.push(Check::holds("sandwich |log||A|| - S_n log lambda| <= K", r.sandwich_ok, Provenance::Exact));
            curves.push(Curve::new("sandwich_gap", "n", r.sandwich.iter().map(|s| (s.n as f64, s.max_gap))));
            curves.push(Curve::new("sandwich_bound", "n", r.sandwich.iter().map(|s| (s.n as f64, s.bound))));
        }
        if let Some(mc) = &r.mc {
            checks.push(Check::at_most(
                "|MC mean - exact mean| / n",
                (mc.mean_over_n - mc.exact_over_n).abs(),
                mc.allowance,
                Provenance::MonteCarlo { se: mc.se_over_n },
            ));
        }
        curves.push(Curve::new("variance", "n", r.moments.iter().map(|m| (m.n as f64, m.var))));
        result["lognorm"] = to_value(&r)?;
    }
    if let Some(rc) = &cfg.rrpf {
        let c = rrpf_certificate(&fam, &ctx.chain, rc.j, &rc.ns, rc.samples, ctx.seed, rc.slack)?;
        let prov = if c.exhaustive { Provenance::Exact } else { Provenance::MonteCarlo { se: 0.0 } };
        checks.push(Check::at_most("fitted RRPF rate <= Birkhoff rate + slack", c.delta, c.delta_b + rc.slack, prov));
        curves.push(Curve::new("rrpf_residual", "n", c.ns.iter().zip(&c.residual).map(|(&n, &r)| (n as f64, r))));
        result["rrpf"] = to_value(&c)?;
    }
    Ok(Report::new("matrix", result, checks, curves))
}

fn rows(a: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = a.len();
    if d == 0 || a.iter().any(|r| r.len() != d) {
        bail!("lyapunov.a must be a non-empty square matrix");
    }
    Ok(DMatrix::from_fn(d, d, |i, k| a[i][k]))
}

fn lyapunov(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.lyapunov.as_ref().ok_or_else(|| missing("lyapunov"))?;
    let a = rows(&cfg.a)?;
    let b = random_perturbation(a.nrows(), cfg.len, cfg.perturbation_seed);
    let s = lyapunov_splitting(&a, &b, cfg.eps, cfg.window, cfg.gap_fraction)?;
    let tol = ctx.tol(cfg.tolerance);
    let mut checks = Vec::new();
    let mut curves = Vec::new();
    for d in &s.directions {
        checks.push(Check::at_most(format!("direction {} residual", d.index), d.max_residual, tol, Provenance::Exact));
        curves.push(Curve::new(format!("lambda_{}", d.index), "j", d.lambda.iter().map(|&(j, l)| (j as f64, l))));
    }
    let mut result = json!({ "splitting": to_value(&s)? });
    if !cfg.eps_grid.is_empty() {
        let st = eps_study(&a, &b, &cfg.eps_grid, cfg.window)?;
        checks.push(Check::at_most("eps study ratio spread", st.spread, 2.0, Provenance::Exact));
        curves.push(Curve::new("eps_deviation", "eps", st.points.iter().map(|p| (p.eps, p.lambda_deviation))));
        result["eps_study"] = to_value(&st)?;
    }
    Ok(Report::new("lyapunov", result, checks, curves))
}

fn irf(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.irf.as_ref().ok_or_else(|| missing("irf"))?;
    let fam = irf_family(&ctx.chain, cfg.slope, cfg.maps.as_ref(), cfg.radius)?;
    let radius = fam.radius.ok_or_else(|| anyhow!("irf needs an invariant radius"))?;
    let batch = sample_paths(&ctx.chain, cfg.paths, ctx.seed);
    let mut steps = 0usize;
    let mut violation = None;
    let mut first = Vec::new();
    for (i, p) in batch.paths.iter().enumerate() {
        match simulate_irf(&fam, p, 0.0) {
            Ok(traj) => {
                steps += traj.len() - 1;
                if i == 0 {
                    first = traj;
                }
            }
            Err(Error::InvariantViolation { step, value, radius }) => {
                violation = Some(json!({"path": i, "step": step, "value": value, "radius": radius}));
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let w = cfg.window;
    let depth = w + cfg.reference_extra;
    let obs = irf_window_observable(&fam, &ctx.chain, w, ctx.chain.horizon() + 1, None)?;
    let mut gap: f64 = 0.0;
    for p in &batch.paths {
        for t in depth..p.len() {
            gap = gap.max((window_value(&fam, p, t, w, 0.0) - window_value(&fam, p, t, depth, 0.0)).abs());
        }
    }
    let mut checks = vec![
        Check::holds("trajectories stay in the invariant ball", violation.is_none(), Provenance::MonteCarlo { se: 0.0 }),
        Check::at_most(
            format!("truncation gap against depth {depth}"),
            gap,
            obs.error_bound + 1e-12,
            Provenance::MonteCarlo { se: 0.0 },
        ),
    ];
    let mut result = json!({
        "radius": radius,
        "delta0": obs.delta0,
        "window": w,
        "error_bound": obs.error_bound,
        "steps": steps,
        "violation": violation,
        "truncation_gap": gap,
    });
    if cfg.lipschitz_samples > 0 {
        let audit = lipschitz_audit(&fam, cfg.lipschitz_samples, ctx.seed);
        checks.push(Check::holds("declared Lipschitz constants respected", audit.pass, Provenance::MonteCarlo { se: 0.0 }));
        result["lipschitz"] = to_value(&audit)?;
    }
    let curves = vec![Curve::new("trajectory", "k", first.iter().enumerate().map(|(k, &y)| (k as f64, y)))];
    Ok(Report::new("irf", result, checks, curves))
}

fn simulate(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.scenario.analysis.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    let f = ctx.observable()?;
    let batch = sample_sums(&ctx.chain, &f, cfg.n, cfg.samples, ctx.seed)?;
    let (mean, se) = batch_mean(&batch.values);
    let exact = exact_moments(&ctx.chain, &f, &[cfg.n])?.points[0];
    let checks = vec![Check::at_most(
        "|sample mean - exact mean| / SE",
        (mean - exact.mean).abs() / se.max(1e-300),
        4.0,
        Provenance::MonteCarlo { se },
    )];
    let mut result = json!({
        "n": cfg.n,
        "samples": cfg.samples,
        "mean": mean,
        "se": se,
        "exact_mean": exact.mean,
        "exact_var": exact.var,
        "streams": to_value(&batch.streams)?,
    });
    let mut curves = Vec::new();
    if let Some(h) = cfg.kernel_half_width {
        let g = TestKernel::triangle(h);
        let us = u_grid(exact.mean, exact.var.sqrt(), 3.0, cfg.u_count);
        let est = empirical_local_counts(&batch, &g, &us, 30);
        curves.push(Curve::with_se("local_counts", "u", est.iter().map(|e| (e.u, e.mean, e.se))));
        result["local_counts"] = to_value(&est)?;
    }
    Ok(Report::new("simulate", result, checks, curves))
}
