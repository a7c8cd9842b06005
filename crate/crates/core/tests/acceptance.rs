//! Acceptance harness: one PASS/FAIL line per criterion.

mod common;

use std::error::Error as StdError;
use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use markov_llt::chain::{reverse_phi_exact, validate_assumptions, Backward, ChainSpec};
use markov_llt::llt::{
    char_function_at, corange_scan, edgeworth_check, exact_moments, lattice_distribution, lattice_llt_check,
    nonlattice_llt_check, two_sided_llt, u_grid, variance_regime, CorangeConfig, CorangeOutcome, Lattice,
    LocalSource, Regime, RegimeConfig, TwoSidedConfig, DEFAULT_ATOM_BUDGET,
};
use markov_llt::matrix_products::{
    eps_study, lognorm_llt, lyapunov_splitting, random_perturbation, rrpf_certificate, sequential_pf, LogNormConfig,
    MatrixNorm, PositiveMatrixFamily,
};
use markov_llt::numeric::TestKernel;
use markov_llt::observables::WindowObservable;
use markov_llt::processes::{irf_window_observable, simulate_irf, window_value, IrfFamily};
use markov_llt::sim::{sample_paths, sample_sums};
use markov_llt::transfer::{complex_rpf, rpf_decay, RpfOptions, TwistedCocycle};
use markov_llt::window::{Window, WindowFn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-10;
const PHI_TOL: f64 = 1e-12;
const RPF_RESIDUAL_TOL: f64 = 1e-8;
const DERIVATIVE_REL_TOL: f64 = 1e-6;
const DECOMPOSITION_TOL: f64 = 1e-8;
const PROPORTIONALITY_TOL: f64 = 0.05;
const CORANGE_TOL: f64 = 1e-6;
const COIN_LLT_TOL: f64 = 0.02;
const INHOMOGENEOUS_LLT_TOL: f64 = 0.05;
const NONLATTICE_TOL: f64 = 0.05;
const MC_SE_MULTIPLE: f64 = 3.0;
const EDGEWORTH_TOL: f64 = 0.2;
const EDGEWORTH_SPREAD_TOL: f64 = 1.1;
const SMALL_T_TOL: f64 = 0.08;
const REDUCTION_TOL: f64 = 1e-12;
const PF_TOL: f64 = 1e-8;
const RRPF_RATE_REL_TOL: f64 = 0.1;
const SPLITTING_RESIDUAL_TOL: f64 = 1e-8;
const SPLITTING_LAMBDA_TOL: f64 = 0.05;
const THREAD_TOL: f64 = 1e-9;

type Verdict = Result<(bool, String), Box<dyn StdError>>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Verdict,
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

fn c1_oracle() -> Verdict {
    let ts = [0.3, 1.1, 2.5, 4.0];
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for seed in 0..24u64 {
        let inst = common::random_instance(1000 + seed, seed % 2 == 0);
        let n = inst.f.len();
        let got = char_function_at(&inst.chain, &inst.f, &ts, n)?;
        for (&t, g) in ts.iter().zip(&got) {
            worst = worst.max((g - common::char_function(&inst.chain, &inst.f, n, t)).norm());
        }
        if inst.p == 0 {
            let bw = Backward::new(&inst.chain)?;
            for &t in &ts {
                let c = TwistedCocycle::at_frequency(&inst.chain, &bw, &inst.f, t)?;
                let m = inst.chain.horizon() + 1 - c.width();
                let got = c.char_function(&inst.chain, &bw.marginals, m)?;
                worst = worst.max((got - common::char_function(&inst.chain, &inst.f, m, t)).norm());
            }
        }
        let m = exact_moments(&inst.chain, &inst.f, &[n])?.points[0];
        let (mean, var, third) = common::moments(&inst.chain, &inst.f, n);
        worst = worst.max((m.mean - mean).abs()).max((m.var - var).abs()).max((m.third - third).abs());
        if inst.f.is_integer_valued() {
            let d = lattice_distribution(&inst.chain, &inst.f, n, Lattice::Integer, 1 << 20)?;
            let want = common::integer_atoms(&inst.chain, &inst.f, n);
            for (v, p) in &d.atoms {
                worst = worst.max((p - want.get(&(v.round() as i64)).copied().unwrap_or(0.0)).abs());
            }
            let covered: f64 = want.iter().filter(|(k, _)| d.atoms.iter().any(|(v, _)| v.round() as i64 == **k)).map(|(_, p)| p).sum();
            worst = worst.max((covered - 1.0).abs());
        }
        instances += 1;
    }
    Ok((worst <= ORACLE_TOL && instances >= 20, format!("{instances} instances, max |diff| = {worst:.3e}")))
}

fn c2_mixing() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for seed in 0..24u64 {
        let inst = common::random_instance(1000 + seed, seed % 2 == 0);
        let rep = validate_assumptions(&inst.chain)?;
        if !rep.contraction_pass {
            continue;
        }
        for n in 1..=6.min(inst.chain.horizon()) {
            let phi = common::reverse_phi(&inst.chain, n);
            let exact = reverse_phi_exact(&inst.chain, n)?;
            worst = worst.max(phi - rep.delta.powi(n as i32)).max((phi - exact).abs() - PHI_TOL);
            checked += 1;
        }
    }
    Ok((worst <= PHI_TOL && checked > 0, format!("{checked} (instance, n) pairs, max phi - delta^n = {worst:.3e}")))
}

fn c3_sequential_rpf() -> Verdict {
    let mut pass = true;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut max_gamma: f64 = 0.0;
    for seed in 0..10u64 {
        let chain = common::random_chain(2000 + seed, 60);
        let rep = validate_assumptions(&chain)?;
        if !rep.contraction_pass {
            return Ok((false, format!("seed {seed} is not contracting")));
        }
        let bw = Backward::new(&chain)?;
        let g = common::random_window_fn(&chain, 3, 2, seed);
        let d = rpf_decay(&chain, &bw, &g, 40, rep.delta)?;
        pass &= d.dominated && d.gamma <= d.ceiling;
        worst_gap = worst_gap.max(d.gamma - d.ceiling);
        max_gamma = max_gamma.max(d.gamma);
    }
    Ok((pass, format!("10 chains, n <= 40, max gamma = {max_gamma:.4}, max gamma - (delta + a) = {worst_gap:.4}")))
}

fn standard_instances() -> Vec<(&'static str, ChainSpec, WindowObservable)> {
    let pair = common::inhomogeneous_pair(60);
    let f_pair = WindowObservable::product_window(&pair, 59, 0, 1, 1.0).unwrap();
    let rand = common::random_chain(77, 60);
    let f_rand = WindowObservable::state_function(&rand, 60, |j, x| x + 0.3 * (j % 3) as f64).unwrap();
    let three = ChainSpec::iid(vec![0.0, 1.0, 2f64.sqrt()], vec![0.3, 0.4, 0.3], 0.5, 60).unwrap();
    let f_three = WindowObservable::coordinate(&three, 60, |_| 1.0).unwrap();
    vec![("pair", pair, f_pair), ("random", rand, f_rand), ("three-valued", three, f_three)]
}

fn c4_complex_rpf() -> Verdict {
    let zs: Vec<Complex64> = (0..8).map(|k| Complex64::from_polar(0.1, TAU * k as f64 / 8.0)).chain([Complex64::new(0.0, 0.0)]).collect();
    let mut residual: f64 = 0.0;
    let mut rel: f64 = 0.0;
    let opts = RpfOptions::default();
    for (_, chain, f) in standard_instances() {
        let bw = Backward::new(&chain)?;
        let n = 50;
        for &z in &zs {
            residual = residual.max(complex_rpf(&chain, &bw, &f, z, n, &opts)?.interior_residual());
        }
        let eps = 1e-4;
        let lp = complex_rpf(&chain, &bw, &f, Complex64::new(eps, 0.0), n, &opts)?;
        let lm = complex_rpf(&chain, &bw, &f, Complex64::new(-eps, 0.0), n, &opts)?;
        let d = (lp.lambda_product(n).ln() - lm.lambda_product(n).ln()) / (2.0 * eps);
        let mean = exact_moments(&chain, &f, &[n])?.points[0].mean;
        rel = rel.max((d.re - mean).abs() / mean.abs());
    }
    Ok((
        residual <= RPF_RESIDUAL_TOL && rel <= DERIVATIVE_REL_TOL,
        format!("max interior residual = {residual:.3e}, derivative relative error = {rel:.3e}"),
    ))
}

fn c5_variance() -> Verdict {
    let chain = common::coin(120);
    let grid: Vec<usize> = (1..=12).map(|k| 10 * k).collect();
    let f = WindowObservable::coordinate(&chain, 120, |_| 1.0).unwrap();
    let div = variance_regime(&chain, &f, &grid, &RegimeConfig::default())?;
    let pair = common::inhomogeneous_pair(120);
    let fp = WindowObservable::coordinate(&pair, 120, |_| 1.0).unwrap();
    let div2 = variance_regime(&pair, &fp, &grid, &RegimeConfig::default())?;
    let mut pass = div.regime == Regime::Divergent
        && div.proportionality <= PROPORTIONALITY_TOL
        && div2.regime == Regime::Divergent
        && div2.proportionality <= PROPORTIONALITY_TOL;
    let mut worst_res: f64 = 0.0;
    for (chain, scale) in [(common::coin(120), 1.5), (common::inhomogeneous_pair(120), -0.7)] {
        let w: Vec<_> = (0..=120).map(|j| WindowFn::from_fn(Window::new(j, vec![2]), |c| scale * c[0] as f64)).collect();
        let cob = WindowObservable::coboundary(&chain, &w)?;
        let b = variance_regime(&chain, &cob, &grid, &RegimeConfig::default())?;
        let res = b.decomposition_residual.unwrap_or(f64::INFINITY);
        worst_res = worst_res.max(res);
        pass &= b.regime == Regime::Bounded && res <= DECOMPOSITION_TOL && b.martingale_convergent == Some(true);
    }
    Ok((
        pass,
        format!(
            "coboundary residual <= {worst_res:.3e}; divergent proportionality {:.4} (coin), {:.4} (pair)",
            div.proportionality, div2.proportionality
        ),
    ))
}

fn lattice_of(o: &CorangeOutcome) -> Option<(f64, f64)> {
    match o {
        CorangeOutcome::Lattice { t0, h0, .. } => Some((*t0, *h0)),
        _ => None,
    }
}

fn c6_corange() -> Verdict {
    let cfg = CorangeConfig::new(7.0, 1e-3, vec![50, 100, 150, 200]);
    let coin = common::coin(201);
    let three = ChainSpec::iid(vec![0.0, 1.0, 2f64.sqrt()], vec![0.3, 0.4, 0.3], 0.5, 201)?;
    let x = WindowObservable::coordinate(&coin, 200, |_| 1.0)?;
    let x3 = WindowObservable::coordinate(&three, 200, |_| 1.0)?;
    let perturb = |chain: &ChainSpec, f: &WindowObservable| -> Result<WindowObservable, Box<dyn StdError>> {
        let w: Vec<_> = (0..=chain.horizon())
            .map(|j| WindowFn::from_fn(Window::new(j, vec![chain.size(j)]), |c| 0.7 * c[0] as f64 + 0.1 * (j % 5) as f64))
            .collect();
        Ok(f.add(&WindowObservable::coboundary(chain, &w)?.truncate(f.len()), chain)?)
    };
    let cases = [
        ("x_j", coin.clone(), x.clone(), Some((TAU, 1.0))),
        ("2 x_j", coin.clone(), x.scale(2.0), Some((PI, 2.0))),
        ("{0, 1, sqrt 2}", three.clone(), x3.clone(), None),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, chain, f, want) in cases {
        let base = corange_scan(&chain, &f, &cfg)?.outcome;
        let pert = corange_scan(&chain, &perturb(&chain, &f)?, &cfg)?.outcome;
        let ok = match (want, lattice_of(&base)) {
            (Some((t0, h0)), Some((t, h))) => (t - t0).abs() <= CORANGE_TOL && (h - h0).abs() <= CORANGE_TOL,
            (None, None) => base.is_irreducible(),
            _ => false,
        };
        let same = base.same_as(&pert, CORANGE_TOL);
        pass &= ok && same;
        parts.push(match lattice_of(&base) {
            Some((t, h)) => format!("{name}: t0 = {t:.9}, h0 = {h:.9}, perturbed agrees = {same}"),
            None => format!("{name}: irreducible, perturbed agrees = {same}"),
        });
    }
    Ok((pass, parts.join("; ")))
}

fn binomial_oracle(n: u64) -> f64 {
    use statrs::distribution::{Binomial, Discrete};
    let b = Binomial::new(0.5, n).unwrap();
    let mean = n as f64 / 2.0;
    let sigma = (n as f64 / 4.0).sqrt();
    (0..=n)
        .map(|k| {
            let g = (-(k as f64 - mean).powi(2) / (2.0 * sigma * sigma)).exp();
            (TAU.sqrt() * sigma * b.pmf(k) - g).abs()
        })
        .fold(0.0, f64::max)
}

fn c7_lattice_llt() -> Verdict {
    let coin = common::coin(400);
    let f = WindowObservable::coordinate(&coin, 400, |_| 1.0)?;
    let r = lattice_llt_check(&coin, &f, &[50, 100, 200, 400], COIN_LLT_TOL, DEFAULT_ATOM_BUDGET)?;
    let oracle = binomial_oracle(400);
    let pair = common::inhomogeneous_pair(400);
    let fp = WindowObservable::coordinate(&pair, 400, |_| 1.0)?;
    let rp = lattice_llt_check(&pair, &fp, &[50, 100, 200, 400], INHOMOGENEOUS_LLT_TOL, DEFAULT_ATOM_BUDGET)?;
    let agree = (r.final_error - oracle).abs() <= 1e-10;
    Ok((
        r.final_error <= COIN_LLT_TOL && oracle <= COIN_LLT_TOL && agree && rp.final_error <= INHOMOGENEOUS_LLT_TOL,
        format!(
            "coin n = 400: {:.5} (binomial oracle {:.5}); inhomogeneous pair n = 400: {:.5}",
            r.final_error, oracle, rp.final_error
        ),
    ))
}

/// Exact and Monte Carlo local checks on the same grid.
fn local_pair(
    chain: &ChainSpec,
    f: &WindowObservable,
    n: usize,
    lattice: Lattice,
    samples: usize,
) -> Result<(f64, f64, f64), Box<dyn StdError>> {
    let g = TestKernel::triangle(1.0);
    let m = exact_moments(chain, f, &[n])?.points[0];
    let grid = u_grid(m.mean, m.var.sqrt(), 3.0, 41);
    let exact = nonlattice_llt_check(chain, f, n, &g, &grid, &LocalSource::Exact { lattice, budget: DEFAULT_ATOM_BUDGET }, NONLATTICE_TOL)?;
    let mc = nonlattice_llt_check(chain, f, n, &g, &grid, &LocalSource::MonteCarlo { samples, seed: 11 }, 0.2)?;
    let z = exact
        .points
        .iter()
        .zip(&mc.points)
        .map(|(e, p)| {
            let se = p.se.unwrap_or(f64::INFINITY) / (TAU.sqrt() * mc.sigma);
            (e.expectation - p.expectation).abs() / se
        })
        .fold(0.0, f64::max);
    Ok((exact.sup_error, mc.sup_error, z))
}

fn beta_chain(horizon: usize) -> ChainSpec {
    let k = vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]];
    ChainSpec::periodic(vec![0.0, 1.0, 2f64.sqrt()], &[k], vec![1.0 / 3.0; 3], 0.5, horizon).unwrap()
}

fn c8_nonlattice_llt() -> Verdict {
    let chain = beta_chain(200);
    let f = WindowObservable::coordinate(&chain, 200, |_| 1.0)?;
    let (exact, mc, z) = local_pair(&chain, &f, 200, Lattice::Beta { beta: 2f64.sqrt(), scale: 1 }, 400_000)?;
    Ok((
        exact <= NONLATTICE_TOL && z <= MC_SE_MULTIPLE,
        format!("exact sup error = {exact:.5}, MC sup error = {mc:.5}, max |exact - MC| / SE = {z:.3}"),
    ))
}

fn c9_edgeworth() -> Verdict {
    let chain = ChainSpec::iid(vec![0.0, 1.0, 2f64.sqrt()], vec![0.7, 0.2, 0.1], 0.5, 400)?;
    let f = WindowObservable::coordinate(&chain, 400, |_| 1.0)?;
    let r = edgeworth_check(&chain, &f, &[100, 200, 400], Lattice::Beta { beta: 2f64.sqrt(), scale: 1 }, DEFAULT_ATOM_BUDGET)?;
    let last = *r.best_scaled.last().unwrap();
    let curves: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("n={}: cubic {:.4}, classical {:.4}, gaussian {:.4}", p.n, p.cubic_scaled, p.classical_scaled, p.gaussian_scaled))
        .collect();
    Ok((
        r.non_increasing && last <= EDGEWORTH_TOL && r.correction_constant_spread <= EDGEWORTH_SPREAD_TOL,
        format!("best {:?}; {}; correction constant spread {:.4}", r.best, curves.join(", "), r.correction_constant_spread),
    ))
}

fn c10_small_t() -> Verdict {
    let chain = common::coin(401);
    let f = WindowObservable::coordinate(&chain, 400, |j| ((j + 1) as f64).powf(-0.25))?;
    let scan = corange_scan(&chain, &f, &CorangeConfig::new(7.0, 1e-3, vec![100, 200, 300, 400]))?;
    let m = exact_moments(&chain, &f, &[400])?.points[0];
    let grid = u_grid(m.mean, m.var.sqrt(), 3.0, 41);
    let r = nonlattice_llt_check(
        &chain,
        &f,
        400,
        &TestKernel::triangle(0.5),
        &grid,
        &LocalSource::MonteCarlo { samples: 1 << 20, seed: 5 },
        SMALL_T_TOL,
    )?;
    Ok((
        scan.outcome.is_irreducible() && r.sup_error <= SMALL_T_TOL,
        format!("corange irreducible = {}, MC sup error = {:.5}", scan.outcome.is_irreducible(), r.sup_error),
    ))
}

fn c11_two_sided() -> Verdict {
    let chain = ChainSpec::iid(vec![-1.0, 1.0], vec![0.5, 0.5], 0.5, 221)?;
    let f = WindowObservable::product_window(&chain, 220, 1, 0, 1.0)?;
    let cfg = TwoSidedConfig {
        corange: CorangeConfig::new(7.0, 1e-2, vec![50, 100, 150, 200]),
        char_ts: (1..=30).map(|k| 0.1 * k as f64).collect(),
        char_ns: vec![10, 20, 40],
    };
    let r = two_sided_llt(&chain, &f, &cfg)?;
    Ok((
        r.reduction_residual <= REDUCTION_TOL && r.cond_constant.is_finite() && r.char_est_holds && r.corange_agree,
        format!(
            "reduction residual = {:.3e}, C = {:.4}, domination holds = {}, corange agree = {} (t0, h0: {:?} vs {:?})",
            r.reduction_residual,
            r.cond_constant,
            r.char_est_holds,
            r.corange_agree,
            lattice_of(&r.corange_f),
            lattice_of(&r.corange_g)
        ),
    ))
}

fn single(horizon: usize) -> ChainSpec {
    ChainSpec::new_degenerate(vec![vec![0.0]; horizon + 1], vec![vec![vec![1.0]]; horizon], vec![1.0], 0.5).unwrap()
}

fn c12_matrix_products() -> Verdict {
    let golden = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
    let fam = PositiveMatrixFamily::constant(golden)?;
    let chain = single(60);
    let rho = (3.0 + 5f64.sqrt()) / 2.0;
    let pf = sequential_pf(&fam, &chain, 20)?;
    let lambda_err = pf.lambda.iter().map(|l| (l.values[0] - rho).abs()).fold(0.0, f64::max);
    let ns: Vec<usize> = (1..=12).collect();
    let cert = rrpf_certificate(&fam, &chain, 20, &ns, 1, 0, 0.05)?;
    let ratio = (3.0 - 5f64.sqrt()) / (3.0 + 5f64.sqrt());
    let rate_rel = (cert.delta - ratio).abs() / ratio;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut m = || DMatrix::from_fn(2, 2, |_, _| 0.5 + 1.5 * rng.random::<f64>());
    let random = PositiveMatrixFamily::new(2.0, vec![vec![m(), m()]])?;
    let coin = common::coin(40);
    let rc = rrpf_certificate(&random, &coin, 5, &(1..=20).collect::<Vec<_>>(), 4096, 3, 0.0)?;
    let mut sandwich_ok = true;
    let mut exhaustive = true;
    let mut worst_gap: f64 = 0.0;
    for norm in [MatrixNorm::EntrySum, MatrixNorm::MaxEntry] {
        let cfg = LogNormConfig { window: 6, norm, n_grid: vec![5, 10, 15, 20, 25, 30], sandwich_n: 12, samples: 0, seed: 1 };
        let r = lognorm_llt(&random, &coin, &cfg)?;
        sandwich_ok &= r.sandwich_ok && r.sandwich.len() == 12;
        exhaustive &= r.sandwich.iter().all(|s| s.exhaustive);
        worst_gap = worst_gap.max(r.sandwich.iter().map(|s| s.max_gap / s.bound).fold(0.0, f64::max));
    }
    Ok((
        lambda_err <= PF_TOL && rate_rel <= RRPF_RATE_REL_TOL && rc.pass && sandwich_ok && exhaustive,
        format!(
            "|lambda - rho| = {lambda_err:.3e}; RRPF rate {:.5} vs {ratio:.5}; random family delta {:.4} <= delta_B {:.4}; sandwich max gap/K = {worst_gap:.4} (exhaustive = {exhaustive})",
            cert.delta, rc.delta, rc.delta_b
        ),
    ))
}

fn c13_lyapunov() -> Verdict {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]);
    let b = random_perturbation(2, 120, 7);
    let s = lyapunov_splitting(&a, &b, 0.01, 30, 0.5)?;
    let residual = s.directions.iter().map(|d| d.max_residual).fold(0.0, f64::max);
    let dev = s.directions.iter().map(|d| d.lambda_deviation).fold(0.0, f64::max);
    let study = eps_study(&a, &b, &[0.0025, 0.005, 0.01, 0.02, 0.04], 30)?;
    Ok((
        residual <= SPLITTING_RESIDUAL_TOL && dev <= SPLITTING_LAMBDA_TOL && study.linear,
        format!("max residual = {residual:.3e}, sup |lambda - lambda_i| = {dev:.5}, eps study spread = {:.4}", study.spread),
    ))
}

fn c14_irf() -> Verdict {
    let labels = vec![0.0, 0.5f64.sqrt(), 1.0];
    let k = vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]];
    let long = ChainSpec::periodic(labels.clone(), &[k.clone()], vec![1.0 / 3.0; 3], 0.5, 1000)?;
    let fam = IrfFamily::affine_labels(&long, 0.5)?;
    let radius = fam.radius.unwrap_or(f64::INFINITY);
    let batch = sample_paths(&long, 1000, 21);
    let starts = [-radius, 0.0, radius];
    let mut steps = 0;
    for (i, p) in batch.paths.iter().enumerate() {
        steps += simulate_irf(&fam, p, starts[i % 3])?.len() - 1;
    }

    let w = 6;
    let obs_chain = ChainSpec::periodic(labels, &[k], vec![1.0 / 3.0; 3], 0.5, 100)?;
    let irf = irf_window_observable(&fam, &obs_chain, w, 100, None)?;
    let mut gap: f64 = 0.0;
    for p in batch.paths.iter().take(200) {
        for t in (w + 20..p.len()).step_by(7) {
            gap = gap.max((window_value(&fam, p, t, w, 0.0) - window_value(&fam, p, t, w + 20, 0.0)).abs());
        }
    }
    let bound_ok = irf.error_bound <= 2.0 * fam.delta0().powi(w as i32) + 1e-15 && gap <= irf.error_bound + 1e-12;

    let (exact, mc, z) = local_pair(&obs_chain, &irf.observable, 100, Lattice::Beta { beta: 0.5f64.sqrt(), scale: 32 }, 400_000)?;
    Ok((
        steps >= 1_000_000 && bound_ok && exact <= NONLATTICE_TOL && z <= MC_SE_MULTIPLE,
        format!(
            "{steps} steps inside radius {radius}; depth-{} gap {gap:.3e} <= bound {:.3e}; LLT exact {exact:.5}, MC {mc:.5}, max z {z:.3}",
            w + 20,
            irf.error_bound
        ),
    ))
}

fn c15_reproducibility() -> Verdict {
    let chain = beta_chain(120);
    let f = WindowObservable::coordinate(&chain, 120, |_| 1.0)?;
    let run = |threads: usize| -> Result<(Vec<f64>, Vec<f64>), String> {
        pool(threads).install(|| {
            let s = sample_sums(&chain, &f, 120, 50_000, 99).map_err(|e| e.to_string())?;
            let g = TestKernel::triangle(1.0);
            let m = exact_moments(&chain, &f, &[120]).map_err(|e| e.to_string())?.points[0];
            let grid = u_grid(m.mean, m.var.sqrt(), 3.0, 21);
            let mc = nonlattice_llt_check(&chain, &f, 120, &g, &grid, &LocalSource::MonteCarlo { samples: 200_000, seed: 4 }, 0.5)
                .map_err(|e| e.to_string())?;
            let scan = corange_scan(&chain, &f, &CorangeConfig::new(7.0, 1e-2, vec![30, 60, 90, 120])).map_err(|e| e.to_string())?;
            let mut numbers: Vec<f64> = mc.points.iter().map(|p| p.lhs).collect();
            numbers.push(mc.sup_error);
            numbers.extend(scan.rates.iter().map(|r| r.1));
            Ok((s.values, numbers))
        })
    };
    let (s1, n1) = run(1)?;
    let (s4, n4) = run(4)?;
    let identical = s1 == s4;
    let diff = n1.iter().zip(&n4).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((
        identical && n1.len() == n4.len() && diff <= THREAD_TOL,
        format!("1 vs 4 threads: samples identical = {identical}, max report difference = {diff:.3e}"),
    ))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "oracle equivalence", budget: Some(Duration::from_secs(60)), run: c1_oracle },
        Criterion { id: 2, name: "reverse phi-mixing bound", budget: None, run: c2_mixing },
        Criterion { id: 3, name: "sequential RPF decay", budget: Some(Duration::from_secs(60)), run: c3_sequential_rpf },
        Criterion { id: 4, name: "complex RPF triple", budget: None, run: c4_complex_rpf },
        Criterion { id: 5, name: "variance dichotomy", budget: None, run: c5_variance },
        Criterion { id: 6, name: "corange scan", budget: Some(Duration::from_secs(300)), run: c6_corange },
        Criterion { id: 7, name: "lattice LLT", budget: Some(Duration::from_secs(60)), run: c7_lattice_llt },
        Criterion { id: 8, name: "non-lattice LLT", budget: Some(Duration::from_secs(300)), run: c8_nonlattice_llt },
        Criterion { id: 9, name: "first-order Edgeworth", budget: None, run: c9_edgeworth },
        Criterion { id: 10, name: "small-weights scenario", budget: None, run: c10_small_t },
        Criterion { id: 11, name: "two-sided pipeline", budget: None, run: c11_two_sided },
        Criterion { id: 12, name: "positive matrix products", budget: None, run: c12_matrix_products },
        Criterion { id: 13, name: "Lyapunov splitting", budget: None, run: c13_lyapunov },
        Criterion { id: 14, name: "iterated random functions", budget: None, run: c14_irf },
        Criterion { id: 15, name: "thread reproducibility", budget: None, run: c15_reproducibility },
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_none_or(|o| o == c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => match c.budget {
                Some(b) if elapsed > b => (false, format!("{detail}; over budget {b:?}")),
                _ => (pass, detail),
            },
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {} ({:.1} s): {}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
