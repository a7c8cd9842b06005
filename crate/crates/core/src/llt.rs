//! Exact moments and laws of partial sums, variance regimes, corange scans
//! and local limit / Edgeworth diagnostics.

use std::collections::HashMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{validate_assumptions, Backward, ChainSpec};
use crate::dp::{self, Atoms};
use crate::error::{Error, Result};
use crate::numeric::{decreasing_envelope, grid, linear_fit, non_increasing, normal_cdf, normal_pdf, trapezoid, TestKernel};
use crate::observables::{default_anchor, default_depth, gordin_decomposition, sinai_reduce, WindowObservable};
use crate::report::{Check, Provenance};
use crate::sim;
use crate::transfer::{ly_constant, sampled_lower, upper_prefix, TwistedCocycle};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub third: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentData {
    pub points: Vec<MomentPoint>,
}

impl MomentData {
    pub fn at(&self, n: usize) -> Option<&MomentPoint> {
        self.points.iter().find(|p| p.n == n)
    }
}

pub fn exact_moments(chain: &ChainSpec, f: &WindowObservable, n_grid: &[usize]) -> Result<MomentData> {
    let m = dp::moments(chain, f, n_grid)?;
    Ok(MomentData {
        points: n_grid
            .iter()
            .zip(m)
            .map(|(&n, (mean, var, third))| MomentPoint { n, mean, var, third })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Bounded,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    /// Relative tail growth below which the variance is called bounded.
    pub eta_bounded: f64,
    /// Relative tail growth above which the variance is called divergent.
    pub eta_divergent: f64,
    pub depth: Option<usize>,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig { eta_bounded: 1e-3, eta_divergent: 0.1, depth: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceRegime {
    pub regime: Regime,
    pub grid: Vec<usize>,
    pub variance: Vec<f64>,
    /// Least-squares slope of `Var(S_n)` over the last half of the grid.
    pub tail_slope: f64,
    /// `tail_slope * n_last / max Var`.
    pub relative_growth: f64,
    /// Slope and intercept of `Var(S_n)` against `n` over the whole grid.
    pub slope: f64,
    pub intercept: f64,
    /// `max |Var(S_n) / (slope n) - 1|` over the last half of the grid.
    pub proportionality: f64,
    pub decomposition_residual: Option<f64>,
    pub martingale_defect: Option<f64>,
    pub martingale_total: Option<f64>,
    pub martingale_tail: Option<f64>,
    pub martingale_convergent: Option<bool>,
}

pub fn variance_regime(chain: &ChainSpec, f: &WindowObservable, n_grid: &[usize], cfg: &RegimeConfig) -> Result<VarianceRegime> {
    if n_grid.len() < 4 {
        return Err(Error::HorizonTooShort("variance classification needs at least four grid points".into()));
    }
    let m = exact_moments(chain, f, n_grid)?;
    let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let vars: Vec<f64> = m.points.iter().map(|p| p.var).collect();
    let half = n_grid.len() / 2;
    let (_, tail_slope) = linear_fit(&ns[half..], &vars[half..]);
    let vmax = vars.iter().cloned().fold(0.0, f64::max);
    let relative_growth = if vmax > 1e-300 { tail_slope * ns[ns.len() - 1] / vmax } else { 0.0 };
    let (intercept, slope) = linear_fit(&ns, &vars);
    let proportionality = if slope.abs() > 1e-300 {
        ns[half..].iter().zip(&vars[half..]).map(|(n, v)| (v / (slope * n) - 1.0).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let regime = if relative_growth <= cfg.eta_bounded {
        Regime::Bounded
    } else if relative_growth >= cfg.eta_divergent {
        Regime::Divergent
    } else {
        Regime::Inconclusive
    };
    let mut out = VarianceRegime {
        regime,
        grid: n_grid.to_vec(),
        variance: vars,
        tail_slope,
        relative_growth,
        slope,
        intercept,
        proportionality,
        decomposition_residual: None,
        martingale_defect: None,
        martingale_total: None,
        martingale_tail: None,
        martingale_convergent: None,
    };
    if regime != Regime::Divergent && f.is_one_sided() {
        let depth = match cfg.depth {
            Some(d) => d,
            None => default_depth(validate_assumptions(chain)?.delta),
        };
        let d = gordin_decomposition(chain, f, depth)?;
        let total = d.sum_var_martingale();
        let k = d.var_martingale.len();
        let tail: f64 = d.var_martingale[k / 2..].iter().sum();
        out.decomposition_residual = Some(d.residual);
        out.martingale_defect = Some(d.martingale_defect);
        out.martingale_total = Some(total);
        out.martingale_tail = Some(tail);
        out.martingale_convergent = Some(tail <= 1e-6 + 1e-3 * total);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorangeConfig {
    pub t_max: f64,
    pub step: f64,
    pub n_grid: Vec<usize>,
    /// A frequency is non-decaying when its fitted rate exceeds `1 - threshold`.
    pub threshold: f64,
}

impl CorangeConfig {
    pub fn new(t_max: f64, step: f64, n_grid: Vec<usize>) -> Self {
        CorangeConfig { t_max, step, n_grid, threshold: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum CorangeOutcome {
    Irreducible { irreducible: bool, scan_max_t: f64 },
    Lattice { t0: f64, h0: f64, frequencies: Vec<f64>, reducible_integer: Option<bool> },
}

impl CorangeOutcome {
    pub fn is_irreducible(&self) -> bool {
        matches!(self, CorangeOutcome::Irreducible { .. })
    }

    pub fn same_as(&self, other: &CorangeOutcome, tol: f64) -> bool {
        match (self, other) {
            (CorangeOutcome::Irreducible { .. }, CorangeOutcome::Irreducible { .. }) => true,
            (CorangeOutcome::Lattice { t0: a, .. }, CorangeOutcome::Lattice { t0: b, .. }) => (a - b).abs() <= tol,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorangeReport {
    pub outcome: CorangeOutcome,
    /// Fitted decay rate of the endpoint-conditioned modulus per grid frequency.
    pub rates: Vec<(f64, f64)>,
    /// Refined centres of the non-decaying clusters away from the origin.
    pub centres: Vec<f64>,
    /// End of the non-decaying cluster attached to `t = 0`.
    pub origin_cluster: f64,
    pub message: String,
}

fn fitted_rate(ns: &[f64], moduli: &[f64]) -> f64 {
    let half = (ns.len() / 2).min(ns.len().saturating_sub(2));
    if moduli[moduli.len() - 1] < 1e-200 {
        return 0.0;
    }
    let logs: Vec<f64> = moduli[half..].iter().map(|m| m.max(1e-300).ln()).collect();
    linear_fit(&ns[half..], &logs).1.exp()
}

fn golden_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() < 1e-11 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Parabolic steps on `ln m` with half-width `d`; exact for moduli that are
/// even about their peak up to quartic terms.
fn polish_peak(mut t: f64, d: f64, m: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..6 {
        let (a, b, c) = (m(t - d).ln(), m(t).ln(), m(t + d).ln());
        let curv = a - 2.0 * b + c;
        if !(curv < 0.0) || !curv.is_finite() {
            break;
        }
        let shift = d * (a - c) / (2.0 * curv);
        if shift.abs() > d {
            break;
        }
        t += shift;
        if shift.abs() < 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

/// Scan `(0, t_max]` for frequencies at which the endpoint-conditioned
/// characteristic function of `S_n` fails to decay in `n`.
pub fn corange_scan(chain: &ChainSpec, f: &WindowObservable, cfg: &CorangeConfig) -> Result<CorangeReport> {
    if cfg.n_grid.len() < 2 {
        return Err(Error::InvalidArgument("corange scan needs at least two n values".into()));
    }
    let n_max = *cfg.n_grid.iter().max().unwrap();
    let var = dp::moments(chain, f, &[n_max])?[0].1;
    if var < 1e-9 {
        return Err(Error::Degenerate(format!(
            "Var(S_{n_max}) = {var:.3e}: bounded variance, the corange is the whole line"
        )));
    }
    let ts = grid(cfg.step, cfg.t_max, cfg.step);
    let mut ns_sorted = cfg.n_grid.clone();
    ns_sorted.sort_unstable();
    let ns: Vec<f64> = ns_sorted.iter().map(|&n| n as f64).collect();
    let bridge = dp::bridge_modulus(chain, f, &ts, &ns_sorted)?;
    let rates: Vec<(f64, f64)> = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let m: Vec<f64> = bridge.iter().map(|row| row[i]).collect();
            (t, fitted_rate(&ns, &m))
        })
        .collect();
    let flat = |i: usize| rates[i].1 > 1.0 - cfg.threshold;
    let mut origin_end = 0;
    let mut origin_cluster = 0.0;
    if flat(0) {
        while origin_end + 1 < ts.len() && flat(origin_end + 1) {
            origin_end += 1;
        }
        origin_cluster = ts[origin_end];
    }
    // local maxima of the fitted rate (flat clusters included), away from the origin peak
    let candidates: Vec<usize> = (origin_end + 1..ts.len())
        .filter(|&i| {
            let r = rates[i].1;
            let left = rates[i - 1].1;
            let right = rates.get(i + 1).map_or(0.0, |x| x.1);
            r > 0.9 && r > left && r >= right || flat(i) && !flat(i - 1)
        })
        .collect();
    let modulus_at = |t: f64| -> f64 {
        dp::bridge_modulus(chain, f, &[t], &[n_max]).map(|b| b[0][0]).unwrap_or(0.0)
    };
    let mut centres: Vec<f64> = candidates
        .par_iter()
        .filter_map(|&i| {
            let mut e = i;
            while e + 1 < ts.len() && flat(e + 1) {
                e += 1;
            }
            let lo = ts[i] - cfg.step;
            let hi = (ts[e] + cfg.step).min(cfg.t_max + cfg.step);
            let t = polish_peak(golden_max(lo, hi, modulus_at), 0.25 * cfg.step, modulus_at);
            let m = dp::bridge_modulus(chain, f, &[t], &ns_sorted).ok()?;
            let col: Vec<f64> = m.iter().map(|row| row[0]).collect();
            (fitted_rate(&ns, &col) > 1.0 - cfg.threshold && t <= cfg.t_max + 0.5 * cfg.step).then_some(t)
        })
        .collect();
    centres.sort_by(f64::total_cmp);
    centres.dedup_by(|a, b| (*a - *b).abs() <= 2.0 * cfg.step);
    if centres.is_empty() {
        return Ok(CorangeReport {
            outcome: CorangeOutcome::Irreducible { irreducible: true, scan_max_t: cfg.t_max },
            rates,
            centres,
            origin_cluster,
            message: format!("no non-decaying frequency found in (0, {}]", cfg.t_max),
        });
    }
    let t0 = centres[0];
    let tol = 2.0 * cfg.step;
    let commensurate = centres.iter().all(|&c| {
        let k = (c / t0).round();
        (c - k * t0).abs() <= tol
    });
    let kmax = ((cfg.t_max - tol) / t0).floor() as usize;
    let complete = (1..=kmax).all(|k| centres.iter().any(|&c| (c - k as f64 * t0).abs() <= tol));
    if !commensurate || !complete {
        return Err(Error::AmbiguousGrid(centres));
    }
    let h0 = TAU / t0;
    let reducible_integer = f.is_integer_valued().then_some(h0 > 1.0 + 1e-6);
    Ok(CorangeReport {
        outcome: CorangeOutcome::Lattice { t0, h0, frequencies: centres.clone(), reducible_integer },
        rates,
        centres,
        origin_cluster,
        message: format!("non-decaying frequencies t0 Z with t0 = {t0:.10}, span h0 = {h0:.10}"),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Lattice {
    Integer,
    /// Values `(a + b beta) / scale` with integers `a`, `b`.
    Beta { beta: f64, scale: i64 },
}

impl Lattice {
    pub fn value(&self, key: (i64, i64)) -> f64 {
        match *self {
            Lattice::Integer => key.0 as f64,
            Lattice::Beta { beta, scale } => (key.0 as f64 + key.1 as f64 * beta) / scale as f64,
        }
    }

    pub fn key(&self, v: f64) -> Option<(i64, i64)> {
        match *self {
            Lattice::Integer => {
                let r = v.round();
                ((v - r).abs() <= 1e-9).then_some((r as i64, 0))
            }
            Lattice::Beta { beta, scale } => {
                let s = scale as f64;
                (0..=4096i64).flat_map(|b| [b, -b]).find_map(|b| {
                    let a = (v * s - b as f64 * beta).round();
                    ((a + b as f64 * beta - v * s).abs() <= 1e-9 * s.max(1.0)).then_some((a as i64, b))
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeDistribution {
    pub lattice: Lattice,
    pub n: usize,
    /// `(value, probability)` sorted by value.
    pub atoms: Vec<(f64, f64)>,
}

impl LatticeDistribution {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean_var_third(&self) -> (f64, f64, f64) {
        let m: f64 = self.atoms.iter().map(|(v, p)| v * p).sum();
        let var: f64 = self.atoms.iter().map(|(v, p)| (v - m).powi(2) * p).sum();
        let third: f64 = self.atoms.iter().map(|(v, p)| (v - m).powi(3) * p).sum();
        (m, var, third)
    }

    /// `E g(S_n - u)`.
    pub fn expect_kernel(&self, g: &TestKernel, u: f64) -> f64 {
        let (lo, hi) = g.support();
        let start = self.atoms.partition_point(|a| a.0 <= u + lo);
        self.atoms[start..]
            .iter()
            .take_while(|a| a.0 < u + hi)
            .map(|(v, p)| p * g.eval(v - u))
            .sum()
    }
}

pub const DEFAULT_ATOM_BUDGET: usize = 20_000_000;

pub fn lattice_distribution(
    chain: &ChainSpec,
    f: &WindowObservable,
    n: usize,
    lattice: Lattice,
    budget: usize,
) -> Result<LatticeDistribution> {
    let mut keys: HashMap<u64, (i64, i64)> = HashMap::new();
    for t in f.terms()[..n.min(f.len())].iter() {
        for &v in &t.values {
            if let std::collections::hash_map::Entry::Vacant(e) = keys.entry(v.to_bits()) {
                let k = lattice.key(v).ok_or_else(|| {
                    Error::InvalidObservable(format!("value {v} does not lie on the declared lattice {lattice:?}"))
                })?;
                e.insert(k);
            }
        }
    }
    let atoms: Atoms = dp::lattice_law(chain, f, n, |_, v| keys[&v.to_bits()], budget)?;
    let mut atoms: Vec<(f64, f64)> = atoms.atoms.into_iter().map(|(k, p)| (lattice.value(k), p)).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(LatticeDistribution { lattice, n, atoms })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeLltPoint {
    pub n: usize,
    pub mean: f64,
    pub sigma: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeLltReport {
    pub points: Vec<LatticeLltPoint>,
    pub threshold: f64,
    pub final_error: f64,
    pub envelope_ok: bool,
    pub checks: Vec<Check>,
}

/// `sup_u |sqrt(2 pi) sigma P(S = u) - exp(-(u - m)^2 / (2 sigma^2))|` over `u` in `Z`.
pub fn lattice_error(dist: &LatticeDistribution) -> (f64, f64, f64) {
    let (mean, var, _) = dist.mean_var_third();
    let sigma = var.sqrt();
    let probs: HashMap<i64, f64> = dist.atoms.iter().map(|(v, p)| (v.round() as i64, *p)).collect();
    let lo = (mean - 12.0 * sigma).floor() as i64;
    let hi = (mean + 12.0 * sigma).ceil() as i64;
    let mut err: f64 = 0.0;
    let mut visit = |u: i64| {
        let p = probs.get(&u).copied().unwrap_or(0.0);
        let g = (-(u as f64 - mean).powi(2) / (2.0 * var)).exp();
        err = err.max(((TAU).sqrt() * sigma * p - g).abs());
    };
    for u in lo..=hi {
        visit(u);
    }
    for &u in probs.keys() {
        if u < lo || u > hi {
            visit(u);
        }
    }
    (mean, sigma, err)
}

/// Reducibility pre-check for an integer-valued observable: scans `(0, 2 pi)`.
pub fn integer_span_check(chain: &ChainSpec, f: &WindowObservable, n: usize) -> Result<CorangeReport> {
    let top = n.min(f.len()).min(160);
    let cfg = CorangeConfig::new(TAU - 0.05, 0.01, vec![top / 2, 3 * top / 4, top]);
    corange_scan(chain, f, &cfg)
}

pub fn lattice_llt_check(
    chain: &ChainSpec,
    f: &WindowObservable,
    n_grid: &[usize],
    threshold: f64,
    budget: usize,
) -> Result<LatticeLltReport> {
    if !f.is_integer_valued() {
        return Err(Error::InvalidObservable("lattice LLT needs an integer-valued observable".into()));
    }
    let n_max = *n_grid.iter().max().ok_or_else(|| Error::InvalidArgument("empty n grid".into()))?;
    let scan = integer_span_check(chain, f, n_max)?;
    if let CorangeOutcome::Lattice { h0, .. } = scan.outcome {
        return Err(Error::Refused(format!(
            "reducible integer sequence with span {h0:.6}; the generalized lattice statement is out of scope"
        )));
    }
    let points: Vec<LatticeLltPoint> = n_grid
        .par_iter()
        .map(|&n| {
            let d = lattice_distribution(chain, f, n, Lattice::Integer, budget)?;
            let (mean, sigma, error) = lattice_error(&d);
            Ok(LatticeLltPoint { n, mean, sigma, error })
        })
        .collect::<Result<_>>()?;
    let asymptotic: Vec<f64> = points.iter().filter(|p| p.n >= 10).map(|p| p.error).collect();
    let envelope_ok = decreasing_envelope(&asymptotic, 0.05);
    let last = points.iter().max_by_key(|p| p.n).unwrap();
    let checks = vec![
        Check::at_most(format!("lattice LLT error at n = {}", last.n), last.error, threshold, Provenance::Exact),
        Check::holds("lattice LLT error decreasing in envelope", envelope_ok, Provenance::Exact),
    ];
    Ok(LatticeLltReport { final_error: last.error, points, threshold, envelope_ok, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LocalSource {
    Exact { lattice: Lattice, budget: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    pub u: f64,
    /// `E g(S_n - u)`.
    pub expectation: f64,
    /// `sqrt(2 pi) sigma E g(S_n - u)`.
    pub lhs: f64,
    /// `(int g) exp(-(u - E S_n)^2 / (2 sigma^2))`.
    pub rhs: f64,
    pub error: f64,
    pub se: Option<f64>,
    pub tail: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlatticeReport {
    pub n: usize,
    pub mean: f64,
    pub sigma: f64,
    pub kernel_integral: f64,
    pub points: Vec<LocalPoint>,
    pub sup_error: f64,
    pub tail_ok: bool,
    pub provenance: Provenance,
}

/// Grid of `count` points spanning `mean +- width * sigma`.
pub fn u_grid(mean: f64, sigma: f64, width: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| mean - width * sigma + 2.0 * width * sigma * i as f64 / (count - 1).max(1) as f64)
        .collect()
}

pub fn nonlattice_llt_check(
    chain: &ChainSpec,
    f: &WindowObservable,
    n: usize,
    g: &TestKernel,
    u_grid: &[f64],
    source: &LocalSource,
    tolerance: f64,
) -> Result<NonlatticeReport> {
    let m = dp::moments(chain, f, &[n])?[0];
    let (mean, var) = (m.0, m.1);
    if var < 1e-12 {
        return Err(Error::Degenerate(format!("Var(S_{n}) = {var:.3e}")));
    }
    let sigma = var.sqrt();
    let integral = g.integral();
    let scale = TAU.sqrt() * sigma;
    let (values, provenance): (Vec<(f64, Option<f64>)>, Provenance) = match source {
        LocalSource::Exact { lattice, budget } => {
            let d = lattice_distribution(chain, f, n, *lattice, *budget)?;
            (u_grid.iter().map(|&u| (d.expect_kernel(g, u), None)).collect(), Provenance::Exact)
        }
        LocalSource::MonteCarlo { samples, seed } => {
            let batch = sim::sample_sums(chain, f, n, *samples, *seed)?;
            let est = sim::empirical_local_counts(&batch, g, u_grid, 30);
            let worst = est.iter().map(|e| e.se).fold(0.0, f64::max);
            if 3.0 * worst * scale > 0.5 * tolerance {
                return Err(Error::InsufficientSamples(format!(
                    "3 SE = {:.3e} exceeds half the tolerance {tolerance}; increase the sample count",
                    3.0 * worst * scale
                )));
            }
            (est.iter().map(|e| (e.mean, Some(e.se * scale))).collect(), Provenance::MonteCarlo { se: worst * scale })
        }
    };
    let points: Vec<LocalPoint> = u_grid
        .iter()
        .zip(values)
        .map(|(&u, (e, se))| {
            let lhs = scale * e;
            let rhs = integral * (-(u - mean).powi(2) / (2.0 * var)).exp();
            LocalPoint { u, expectation: e, lhs, rhs, error: (lhs - rhs).abs(), se, tail: (u - mean).abs() > 8.0 * sigma }
        })
        .collect();
    let sup_error = points.iter().filter(|p| !p.tail).map(|p| p.error).fold(0.0, f64::max);
    let tail_ok = points.iter().filter(|p| p.tail).all(|p| p.expectation <= 1e-6 && p.rhs <= 1e-6);
    Ok(NonlatticeReport { n, mean, sigma, kernel_integral: integral, points, sup_error, tail_ok, provenance })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeworthVariant {
    /// `+ kappa_3 (t^3 - 3t) phi(t) / (6 sigma^3)`.
    Cubic,
    /// `+ kappa_3 (1 - t^2) phi(t) / (6 sigma^3)`.
    Classical,
}

impl EdgeworthVariant {
    pub fn correction(&self, t: f64, skew: f64) -> f64 {
        let poly = match self {
            EdgeworthVariant::Cubic => t * t * t - 3.0 * t,
            EdgeworthVariant::Classical => 1.0 - t * t,
        };
        skew * poly * normal_pdf(t) / 6.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthPoint {
    pub n: usize,
    pub sigma: f64,
    pub third: f64,
    pub gaussian_scaled: f64,
    pub cubic_scaled: f64,
    pub classical_scaled: f64,
    /// `sup_t |cubic correction|`.
    pub correction_sup: f64,
    /// `sigma * sup_t |cubic correction|`.
    pub correction_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthReport {
    pub points: Vec<EdgeworthPoint>,
    pub best: EdgeworthVariant,
    pub best_scaled: Vec<f64>,
    pub non_increasing: bool,
    pub correction_constant_spread: f64,
}

fn sup_poly_pdf(poly: impl Fn(f64) -> f64) -> f64 {
    grid(-8.0, 8.0, 1e-4).into_iter().map(|t| (poly(t) * normal_pdf(t)).abs()).fold(0.0, f64::max)
}

/// `sigma * sup_t |F(t) - Phi(t) - correction(t)|` from an exact atom list.
pub fn edgeworth_residual(dist: &LatticeDistribution, variant: Option<EdgeworthVariant>) -> f64 {
    let (mean, var, third) = dist.mean_var_third();
    let sigma = var.sqrt();
    let skew = third / (sigma * sigma * sigma);
    let g = |t: f64| normal_cdf(t) + variant.map_or(0.0, |v| v.correction(t, skew));
    let mut cum = 0.0;
    let mut worst: f64 = 0.0;
    for (v, p) in &dist.atoms {
        let t = (v - mean) / sigma;
        let gt = g(t);
        worst = worst.max((cum - gt).abs());
        cum += p;
        worst = worst.max((cum - gt).abs());
    }
    sigma * worst
}

pub fn edgeworth_check(
    chain: &ChainSpec,
    f: &WindowObservable,
    n_grid: &[usize],
    lattice: Lattice,
    budget: usize,
) -> Result<EdgeworthReport> {
    let cubic_sup = sup_poly_pdf(|t| t * t * t - 3.0 * t) / 6.0;
    let points: Vec<EdgeworthPoint> = n_grid
        .par_iter()
        .map(|&n| {
            let d = lattice_distribution(chain, f, n, lattice, budget)?;
            let (_, var, third) = d.mean_var_third();
            let sigma = var.sqrt();
            let correction_sup = third.abs() / (sigma * sigma * sigma) * cubic_sup;
            Ok(EdgeworthPoint {
                n,
                sigma,
                third,
                gaussian_scaled: edgeworth_residual(&d, None),
                cubic_scaled: edgeworth_residual(&d, Some(EdgeworthVariant::Cubic)),
                classical_scaled: edgeworth_residual(&d, Some(EdgeworthVariant::Classical)),
                correction_sup,
                correction_constant: sigma * correction_sup,
            })
        })
        .collect::<Result<_>>()?;
    let last = points.iter().max_by_key(|p| p.n).unwrap();
    let best = if last.cubic_scaled <= last.classical_scaled {
        EdgeworthVariant::Cubic
    } else {
        EdgeworthVariant::Classical
    };
    let best_scaled: Vec<f64> = points
        .iter()
        .map(|p| if best == EdgeworthVariant::Cubic { p.cubic_scaled } else { p.classical_scaled })
        .collect();
    let cs: Vec<f64> = points.iter().map(|p| p.correction_constant).collect();
    let cmax = cs.iter().cloned().fold(0.0, f64::max);
    let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if cmax > 0.0 { cmax / cmin } else { 1.0 };
    Ok(EdgeworthReport {
        non_increasing: non_increasing(&best_scaled, 0.0),
        points,
        best,
        best_scaled,
        correction_constant_spread: spread,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallTPoint {
    pub n: usize,
    pub t: f64,
    pub sigma2: f64,
    pub char_abs: f64,
    pub lower_norm: f64,
    pub upper_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallTReport {
    pub c1: f64,
    pub points: Vec<SmallTPoint>,
    /// `upper <= upper_constant * exp(-upper_rate sigma^2 t^2)`.
    pub upper_constant: f64,
    pub upper_rate: f64,
    /// `lower_constant * exp(-lower_rate sigma^2 t^2) <= |E exp(i t S_n)|`.
    pub lower_constant: f64,
    pub lower_rate: f64,
    pub sandwich_ok: bool,
}

fn check_one_sided(f: &WindowObservable) -> Result<()> {
    if f.is_one_sided() {
        Ok(())
    } else {
        Err(Error::TwoSided)
    }
}

fn family(chain: &ChainSpec, bw: &Backward, f: &WindowObservable, ts: &[f64]) -> Result<Vec<TwistedCocycle>> {
    ts.par_iter().map(|&t| TwistedCocycle::at_frequency(chain, bw, f, t)).collect()
}

/// Upper bounds `U_n(t)` from `[0, n)` for `n = 1..=n_max` on each `t`.
fn upper_curves(cocycles: &[TwistedCocycle], n_max: usize, c1: f64) -> Result<Vec<Vec<f64>>> {
    cocycles.par_iter().map(|c| upper_prefix(c, 0, n_max, c1, 16)).collect()
}

pub fn small_t_gaussian_bound(
    chain: &ChainSpec,
    f: &WindowObservable,
    delta: f64,
    n_grid: &[usize],
    t_count: usize,
) -> Result<SmallTReport> {
    check_one_sided(f)?;
    let bw = Backward::new(chain)?;
    let ts: Vec<f64> = (0..=t_count).map(|i| delta * i as f64 / t_count.max(1) as f64).collect();
    let n_max = *n_grid.iter().max().ok_or_else(|| Error::InvalidArgument("empty n grid".into()))?;
    let cocycles = family(chain, &bw, f, &ts)?;
    let c1 = ly_constant(&cocycles, 8, 7);
    let upper = upper_curves(&cocycles, n_max, c1)?;
    let cf = dp::char_function(chain, f, &ts, n_grid)?;
    let mom = dp::moments(chain, f, n_grid)?;
    let mut points = Vec::new();
    for (g, &n) in n_grid.iter().enumerate() {
        for (i, &t) in ts.iter().enumerate() {
            let c = &cocycles[i];
            let m = c.compose(0, n)?;
            let lower = sampled_lower(&m, &c.space(0), &c.space(n), chain.a(), c1, 8, 11 + i as u64);
            points.push(SmallTPoint {
                n,
                t,
                sigma2: mom[g].1,
                char_abs: cf[g][i].norm(),
                lower_norm: lower,
                upper_norm: upper[i][n - 1],
            });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.sigma2 * p.t * p.t).collect();
    let lu: Vec<f64> = points.iter().map(|p| p.upper_norm.max(1e-300).ln()).collect();
    let upper_rate = (-linear_fit(&xs, &lu).1).max(0.0);
    let upper_constant = points
        .iter()
        .zip(&xs)
        .map(|(p, x)| p.upper_norm * (upper_rate * x).exp())
        .fold(1.0, f64::max);
    let usable: Vec<(f64, f64)> = points
        .iter()
        .zip(&xs)
        .filter(|(p, _)| p.char_abs > 1e-12)
        .map(|(p, &x)| (x, p.char_abs.ln()))
        .collect();
    let (lx, ll): (Vec<f64>, Vec<f64>) = usable.iter().cloned().unzip();
    let lower_rate = (-linear_fit(&lx, &ll).1).max(0.0);
    let lower_constant = usable.iter().map(|(x, l)| (l + lower_rate * x).exp()).fold(f64::INFINITY, f64::min);
    let sandwich_ok = points.iter().zip(&xs).all(|(p, x)| {
        let fit_low = lower_constant * (-lower_rate * x).exp();
        (p.char_abs <= 1e-12 || fit_low <= p.char_abs * (1.0 + 1e-9))
            && p.char_abs <= p.lower_norm * (1.0 + 1e-9) + 1e-12
            && p.lower_norm <= p.upper_norm * (1.0 + 1e-9)
    });
    Ok(SmallTReport { c1, points, upper_constant, upper_rate, lower_constant, lower_rate, sandwich_ok })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuffPoint {
    pub n: usize,
    pub sigma: f64,
    pub integral: f64,
    pub scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuffReport {
    pub lattice: bool,
    pub range: (f64, f64),
    pub c1: f64,
    pub points: Vec<SuffPoint>,
    pub decreasing: bool,
}

/// `sigma_n int_{delta <= |t| <= T} U_n(t) dt` (or over `[delta, 2 pi - delta]`
/// for the lattice variant) from certified upper bounds `U_n`.
pub fn suff_integral(
    chain: &ChainSpec,
    f: &WindowObservable,
    delta: f64,
    t_max: f64,
    n_grid: &[usize],
    step: f64,
    lattice: bool,
) -> Result<SuffReport> {
    check_one_sided(f)?;
    let n_max = *n_grid.iter().max().ok_or_else(|| Error::InvalidArgument("empty n grid".into()))?;
    let mom = dp::moments(chain, f, n_grid)?;
    if let Some((n, m)) = n_grid.iter().zip(&mom).find(|(_, m)| m.1 <= 1e-12) {
        return Err(Error::Degenerate(format!("Var(S_{n}) = {:.3e}; sigma_n = 0", m.1)));
    }
    let (lo, hi) = if lattice { (delta, TAU - delta) } else { (delta, t_max) };
    let ts = grid(lo, hi, step);
    let cf: Vec<f64> = dp::char_function(chain, f, &ts, &[n_max])?[0].iter().map(|z| z.norm()).collect();
    let modulus = |t: f64| dp::char_function(chain, f, &[t], &[n_max]).map(|c| c[0][0].norm()).unwrap_or(0.0);
    for i in 0..ts.len() {
        let left = if i > 0 { cf[i - 1] } else { 0.0 };
        let right = cf.get(i + 1).copied().unwrap_or(0.0);
        if cf[i] > 0.5 && cf[i] >= left && cf[i] >= right {
            let a = if i > 0 { ts[i - 1] } else { ts[i] };
            let b = ts.get(i + 1).copied().unwrap_or(ts[i]);
            let t = golden_max(a, b, modulus);
            if modulus(t) >= 1.0 - 1e-9 {
                return Err(Error::Refused(format!(
                    "non-decaying frequency t = {t:.6}; the observable is reducible on this range"
                )));
            }
        }
    }
    let bw = Backward::new(chain)?;
    let cocycles = family(chain, &bw, f, &ts)?;
    let c1 = ly_constant(&cocycles, 6, 13);
    let upper = upper_curves(&cocycles, n_max, c1)?;
    let factor = if lattice { 1.0 } else { 2.0 };
    let points: Vec<SuffPoint> = n_grid
        .iter()
        .zip(&mom)
        .map(|(&n, m)| {
            let ys: Vec<f64> = upper.iter().map(|u| u[n - 1]).collect();
            let integral = factor * trapezoid(&ts, &ys);
            let sigma = m.1.sqrt();
            SuffPoint { n, sigma, integral, scaled: sigma * integral }
        })
        .collect();
    let scaled: Vec<f64> = points.iter().map(|p| p.scaled).collect();
    Ok(SuffReport { lattice, range: (lo, hi), c1, decreasing: decreasing_envelope(&scaled, 0.0), points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedConfig {
    pub corange: CorangeConfig,
    pub char_ts: Vec<f64>,
    pub char_ns: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharEstPoint {
    pub n: usize,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedReport {
    pub one_sided_input: bool,
    pub cond_constant: f64,
    pub reduction_residual: f64,
    pub one_sided_defect: f64,
    pub a: f64,
    pub a_reduced: f64,
    pub c1: f64,
    pub char_est: Vec<CharEstPoint>,
    pub char_est_holds: bool,
    pub corange_f: CorangeOutcome,
    pub corange_g: CorangeOutcome,
    pub corange_agree: bool,
    pub checks: Vec<Check>,
}

/// Sinai-reduce `f = g + coboundary`, bound the characteristic function of
/// `S_n f` by `C` times the certified norms of the cocycle of `g`, and compare
/// the corange scans of `f` and `g`.
pub fn two_sided_llt(chain: &ChainSpec, f: &WindowObservable, cfg: &TwoSidedConfig) -> Result<TwoSidedReport> {
    let rep = validate_assumptions(chain)?;
    if !rep.cond_pass {
        return Err(Error::Refused(format!(
            "conditional-ratio constant C = {:.6} is not finite; two-sided mode is unavailable",
            rep.cond_constant
        )));
    }
    if cfg.corange.n_grid.iter().any(|&n| n >= f.len()) {
        return Err(Error::InvalidArgument(format!(
            "corange grid must stay below the observable length {}; the last reduced term carries no transfer function",
            f.len()
        )));
    }
    let red = sinai_reduce(chain, f, &default_anchor(chain))?;
    let g = &red.g;
    let n_max = *cfg.char_ns.iter().max().ok_or_else(|| Error::InvalidArgument("empty n grid".into()))?;
    let bw = Backward::new(chain)?;
    let cocycles = family(chain, &bw, g, &cfg.char_ts)?;
    let c1 = ly_constant(&cocycles, 6, 5);
    let upper = upper_curves(&cocycles, n_max, c1)?;
    let cf = dp::char_function(chain, f, &cfg.char_ts, &cfg.char_ns)?;
    let mut char_est = Vec::new();
    for (gi, &n) in cfg.char_ns.iter().enumerate() {
        for (i, &t) in cfg.char_ts.iter().enumerate() {
            char_est.push(CharEstPoint { n, t, lhs: cf[gi][i].norm(), rhs: rep.cond_constant * upper[i][n - 1] });
        }
    }
    let char_est_holds = char_est.iter().all(|p| p.lhs <= p.rhs * (1.0 + 1e-9) + 1e-12);
    let corange_f = corange_scan(chain, f, &cfg.corange)?.outcome;
    let corange_g = corange_scan(chain, g, &cfg.corange)?.outcome;
    let corange_agree = corange_f.same_as(&corange_g, 1e-6);
    let checks = vec![
        Check::at_most("Sinai reduction residual", red.residual, 1e-12, Provenance::Exact),
        Check::holds("conditional-ratio constant finite", rep.cond_pass, Provenance::Exact),
        Check::holds("characteristic function dominated by certified norms", char_est_holds, Provenance::CertifiedBound),
        Check::holds("corange of f and its reduction agree", corange_agree, Provenance::Exact),
    ];
    Ok(TwoSidedReport {
        one_sided_input: f.is_one_sided(),
        cond_constant: rep.cond_constant,
        reduction_residual: red.residual,
        one_sided_defect: red.one_sided_defect,
        a: red.a,
        a_reduced: red.a_reduced,
        c1,
        char_est,
        char_est_holds,
        corange_f,
        corange_g,
        corange_agree,
        checks,
    })
}

/// Closed-form `|cos(t/2)|^n` helper used by diagnostics on the fair coin.
pub fn coin_modulus(t: f64, n: usize) -> f64 {
    (t / 2.0).cos().abs().powi(n as i32)
}

/// `E exp(i t S_n)` for the given frequencies at one `n`.
pub fn char_function_at(chain: &ChainSpec, f: &WindowObservable, ts: &[f64], n: usize) -> Result<Vec<Complex64>> {
    Ok(dp::char_function(chain, f, ts, &[n])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn coin(n: usize) -> ChainSpec {
        ChainSpec::iid(vec![0.0, 1.0], vec![0.5, 0.5], 0.5, n).unwrap()
    }

    #[test]
    fn coin_moments() {
        let chain = coin(30);
        let f = WindowObservable::coordinate(&chain, 30, |_| 1.0).unwrap();
        let m = exact_moments(&chain, &f, &[10, 30]).unwrap();
        assert_abs_diff_eq!(m.points[1].mean, 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.points[1].var, 7.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.points[1].third, 0.0, epsilon = 1e-12);
        let c = WindowObservable::state_function(&chain, 30, |_, _| 2.5).unwrap();
        let m = exact_moments(&chain, &c, &[12]).unwrap();
        assert_abs_diff_eq!(m.points[0].mean, 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.points[0].var, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn regimes() {
        let chain = coin(120);
        let grid: Vec<usize> = (1..=12).map(|k| 10 * k).collect();
        let f = WindowObservable::coordinate(&chain, 120, |_| 1.0).unwrap();
        let r = variance_regime(&chain, &f, &grid, &RegimeConfig::default()).unwrap();
        assert_eq!(r.regime, Regime::Divergent);
        assert_abs_diff_eq!(r.slope, 0.25, epsilon = 1e-10);
        assert!(r.proportionality < 0.05);

        let w: Vec<_> = (0..=120)
            .map(|j| crate::window::WindowFn::from_fn(crate::window::Window::new(j, vec![2]), |c| c[0] as f64 * 1.5))
            .collect();
        let cob = WindowObservable::coboundary(&chain, &w).unwrap();
        let r = variance_regime(&chain, &cob, &grid, &RegimeConfig::default()).unwrap();
        assert_eq!(r.regime, Regime::Bounded);
        assert!(r.decomposition_residual.unwrap() <= 1e-8);
        assert!(r.martingale_convergent.unwrap());

        let mixed = f.truncate(119).add(&cob.truncate(119), &chain).unwrap();
        let g: Vec<usize> = (1..=11).map(|k| 10 * k).collect();
        let r = variance_regime(&chain, &mixed, &g, &RegimeConfig::default()).unwrap();
        assert_eq!(r.regime, Regime::Divergent);
        assert_abs_diff_eq!(r.tail_slope, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn coin_corange() {
        let chain = coin(201);
        let f = WindowObservable::coordinate(&chain, 200, |_| 1.0).unwrap();
        let cfg = CorangeConfig::new(7.0, 1e-2, vec![50, 100, 150, 200]);
        match corange_scan(&chain, &f, &cfg).unwrap().outcome {
            CorangeOutcome::Lattice { t0, h0, reducible_integer, .. } => {
                assert_abs_diff_eq!(t0, TAU, epsilon = 1e-6);
                assert_abs_diff_eq!(h0, 1.0, epsilon = 1e-6);
                assert_eq!(reducible_integer, Some(false));
            }
            o => panic!("{o:?}"),
        }
        let f2 = f.scale(2.0);
        match corange_scan(&chain, &f2, &cfg).unwrap().outcome {
            CorangeOutcome::Lattice { t0, h0, reducible_integer, .. } => {
                assert_abs_diff_eq!(t0, PI, epsilon = 1e-6);
                assert_abs_diff_eq!(h0, 2.0, epsilon = 1e-6);
                assert_eq!(reducible_integer, Some(true));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn three_valued_corange_is_irreducible() {
        let chain = ChainSpec::iid(vec![0.0, 1.0, 2f64.sqrt()], vec![0.3, 0.4, 0.3], 0.5, 201).unwrap();
        let f = WindowObservable::coordinate(&chain, 200, |_| 1.0).unwrap();
        let cfg = CorangeConfig::new(7.0, 1e-2, vec![50, 100, 150, 200]);
        let r = corange_scan(&chain, &f, &cfg).unwrap();
        assert!(r.outcome.is_irreducible(), "{:?}", r.centres);
    }

    #[test]
    fn bounded_variance_refuses_corange() {
        let chain = coin(40);
        let zero = WindowObservable::state_function(&chain, 40, |_, _| 0.0).unwrap();
        let cfg = CorangeConfig::new(1.0, 0.1, vec![20, 40]);
        assert!(matches!(corange_scan(&chain, &zero, &cfg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn binomial_distribution() {
        let chain = coin(10);
        let f = WindowObservable::coordinate(&chain, 10, |_| 1.0).unwrap();
        let d = lattice_distribution(&chain, &f, 10, Lattice::Integer, 1000).unwrap();
        let mut c = 1.0;
        for k in 0..=10 {
            assert_abs_diff_eq!(d.atoms[k].1, c / 1024.0, epsilon = 1e-15);
            c = c * (10 - k) as f64 / (k + 1) as f64;
        }
        let one = WindowObservable::state_function(&chain, 10, |_, _| 1.0).unwrap();
        let d = lattice_distribution(&chain, &one, 10, Lattice::Integer, 1000).unwrap();
        assert_eq!(d.atoms, vec![(10.0, 1.0)]);
    }

    #[test]
    fn beta_lattice_separates_collisions() {
        // 1 + 1 + 0 + 0 vs sqrt2 + sqrt2 ... distinct keys
        let chain = ChainSpec::iid(vec![0.0, 1.0, 2f64.sqrt()], vec![0.2, 0.5, 0.3], 0.5, 4).unwrap();
        let f = WindowObservable::coordinate(&chain, 4, |_| 1.0).unwrap();
        let d = lattice_distribution(&chain, &f, 4, Lattice::Beta { beta: 2f64.sqrt(), scale: 1 }, 1000).unwrap();
        assert_eq!(d.atoms.len(), 15);
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-14);
        assert!(lattice_distribution(&chain, &f, 4, Lattice::Integer, 1000).is_err());
    }

    #[test]
    fn coin_lattice_llt() {
        let chain = coin(400);
        let f = WindowObservable::coordinate(&chain, 400, |_| 1.0).unwrap();
        let r = lattice_llt_check(&chain, &f, &[1, 50, 100, 400], 0.02, DEFAULT_ATOM_BUDGET).unwrap();
        assert!(r.final_error <= 0.02, "{}", r.final_error);
        let f2 = f.scale(2.0);
        assert!(matches!(
            lattice_llt_check(&chain, &f2, &[100], 0.02, DEFAULT_ATOM_BUDGET),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn symmetric_edgeworth_has_no_correction() {
        let chain = coin(100);
        let f = WindowObservable::coordinate(&chain, 100, |_| 1.0).unwrap();
        let r = edgeworth_check(&chain, &f, &[25, 100], Lattice::Integer, DEFAULT_ATOM_BUDGET).unwrap();
        for p in &r.points {
            assert!(p.third.abs() < 1e-9);
            assert_abs_diff_eq!(p.cubic_scaled, p.gaussian_scaled, epsilon = 1e-9);
            assert!(p.gaussian_scaled < 1.0);
        }
    }

    #[test]
    fn coin_small_t() {
        let chain = coin(80);
        let f = WindowObservable::coordinate(&chain, 80, |_| 1.0).unwrap();
        let r = small_t_gaussian_bound(&chain, &f, 0.5, &[20, 40, 80], 10).unwrap();
        assert!(r.sandwich_ok);
        assert!(r.upper_constant >= 1.0);
        assert!((r.lower_rate - 0.5).abs() < 0.05, "{}", r.lower_rate);
        let at0: Vec<_> = r.points.iter().filter(|p| p.t == 0.0).collect();
        assert!(at0.iter().all(|p| (p.char_abs - 1.0).abs() < 1e-12));
    }

    #[test]
    fn suff_integral_behaviour() {
        let chain = coin(120);
        let f = WindowObservable::coordinate(&chain, 120, |_| 1.0).unwrap();
        let r = suff_integral(&chain, &f, 0.3, 0.0, &[20, 40, 80, 120], 0.02, true).unwrap();
        assert!(r.decreasing);
        assert!(r.points[3].scaled < r.points[0].scaled);
        let zero = WindowObservable::state_function(&chain, 120, |_, _| 0.0).unwrap();
        assert!(matches!(suff_integral(&chain, &zero, 0.3, 3.0, &[20], 0.05, false), Err(Error::Degenerate(_))));
        assert!(matches!(suff_integral(&chain, &f.scale(2.0), 0.3, 0.0, &[20, 40], 0.01, true), Err(Error::Refused(_))));
    }

    #[test]
    fn two_sided_signs() {
        let chain = ChainSpec::iid(vec![-1.0, 1.0], vec![0.5, 0.5], 0.5, 81).unwrap();
        let f = WindowObservable::product_window(&chain, 80, 1, 0, 1.0).unwrap();
        let mut cfg = TwoSidedConfig {
            corange: CorangeConfig::new(3.5, 1e-2, vec![20, 40, 60]),
            char_ts: vec![0.5, 1.0, 2.0],
            char_ns: vec![10, 20],
        };
        let r = two_sided_llt(&chain, &f, &cfg).unwrap();
        assert!(crate::report::all_pass(&r.checks));
        assert!(!r.one_sided_input);
        assert_abs_diff_eq!(r.a_reduced, 0.5f64.cbrt(), epsilon = 1e-15);
        cfg.corange.n_grid.push(80);
        assert!(matches!(two_sided_llt(&chain, &f, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn triangle_local_expectation() {
        let d = LatticeDistribution { lattice: Lattice::Integer, n: 1, atoms: vec![(0.0, 0.5), (1.0, 0.5)] };
        let g = TestKernel::triangle(1.0);
        assert_abs_diff_eq!(d.expect_kernel(&g, 0.5), 0.5);
        assert_abs_diff_eq!(d.expect_kernel(&g, 0.0), 0.5);
        assert_abs_diff_eq!(d.expect_kernel(&g, 3.0), 0.0);
    }
}
