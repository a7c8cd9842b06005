//! Products of positive matrices driven by the chain, their sequential
//! Perron-Frobenius data, and perturbative Lyapunov splittings.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{validate_assumptions, ChainSpec};
use crate::error::{Error, Result};
use crate::llt::{exact_moments, variance_regime, MomentPoint, RegimeConfig, VarianceRegime};
use crate::numeric::{exponential_envelope, normal_pdf, TestKernel};
use crate::observables::WindowObservable;
use crate::sim::{batch_mean, empirical_local_counts, sample_statistic};
use crate::window::{Window, WindowFn};

const ENTRY_TOL: f64 = 1e-12;
const ENUMERATION_LIMIT: usize = 1 << 12;

/// `A_j(x)`, periodic in `j` with period `maps.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveMatrixFamily {
    pub d: usize,
    pub c: f64,
    pub maps: Vec<Vec<DMatrix<f64>>>,
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidArgument("matrices must be square and non-empty".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, k| rows[i][k]))
}

impl PositiveMatrixFamily {
    pub fn new(c: f64, maps: Vec<Vec<DMatrix<f64>>>) -> Result<Self> {
        if !(c >= 1.0) {
            return Err(Error::InvalidArgument(format!("bound C = {c} must be >= 1")));
        }
        let d = maps
            .first()
            .and_then(|m| m.first())
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidArgument("empty matrix family".into()))?;
        for (j, step) in maps.iter().enumerate() {
            if step.is_empty() {
                return Err(Error::InvalidArgument(format!("no matrices at step {j}")));
            }
            for (x, m) in step.iter().enumerate() {
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::InvalidArgument(format!("A_{j}({x}) is not {d}x{d}")));
                }
                if let Some(v) = m.iter().find(|&&v| !(v >= 1.0 / c - ENTRY_TOL && v <= c + ENTRY_TOL)) {
                    return Err(Error::InvalidArgument(format!("A_{j}({x}) has entry {v} outside [1/C, C] with C = {c}")));
                }
            }
        }
        Ok(PositiveMatrixFamily { d, c, maps })
    }

    /// Build from nested rows: `maps[j][x][row][col]`.
    pub fn from_rows(c: f64, maps: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let maps = maps
            .iter()
            .map(|step| step.iter().map(|m| rows_to_matrix(m)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(c, maps)
    }

    /// Same matrix at every step for a single-state chain.
    pub fn constant(a: DMatrix<f64>) -> Result<Self> {
        let c = a.iter().fold(1.0f64, |c, &v| c.max(v).max(1.0 / v));
        Self::new(c, vec![vec![a]])
    }

    pub fn matrix(&self, j: usize, x: usize) -> &DMatrix<f64> {
        &self.maps[j % self.maps.len()][x]
    }

    fn all(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.maps.iter().flatten()
    }

    fn check_chain(&self, chain: &ChainSpec) -> Result<()> {
        for j in 0..=chain.horizon() {
            let have = self.maps[j % self.maps.len()].len();
            if have != chain.size(j) {
                return Err(Error::InvalidArgument(format!(
                    "step {j} has {have} matrices but the chain has {} states",
                    chain.size(j)
                )));
            }
        }
        Ok(())
    }
}

/// Hilbert projective diameter of the image of the positive cone.
pub fn projective_diameter(a: &DMatrix<f64>) -> f64 {
    let d = a.nrows();
    let mut best: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    best = best.max((a[(i, k)] * a[(j, l)] / (a[(i, l)] * a[(j, k)])).ln());
                }
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffRate {
    pub delta_b: f64,
    pub diameter: f64,
    /// `log(C^4 d^2)`.
    pub diameter_bound: f64,
}

pub fn birkhoff_rate(family: &PositiveMatrixFamily) -> BirkhoffRate {
    let diameter = family.all().map(projective_diameter).fold(0.0, f64::max);
    BirkhoffRate {
        delta_b: (diameter / 4.0).tanh(),
        diameter,
        diameter_bound: (family.c.powi(4) * (family.d * family.d) as f64).ln(),
    }
}

/// `max log(max column sum / min column sum)`: distance from `1^T` to `1^T A`.
fn column_spread(family: &PositiveMatrixFamily) -> f64 {
    family
        .all()
        .map(|a| {
            let s = a.row_sum();
            (s.max() / s.min()).ln()
        })
        .fold(0.0, f64::max)
}

/// `F_{j,n} = mu(A_{j+n} ... A_j 1) / mu(A_{j+n} ... A_{j+1} 1)` on the block
/// `x_j..=x_{j+n}`.
pub fn finite_lambda(family: &PositiveMatrixFamily, j: usize, block: &[usize]) -> f64 {
    let d = family.d;
    let mut row = DVector::from_element(d, 1.0).transpose();
    for k in (1..block.len()).rev() {
        row = &row * family.matrix(j + k, block[k]);
        let s = row.sum();
        row /= s;
    }
    (&row * family.matrix(j, block[0])).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialPfData {
    pub window: usize,
    pub birkhoff: BirkhoffRate,
    /// `K` in `|log lambda_j - log F_{j,w}| <= K delta_B^w`.
    pub tail_constant: f64,
    pub tail_bound: f64,
    /// `lambda_j` on `[j, j + w]`.
    pub lambda: Vec<WindowFn<f64>>,
    /// `[d / C^2, d C^2]` violations, if any.
    pub scale_ok: bool,
}

impl SequentialPfData {
    /// `f_j = log lambda_j` as a one-sided window observable.
    pub fn log_observable(&self, chain: &ChainSpec) -> Result<WindowObservable> {
        WindowObservable::new(chain, self.lambda.iter().map(|l| l.map(f64::ln)).collect())
    }
}

pub fn sequential_pf(family: &PositiveMatrixFamily, chain: &ChainSpec, w: usize) -> Result<SequentialPfData> {
    family.check_chain(chain)?;
    validate_assumptions(chain)?.require()?;
    if w > chain.horizon() {
        return Err(Error::HorizonTooShort(format!("window {w} exceeds horizon {}", chain.horizon())));
    }
    let birkhoff = birkhoff_rate(family);
    let tail_constant = column_spread(family) / (1.0 - birkhoff.delta_b);
    let tail_bound = if birkhoff.delta_b == 0.0 && w > 0 { 0.0 } else { tail_constant * birkhoff.delta_b.powi(w as i32) };
    let sizes = chain.sizes();
    let lambda: Vec<WindowFn<f64>> = (0..=chain.horizon() - w)
        .map(|j| WindowFn::from_fn(Window::new(j, sizes[j..=j + w].to_vec()), |c| finite_lambda(family, j, c)))
        .collect();
    let (d, c) = (family.d as f64, family.c);
    let (lo, hi) = (d / (c * c), d * c * c);
    let scale_ok = lambda.iter().flat_map(|l| &l.values).all(|&v| v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
    Ok(SequentialPfData { window: w, birkhoff, tail_constant, tail_bound, lambda, scale_ok })
}

/// Path-wise directions: `nu_j` backward from the sum functional,
/// `lambda_j = nu_{j+1}(A_j 1)`, `h_j` forward with `nu_j(h_j) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathDirections {
    pub lambda: Vec<f64>,
    pub nu: Vec<DVector<f64>>,
    pub h: Vec<DVector<f64>>,
    /// Largest `|nu_j(h_j) - 1|` before renormalization.
    pub drift: f64,
}

pub fn path_directions(family: &PositiveMatrixFamily, path: &[usize]) -> PathDirections {
    let d = family.d;
    let n = path.len();
    let mut nu = vec![DVector::from_element(d, 1.0 / d as f64); n];
    let mut lambda = vec![0.0; n - 1];
    for j in (0..n - 1).rev() {
        let row = nu[j + 1].transpose() * family.matrix(j, path[j]);
        lambda[j] = row.sum();
        nu[j] = row.transpose() / lambda[j];
    }
    let mut h = Vec::with_capacity(n);
    let h0 = DVector::from_element(d, 1.0);
    let s = nu[0].dot(&h0);
    h.push(h0 / s);
    let mut drift: f64 = 0.0;
    for j in 0..n - 1 {
        let mut next = family.matrix(j, path[j]) * &h[j] / lambda[j];
        let s = nu[j + 1].dot(&next);
        drift = drift.max((s - 1.0).abs());
        next /= s;
        h.push(next);
    }
    PathDirections { lambda, nu, h, drift }
}

fn product(family: &PositiveMatrixFamily, path: &[usize], j: usize, n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::identity(family.d, family.d);
    for k in j..j + n {
        p = family.matrix(k, path[k]) * p;
    }
    p
}

/// `max-entry |A_j^n / lambda_{j,n} - h_{j+n} nu_j|` for each `n`.
pub fn rrpf_residuals(family: &PositiveMatrixFamily, path: &[usize], j: usize, ns: &[usize]) -> Vec<f64> {
    let dirs = path_directions(family, path);
    let outer_base = |n: usize| &dirs.h[j + n] * dirs.nu[j].transpose();
    let mut p = DMatrix::identity(family.d, family.d);
    let mut done = 0;
    ns.iter()
        .map(|&n| {
            while done < n {
                p = family.matrix(j + done, path[j + done]) * &p / dirs.lambda[j + done];
                done += 1;
            }
            (&p - outer_base(n)).amax()
        })
        .collect()
}

fn all_paths(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..s).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every path when there are at most `limit` of them, else seeded samples.
fn paths_for(chain: &ChainSpec, samples: usize, seed: u64, limit: usize) -> (Vec<Vec<usize>>, bool) {
    let sizes = chain.sizes();
    let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    match total {
        Some(t) if t <= limit => (all_paths(&sizes), true),
        _ => (crate::sim::sample_paths(chain, samples, seed).paths, false),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrpfCertificate {
    pub j: usize,
    pub ns: Vec<usize>,
    pub residual: Vec<f64>,
    pub c: f64,
    pub delta: f64,
    pub delta_b: f64,
    pub exhaustive: bool,
    pub paths: usize,
    pub pass: bool,
}

/// Residual curve over all paths (tiny instances) or sampled paths, with a
/// fitted `C delta^n` envelope; passes when `delta <= delta_B + slack`.
pub fn rrpf_certificate(
    family: &PositiveMatrixFamily,
    chain: &ChainSpec,
    j: usize,
    ns: &[usize],
    samples: usize,
    seed: u64,
    slack: f64,
) -> Result<RrpfCertificate> {
    family.check_chain(chain)?;
    let n_max = ns.iter().copied().max().unwrap_or(0);
    if j + n_max > chain.horizon() {
        return Err(Error::HorizonTooShort(format!("j + n = {} exceeds horizon {}", j + n_max, chain.horizon())));
    }
    let (paths, exhaustive) = paths_for(chain, samples, seed, ENUMERATION_LIMIT);
    let mut residual = vec![0.0f64; ns.len()];
    for p in &paths {
        for (r, v) in residual.iter_mut().zip(rrpf_residuals(family, p, j, ns)) {
            *r = r.max(v);
        }
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (c, delta) = exponential_envelope(&xs, &residual, 1e-13);
    let delta_b = birkhoff_rate(family).delta_b;
    Ok(RrpfCertificate {
        j,
        ns: ns.to_vec(),
        residual,
        c,
        delta,
        delta_b,
        exhaustive,
        paths: paths.len(),
        pass: delta <= delta_b + slack,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixNorm {
    /// Sum of entries, `mu(A 1)`.
    EntrySum,
    MaxEntry,
}

impl MatrixNorm {
    pub fn log_norm(&self, m: &DMatrix<f64>) -> f64 {
        match self {
            MatrixNorm::EntrySum => m.sum().ln(),
            MatrixNorm::MaxEntry => m.amax().ln(),
        }
    }

    fn offset(&self, d: usize) -> f64 {
        match self {
            MatrixNorm::EntrySum => 0.0,
            MatrixNorm::MaxEntry => 2.0 * (d as f64).ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichPoint {
    pub n: usize,
    pub max_gap: f64,
    pub bound: f64,
    pub paths: usize,
    pub exhaustive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormMc {
    pub n: usize,
    pub samples: usize,
    pub mean_over_n: f64,
    pub se_over_n: f64,
    pub exact_over_n: f64,
    /// `3 SE + K / n`.
    pub allowance: f64,
    pub pass: bool,
    /// `sigma_n sup_u |E g(log||A|| - u) - Gaussian local law|`.
    pub local_scaled_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogNormReport {
    pub norm: MatrixNorm,
    pub window: usize,
    pub sandwich: Vec<SandwichPoint>,
    pub sandwich_ok: bool,
    pub moments: Vec<MomentPoint>,
    pub regime: VarianceRegime,
    pub mc: Option<LogNormMc>,
}

/// `log d + 2 log C + n K delta_B^w`, plus the norm offset.
pub fn sandwich_constant(family: &PositiveMatrixFamily, pf: &SequentialPfData, norm: MatrixNorm, n: usize) -> f64 {
    (family.d as f64).ln() + 2.0 * family.c.ln() + norm.offset(family.d) + n as f64 * pf.tail_bound
}

fn sum_log_lambda(pf: &SequentialPfData, path: &[usize], n: usize) -> f64 {
    (0..n).map(|j| pf.lambda[j].eval_path(path).ln()).sum()
}

pub struct LogNormConfig {
    pub window: usize,
    pub norm: MatrixNorm,
    pub n_grid: Vec<usize>,
    /// Sandwich check up to this `n`.
    pub sandwich_n: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Log-norm pipeline: sandwich against `S_n log lambda`, exact moments and
/// variance regime of `S_n log lambda`, and a Monte Carlo comparison of
/// `log ||A_0^n||` at the largest grid point.
pub fn lognorm_llt(family: &PositiveMatrixFamily, chain: &ChainSpec, cfg: &LogNormConfig) -> Result<LogNormReport> {
    let pf = sequential_pf(family, chain, cfg.window)?;
    let f = pf.log_observable(chain)?;
    let w = cfg.window;
    let mut sandwich = Vec::new();
    for n in 1..=cfg.sandwich_n.min(f.len()) {
        let sub = chain.truncate(n - 1 + w);
        let (paths, exhaustive) = paths_for(&sub, cfg.samples.min(1 << 14), cfg.seed ^ n as u64, 1 << 18);
        let bound = sandwich_constant(family, &pf, cfg.norm, n);
        let max_gap = paths
            .iter()
            .map(|p| (cfg.norm.log_norm(&product(family, p, 0, n)) - sum_log_lambda(&pf, p, n)).abs())
            .fold(0.0, f64::max);
        sandwich.push(SandwichPoint { n, max_gap, bound, paths: paths.len(), exhaustive });
    }
    let sandwich_ok = sandwich.iter().all(|s| s.max_gap <= s.bound);
    let grid: Vec<usize> = cfg.n_grid.iter().copied().filter(|&n| n >= 1 && n <= f.len()).collect();
    let moments = exact_moments(chain, &f, &grid)?.points;
    let regime = variance_regime(chain, &f, &grid, &RegimeConfig::default())?;
    let mc = match grid.last() {
        Some(&n) if cfg.samples > 0 => {
            let k = sandwich_constant(family, &pf, cfg.norm, n);
            let norm = cfg.norm;
            let batch = sample_statistic(chain, n, cfg.samples, cfg.seed, |p| norm.log_norm(&product(family, p, 0, n)))?;
            let (mean, se) = batch_mean(&batch.values);
            let m = moments.last().expect("grid is non-empty");
            let nf = n as f64;
            let allowance = 3.0 * se / nf + k / nf;
            let local_scaled_error = (m.var > 1e-9).then(|| {
                let sigma = m.var.sqrt();
                let g = TestKernel::triangle(1.0);
                let us: Vec<f64> = (0..41).map(|i| m.mean + (i as f64 - 20.0) * 0.15 * sigma).collect();
                let est = empirical_local_counts(&batch, &g, &us, 30);
                est.iter()
                    .map(|e| (sigma * e.mean - normal_pdf((e.u - m.mean) / sigma)).abs())
                    .fold(0.0, f64::max)
            });
            Some(LogNormMc {
                n,
                samples: cfg.samples,
                mean_over_n: mean / nf,
                se_over_n: se / nf,
                exact_over_n: m.mean / nf,
                allowance,
                pass: (mean - m.mean).abs() / nf <= allowance,
                local_scaled_error,
            })
        }
        _ => None,
    };
    Ok(LogNormReport { norm: cfg.norm, window: w, sandwich, sandwich_ok, moments, regime, mc })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingDirection {
    /// Index in increasing order of `|lambda_i|`.
    pub index: usize,
    pub base_lambda: f64,
    pub base_vector: Vec<f64>,
    /// `(j, lambda_{j,i})` on the interior.
    pub lambda: Vec<(usize, f64)>,
    pub vectors: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub max_residual: f64,
    pub lambda_deviation: f64,
    pub vector_deviation: f64,
    /// Worst angle between the window-`w` and window-`w + 5` directions.
    pub window_stability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicSplitting {
    pub eps: f64,
    pub window: usize,
    pub gap: f64,
    pub directions: Vec<SplittingDirection>,
    /// Smallest transversality singular value seen.
    pub min_transversality: f64,
}

fn orthonormal(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Sorted real eigenpairs of `a` by increasing modulus, with unit vectors.
pub fn real_eigenpairs(a: &DMatrix<f64>) -> Result<Vec<(f64, DVector<f64>)>> {
    let d = a.nrows();
    let ev = a
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::IllConditioned("base matrix has complex eigenvalues".into()))?;
    let mut vals: Vec<f64> = ev.iter().copied().collect();
    vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    vals.iter()
        .map(|&l| {
            let m = a - DMatrix::identity(d, d) * l;
            let svd = m.svd(false, true);
            let vt = svd.v_t.expect("requested V^T");
            let k = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .map(|x| x.0)
                .unwrap_or(0);
            let mut v: DVector<f64> = vt.row(k).transpose();
            let i = v.iamax();
            if v[i] < 0.0 {
                v = -v;
            }
            Ok((l, v))
        })
        .collect()
}

/// Fixed orthonormal frame in general position with respect to coordinate
/// subspaces.
fn generic_frame(d: usize) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = crate::sim::task_rng(0x5eed, d as u64);
    orthonormal(DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5))
}

fn split_at(
    mats: &[DMatrix<f64>],
    j: usize,
    w: usize,
    rank: usize,
) -> Result<(DVector<f64>, f64)> {
    let d = mats[0].nrows();
    let start = generic_frame(d);
    let mut q = start.clone();
    for m in &mats[j - w..j] {
        q = orthonormal(m * q);
    }
    let mut p = start;
    for m in mats[j..j + w].iter().rev() {
        p = orthonormal(m.transpose() * p);
    }
    let fast = q.columns(0, rank + 1).into_owned();
    if rank == 0 {
        return Ok((fast.column(0).into_owned(), 1.0));
    }
    let top = p.columns(0, rank).into_owned();
    let m = top.transpose() * &fast;
    let eig = (m.transpose() * &m).symmetric_eigen();
    let mut order: Vec<usize> = (0..=rank).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let transversality = eig.eigenvalues[order[1]].max(0.0).sqrt();
    let c = eig.eigenvectors.column(order[0]).into_owned();
    let v = fast * c;
    Ok((v.normalize(), transversality))
}

/// Directions `h_{j,i}` with `A_j h_{j,i} = lambda_{j,i} h_{j+1,i}` for
/// `A_j = a + eps b_j`, from the window `[j - w, j + w]`, on the interior
/// `w <= j < len - w - 1`.
pub fn lyapunov_splitting(
    a: &DMatrix<f64>,
    perturbation: &[DMatrix<f64>],
    eps: f64,
    w: usize,
    gap_fraction: f64,
) -> Result<HyperbolicSplitting> {
    let d = a.nrows();
    let pairs = real_eigenpairs(a)?;
    let mods: Vec<f64> = pairs.iter().map(|p| p.0.abs()).collect();
    let gap = mods.windows(2).map(|m| m[1] - m[0]).fold(f64::INFINITY, f64::min);
    if mods.iter().any(|&m| m == 0.0) {
        return Err(Error::IllConditioned("base matrix is singular".into()));
    }
    let b_norm = perturbation.iter().map(|b| b.norm()).fold(0.0, f64::max);
    if d > 1 && eps * b_norm > gap_fraction * gap {
        return Err(Error::IllConditioned(format!(
            "eps ||B|| = {:.3e} exceeds {gap_fraction} of the eigenvalue gap {gap:.3e}",
            eps * b_norm
        )));
    }
    let mats: Vec<DMatrix<f64>> = perturbation.iter().map(|b| a + b * eps).collect();
    let len = mats.len();
    if len < 2 * (w + 5) + 2 {
        return Err(Error::HorizonTooShort(format!("{len} matrices cannot host window {w}")));
    }
    let interior: Vec<usize> = (w + 5..len - w - 5).collect();
    let mut min_t = f64::INFINITY;
    let mut directions = Vec::with_capacity(d);
    for (i, (base_lambda, base)) in pairs.iter().enumerate() {
        let rank = d - 1 - i;
        let mut hs = Vec::with_capacity(interior.len() + 1);
        let mut stab: f64 = 0.0;
        for &j in interior.iter().chain(std::iter::once(&(len - w - 5))) {
            let (mut v, t) = split_at(&mats, j, w, rank)?;
            let (mut v5, _) = split_at(&mats, j, w + 5, rank)?;
            min_t = min_t.min(t);
            if t < 1e-10 {
                return Err(Error::IllConditioned(format!(
                    "fast and slow subspaces nearly parallel at step {j}: singular value {t:.3e}"
                )));
            }
            if v.dot(base) < 0.0 {
                v = -v;
            }
            if v5.dot(base) < 0.0 {
                v5 = -v5;
            }
            stab = stab.max((&v - &v5).norm());
            hs.push(v);
        }
        let mut lambda = Vec::with_capacity(interior.len());
        let mut residual = Vec::with_capacity(interior.len());
        for (k, &j) in interior.iter().enumerate() {
            let image = &mats[j] * &hs[k];
            let l = image.dot(&hs[k + 1]);
            residual.push((image - &hs[k + 1] * l).norm());
            lambda.push((j, l));
        }
        let lambda_deviation = lambda.iter().map(|x| (x.1 - base_lambda).abs()).fold(0.0, f64::max);
        let vector_deviation = hs.iter().map(|h| (h - base).norm()).fold(0.0, f64::max);
        let max_residual = residual.iter().copied().fold(0.0, f64::max);
        hs.pop();
        directions.push(SplittingDirection {
            index: i,
            base_lambda: *base_lambda,
            base_vector: base.iter().copied().collect(),
            lambda,
            vectors: hs.iter().map(|h| h.iter().copied().collect()).collect(),
            residual,
            max_residual,
            lambda_deviation,
            vector_deviation,
            window_stability: stab,
        });
    }
    Ok(HyperbolicSplitting { eps, window: w, gap, directions, min_transversality: min_t })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsStudyPoint {
    pub eps: f64,
    pub lambda_deviation: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsStudy {
    pub points: Vec<EpsStudyPoint>,
    /// `max ratio / min ratio`; 1 for exactly linear shrinkage.
    pub spread: f64,
    pub linear: bool,
}

/// `sup_{j,i} |lambda_{j,i} - lambda_i| / eps` across `eps_grid`; linear
/// within a factor 2 when the ratios agree to that factor.
pub fn eps_study(a: &DMatrix<f64>, perturbation: &[DMatrix<f64>], eps_grid: &[f64], w: usize) -> Result<EpsStudy> {
    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let s = lyapunov_splitting(a, perturbation, eps, w, 0.5)?;
        let dev = s.directions.iter().map(|d| d.lambda_deviation).fold(0.0, f64::max);
        points.push(EpsStudyPoint { eps, lambda_deviation: dev, ratio: dev / eps });
    }
    let hi = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let lo = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(EpsStudy { points, spread, linear: spread <= 2.0 })
}

/// Seeded perturbation sequence with `max |entry| <= 1 / d` so `||B||_2 <= 1`.
pub fn random_perturbation(d: usize, len: usize, seed: u64) -> Vec<DMatrix<f64>> {
    use rand::Rng;
    let mut rng = crate::sim::task_rng(seed, 0);
    (0..len)
        .map(|_| DMatrix::from_fn(d, d, |_, _| (rng.random::<f64>() * 2.0 - 1.0) / d as f64))
        .collect()
}
