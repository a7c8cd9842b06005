//! Backward transfer-operator cocycles, their complex twists, operator norm
//! bounds and sequential Perron-Frobenius data.
//!
//! Functions at time `j` live on `V_j = X_j x ... x X_{j+m-1}`. One step of
//! the twisted cocycle maps `h` on `V_j` to
//! `(L_{j,z} h)(v') = sum_b B_j[v'_0][b] exp(z f_j(b, v')) h(b, v'_0..v'_{m-2})`
//! on `V_{j+1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{window_law, Backward, ChainSpec};
use crate::error::{Error, Result};
use crate::numeric::exponential_envelope;
use crate::observables::{variation, variation_complex, WindowObservable};
use crate::window::{Window, WindowFn};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
struct Step {
    nx: usize,
    rows: usize,
    cols: usize,
    stride_b: usize,
    s_last: usize,
    coef: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct TwistedCocycle {
    pub z: Complex64,
    width: usize,
    sizes: Vec<usize>,
    a: f64,
    steps: Vec<Step>,
}

impl TwistedCocycle {
    /// Cocycle of `f` at complex parameter `z`, on the smallest admissible width.
    pub fn build(chain: &ChainSpec, bw: &Backward, f: &WindowObservable, z: Complex64) -> Result<Self> {
        Self::build_with_width(chain, bw, Some(f), z, f.max_future().max(1))
    }

    /// Twist at real frequency `t`, i.e. `z = i t`.
    pub fn at_frequency(chain: &ChainSpec, bw: &Backward, f: &WindowObservable, t: f64) -> Result<Self> {
        Self::build(chain, bw, f, Complex64::new(0.0, t))
    }

    /// Untwisted cocycle (plain conditional expectations) on width `width`.
    pub fn untwisted(chain: &ChainSpec, bw: &Backward, width: usize) -> Result<Self> {
        Self::build_with_width(chain, bw, None, ZERO, width)
    }

    pub fn build_with_width(
        chain: &ChainSpec,
        bw: &Backward,
        f: Option<&WindowObservable>,
        z: Complex64,
        width: usize,
    ) -> Result<Self> {
        if let Some(f) = f {
            if !f.is_one_sided() {
                return Err(Error::TwoSided);
            }
            if f.max_future() > width {
                return Err(Error::InvalidArgument(format!(
                    "width {width} below observable future depth {}",
                    f.max_future()
                )));
            }
        }
        let horizon = chain.horizon();
        if width == 0 || width > horizon {
            return Err(Error::HorizonTooShort(format!("width {width} does not fit horizon {horizon}")));
        }
        let sizes = chain.sizes();
        let mut count = horizon - width + 1;
        if let Some(f) = f {
            count = count.min(f.len());
        }
        let steps = (0..count)
            .map(|j| {
                let out = Window::new(j + 1, sizes[j + 1..j + 1 + width].to_vec());
                let nx = sizes[j];
                let rows = out.count();
                let s_last = sizes[j + width];
                let stride_b = rows / s_last;
                let mut coef = vec![ZERO; rows * nx];
                let term = f.map(|f| f.term(j));
                for v in 0..rows {
                    let x = v / out.stride(0);
                    let row = bw.row(j, x);
                    for b in 0..nx {
                        let mut c = Complex64::new(row[b], 0.0);
                        if let Some(t) = term {
                            let q = t.window.len() - 1;
                            let prefix = v / out.sizes[q..].iter().product::<usize>();
                            let idx = b * (t.window.count() / nx) + prefix;
                            c *= (z * t.values[idx]).exp();
                        }
                        coef[v * nx + b] = c;
                    }
                }
                Step { nx, rows, cols: nx * stride_b, stride_b, s_last, coef }
            })
            .collect();
        Ok(TwistedCocycle { z, width, sizes, a: chain.a(), steps })
    }

    /// Number of steps available.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// The function space `V_j`.
    pub fn space(&self, j: usize) -> Window {
        Window::new(j, self.sizes[j..j + self.width].to_vec())
    }

    pub fn apply(&self, j: usize, h: &[Complex64]) -> Vec<Complex64> {
        let s = &self.steps[j];
        (0..s.rows)
            .map(|v| {
                let rest = v / s.s_last;
                (0..s.nx).map(|b| s.coef[v * s.nx + b] * h[b * s.stride_b + rest]).sum()
            })
            .collect()
    }

    /// Dual action on weight vectors: `(L^* k)(h) = k(L h)`.
    pub fn adjoint(&self, j: usize, k: &[Complex64]) -> Vec<Complex64> {
        let s = &self.steps[j];
        let mut out = vec![ZERO; s.cols];
        for (v, &kv) in k.iter().enumerate() {
            let rest = v / s.s_last;
            for b in 0..s.nx {
                out[b * s.stride_b + rest] += s.coef[v * s.nx + b] * kv;
            }
        }
        out
    }

    pub fn step_matrix(&self, j: usize) -> DMatrix<Complex64> {
        let s = &self.steps[j];
        let mut m = DMatrix::from_element(s.rows, s.cols, ZERO);
        for v in 0..s.rows {
            let rest = v / s.s_last;
            for b in 0..s.nx {
                m[(v, b * s.stride_b + rest)] = s.coef[v * s.nx + b];
            }
        }
        m
    }

    /// `L_{j+n-1} ... L_j`; identity for `n = 0`.
    pub fn compose(&self, j: usize, n: usize) -> Result<DMatrix<Complex64>> {
        if j + n > self.len() {
            return Err(Error::InvalidArgument(format!(
                "interval [{j}, {}) exceeds {} available steps",
                j + n,
                self.len()
            )));
        }
        let dim = self.space(j).count();
        let mut m = DMatrix::<Complex64>::identity(dim, dim);
        for k in j..j + n {
            m = self.step_matrix(k) * m;
        }
        Ok(m)
    }

    /// `L_{j+n-1} ... L_j h` without forming matrices.
    pub fn apply_n(&self, j: usize, n: usize, h: &[Complex64]) -> Vec<Complex64> {
        let mut v = h.to_vec();
        for k in j..j + n {
            v = self.apply(k, &v);
        }
        v
    }

    /// `E exp(z S_n) = sum_v P(V_n = v) (L^n 1)(v)`.
    pub fn char_function(&self, chain: &ChainSpec, marginals: &[Vec<f64>], n: usize) -> Result<Complex64> {
        if n > self.len() || n + self.width > chain.horizon() + 1 {
            return Err(Error::HorizonTooShort(format!("n = {n} with width {} exceeds horizon", self.width)));
        }
        let h = self.apply_n(0, n, &vec![ONE; self.space(0).count()]);
        let law = window_law(chain, marginals, n, self.width);
        Ok(law.iter().zip(&h).map(|(p, v)| v * *p).sum())
    }
}

pub fn sup_norm_c(h: &[Complex64]) -> f64 {
    h.iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// `||h|| = sup + variation` on the window.
pub fn full_norm(window: &Window, h: &[Complex64], a: f64) -> f64 {
    sup_norm_c(h) + variation_complex(window, h, a)
}

/// `||h||_* = max(sup, variation / (2 C_1))`.
pub fn star_norm(window: &Window, h: &[Complex64], a: f64, c1: f64) -> f64 {
    sup_norm_c(h).max(variation_complex(window, h, a) / (2.0 * c1))
}

/// Row data of a composed operator `M = L^n` from `V_j` to `V_{j+n}`:
/// `R = max_x sum |M[x, .]|` and
/// `A = max_{x != y} sum_b |w_x(b) - w_y(b)| / a^{k(x,y)}`,
/// where `w_x(b)` is the weight of `h(b, x_0..x_{m-n-1})` in `(M h)(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowData {
    pub r: f64,
    pub a_term: f64,
    pub n: usize,
    pub width: usize,
}

pub fn row_data(m: &DMatrix<Complex64>, out: &Window, n: usize, a: f64) -> RowData {
    let width = out.len();
    let rows = out.count();
    let (tail, xprime_count) = if n >= width {
        (1, 1)
    } else {
        (out.sizes[width - n..].iter().product::<usize>(), out.sizes[..width - n].iter().product::<usize>())
    };
    let nb = m.ncols() / xprime_count;
    let weights: Vec<Vec<Complex64>> = (0..rows)
        .map(|x| {
            let xp = if n >= width { 0 } else { x / tail };
            (0..nb).map(|b| m[(x, b * xprime_count + xp)]).collect()
        })
        .collect();
    let r = weights
        .iter()
        .map(|w| w.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let decoded: Vec<Vec<usize>> = (0..rows).map(|x| out.decode(x)).collect();
    let mut a_term: f64 = 0.0;
    for x in 0..rows {
        for y in x + 1..rows {
            let k = (0..width).position(|c| decoded[x][c] != decoded[y][c]).unwrap();
            let d: f64 = weights[x].iter().zip(&weights[y]).map(|(p, q)| (p - q).norm()).sum();
            a_term = a_term.max(d / a.powi(k as i32));
        }
    }
    RowData { r, a_term, n, width }
}

impl RowData {
    /// Certified bound on `||M||_*`: `max(R, A / (2 C_1) + a^n R [n < m])`.
    pub fn star_bound(&self, a: f64, c1: f64) -> f64 {
        let b = if self.n < self.width { a.powi(self.n as i32) * self.r } else { 0.0 };
        self.r.max(self.a_term / (2.0 * c1) + b)
    }
}

/// Lasota-Yorke constant `C_1 = max(1, max (R + A))` over the given
/// cocycles, start times `j` (every `j_stride`-th) and lengths `1..=n_max`.
pub fn ly_constant(cocycles: &[TwistedCocycle], n_max: usize, j_stride: usize) -> f64 {
    cocycles
        .par_iter()
        .map(|c| {
            let mut best: f64 = 1.0;
            let mut j = 0;
            while j < c.len() {
                let mut m = DMatrix::<Complex64>::identity(c.space(j).count(), c.space(j).count());
                for n in 1..=n_max.min(c.len() - j) {
                    m = c.step_matrix(j + n - 1) * m;
                    let rd = row_data(&m, &c.space(j + n), n, c.a);
                    best = best.max(rd.r + rd.a_term);
                }
                j += j_stride.max(1);
            }
            best
        })
        .reduce(|| 1.0, f64::max)
}

/// Smallest `k` with `2 C_1 a^k <= 1`.
pub fn k0(c1: f64, a: f64) -> usize {
    ((1.0 / (2.0 * c1)).ln() / a.ln()).ceil().max(1.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
}

/// Certified upper bound of `||L^{[j, j+n)}||_*` from the composed matrix,
/// capped at 1 once `n >= k_0`.
pub fn direct_upper(c: &TwistedCocycle, m: &DMatrix<Complex64>, j: usize, n: usize, c1: f64) -> f64 {
    let rd = row_data(m, &c.space(j + n), n, c.a);
    let u = rd.star_bound(c.a, c1);
    if n >= k0(c1, c.a) {
        u.min(1.0)
    } else {
        u
    }
}

fn random_phases(len: usize, seed: u64, stream: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len)
        .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
        .collect()
}

/// Sampled lower bound of `||M||_*` over the constant function, phase-aligned
/// rows and `samples` seeded random unit-modulus functions.
pub fn sampled_lower(
    m: &DMatrix<Complex64>,
    input: &Window,
    output: &Window,
    a: f64,
    c1: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let cols = m.ncols();
    let ratio = |h: &[Complex64]| {
        let v = DMatrix::from_column_slice(cols, 1, h);
        let out = m * v;
        star_norm(output, out.as_slice(), a, c1) / star_norm(input, h, a, c1)
    };
    let mut best = ratio(&vec![ONE; cols]);
    for x in 0..m.nrows().min(16) {
        let h: Vec<Complex64> = (0..cols)
            .map(|c| {
                let e = m[(x, c)];
                if e.norm() > 0.0 { e.conj() / e.norm() } else { ONE }
            })
            .collect();
        best = best.max(ratio(&h));
    }
    for s in 0..samples {
        best = best.max(ratio(&random_phases(cols, seed, s as u64)));
    }
    best
}

/// Sandwich `lower <= ||L^{[j, j+n)}||_* <= upper`.
pub fn norm_estimate(c: &TwistedCocycle, j: usize, n: usize, c1: f64, samples: usize, seed: u64) -> Result<NormEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("interval length must be at least 1".into()));
    }
    let m = c.compose(j, n)?;
    let upper = direct_upper(c, &m, j, n, c1);
    let lower = sampled_lower(&m, &c.space(j), &c.space(j + n), c.a, c1, samples, seed);
    Ok(NormEstimate { lower: lower.min(upper), upper })
}

/// Certified upper bounds for all sub-intervals of `[j0, j0 + len)`,
/// closed under submultiplicativity. `table[s][l]` bounds `[j0+s, j0+s+l)`.
pub fn upper_table(c: &TwistedCocycle, j0: usize, len: usize, c1: f64) -> Result<Vec<Vec<f64>>> {
    if j0 + len > c.len() {
        return Err(Error::InvalidArgument("interval exceeds cocycle".into()));
    }
    let mut table = vec![vec![f64::INFINITY; len + 1]; len + 1];
    for s in 0..len {
        let j = j0 + s;
        let dim = c.space(j).count();
        let mut m = DMatrix::<Complex64>::identity(dim, dim);
        table[s][0] = 1.0;
        for l in 1..=len - s {
            m = c.step_matrix(j + l - 1) * m;
            table[s][l] = direct_upper(c, &m, j, l, c1);
        }
    }
    table[len][0] = 1.0;
    for l in 2..=len {
        for s in 0..=len - l {
            let mut best = table[s][l];
            for k in 1..l {
                best = best.min(table[s][k] * table[s + k][l - k]);
            }
            table[s][l] = best;
        }
    }
    Ok(table)
}

/// Certified upper bounds `U(n)` for `[j0, j0 + n)`, `n = 1..=n_max`, using
/// the direct bound and splits whose last block has length `<= max_block`.
pub fn upper_prefix(c: &TwistedCocycle, j0: usize, n_max: usize, c1: f64, max_block: usize) -> Result<Vec<f64>> {
    if j0 + n_max > c.len() {
        return Err(Error::InvalidArgument("interval exceeds cocycle".into()));
    }
    // blocks[e][l] = direct bound of the block [j0+e-l, j0+e)
    let mut blocks: Vec<Vec<f64>> = vec![Vec::new(); n_max + 1];
    for s in 0..n_max {
        let j = j0 + s;
        let dim = c.space(j).count();
        let mut m = DMatrix::<Complex64>::identity(dim, dim);
        for l in 1..=max_block.min(n_max - s) {
            m = c.step_matrix(j + l - 1) * m;
            let e = s + l;
            if blocks[e].len() <= l {
                blocks[e].resize(l + 1, f64::INFINITY);
            }
            blocks[e][l] = direct_upper(c, &m, j, l, c1);
        }
    }
    let mut u = vec![1.0; n_max + 1];
    let dim = c.space(j0).count();
    let mut full = DMatrix::<Complex64>::identity(dim, dim);
    for n in 1..=n_max {
        full = c.step_matrix(j0 + n - 1) * full;
        let mut best = direct_upper(c, &full, j0, n, c1);
        for l in 1..blocks[n].len().min(n) {
            best = best.min(u[n - l] * blocks[n][l]);
        }
        u[n] = best;
    }
    Ok(u[1..].to_vec())
}

/// Result of the untwisted decay scan `||L_j^n g - kappa_j(g)||_{j+n}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpfDecay {
    pub j: usize,
    pub curve: Vec<f64>,
    pub c: f64,
    pub gamma: f64,
    /// `delta + a`, the one-step contraction ceiling.
    pub ceiling: f64,
    pub dominated: bool,
}

pub fn rpf_decay(chain: &ChainSpec, bw: &Backward, g: &WindowFn<f64>, n_max: usize, delta: f64) -> Result<RpfDecay> {
    let j = g.window.start;
    let w = g.window.len();
    let cocycle = TwistedCocycle::untwisted(chain, bw, w)?;
    if j + n_max > cocycle.len() {
        return Err(Error::HorizonTooShort(format!("decay to n = {n_max} from j = {j} exceeds horizon")));
    }
    let law = window_law(chain, &bw.marginals, j, w);
    let kappa: f64 = law.iter().zip(&g.values).map(|(p, v)| p * v).sum();
    let mut h: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut curve = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        h = cocycle.apply(j + n - 1, &h);
        let diff: Vec<f64> = h.iter().map(|v| v.re - kappa).collect();
        let f = WindowFn { window: cocycle.space(j + n), values: diff };
        curve.push(f.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) + variation(&f, chain.a()));
    }
    let scale = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let ns: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    let (c, gamma) = exponential_envelope(&ns, &curve, 1e-13 * scale);
    let dominated = curve
        .iter()
        .zip(&ns)
        .all(|(&y, &n)| y <= c * gamma.powf(n) * (1.0 + 1e-9) + 1e-13 * scale);
    Ok(RpfDecay { j, curve, c, gamma, ceiling: delta + chain.a(), dominated })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpfOptions {
    /// Largest admissible `|z|`.
    pub radius: f64,
    pub tol: f64,
    /// Contraction rate used for the burn-in; `None` uses `delta`.
    pub rate: Option<f64>,
}

impl Default for RpfOptions {
    fn default() -> Self {
        RpfOptions { radius: 0.5, tol: 1e-10, rate: None }
    }
}

/// Sequential Perron-Frobenius triple on `[0, n]`.
#[derive(Clone, Debug)]
pub struct RpfTriple {
    pub z: Complex64,
    pub lambda: Vec<Complex64>,
    pub h: Vec<Vec<Complex64>>,
    pub kappa: Vec<Vec<Complex64>>,
    /// `||L_{j,z} h_j - lambda_j h_{j+1}||_inf`.
    pub residual_profile: Vec<f64>,
    /// Distance of `(lambda_j, h_j, kappa_j)` to the triple obtained from
    /// perturbed boundary data.
    pub boundary_profile: Vec<f64>,
    pub burn_in: usize,
}

impl RpfTriple {
    pub fn interior(&self) -> std::ops::Range<usize> {
        let n = self.lambda.len();
        if 2 * self.burn_in >= n {
            return 0..0;
        }
        self.burn_in..n - self.burn_in
    }

    pub fn interior_residual(&self) -> f64 {
        self.interior().map(|j| self.residual_profile[j]).fold(0.0, f64::max)
    }

    pub fn interior_boundary(&self) -> f64 {
        self.interior().map(|j| self.boundary_profile[j]).fold(0.0, f64::max)
    }

    /// `prod_{j < n} lambda_j`.
    pub fn lambda_product(&self, n: usize) -> Complex64 {
        self.lambda[..n].iter().product()
    }
}

fn dot(k: &[Complex64], h: &[Complex64]) -> Complex64 {
    k.iter().zip(h).map(|(a, b)| a * b).sum()
}

fn rpf_run(
    c: &TwistedCocycle,
    n: usize,
    h0: Vec<Complex64>,
    kn: Vec<Complex64>,
) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    let mut hs = vec![h0];
    for j in 0..n {
        let mut next = c.apply(j, &hs[j]);
        let s = sup_norm_c(&next);
        if !(s > 1e-250) {
            return Err(Error::NormalizationCollapse { step: j, value: s });
        }
        next.iter_mut().for_each(|v| *v /= s);
        hs.push(next);
    }
    let mut ks = vec![Vec::new(); n + 1];
    let mass: Complex64 = kn.iter().sum();
    ks[n] = kn.iter().map(|v| v / mass).collect();
    for j in (0..n).rev() {
        let k = c.adjoint(j, &ks[j + 1]);
        let total: Complex64 = k.iter().sum();
        if total.norm() < 1e-12 {
            return Err(Error::NormalizationCollapse { step: j, value: total.norm() });
        }
        ks[j] = k.iter().map(|v| v / total).collect();
    }
    for j in 0..=n {
        let norm = dot(&ks[j], &hs[j]);
        if norm.norm() < 1e-12 * sup_norm_c(&hs[j]) {
            return Err(Error::NormalizationCollapse { step: j, value: norm.norm() });
        }
        hs[j].iter_mut().for_each(|v| *v /= norm);
    }
    let lambda = (0..n).map(|j| dot(&ks[j + 1], &c.apply(j, &hs[j]))).collect();
    Ok((lambda, hs, ks))
}

/// Sequential complex Perron-Frobenius triple for `L_{j,z}`, `j < n`.
///
/// `h` is obtained by iterating the cocycle forward from `1`, `kappa` by
/// iterating the dual backward from the law of `V_n`; `lambda_j =
/// kappa_{j+1}(L_{j,z} h_j)`. The boundary profile compares with a second
/// run started from a seeded positive function and the uniform weight.
pub fn complex_rpf(
    chain: &ChainSpec,
    bw: &Backward,
    f: &WindowObservable,
    z: Complex64,
    n: usize,
    opts: &RpfOptions,
) -> Result<RpfTriple> {
    if z.norm() > opts.radius {
        return Err(Error::InvalidArgument(format!(
            "|z| = {} exceeds the configured radius {}",
            z.norm(),
            opts.radius
        )));
    }
    let c = TwistedCocycle::build(chain, bw, f, z)?;
    if n > c.len() || n + c.width > chain.horizon() + 1 {
        return Err(Error::HorizonTooShort(format!("n = {n} exceeds the cocycle horizon")));
    }
    let d0 = c.space(0).count();
    let dn = c.space(n).count();
    let law: Vec<Complex64> = window_law(chain, &bw.marginals, n, c.width)
        .into_iter()
        .map(|p| Complex64::new(p, 0.0))
        .collect();
    let (lambda, h, kappa) = rpf_run(&c, n, vec![ONE; d0], law)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let h0: Vec<Complex64> = (0..d0).map(|_| Complex64::new(0.5 + rng.random::<f64>(), 0.0)).collect();
    let (lambda2, h2, kappa2) = rpf_run(&c, n, h0, vec![ONE; dn])?;

    let residual_profile = (0..n)
        .map(|j| {
            let lh = c.apply(j, &h[j]);
            lh.iter().zip(&h[j + 1]).map(|(a, b)| (a - lambda[j] * b).norm()).fold(0.0, f64::max)
        })
        .collect();
    let boundary_profile = (0..n)
        .map(|j| {
            let dh = h[j].iter().zip(&h2[j]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let dk = kappa[j].iter().zip(&kappa2[j]).map(|(a, b)| (a - b).norm()).sum::<f64>();
            dh.max(dk).max((lambda[j] - lambda2[j]).norm())
        })
        .collect();
    let rate = opts
        .rate
        .unwrap_or_else(|| crate::chain::validate_assumptions(chain).map(|r| r.delta).unwrap_or(0.5))
        .clamp(1e-3, 1.0 - 1e-6);
    let burn_in = (opts.tol.ln() / rate.ln()).ceil().max(1.0) as usize;
    Ok(RpfTriple { z, lambda, h, kappa, residual_profile, boundary_profile, burn_in })
}

/// `||L_j^{z,n} g - lambda_{j,n} kappa_j(g) h_{j+n}||_{j+n}` for `n = 1..=n_max`.
pub fn expansion_profile(
    chain: &ChainSpec,
    bw: &Backward,
    f: &WindowObservable,
    triple: &RpfTriple,
    j: usize,
    g: &[Complex64],
    n_max: usize,
) -> Result<Vec<f64>> {
    let c = TwistedCocycle::build(chain, bw, f, triple.z)?;
    let kg = dot(&triple.kappa[j], g);
    let mut v = g.to_vec();
    let mut lam = ONE;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max.min(triple.lambda.len() - j) {
        v = c.apply(j + n - 1, &v);
        lam *= triple.lambda[j + n - 1];
        let d: Vec<Complex64> = v.iter().zip(&triple.h[j + n]).map(|(a, b)| a - lam * kg * b).collect();
        out.push(full_norm(&c.space(j + n), &d, chain.a()));
    }
    Ok(out)
}

/// Both sides of the Lasota-Yorke inequality for one test function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyCheck {
    pub t: f64,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub sup_in: f64,
    pub sup_out: f64,
    pub holds: bool,
}

/// `||L_{j,t}^n h||_{j+n} <= C_1 (||h||_inf + a^n v(h))` and
/// `||L_{j,t}^n h||_inf <= ||h||_inf` on a grid of `t` and `n`.
pub fn lasota_yorke_check(
    chain: &ChainSpec,
    bw: &Backward,
    f: &WindowObservable,
    j: usize,
    h: &[Complex64],
    ts: &[f64],
    ns: &[usize],
    c1: f64,
) -> Result<Vec<LyCheck>> {
    let mut out = Vec::new();
    for &t in ts {
        let c = TwistedCocycle::at_frequency(chain, bw, f, t)?;
        let input = c.space(j);
        let sup_in = sup_norm_c(h);
        let var_in = variation_complex(&input, h, chain.a());
        for &n in ns {
            if j + n > c.len() {
                continue;
            }
            let v = c.apply_n(j, n, h);
            let lhs = full_norm(&c.space(j + n), &v, chain.a());
            let rhs = c1 * (sup_in + chain.a().powi(n as i32) * var_in);
            let sup_out = sup_norm_c(&v);
            out.push(LyCheck {
                t,
                n,
                lhs,
                rhs,
                sup_in,
                sup_out,
                holds: lhs <= rhs * (1.0 + 1e-12) && sup_out <= sup_in * (1.0 + 1e-12),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockDecomposition {
    /// Contracting blocks `[start, end)`.
    pub blocks: Vec<(usize, usize)>,
    /// Complementary blocks.
    pub gaps: Vec<(usize, usize)>,
    pub count: usize,
    pub theta: f64,
    pub k0: usize,
}

/// Greedy packing of disjoint blocks of length in `[d, 2d]` inside `[0, n)`,
/// separated by at least `k0`, on which the certified upper bound is at most
/// `1 - theta` for every cocycle in the family.
pub fn contracting_blocks(family: &[TwistedCocycle], n: usize, d: usize, theta: f64, c1: f64) -> Result<BlockDecomposition> {
    if family.is_empty() || d == 0 {
        return Err(Error::InvalidArgument("empty family or zero block length".into()));
    }
    let a = family[0].a;
    let k0 = k0(c1, a);
    let n = n.min(family.iter().map(|c| c.len()).min().unwrap());
    // sup over the family of the direct bound of [s, s + l)
    let bound = |s: usize, l: usize| -> f64 {
        family
            .par_iter()
            .map(|c| {
                let m = c.compose(s, l).expect("interval inside cocycle");
                direct_upper(c, &m, s, l, c1)
            })
            .reduce(|| 0.0, f64::max)
    };
    let mut blocks = Vec::new();
    let mut s = 0;
    while s + d <= n {
        let found = (d..=(2 * d).min(n - s)).find(|&l| bound(s, l) <= 1.0 - theta);
        match found {
            Some(l) => {
                blocks.push((s, s + l));
                s += l + k0;
            }
            None => s += 1,
        }
    }
    let mut gaps = Vec::new();
    let mut prev = 0;
    for &(b, e) in &blocks {
        if b > prev {
            gaps.push((prev, b));
        }
        prev = e;
    }
    if prev < n {
        gaps.push((prev, n));
    }
    Ok(BlockDecomposition { count: blocks.len(), blocks, gaps, theta, k0 })
}
