//! Finite-window observables, their norms, and structural decompositions.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{window_law, Backward, ChainSpec};
use crate::error::{Error, Result};
use crate::window::{Window, WindowFn};

pub const INTEGER_TOL: f64 = 1e-12;

/// A sequence `f_0, ..., f_{n-1}` where `f_j` reads `x_{j-p_j}, ..., x_{j+q_j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowObservable {
    terms: Vec<WindowFn<f64>>,
    integer_valued: bool,
}

/// Coordinates handed to observable generators.
pub struct Coords<'a> {
    pub j: usize,
    window: &'a Window,
    idx: &'a [usize],
    chain: &'a ChainSpec,
}

impl Coords<'_> {
    /// State index at `j + rel`, if inside the window.
    pub fn state(&self, rel: isize) -> Option<usize> {
        let i = self.j as isize + rel;
        if i < self.window.start as isize || i >= self.window.end() as isize {
            return None;
        }
        Some(self.idx[i as usize - self.window.start])
    }

    /// Numeric label at `j + rel`, if inside the window.
    pub fn value(&self, rel: isize) -> Option<f64> {
        let i = (self.j as isize + rel) as usize;
        self.state(rel).map(|s| self.chain.values(i)[s])
    }
}

impl WindowObservable {
    pub fn new(chain: &ChainSpec, terms: Vec<WindowFn<f64>>) -> Result<Self> {
        for (j, t) in terms.iter().enumerate() {
            let w = &t.window;
            if !w.contains(j) {
                return Err(Error::InvalidObservable(format!("window of f_{j} does not contain {j}")));
            }
            if w.end() > chain.horizon() + 1 {
                return Err(Error::InvalidObservable(format!(
                    "window of f_{j} reaches index {} beyond horizon {}",
                    w.end() - 1,
                    chain.horizon()
                )));
            }
            for (k, &s) in w.sizes.iter().enumerate() {
                if s != chain.size(w.start + k) {
                    return Err(Error::InvalidObservable(format!(
                        "f_{j} table size mismatch at index {}",
                        w.start + k
                    )));
                }
            }
            if t.values.len() != w.count() {
                return Err(Error::InvalidObservable(format!("f_{j} table has wrong length")));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidObservable(format!("f_{j} has a non-finite value")));
            }
        }
        let integer_valued = terms
            .iter()
            .all(|t| t.values.iter().all(|v| (v - v.round()).abs() <= INTEGER_TOL));
        Ok(WindowObservable { terms, integer_valued })
    }

    /// Build `count` terms, `f_j` reading `x_{j-p}..x_{j+q}` clipped at index 0.
    pub fn from_fn(
        chain: &ChainSpec,
        count: usize,
        p: usize,
        q: usize,
        f: impl Fn(&Coords) -> f64,
    ) -> Result<Self> {
        if count == 0 || count - 1 + q > chain.horizon() {
            return Err(Error::InvalidObservable(format!(
                "{count} terms with future depth {q} do not fit horizon {}",
                chain.horizon()
            )));
        }
        let terms = (0..count)
            .map(|j| {
                let start = j.saturating_sub(p);
                let sizes = (start..=j + q).map(|i| chain.size(i)).collect();
                let window = Window::new(start, sizes);
                let w2 = window.clone();
                WindowFn::from_fn(window, |idx| f(&Coords { j, window: &w2, idx, chain }))
            })
            .collect();
        Self::new(chain, terms)
    }

    /// `f_j(x) = weight(j) * label(x_j)`.
    pub fn coordinate(chain: &ChainSpec, count: usize, weight: impl Fn(usize) -> f64) -> Result<Self> {
        Self::from_fn(chain, count, 0, 0, |c| weight(c.j) * c.value(0).unwrap())
    }

    /// `f_j(x) = g(j, label(x_j))`.
    pub fn state_function(chain: &ChainSpec, count: usize, g: impl Fn(usize, f64) -> f64) -> Result<Self> {
        Self::from_fn(chain, count, 0, 0, |c| g(c.j, c.value(0).unwrap()))
    }

    /// `f_j(x) = prod_{-p <= r <= q} label(x_{j+r})`, with `boundary` standing in
    /// for coordinates before time 0.
    pub fn product_window(chain: &ChainSpec, count: usize, p: usize, q: usize, boundary: f64) -> Result<Self> {
        Self::from_fn(chain, count, p, q, |c| {
            (-(p as isize)..=q as isize)
                .map(|r| c.value(r).unwrap_or(boundary))
                .product()
        })
    }

    /// `f_j = w_j - w_{j+1} o T` for window functions `w_0..=w_count`.
    pub fn coboundary(chain: &ChainSpec, w: &[WindowFn<f64>]) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::InvalidObservable("coboundary needs at least two functions".into()));
        }
        let terms = (0..w.len() - 1)
            .map(|j| {
                let start = w[j].window.start.min(w[j + 1].window.start).min(j);
                let end = w[j].window.end().max(w[j + 1].window.end()).max(j + 1);
                let win = Window::new(start, (start..end).map(|i| chain.size(i)).collect());
                let a = w[j].lift(&win);
                let b = w[j + 1].lift(&win);
                WindowFn {
                    window: win,
                    values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
                }
            })
            .collect();
        Self::new(chain, terms)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, j: usize) -> &WindowFn<f64> {
        &self.terms[j]
    }

    pub fn terms(&self) -> &[WindowFn<f64>] {
        &self.terms
    }

    pub fn is_integer_valued(&self) -> bool {
        self.integer_valued
    }

    pub fn past_depth(&self, j: usize) -> usize {
        j - self.terms[j].window.start
    }

    pub fn future_depth(&self, j: usize) -> usize {
        self.terms[j].window.end() - 1 - j
    }

    pub fn max_past(&self) -> usize {
        (0..self.len()).map(|j| self.past_depth(j)).max().unwrap_or(0)
    }

    pub fn max_future(&self) -> usize {
        (0..self.len()).map(|j| self.future_depth(j)).max().unwrap_or(0)
    }

    pub fn is_one_sided(&self) -> bool {
        (0..self.len()).all(|j| self.past_depth(j) == 0)
    }

    /// Last coordinate index read by `f_0..f_{n-1}`.
    pub fn reach(&self, n: usize) -> usize {
        self.terms[..n].iter().map(|t| t.window.end() - 1).max().unwrap_or(0)
    }

    pub fn partial_sum(&self, path: &[usize], n: usize) -> f64 {
        self.terms[..n].iter().map(|t| t.eval_path(path)).sum()
    }

    /// Keep the first `n` terms.
    pub fn truncate(&self, n: usize) -> Self {
        let terms = self.terms[..n.min(self.len())].to_vec();
        WindowObservable { integer_valued: self.integer_valued, terms }
    }

    fn combine(&self, other: &Self, chain: &ChainSpec, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = self.len().min(other.len());
        let terms = (0..n)
            .map(|j| {
                let (a, b) = (&self.terms[j].window, &other.terms[j].window);
                let start = a.start.min(b.start);
                let end = a.end().max(b.end());
                let win = Window::new(start, (start..end).map(|i| chain.size(i)).collect());
                let x = self.terms[j].lift(&win);
                let y = other.terms[j].lift(&win);
                WindowFn { window: win, values: x.values.iter().zip(&y.values).map(|(p, q)| op(*p, *q)).collect() }
            })
            .collect();
        Self::new(chain, terms)
    }

    pub fn add(&self, other: &Self, chain: &ChainSpec) -> Result<Self> {
        self.combine(other, chain, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        let terms: Vec<_> = self.terms.iter().map(|t| t.map(|v| c * v)).collect();
        let integer_valued = terms.iter().all(|t| t.values.iter().all(|v| (v - v.round()).abs() <= INTEGER_TOL));
        WindowObservable { terms, integer_valued }
    }

    /// Add the per-step constant `c(j)` to `f_j`.
    pub fn shift(&self, c: impl Fn(usize) -> f64) -> Self {
        let terms: Vec<_> = self
            .terms
            .iter()
            .enumerate()
            .map(|(j, t)| t.map(|v| v + c(j)))
            .collect();
        let integer_valued = terms.iter().all(|t| t.values.iter().all(|v| (v - v.round()).abs() <= INTEGER_TOL));
        WindowObservable { terms, integer_valued }
    }

    /// Distinct values taken by the tables.
    pub fn value_set(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.terms.iter().flat_map(|t| t.values.iter().cloned()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        v
    }

    pub fn norm_data(&self, a: f64) -> NormData {
        let mut sup_norm: f64 = 0.0;
        let mut var: f64 = 0.0;
        for (j, t) in self.terms.iter().enumerate() {
            sup_norm = t.values.iter().fold(sup_norm, |m, v| m.max(v.abs()));
            var = var.max(variation_centered(t, j, a));
        }
        NormData { sup_norm, variation: var, combined: sup_norm + var }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormData {
    pub sup_norm: f64,
    pub variation: f64,
    pub combined: f64,
}

/// Relative coordinate order for the dynamical distance around `center`:
/// `0, -1, +1, -2, +2, ...`, restricted to the window.
fn distance_order(window: &Window, center: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(window.len());
    let mut r = 0isize;
    while order.len() < window.len() {
        for rel in if r == 0 { vec![0] } else { vec![-r, r] } {
            let i = center as isize + rel;
            if i >= window.start as isize && i < window.end() as isize {
                order.push(i as usize - window.start);
            }
        }
        r += 1;
    }
    order
}

/// Exact `sup |f(x) - f(y)| / a^{k(x,y)}` over window configurations, with
/// `k` the rank of the first disagreeing coordinate in distance order around
/// the window's first coordinate.
pub fn variation(f: &WindowFn<f64>, a: f64) -> f64 {
    variation_centered(f, f.window.start, a)
}

pub fn variation_centered(f: &WindowFn<f64>, center: usize, a: f64) -> f64 {
    variation_generic(&f.window, center, a, |idxs| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in idxs {
            lo = lo.min(f.values[i]);
            hi = hi.max(f.values[i]);
        }
        hi - lo
    })
}

/// Variation of a complex window function; oscillation is the diameter.
pub fn variation_complex(window: &Window, values: &[Complex64], a: f64) -> f64 {
    variation_generic(window, window.start, a, |idxs| {
        let mut d: f64 = 0.0;
        for (k, &i) in idxs.iter().enumerate() {
            for &l in &idxs[k + 1..] {
                d = d.max((values[i] - values[l]).norm());
            }
        }
        d
    })
}

fn variation_generic(window: &Window, center: usize, a: f64, osc: impl Fn(&[usize]) -> f64) -> f64 {
    let order = distance_order(window, center);
    let strides: Vec<usize> = (0..window.len()).map(|k| window.stride(k)).collect();
    let mut best: f64 = 0.0;
    let mut scale = 1.0;
    for k in 0..window.len() {
        // classes of configurations agreeing on the first k coordinates in order
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..window.count() {
            let key = order[..k]
                .iter()
                .fold(0usize, |acc, &c| acc * window.sizes[c] + (i / strides[c]) % window.sizes[c]);
            groups.entry(key).or_default().push(i);
        }
        let o = groups.values().map(|g| osc(g)).fold(0.0, f64::max);
        best = best.max(o / scale);
        scale *= a;
    }
    best
}

pub fn sup_norm(f: &WindowFn<f64>) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Output of [`sinai_reduce`]: `f_j = g_j + u_j - u_{j+1} o T_j`.
#[derive(Clone, Debug)]
pub struct SinaiReduction {
    pub u: Vec<WindowFn<f64>>,
    pub g: WindowObservable,
    pub residual: f64,
    /// Largest change of a `g_j` table when its past coordinates are varied.
    pub one_sided_defect: f64,
    /// Exponent of the input norm and the one quoted for `g`, `a^{1/3}`.
    pub a: f64,
    pub a_reduced: f64,
}

/// Evaluate `f_i` at the point equal to `anchor` before index `cut` and to
/// `coords` (starting at `coords_start`) from `cut` on.
fn eval_anchored(f: &WindowFn<f64>, anchor: &[usize], cut: usize, coords_start: usize, coords: &[usize]) -> f64 {
    let w = &f.window;
    let mut idx = 0;
    for k in 0..w.len() {
        let i = w.start + k;
        let s = if i < cut { anchor[i] } else { coords[i - coords_start] };
        idx = idx * w.sizes[k] + s;
    }
    f.values[idx]
}

/// Rewrite a two-sided observable as a one-sided one plus a coboundary.
///
/// `anchor[i]` is the designated state at index `i`.
pub fn sinai_reduce(chain: &ChainSpec, f: &WindowObservable, anchor: &[usize]) -> Result<SinaiReduction> {
    let n = f.len();
    for i in 0..anchor.len().min(chain.horizon() + 1) {
        if anchor[i] >= chain.size(i) {
            return Err(Error::InvalidObservable(format!("anchor state {} outside X_{i}", anchor[i])));
        }
    }
    if anchor.len() < f.reach(n) + 1 {
        return Err(Error::InvalidObservable("anchor shorter than the observable reach".into()));
    }
    let sizes = chain.sizes();
    let span = |start: usize, end: usize| Window::new(start, sizes[start..end].to_vec());

    // u_j(x) = sum_{i >= j} [f_i(x) - f_i(alpha_{<j} x_{>=j})], only terms reading below j
    let readers = |j: usize| (j..n).filter(move |&i| f.terms[i].window.start < j);
    let mut u = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let rs: Vec<usize> = readers(j).collect();
        let (start, end) = if rs.is_empty() {
            (j.min(chain.horizon()), (j + 1).min(chain.horizon() + 1))
        } else {
            (
                rs.iter().map(|&i| f.terms[i].window.start).min().unwrap(),
                rs.iter().map(|&i| f.terms[i].window.end()).max().unwrap(),
            )
        };
        let win = span(start, end);
        let uj = WindowFn::from_fn(win.clone(), |c| {
            rs.iter()
                .map(|&i| eval_anchored(&f.terms[i], anchor, 0, start, c) - eval_anchored(&f.terms[i], anchor, j, start, c))
                .sum()
        });
        u.push(uj);
    }

    // g_j on the union window, then restricted to coordinates >= j
    let mut terms = Vec::with_capacity(n);
    let mut residual: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for j in 0..n {
        let start = f.terms[j].window.start.min(u[j].window.start).min(u[j + 1].window.start);
        let end = f.terms[j].window.end().max(u[j].window.end()).max(u[j + 1].window.end());
        let win = span(start, end);
        let fj = f.terms[j].lift(&win);
        let uj = u[j].lift(&win);
        let uj1 = u[j + 1].lift(&win);
        let full: Vec<f64> = (0..win.count())
            .map(|i| fj.values[i] + uj1.values[i] - uj.values[i])
            .collect();
        let gwin = span(j, end.max(j + 1));
        let gfull = WindowFn { window: win.clone(), values: full.clone() };
        let gj = WindowFn::from_fn(gwin.clone(), |c| eval_anchored(&gfull, anchor, j, j, c));
        let glift = gj.lift(&win);
        for i in 0..win.count() {
            defect = defect.max((glift.values[i] - full[i]).abs());
            let recon: f64 = glift.values[i] + uj.values[i] - uj1.values[i];
            residual = residual.max((recon - fj.values[i]).abs());
        }
        terms.push(trim_trailing(gj));
    }
    let g = WindowObservable::new(chain, terms)?;
    Ok(SinaiReduction { u, g, residual, one_sided_defect: defect, a: chain.a(), a_reduced: chain.a().cbrt() })
}

/// Drop trailing coordinates the function does not depend on.
pub fn trim_trailing(mut f: WindowFn<f64>) -> WindowFn<f64> {
    while f.window.len() > 1 {
        let s = *f.window.sizes.last().unwrap();
        let independent = f
            .values
            .chunks(s)
            .all(|c| c.iter().all(|v| (v - c[0]).abs() <= 1e-14 * (1.0 + c[0].abs())));
        if !independent {
            break;
        }
        let values = f.values.chunks(s).map(|c| c[0]).collect();
        let mut window = f.window.clone();
        window.sizes.pop();
        f = WindowFn { window, values };
    }
    f
}

/// Default anchor: state 0 at every index.
pub fn default_anchor(chain: &ChainSpec) -> Vec<usize> {
    vec![0; chain.horizon() + 1]
}

/// Martingale-coboundary decomposition `f_j = E f_j + M_j + u_{j+1} o T_j - u_j`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub means: Vec<f64>,
    /// `M_j` on `[j, j + w]`.
    pub martingale: Vec<WindowFn<f64>>,
    /// `u_j` on `[j, j + w)`.
    pub transfer: Vec<WindowFn<f64>>,
    pub residual: f64,
    /// `max_j ||E[M_j | X_{j+1}, ...]||_inf`, exact.
    pub martingale_defect: f64,
    pub var_martingale: Vec<f64>,
    pub depth: usize,
}

impl Decomposition {
    pub fn sum_var_martingale(&self) -> f64 {
        self.var_martingale.iter().sum()
    }
}

/// Truncation depth from a contraction rate: `ceil(log(1e-10) / log(gamma))`.
pub fn default_depth(gamma: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    ((1e-10f64).ln() / gamma.min(1.0 - 1e-9).ln()).ceil().max(1.0) as usize
}

/// Apply the untwisted backward step `(L_j h)(v') = sum_b B_j[v'_0][b] h(b, v'[..w-1])`
/// to a function on `X_j x ... x X_{j+w-1}`.
pub(crate) fn backward_step(bw: &Backward, sizes: &[usize], j: usize, w: usize, h: &[f64]) -> Vec<f64> {
    let out_win = Window::new(j + 1, sizes[j + 1..j + 1 + w].to_vec());
    let s_last = sizes[j + w];
    let stride_b = out_win.count() / s_last;
    let mut out = vec![0.0; out_win.count()];
    for (v, o) in out.iter_mut().enumerate() {
        let x = v / out_win.stride(0);
        let rest = v / s_last;
        let row = bw.row(j, x);
        *o = row.iter().enumerate().map(|(b, p)| p * h[b * stride_b + rest]).sum();
    }
    out
}

/// `E[h(X_j, ..., X_{j+l-1}) | X_{j+1}, ...]` as a function on the window
/// without its first coordinate.
pub(crate) fn integrate_first(bw: &Backward, win: &Window, h: &[f64]) -> Vec<f64> {
    let j = win.start;
    let rest = win.stride(0);
    let next_size = win.sizes.get(1).copied().unwrap_or(1);
    let inner = rest / next_size;
    (0..rest)
        .map(|v| {
            let x = v / inner;
            bw.row(j, x).iter().enumerate().map(|(b, p)| p * h[b * rest + v]).sum()
        })
        .collect()
}

pub fn gordin_decomposition(chain: &ChainSpec, f: &WindowObservable, depth: usize) -> Result<Decomposition> {
    if !f.is_one_sided() {
        return Err(Error::TwoSided);
    }
    let bw = Backward::new(chain)?;
    let sizes = chain.sizes();
    let w = f.max_future() + 1;
    let n = f.len().min((chain.horizon() + 1).saturating_sub(w + 1));
    if n == 0 || depth == 0 {
        return Err(Error::HorizonTooShort(format!(
            "horizon {} too short for window {w} and depth {depth}",
            chain.horizon()
        )));
    }
    let win = |j: usize, len: usize| Window::new(j, sizes[j..j + len].to_vec());

    let mut means = Vec::with_capacity(n);
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let law = window_law(chain, &bw.marginals, j, w);
        let fj = f.terms[j].lift(&win(j, w));
        let m: f64 = law.iter().zip(&fj.values).map(|(p, v)| p * v).sum();
        means.push(m);
        centered.push(fj.values.iter().map(|v| v - m).collect());
    }

    // pending holds E[fbar_k | G_j] for the last `depth` values of k < j
    let mut pending: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut transfer = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut uj = vec![0.0; win(j, w).count()];
        for (_, h) in &pending {
            for (a, b) in uj.iter_mut().zip(h) {
                *a += b;
            }
        }
        transfer.push(WindowFn { window: win(j, w), values: uj });
        if j == n {
            break;
        }
        pending.push((j, centered[j].clone()));
        pending = pending
            .into_iter()
            .filter(|(k, _)| k + depth > j)
            .map(|(k, h)| (k, backward_step(&bw, &sizes, j, w, &h)))
            .collect();
    }

    let mut martingale = Vec::with_capacity(n);
    let mut residual: f64 = 0.0;
    let mut var_m = Vec::with_capacity(n);
    let mut defect: f64 = 0.0;
    for j in 0..n {
        let wide = win(j, w + 1);
        let fj = f.terms[j].lift(&wide);
        let uj = transfer[j].lift(&wide);
        let uj1 = transfer[j + 1].lift(&wide);
        let mj: Vec<f64> = (0..wide.count())
            .map(|i| fj.values[i] - means[j] + uj.values[i] - uj1.values[i])
            .collect();
        for i in 0..wide.count() {
            let recon = means[j] + mj[i] + uj1.values[i] - uj.values[i];
            residual = residual.max((recon - fj.values[i]).abs());
        }
        let law = window_law(chain, &bw.marginals, j, w + 1);
        var_m.push(law.iter().zip(&mj).map(|(p, v)| p * v * v).sum());
        let cond = integrate_first(&bw, &wide, &mj);
        defect = cond.iter().fold(defect, |m, v| m.max(v.abs()));
        martingale.push(WindowFn { window: wide, values: mj });
    }
    Ok(Decomposition {
        means,
        martingale,
        transfer,
        residual,
        martingale_defect: defect,
        var_martingale: var_m,
        depth,
    })
}

/// `H_k(x) = S_k f(alpha_0..alpha_{k-1}, x) - S_k f(alpha)` on `[k, k + max(Q, 1))`.
pub fn anchor_coboundary(chain: &ChainSpec, f: &WindowObservable, anchor: &[usize], k: usize) -> Result<WindowFn<f64>> {
    if !f.is_one_sided() {
        return Err(Error::TwoSided);
    }
    let width = f.max_future().max(1);
    if k + width > chain.horizon() + 1 || k > f.len() {
        return Err(Error::InvalidArgument(format!("index {k} outside the horizon")));
    }
    let sizes = chain.sizes();
    let win = Window::new(k, sizes[k..k + width].to_vec());
    Ok(WindowFn::from_fn(win, |c| {
        (0..k)
            .map(|m| eval_anchored(&f.terms[m], anchor, k, k, c) - eval_anchored(&f.terms[m], anchor, usize::MAX, 0, &[]))
            .sum()
    }))
}

/// `S_{j,l} f` at the point equal to `anchor` before `cut` and to `coords` from `cut`.
fn anchored_block_sum(f: &WindowObservable, anchor: &[usize], j: usize, l: usize, cut: usize, coords: &[usize]) -> f64 {
    (j..j + l).map(|m| eval_anchored(&f.terms[m], anchor, cut, cut, coords)).sum()
}

/// `sup_j ||Delta_{j,l}||_inf` for each `l` in `0..=max_l`, where
/// `Delta_{j,l} = H_{j,l+1} o T - H_{j,l} - (H_{j+l+1} o T - H_{j+l})`.
pub fn anchor_residuals(chain: &ChainSpec, f: &WindowObservable, anchor: &[usize], max_l: usize) -> Result<Vec<f64>> {
    if !f.is_one_sided() {
        return Err(Error::TwoSided);
    }
    let width = f.max_future() + 1;
    let sizes = chain.sizes();
    let mut out = Vec::with_capacity(max_l + 1);
    for l in 0..=max_l {
        let mut best: f64 = 0.0;
        let mut j = 0;
        while j + l + 1 < f.len() && j + l + width <= chain.horizon() {
            let s = j + l;
            let win = Window::new(s, sizes[s..s + width + 1].to_vec());
            let h = |jj: usize, ll: usize, cut: usize, c: &[usize]| {
                // H_{jj,ll} evaluated at the point with coordinates from `cut`
                let mut pt = anchor.to_vec();
                pt[cut..cut + c.len()].copy_from_slice(c);
                anchored_block_sum(f, &pt, jj, ll, 0, &pt) - anchored_block_sum(f, anchor, jj, ll, 0, anchor)
            };
            for c in win.configs() {
                let tail = &c[1..];
                let d = h(j, l + 1, s + 1, tail) - h(j, l, s, &c) - (h(0, s + 1, s + 1, tail) - h(0, s, s, &c));
                best = best.max(d.abs());
            }
            j += 1;
        }
        out.push(best);
    }
    Ok(out)
}

/// Coefficients `a_k`, `k` in `Z`, of a linear process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Coefficients {
    /// `a_k = scale * ratio^{|k|}`.
    Geometric { scale: f64, ratio: f64 },
    /// `a_k = values[k + offset]`, zero outside.
    Finite { values: Vec<f64>, offset: usize },
}

impl Coefficients {
    pub fn get(&self, k: isize) -> f64 {
        match self {
            Coefficients::Geometric { scale, ratio } => scale * ratio.powi(k.unsigned_abs() as i32),
            Coefficients::Finite { values, offset } => {
                let i = k + *offset as isize;
                if i >= 0 && (i as usize) < values.len() {
                    values[i as usize]
                } else {
                    0.0
                }
            }
        }
    }

    /// `sum_{|k| > K} |a_k|`.
    pub fn tail(&self, cutoff: usize) -> f64 {
        match self {
            Coefficients::Geometric { scale, ratio } => {
                2.0 * scale.abs() * ratio.abs().powi(cutoff as i32 + 1) / (1.0 - ratio.abs())
            }
            Coefficients::Finite { values, offset } => values
                .iter()
                .enumerate()
                .filter(|(i, _)| (*i as isize - *offset as isize).unsigned_abs() > cutoff)
                .map(|(_, a)| a.abs())
                .sum(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearProcess {
    pub observable: WindowObservable,
    pub tail_bound: f64,
}

/// `f_j = sum_{|k| <= K} a_k g(j - k, x_{j-k})`, terms outside `0..=N` dropped.
pub fn build_linear_process(
    chain: &ChainSpec,
    coeffs: &Coefficients,
    g: impl Fn(usize, usize) -> f64,
    cutoff: usize,
    count: usize,
) -> Result<LinearProcess> {
    if let Coefficients::Geometric { ratio, .. } = coeffs {
        if ratio.abs() >= 1.0 {
            return Err(Error::InvalidArgument("geometric ratio must be below 1 in modulus".into()));
        }
    }
    let horizon = chain.horizon();
    if 2 * cutoff + 1 > horizon + 1 || count + cutoff > horizon + 1 {
        return Err(Error::InvalidArgument(format!(
            "truncation {cutoff} with {count} terms exceeds horizon {horizon}"
        )));
    }
    let mut gmax: f64 = 0.0;
    for i in 0..=horizon {
        for s in 0..chain.size(i) {
            gmax = gmax.max(g(i, s).abs());
        }
    }
    let observable = WindowObservable::from_fn(chain, count, cutoff, cutoff, |c| {
        (-(cutoff as isize)..=cutoff as isize)
            .filter_map(|k| c.state(-k).map(|s| coeffs.get(k) * g((c.j as isize - k) as usize, s)))
            .sum()
    })?;
    Ok(LinearProcess { observable, tail_bound: coeffs.tail(cutoff) * gmax })
}

/// `E[f | X_start, ..., X_{start+r}]` for a function on a one-sided window,
/// lifted back to the full window.
pub fn conditional_truncation(chain: &ChainSpec, f: &WindowFn<f64>, r: usize) -> WindowFn<f64> {
    let w = &f.window;
    if r + 1 >= w.len() {
        return f.clone();
    }
    let tail_count: usize = w.sizes[r + 1..].iter().product();
    let mut out = vec![0.0; w.count()];
    let mut buf = vec![0; w.len()];
    for head in 0..w.count() / tail_count {
        let mut acc = 0.0;
        for t in 0..tail_count {
            let idx = head * tail_count + t;
            w.decode_into(idx, &mut buf);
            let mut p = 1.0;
            for k in r..w.len() - 1 {
                p *= chain.kernel(w.start + k)[buf[k]][buf[k + 1]];
            }
            acc += p * f.values[idx];
        }
        for t in 0..tail_count {
            out[head * tail_count + t] = acc;
        }
    }
    WindowFn { window: w.clone(), values: out }
}
