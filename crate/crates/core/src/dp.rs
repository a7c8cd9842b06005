//! Forward dynamic programming over path windows.
//!
//! The state after sampling `x_k` is the block of the last `width`
//! coordinates. Each state carries an accumulator summarizing the partial sum
//! of the observable along all paths ending in that block; a term `f_j` is
//! folded in as soon as its last coordinate has been sampled.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::observables::WindowObservable;
use crate::window::Window;

pub trait Accumulator: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    /// `self += p * other`
    fn axpy(&mut self, p: f64, other: &Self);
}

impl Accumulator for Vec<Complex64> {
    fn zero_like(&self) -> Self {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }
    fn axpy(&mut self, p: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b * p;
        }
    }
}

impl Accumulator for [f64; 4] {
    fn zero_like(&self) -> Self {
        [0.0; 4]
    }
    fn axpy(&mut self, p: f64, other: &Self) {
        for k in 0..4 {
            self[k] += p * other[k];
        }
    }
}

/// Sparse distribution over lattice keys, sorted by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Atoms {
    pub atoms: Vec<((i64, i64), f64)>,
}

impl Atoms {
    pub fn point(key: (i64, i64), p: f64) -> Self {
        Atoms { atoms: vec![(key, p)] }
    }

    pub fn shift(&mut self, by: (i64, i64)) {
        for (k, _) in &mut self.atoms {
            k.0 += by.0;
            k.1 += by.1;
        }
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

impl Accumulator for Atoms {
    fn zero_like(&self) -> Self {
        Atoms::default()
    }
    fn axpy(&mut self, p: f64, other: &Self) {
        if other.atoms.is_empty() || p == 0.0 {
            return;
        }
        let mut out = Vec::with_capacity(self.atoms.len() + other.atoms.len());
        let (mut i, mut l) = (0, 0);
        let (a, b) = (&self.atoms, &other.atoms);
        while i < a.len() || l < b.len() {
            if l == b.len() || (i < a.len() && a[i].0 < b[l].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[l].0 < a[i].0 {
                out.push((b[l].0, p * b[l].1));
                l += 1;
            } else {
                out.push((a[i].0, a[i].1 + p * b[l].1));
                i += 1;
                l += 1;
            }
        }
        self.atoms = out;
    }
}

/// Forward DP state at time `k`.
pub struct Forward<'a, A> {
    chain: &'a ChainSpec,
    obs: &'a WindowObservable,
    width: usize,
    by_last: Vec<Vec<usize>>,
    pub time: usize,
    pub window: Window,
    pub states: Vec<A>,
}

impl<'a, A: Accumulator> Forward<'a, A> {
    /// Start at time 0 with `init(x_0)` scaled by the initial law. Only terms
    /// `f_j` with `j < n_terms` are folded in.
    pub fn start(
        chain: &'a ChainSpec,
        obs: &'a WindowObservable,
        n_terms: usize,
        width: usize,
        init: impl Fn(usize) -> A,
        apply: &impl Fn(&mut A, usize, f64),
    ) -> Result<Self> {
        let need = obs.max_past() + obs.max_future() + 1;
        if width < need {
            return Err(Error::InvalidArgument(format!("state width {width} below window width {need}")));
        }
        if n_terms > obs.len() {
            return Err(Error::InvalidArgument(format!("{n_terms} terms requested, {} available", obs.len())));
        }
        let mut by_last = vec![Vec::new(); chain.horizon() + 1];
        for j in 0..n_terms {
            by_last[obs.term(j).window.end() - 1].push(j);
        }
        let window = Window::new(0, vec![chain.size(0)]);
        let states = (0..chain.size(0))
            .map(|x| {
                let a = init(x);
                let mut z = a.zero_like();
                z.axpy(chain.initial()[x], &a);
                z
            })
            .collect();
        let mut fw = Forward { chain, obs, width, by_last, time: 0, window, states };
        fw.fold_terms(apply);
        Ok(fw)
    }

    fn fold_terms(&mut self, apply: &impl Fn(&mut A, usize, f64)) {
        let terms = &self.by_last[self.time];
        if terms.is_empty() {
            return;
        }
        let w = &self.window;
        for (idx, acc) in self.states.iter_mut().enumerate() {
            for &j in terms {
                let t = self.obs.term(j);
                let off = t.window.start - w.start;
                let mut sub = 0;
                for k in 0..t.window.len() {
                    let c = (idx / w.stride(off + k)) % w.sizes[off + k];
                    sub = sub * t.window.sizes[k] + c;
                }
                apply(acc, j, t.values[sub]);
            }
        }
    }

    /// Sample `x_{k+1}` and fold in the terms that become complete.
    pub fn step(&mut self, apply: &impl Fn(&mut A, usize, f64)) {
        let k = self.time;
        let s_new = self.chain.size(k + 1);
        let s_last = self.chain.size(k);
        let kernel = self.chain.kernel(k);
        let full = self.window.len() == self.width;
        let mut sizes = self.window.sizes.clone();
        let mut start = self.window.start;
        if full {
            sizes.remove(0);
            start += 1;
        }
        sizes.push(s_new);
        let window = Window::new(start, sizes);
        let zero = self.states[0].zero_like();
        let mut next = vec![zero; window.count()];
        let keep = if full { self.window.stride(0) } else { self.window.count() };
        for (idx, acc) in self.states.iter().enumerate() {
            let x = idx % s_last;
            let base = (idx % keep) * s_new;
            for (y, &p) in kernel[x].iter().enumerate() {
                if p > 0.0 {
                    next[base + y].axpy(p, acc);
                }
            }
        }
        self.window = window;
        self.states = next;
        self.time = k + 1;
        self.fold_terms(apply);
    }

    pub fn run_to(&mut self, time: usize, apply: &impl Fn(&mut A, usize, f64)) {
        while self.time < time {
            self.step(apply);
        }
    }

    /// Sum of all state accumulators.
    pub fn total(&self) -> A {
        let mut out = self.states[0].zero_like();
        for a in &self.states {
            out.axpy(1.0, a);
        }
        out
    }

    /// Sum of state accumulators grouped by the coordinates in
    /// `[from, to)`, which must lie inside the current window.
    pub fn grouped(&self, from: usize, to: usize) -> Vec<A> {
        let w = &self.window;
        assert!(from >= w.start && to <= w.end() && from <= to);
        let off = from - w.start;
        let len = to - from;
        let count: usize = w.sizes[off..off + len].iter().product();
        let tail: usize = w.sizes[off + len..].iter().product();
        let mut out = vec![self.states[0].zero_like(); count];
        for (idx, a) in self.states.iter().enumerate() {
            let g = (idx / tail) % count;
            out[g].axpy(1.0, a);
        }
        out
    }
}

/// Minimal state width for folding the observable's terms.
pub fn min_width(obs: &WindowObservable) -> usize {
    obs.max_past() + obs.max_future() + 1
}

/// Returns true when, for every `n` in `grid`, the terms folded by time
/// `reach(n)` are exactly `f_0..f_{n-1}`; one pass then serves the whole grid.
fn snapshot_compatible(obs: &WindowObservable, grid: &[usize]) -> bool {
    grid.iter().all(|&n| {
        let r = obs.reach(n);
        (0..obs.len()).all(|j| (obs.term(j).window.end() - 1 <= r) == (j < n))
    })
}

/// Run once per requested `n` (or one pass with snapshots when possible),
/// returning the total accumulator after all terms `j < n` are folded.
pub fn totals_on_grid<A: Accumulator>(
    chain: &ChainSpec,
    obs: &WindowObservable,
    grid: &[usize],
    init: impl Fn(usize) -> A + Sync,
    apply: &(impl Fn(&mut A, usize, f64) + Sync),
) -> Result<Vec<A>> {
    let width = min_width(obs);
    for &n in grid {
        if n == 0 || n > obs.len() {
            return Err(Error::InvalidArgument(format!("n = {n} outside 1..={}", obs.len())));
        }
    }
    if snapshot_compatible(obs, grid) {
        let n_max = *grid.iter().max().unwrap();
        let mut fw = Forward::start(chain, obs, n_max, width, &init, apply)?;
        let mut order: Vec<(usize, usize)> = grid.iter().enumerate().map(|(i, &n)| (obs.reach(n), i)).collect();
        order.sort();
        let mut out: Vec<Option<A>> = vec![None; grid.len()];
        for (t, i) in order {
            fw.run_to(t, apply);
            out[i] = Some(fw.total());
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    } else {
        grid.iter()
            .map(|&n| {
                let mut fw = Forward::start(chain, obs, n, width, &init, apply)?;
                fw.run_to(obs.reach(n), apply);
                Ok(fw.total())
            })
            .collect()
    }
}

fn twist_apply(ts: &[f64]) -> impl Fn(&mut Vec<Complex64>, usize, f64) + Sync + '_ {
    move |acc: &mut Vec<Complex64>, _j, v| {
        for (a, &t) in acc.iter_mut().zip(ts) {
            *a *= Complex64::from_polar(1.0, t * v);
        }
    }
}

const T_CHUNK: usize = 64;

/// `E exp(i t S_n)` for every `t` in `ts` and `n` in `grid`; result `[n][t]`.
pub fn char_function(chain: &ChainSpec, obs: &WindowObservable, ts: &[f64], grid: &[usize]) -> Result<Vec<Vec<Complex64>>> {
    let chunks: Vec<Vec<Vec<Complex64>>> = ts
        .par_chunks(T_CHUNK)
        .map(|chunk| {
            let apply = twist_apply(chunk);
            totals_on_grid(chain, obs, grid, |_| vec![Complex64::new(1.0, 0.0); chunk.len()], &apply)
        })
        .collect::<Result<_>>()?;
    Ok((0..grid.len())
        .map(|g| chunks.iter().flat_map(|c| c[g].iter().cloned()).collect())
        .collect())
}

/// Endpoint-conditioned characteristic function modulus
/// `max_{c, e} |E[exp(i t S_n); C = c, E = e]| / P(C = c, E = e)`,
/// where `C` is the initial block `[0, P+Q+1)` and `E` the terminal block
/// `[n-P, n+P+Q)`. Coboundaries whose transfer functions live on these
/// blocks drop out of the modulus. Result `[n][t]`.
pub fn bridge_modulus(chain: &ChainSpec, obs: &WindowObservable, ts: &[f64], grid: &[usize]) -> Result<Vec<Vec<f64>>> {
    let p = obs.max_past();
    let q = obs.max_future();
    let width = (2 * p + q).max(p + q + 1);
    let init_len = p + q + 1;
    for &n in grid {
        if n == 0 || n > obs.len() || n + p + q > chain.horizon() + 1 || init_len > chain.horizon() + 1 {
            return Err(Error::HorizonTooShort(format!("bridge at n = {n} needs coordinates up to {}", n + p + q - 1)));
        }
    }
    let mut ts_full = vec![0.0];
    ts_full.extend_from_slice(ts);
    let per_chunk: Vec<Vec<Vec<f64>>> = ts_full
        .par_chunks(T_CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            // every chunk carries t = 0 in slot 0 for the normalizing masses
            let mut tt = vec![0.0];
            tt.extend_from_slice(if ci == 0 { &chunk[1..] } else { chunk });
            let apply = twist_apply(&tt);
            let mut out = Vec::with_capacity(grid.len());
            for &n in grid {
                let mut fw = Forward::start(chain, obs, n, width, |_| vec![Complex64::new(1.0, 0.0); tt.len()], &apply)?;
                fw.run_to(init_len - 1, &apply);
                let end = obs.reach(n).max(n + p + q - 1).max(init_len - 1);
                let mut best = vec![0.0f64; tt.len() - 1];
                let snapshot = fw.states.clone();
                let snap_window = fw.window.clone();
                let snap_time = fw.time;
                for c in 0..snapshot.len() {
                    fw.states = snapshot.iter().enumerate().map(|(i, a)| if i == c { a.clone() } else { a.zero_like() }).collect();
                    fw.window = snap_window.clone();
                    fw.time = snap_time;
                    fw.run_to(end, &apply);
                    let groups = if p + q == 0 && n - p == n + p + q {
                        vec![fw.total()]
                    } else {
                        fw.grouped(n - p, n + p + q)
                    };
                    for g in groups {
                        let mass = g[0].re;
                        if mass <= 1e-300 {
                            continue;
                        }
                        for (b, v) in best.iter_mut().zip(&g[1..]) {
                            *b = b.max(v.norm() / mass);
                        }
                    }
                }
                out.push(best);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..grid.len())
        .map(|g| per_chunk.iter().flat_map(|c| c[g].iter().cloned()).collect())
        .collect())
}

/// Central moments `(E S_n, Var S_n, E (S_n - E S_n)^3)` for `n` in `grid`.
pub fn moments(chain: &ChainSpec, obs: &WindowObservable, grid: &[usize]) -> Result<Vec<(f64, f64, f64)>> {
    let means = term_means(chain, obs)?;
    let apply = |acc: &mut [f64; 4], j: usize, v: f64| {
        let c = v - means[j];
        let [m0, m1, m2, m3] = *acc;
        *acc = [
            m0,
            m1 + c * m0,
            m2 + 2.0 * c * m1 + c * c * m0,
            m3 + 3.0 * c * m2 + 3.0 * c * c * m1 + c * c * c * m0,
        ];
    };
    let totals = totals_on_grid(chain, obs, grid, |_| [1.0, 0.0, 0.0, 0.0], &apply)?;
    Ok(grid
        .iter()
        .zip(totals)
        .map(|(&n, m)| {
            let mean: f64 = means[..n].iter().sum();
            // centered sums: m1 is zero up to rounding
            let var = m[2] - m[1] * m[1];
            let third = m[3] - 3.0 * m[1] * m[2] + 2.0 * m[1].powi(3);
            (mean + m[1], var.max(0.0), third)
        })
        .collect())
}

/// `E f_j(X)` for every term.
pub fn term_means(chain: &ChainSpec, obs: &WindowObservable) -> Result<Vec<f64>> {
    let mu = crate::chain::positive_marginals(chain)?;
    Ok(obs
        .terms()
        .iter()
        .map(|t| {
            let law = crate::chain::window_law(chain, &mu, t.window.start, t.window.len());
            law.iter().zip(&t.values).map(|(p, v)| p * v).sum()
        })
        .collect())
}

/// Exact law of `S_n` over lattice keys, with `key(j, value)` mapping each
/// term value to its lattice coordinates. Fails when more than `budget`
/// atoms are alive in any state.
pub fn lattice_law(
    chain: &ChainSpec,
    obs: &WindowObservable,
    n: usize,
    key: impl Fn(usize, f64) -> (i64, i64) + Sync,
    budget: usize,
) -> Result<Atoms> {
    let apply = |acc: &mut Atoms, j: usize, v: f64| acc.shift(key(j, v));
    let mut fw = Forward::start(chain, obs, n, min_width(obs), |_| Atoms::point((0, 0), 1.0), &apply)?;
    let end = obs.reach(n);
    while fw.time < end {
        fw.step(&apply);
        let alive: usize = fw.states.iter().map(|a| a.atoms.len()).sum();
        if alive > budget {
            return Err(Error::AtomBudget { needed: alive, budget });
        }
    }
    Ok(fw.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coin_char_function_is_binomial() {
        let chain = ChainSpec::iid(vec![0.0, 1.0], vec![0.5, 0.5], 0.5, 12).unwrap();
        let f = WindowObservable::coordinate(&chain, 12, |_| 1.0).unwrap();
        let ts = [0.3, 1.7, 3.0];
        let cf = char_function(&chain, &f, &ts, &[5, 12]).unwrap();
        for (g, &n) in [5, 12].iter().enumerate() {
            for (i, &t) in ts.iter().enumerate() {
                let expect = ((Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, t)) / 2.0).powi(n);
                assert!((cf[g][i] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn product_signs_char_function() {
        let chain = ChainSpec::iid(vec![-1.0, 1.0], vec![0.5, 0.5], 0.5, 10).unwrap();
        let f = WindowObservable::product_window(&chain, 10, 1, 0, 1.0).unwrap();
        let cf = char_function(&chain, &f, &[0.4, 1.1], &[3, 10]).unwrap();
        for (g, &n) in [3, 10].iter().enumerate() {
            for (i, &t) in [0.4f64, 1.1].iter().enumerate() {
                assert!((cf[g][i] - Complex64::new(t.cos().powi(n), 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coin_moments() {
        let chain = ChainSpec::iid(vec![0.0, 1.0], vec![0.5, 0.5], 0.5, 20).unwrap();
        let f = WindowObservable::coordinate(&chain, 20, |_| 1.0).unwrap();
        let m = moments(&chain, &f, &[4, 20]).unwrap();
        assert_abs_diff_eq!(m[0].0, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1].1, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1].2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn binomial_atoms() {
        let chain = ChainSpec::iid(vec![0.0, 1.0], vec![0.5, 0.5], 0.5, 10).unwrap();
        let f = WindowObservable::coordinate(&chain, 10, |_| 1.0).unwrap();
        let law = lattice_law(&chain, &f, 10, |_, v| (v.round() as i64, 0), 1 << 20).unwrap();
        let mut c = 1.0;
        for (k, ((a, _), p)) in law.atoms.iter().enumerate() {
            assert_eq!(*a, k as i64);
            assert_abs_diff_eq!(*p, c / 1024.0, epsilon = 1e-15);
            c = c * (10 - k) as f64 / (k + 1) as f64;
        }
        assert!(matches!(
            lattice_law(&chain, &f, 10, |_, v| (v.round() as i64, 0), 4),
            Err(Error::AtomBudget { .. })
        ));
    }

    #[test]
    fn bridge_ignores_boundary_coboundary() {
        let chain = ChainSpec::iid(vec![-1.0, 1.0], vec![0.5, 0.5], 0.5, 30).unwrap();
        let f = WindowObservable::product_window(&chain, 25, 1, 0, 1.0).unwrap();
        let b = bridge_modulus(&chain, &f, &[std::f64::consts::FRAC_PI_2, 1.0], &[20]).unwrap();
        assert_abs_diff_eq!(b[0][0], 1.0, epsilon = 1e-12);
        assert!(b[0][1] < 0.1);
    }
}
