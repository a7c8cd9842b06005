//! Brute-force path enumeration used as an independent oracle.

#![allow(dead_code)]

use std::collections::BTreeMap;

use markov_llt::chain::ChainSpec;
use markov_llt::observables::WindowObservable;
use markov_llt::window::{Window, WindowFn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every path `x_0..x_{len-1}` with its probability.
pub fn enumerate(chain: &ChainSpec, len: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out: Vec<(Vec<usize>, f64)> = chain.initial().iter().enumerate().map(|(x, &p)| (vec![x], p)).collect();
    for j in 0..len - 1 {
        let k = chain.kernel(j);
        out = out
            .into_iter()
            .flat_map(|(path, p)| {
                let x = path[path.len() - 1];
                k[x].iter().enumerate().map(move |(y, &q)| {
                    let mut next = path.clone();
                    next.push(y);
                    (next, p * q)
                })
            })
            .collect();
    }
    out
}

fn sums(chain: &ChainSpec, f: &WindowObservable, n: usize) -> Vec<(f64, f64)> {
    let len = (f.reach(n) + 1).min(chain.horizon() + 1);
    enumerate(chain, len)
        .into_iter()
        .map(|(p, prob)| ((0..n).map(|j| f.term(j).eval_path(&p)).sum(), prob))
        .collect()
}

pub fn char_function(chain: &ChainSpec, f: &WindowObservable, n: usize, t: f64) -> Complex64 {
    sums(chain, f, n).iter().map(|&(s, p)| Complex64::from_polar(p, t * s)).sum()
}

/// `(E S_n, Var S_n, E (S_n - E S_n)^3)`.
pub fn moments(chain: &ChainSpec, f: &WindowObservable, n: usize) -> (f64, f64, f64) {
    let s = sums(chain, f, n);
    let m: f64 = s.iter().map(|(v, p)| v * p).sum();
    let var = s.iter().map(|(v, p)| (v - m).powi(2) * p).sum();
    let third = s.iter().map(|(v, p)| (v - m).powi(3) * p).sum();
    (m, var, third)
}

/// Law of an integer-valued `S_n`.
pub fn integer_atoms(chain: &ChainSpec, f: &WindowObservable, n: usize) -> BTreeMap<i64, f64> {
    let mut out = BTreeMap::new();
    for (s, p) in sums(chain, f, n) {
        *out.entry(s.round() as i64).or_insert(0.0) += p;
    }
    out.retain(|_, p| *p > 0.0);
    out
}

/// `max_k max_x TV(law of (X_0..X_k) | X_{k+n} = x, law of (X_0..X_k))` from
/// full-path enumeration, without using the Markov property.
pub fn reverse_phi(chain: &ChainSpec, n: usize) -> f64 {
    let len = chain.horizon() + 1;
    let paths = enumerate(chain, len);
    let mut best: f64 = 0.0;
    for k in 0..len - n {
        let mut joint: BTreeMap<(Vec<usize>, usize), f64> = BTreeMap::new();
        let mut past: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut future = vec![0.0; chain.size(k + n)];
        for (p, prob) in &paths {
            let head = p[..=k].to_vec();
            *joint.entry((head.clone(), p[k + n])).or_insert(0.0) += prob;
            *past.entry(head).or_insert(0.0) += prob;
            future[p[k + n]] += prob;
        }
        for (x, &fx) in future.iter().enumerate() {
            if fx <= 0.0 {
                continue;
            }
            let tv: f64 = past
                .iter()
                .map(|(h, &ph)| (joint.get(&(h.clone(), x)).copied().unwrap_or(0.0) / fx - ph).abs())
                .sum::<f64>()
                * 0.5;
            best = best.max(tv);
        }
    }
    best
}

pub struct Instance {
    pub chain: ChainSpec,
    pub f: WindowObservable,
    /// Past and future depth of the observable.
    pub p: usize,
    pub q: usize,
}

fn random_law(rng: &mut ChaCha8Rng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| floor + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Random chain with horizon `<= 12`, `2..=3` states per step, and an
/// observable on a window of length at most 2. Integer tables when
/// `integer` is set.
pub fn random_instance(seed: u64, integer: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rng.random_range(4..=12usize);
    let sizes: Vec<usize> = (0..=horizon).map(|_| rng.random_range(2..=3usize)).collect();
    let values: Vec<Vec<f64>> = sizes.iter().map(|&s| (0..s).map(|x| x as f64).collect()).collect();
    let kernels: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|j| (0..sizes[j]).map(|_| random_law(&mut rng, sizes[j + 1], 0.05)).collect())
        .collect();
    let initial = random_law(&mut rng, sizes[0], 0.05);
    let chain = ChainSpec::new(values, kernels, initial, 0.5).expect("valid random chain");
    let (p, q) = match rng.random_range(0..3) {
        0 => (0, 0),
        1 => (1, 0),
        _ => (0, 1),
    };
    let count = horizon + 1 - q;
    let terms = (0..count)
        .map(|j| {
            let start = j.saturating_sub(p);
            let win = Window::new(start, sizes[start..=j + q].to_vec());
            WindowFn::from_fn(win, |_| {
                if integer {
                    rng.random_range(-2..=2i64) as f64
                } else {
                    rng.random::<f64>() * 2.0 - 1.0
                }
            })
        })
        .collect();
    let f = WindowObservable::new(&chain, terms).expect("valid random observable");
    Instance { chain, f, p, q }
}

/// Fair coin on `{0, 1}`.
pub fn coin(horizon: usize) -> ChainSpec {
    ChainSpec::iid(vec![0.0, 1.0], vec![0.5, 0.5], 0.5, horizon).unwrap()
}

/// Two-state chain with alternating, Dobrushin-contracting kernels.
pub fn inhomogeneous_pair(horizon: usize) -> ChainSpec {
    let k1 = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
    let k2 = vec![vec![0.5, 0.5], vec![0.2, 0.8]];
    let k3 = vec![vec![0.6, 0.4], vec![0.35, 0.65]];
    ChainSpec::periodic(vec![0.0, 1.0], &[k1, k2, k3], vec![0.5, 0.5], 0.5, horizon).unwrap()
}

/// Random chain with `2..=3` states per step and kernel entries bounded below.
pub fn random_chain(seed: u64, horizon: usize) -> ChainSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<usize> = (0..=horizon).map(|_| rng.random_range(2..=3usize)).collect();
    let values: Vec<Vec<f64>> = sizes.iter().map(|&s| (0..s).map(|x| x as f64).collect()).collect();
    let kernels: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|j| (0..sizes[j]).map(|_| random_law(&mut rng, sizes[j + 1], 0.2)).collect())
        .collect();
    let initial = random_law(&mut rng, sizes[0], 0.2);
    ChainSpec::new(values, kernels, initial, 0.5).expect("valid random chain")
}

/// Random table on the window `[start, start + len)`.
pub fn random_window_fn(chain: &ChainSpec, start: usize, len: usize, seed: u64) -> WindowFn<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let win = Window::new(start, chain.sizes()[start..start + len].to_vec());
    WindowFn::from_fn(win, |_| rng.random::<f64>() * 2.0 - 1.0)
}
