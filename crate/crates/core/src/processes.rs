//! Iterated random functions `Y_k = G_k(Y_{k-1}, X_k)` driven by the chain,
//! and their finite-window observables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::observables::WindowObservable;
use crate::sim::task_rng;
use crate::window::{Window, WindowFn};

/// One step map `y -> G(y, x)`, per state `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IrfMap {
    /// `G(y, x) = slope[x] y + intercept[x]`.
    Affine { slope: Vec<f64>, intercept: Vec<f64> },
    /// Piecewise-linear in `y` through `(knots[i], values[x][i])`, extended
    /// linearly beyond the end knots.
    Table { knots: Vec<f64>, values: Vec<Vec<f64>> },
}

impl IrfMap {
    pub fn states(&self) -> usize {
        match self {
            IrfMap::Affine { slope, .. } => slope.len(),
            IrfMap::Table { values, .. } => values.len(),
        }
    }

    pub fn eval(&self, y: f64, x: usize) -> f64 {
        match self {
            IrfMap::Affine { slope, intercept } => slope[x] * y + intercept[x],
            IrfMap::Table { knots, values } => {
                let v = &values[x];
                let k = knots.len();
                let i = knots.partition_point(|&t| t <= y).clamp(1, k - 1) - 1;
                let w = (y - knots[i]) / (knots[i + 1] - knots[i]);
                v[i] + w * (v[i + 1] - v[i])
            }
        }
    }

    /// Lipschitz constant in `y` at state `x`.
    pub fn lipschitz(&self, x: usize) -> f64 {
        match self {
            IrfMap::Affine { slope, .. } => slope[x].abs(),
            IrfMap::Table { knots, values } => knots
                .windows(2)
                .zip(values[x].windows(2))
                .map(|(k, v)| ((v[1] - v[0]) / (k[1] - k[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IrfMap::Affine { slope, intercept } => {
                if slope.len() != intercept.len() || slope.is_empty() {
                    return Err(Error::InvalidArgument("affine map needs one slope and intercept per state".into()));
                }
            }
            IrfMap::Table { knots, values } => {
                if knots.len() < 2 || knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument("table knots must be strictly increasing".into()));
                }
                if values.is_empty() || values.iter().any(|v| v.len() != knots.len()) {
                    return Err(Error::InvalidArgument("table needs one value per knot and state".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrfFamily {
    /// Maps for steps `0, 1, ...`, repeated periodically.
    pub maps: Vec<IrfMap>,
    /// Declared invariant radius: `|y| <= r` is preserved.
    pub radius: Option<f64>,
    /// State-regularity constant; recorded only.
    pub state_constant: f64,
}

impl IrfFamily {
    pub fn new(maps: Vec<IrfMap>, radius: Option<f64>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidArgument("no maps".into()));
        }
        for m in &maps {
            m.validate()?;
        }
        let mut fam = IrfFamily { maps, radius, state_constant: 0.0 };
        fam.state_constant = fam.state_regularity();
        Ok(fam)
    }

    /// `G(y, x) = slope y + label(x)` on a chain with time-independent labels.
    pub fn affine_labels(chain: &ChainSpec, slope: f64) -> Result<Self> {
        let labels = chain.values(0).to_vec();
        let map = IrfMap::Affine { slope: vec![slope; labels.len()], intercept: labels };
        let mut fam = Self::new(vec![map], None)?;
        fam.radius = fam.affine_radius();
        Ok(fam)
    }

    pub fn map(&self, k: usize) -> &IrfMap {
        &self.maps[k % self.maps.len()]
    }

    /// `delta_0 = sup_k max_x L_k(x)`.
    pub fn delta0(&self) -> f64 {
        self.maps
            .iter()
            .flat_map(|m| (0..m.states()).map(move |x| m.lipschitz(x)))
            .fold(0.0, f64::max)
    }

    /// Smallest `r` with `|a| r + |b| <= r` for every affine map; `None`
    /// for tabulated maps or non-contracting slopes.
    pub fn affine_radius(&self) -> Option<f64> {
        let mut r: f64 = 0.0;
        for m in &self.maps {
            match m {
                IrfMap::Affine { slope, intercept } => {
                    for (a, b) in slope.iter().zip(intercept) {
                        if a.abs() >= 1.0 {
                            return None;
                        }
                        r = r.max(b.abs() / (1.0 - a.abs()));
                    }
                }
                IrfMap::Table { .. } => return None,
            }
        }
        Some(r)
    }

    /// `max_k max_{x != y} sup_{|a| <= r} |G_{k,x}(a) - G_{k,y}(a)| / max(|a|, 1)`.
    fn state_regularity(&self) -> f64 {
        let r = self.radius.unwrap_or(1.0).max(1.0);
        let probes = [-r, -r / 2.0, 0.0, r / 2.0, r];
        let mut c: f64 = 0.0;
        for m in &self.maps {
            for x in 0..m.states() {
                for y in 0..m.states() {
                    for &a in &probes {
                        c = c.max((m.eval(a, x) - m.eval(a, y)).abs() / a.abs().max(1.0));
                    }
                }
            }
        }
        c
    }
}

fn check_states(family: &IrfFamily, chain: &ChainSpec) -> Result<()> {
    for j in 0..=chain.horizon() {
        if family.map(j).states() != chain.size(j) {
            return Err(Error::InvalidArgument(format!(
                "map for step {j} has {} states, the chain has {}",
                family.map(j).states(),
                chain.size(j)
            )));
        }
    }
    Ok(())
}

/// `Y_0..Y_{n}` with `Y_{-1} = y0` and `Y_k = G_k(Y_{k-1}, x_k)`.
pub fn simulate_irf(family: &IrfFamily, path: &[usize], y0: f64) -> Result<Vec<f64>> {
    let mut y = y0;
    let mut out = Vec::with_capacity(path.len());
    for (k, &x) in path.iter().enumerate() {
        y = family.map(k).eval(y, x);
        if let Some(r) = family.radius {
            if y.abs() > r + 1e-9 && y0.abs() <= r {
                return Err(Error::InvariantViolation { step: k, value: y, radius: r });
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PastFreeRun {
    pub burn: usize,
    /// Trajectory after the burn-in, started from `y_a`.
    pub trajectory: Vec<f64>,
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Stationary-style trajectory: the first `burn` coordinates of `path` act as
/// the unobserved past; two different past values are propagated and must
/// agree to `delta_0^burn |y_a - y_b|` afterwards.
pub fn simulate_past_free(family: &IrfFamily, path: &[usize], burn: usize, y_a: f64, y_b: f64) -> Result<PastFreeRun> {
    let d0 = family.delta0();
    if d0 >= 1.0 {
        return Err(Error::InvalidArgument(format!("delta_0 = {d0} >= 1: the past-free process is undefined")));
    }
    if burn >= path.len() {
        return Err(Error::InvalidArgument("burn-in exceeds the path".into()));
    }
    let a = simulate_irf(family, path, y_a)?;
    let b = simulate_irf(family, path, y_b)?;
    let gap = a[burn - 1..].iter().zip(&b[burn - 1..]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let bound = d0.powi(burn as i32) * (y_a - y_b).abs();
    Ok(PastFreeRun { burn, trajectory: a[burn..].to_vec(), gap, bound, holds: gap <= bound * (1.0 + 1e-9) + 1e-15 })
}

/// `G_k o ... o G_{k-w+1}(y_anchor)` evaluated on `path`, older coordinates
/// frozen at the anchor value.
pub fn window_value(family: &IrfFamily, path: &[usize], k: usize, w: usize, y_anchor: f64) -> f64 {
    let start = (k + 1).saturating_sub(w);
    let mut y = y_anchor;
    for (i, &x) in path[start..=k].iter().enumerate() {
        y = family.map(start + i).eval(y, x);
    }
    y
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrfObservable {
    pub observable: WindowObservable,
    pub window: usize,
    pub anchor_value: f64,
    /// `sup |y - anchor|` over the invariant ball.
    pub range: f64,
    pub delta0: f64,
    /// `range * delta_0^w`.
    pub error_bound: f64,
}

/// Smallest `w` with `range * delta_0^w <= tol`.
pub fn required_window(family: &IrfFamily, range: f64, tol: f64) -> Option<usize> {
    let d0 = family.delta0();
    if d0 <= 0.0 {
        return Some(1);
    }
    if d0 >= 1.0 {
        return None;
    }
    Some(((tol / range.max(1e-300)).ln() / d0.ln()).ceil().max(1.0) as usize)
}

/// `f_k(x_{k-w+1}, ..., x_k) = G_k o ... o G_{k-w+1}(0)`, `k = 0..count`: the
/// older history is frozen at the centre of the invariant ball.
pub fn irf_window_observable(
    family: &IrfFamily,
    chain: &ChainSpec,
    w: usize,
    count: usize,
    tol: Option<f64>,
) -> Result<IrfObservable> {
    check_states(family, chain)?;
    let d0 = family.delta0();
    if d0 >= 1.0 {
        return Err(Error::InvalidArgument(format!("delta_0 = {d0} >= 1")));
    }
    if w == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let radius = family
        .radius
        .ok_or_else(|| Error::InvalidArgument("an invariant radius is required for the truncation bound".into()))?;
    let anchor_value = 0.0f64;
    let range = radius + anchor_value.abs();
    let error_bound = if d0 == 0.0 { 0.0 } else { range * d0.powi(w as i32) };
    if let Some(tol) = tol {
        if error_bound > tol {
            let need = required_window(family, range, tol).unwrap_or(usize::MAX);
            return Err(Error::InvalidArgument(format!(
                "window {w} gives truncation bound {error_bound:.3e} > {tol:.3e}; need w >= {need}"
            )));
        }
    }
    let sizes = chain.sizes();
    let terms = (0..count)
        .map(|k| {
            let start = (k + 1).saturating_sub(w);
            let win = Window::new(start, sizes[start..=k].to_vec());
            WindowFn::from_fn(win, |c| {
                let mut y = anchor_value;
                for (i, &x) in c.iter().enumerate() {
                    y = family.map(start + i).eval(y, x);
                }
                y
            })
        })
        .collect();
    let observable = WindowObservable::new(chain, terms)?;
    Ok(IrfObservable { observable, window: w, anchor_value, range, delta0: d0, error_bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub samples: usize,
    /// `max (quotient - declared)` over all samples.
    pub max_excess: f64,
    pub pass: bool,
}

/// Random difference quotients in `y` against the declared constants.
pub fn lipschitz_audit(family: &IrfFamily, samples: usize, seed: u64) -> LipschitzAudit {
    let mut rng = task_rng(seed, 0);
    let r = family.radius.unwrap_or(1.0).max(1.0) * 1.5;
    let mut worst = f64::NEG_INFINITY;
    for m in &family.maps {
        for x in 0..m.states() {
            let l = m.lipschitz(x);
            for _ in 0..samples {
                let a = (rng.random::<f64>() * 2.0 - 1.0) * r;
                let b = (rng.random::<f64>() * 2.0 - 1.0) * r;
                if a == b {
                    continue;
                }
                let q = (m.eval(a, x) - m.eval(b, x)).abs() / (a - b).abs();
                worst = worst.max(q - l);
            }
        }
    }
    LipschitzAudit { samples, max_excess: worst, pass: worst <= 1e-9 }
}

/// Largest entrywise change between the window-`w1` and window-`w2`
/// observables (`w1 < w2`), terms `0..count`.
pub fn truncation_gap(family: &IrfFamily, chain: &ChainSpec, w1: usize, w2: usize, count: usize) -> Result<f64> {
    let a = irf_window_observable(family, chain, w1, count, None)?;
    let b = irf_window_observable(family, chain, w2, count, None)?;
    let mut gap: f64 = 0.0;
    for k in 0..count {
        let big = b.observable.term(k);
        let small = a.observable.term(k).lift(&big.window);
        for (x, y) in big.values.iter().zip(&small.values) {
            gap = gap.max((x - y).abs());
        }
    }
    Ok(gap)
}
