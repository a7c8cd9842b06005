//! Inhomogeneous finite-state Markov chains and their backward kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite-horizon inhomogeneous Markov chain `X_0, ..., X_N`.
///
/// State `i` of `X_j` carries a numeric label `values[j][i]`, used by
/// coordinate observables. `kernels[j][x][y]` is `P(X_{j+1} = y | X_j = x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    values: Vec<Vec<f64>>,
    kernels: Vec<Vec<Vec<f64>>>,
    initial: Vec<f64>,
    a: f64,
}

impl ChainSpec {
    pub fn new(
        values: Vec<Vec<f64>>,
        kernels: Vec<Vec<Vec<f64>>>,
        initial: Vec<f64>,
        a: f64,
    ) -> Result<Self> {
        Self::build(values, kernels, initial, a, false)
    }

    /// Like [`ChainSpec::new`] but permits single-state spaces.
    pub fn new_degenerate(
        values: Vec<Vec<f64>>,
        kernels: Vec<Vec<Vec<f64>>>,
        initial: Vec<f64>,
        a: f64,
    ) -> Result<Self> {
        Self::build(values, kernels, initial, a, true)
    }

    fn build(
        values: Vec<Vec<f64>>,
        kernels: Vec<Vec<Vec<f64>>>,
        initial: Vec<f64>,
        a: f64,
        allow_singletons: bool,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidChain("no state spaces".into()));
        }
        if kernels.len() + 1 != values.len() {
            return Err(Error::InvalidChain(format!(
                "{} state spaces need {} kernels, got {}",
                values.len(),
                values.len() - 1,
                kernels.len()
            )));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidChain(format!("weight a = {a} must lie in (0, 1)")));
        }
        for (j, v) in values.iter().enumerate() {
            if v.is_empty() || (v.len() == 1 && !allow_singletons) {
                return Err(Error::InvalidChain(format!(
                    "state space {j} has {} states; single states need the degenerate flag",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidChain(format!("state space {j} has a non-finite label")));
            }
        }
        check_probability(&initial, values[0].len(), "initial law")?;
        for (j, k) in kernels.iter().enumerate() {
            if k.len() != values[j].len() {
                return Err(Error::InvalidChain(format!(
                    "kernel {j} has {} rows, expected {}",
                    k.len(),
                    values[j].len()
                )));
            }
            for (x, row) in k.iter().enumerate() {
                check_probability(row, values[j + 1].len(), &format!("kernel {j} row {x}"))?;
            }
        }
        Ok(ChainSpec { values, kernels, initial, a })
    }

    /// Homogeneous state labels with a repeating block of kernels, expanded
    /// to `horizon` steps.
    pub fn periodic(
        states: Vec<f64>,
        block: &[Vec<Vec<f64>>],
        initial: Vec<f64>,
        a: f64,
        horizon: usize,
    ) -> Result<Self> {
        if block.is_empty() {
            return Err(Error::InvalidChain("empty kernel block".into()));
        }
        let kernels = (0..horizon).map(|j| block[j % block.len()].clone()).collect();
        Self::new(vec![states; horizon + 1], kernels, initial, a)
    }

    /// Independent draws from `probs` at every step.
    pub fn iid(states: Vec<f64>, probs: Vec<f64>, a: f64, horizon: usize) -> Result<Self> {
        let kernel = vec![probs.clone(); states.len()];
        Self::periodic(states, &[kernel], probs, a, horizon)
    }

    /// Horizon `N`: the chain has coordinates `X_0..=X_N`.
    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    pub fn size(&self, j: usize) -> usize {
        self.values[j].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.values.iter().map(Vec::len).collect()
    }

    pub fn values(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn kernel(&self, j: usize) -> &[Vec<f64>] {
        &self.kernels[j]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Restrict to the first `horizon` steps.
    pub fn truncate(&self, horizon: usize) -> Self {
        let horizon = horizon.min(self.horizon());
        ChainSpec {
            values: self.values[..=horizon].to_vec(),
            kernels: self.kernels[..horizon].to_vec(),
            initial: self.initial.clone(),
            a: self.a,
        }
    }

    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        check_probability(&initial, self.size(0), "initial law")?;
        Ok(ChainSpec { initial, ..self.clone() })
    }

    /// Probability of a full or partial path starting at time 0.
    pub fn path_probability(&self, path: &[usize]) -> f64 {
        let mut p = self.initial[path[0]];
        for j in 0..path.len() - 1 {
            p *= self.kernels[j][path[j]][path[j + 1]];
        }
        p
    }
}

fn check_probability(v: &[f64], len: usize, what: &str) -> Result<()> {
    if v.len() != len {
        return Err(Error::InvalidChain(format!("{what} has length {}, expected {len}", v.len())));
    }
    if v.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidChain(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidChain(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Forward Chapman-Kolmogorov: `μ_{j+1} = μ_j p_j` for `j < N`.
pub fn propagate_marginals(chain: &ChainSpec) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(chain.horizon() + 1);
    out.push(chain.initial.clone());
    for j in 0..chain.horizon() {
        let mu = &out[j];
        let k = &chain.kernels[j];
        let next = (0..chain.size(j + 1))
            .map(|y| (0..mu.len()).map(|x| mu[x] * k[x][y]).sum())
            .collect();
        out.push(next);
    }
    out
}

/// Marginals, failing at the first state that carries no mass.
pub fn positive_marginals(chain: &ChainSpec) -> Result<Vec<Vec<f64>>> {
    let mu = propagate_marginals(chain);
    for (step, m) in mu.iter().enumerate() {
        if let Some(state) = m.iter().position(|&p| p <= 0.0) {
            return Err(Error::ZeroMarginal { step, state });
        }
    }
    Ok(mu)
}

/// `rows[x][b] = P(X_j = b | X_{j+1} = x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackwardKernel {
    pub j: usize,
    pub rows: Vec<Vec<f64>>,
}

pub fn backward_kernel(chain: &ChainSpec, marginals: &[Vec<f64>], j: usize) -> Result<BackwardKernel> {
    let mu = &marginals[j];
    let next = &marginals[j + 1];
    let k = &chain.kernels[j];
    let mut rows = Vec::with_capacity(next.len());
    for (x, &mx) in next.iter().enumerate() {
        if mx <= 0.0 {
            return Err(Error::ZeroMarginal { step: j + 1, state: x });
        }
        rows.push((0..mu.len()).map(|b| mu[b] * k[b][x] / mx).collect());
    }
    Ok(BackwardKernel { j, rows })
}

/// All backward kernels `B_0..B_{N-1}` together with the marginals.
#[derive(Clone, Debug)]
pub struct Backward {
    pub marginals: Vec<Vec<f64>>,
    pub kernels: Vec<BackwardKernel>,
}

impl Backward {
    pub fn new(chain: &ChainSpec) -> Result<Self> {
        let marginals = positive_marginals(chain)?;
        let kernels = (0..chain.horizon())
            .map(|j| backward_kernel(chain, &marginals, j))
            .collect::<Result<_>>()?;
        Ok(Backward { marginals, kernels })
    }

    pub fn row(&self, j: usize, x: usize) -> &[f64] {
        &self.kernels[j].rows[x]
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Maximal total-variation distance between rows of a stochastic matrix.
pub fn dobrushin_rows(rows: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for x in 0..rows.len() {
        for y in x + 1..rows.len() {
            best = best.max(total_variation(&rows[x], &rows[y]));
        }
    }
    best.min(1.0)
}

pub fn dobrushin_coefficient(kernel: &BackwardKernel) -> f64 {
    dobrushin_rows(&kernel.rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub delta: f64,
    pub zeta: f64,
    pub n0: usize,
    pub pi: Vec<f64>,
    pub cond_constant: f64,
    pub contraction_pass: bool,
    pub ellipticity_pass: bool,
    pub cond_pass: bool,
    /// First step at which the backward Dobrushin coefficient reaches 1.
    pub contraction_failure: Option<usize>,
    /// First step whose backward kernel has a zero entry.
    pub ellipticity_failure: Option<usize>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.contraction_pass && self.ellipticity_pass && self.cond_pass
    }

    /// Turn the first failing assumption into an error.
    pub fn require(&self) -> Result<()> {
        if let Some(step) = self.ellipticity_failure {
            return Err(Error::NotElliptic { step });
        }
        if let Some(step) = self.contraction_failure {
            return Err(Error::NotContracting { step, pi: self.pi[step] });
        }
        Ok(())
    }
}

pub fn validate_assumptions(chain: &ChainSpec) -> Result<AssumptionReport> {
    if chain.horizon() < 2 {
        return Err(Error::HorizonTooShort(format!(
            "horizon {} < 2 cannot be validated",
            chain.horizon()
        )));
    }
    let bw = Backward::new(chain)?;
    let pi: Vec<f64> = bw.kernels.iter().map(dobrushin_coefficient).collect();
    let delta = pi.iter().cloned().fold(0.0, f64::max);
    let mut zeta = f64::INFINITY;
    let mut ellipticity_failure = None;
    for k in &bw.kernels {
        let m = k.rows.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        if m <= 0.0 && ellipticity_failure.is_none() {
            ellipticity_failure = Some(k.j);
        }
        zeta = zeta.min(m);
    }
    let mut cond_constant: f64 = 0.0;
    for j in 0..chain.horizon() {
        let next = &bw.marginals[j + 1];
        for row in chain.kernel(j) {
            for (y, &p) in row.iter().enumerate() {
                cond_constant = cond_constant.max(p / next[y]);
            }
        }
    }
    let contraction_failure = pi.iter().position(|&p| p >= 1.0);
    Ok(AssumptionReport {
        delta,
        zeta: zeta.max(0.0),
        n0: 1,
        cond_constant,
        contraction_pass: delta < 1.0,
        ellipticity_pass: zeta > 0.0,
        cond_pass: cond_constant.is_finite(),
        contraction_failure,
        ellipticity_failure,
        pi,
    })
}

/// `δ^n`, the uniform bound on the reverse φ-mixing coefficient.
pub fn reverse_phi_bound(report: &AssumptionReport, n: usize) -> f64 {
    report.delta.powi(n as i32)
}

/// Exact reverse φ-mixing coefficient at lag `n`, maximized over all start
/// times: the largest total-variation distance between the law of `X_k` given
/// `X_{k+n} = x` and the unconditional law of `X_k`.
pub fn reverse_phi_exact(chain: &ChainSpec, n: usize) -> Result<f64> {
    let bw = Backward::new(chain)?;
    let horizon = chain.horizon();
    if n == 0 || n > horizon {
        return Err(Error::InvalidArgument(format!("lag {n} outside 1..={horizon}")));
    }
    let mut best: f64 = 0.0;
    for k in 0..=horizon - n {
        // rows of B_{k+n-1} ... B_k: law of X_k given X_{k+n}
        let mut prod = bw.kernels[k + n - 1].rows.clone();
        for j in (k..k + n - 1).rev() {
            prod = matmul(&prod, &bw.kernels[j].rows);
        }
        for row in &prod {
            best = best.max(total_variation(row, &bw.marginals[k]));
        }
    }
    Ok(best)
}

pub(crate) fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| row.iter().zip(b).map(|(x, brow)| x * brow[c]).sum())
                .collect()
        })
        .collect()
}

/// Joint law of `(X_start, ..., X_{start+len-1})`, indexed first-coordinate
/// most significant.
pub fn window_law(chain: &ChainSpec, marginals: &[Vec<f64>], start: usize, len: usize) -> Vec<f64> {
    let mut law = marginals[start].clone();
    for i in start..start + len - 1 {
        let k = chain.kernel(i);
        let s = chain.size(i + 1);
        let mut next = vec![0.0; law.len() * s];
        for (idx, &p) in law.iter().enumerate() {
            let x = idx % chain.size(i);
            for y in 0..s {
                next[idx * s + y] = p * k[x][y];
            }
        }
        law = next;
    }
    law
}

/// Stationary law of a single stochastic matrix by power iteration.
pub fn stationary_law(kernel: &[Vec<f64>]) -> Vec<f64> {
    let d = kernel.len();
    let mut v = vec![1.0 / d as f64; d];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..d).map(|y| (0..d).map(|x| v[x] * kernel[x][y]).sum()).collect();
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < 1e-16 {
            break;
        }
    }
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}
