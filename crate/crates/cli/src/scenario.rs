//! Scenario files: chain, observable, analyses and output settings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use markov_llt::chain::ChainSpec;
use markov_llt::llt::Lattice;
use markov_llt::matrix_products::{MatrixNorm, PositiveMatrixFamily};
use markov_llt::observables::{build_linear_process, Coefficients, WindowObservable};
use markov_llt::processes::{irf_window_observable, IrfFamily, IrfMap};
use markov_llt::window::{Window, WindowFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    /// Master seed for every Monte Carlo quantity.
    #[serde(default)]
    pub seed: u64,
    pub chain: ChainBlock,
    #[serde(default)]
    pub observable: Option<ObservableBlock>,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ChainBlock {
    Explicit {
        values: Vec<Vec<f64>>,
        kernels: Vec<Vec<Vec<f64>>>,
        initial: Vec<f64>,
        #[serde(default = "half")]
        a: f64,
        /// Allow single-state spaces.
        #[serde(default)]
        degenerate: bool,
    },
    Iid {
        states: Vec<f64>,
        probs: Vec<f64>,
        horizon: usize,
        #[serde(default = "half")]
        a: f64,
    },
    Periodic {
        states: Vec<f64>,
        kernels: Vec<Vec<Vec<f64>>>,
        initial: Vec<f64>,
        horizon: usize,
        #[serde(default = "half")]
        a: f64,
    },
    /// Labels `0..states`, every kernel entry at least `floor`.
    Random {
        horizon: usize,
        states: usize,
        floor: f64,
        seed: u64,
        #[serde(default = "half")]
        a: f64,
    },
    /// One state per step, for constant matrix families.
    Single { horizon: usize },
}

impl ChainBlock {
    pub fn build(&self) -> Result<ChainSpec> {
        Ok(match self {
            ChainBlock::Explicit { values, kernels, initial, a, degenerate } => {
                if *degenerate {
                    ChainSpec::new_degenerate(values.clone(), kernels.clone(), initial.clone(), *a)?
                } else {
                    ChainSpec::new(values.clone(), kernels.clone(), initial.clone(), *a)?
                }
            }
            ChainBlock::Iid { states, probs, horizon, a } => ChainSpec::iid(states.clone(), probs.clone(), *a, *horizon)?,
            ChainBlock::Periodic { states, kernels, initial, horizon, a } => {
                ChainSpec::periodic(states.clone(), kernels, initial.clone(), *a, *horizon)?
            }
            ChainBlock::Random { horizon, states, floor, seed, a } => {
                let s = *states;
                if s < 2 || !(*floor >= 0.0 && *floor * s as f64 <= 1.0) {
                    bail!("chain.random: need states >= 2 and 0 <= floor <= 1 / states");
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let law = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                    let raw: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|r| floor + (1.0 - floor * s as f64) * r / total).collect()
                };
                let kernels = (0..*horizon).map(|_| (0..s).map(|_| law(&mut rng)).collect()).collect();
                let initial = law(&mut rng);
                let labels: Vec<f64> = (0..s).map(|x| x as f64).collect();
                ChainSpec::new(vec![labels; horizon + 1], kernels, initial, *a)?
            }
            ChainBlock::Single { horizon } => {
                ChainSpec::new_degenerate(vec![vec![0.0]; horizon + 1], vec![vec![vec![1.0]]; *horizon], vec![1.0], 0.5)?
            }
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableTerm {
    pub start: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ObservableBlock {
    /// `f_j = scale * (j + offset)^power * label(x_j)`.
    Coordinate {
        #[serde(default)]
        count: Option<usize>,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        power: f64,
        #[serde(default = "one")]
        offset: f64,
    },
    ProductWindow {
        #[serde(default)]
        count: Option<usize>,
        p: usize,
        q: usize,
        #[serde(default = "one")]
        boundary: f64,
    },
    /// Explicit tables; `values` is indexed like the window with the last
    /// coordinate fastest.
    Tables { terms: Vec<TableTerm> },
    LinearProcess {
        coefficients: Coefficients,
        cutoff: usize,
        count: usize,
    },
    Irf {
        #[serde(default)]
        slope: Option<f64>,
        #[serde(default)]
        maps: Option<Vec<IrfMap>>,
        #[serde(default)]
        radius: Option<f64>,
        window: usize,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        tol: Option<f64>,
    },
    MatrixLogLambda {
        family: MatrixFamilyBlock,
        window: usize,
    },
}

impl ObservableBlock {
    pub fn build(&self, chain: &ChainSpec) -> Result<WindowObservable> {
        let horizon = chain.horizon();
        Ok(match self {
            ObservableBlock::Coordinate { count, scale, power, offset } => {
                let (s, p, o) = (*scale, *power, *offset);
                WindowObservable::coordinate(chain, count.unwrap_or(horizon + 1), |j| s * (j as f64 + o).powf(p))?
            }
            ObservableBlock::ProductWindow { count, p, q, boundary } => {
                WindowObservable::product_window(chain, count.unwrap_or(horizon + 1 - q), *p, *q, *boundary)?
            }
            ObservableBlock::Tables { terms } => {
                let sizes = chain.sizes();
                let fns = terms
                    .iter()
                    .enumerate()
                    .map(|(j, t)| {
                        let mut len = 0;
                        let mut count = 1;
                        while count < t.values.len() && t.start + len < sizes.len() {
                            count *= sizes[t.start + len];
                            len += 1;
                        }
                        if len == 0 {
                            len = 1;
                            count = sizes.get(t.start).copied().unwrap_or(0);
                        }
                        if count != t.values.len() {
                            bail!("observable.tables: term {j} has {} values, no window from {} matches", t.values.len(), t.start);
                        }
                        Ok(WindowFn { window: Window::new(t.start, sizes[t.start..t.start + len].to_vec()), values: t.values.clone() })
                    })
                    .collect::<Result<Vec<_>>>()?;
                WindowObservable::new(chain, fns)?
            }
            ObservableBlock::LinearProcess { coefficients, cutoff, count } => {
                build_linear_process(chain, coefficients, |i, s| chain.values(i)[s], *cutoff, *count)?.observable
            }
            ObservableBlock::Irf { window, count, tol, .. } => {
                let fam = self.irf_family(chain)?.expect("irf block");
                irf_window_observable(&fam, chain, *window, count.unwrap_or(horizon + 1), *tol)?.observable
            }
            ObservableBlock::MatrixLogLambda { family, window } => {
                let fam = family.build()?;
                markov_llt::matrix_products::sequential_pf(&fam, chain, *window)?.log_observable(chain)?
            }
        })
    }

    pub fn irf_family(&self, chain: &ChainSpec) -> Result<Option<IrfFamily>> {
        match self {
            ObservableBlock::Irf { slope, maps, radius, .. } => Ok(Some(irf_family(chain, *slope, maps.as_ref(), *radius)?)),
            _ => Ok(None),
        }
    }
}

pub fn irf_family(chain: &ChainSpec, slope: Option<f64>, maps: Option<&Vec<IrfMap>>, radius: Option<f64>) -> Result<IrfFamily> {
    match (slope, maps) {
        (Some(s), None) => Ok(IrfFamily::affine_labels(chain, s)?),
        (None, Some(m)) => Ok(IrfFamily::new(m.clone(), radius)?),
        _ => bail!("irf: give exactly one of `slope` and `maps`"),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFamilyBlock {
    pub c: f64,
    /// `maps[j][x]` is a square matrix given by rows; periodic in `j`.
    pub maps: Vec<Vec<Vec<Vec<f64>>>>,
}

impl MatrixFamilyBlock {
    pub fn build(&self) -> Result<PositiveMatrixFamily> {
        Ok(PositiveMatrixFamily::from_rows(self.c, &self.maps)?)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    pub validate: Option<ValidateCfg>,
    pub moments: Option<MomentsCfg>,
    pub rpf: Option<RpfCfg>,
    pub corange: Option<CorangeCfg>,
    pub llt: Option<LltCfg>,
    pub edgeworth: Option<EdgeworthCfg>,
    pub blocks: Option<BlocksCfg>,
    pub matrix: Option<MatrixCfg>,
    pub lyapunov: Option<LyapunovCfg>,
    pub irf: Option<IrfCfg>,
    pub simulate: Option<SimulateCfg>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateCfg {
    /// Report `phi_R(n)` exactly for `n <= phi_n`.
    #[serde(default)]
    pub phi_n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsCfg {
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub classify: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpfCfg {
    /// Points `[re, im]`.
    #[serde(default)]
    pub z: Vec<[f64; 2]>,
    pub n: usize,
    #[serde(default = "rpf_residual_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub decay: Option<DecayCfg>,
}

fn rpf_residual_tol() -> f64 {
    1e-8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCfg {
    pub j: usize,
    pub window: usize,
    pub n_max: usize,
    /// Seed of the random test function.
    #[serde(default)]
    pub function_seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorangeCfg {
    pub t_max: f64,
    pub step: f64,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum SourceCfg {
    Exact {
        lattice: Lattice,
        #[serde(default)]
        budget: Option<usize>,
    },
    MonteCarlo { samples: usize },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LltMode {
    Lattice,
    Nonlattice,
    TwoSided,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LltCfg {
    pub mode: LltMode,
    pub n_grid: Vec<usize>,
    pub tolerance: f64,
    #[serde(default = "one")]
    pub kernel_half_width: f64,
    #[serde(default = "u_width")]
    pub u_width: f64,
    #[serde(default = "u_count")]
    pub u_count: usize,
    #[serde(default)]
    pub source: Option<SourceCfg>,
    #[serde(default)]
    pub corange: Option<CorangeCfg>,
    #[serde(default)]
    pub char_ts: Vec<f64>,
    #[serde(default)]
    pub char_ns: Vec<usize>,
    #[serde(default)]
    pub budget: Option<usize>,
}

fn u_width() -> f64 {
    3.0
}

fn u_count() -> usize {
    41
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeworthCfg {
    pub n_grid: Vec<usize>,
    pub lattice: Lattice,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub budget: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksCfg {
    pub ts: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub theta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RrpfCfg {
    pub j: usize,
    pub ns: Vec<usize>,
    #[serde(default = "rrpf_samples")]
    pub samples: usize,
    #[serde(default)]
    pub slack: f64,
}

fn rrpf_samples() -> usize {
    4096
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixCfg {
    pub family: MatrixFamilyBlock,
    pub window: usize,
    #[serde(default = "entry_sum")]
    pub norm: MatrixNorm,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub sandwich_n: usize,
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub rrpf: Option<RrpfCfg>,
}

fn entry_sum() -> MatrixNorm {
    MatrixNorm::EntrySum
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovCfg {
    /// Base matrix by rows.
    pub a: Vec<Vec<f64>>,
    pub eps: f64,
    pub window: usize,
    pub len: usize,
    /// Seed of the perturbation sequence.
    #[serde(default)]
    pub perturbation_seed: u64,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default = "half")]
    pub gap_fraction: f64,
    #[serde(default = "splitting_tol")]
    pub tolerance: f64,
}

fn splitting_tol() -> f64 {
    1e-8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrfCfg {
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default)]
    pub maps: Option<Vec<IrfMap>>,
    #[serde(default)]
    pub radius: Option<f64>,
    pub window: usize,
    #[serde(default = "reference_extra")]
    pub reference_extra: usize,
    #[serde(default = "irf_paths")]
    pub paths: usize,
    #[serde(default)]
    pub lipschitz_samples: usize,
}

fn reference_extra() -> usize {
    20
}

fn irf_paths() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCfg {
    pub n: usize,
    pub samples: usize,
    #[serde(default)]
    pub kernel_half_width: Option<f64>,
    #[serde(default = "u_count")]
    pub u_count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub csv: bool,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: None, csv: true }
    }
}

fn yes() -> bool {
    true
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in scenario {}", path.display()))
}

pub fn parse(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| anyhow::anyhow!("schema error at line {}, column {}: {e}", e.line(), e.column()))?;
    if s.schema_version != SCHEMA_VERSION {
        bail!("unsupported schema_version {}; this build reads {SCHEMA_VERSION}", s.schema_version);
    }
    Ok(s)
}
