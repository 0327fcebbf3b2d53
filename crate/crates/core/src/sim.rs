// Copyright 2026 The convex-lse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! Synthetic data under fixed and stochastic designs, and the Monte Carlo
//! driver measuring how far fits are from the truth on an interior grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{FitConfig, FitModel, SolveStatus, Variant};
use crate::oracle::MaxAffine;
use crate::qp::fit;

/// Regression function the responses are drawn around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    /// `|x|^2`.
    Quadratic,
    /// `<a, x> + b`.
    Hyperplane { a: Vec<f64>, b: f64 },
    MaxAffine { function: MaxAffine },
}

impl Truth {
    /// The plane `-x^1 + x^2` (just `-x^1` when `d = 1`).
    pub fn tilted_plane(d: usize) -> Self {
        let mut a = vec![0.0; d];
        if d > 0 {
            a[0] = -1.0;
        }
        if d > 1 {
            a[1] = 1.0;
        }
        Truth::Hyperplane { a, b: 0.0 }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Truth::Quadratic => x.iter().map(|v| v * v).sum(),
            Truth::Hyperplane { a, b } => a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + b,
            Truth::MaxAffine { function } => function.eval(x),
        }
    }

    /// Gradient, or the slope of the active piece where the truth has a kink.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Truth::Quadratic => x.iter().map(|v| 2.0 * v).collect(),
            Truth::Hyperplane { a, .. } => a.clone(),
            Truth::MaxAffine { function } => function.gradient(x),
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        let dim = match self {
            Truth::Quadratic => d,
            Truth::Hyperplane { a, b } => {
                if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidScenario("hyperplane coefficients must be finite".into()));
                }
                a.len()
            }
            Truth::MaxAffine { function } => function.d(),
        };
        if dim != d {
            return Err(Error::DimensionMismatch { expected: d, got: dim });
        }
        Ok(())
    }
}

/// How design points and noise are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Equal-weight grid on `[-1, 1]^d` with homoscedastic noise.
    FixedGrid,
    /// Independent uniform points on `[-1, 1]^d`.
    IidUniform,
    /// The fixed grid with noise standard deviation
    /// `sigma * sqrt((1 + |x|^2) / 2)`.
    HeteroscedasticFixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub truth: Truth,
    pub design: Design,
    pub d: usize,
    pub n: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Scenario {
    /// Quadratic truth under the uniform design with standard normal noise.
    pub fn quadratic(d: usize, n: usize, seed: u64) -> Self {
        Scenario {
            truth: Truth::Quadratic,
            design: Design::IidUniform,
            d,
            n,
            noise_sigma: 1.0,
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidScenario("d must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidScenario("n must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "noise_sigma must be finite and nonnegative, got {}",
                self.noise_sigma
            )));
        }
        self.truth.check(self.d)
    }
}

/// `n` points of the grid on `[-1, 1]^d` with `m = ceil(n^(1/d))` nodes per
/// axis. When `m^d > n`, nodes are taken at evenly spaced lexicographic ranks.
pub fn grid_design(n: usize, d: usize) -> Vec<f64> {
    let mut m = (n as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
    while m.saturating_pow(d as u32) < n {
        m += 1;
    }
    let total = m.pow(d as u32);
    let node = |i: usize| if m == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (m - 1) as f64 };
    let mut out = Vec::with_capacity(n * d);
    for k in 0..n {
        let mut rank = (k * total) / n;
        let start = out.len();
        for _ in 0..d {
            out.push(node(rank % m));
            rank /= m;
        }
        out[start..].reverse();
    }
    out
}

/// Draws a dataset. Deterministic in `scenario.seed`.
pub fn generate(scenario: &Scenario) -> Result<Dataset> {
    scenario.check()?;
    let (n, d) = (scenario.n, scenario.d);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let points = match scenario.design {
        Design::FixedGrid | Design::HeteroscedasticFixed => grid_design(n, d),
        Design::IidUniform => (0..n * d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    };
    let mut responses = Vec::with_capacity(n);
    for x in points.chunks(d) {
        let sd = match scenario.design {
            Design::HeteroscedasticFixed => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                scenario.noise_sigma * ((1.0 + sq) / 2.0).sqrt()
            }
            _ => scenario.noise_sigma,
        };
        let e: f64 = rng.sample(StandardNormal);
        responses.push(scenario.truth.value(x) + sd * e);
    }
    Dataset::from_flat(points, d, responses)
}

/// Regular grid over the cube `[lo, hi]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactGrid {
    pub lo: f64,
    pub hi: f64,
    pub per_axis: usize,
}

impl Default for CompactGrid {
    fn default() -> Self {
        CompactGrid {
            lo: -0.5,
            hi: 0.5,
            per_axis: 11,
        }
    }
}

impl CompactGrid {
    /// Grid points, `d` coordinates each.
    pub fn points(&self, d: usize) -> Vec<f64> {
        let m = self.per_axis.max(1);
        let node = |i: usize| {
            if m == 1 {
                0.5 * (self.lo + self.hi)
            } else {
                self.lo + (self.hi - self.lo) * i as f64 / (m - 1) as f64
            }
        };
        let total = m.pow(d as u32);
        let mut out = Vec::with_capacity(total * d);
        for k in 0..total {
            let mut rank = k;
            let start = out.len();
            for _ in 0..d {
                out.push(node(rank % m));
                rank /= m;
            }
            out[start..].reverse();
        }
        out
    }
}

/// Largest discrepancy over the grid points inside the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridError {
    pub value: f64,
    /// Grid points outside the domain of the fit, skipped.
    pub dropped: usize,
}

fn over_grid(model: &FitModel, grid: &CompactGrid, mut f: impl FnMut(&[f64], &crate::model::EvalResult) -> f64) -> Result<GridError> {
    let d = model.d();
    let mut value = 0.0_f64;
    let mut dropped = 0;
    let mut kept = 0;
    for x in grid.points(d).chunks(d) {
        let r = evaluate(model, x)?;
        if !r.in_domain {
            dropped += 1;
            continue;
        }
        kept += 1;
        value = value.max(f(x, &r));
    }
    if kept == 0 {
        return Err(Error::EmptyGrid { dropped });
    }
    Ok(GridError { value, dropped })
}

/// `max |phi_hat(x) - phi(x)|` over the grid.
pub fn sup_error(model: &FitModel, truth: &Truth, grid: &CompactGrid) -> Result<GridError> {
    over_grid(model, grid, |x, r| (r.value - truth.value(x)).abs())
}

/// `max |xi(x) - grad phi(x)|` over the grid, with `xi(x)` the supporting
/// slope returned by the evaluator.
pub fn grad_error(model: &FitModel, truth: &Truth, grid: &CompactGrid) -> Result<GridError> {
    over_grid(model, grid, |x, r| {
        let xi = r.subgradient.as_deref().unwrap_or(&[]);
        let g = truth.gradient(x);
        xi.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
}

/// A sweep over sample sizes with a fixed scenario.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// `n` and `seed` are replaced per cell.
    pub scenario: Scenario,
    pub ns: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub grid: CompactGrid,
    pub variant: Variant,
    pub config: FitConfig,
    /// Worker count; `None` uses every core.
    pub threads: Option<usize>,
}

impl Experiment {
    pub fn new(scenario: Scenario, ns: Vec<usize>, replications: usize, seed: u64) -> Self {
        Experiment {
            scenario,
            ns,
            replications,
            seed,
            grid: CompactGrid::default(),
            variant: Variant::Convex,
            config: FitConfig::default(),
            threads: None,
        }
    }
}

/// Worker cap from `CONVEX_LSE_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("CONVEX_LSE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

/// Outcome of one replication at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub sup_error: Option<f64>,
    pub grad_error: Option<f64>,
    pub dropped: usize,
    /// `sum_k (Y_k - z_k)`, zero at the exact fit.
    pub residual_sum: Option<f64>,
    pub status: Option<SolveStatus>,
    pub iterations: Option<usize>,
    pub primal_residual: Option<f64>,
    pub stationarity_residual: Option<f64>,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub mean_sup_error: Option<f64>,
    pub max_sup_error: Option<f64>,
    pub mean_grad_error: Option<f64>,
    pub max_grad_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub variant: Variant,
    pub seed: u64,
    pub replications: usize,
    pub grid: CompactGrid,
    pub cells: Vec<Cell>,
    pub summaries: Vec<Summary>,
    pub seconds: f64,
}

impl ExperimentReport {
    /// The report with every wall-time field zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        out.seconds = 0.0;
        out.cells.iter_mut().for_each(|c| c.seconds = 0.0);
        out
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at sample size `n`; independent of the order
/// and content of the sweep.
pub fn cell_seed(master: u64, n: usize, rep: usize) -> u64 {
    mix(mix(mix(master) ^ n as u64) ^ rep as u64)
}

struct Clock(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Clock {
    fn start() -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        return Clock(std::time::Instant::now());
        #[cfg(target_arch = "wasm32")]
        return Clock();
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

fn run_cell(exp: &Experiment, n: usize, rep: usize) -> Cell {
    let clock = Clock::start();
    let seed = cell_seed(exp.seed, n, rep);
    let mut cell = Cell {
        n,
        rep,
        seed,
        sup_error: None,
        grad_error: None,
        dropped: 0,
        residual_sum: None,
        status: None,
        iterations: None,
        primal_residual: None,
        stationarity_residual: None,
        error: None,
        seconds: 0.0,
    };
    let scenario = Scenario {
        n,
        seed,
        ..exp.scenario.clone()
    };
    let outcome = (|| -> Result<()> {
        let data = generate(&scenario)?;
        let model = fit(&data, exp.variant, &exp.config)?;
        let diag = model.diagnostics();
        cell.status = Some(diag.status);
        cell.iterations = Some(diag.iterations);
        cell.primal_residual = Some(diag.primal_residual);
        cell.stationarity_residual = Some(diag.stationarity_residual);
        cell.residual_sum = Some(data.responses().iter().zip(model.fitted()).map(|(y, z)| y - z).sum());
        let sup = sup_error(&model, &scenario.truth, &exp.grid)?;
        cell.sup_error = Some(sup.value);
        cell.dropped = sup.dropped;
        cell.grad_error = Some(grad_error(&model, &scenario.truth, &exp.grid)?.value);
        Ok(())
    })();
    if let Err(e) = outcome {
        cell.error = Some(e.to_string());
    }
    cell.seconds = clock.seconds();
    cell
}

fn summarize(n: usize, cells: &[Cell]) -> Summary {
    let stats = |get: fn(&Cell) -> Option<f64>| {
        let vals: Vec<f64> = cells.iter().filter(|c| c.error.is_none()).filter_map(get).collect();
        if vals.is_empty() {
            (None, None)
        } else {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (Some(mean), Some(vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))))
        }
    };
    let (mean_sup_error, max_sup_error) = stats(|c| c.sup_error);
    let (mean_grad_error, max_grad_error) = stats(|c| c.grad_error);
    Summary {
        n,
        replications: cells.len(),
        failures: cells.iter().filter(|c| c.error.is_some()).count(),
        mean_sup_error,
        max_sup_error,
        mean_grad_error,
        max_grad_error,
    }
}

#[cfg(feature = "parallel")]
fn run_cells(exp: &Experiment, jobs: &[(usize, usize)]) -> Vec<Cell> {
    use rayon::prelude::*;
    let work = || jobs.par_iter().map(|&(n, rep)| run_cell(exp, n, rep)).collect();
    match exp.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(work),
            Err(_) => jobs.iter().map(|&(n, rep)| run_cell(exp, n, rep)).collect(),
        },
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_cells(exp: &Experiment, jobs: &[(usize, usize)]) -> Vec<Cell> {
    jobs.iter().map(|&(n, rep)| run_cell(exp, n, rep)).collect()
}

/// Runs every `(n, replication)` cell. Failed cells are recorded in the
/// report instead of aborting the sweep.
pub fn run_experiment(exp: &Experiment) -> Result<ExperimentReport> {
    if exp.replications == 0 {
        return Err(Error::InvalidScenario("replications must be at least 1".into()));
    }
    let clock = Clock::start();
    let probe = Scenario {
        n: 1,
        ..exp.scenario.clone()
    };
    probe.check()?;
    exp.config.check()?;
    let jobs: Vec<(usize, usize)> = exp
        .ns
        .iter()
        .flat_map(|&n| (0..exp.replications).map(move |rep| (n, rep)))
        .collect();
    let cells = run_cells(exp, &jobs);
    let summaries = exp
        .ns
        .iter()
        .enumerate()
        .map(|(i, &n)| summarize(n, &cells[i * exp.replications..(i + 1) * exp.replications]))
        .collect();
    Ok(ExperimentReport {
        scenario: exp.scenario.clone(),
        variant: exp.variant,
        seed: exp.seed,
        replications: exp.replications,
        grid: exp.grid.clone(),
        cells,
        summaries,
        seconds: clock.seconds(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_design_counts() {
        let g = grid_design(9, 2);
        assert_eq!(g.len(), 18);
        assert_eq!(&g[..2], &[-1.0, -1.0]);
        assert_eq!(&g[16..], &[1.0, 1.0]);
        let g = grid_design(10, 2);
        assert_eq!(g.len(), 20);
        assert!(g.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(grid_design(1, 3), vec![0.0; 3]);
    }

    #[test]
    fn compact_grid_default() {
        let g = CompactGrid::default().points(2);
        assert_eq!(g.len(), 121 * 2);
        assert!(g.iter().all(|v| (-0.5..=0.5).contains(v)));
    }

    #[test]
    fn noiseless_responses_match_truth() {
        let s = Scenario {
            noise_sigma: 0.0,
            ..Scenario::quadratic(2, 50, 3)
        };
        let data = generate(&s).unwrap();
        for k in 0..data.n() {
            assert_eq!(data.responses()[k], s.truth.value(data.point(k)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = Scenario::quadratic(2, 40, 9);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = Scenario { seed: 10, ..s.clone() };
        assert_ne!(generate(&s).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn heteroscedastic_spread() {
        let s = Scenario {
            design: Design::HeteroscedasticFixed,
            ..Scenario::quadratic(1, 4000, 1)
        };
        let data = generate(&s).unwrap();
        let (mut inner, mut outer) = (Vec::new(), Vec::new());
        for k in 0..data.n() {
            let x = data.point(k)[0];
            let e = data.responses()[k] - x * x;
            if x.abs() < 0.2 {
                inner.push(e * e);
            } else if x.abs() > 0.9 {
                outer.push(e * e);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // Variance runs from 1/2 at the origin to about 1 at the edges.
        assert!(mean(&inner) < 0.7 && mean(&outer) > 0.8, "{} {}", mean(&inner), mean(&outer));
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let bad = Scenario {
            noise_sigma: -1.0,
            ..Scenario::quadratic(2, 5, 0)
        };
        assert!(matches!(generate(&bad), Err(Error::InvalidScenario(_))));
        let bad = Scenario {
            truth: Truth::Hyperplane { a: vec![1.0], b: 0.0 },
            ..Scenario::quadratic(2, 5, 0)
        };
        assert!(matches!(generate(&bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn seeds_depend_on_cell_only() {
        assert_eq!(cell_seed(1, 64, 0), cell_seed(1, 64, 0));
        assert_ne!(cell_seed(1, 64, 0), cell_seed(1, 64, 1));
        assert_ne!(cell_seed(1, 64, 0), cell_seed(1, 256, 0));
        assert_ne!(cell_seed(1, 64, 0), cell_seed(2, 64, 0));
    }
}
