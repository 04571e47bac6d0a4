//! Seeded, parallel Monte Carlo estimation of `P_t f(x)` and
//! `P_t(x, B(z, ε))` with Hoeffding confidence half-widths.
//!
//! Trajectory `k` of cell `c` draws from [`stream::stream`]`(seed, c, k)`.
//! Samples are collected into index order before any reduction, so results
//! are bitwise identical for every worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs_jump::{sample_jump_chain, IfsModel, Trajectory};
use crate::measure::{Ball, EmpiricalMeasure, StatePoint, TestFunction};
use crate::stream::{self, Stream};

/// Default confidence level of reported half-widths.
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

/// A Markov process that can be sampled at a fixed time.
pub trait MarkovProcess: Send + Sync {
    fn name(&self) -> &str;

    /// Jump rate, for processes that have one.
    fn rate(&self) -> Option<f64> {
        None
    }

    /// Rejects initial points outside the state space of the process.
    fn check_initial(&self, _x: StatePoint) -> Result<()> {
        Ok(())
    }

    /// Draws `Φ^x(t)` from the given stream.
    fn sample_at(&self, x: StatePoint, t: f64, rng: &mut Stream) -> Result<StatePoint>;

    /// Law of `Φ^x(t)` when it is available in closed form.
    fn exact_law(&self, _x: StatePoint, _t: f64) -> Option<Result<EmpiricalMeasure>> {
        None
    }
}

/// `R · sqrt(ln(2/δ) / (2n))` with `δ = 1 - confidence`.
pub fn hoeffding_half_width(value_bound: f64, n_samples: usize, confidence: f64) -> f64 {
    let delta = 1.0 - confidence;
    value_bound * ((2.0 / delta).ln() / (2.0 * n_samples as f64)).sqrt()
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )))
    }
}

/// Sample mean with a two-sided Hoeffding half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub n_samples: usize,
    pub half_width: f64,
    pub confidence: f64,
    /// Width of the interval containing every sampled value.
    pub value_bound: f64,
}

impl Estimate {
    /// Sums in slice order.
    pub fn from_values(values: &[f64], value_bound: f64, confidence: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("no samples".into()));
        }
        check_confidence(confidence)?;
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        Ok(Estimate {
            mean,
            n_samples: n,
            half_width: hoeffding_half_width(value_bound, n, confidence),
            confidence,
            value_bound,
        })
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn brackets(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }
}

/// A bounded functional of the state at time `t`.
#[derive(Debug, Clone)]
pub enum Functional {
    Test(TestFunction),
    /// Indicator of an open ball.
    Hit(Ball),
}

impl Functional {
    #[inline]
    pub fn eval(&self, x: StatePoint) -> f64 {
        match self {
            Functional::Test(f) => f.eval(x),
            Functional::Hit(ball) => {
                if ball.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn value_bound(&self) -> f64 {
        match self {
            Functional::Test(f) => f.range_width(),
            Functional::Hit(_) => 1.0,
        }
    }

    /// Expectation under a finitely supported law.
    pub fn expect(&self, mu: &EmpiricalMeasure) -> f64 {
        mu.atoms().map(|(x, w)| w * self.eval(x)).sum()
    }

    pub fn label(&self) -> String {
        match self {
            Functional::Test(f) => f.name().to_string(),
            Functional::Hit(b) => format!("hit(B({}, {}))", b.center(), b.radius()),
        }
    }
}

/// Sample size, master seed, confidence and parallelism of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub confidence: f64,
    pub workers: usize,
    /// Use closed-form laws when the process provides them.
    pub exact_when_available: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 10_000,
            seed: 0,
            confidence: DEFAULT_CONFIDENCE,
            workers: 1,
            exact_when_available: true,
        }
    }
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig {
            samples,
            seed,
            ..McConfig::default()
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn monte_carlo_only(mut self) -> Self {
        self.exact_when_available = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("worker count must be positive".into()));
        }
        check_confidence(self.confidence)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

/// Draws `n` independent copies of `Φ^x(t)` for cell `cell`, in trajectory
/// order. The first failing trajectory (by index) is reported.
pub fn sample_cell(
    process: &dyn MarkovProcess,
    x: StatePoint,
    t: f64,
    cell: u64,
    mc: &McConfig,
) -> Result<Vec<StatePoint>> {
    mc.validate()?;
    let pool = mc.pool()?;
    sample_cell_in(&pool, process, x, t, cell, mc)
}

fn sample_cell_in(
    pool: &rayon::ThreadPool,
    process: &dyn MarkovProcess,
    x: StatePoint,
    t: f64,
    cell: u64,
    mc: &McConfig,
) -> Result<Vec<StatePoint>> {
    check_time(t)?;
    process.check_initial(x)?;
    let draws: Vec<Result<StatePoint>> = pool.install(|| {
        (0..mc.samples as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream::stream(mc.seed, cell, k);
                process.sample_at(x, t, &mut rng)
            })
            .collect()
    });
    draws
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.map_err(|e| Error::Trajectory {
                trajectory: k as u64,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Cells `(x, t)` and the functionals evaluated on every cell.
///
/// All functionals of a cell are evaluated on the same trajectories.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    cells: Vec<(StatePoint, f64)>,
    functionals: Vec<Functional>,
}

impl SamplingPlan {
    /// Cartesian product, initial-major: cell `i·|times| + j` is
    /// `(initials[i], times[j])`.
    pub fn grid(initials: &[StatePoint], times: &[f64], functionals: Vec<Functional>) -> Result<Self> {
        let cells = initials
            .iter()
            .flat_map(|&x| times.iter().map(move |&t| (x, t)))
            .collect();
        SamplingPlan::from_cells(cells, functionals)
    }

    pub fn from_cells(cells: Vec<(StatePoint, f64)>, functionals: Vec<Functional>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if functionals.is_empty() {
            return Err(Error::InvalidArgument("plan has no functionals".into()));
        }
        for &(_, t) in &cells {
            check_time(t)?;
        }
        Ok(SamplingPlan { cells, functionals })
    }

    pub fn cells(&self) -> &[(StatePoint, f64)] {
        &self.cells
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }
}

/// One `(cell, functional)` entry of a batch result.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub cell: usize,
    pub functional: usize,
    pub x: StatePoint,
    pub t: f64,
    pub estimate: Result<Estimate>,
}

/// Runs every cell of the plan; failures are reported per cell without
/// aborting the others. Rows come in cell order, then functional order.
pub fn run_batch(process: &dyn MarkovProcess, plan: &SamplingPlan, mc: &McConfig) -> Result<Vec<BatchRow>> {
    mc.validate()?;
    let pool = mc.pool()?;
    let mut rows = Vec::with_capacity(plan.cells.len() * plan.functionals.len());
    for (c, &(x, t)) in plan.cells.iter().enumerate() {
        let states = sample_cell_in(&pool, process, x, t, c as u64, mc);
        for (j, functional) in plan.functionals.iter().enumerate() {
            let estimate = states.as_ref().map_err(Clone::clone).and_then(|states| {
                let values: Vec<f64> = states.iter().map(|&s| functional.eval(s)).collect();
                Estimate::from_values(&values, functional.value_bound(), mc.confidence)
            });
            rows.push(BatchRow {
                cell: c,
                functional: j,
                x,
                t,
                estimate,
            });
        }
    }
    Ok(rows)
}

/// Records `mc.samples` jump chains of `model` from `x` up to `horizon`;
/// chain `k` draws from stream `(seed, cell, k)`. Failures stay in place.
pub fn sample_trajectories(
    model: &IfsModel,
    x: StatePoint,
    horizon: f64,
    cell: u64,
    mc: &McConfig,
) -> Result<Vec<Result<Trajectory>>> {
    mc.validate()?;
    let pool = mc.pool()?;
    Ok(pool.install(|| {
        (0..mc.samples as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream::stream(mc.seed, cell, k);
                sample_jump_chain(model, x, horizon, &mut rng).map_err(|e| Error::Trajectory {
                    trajectory: k,
                    source: Box::new(e),
                })
            })
            .collect()
    }))
}

fn single(process: &dyn MarkovProcess, x: StatePoint, t: f64, functional: Functional, mc: &McConfig) -> Result<Estimate> {
    let plan = SamplingPlan::from_cells(vec![(x, t)], vec![functional])?;
    run_batch(process, &plan, mc)?
        .pop()
        .expect("one row per cell and functional")
        .estimate
}

/// Empirical mean of `f(Φ^x(t))`.
pub fn estimate_ptf(
    process: &dyn MarkovProcess,
    x: StatePoint,
    t: f64,
    f: &TestFunction,
    mc: &McConfig,
) -> Result<Estimate> {
    single(process, x, t, Functional::Test(f.clone()), mc)
}

/// Empirical frequency of `Φ^x(t) ∈ ball`.
pub fn estimate_hit(
    process: &dyn MarkovProcess,
    x: StatePoint,
    t: f64,
    ball: Ball,
    mc: &McConfig,
) -> Result<Estimate> {
    single(process, x, t, Functional::Hit(ball), mc)
}
