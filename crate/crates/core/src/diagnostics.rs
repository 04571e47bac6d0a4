//! Computable surrogates for the ergodic properties of a semigroup and
//! checkers for the contraction hypotheses of an IFS with jumps.
//!
//! Asymptotic quantities (`limsup_{t→∞}`, `liminf_{t→∞}`) are replaced by
//! maxima and minima over a declared finite time grid, and every report
//! records that grid in its metadata. Monte Carlo half-widths in a report
//! hold simultaneously: each of the `K` estimates behind it is computed at
//! confidence `1 - δ/K` (union bound), so maxima and minima over cells keep
//! the nominal level.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ifs_jump::{j_n, AssumptionSet, IfsModel, Modulus};
use crate::measure::{bl_distance, Ball, EmpiricalMeasure, StatePoint, TestFunction};
use crate::montecarlo::{run_batch, sample_cell, Functional, MarkovProcess, McConfig, SamplingPlan};

/// One line of a [`DiagnosticReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub x: f64,
    /// Time of the cell, or the time at which a max/min was attained.
    pub t: f64,
    pub value: f64,
    pub half_width: f64,
    pub error: Option<String>,
}

impl ReportRow {
    fn ok(label: impl Into<String>, x: f64, t: f64, value: f64, half_width: f64) -> Self {
        ReportRow {
            label: label.into(),
            x,
            t,
            value,
            half_width,
            error: None,
        }
    }

    fn failed(label: impl Into<String>, x: f64, t: f64, error: impl Into<String>) -> Self {
        ReportRow {
            label: label.into(),
            x,
            t,
            value: f64::NAN,
            half_width: f64::NAN,
            error: Some(error.into()),
        }
    }

    /// Lower end of the confidence interval.
    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }
}

/// Rows plus the metadata needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub kind: String,
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
}

impl DiagnosticReport {
    fn new(kind: &str, process: &dyn MarkovProcess, mc: &McConfig, mode: Mode) -> Self {
        let mut report = DiagnosticReport {
            kind: kind.to_string(),
            metadata: Vec::new(),
            rows: Vec::new(),
        };
        report.meta("model", process.name());
        if let Some(rate) = process.rate() {
            report.meta("lambda", rate);
        }
        report.meta("mode", mode.as_str());
        if mode == Mode::MonteCarlo {
            report.meta("seed", mc.seed);
            report.meta("samples", mc.samples);
            report.meta("confidence", mc.confidence);
        }
        report
    }

    fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn rows_labelled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.label == label)
    }

    /// First row with the given label.
    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

fn list(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{v}");
    }
    s
}

fn points(xs: &[StatePoint]) -> Vec<f64> {
    xs.iter().map(|x| x.value()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Exact,
    MonteCarlo,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo => "monte-carlo",
        }
    }

    fn select(process: &dyn MarkovProcess, mc: &McConfig, probe: (StatePoint, f64)) -> Mode {
        if mc.exact_when_available && process.exact_law(probe.0, probe.1).is_some() {
            Mode::Exact
        } else {
            Mode::MonteCarlo
        }
    }
}

/// Value and half-width of one functional on one cell.
type Cell = std::result::Result<(f64, f64), String>;

/// Confidence of each of `k` estimates so that all hold jointly.
fn per_cell(mc: &McConfig, k: usize) -> McConfig {
    let mut adjusted = *mc;
    adjusted.confidence = 1.0 - (1.0 - mc.confidence) / k.max(1) as f64;
    adjusted
}

/// Evaluates every functional on every cell, indexed `[cell][functional]`.
fn evaluate(
    process: &dyn MarkovProcess,
    mode: Mode,
    cells: Vec<(StatePoint, f64)>,
    functionals: Vec<Functional>,
    mc: &McConfig,
) -> Result<Vec<Vec<Cell>>> {
    let n_cells = cells.len();
    let n_fun = functionals.len();
    match mode {
        Mode::Exact => Ok(cells
            .iter()
            .map(|&(x, t)| {
                let law = process.exact_law(x, t).expect("exact mode was probed");
                functionals
                    .iter()
                    .map(|f| match &law {
                        Ok(mu) => Ok((f.expect(mu), 0.0)),
                        Err(e) => Err(e.to_string()),
                    })
                    .collect()
            })
            .collect()),
        Mode::MonteCarlo => {
            let plan = SamplingPlan::from_cells(cells, functionals)?;
            let cfg = per_cell(mc, n_cells * n_fun);
            let rows = run_batch(process, &plan, &cfg)?;
            let mut table = vec![Vec::with_capacity(n_fun); n_cells];
            for row in rows {
                table[row.cell].push(
                    row.estimate
                        .map(|e| (e.mean, e.half_width))
                        .map_err(|e| e.to_string()),
                );
            }
            Ok(table)
        }
    }
}

/// A finite grid of large times standing in for `t → ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWindow {
    start: f64,
    end: f64,
    grid: Vec<f64>,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !(start.is_finite() && end.is_finite() && 0.0 <= start && start <= end) {
            return Err(Error::InvalidArgument(format!(
                "window [{start}, {end}] is not a finite subinterval of [0, inf)"
            )));
        }
        if let Some(t) = grid.iter().find(|t| !(start..=end).contains(*t)) {
            return Err(Error::InvalidArgument(format!(
                "grid time {t} outside window [{start}, {end}]"
            )));
        }
        Ok(TimeWindow { start, end, grid })
    }

    /// `points` equally spaced times from `start` to `end` inclusive.
    pub fn linear(start: f64, end: f64, points: usize) -> Result<Self> {
        let grid = match points {
            0 => vec![],
            1 => vec![start],
            _ => (0..points)
                .map(|k| start + (end - start) * k as f64 / (points - 1) as f64)
                .collect(),
        };
        TimeWindow::new(start, end, grid)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

/// Eventual-continuity profile at `z`: for each `x`,
/// `ψ(x) = max_{t ∈ grid} |P_t f(x) - P_t f(z)|`.
///
/// Rows are labelled `psi`; `t` is where the maximum is attained.
pub fn ec_profile(
    process: &dyn MarkovProcess,
    f: &TestFunction,
    z: StatePoint,
    xs: &[StatePoint],
    window: &TimeWindow,
    mc: &McConfig,
) -> Result<DiagnosticReport> {
    if xs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let grid = window.grid();
    let mode = Mode::select(process, mc, (z, grid[0]));
    let mut report = DiagnosticReport::new("ec", process, mc, mode);
    report.meta("f", f.name());
    report.meta("z", z);
    report.meta("xs", list(&points(xs)));
    report.meta("window", format!("[{}, {}]", window.start(), window.end()));
    report.meta("grid", list(grid));

    let cells: Vec<(StatePoint, f64)> = std::iter::once(z)
        .chain(xs.iter().copied())
        .flat_map(|x| grid.iter().map(move |&t| (x, t)))
        .collect();
    let table = evaluate(process, mode, cells, vec![Functional::Test(f.clone())], mc)?;
    let (anchor, rest) = table.split_at(grid.len());

    for (i, &x) in xs.iter().enumerate() {
        let own = &rest[i * grid.len()..(i + 1) * grid.len()];
        let mut best: Option<(f64, f64, f64)> = None;
        let mut failure = None;
        for (k, &t) in grid.iter().enumerate() {
            match (&own[k][0], &anchor[k][0]) {
                (Ok((vx, hx)), Ok((vz, hz))) => {
                    let gap = (vx - vz).abs();
                    if best.is_none_or(|(g, _, _)| gap > g) {
                        best = Some((gap, t, hx + hz));
                    }
                }
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert_with(|| e.clone());
                }
            }
        }
        report.rows.push(match (failure, best) {
            (None, Some((gap, t, hw))) => ReportRow::ok("psi", x.value(), t, gap, hw),
            (Some(e), _) => ReportRow::failed("psi", x.value(), window.start(), e),
            (None, None) => unreachable!("grid is nonempty"),
        });
    }
    Ok(report)
}

/// E-property witnesses `w_k = P_{t_k} f(x_k) - P_{t_k} f(z)`, one `witness`
/// row per pair, followed by a `floor` row holding `min_k w_k`.
///
/// A floor that stays positive as `x_k → z` witnesses failure of the
/// e-property at `z`.
pub fn eproperty_witness(
    process: &dyn MarkovProcess,
    f: &TestFunction,
    z: StatePoint,
    pairs: &[(StatePoint, f64)],
    mc: &McConfig,
) -> Result<DiagnosticReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no witness pairs".into()));
    }
    let mode = Mode::select(process, mc, (z, pairs[0].1));
    let mut report = DiagnosticReport::new("eprop", process, mc, mode);
    report.meta("f", f.name());
    report.meta("z", z);
    report.meta(
        "pairs",
        pairs
            .iter()
            .map(|(x, t)| format!("{x}@{t}"))
            .collect::<Vec<_>>()
            .join(";"),
    );

    let cells = pairs.iter().flat_map(|&(x, t)| [(x, t), (z, t)]).collect();
    let table = evaluate(process, mode, cells, vec![Functional::Test(f.clone())], mc)?;
    let mut floor: Option<(f64, f64, f64, f64)> = None;
    for (k, &(x, t)) in pairs.iter().enumerate() {
        match (&table[2 * k][0], &table[2 * k + 1][0]) {
            (Ok((vx, hx)), Ok((vz, hz))) => {
                let w = vx - vz;
                if floor.is_none_or(|(m, ..)| w < m) {
                    floor = Some((w, x.value(), t, hx + hz));
                }
                report.rows.push(ReportRow::ok("witness", x.value(), t, w, hx + hz));
            }
            (Err(e), _) | (_, Err(e)) => report.rows.push(ReportRow::failed("witness", x.value(), t, e.clone())),
        }
    }
    report.rows.push(match floor {
        Some((w, x, t, hw)) => ReportRow::ok("floor", x, t, w, hw),
        None => ReportRow::failed("floor", f64::NAN, f64::NAN, "every witness failed"),
    });
    Ok(report)
}

/// Lower-bound scan for `inf_x liminf_t P_t(x, B(z, ε))`.
///
/// Rows: one `m` row per `x` with `min_t P_t(x, B(z, ε))`, then `scan_min`
/// (`min_x m(x)`) and `scan_min_lower`, the smallest lower confidence
/// endpoint over all cells. Cell streams do not depend on `eps`, so with a
/// fixed seed every `m(x)` is nondecreasing in `eps`.
pub fn lower_bound_scan(
    process: &dyn MarkovProcess,
    z: StatePoint,
    eps: f64,
    x_grid: &[StatePoint],
    t_grid: &[f64],
    mc: &McConfig,
) -> Result<DiagnosticReport> {
    let ball = Ball::new(z, eps)?;
    if x_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mode = Mode::select(process, mc, (x_grid[0], t_grid[0]));
    let mut report = DiagnosticReport::new("lowerbound", process, mc, mode);
    report.meta("z", z);
    report.meta("eps", eps);
    report.meta("x_grid", list(&points(x_grid)));
    report.meta("t_grid", list(t_grid));

    let cells = x_grid
        .iter()
        .flat_map(|&x| t_grid.iter().map(move |&t| (x, t)))
        .collect();
    let table = evaluate(process, mode, cells, vec![Functional::Hit(ball)], mc)?;
    let mut scan: Option<(f64, f64, f64, f64)> = None;
    let mut lowest: Option<(f64, f64, f64)> = None;
    let mut failed = false;
    for (i, &x) in x_grid.iter().enumerate() {
        let own = &table[i * t_grid.len()..(i + 1) * t_grid.len()];
        let mut min: Option<(f64, f64, f64)> = None;
        let mut failure = None;
        for (k, &t) in t_grid.iter().enumerate() {
            match &own[k][0] {
                Ok((v, hw)) => {
                    if min.is_none_or(|(m, ..)| *v < m) {
                        min = Some((*v, t, *hw));
                    }
                    if lowest.is_none_or(|(l, ..)| v - hw < l) {
                        lowest = Some((v - hw, x.value(), t));
                    }
                }
                Err(e) => {
                    failure.get_or_insert_with(|| e.clone());
                }
            }
        }
        match (failure, min) {
            (None, Some((v, t, hw))) => {
                if scan.is_none_or(|(m, ..)| v < m) {
                    scan = Some((v, x.value(), t, hw));
                }
                report.rows.push(ReportRow::ok("m", x.value(), t, v, hw));
            }
            (Some(e), _) => {
                failed = true;
                report.rows.push(ReportRow::failed("m", x.value(), f64::NAN, e));
            }
            (None, None) => unreachable!("time grid is nonempty"),
        }
    }
    let summary = |label: &str, found: Option<(f64, f64, f64, f64)>| match (failed, found) {
        (false, Some((v, x, t, hw))) => ReportRow::ok(label, x, t, v, hw),
        _ => ReportRow::failed(label, f64::NAN, f64::NAN, "one or more initial points failed"),
    };
    report.rows.push(summary("scan_min", scan));
    report.rows.push(summary("scan_min_lower", lowest.map(|(v, x, t)| (v.max(0.0), x, t, 0.0))));
    Ok(report)
}

/// Bounded-Lipschitz distances of the laws of `Φ^x(t)` to `reference`
/// (`distance` rows) and between initials at equal times (`pairwise:<y>`
/// rows, with `x` the first initial).
///
/// In Monte Carlo mode the statistic is a plug-in distance between empirical
/// laws. Its expectation dominates the true distance and it changes by at
/// most `2/n` per resampled point, so by McDiarmid `value + half_width` is an
/// upper confidence bound on the true distance. For a Dirac reference the
/// statistic is a sample mean and the interval is two-sided.
pub fn stability_report(
    process: &dyn MarkovProcess,
    initials: &[StatePoint],
    t_grid: &[f64],
    reference: &EmpiricalMeasure,
    mc: &McConfig,
) -> Result<DiagnosticReport> {
    if initials.is_empty() || t_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mode = Mode::select(process, mc, (initials[0], t_grid[0]));
    let mut report = DiagnosticReport::new("stability", process, mc, mode);
    report.meta("initials", list(&points(initials)));
    report.meta("t_grid", list(t_grid));
    report.meta(
        "reference",
        reference
            .atoms()
            .map(|(x, w)| format!("{w}*{x}"))
            .collect::<Vec<_>>()
            .join("+"),
    );

    let n_pairs = initials.len() * (initials.len() - 1) / 2;
    let k = (initials.len() + n_pairs) * t_grid.len();
    let delta = (1.0 - mc.confidence) / k as f64;
    let n = mc.samples as f64;
    let (hw_ref, hw_pair) = match mode {
        Mode::Exact => (0.0, 0.0),
        Mode::MonteCarlo => {
            let log = (2.0 / delta).ln();
            ((2.0 * log / n).sqrt(), (4.0 * log / n).sqrt())
        }
    };

    let mut laws: Vec<std::result::Result<EmpiricalMeasure, String>> = Vec::with_capacity(initials.len() * t_grid.len());
    for (i, &x) in initials.iter().enumerate() {
        for (j, &t) in t_grid.iter().enumerate() {
            let law = match mode {
                Mode::Exact => process.exact_law(x, t).expect("exact mode was probed"),
                Mode::MonteCarlo => {
                    let cell = (i * t_grid.len() + j) as u64;
                    sample_cell(process, x, t, cell, mc).and_then(|s| EmpiricalMeasure::from_samples(&s))
                }
            };
            let law = law.map_err(|e| e.to_string());
            report.rows.push(match &law {
                Ok(mu) => ReportRow::ok("distance", x.value(), t, bl_distance(mu, reference), hw_ref),
                Err(e) => ReportRow::failed("distance", x.value(), t, e.clone()),
            });
            laws.push(law);
        }
    }
    for (j, &t) in t_grid.iter().enumerate() {
        for a in 0..initials.len() {
            for b in a + 1..initials.len() {
                let label = format!("pairwise:{}", initials[b]);
                let x = initials[a].value();
                let (la, lb) = (&laws[a * t_grid.len() + j], &laws[b * t_grid.len() + j]);
                report.rows.push(match (la, lb) {
                    (Ok(mu), Ok(nu)) => ReportRow::ok(label, x, t, bl_distance(mu, nu), hw_pair),
                    (Err(e), _) | (_, Err(e)) => ReportRow::failed(label, x, t, e.clone()),
                });
            }
        }
    }
    Ok(report)
}

/// Largest value of `violation` over the grid, with the point attaining it.
fn worst<F>(x_grid: &[StatePoint], mut violation: F) -> Result<(StatePoint, f64)>
where
    F: FnMut(StatePoint) -> Result<f64>,
{
    let mut best: Option<(StatePoint, f64)> = None;
    for &x in x_grid {
        let v = violation(x)?;
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((x, v));
        }
    }
    best.ok_or(Error::EmptyGrid)
}

fn b2_at(model: &IfsModel, assume: &AssumptionSet, x: StatePoint) -> Result<f64> {
    let z = assume.anchor;
    let p = model.probabilities(x)?;
    let mut lhs = 0.0;
    for (i, &pi) in p.weights().iter().enumerate() {
        lhs += pi * model.apply_map(i, x)?.distance(z);
    }
    Ok(lhs - assume.contraction(x)? * x.distance(z))
}

fn b3_at(model: &IfsModel, assume: &AssumptionSet, x: StatePoint) -> Result<f64> {
    let z = assume.anchor;
    let (px, pz) = (model.probabilities(x)?, model.probabilities(z)?);
    let total: f64 = px
        .weights()
        .iter()
        .zip(pz.weights())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total - assume.omega.eval(x.distance(z)))
}

/// `max_x [Σ_i p_i(x)|w_i(x) - z| - r(x)|x - z|]`; nonpositive means the
/// average contraction hypothesis holds on the grid.
pub fn check_b2(model: &IfsModel, assume: &AssumptionSet, x_grid: &[StatePoint]) -> Result<f64> {
    worst(x_grid, |x| b2_at(model, assume, x)).map(|(_, v)| v)
}

/// `max_x [Σ_i |p_i(x) - p_i(z)| - ω(|x - z|)]` for the modulus in `assume`.
pub fn check_b3(model: &IfsModel, assume: &AssumptionSet, x_grid: &[StatePoint]) -> Result<f64> {
    worst(x_grid, |x| b3_at(model, assume, x)).map(|(_, v)| v)
}

/// Upper bound on `Σ_{n≥M} ω(J_n(x)|x - z| qⁿ)` with `q = λ/(λ - α)`.
///
/// Terms `n = M..=n_trunc` are summed exactly. The remainder is bounded by
/// `ω'(0) a_N ρ/(1 - ρ)`, where `a_n = J_n(x)|x - z| qⁿ` and `ρ = a_N/a_{N-1}`.
/// This needs a concave modulus with a declared slope at zero and term
/// ratios that are nonincreasing and below one; otherwise the bound is
/// refused with [`Error::TailMajorant`].
pub fn b5_series_bound(model: &IfsModel, assume: &AssumptionSet, x: StatePoint, n_trunc: usize) -> Result<f64> {
    let (lambda, alpha) = (assume.lambda, assume.alpha);
    if lambda.partial_cmp(&alpha) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidArgument(format!(
            "series needs lambda > alpha, got lambda = {lambda}, alpha = {alpha}"
        )));
    }
    if n_trunc <= assume.m {
        return Err(Error::InvalidArgument(format!(
            "truncation {n_trunc} must exceed the first index {}",
            assume.m
        )));
    }
    let q = lambda / (lambda - alpha);
    let d = x.distance(assume.anchor);
    let mut terms = Vec::with_capacity(n_trunc - assume.m + 1);
    for n in assume.m..=n_trunc {
        terms.push(j_n(model, assume, x, n)? * d * q.powi(n as i32));
    }
    let partial: f64 = terms.iter().map(|&a| assume.omega.eval(a)).sum();
    if d == 0.0 {
        return Ok(partial);
    }

    let slope = assume.omega.slope_at_zero().ok_or_else(|| {
        Error::TailMajorant(format!("modulus {} declares no slope at zero", assume.omega.name()))
    })?;
    let ratios: Vec<f64> = terms.windows(2).map(|w| w[1] / w[0]).collect();
    if let Some(k) = ratios
        .windows(2)
        .position(|r| r[1] > r[0] * (1.0 + 1e-9))
    {
        return Err(Error::TailMajorant(format!(
            "term ratios increase at n = {} for x = {x}",
            assume.m + k + 2
        )));
    }
    let rho = *ratios.last().expect("at least two terms");
    if rho.partial_cmp(&1.0) != Some(std::cmp::Ordering::Less) {
        return Err(Error::TailMajorant(format!(
            "terms do not decay geometrically for x = {x} (ratio {rho})"
        )));
    }
    let last = *terms.last().expect("at least two terms");
    Ok(partial + slope * last * rho / (1.0 - rho))
}

fn b5_at(model: &IfsModel, assume: &AssumptionSet, x: StatePoint, n_trunc: usize) -> Result<f64> {
    if x.distance(assume.anchor) > assume.eta {
        return Err(Error::InvalidArgument(format!(
            "grid point {x} lies outside the closed ball of radius {} around {}",
            assume.eta, assume.anchor
        )));
    }
    Ok(b5_series_bound(model, assume, x, n_trunc)? - (1.0 - assume.gamma))
}

/// `max_x [bound on Σ_{n≥M} ω(J_n(x)|x - z| qⁿ) - (1 - γ)]` over grid points
/// with `|x - z| ≤ η`; nonpositive means the series hypothesis holds.
pub fn check_b5(model: &IfsModel, assume: &AssumptionSet, n_trunc: usize, x_grid: &[StatePoint]) -> Result<f64> {
    worst(x_grid, |x| b5_at(model, assume, x, n_trunc)).map(|(_, v)| v)
}

/// Default truncation index of the B5 series.
pub const DEFAULT_B5_TRUNCATION: usize = 16;

/// All hypothesis checks of an IFS with jumps as one report: `b2`, then
/// `b3[ω]` and `b5[ω]` for every modulus. `x` is the worst grid point; a
/// refused check becomes a failure row.
pub fn assumption_report(
    model: &IfsModel,
    assume: &AssumptionSet,
    moduli: &[Modulus],
    x_grid: &[StatePoint],
    b5_grid: &[StatePoint],
    n_trunc: usize,
) -> DiagnosticReport {
    let mut report = DiagnosticReport {
        kind: "assumptions".into(),
        metadata: Vec::new(),
        rows: Vec::new(),
    };
    report.meta("model", model.name());
    report.meta("lambda", model.rate());
    report.meta("mode", "exact");
    report.meta("z", assume.anchor);
    report.meta("eta", assume.eta);
    report.meta("gamma", assume.gamma);
    report.meta("alpha", assume.alpha);
    report.meta("m", assume.m);
    report.meta("n_trunc", n_trunc);
    report.meta("x_grid", list(&points(x_grid)));
    report.meta("b5_grid", list(&points(b5_grid)));
    if let Some(beta) = assume.beta {
        report.meta("beta", beta);
    }

    let row = |label: String, found: Result<(StatePoint, f64)>| match found {
        Ok((x, v)) => ReportRow::ok(label, x.value(), 0.0, v, 0.0),
        Err(e) => ReportRow::failed(label, f64::NAN, 0.0, e.to_string()),
    };
    report.rows.push(row("b2".into(), worst(x_grid, |x| b2_at(model, assume, x))));
    for omega in moduli {
        let a = assume.clone().with_omega(omega.clone());
        report.rows.push(row(format!("b3[{}]", omega.name()), worst(x_grid, |x| b3_at(model, &a, x))));
        report.rows.push(row(
            format!("b5[{}]", omega.name()),
            worst(b5_grid, |x| b5_at(model, &a, x, n_trunc)),
        ));
    }
    report
}

/// `{0, 1, 2, 4, …}` up to and including `t_search`.
pub fn c2_time_grid(t_search: f64) -> Result<Vec<f64>> {
    if !(t_search > 0.0 && t_search.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "search horizon must be positive and finite, got {t_search}"
        )));
    }
    let mut grid = vec![0.0];
    let mut t = 1.0;
    while t <= t_search {
        grid.push(t);
        t *= 2.0;
    }
    Ok(grid)
}

/// Hitting-time search for the uniform floor `β`.
///
/// For each `ε` and `x`, a `hit[ε]` row holds `max_t P_t(x, B(z, ε))` over
/// [`c2_time_grid`] with `t` the earliest maximiser; a point never seen in
/// the ball becomes a failure row. A `beta_hat[ε]` row then holds the
/// minimum over `x`.
pub fn check_c2(
    process: &dyn MarkovProcess,
    z: StatePoint,
    eps_list: &[f64],
    x_grid: &[StatePoint],
    t_search: f64,
    mc: &McConfig,
) -> Result<DiagnosticReport> {
    let grid = c2_time_grid(t_search)?;
    if eps_list.is_empty() || x_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let balls = eps_list
        .iter()
        .map(|&e| Ball::new(z, e).map(Functional::Hit))
        .collect::<Result<Vec<_>>>()?;
    let mode = Mode::select(process, mc, (x_grid[0], grid[0]));
    let mut report = DiagnosticReport::new("c2", process, mc, mode);
    report.meta("z", z);
    report.meta("eps", list(eps_list));
    report.meta("x_grid", list(&points(x_grid)));
    report.meta("t_grid", list(&grid));

    let cells = x_grid
        .iter()
        .flat_map(|&x| grid.iter().map(move |&t| (x, t)))
        .collect();
    let table = evaluate(process, mode, cells, balls, mc)?;
    for (e, &eps) in eps_list.iter().enumerate() {
        let hit = format!("hit[{eps}]");
        let mut floor: Option<(f64, f64, f64, f64)> = None;
        let mut failed = false;
        for (i, &x) in x_grid.iter().enumerate() {
            let mut best: Option<(f64, f64, f64)> = None;
            let mut failure = None;
            for (k, &t) in grid.iter().enumerate() {
                match &table[i * grid.len() + k][e] {
                    Ok((v, hw)) => {
                        if best.is_none_or(|(b, ..)| *v > b) {
                            best = Some((*v, t, *hw));
                        }
                    }
                    Err(err) => {
                        failure.get_or_insert_with(|| err.clone());
                    }
                }
            }
            let row = match (failure, best) {
                (Some(err), _) => ReportRow::failed(&hit, x.value(), f64::NAN, err),
                (None, Some((v, _, _))) if v <= 0.0 => {
                    ReportRow::failed(&hit, x.value(), f64::NAN, format!("no hit within t = {t_search}"))
                }
                (None, Some((v, t, hw))) => {
                    if floor.is_none_or(|(f, ..)| v < f) {
                        floor = Some((v, x.value(), t, hw));
                    }
                    ReportRow::ok(&hit, x.value(), t, v, hw)
                }
                (None, None) => unreachable!("time grid is nonempty"),
            };
            failed |= row.error.is_some();
            report.rows.push(row);
        }
        let label = format!("beta_hat[{eps}]");
        report.rows.push(match (failed, floor) {
            (false, Some((v, x, t, hw))) => ReportRow::ok(label, x, t, v, hw),
            _ => ReportRow::failed(label, f64::NAN, f64::NAN, "one or more initial points failed"),
        });
    }
    Ok(report)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_ctmc::{CtmcState, ExactCtmc};
    use crate::ifs_jump::{example_flip, example_halving};
    use std::f64::consts::E;

    fn pt(v: f64) -> StatePoint {
        StatePoint::new(v).unwrap()
    }

    #[test]
    fn window_validation() {
        assert_eq!(TimeWindow::new(1.0, 2.0, vec![]), Err(Error::EmptyGrid));
        assert!(TimeWindow::new(2.0, 1.0, vec![1.5]).is_err());
        assert!(TimeWindow::new(1.0, 2.0, vec![3.0]).is_err());
        let w = TimeWindow::linear(10.0, 20.0, 3).unwrap();
        assert_eq!(w.grid(), &[10.0, 15.0, 20.0]);
    }

    #[test]
    fn ec_profile_ctmc_exact() {
        let f = TestFunction::min_one();
        for n in [2u32, 5, 10] {
            let t0 = 10.0 * f64::from(n);
            let window = TimeWindow::linear(t0, 10.0 * t0, 50).unwrap();
            let x = CtmcState::Low(n).embed();
            let r = ec_profile(&ExactCtmc, &f, StatePoint::ZERO, &[x, StatePoint::ZERO], &window, &McConfig::default())
                .unwrap();
            assert_eq!(r.metadata_value("mode"), Some("exact"));
            let psi = &r.rows[0];
            // e^{-t/n}(1/n + t/n) is decreasing past t = n, so the max sits at T
            let expected = (-10.0f64).exp() * (1.0 / f64::from(n) + 10.0);
            assert!((psi.value - expected).abs() < 1e-15);
            assert!(psi.value < 11.0 * (-10.0f64).exp());
            assert_eq!(psi.t, t0);
            assert_eq!(r.rows[1].value, 0.0);
        }
    }

    #[test]
    fn ec_profile_at_anchor_monte_carlo() {
        let (model, _) = example_halving(1.0).unwrap();
        let window = TimeWindow::new(5.0, 10.0, vec![5.0, 10.0]).unwrap();
        let mc = McConfig::new(2000, 3);
        let r = ec_profile(&model, &TestFunction::min_one(), pt(1.0), &[pt(1.0)], &window, &mc).unwrap();
        let row = &r.rows[0];
        assert!(row.value <= row.half_width, "{row:?}");
        assert_eq!(r.metadata_value("mode"), Some("monte-carlo"));
    }

    #[test]
    fn ec_profile_rejects_empty_inputs() {
        let window = TimeWindow::new(1.0, 2.0, vec![1.0]).unwrap();
        let f = TestFunction::min_one();
        assert_eq!(
            ec_profile(&ExactCtmc, &f, StatePoint::ZERO, &[], &window, &McConfig::default()),
            Err(Error::EmptyGrid)
        );
    }

    #[test]
    fn eproperty_ctmc_closed_form() {
        let pairs: Vec<_> = (2u32..=50)
            .map(|n| (CtmcState::Low(n).embed(), f64::from(n)))
            .collect();
        let r = eproperty_witness(&ExactCtmc, &TestFunction::min_one(), StatePoint::ZERO, &pairs, &McConfig::default())
            .unwrap();
        for (row, n) in r.rows_labelled("witness").zip(2u32..) {
            let expected = (1.0 + 1.0 / f64::from(n)) / E;
            assert!((row.value - expected).abs() < 1e-12);
        }
        let floor = r.row("floor").unwrap();
        assert!(floor.value >= 1.0 / E);
        assert_eq!(floor.t, 50.0);
    }

    #[test]
    fn eproperty_trivial_pair() {
        let r = eproperty_witness(
            &ExactCtmc,
            &TestFunction::min_one(),
            StatePoint::ZERO,
            &[(StatePoint::ZERO, 4.0)],
            &McConfig::default(),
        )
        .unwrap();
        assert_eq!(r.rows[0].value, 0.0);
        assert!(eproperty_witness(&ExactCtmc, &TestFunction::min_one(), StatePoint::ZERO, &[], &McConfig::default())
            .is_err());
    }

    #[test]
    fn lower_bound_scan_absorbing_point() {
        let flip = example_flip(1.0).unwrap();
        let r = lower_bound_scan(&flip, StatePoint::ZERO, 0.05, &[StatePoint::ZERO], &[10.0, 20.0], &McConfig::new(500, 1))
            .unwrap();
        assert_eq!(r.row("m").unwrap().value, 1.0);
        assert_eq!(r.row("scan_min").unwrap().value, 1.0);
    }

    #[test]
    fn lower_bound_scan_ctmc_exact() {
        let x = CtmcState::High(3).embed();
        let r = lower_bound_scan(&ExactCtmc, StatePoint::ZERO, 0.01, &[x], &[30.0, 60.0], &McConfig::default()).unwrap();
        let m = r.row("m").unwrap();
        assert_eq!(m.t, 30.0);
        assert!((m.value - (1.0 - (-10.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_scan_monotone_in_eps() {
        let (model, _) = example_halving(1.0).unwrap();
        let xs = [pt(0.5), pt(2.0)];
        let mc = McConfig::new(1000, 9);
        let small = lower_bound_scan(&model, StatePoint::ZERO, 0.1, &xs, &[5.0, 10.0], &mc).unwrap();
        let large = lower_bound_scan(&model, StatePoint::ZERO, 0.4, &xs, &[5.0, 10.0], &mc).unwrap();
        for (a, b) in small.rows_labelled("m").zip(large.rows_labelled("m")) {
            assert!(a.value <= b.value);
        }
        assert!(lower_bound_scan(&model, StatePoint::ZERO, 0.0, &xs, &[1.0], &mc).is_err());
    }

    #[test]
    fn stability_examples() {
        let flip = example_flip(1.0).unwrap();
        let dirac = EmpiricalMeasure::dirac(StatePoint::ZERO);
        let r = stability_report(&flip, &[StatePoint::ZERO], &[1.0, 5.0], &dirac, &McConfig::new(200, 0)).unwrap();
        assert!(r.rows.iter().all(|row| row.value == 0.0));

        let x = CtmcState::Low(2).embed();
        let r = stability_report(&ExactCtmc, &[x, CtmcState::High(2).embed()], &[40.0], &dirac, &McConfig::default())
            .unwrap();
        let d = r.row("distance").unwrap();
        assert!(d.value <= 1e-6 && d.half_width == 0.0);
        assert_eq!(r.rows_labelled("pairwise:2").count(), 1);
    }

    #[test]
    fn b2_identity_for_halving() {
        let (model, assume) = example_halving(1.0).unwrap();
        assert!(check_b2(&model, &assume, &[pt(1.0)]).unwrap().abs() < 1e-15);
        assert_eq!(check_b2(&model, &assume, &[StatePoint::ZERO]).unwrap(), 0.0);
        let grid: Vec<_> = (1..=1000).map(|k| pt(f64::from(k) / 100.0)).collect();
        assert!(check_b2(&model, &assume, &grid).unwrap() <= 1e-12);
        assert_eq!(check_b2(&model, &assume, &[]), Err(Error::EmptyGrid));
    }

    #[test]
    fn b3_depends_on_modulus() {
        let (model, assume) = example_halving(1.0).unwrap();
        let matched = assume.clone().with_omega(Modulus::two_one_minus_exp());
        let grid: Vec<_> = (0..=1000).map(|k| pt(f64::from(k) / 100.0)).collect();
        assert!(check_b3(&model, &matched, &grid).unwrap() <= 1e-12);
        let v = check_b3(&model, &assume, &[pt(0.01)]).unwrap();
        let expected = -2.0 * (-0.01f64).exp_m1() - 0.01;
        assert!(v > 0.0 && (v - expected).abs() < 1e-15);
    }

    #[test]
    fn b5_closed_forms() {
        let (model, assume) = example_halving(1.0).unwrap();
        let n = DEFAULT_B5_TRUNCATION;
        let boundary = check_b5(&model, &assume, n, &[pt(0.125)]).unwrap();
        assert!(boundary.abs() < 1e-12, "{boundary}");
        let sum = b5_series_bound(&model, &assume, pt(1.0 / 16.0), n).unwrap();
        assert!((sum - 0.125 * (1.0f64 / 16.0).exp()).abs() < 1e-12);
        assert!((sum - 0.133062).abs() < 1e-6);
        assert!(check_b5(&model, &assume, n, &[StatePoint::ZERO]).unwrap() + (1.0 - assume.gamma) == 0.0);
    }

    #[test]
    fn b5_residual_increases_in_x() {
        let (model, assume) = example_halving(1.0).unwrap();
        let residuals: Vec<f64> = (1..=25)
            .map(|k| check_b5(&model, &assume, 12, &[pt(f64::from(k) / 200.0)]).unwrap())
            .collect();
        assert!(residuals.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn b5_refusals() {
        let (model, assume) = example_halving(1.0).unwrap();
        assert!(check_b5(&model, &assume, 16, &[pt(0.2)]).is_err());
        assert!(check_b5(&model, &assume, 0, &[pt(0.1)]).is_err());
        let no_slope = Modulus::new("sqrt", None, f64::sqrt).unwrap();
        let refused = check_b5(&model, &assume.clone().with_omega(no_slope), 8, &[pt(0.1)]);
        assert!(matches!(refused, Err(Error::TailMajorant(_))));
        let mut growing = assume;
        growing.alpha = 0.9;
        assert!(matches!(check_b5(&model, &growing, 8, &[pt(0.1)]), Err(Error::TailMajorant(_))));
    }

    #[test]
    fn assumption_report_rows() {
        let (model, assume) = example_halving(1.0).unwrap();
        let moduli = [Modulus::identity(), Modulus::two_one_minus_exp()];
        let r = assumption_report(&model, &assume, &moduli, &[pt(0.5), pt(1.0)], &[pt(0.125)], 16);
        let labels: Vec<_> = r.rows.iter().map(|row| row.label.as_str()).collect();
        assert_eq!(labels, ["b2", "b3[s]", "b5[s]", "b3[2(1-exp(-s))]", "b5[2(1-exp(-s))]"]);
        assert!(!r.has_errors());
        assert!(r.rows[1].value > 0.0 && r.rows[3].value <= 1e-12);
    }

    #[test]
    fn c2_grid_and_trivial_hit() {
        assert_eq!(c2_time_grid(8.0).unwrap(), vec![0.0, 1.0, 2.0, 4.0, 8.0]);
        assert_eq!(c2_time_grid(0.5).unwrap(), vec![0.0]);
        assert!(c2_time_grid(0.0).is_err());
        let flip = example_flip(1.0).unwrap();
        let r = check_c2(&flip, StatePoint::ZERO, &[0.1], &[StatePoint::ZERO], 4.0, &McConfig::new(100, 0)).unwrap();
        let row = r.row("hit[0.1]").unwrap();
        assert_eq!((row.t, row.value), (0.0, 1.0));
    }

    #[test]
    fn c2_ctmc_exact_and_failures() {
        let x = CtmcState::High(2).embed();
        let r = check_c2(&ExactCtmc, StatePoint::ZERO, &[0.01], &[x], 32.0, &McConfig::default()).unwrap();
        let row = r.row("beta_hat[0.01]").unwrap();
        assert_eq!(row.t, 32.0);
        assert!((row.value - (1.0 - (-16.0f64).exp())).abs() < 1e-15);

        let far = CtmcState::High(1000).embed();
        let r = check_c2(&ExactCtmc, pt(5.0), &[0.5], &[far], 4.0, &McConfig::default()).unwrap();
        assert!(r.has_errors());
    }
}
