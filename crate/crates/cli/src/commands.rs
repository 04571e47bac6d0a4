use anyhow::{anyhow, bail, Context, Result};
use feller::diagnostics::{self, DiagnosticReport, TimeWindow};
use feller::exact_ctmc::{semigroup_apply, transition_prob, CtmcState, ExactCtmc};
use feller::ifs_jump::{example_flip, example_halving, AssumptionSet, IfsModel, Modulus};
use feller::montecarlo::{run_batch, sample_trajectories, Functional, SamplingPlan};
use feller::{bump_function, EmpiricalMeasure, Interval, MarkovProcess, StatePoint, TestFunction};

use crate::config::{ExperimentConfig, ModelName, Pairs};
use crate::output::{Series, Table, Value};

pub const DIAGNOSE_COLUMNS: &[&str] = &["label", "x", "t", "value", "half_width", "error"];
pub const SIMULATE_COLUMNS: &[&str] = &["traj_id", "k", "tau_k", "xi_k", "index_k", "phi_k"];
pub const ESTIMATE_COLUMNS: &[&str] = &["functional", "x", "t", "mean", "half_width", "n_samples", "exact", "error"];
pub const CTMC_COLUMNS: &[&str] = &["quantity", "from", "to", "t", "value"];

/// A finished command: the table, an optional chart and whether any cell
/// failed.
pub struct Outcome {
    pub table: Table,
    pub chart: Chart,
    pub failed: bool,
}

pub struct Chart {
    pub title: String,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub series: Vec<Series>,
}

enum Model {
    Ctmc(ExactCtmc),
    Ifs(Box<IfsModel>, Option<Box<AssumptionSet>>),
}

impl Model {
    fn build(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match cfg.model {
            ModelName::Ctmc => Model::Ctmc(ExactCtmc),
            ModelName::Flip => Model::Ifs(Box::new(example_flip(cfg.lambda)?), None),
            ModelName::Halving => {
                let (model, assume) = example_halving(cfg.lambda)?;
                Model::Ifs(Box::new(model), Some(Box::new(assume)))
            }
        })
    }

    fn process(&self) -> &dyn MarkovProcess {
        match self {
            Model::Ctmc(c) => c,
            Model::Ifs(m, _) => m.as_ref(),
        }
    }
}

fn points(values: &[f64]) -> Result<Vec<StatePoint>> {
    values.iter().map(|&v| StatePoint::new(v).map_err(Into::into)).collect()
}

fn initials(cfg: &ExperimentConfig) -> Result<Vec<StatePoint>> {
    let default = match cfg.model {
        ModelName::Ctmc => vec![0.5, 2.0, 1.0 / 3.0],
        ModelName::Flip | ModelName::Halving => vec![0.5, 1.0, 2.0],
    };
    points(cfg.initials.as_deref().unwrap_or(&default))
}

fn times(cfg: &ExperimentConfig, default: &[f64]) -> Vec<f64> {
    cfg.times.clone().unwrap_or_else(|| default.to_vec())
}

fn test_function(spec: &str) -> Result<TestFunction> {
    if spec == "xmin1" {
        return Ok(TestFunction::min_one());
    }
    if let Some(args) = spec.strip_prefix("bump:") {
        let parts = args
            .split(':')
            .map(crate::config::parse_real)
            .collect::<Result<Vec<_>>>()?;
        if let [lo, hi, eps] = parts[..] {
            return Ok(bump_function(Interval::new(lo, hi)?, eps)?);
        }
    }
    bail!("unknown test function `{spec}` (expected xmin1 or bump:lo:hi:eps)")
}

fn base_table(cfg: &ExperimentConfig, schema: &'static str, command: String, columns: &'static [&'static str]) -> Table {
    Table {
        schema,
        command,
        config: cfg.manifest(),
        report: Vec::new(),
        columns,
        rows: Vec::new(),
    }
}

/// Closed-form rows `p_{ij}(t)` and, when a test function is given,
/// `P_t f(i)` for the states `1/n`, `n` and `0`.
pub fn exact_ctmc(n: u32, ts: &[f64], f: Option<&str>) -> Result<Outcome> {
    let states = [CtmcState::low(n)?, CtmcState::high(n)?, CtmcState::Zero];
    if ts.is_empty() {
        return Err(feller::Error::EmptyGrid.into());
    }
    let f = f.map(test_function).transpose()?;
    let mut table = Table {
        schema: "exact-ctmc/1",
        command: "exact-ctmc".into(),
        config: vec![
            ("n".into(), n.to_string()),
            ("t".into(), ts.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
        ],
        report: Vec::new(),
        columns: CTMC_COLUMNS,
        rows: Vec::new(),
    };
    if let Some(f) = &f {
        table.config.push(("f".into(), f.name().to_string()));
    }
    let mut series: Vec<Series> = Vec::new();
    for &t in ts {
        for &i in &states {
            for &j in &states {
                let p = transition_prob(i, j, t)?;
                table.rows.push(vec!["p".into(), i.to_string().into(), j.to_string().into(), t.into(), p.into()]);
                push_point(&mut series, format!("p({i},{j})"), (t, p));
            }
            if let Some(f) = &f {
                let v = semigroup_apply(f, i, t)?;
                table.rows.push(vec!["semigroup".into(), i.to_string().into(), "".into(), t.into(), v.into()]);
            }
        }
    }
    Ok(Outcome {
        table,
        chart: Chart {
            title: format!("transition probabilities, n = {n}"),
            x_label: "t",
            y_label: "probability",
            series,
        },
        failed: false,
    })
}

fn push_point(series: &mut Vec<Series>, name: String, p: (f64, f64)) {
    match series.iter_mut().find(|s| s.name == name) {
        Some(s) => s.points.push(p),
        None => series.push(Series { name, points: vec![p] }),
    }
}

/// Jump-chain records of `trajectories` runs from every initial point.
/// Trajectory `k` from initial `i` has id `i * trajectories + k`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = match Model::build(cfg)? {
        Model::Ifs(m, _) => *m,
        Model::Ctmc(_) => bail!("simulate supports the IFS models flip and halving only"),
    };
    let xs = initials(cfg)?;
    let mut table = base_table(cfg, "simulate/1", "simulate".into(), SIMULATE_COLUMNS);
    table.report.push(("horizon".into(), cfg.horizon.to_string()));
    table.report.push(("trajectories".into(), cfg.trajectories.to_string()));
    table.report.push((
        "initials".into(),
        xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"),
    ));
    let mut mc = cfg.mc();
    mc.samples = cfg.trajectories;
    let mut failed = false;
    let mut series = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let runs = sample_trajectories(&model, x, cfg.horizon, i as u64, &mc)?;
        for (k, run) in runs.into_iter().enumerate() {
            let id = (i * cfg.trajectories + k) as u64;
            match run {
                Ok(traj) => {
                    let mut path = vec![(0.0, x.value())];
                    for (j, r) in traj.records.iter().enumerate() {
                        table.rows.push(vec![
                            Value::Count(id),
                            Value::Count(j as u64 + 1),
                            r.tau.into(),
                            r.xi.value().into(),
                            Value::Count(r.index as u64),
                            r.phi.value().into(),
                        ]);
                        path.push((r.tau, r.phi.value()));
                    }
                    path.push((cfg.horizon, traj.last_jump_state().value()));
                    if series.len() < 12 {
                        series.push(Series { name: format!("traj {id}"), points: path });
                    }
                }
                Err(e) => {
                    failed = true;
                    eprintln!("trajectory {id}: {e}");
                }
            }
        }
    }
    Ok(Outcome {
        table,
        chart: Chart {
            title: format!("{} trajectories", model.name()),
            x_label: "jump time",
            y_label: "post-jump state",
            series,
        },
        failed,
    })
}

/// Monte Carlo estimates of `P_t f(x)` and, for every radius, of
/// `P_t(x, B(z, ε))` on the grid `initials × times`.
pub fn estimate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = Model::build(cfg)?;
    let process = model.process();
    let xs = initials(cfg)?;
    let ts = times(cfg, &[1.0, 10.0, 100.0]);
    let z = StatePoint::new(cfg.z)?;
    let mut functionals = vec![Functional::Test(test_function(&cfg.f)?)];
    for &eps in cfg.eps.as_deref().unwrap_or(&[]) {
        functionals.push(Functional::Hit(feller::Ball::new(z, eps)?));
    }
    let plan = SamplingPlan::grid(&xs, &ts, functionals)?;
    let mut table = base_table(cfg, "estimate/1", "estimate".into(), ESTIMATE_COLUMNS);
    table.report.push(("mode".into(), "monte-carlo".into()));
    let mut failed = false;
    let mut series = Vec::new();
    for row in run_batch(process, &plan, &cfg.mc())? {
        let functional = &plan.functionals()[row.functional];
        let exact = process
            .exact_law(row.x, row.t)
            .and_then(Result::ok)
            .map_or(f64::NAN, |law| functional.expect(&law));
        let label = functional.label();
        match row.estimate {
            Ok(e) => {
                push_point(&mut series, format!("{label} x={}", row.x), (row.t, e.mean));
                table.rows.push(vec![
                    label.into(),
                    row.x.value().into(),
                    row.t.into(),
                    e.mean.into(),
                    e.half_width.into(),
                    Value::Count(e.n_samples as u64),
                    exact.into(),
                    "".into(),
                ]);
            }
            Err(err) => {
                failed = true;
                table.rows.push(vec![
                    label.into(),
                    row.x.value().into(),
                    row.t.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    Value::Count(0),
                    exact.into(),
                    err.to_string().into(),
                ]);
            }
        }
    }
    Ok(Outcome {
        table,
        chart: Chart {
            title: format!("{} estimates", process.name()),
            x_label: "t",
            y_label: "estimate",
            series,
        },
        failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnostic {
    Ec,
    Eprop,
    LowerBound,
    Stability,
    Assumptions,
    C2,
}

impl Diagnostic {
    pub fn name(self) -> &'static str {
        match self {
            Diagnostic::Ec => "ec",
            Diagnostic::Eprop => "eprop",
            Diagnostic::LowerBound => "lowerbound",
            Diagnostic::Stability => "stability",
            Diagnostic::Assumptions => "assumptions",
            Diagnostic::C2 => "c2",
        }
    }
}

fn auto_pairs(model: ModelName) -> Vec<(f64, f64)> {
    let levels: Vec<u32> = match model {
        ModelName::Ctmc => (2..=50).collect(),
        ModelName::Flip | ModelName::Halving => vec![5, 10, 20],
    };
    levels
        .into_iter()
        .map(|n| (CtmcState::Low(n).embed().value(), f64::from(n)))
        .collect()
}

fn window(cfg: &ExperimentConfig) -> Result<TimeWindow> {
    let given = cfg.times.as_deref();
    let lo = given.and_then(|g| g.iter().copied().reduce(f64::min));
    let hi = given.and_then(|g| g.iter().copied().reduce(f64::max));
    let start = cfg.window_start.or(lo).unwrap_or(50.0);
    let end = cfg.window_end.or(hi).unwrap_or(100.0);
    Ok(match given {
        Some(grid) => TimeWindow::new(start, end, grid.to_vec())?,
        None => TimeWindow::linear(start, end, 6)?,
    })
}

pub fn diagnose(kind: Diagnostic, cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = Model::build(cfg)?;
    let process = model.process();
    let z = StatePoint::new(cfg.z)?;
    let mc = cfg.mc();
    let report = match kind {
        Diagnostic::Ec => ec(cfg, process, z)?,
        Diagnostic::Eprop => {
            let pairs = match &cfg.pairs {
                Pairs::Auto => auto_pairs(cfg.model),
                Pairs::List(p) => p.clone(),
            };
            let pairs = pairs
                .into_iter()
                .map(|(x, t)| Ok((StatePoint::new(x)?, t)))
                .collect::<Result<Vec<_>>>()?;
            diagnostics::eproperty_witness(process, &test_function(&cfg.f)?, z, &pairs, &mc)?
        }
        Diagnostic::LowerBound => {
            let eps = single_eps(cfg)?;
            let ts = times(cfg, &[100.0, 150.0, 200.0]);
            diagnostics::lower_bound_scan(process, z, eps, &initials(cfg)?, &ts, &mc)?
        }
        Diagnostic::Stability => {
            let ts = times(cfg, &[10.0, 100.0, 200.0]);
            diagnostics::stability_report(process, &initials(cfg)?, &ts, &EmpiricalMeasure::dirac(z), &mc)?
        }
        Diagnostic::Assumptions => {
            let (ifs, assume) = match &model {
                Model::Ifs(m, Some(a)) => (m, a),
                _ => bail!("model {} has no declared assumption constants", cfg.model),
            };
            let x_grid = match &cfg.initials {
                Some(v) => points(v)?,
                None => points(&(1..=1000).map(|k| f64::from(k) / 100.0).collect::<Vec<_>>())?,
            };
            let b5_grid = points(&(1..=32).map(|k| assume.eta * f64::from(k) / 32.0).collect::<Vec<_>>())?;
            let moduli = [Modulus::identity(), Modulus::two_one_minus_exp()];
            diagnostics::assumption_report(ifs, assume, &moduli, &x_grid, &b5_grid, cfg.n_trunc)
        }
        Diagnostic::C2 => {
            let eps = cfg.eps.clone().unwrap_or_else(|| vec![0.1]);
            diagnostics::check_c2(process, z, &eps, &initials(cfg)?, cfg.t_search, &mc)?
        }
    };
    Ok(report_outcome(kind, cfg, report))
}

fn ec(cfg: &ExperimentConfig, process: &dyn MarkovProcess, z: StatePoint) -> Result<DiagnosticReport> {
    let f = test_function(&cfg.f)?;
    Ok(diagnostics::ec_profile(process, &f, z, &initials(cfg)?, &window(cfg)?, &cfg.mc())?)
}

fn single_eps(cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.eps.as_deref() {
        None => Ok(0.1),
        Some([eps]) => Ok(*eps),
        Some(_) => Err(anyhow!("lowerbound takes exactly one eps")),
    }
}

fn report_outcome(kind: Diagnostic, cfg: &ExperimentConfig, report: DiagnosticReport) -> Outcome {
    let mut table = base_table(cfg, "diagnose/1", format!("diagnose {}", kind.name()), DIAGNOSE_COLUMNS);
    table.report = report.metadata.clone();
    let by_time = matches!(kind, Diagnostic::Eprop | Diagnostic::Stability);
    let mut series = Vec::new();
    for row in &report.rows {
        table.rows.push(vec![
            row.label.as_str().into(),
            row.x.into(),
            row.t.into(),
            row.value.into(),
            row.half_width.into(),
            row.error.clone().unwrap_or_default().into(),
        ]);
        if by_time {
            push_point(&mut series, format!("{} x={}", row.label, row.x), (row.t, row.value));
        } else {
            push_point(&mut series, row.label.clone(), (row.x, row.value));
        }
    }
    Outcome {
        table,
        chart: Chart {
            title: format!("{} diagnostic, {}", kind.name(), report.metadata_value("model").unwrap_or("")),
            x_label: if by_time { "t" } else { "x" },
            y_label: "value",
            series,
        },
        failed: report.has_errors(),
    }
}

/// Reads the config file named by `path`, if any.
pub fn read_config(path: Option<&std::path::Path>) -> Result<crate::config::Settings> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            crate::config::Settings::parse(&text).with_context(|| format!("in {}", p.display()))
        }
        None => Ok(crate::config::Settings::default()),
    }
}
