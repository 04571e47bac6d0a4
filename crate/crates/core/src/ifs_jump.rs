//! Iterated function systems with place-dependent probabilities, driven by
//! a deterministic flow between exponential jump times.
//!
//! Starting from `Φ_0 = x`, with i.i.d. `Δτ_n ~ Exp(λ)`:
//!
//! 1. `ξ_n = S(Δτ_n)(Φ_{n-1})`
//! 2. draw `i_n` with probabilities `p(ξ_n)`
//! 3. `Φ_n = w_{i_n}(ξ_n)`
//!
//! and between jumps `Φ(t) = S(t - τ_n)(Φ_n)` for `τ_n ≤ t < τ_{n+1}`.
//!
//! Map indices are zero-based in code and output: index `0` is `w_1`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{EmpiricalMeasure, StatePoint};
use crate::montecarlo::MarkovProcess;
use crate::stream::{self, Stream};

/// Tolerance on `Σ p_i(x) = 1`.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Default cap on the number of index words `j_n` may enumerate.
pub const DEFAULT_WORD_BUDGET: u64 = 1_000_000;

pub type Map = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ProbField = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form semiflow `S(t)` on `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    Identity,
    /// `S(t)(x) = x e^{rate·t}`.
    Exponential { rate: f64 },
}

impl Flow {
    #[inline]
    pub fn apply(&self, t: f64, x: StatePoint) -> StatePoint {
        match *self {
            Flow::Identity => x,
            Flow::Exponential { rate } => StatePoint::new(x.value() * (rate * t).exp())
                .unwrap_or_else(|_| StatePoint::new(f64::MAX).unwrap()),
        }
    }

    /// Smallest `α ≥ 0` with `ρ(S(t)x, S(t)y) ≤ e^{αt} ρ(x, y)`.
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            Flow::Identity => 0.0,
            Flow::Exponential { rate } => rate.max(0.0),
        }
    }
}

/// A probability vector `(p_1, …, p_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(weights: Vec<f64>) -> std::result::Result<Self, String> {
        if weights.is_empty() {
            return Err("no weights".into());
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(format!("invalid weight {w}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(format!("weights sum to {total}"));
        }
        Ok(ProbVector(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    /// Inverse-CDF selection for `u ∈ [0, 1)`. Zero-weight indices are
    /// never returned.
    pub fn select(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in self.0.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        // rounding left u just above the accumulated total
        last_positive
    }
}

/// Maps `w_i`, probability field `p(x)`, flow `S(t)` and jump rate `λ`.
#[derive(Clone)]
pub struct IfsModel {
    name: String,
    maps: Vec<Map>,
    prob_field: ProbField,
    flow: Flow,
    rate: f64,
}

impl fmt::Debug for IfsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IfsModel")
            .field("name", &self.name)
            .field("maps", &self.maps.len())
            .field("flow", &self.flow)
            .field("rate", &self.rate)
            .finish()
    }
}

impl IfsModel {
    pub fn new(
        name: impl Into<String>,
        maps: Vec<Map>,
        prob_field: ProbField,
        flow: Flow,
        rate: f64,
    ) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one map".into()));
        }
        check_rate(rate)?;
        if let Flow::Exponential { rate } = flow {
            if !rate.is_finite() {
                return Err(Error::InvalidArgument(format!("flow rate {rate} is not finite")));
            }
        }
        Ok(IfsModel {
            name: name.into(),
            maps,
            prob_field,
            flow,
            rate,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn flow(&self) -> Flow {
        self.flow
    }

    pub fn apply_map(&self, index: usize, x: StatePoint) -> Result<StatePoint> {
        let map = self.maps.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("map index {index} out of range"))
        })?;
        let value = map(x.value());
        StatePoint::new(value).map_err(|_| Error::NonFiniteState { index, value })
    }

    pub fn probabilities(&self, x: StatePoint) -> Result<ProbVector> {
        let weights = (self.prob_field)(x.value());
        if weights.len() != self.maps.len() {
            return Err(Error::InvalidProbVector {
                x: x.value(),
                reason: format!("{} weights for {} maps", weights.len(), self.maps.len()),
            });
        }
        ProbVector::new(weights).map_err(|reason| Error::InvalidProbVector {
            x: x.value(),
            reason,
        })
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("jump rate must be positive, got {rate}")))
    }
}

/// The three-map system `w_1 = 0`, `w_2 = id`, `w_3 = x^{-1} 1_{x≠0}` with
/// piecewise probabilities; `0` is absorbing and orbits from `x ≠ 0` stay in
/// `{0, x, 1/x}`.
pub fn example_flip(lambda: f64) -> Result<IfsModel> {
    let maps: Vec<Map> = vec![
        Arc::new(|_| 0.0),
        Arc::new(|x| x),
        Arc::new(|x| if x != 0.0 { 1.0 / x } else { 0.0 }),
    ];
    let probs: ProbField = Arc::new(flip_probabilities);
    IfsModel::new("flip", maps, probs, Flow::Identity, lambda)
}

fn flip_probabilities(x: f64) -> Vec<f64> {
    if x < 2.0 / 3.0 {
        vec![x / 2.0, 1.0 - x, x / 2.0]
    } else if x <= 1.5 {
        vec![1.0 / 3.0; 3]
    } else {
        let h = 1.0 / (2.0 * x);
        vec![h, 1.0 - 1.0 / x, h]
    }
}

/// The two-map system `w_1 = x/2`, `w_2 = id` with `p_1(x) = e^{-x}`,
/// together with the constants that certify its stability.
pub fn example_halving(lambda: f64) -> Result<(IfsModel, AssumptionSet)> {
    let maps: Vec<Map> = vec![Arc::new(|x| x / 2.0), Arc::new(|x| x)];
    let probs: ProbField = Arc::new(|x| {
        let p = (-x).exp();
        vec![p, -(-x).exp_m1()]
    });
    let model = IfsModel::new("halving", maps, probs, Flow::Identity, lambda)?;
    let assume = AssumptionSet {
        anchor: StatePoint::ZERO,
        r: Arc::new(|x| 1.0 - (-x).exp() / 2.0),
        omega: Modulus::identity(),
        m: 0,
        eta: 1.0 / 8.0,
        gamma: 1.0 - (0.125f64).exp() / 4.0,
        alpha: 0.0,
        lambda,
        beta: Some(infinite_halving_product()),
    };
    Ok((model, assume))
}

/// `Π_{i≥1} (1 - 2^{-i})`, multiplied until the factors round to one.
pub fn infinite_halving_product() -> f64 {
    let mut product = 1.0;
    let mut term = 0.5f64;
    while 1.0 - term < 1.0 {
        product *= 1.0 - term;
        term /= 2.0;
    }
    product
}

/// A concave, nondecreasing modulus `ω` with `ω(0) = 0`.
#[derive(Clone)]
pub struct Modulus {
    name: String,
    eval: ScalarField,
    slope_at_zero: Option<f64>,
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Modulus")
            .field("name", &self.name)
            .field("slope_at_zero", &self.slope_at_zero)
            .finish()
    }
}

impl Modulus {
    /// `slope_at_zero` is `ω'(0+)` when finite; concavity then gives
    /// `ω(s) ≤ ω'(0+) s`, which is what the series tail bound needs.
    pub fn new<F>(name: impl Into<String>, slope_at_zero: Option<f64>, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let omega = Modulus {
            name: name.into(),
            eval: Arc::new(eval),
            slope_at_zero,
        };
        if omega.eval(0.0) != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "modulus {} must vanish at 0",
                omega.name
            )));
        }
        let grid: Vec<f64> = (0..=200).map(|k| f64::from(k) * 0.05).collect();
        if grid.windows(2).any(|w| omega.eval(w[1]) < omega.eval(w[0])) {
            return Err(Error::InvalidArgument(format!(
                "modulus {} is not nondecreasing",
                omega.name
            )));
        }
        Ok(omega)
    }

    /// `ω(s) = s`.
    pub fn identity() -> Self {
        Modulus::new("s", Some(1.0), |s| s).expect("valid modulus")
    }

    /// `ω(s) = 2(1 - e^{-s})`.
    pub fn two_one_minus_exp() -> Self {
        Modulus::new("2(1-exp(-s))", Some(2.0), |s| -2.0 * (-s).exp_m1()).expect("valid modulus")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn slope_at_zero(&self) -> Option<f64> {
        self.slope_at_zero
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.eval)(s)
    }
}

/// Constants of the contraction hypotheses for an [`IfsModel`].
#[derive(Clone)]
pub struct AssumptionSet {
    /// The anchor point `z`.
    pub anchor: StatePoint,
    /// Place-dependent contraction coefficient with values in `(0, 1]`.
    pub r: ScalarField,
    pub omega: Modulus,
    /// First index `M` of the B5 series.
    pub m: usize,
    pub eta: f64,
    pub gamma: f64,
    /// Growth exponent of the flow.
    pub alpha: f64,
    pub lambda: f64,
    /// Claimed uniform hitting floor, when known.
    pub beta: Option<f64>,
}

impl fmt::Debug for AssumptionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AssumptionSet")
            .field("anchor", &self.anchor)
            .field("omega", &self.omega)
            .field("m", &self.m)
            .field("eta", &self.eta)
            .field("gamma", &self.gamma)
            .field("alpha", &self.alpha)
            .field("lambda", &self.lambda)
            .field("beta", &self.beta)
            .finish()
    }
}

impl AssumptionSet {
    pub fn with_omega(mut self, omega: Modulus) -> Self {
        self.omega = omega;
        self
    }

    /// `r(x)`, rejected unless it lies in `(0, 1]`.
    pub fn contraction(&self, x: StatePoint) -> Result<f64> {
        let r = (self.r)(x.value());
        if r > 0.0 && r <= 1.0 {
            Ok(r)
        } else {
            Err(Error::InvalidArgument(format!(
                "contraction coefficient r({x}) = {r} outside (0, 1]"
            )))
        }
    }
}

/// One jump `(τ_k, ξ_k, i_k, Φ_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub tau: f64,
    pub xi: StatePoint,
    pub index: usize,
    pub phi: StatePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: StatePoint,
    pub records: Vec<JumpRecord>,
    pub horizon: f64,
}

impl Trajectory {
    /// Post-jump state of the last jump, or the initial point.
    pub fn last_jump_state(&self) -> StatePoint {
        self.records.last().map_or(self.initial, |r| r.phi)
    }

    /// Re-derives every record from its predecessor and reports the first
    /// inconsistency.
    pub fn check(&self, model: &IfsModel) -> Result<()> {
        let mut prev_tau = 0.0;
        let mut prev_phi = self.initial;
        for (k, rec) in self.records.iter().enumerate() {
            let bad = |what: &str| {
                Err(Error::InvalidArgument(format!("record {}: {what}", k + 1)))
            };
            if !(rec.tau > prev_tau || (k == 0 && rec.tau >= 0.0)) || rec.tau > self.horizon {
                return bad("jump times not increasing within the horizon");
            }
            // τ_k - τ_{k-1} may differ from the drawn Δτ_k in the last ulp
            let expected = model.flow().apply(rec.tau - prev_tau, prev_phi).value();
            if (expected - rec.xi.value()).abs() > 1e-12 * expected.max(1.0) {
                return bad("pre-jump point does not follow the flow");
            }
            if model.apply_map(rec.index, rec.xi)? != rec.phi {
                return bad("post-jump point is not the image of the chosen map");
            }
            prev_tau = rec.tau;
            prev_phi = rec.phi;
        }
        Ok(())
    }
}

/// Stepper shared by trajectory recording and terminal-state sampling, so
/// both consume identical draws from the stream.
struct JumpChain<'a> {
    model: &'a IfsModel,
    clock: f64,
    state: StatePoint,
}

impl<'a> JumpChain<'a> {
    fn new(model: &'a IfsModel, x: StatePoint) -> Self {
        JumpChain {
            model,
            clock: 0.0,
            state: x,
        }
    }

    /// Performs the next jump if it happens no later than `horizon`.
    fn advance(&mut self, horizon: f64, rng: &mut Stream) -> Result<Option<JumpRecord>> {
        let dt = stream::exponential(rng, self.model.rate);
        let tau = self.clock + dt;
        if tau > horizon {
            return Ok(None);
        }
        let xi = self.model.flow.apply(dt, self.state);
        let probs = self.model.probabilities(xi)?;
        let index = probs.select(stream::uniform(rng));
        let phi = self.model.apply_map(index, xi)?;
        self.clock = tau;
        self.state = phi;
        Ok(Some(JumpRecord { tau, xi, index, phi }))
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_nan() || horizon < 0.0 {
        Err(Error::NegativeTime(horizon))
    } else if horizon.is_infinite() {
        Err(Error::InvalidArgument("horizon must be finite".into()))
    } else {
        Ok(())
    }
}

/// Records every jump with `τ_k ≤ horizon`.
pub fn sample_jump_chain(
    model: &IfsModel,
    x: StatePoint,
    horizon: f64,
    rng: &mut Stream,
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    let mut chain = JumpChain::new(model, x);
    let mut records = Vec::new();
    while let Some(rec) = chain.advance(horizon, rng)? {
        records.push(rec);
    }
    Ok(Trajectory {
        initial: x,
        records,
        horizon,
    })
}

/// `Φ(t) = S(t - τ_n)(Φ_n)` for the last jump with `τ_n ≤ t`.
pub fn state_at(traj: &Trajectory, model: &IfsModel, t: f64) -> Result<StatePoint> {
    if !(0.0..=traj.horizon).contains(&t) {
        return Err(Error::OutsideHorizon {
            t,
            horizon: traj.horizon,
        });
    }
    let n = traj.records.partition_point(|r| r.tau <= t);
    let (tau, phi) = match n {
        0 => (0.0, traj.initial),
        _ => (traj.records[n - 1].tau, traj.records[n - 1].phi),
    };
    Ok(model.flow.apply(t - tau, phi))
}

/// `Φ^x(t)` without storing the path; equals `state_at(sample_jump_chain(..))`
/// for the same stream.
pub fn position_at(model: &IfsModel, x: StatePoint, t: f64, rng: &mut Stream) -> Result<StatePoint> {
    check_horizon(t)?;
    let mut chain = JumpChain::new(model, x);
    while chain.advance(t, rng)?.is_some() {}
    Ok(model.flow.apply(t - chain.clock, chain.state))
}

impl MarkovProcess for IfsModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn rate(&self) -> Option<f64> {
        Some(self.rate)
    }

    fn sample_at(&self, x: StatePoint, t: f64, rng: &mut Stream) -> Result<StatePoint> {
        position_at(self, x, t, rng)
    }

    fn exact_law(&self, _x: StatePoint, _t: f64) -> Option<Result<EmpiricalMeasure>> {
        None
    }
}

/// `J_n(x) = max_{i ∈ I^n} Π_{j=0}^{n-1} r(w_{i[j]}(x))` with the default
/// work budget.
pub fn j_n(model: &IfsModel, assume: &AssumptionSet, x: StatePoint, n: usize) -> Result<f64> {
    j_n_with_budget(model, assume, x, n, DEFAULT_WORD_BUDGET)
}

/// Exact `J_n(x)` by depth-first enumeration of index words, where
/// `w_{i[j]} = w_{i_1} ∘ … ∘ w_{i_j}` (the newest index acts first).
///
/// Only the first `n - 1` letters influence the product. Since `r ≤ 1`, a
/// partial product can only shrink, so branches whose partial product does
/// not beat the incumbent are cut. Children are visited in decreasing order
/// of their next factor so the first complete word is the greedy one.
pub fn j_n_with_budget(
    model: &IfsModel,
    assume: &AssumptionSet,
    x: StatePoint,
    n: usize,
    budget: u64,
) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let maps = model.n_maps();
    let words = u32::try_from(n)
        .ok()
        .and_then(|e| (maps as u64).checked_pow(e));
    if words.is_none_or(|w| w > budget) {
        return Err(Error::EnumerationBudget {
            maps,
            depth: n,
            budget,
        });
    }

    let mut search = WordSearch {
        model,
        assume,
        x,
        depth: n,
        word: Vec::with_capacity(n),
        best: 0.0,
    };
    let first = assume.contraction(x)?;
    search.descend(first)?;
    Ok(search.best)
}

struct WordSearch<'a> {
    model: &'a IfsModel,
    assume: &'a AssumptionSet,
    x: StatePoint,
    depth: usize,
    word: Vec<usize>,
    best: f64,
}

impl WordSearch<'_> {
    /// `w_{i_1} ∘ … ∘ w_{i_j}(x)` for the current word.
    fn image(&self) -> Result<StatePoint> {
        self.word
            .iter()
            .rev()
            .try_fold(self.x, |y, &i| self.model.apply_map(i, y))
    }

    /// `partial` is the product of the first `word.len() + 1` factors.
    fn descend(&mut self, partial: f64) -> Result<()> {
        if self.word.len() + 1 == self.depth {
            self.best = self.best.max(partial);
            return Ok(());
        }
        let mut children = Vec::with_capacity(self.model.n_maps());
        for i in 0..self.model.n_maps() {
            self.word.push(i);
            let factor = self.image().and_then(|y| self.assume.contraction(y));
            self.word.pop();
            children.push((i, factor?));
        }
        children.sort_by(|a, b| b.1.total_cmp(&a.1));
        for (i, factor) in children {
            let next = partial * factor;
            if next <= self.best {
                continue;
            }
            self.word.push(i);
            self.descend(next)?;
            self.word.pop();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64) -> StatePoint {
        StatePoint::new(x).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn flip_probability_branches() {
        let m = example_flip(1.0).unwrap();
        let p = |x| m.probabilities(pt(x)).unwrap().weights().to_vec();
        assert!(close(&p(0.5), &[0.25, 0.5, 0.25], 1e-15));
        assert!(close(&p(1.0), &[1.0 / 3.0; 3], 1e-15));
        assert!(close(&p(2.0), &[0.25, 0.5, 0.25], 1e-15));
        assert_eq!(p(0.0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn flip_probabilities_are_continuous_at_the_seams() {
        let m = example_flip(1.0).unwrap();
        for seam in [2.0 / 3.0, 1.5] {
            let lo = m.probabilities(pt(seam - 1e-9)).unwrap();
            let hi = m.probabilities(pt(seam + 1e-9)).unwrap();
            assert!(close(lo.weights(), hi.weights(), 1e-8), "seam {seam}");
        }
    }

    #[test]
    fn flip_third_map_at_zero() {
        let m = example_flip(1.0).unwrap();
        assert_eq!(m.apply_map(2, pt(0.0)).unwrap(), pt(0.0));
        assert_eq!(m.apply_map(2, pt(4.0)).unwrap(), pt(0.25));
    }

    #[test]
    fn halving_constants() {
        let (m, a) = example_halving(1.0).unwrap();
        let p = m.probabilities(pt(1.0)).unwrap();
        assert!(close(p.weights(), &[(-1.0f64).exp(), 1.0 - (-1.0f64).exp()], 1e-15));
        assert!((p.weights()[0] - 0.367879).abs() < 1e-6);
        assert_eq!(m.probabilities(pt(0.0)).unwrap().weights(), &[1.0, 0.0]);
        assert!((a.gamma - (1.0 - 0.125f64.exp() / 4.0)).abs() < 1e-15);
        assert!((a.gamma - 0.716713).abs() < 1e-6);
        assert_eq!(a.anchor, StatePoint::ZERO);
        assert_eq!((a.m, a.eta, a.alpha), (0, 0.125, 0.0));
        assert!((a.beta.unwrap() - 0.288788).abs() < 1e-6);
    }

    #[test]
    fn prob_vector_selection_skips_zero_weights() {
        let p = ProbVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        for u in [0.0, 0.5, 0.999_999_999] {
            assert_eq!(p.select(u), 1);
        }
        let q = ProbVector::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(q.select(0.1), 0);
        assert_eq!(q.select(0.3), 1);
        assert_eq!(q.select(0.8), 2);
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn zero_horizon_has_no_jumps() {
        let m = example_flip(1.0).unwrap();
        let mut rng = stream::stream(1, 0, 0);
        let traj = sample_jump_chain(&m, pt(0.5), 0.0, &mut rng).unwrap();
        assert!(traj.records.is_empty());
        assert_eq!(state_at(&traj, &m, 0.0).unwrap(), pt(0.5));
        assert!(sample_jump_chain(&m, pt(0.5), -1.0, &mut rng).is_err());
    }

    #[test]
    fn state_at_rejects_times_outside_horizon() {
        let m = example_flip(1.0).unwrap();
        let mut rng = stream::stream(1, 0, 0);
        let traj = sample_jump_chain(&m, pt(0.5), 3.0, &mut rng).unwrap();
        assert!(state_at(&traj, &m, 3.5).is_err());
        assert!(state_at(&traj, &m, -0.5).is_err());
    }

    #[test]
    fn state_at_applies_residual_flow() {
        let maps: Vec<Map> = vec![Arc::new(|x| x)];
        let m = IfsModel::new(
            "grow",
            maps,
            Arc::new(|_| vec![1.0]),
            Flow::Exponential { rate: 0.1 },
            1.0,
        )
        .unwrap();
        let traj = Trajectory {
            initial: pt(1.0),
            records: vec![JumpRecord { tau: 1.0, xi: pt(1.0f64 * 0.1f64.exp()), index: 0, phi: pt(2.0) }],
            horizon: 3.0,
        };
        let got = state_at(&traj, &m, 1.5).unwrap().value();
        assert!((got - 2.0 * 0.05f64.exp()).abs() < 1e-15);
        assert_eq!(state_at(&traj, &m, 0.0).unwrap(), pt(1.0));
    }

    #[test]
    fn non_finite_map_output_names_the_map() {
        let maps: Vec<Map> = vec![Arc::new(|x| x), Arc::new(|_| f64::NAN)];
        let m = IfsModel::new("bad", maps, Arc::new(|_| vec![0.0, 1.0]), Flow::Identity, 1.0)
            .unwrap();
        let mut rng = stream::stream(1, 0, 0);
        match sample_jump_chain(&m, pt(1.0), 50.0, &mut rng) {
            Err(Error::NonFiniteState { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn position_at_agrees_with_recorded_path() {
        let (m, _) = example_halving(1.0).unwrap();
        for k in 0..20 {
            let traj = sample_jump_chain(&m, pt(3.0), 25.0, &mut stream::stream(9, 0, k)).unwrap();
            traj.check(&m).unwrap();
            let direct = position_at(&m, pt(3.0), 25.0, &mut stream::stream(9, 0, k)).unwrap();
            assert_eq!(state_at(&traj, &m, 25.0).unwrap(), direct);
        }
    }

    #[test]
    fn j_n_examples() {
        let (m, a) = example_halving(1.0).unwrap();
        assert_eq!(j_n(&m, &a, pt(1.0), 0).unwrap(), 1.0);
        let r1 = 1.0 - (-1.0f64).exp() / 2.0;
        assert!((j_n(&m, &a, pt(1.0), 3).unwrap() - r1.powi(3)).abs() < 1e-15);
        assert!((j_n(&m, &a, pt(1.0), 3).unwrap() - 0.543459).abs() < 1e-6);
        let v = j_n(&m, &a, pt(0.125), 1).unwrap();
        assert!((v - 0.558752).abs() < 1e-6);
    }

    #[test]
    fn j_n_respects_budget() {
        let (m, a) = example_halving(1.0).unwrap();
        assert!(matches!(
            j_n_with_budget(&m, &a, pt(1.0), 11, 1024),
            Err(Error::EnumerationBudget { maps: 2, depth: 11, budget: 1024 })
        ));
        assert!(j_n_with_budget(&m, &a, pt(1.0), 10, 1024).is_ok());
        assert!(j_n(&m, &a, pt(1.0), 10_000).is_err());
    }

    #[test]
    fn modulus_validation() {
        assert!(Modulus::new("shifted", None, |s| s + 1.0).is_err());
        assert!(Modulus::new("decreasing", None, |s| -s).is_err());
        let w = Modulus::two_one_minus_exp();
        assert!((w.eval(1.0) - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn beta_product_value() {
        // independent check by a fixed number of factors
        let direct: f64 = (1..=80).map(|i| 1.0 - 0.5f64.powi(i)).product();
        assert!((infinite_halving_product() - direct).abs() < 1e-15);
    }
}
