//! Points of the half-line state space, bounded Lipschitz test functions,
//! finitely supported probability measures and the bounded-Lipschitz
//! (Fortet-Mourier) distance between them.
//!
//! The metric is always `ρ(x, y) = |x - y|` on `[0, ∞)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on the total mass of an [`EmpiricalMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A point of the state space `X ⊆ [0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct StatePoint(f64);

impl StatePoint {
    pub const ZERO: StatePoint = StatePoint(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            // normalise -0.0 so that equal points compare and print equal
            Ok(StatePoint(value + 0.0))
        } else {
            Err(Error::InvalidState(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn distance(self, other: StatePoint) -> f64 {
        (self.0 - other.0).abs()
    }
}

impl fmt::Display for StatePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Open ball `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    center: StatePoint,
    radius: f64,
}

impl Ball {
    pub fn new(center: StatePoint, radius: f64) -> Result<Self> {
        if radius.is_finite() && radius > 0.0 {
            Ok(Ball { center, radius })
        } else {
            Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )))
        }
    }

    pub fn center(&self) -> StatePoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn contains(&self, x: StatePoint) -> bool {
        self.center.distance(x) < self.radius
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A bounded Lipschitz function with declared `|f|_∞` and `Lip(f)`.
///
/// The declared constants are trusted by the estimators (they set the
/// Hoeffding range) and can be spot-checked with [`TestFunction::spot_check`].
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    eval: Evaluator,
    sup_bound: f64,
    lip_const: f64,
    nonnegative: bool,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("sup_bound", &self.sup_bound)
            .field("lip_const", &self.lip_const)
            .field("nonnegative", &self.nonnegative)
            .finish()
    }
}

impl TestFunction {
    pub fn new<F>(name: impl Into<String>, sup_bound: f64, lip_const: f64, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(sup_bound.is_finite() && sup_bound > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sup bound must be positive, got {sup_bound}"
            )));
        }
        if !(lip_const.is_finite() && lip_const >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant must be nonnegative, got {lip_const}"
            )));
        }
        Ok(TestFunction {
            name: name.into(),
            eval: Arc::new(eval),
            sup_bound,
            lip_const,
            nonnegative: false,
        })
    }

    /// Declares that the function takes values in `[0, sup_bound]`, which
    /// halves the range used for confidence intervals.
    pub fn nonnegative(mut self) -> Self {
        self.nonnegative = true;
        self
    }

    /// `f(x) = x ∧ 1`.
    pub fn min_one() -> Self {
        TestFunction::new("xmin1", 1.0, 1.0, |x| x.min(1.0))
            .expect("constants are valid")
            .nonnegative()
    }

    pub fn constant(c: f64) -> Result<Self> {
        let f = TestFunction::new(format!("const({c})"), c.abs(), 0.0, move |_| c)?;
        Ok(if c >= 0.0 { f.nonnegative() } else { f })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn lip_const(&self) -> f64 {
        self.lip_const
    }

    /// Width of an interval known to contain every value of `f`.
    pub fn range_width(&self) -> f64 {
        if self.nonnegative {
            self.sup_bound
        } else {
            2.0 * self.sup_bound
        }
    }

    #[inline]
    pub fn eval(&self, x: StatePoint) -> f64 {
        (self.eval)(x.value())
    }

    /// Checks the declared bounds on the given pairs of points and returns
    /// the first pair that violates them (relative slack `1e-12`).
    pub fn spot_check<I>(&self, pairs: I) -> Option<(StatePoint, StatePoint)>
    where
        I: IntoIterator<Item = (StatePoint, StatePoint)>,
    {
        let slack = 1e-12;
        pairs.into_iter().find(|&(x, y)| {
            let (fx, fy) = (self.eval(x), self.eval(y));
            let bound = self.sup_bound * (1.0 + slack);
            let out_of_range = if self.nonnegative {
                fx < -slack || fy < -slack || fx > bound || fy > bound
            } else {
                fx.abs() > bound || fy.abs() > bound
            };
            let steep = (fx - fy).abs() > self.lip_const * x.distance(y) + slack;
            out_of_range || steep
        })
    }
}

/// A probability measure with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    support: Vec<StatePoint>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Builds a measure from a strictly ascending support and matching weights.
    pub fn new(support: Vec<StatePoint>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure(
                "support must be strictly ascending".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(EmpiricalMeasure { support, weights })
    }

    pub fn dirac(x: StatePoint) -> Self {
        EmpiricalMeasure {
            support: vec![x],
            weights: vec![1.0],
        }
    }

    /// Builds a measure from unsorted atoms, merging repeated points.
    pub fn from_atoms<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (StatePoint, f64)>,
    {
        let mut atoms: Vec<(StatePoint, f64)> = atoms.into_iter().collect();
        atoms.sort_by(|a, b| a.0.value().total_cmp(&b.0.value()));
        let mut support: Vec<StatePoint> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match support.last() {
                Some(last) if *last == x => *weights.last_mut().unwrap() += w,
                _ => {
                    support.push(x);
                    weights.push(w);
                }
            }
        }
        EmpiricalMeasure::new(support, weights)
    }

    /// The empirical law of a sample: each observation carries mass `1/n`.
    pub fn from_samples(samples: &[StatePoint]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidMeasure("no samples".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.value().total_cmp(&b.value()));
        let n = sorted.len() as f64;
        let mut support = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in sorted {
            match support.last() {
                Some(last) if *last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    support.push(x);
                    counts.push(1);
                }
            }
        }
        let weights = counts.into_iter().map(|c| c as f64 / n).collect();
        EmpiricalMeasure::new(support, weights)
    }

    /// `a·mu + (1 - a)·nu` for `a ∈ [0, 1]`.
    pub fn mixture(a: f64, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidArgument(format!(
                "mixture weight {a} outside [0, 1]"
            )));
        }
        let atoms = mu
            .atoms()
            .map(|(x, w)| (x, a * w))
            .chain(nu.atoms().map(|(x, w)| (x, (1.0 - a) * w)));
        EmpiricalMeasure::from_atoms(atoms)
    }

    pub fn support(&self) -> &[StatePoint] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (StatePoint, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mass_of(&self, ball: &Ball) -> f64 {
        self.atoms()
            .filter(|(x, _)| ball.contains(*x))
            .map(|(_, w)| w)
            .sum()
    }
}

/// `⟨f, μ⟩ = Σ_k μ_k f(x_k)`.
pub fn pair(f: &TestFunction, mu: &EmpiricalMeasure) -> f64 {
    mu.atoms().map(|(x, w)| w * f.eval(x)).sum()
}

/// Exact bounded-Lipschitz distance between two finitely supported measures.
///
/// Maximises `Σ f(s_i)(μ_i - ν_i)` over the merged support subject to
/// `|f(s_i)| ≤ 1` and `|f(s_{i+1}) - f(s_i)| ≤ s_{i+1} - s_i`. On a line the
/// adjacent constraints imply all the pairwise ones, and any feasible vector
/// extends to a function with `|f|_∞ ≤ 1`, `Lip(f) ≤ 1` by interpolation.
///
/// The maximisation runs a dynamic program over the value `v = f(s_k)`:
/// `V_k(v)` is the best partial objective given `f(s_k) = v`. Each `V_k` is
/// concave piecewise linear on `[-1, 1]` and is stored by its breakpoints.
pub fn bl_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let (points, diffs) = merged_difference(mu, nu);

    let mut value = Concave::linear(diffs[0]);
    for k in 1..points.len() {
        let gap = points[k].value() - points[k - 1].value();
        value = value.window_max(gap);
        value.add_linear(diffs[k]);
    }
    value.max().clamp(0.0, 2.0)
}

fn merged_difference(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> (Vec<StatePoint>, Vec<f64>) {
    let (a, b) = (mu.support(), nu.support());
    let (wa, wb) = (mu.weights(), nu.weights());
    let mut points = Vec::with_capacity(a.len() + b.len());
    let mut diffs = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i] <= b[j]);
        let take_b = i == a.len() || (j < b.len() && b[j] <= a[i]);
        let mut d = 0.0;
        let x = if take_a { a[i] } else { b[j] };
        if take_a {
            d += wa[i];
            i += 1;
        }
        if take_b {
            d -= wb[j];
            j += 1;
        }
        points.push(x);
        diffs.push(d);
    }
    (points, diffs)
}

/// Concave piecewise-linear function on `[-1, 1]`, given by breakpoints
/// with ascending abscissae; the first is at `-1` and the last at `1`.
#[derive(Debug, Clone)]
struct Concave {
    pts: Vec<(f64, f64)>,
}

impl Concave {
    fn linear(slope: f64) -> Self {
        Concave {
            pts: vec![(-1.0, -slope), (1.0, slope)],
        }
    }

    fn max(&self) -> f64 {
        self.pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    fn eval(&self, v: f64) -> f64 {
        let idx = self.pts.partition_point(|p| p.0 < v);
        if idx == 0 {
            return self.pts[0].1;
        }
        if idx == self.pts.len() {
            return self.pts[idx - 1].1;
        }
        let (x0, y0) = self.pts[idx - 1];
        let (x1, y1) = self.pts[idx];
        if x1 == x0 {
            return y1;
        }
        y0 + (y1 - y0) * (v - x0) / (x1 - x0)
    }

    fn add_linear(&mut self, slope: f64) {
        for p in &mut self.pts {
            p.1 += slope * p.0;
        }
    }

    /// `W(v) = max { V(u) : |u - v| ≤ gap, u ∈ [-1, 1] }`.
    fn window_max(&self, gap: f64) -> Concave {
        let top = self.max();
        let first = self.pts.iter().position(|p| p.1 == top).unwrap();
        let last = self.pts.iter().rposition(|p| p.1 == top).unwrap();
        let (lo, hi) = (self.pts[first].0, self.pts[last].0);

        let at = |v: f64| -> f64 {
            if v + gap <= lo {
                self.eval(v + gap)
            } else if v - gap >= hi {
                self.eval(v - gap)
            } else {
                top
            }
        };

        let mut pts = Vec::with_capacity(self.pts.len() + 2);
        pts.push((-1.0, at(-1.0)));
        let rising = self.pts[..=first].iter().map(|&(x, y)| (x - gap, y));
        let falling = self.pts[last..].iter().map(|&(x, y)| (x + gap, y));
        for (x, y) in rising.chain(falling) {
            if x > -1.0 && x < 1.0 {
                pts.push((x, y));
            }
        }
        pts.push((1.0, at(1.0)));
        pts.dedup_by(|b, a| b.0 <= a.0);
        Concave { pts }
    }
}

/// Closed interval `[lo, hi] ∩ [0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Rejects intervals that are empty once intersected with the state space.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo.max(0.0) {
            return Err(Error::InvalidArgument(format!(
                "empty interval [{lo}, {hi}] in [0, inf)"
            )));
        }
        Ok(Interval { lo: lo.max(0.0), hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn distance(&self, y: f64) -> f64 {
        (self.lo - y).max(y - self.hi).max(0.0)
    }
}

impl From<Ball> for Interval {
    fn from(ball: Ball) -> Self {
        let (c, r) = (ball.center().value(), ball.radius());
        Interval {
            lo: (c - r).max(0.0),
            hi: c + r,
        }
    }
}

/// Urysohn-type bump: `1` on `K`, `0` off the open `eps/4`-enlargement of `K`,
/// with `Lip ≤ 4/eps`.
///
/// `f(y) = ρ(y, Cᶜ) / (ρ(y, Cᶜ) + ρ(y, K))` where `C = K^{eps/4}` and the
/// complement is taken inside `[0, ∞)`.
pub fn bump_function(k: impl Into<Interval>, eps: f64) -> Result<TestFunction> {
    let k = k.into();
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let collar = eps / 4.0;
    let (outer_lo, outer_hi) = (k.lo - collar, k.hi + collar);
    let name = format!("bump([{}, {}], {eps})", k.lo, k.hi);
    TestFunction::new(name, 1.0, 4.0 / eps, move |y| {
        // the left piece of the complement is empty when the collar reaches 0
        let to_left = if outer_lo >= 0.0 {
            (y - outer_lo).max(0.0)
        } else {
            f64::INFINITY
        };
        let to_complement = to_left.min((outer_hi - y).max(0.0));
        let to_k = k.distance(y);
        if to_k == 0.0 || to_complement.is_infinite() {
            1.0
        } else {
            to_complement / (to_complement + to_k)
        }
    })
    .map(TestFunction::nonnegative)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64) -> StatePoint {
        StatePoint::new(x).unwrap()
    }

    #[test]
    fn state_point_rejects_negative_and_nan() {
        assert!(StatePoint::new(-1e-300).is_err());
        assert!(StatePoint::new(f64::NAN).is_err());
        assert!(StatePoint::new(f64::INFINITY).is_err());
        assert_eq!(StatePoint::new(-0.0).unwrap().value().to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn pair_examples() {
        let f = TestFunction::min_one();
        assert_eq!(pair(&f, &EmpiricalMeasure::dirac(StatePoint::ZERO)), 0.0);

        let mu = EmpiricalMeasure::new(vec![pt(0.5), pt(3.0)], vec![0.5, 0.5]).unwrap();
        assert!((pair(&f, &mu) - 0.75).abs() < 1e-15);

        let one = TestFunction::constant(1.0).unwrap();
        assert!((pair(&one, &mu) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bl_distance_point_masses() {
        let d = |x: f64, y: f64| {
            bl_distance(
                &EmpiricalMeasure::dirac(pt(x)),
                &EmpiricalMeasure::dirac(pt(y)),
            )
        };
        assert_eq!(d(0.7, 0.7), 0.0);
        assert!((d(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((d(0.0, 5.0) - 2.0).abs() < 1e-15);
        assert!((d(5.0, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn measure_validation() {
        assert!(EmpiricalMeasure::new(vec![], vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![pt(1.0), pt(0.0)], vec![0.5, 0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![pt(0.0), pt(0.0)], vec![0.5, 0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![pt(0.0), pt(1.0)], vec![0.5, 0.6]).is_err());
        assert!(EmpiricalMeasure::new(vec![pt(0.0), pt(1.0)], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn from_samples_merges_duplicates() {
        let mu = EmpiricalMeasure::from_samples(&[pt(2.0), pt(0.0), pt(2.0), pt(1.0)]).unwrap();
        assert_eq!(mu.support(), &[pt(0.0), pt(1.0), pt(2.0)]);
        assert_eq!(mu.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn ball_is_open() {
        let b = Ball::new(pt(1.0), 0.5).unwrap();
        assert!(b.contains(pt(1.25)));
        assert!(!b.contains(pt(1.5)));
        assert!(Ball::new(pt(1.0), 0.0).is_err());
    }

    #[test]
    fn bump_function_examples() {
        let f = bump_function(Interval::new(1.0, 2.0).unwrap(), 1.0).unwrap();
        assert_eq!(f.eval(pt(1.5)), 1.0);
        assert_eq!(f.eval(pt(3.0)), 0.0);
        assert!((f.eval(pt(2.125)) - 0.5).abs() < 1e-15);
        assert!((f.eval(pt(0.875)) - 0.5).abs() < 1e-15);
        assert_eq!(f.lip_const(), 4.0);
        assert_eq!(f.sup_bound(), 1.0);
    }

    #[test]
    fn bump_function_rejects_empty_k_and_bad_eps() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(-3.0, -1.0).is_err());
        let k = Interval::new(1.0, 2.0).unwrap();
        assert!(bump_function(k, 0.0).is_err());
        assert!(bump_function(k, f64::NAN).is_err());
    }

    #[test]
    fn bump_function_near_origin() {
        // collar crosses 0: no left complement, so f = 1 on [0, lo]
        let f = bump_function(Ball::new(pt(0.0), 0.1).unwrap(), 1.0).unwrap();
        assert_eq!(f.eval(pt(0.0)), 1.0);
        assert_eq!(f.eval(pt(0.35)), 0.0);
        assert!((f.eval(pt(0.225)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spot_check_flags_lying_metadata() {
        let liar = TestFunction::new("2x", 1.0, 1.0, |x| (2.0 * x).min(1.0)).unwrap();
        assert!(liar.spot_check([(pt(0.0), pt(0.25))]).is_some());
        assert!(TestFunction::min_one()
            .spot_check([(pt(0.0), pt(0.25)), (pt(3.0), pt(0.9))])
            .is_none());
    }
}
