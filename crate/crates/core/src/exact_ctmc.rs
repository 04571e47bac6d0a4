//! Continuous-time chain on `{0} ∪ {1/n : n ≥ 2} ∪ {n : n ≥ 2}` with
//! closed-form transition probabilities.
//!
//! From `1/n` the chain waits an exponential time of mean `n`, moves to `n`,
//! waits another independent exponential time of mean `n` and is absorbed
//! at `0`. Hence for `t ≥ 0`:
//!
//! ```text
//! p(1/n, 1/n) = p(n, n) = e^{-t/n}
//! p(1/n, n)   = (t/n) e^{-t/n}
//! p(1/n, 0)   = 1 - e^{-t/n} - (t/n) e^{-t/n}
//! p(n, 0)     = 1 - e^{-t/n}
//! p(0, 0)     = 1
//! ```
//!
//! The chain is asymptotically stable with invariant law `δ_0`, yet
//! `P_n f(1/n) - P_n f(0) = e^{-1}(1 + 1/n)` for `f = x ∧ 1`, so the
//! e-property fails at `0`.

use std::fmt;

use crate::error::{Error, Result};
use crate::measure::{EmpiricalMeasure, StatePoint, TestFunction};
use crate::montecarlo::MarkovProcess;
use crate::stream::{self, Stream};

/// A state of the chain, tagged so that `1/n` is never rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CtmcState {
    Zero,
    /// The point `1/n`.
    Low(u32),
    /// The point `n`.
    High(u32),
}

impl CtmcState {
    pub fn low(n: u32) -> Result<Self> {
        CtmcState::Low(n).validated()
    }

    pub fn high(n: u32) -> Result<Self> {
        CtmcState::High(n).validated()
    }

    fn validated(self) -> Result<Self> {
        match self.level() {
            Some(n) if n < 2 => Err(Error::InvalidArgument(format!(
                "chain level must satisfy n >= 2, got {n}"
            ))),
            _ => Ok(self),
        }
    }

    pub fn level(&self) -> Option<u32> {
        match *self {
            CtmcState::Zero => None,
            CtmcState::Low(n) | CtmcState::High(n) => Some(n),
        }
    }

    pub fn embed(&self) -> StatePoint {
        let v = match *self {
            CtmcState::Zero => 0.0,
            CtmcState::Low(n) => 1.0 / f64::from(n),
            CtmcState::High(n) => f64::from(n),
        };
        StatePoint::new(v).expect("embedding is finite and nonnegative")
    }

    /// Inverse of [`CtmcState::embed`]. Accepts `1/n` up to a few ulps.
    pub fn from_point(x: StatePoint) -> Result<Self> {
        let v = x.value();
        if v == 0.0 {
            return Ok(CtmcState::Zero);
        }
        if v >= 2.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
            return Ok(CtmcState::High(v as u32));
        }
        if v <= 0.5 {
            let n = (1.0 / v).round();
            if n <= f64::from(u32::MAX) && ((1.0 / n) - v).abs() <= 4.0 * f64::EPSILON * v {
                return Ok(CtmcState::Low(n as u32));
            }
        }
        Err(Error::NotChainState(v))
    }
}

impl fmt::Display for CtmcState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CtmcState::Zero => write!(f, "0"),
            CtmcState::Low(n) => write!(f, "1/{n}"),
            CtmcState::High(n) => write!(f, "{n}"),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

/// Nonzero entries of the row `p(i, ·)(t)`.
pub fn transition_row(i: CtmcState, t: f64) -> Result<Vec<(CtmcState, f64)>> {
    let i = i.validated()?;
    check_time(t)?;
    Ok(match i {
        CtmcState::Zero => vec![(CtmcState::Zero, 1.0)],
        CtmcState::High(n) => {
            let s = t / f64::from(n);
            vec![(i, (-s).exp()), (CtmcState::Zero, -(-s).exp_m1())]
        }
        CtmcState::Low(n) => {
            let s = t / f64::from(n);
            let stay = (-s).exp();
            let climb = s * stay;
            let absorbed = -(-s).exp_m1() - climb;
            vec![(i, stay), (CtmcState::High(n), climb), (CtmcState::Zero, absorbed)]
        }
    })
}

/// `p_{ij}(t)`; `t = 0` gives the identity kernel.
pub fn transition_prob(i: CtmcState, j: CtmcState, t: f64) -> Result<f64> {
    let j = j.validated()?;
    Ok(transition_row(i, t)?
        .into_iter()
        .find(|(target, _)| *target == j)
        .map_or(0.0, |(_, p)| p))
}

/// Law of `Φ_t` started at `i`, as a finitely supported measure.
pub fn law(i: CtmcState, t: f64) -> Result<EmpiricalMeasure> {
    let row = transition_row(i, t)?;
    EmpiricalMeasure::from_atoms(row.into_iter().map(|(j, p)| (j.embed(), p)))
}

/// `P_t f(i) = Σ_j p_{ij}(t) f(j)`.
pub fn semigroup_apply(f: &TestFunction, i: CtmcState, t: f64) -> Result<f64> {
    Ok(transition_row(i, t)?
        .into_iter()
        .map(|(j, p)| p * f.eval(j.embed()))
        .sum())
}

/// Samples the state occupied at time `t`, drawing the two holding times
/// of the path `1/n → n → 0` lazily from `rng`.
pub fn sample_path(i: CtmcState, t: f64, rng: &mut Stream) -> Result<CtmcState> {
    let i = i.validated()?;
    check_time(t)?;
    let mut state = i;
    let mut clock = 0.0;
    loop {
        let next = match state {
            CtmcState::Zero => return Ok(state),
            CtmcState::Low(n) => CtmcState::High(n),
            CtmcState::High(_) => CtmcState::Zero,
        };
        let n = f64::from(state.level().expect("nonzero state"));
        clock += stream::exponential(rng, 1.0 / n);
        if clock > t {
            return Ok(state);
        }
        state = next;
    }
}

fn kernel(n: u32, t: f64) -> Result<[[f64; 3]; 3]> {
    let order = [CtmcState::Low(n), CtmcState::High(n), CtmcState::Zero];
    let mut m = [[0.0; 3]; 3];
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            m[a][b] = transition_prob(i, j, t)?;
        }
    }
    Ok(m)
}

/// Largest entry of `|P(s + t) - P(s) P(t)|` on the closed subchain
/// `{1/n, n, 0}`.
pub fn chapman_kolmogorov_residual(n: u32, s: f64, t: f64) -> Result<f64> {
    let (ps, pt, pst) = (kernel(n, s)?, kernel(n, t)?, kernel(n, s + t)?);
    let mut worst = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            let product: f64 = (0..3).map(|k| ps[a][k] * pt[k][b]).sum();
            worst = worst.max((pst[a][b] - product).abs());
        }
    }
    Ok(worst)
}

/// The chain as a [`MarkovProcess`] on embedded points.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactCtmc;

impl MarkovProcess for ExactCtmc {
    fn name(&self) -> &str {
        "ctmc"
    }

    fn check_initial(&self, x: StatePoint) -> Result<()> {
        CtmcState::from_point(x).map(|_| ())
    }

    fn sample_at(&self, x: StatePoint, t: f64, rng: &mut Stream) -> Result<StatePoint> {
        let i = CtmcState::from_point(x)?;
        Ok(sample_path(i, t, rng)?.embed())
    }

    fn exact_law(&self, x: StatePoint, t: f64) -> Option<Result<EmpiricalMeasure>> {
        Some(CtmcState::from_point(x).and_then(|i| law(i, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn transition_table_entries() {
        let p = transition_prob(CtmcState::Low(7), CtmcState::High(7), 7.0).unwrap();
        assert!((p - 1.0 / E).abs() < 1e-15);
        assert!((p - 0.367879).abs() < 1e-6);
        for t in [0.0, 1.0, 1e6] {
            assert_eq!(transition_prob(CtmcState::Zero, CtmcState::Zero, t).unwrap(), 1.0);
        }
        assert_eq!(transition_prob(CtmcState::Low(3), CtmcState::Zero, 0.0).unwrap(), 0.0);
        assert_eq!(transition_prob(CtmcState::Low(3), CtmcState::Low(3), 0.0).unwrap(), 1.0);
        assert_eq!(transition_prob(CtmcState::Low(3), CtmcState::High(4), 2.0).unwrap(), 0.0);
        assert_eq!(transition_prob(CtmcState::High(3), CtmcState::Low(3), 2.0).unwrap(), 0.0);
        assert_eq!(transition_prob(CtmcState::Zero, CtmcState::High(3), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_negative_time_and_bad_levels() {
        assert_eq!(
            transition_prob(CtmcState::Zero, CtmcState::Zero, -1.0),
            Err(Error::NegativeTime(-1.0))
        );
        assert!(transition_prob(CtmcState::Low(1), CtmcState::Zero, 1.0).is_err());
        assert!(CtmcState::high(1).is_err());
        assert!(CtmcState::low(2).is_ok());
    }

    #[test]
    fn semigroup_examples() {
        let f = TestFunction::min_one();
        assert_eq!(semigroup_apply(&f, CtmcState::Zero, 7.0).unwrap(), 0.0);
        let v = semigroup_apply(&f, CtmcState::Low(2), 2.0).unwrap();
        assert!((v - 1.5 / E).abs() < 1e-15);
        assert!((v - 0.551819).abs() < 1e-6);
        let v = semigroup_apply(&f, CtmcState::High(5), 5.0).unwrap();
        assert!((v - 1.0 / E).abs() < 1e-15);
    }

    #[test]
    fn chapman_kolmogorov_examples() {
        assert!(chapman_kolmogorov_residual(3, 1.0, 2.0).unwrap() < 1e-12);
        assert_eq!(chapman_kolmogorov_residual(2, 0.0, 5.0).unwrap(), 0.0);
        assert!(chapman_kolmogorov_residual(10, 7.3, 0.4).unwrap() < 1e-12);
    }

    #[test]
    fn embedding_round_trip() {
        for s in [CtmcState::Zero, CtmcState::Low(2), CtmcState::Low(3), CtmcState::Low(49),
                  CtmcState::High(2), CtmcState::High(1000)] {
            assert_eq!(CtmcState::from_point(s.embed()).unwrap(), s);
        }
        for bad in [0.3, 1.0, 2.5, 0.75] {
            assert!(CtmcState::from_point(StatePoint::new(bad).unwrap()).is_err());
        }
    }

    #[test]
    fn sample_path_trivial_cases() {
        let mut rng = stream::stream(1, 0, 0);
        assert_eq!(sample_path(CtmcState::Zero, 100.0, &mut rng).unwrap(), CtmcState::Zero);
        assert_eq!(sample_path(CtmcState::High(4), 0.0, &mut rng).unwrap(), CtmcState::High(4));
        assert_eq!(sample_path(CtmcState::Low(4), 0.0, &mut rng).unwrap(), CtmcState::Low(4));
    }

    #[test]
    fn law_matches_row() {
        let mu = law(CtmcState::Low(3), 3.0).unwrap();
        assert_eq!(mu.support().len(), 3);
        assert!((mu.weights()[0] - (1.0 - 2.0 / E)).abs() < 1e-15);
    }
}
