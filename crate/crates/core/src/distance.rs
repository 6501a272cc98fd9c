//! l_p distances, ε-balls and the smallest meaningful ε on discrete spaces.
//!
//! Comparisons against ε use the scalar's slack (`1e-9` for `f64`, zero for
//! exact rationals), so boundary points count as inside the ball.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Domain, FeatureSpace};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    /// Hamming distance: number of differing coordinates.
    L0,
    L1,
    L2,
    /// Chebyshev distance.
    LInf,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L0 => "l0",
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::LInf => "linf",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" | "0" | "hamming" => Ok(Norm::L0),
            "l1" | "1" => Ok(Norm::L1),
            "l2" | "2" => Ok(Norm::L2),
            "linf" | "inf" | "l-inf" | "chebyshev" => Ok(Norm::LInf),
            other => Err(Error::Precondition(format!(
                "unknown norm `{other}` (use l0, l1, l2 or linf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpec<S> {
    pub norm: Norm,
    pub epsilon: S,
}

impl<S: Scalar> DistanceSpec<S> {
    pub fn new(norm: Norm, epsilon: S) -> Result<Self> {
        if epsilon < S::zero() {
            return Err(Error::Precondition(format!("epsilon {epsilon} must be >= 0")));
        }
        Ok(DistanceSpec { norm, epsilon })
    }

    /// Number of features an l0 ball lets change: `⌊ε⌋`.
    pub fn l0_budget(&self) -> usize {
        (self.epsilon.clone() + S::slack())
            .floor()
            .to_usize()
            .unwrap_or(usize::MAX)
    }
}

impl<S: Scalar> fmt::Display for DistanceSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} eps={}", self.norm, self.epsilon)
    }
}

pub fn distance<S: Scalar>(x: &[S], y: &[S], norm: Norm) -> Result<S> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let diffs = x.iter().zip(y).map(|(a, b)| (a.clone() - b.clone()).abs());
    Ok(match norm {
        Norm::L0 => {
            let n = x.iter().zip(y).filter(|(a, b)| !a.eq_tol(b)).count();
            S::from_usize(n).unwrap()
        }
        Norm::L1 => diffs.fold(S::zero(), |acc, d| acc + d),
        Norm::L2 => diffs.fold(S::zero(), |acc, d| acc + d.clone() * d).sqrt(),
        Norm::LInf => diffs.fold(S::zero(), |acc, d| if d > acc { d } else { acc }),
    })
}

pub fn within_ball<S: Scalar>(x: &[S], center: &[S], spec: &DistanceSpec<S>) -> Result<bool> {
    if x.len() != center.len() {
        return Err(Error::Dimension {
            expected: center.len(),
            actual: x.len(),
        });
    }
    Ok(match spec.norm {
        Norm::L0 => {
            let n = x.iter().zip(center).filter(|(a, b)| !a.eq_tol(b)).count();
            n <= spec.l0_budget()
        }
        Norm::L2 => {
            // Compare squares so exact scalars never take a square root.
            let sq = x
                .iter()
                .zip(center)
                .map(|(a, b)| (a.clone() - b.clone()) * (a.clone() - b.clone()))
                .fold(S::zero(), |acc, d| acc + d);
            let r = spec.epsilon.clone() + S::slack();
            sq <= r.clone() * r
        }
        _ => distance(x, center, spec.norm)?.le_tol(&spec.epsilon),
    })
}

/// Smallest ε for which a ball around a point of a discrete space can
/// contain anything but the point itself.
pub fn minimum_meaningful_epsilon<S: Scalar>(space: &FeatureSpace<S>, norm: Norm) -> Result<S> {
    if !space.is_discrete() {
        return Err(Error::NotApplicable(
            "continuous features have no discretization floor on epsilon".into(),
        ));
    }
    if norm == Norm::L0 {
        return Ok(S::one());
    }
    let mut best: Option<S> = None;
    for d in space.domains() {
        let gap = match d {
            Domain::Categorical(values) => {
                let mut g: Option<S> = None;
                for (i, a) in values.iter().enumerate() {
                    for b in &values[i + 1..] {
                        let diff = (a.clone() - b.clone()).abs();
                        if g.as_ref().is_none_or(|x| &diff < x) {
                            g = Some(diff);
                        }
                    }
                }
                g
            }
            _ if d.levels() == Some(1) => None,
            _ => d.step(),
        };
        if let Some(gap) = gap {
            if best.as_ref().is_none_or(|b| &gap < b) {
                best = Some(gap);
            }
        }
    }
    best.ok_or_else(|| Error::NotApplicable("every feature has a single value".into()))
}
