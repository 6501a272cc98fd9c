use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Domain of a single feature.
///
/// Discrete domains are indexed by *levels* `0..levels()`: the position of a
/// value on its grid (or in the categorical value list). Encodings, the brute
/// oracle and the BNN input layer all work on levels.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain<S> {
    Real { lo: S, hi: S },
    Integer { lo: i64, hi: i64 },
    Binary,
    Categorical(Vec<S>),
    Quantized { lo: S, hi: S, step: S },
}

impl<S: Scalar> Domain<S> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Real { lo, hi } if lo > hi => {
                Err(Error::InvalidModel(format!("real interval with lo {lo} > hi {hi}")))
            }
            Domain::Integer { lo, hi } if lo > hi => {
                Err(Error::InvalidModel(format!("integer range with lo {lo} > hi {hi}")))
            }
            Domain::Categorical(values) => {
                if values.is_empty() {
                    return Err(Error::InvalidModel("categorical domain without values".into()));
                }
                for (i, a) in values.iter().enumerate() {
                    if values[..i].iter().any(|b| a.eq_tol(b)) {
                        return Err(Error::InvalidModel(format!("duplicate categorical value {a}")));
                    }
                }
                Ok(())
            }
            Domain::Quantized { lo, hi, step } => {
                if step <= &S::zero() {
                    return Err(Error::InvalidModel(format!("quantization step {step} must be > 0")));
                }
                if lo > hi {
                    return Err(Error::InvalidModel(format!(
                        "quantized interval with lo {lo} > hi {hi}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, Domain::Real { .. })
    }

    /// Number of values of a discrete domain.
    pub fn levels(&self) -> Option<u64> {
        match self {
            Domain::Real { .. } => None,
            Domain::Binary => Some(2),
            Domain::Integer { lo, hi } => Some((hi - lo) as u64 + 1),
            Domain::Categorical(values) => Some(values.len() as u64),
            Domain::Quantized { lo, hi, step } => {
                let span = (hi.to_rational() - lo.to_rational()) / step.to_rational();
                let slack = S::slack().to_rational() / step.to_rational();
                Some((span + slack).floor().to_integer().to_u64()? + 1)
            }
        }
    }

    /// Grid spacing for ordered discrete domains.
    pub fn step(&self) -> Option<S> {
        match self {
            Domain::Binary | Domain::Integer { .. } => Some(S::one()),
            Domain::Quantized { step, .. } => Some(step.clone()),
            _ => None,
        }
    }

    pub fn value_at(&self, level: u64) -> S {
        match self {
            Domain::Binary => S::from_u64(level).unwrap(),
            Domain::Integer { lo, .. } => S::from_i64_exact(lo + level as i64),
            Domain::Categorical(values) => values[level as usize].clone(),
            // nearest representable value of the exact grid point
            Domain::Quantized { .. } => S::from_rational(&self.rational_at(level)),
            Domain::Real { .. } => panic!("value_at on a continuous domain"),
        }
    }

    /// Exact rational value of a level.
    pub fn rational_at(&self, level: u64) -> BigRational {
        match self {
            Domain::Quantized { lo, step, .. } => {
                lo.to_rational() + BigRational::from_integer(level.into()) * step.to_rational()
            }
            _ => self.value_at(level).to_rational(),
        }
    }

    /// Level of `v`, or `None` when `v` is not a value of this domain.
    pub fn level_of(&self, v: &S) -> Option<u64> {
        match self {
            Domain::Real { .. } => None,
            Domain::Binary => {
                if v.eq_tol(&S::zero()) {
                    Some(0)
                } else if v.eq_tol(&S::one()) {
                    Some(1)
                } else {
                    None
                }
            }
            Domain::Categorical(values) => values.iter().position(|x| x.eq_tol(v)).map(|p| p as u64),
            Domain::Integer { .. } | Domain::Quantized { .. } => {
                let (lo, step) = match self {
                    Domain::Integer { lo, .. } => (S::from_i64_exact(*lo), S::one()),
                    Domain::Quantized { lo, step, .. } => (lo.clone(), step.clone()),
                    _ => unreachable!(),
                };
                let ratio = (v.clone() - lo) / step;
                let q = ratio.round();
                if q < S::zero() {
                    return None;
                }
                let level = q.to_u64()?;
                if level >= self.levels()? {
                    return None;
                }
                if self.value_at(level).eq_tol(v) {
                    Some(level)
                } else {
                    None
                }
            }
        }
    }

    pub fn contains(&self, v: &S) -> bool {
        match self {
            Domain::Real { lo, hi } => lo.le_tol(v) && v.le_tol(hi),
            _ => self.level_of(v).is_some(),
        }
    }

    pub fn lower(&self) -> S {
        match self {
            Domain::Real { lo, .. } | Domain::Quantized { lo, .. } => lo.clone(),
            Domain::Integer { lo, .. } => S::from_i64_exact(*lo),
            Domain::Binary => S::zero(),
            Domain::Categorical(values) => values
                .iter()
                .fold(values[0].clone(), |m, v| if v < &m { v.clone() } else { m }),
        }
    }

    pub fn upper(&self) -> S {
        match self {
            Domain::Real { hi, .. } => hi.clone(),
            Domain::Integer { hi, .. } => S::from_i64_exact(*hi),
            Domain::Binary => S::one(),
            Domain::Quantized { .. } => self.value_at(self.levels().unwrap() - 1),
            Domain::Categorical(values) => values
                .iter()
                .fold(values[0].clone(), |m, v| if v > &m { v.clone() } else { m }),
        }
    }

    /// Same domain over another scalar type, through exact rationals.
    pub fn convert<T: Scalar>(&self) -> Domain<T> {
        let c = |x: &S| T::from_rational(&x.to_rational());
        match self {
            Domain::Real { lo, hi } => Domain::Real { lo: c(lo), hi: c(hi) },
            Domain::Integer { lo, hi } => Domain::Integer { lo: *lo, hi: *hi },
            Domain::Binary => Domain::Binary,
            Domain::Categorical(values) => Domain::Categorical(values.iter().map(c).collect()),
            Domain::Quantized { lo, hi, step } => Domain::Quantized {
                lo: c(lo),
                hi: c(hi),
                step: c(step),
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Domain::Real { .. } => "real",
            Domain::Integer { .. } => "integer",
            Domain::Binary => "binary",
            Domain::Categorical(_) => "categorical",
            Domain::Quantized { .. } => "quantized",
        }
    }
}

/// Cartesian product of per-feature domains.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace<S> {
    domains: Vec<Domain<S>>,
    names: Vec<String>,
}

impl<S: Scalar> FeatureSpace<S> {
    pub fn new(domains: Vec<Domain<S>>) -> Result<Self> {
        let names = (1..=domains.len()).map(|i| format!("x{i}")).collect();
        Self::with_names(domains, names)
    }

    pub fn with_names(domains: Vec<Domain<S>>, names: Vec<String>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::InvalidModel("feature space needs at least one feature".into()));
        }
        if names.len() != domains.len() {
            return Err(Error::Dimension {
                expected: domains.len(),
                actual: names.len(),
            });
        }
        for (i, d) in domains.iter().enumerate() {
            d.validate()
                .map_err(|e| Error::InvalidModel(format!("feature {}: {e}", i + 1)))?;
        }
        Ok(FeatureSpace { domains, names })
    }

    pub fn dim(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[Domain<S>] {
        &self.domains
    }

    pub fn domain(&self, i: usize) -> &Domain<S> {
        &self.domains[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_discrete(&self) -> bool {
        self.domains.iter().all(Domain::is_discrete)
    }

    pub fn is_continuous(&self) -> bool {
        self.domains.iter().all(|d| matches!(d, Domain::Real { .. }))
    }

    /// Number of points of a discrete space, saturating at `u128::MAX`.
    pub fn size(&self) -> Option<u128> {
        self.domains
            .iter()
            .try_fold(1u128, |acc, d| d.levels().map(|l| acc.saturating_mul(l as u128)))
    }

    pub fn check_arity(&self, point: &[S]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: point.len(),
            });
        }
        Ok(())
    }

    pub fn check_point(&self, point: &[S]) -> Result<()> {
        self.check_arity(point)?;
        for (i, (d, v)) in self.domains.iter().zip(point).enumerate() {
            if !d.contains(v) {
                return Err(Error::Domain(format!(
                    "feature {} value {v} outside its {} domain",
                    i + 1,
                    d.kind_name()
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &[S]) -> bool {
        self.check_point(point).is_ok()
    }

    /// Level vector of a point in a discrete space.
    pub fn levels_of(&self, point: &[S]) -> Result<Vec<u64>> {
        self.check_arity(point)?;
        self.domains
            .iter()
            .zip(point)
            .enumerate()
            .map(|(i, (d, v))| {
                d.level_of(v).ok_or_else(|| {
                    Error::Domain(format!(
                        "feature {} value {v} is not a level of a {} domain",
                        i + 1,
                        d.kind_name()
                    ))
                })
            })
            .collect()
    }

    pub fn point_at(&self, levels: &[u64]) -> Vec<S> {
        self.domains.iter().zip(levels).map(|(d, &l)| d.value_at(l)).collect()
    }

    pub fn convert<T: Scalar>(&self) -> Result<FeatureSpace<T>> {
        FeatureSpace::with_names(self.domains.iter().map(Domain::convert).collect(), self.names.clone())
    }

    /// Replaces every continuous domain with a grid of spacing `step`.
    pub fn quantized(&self, step: &S) -> Result<Self> {
        if step <= &S::zero() || step.is_zero() {
            return Err(Error::Precondition(format!("quantization step {step} must be > 0")));
        }
        let domains = self
            .domains
            .iter()
            .map(|d| match d {
                Domain::Real { lo, hi } => Domain::Quantized {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    step: step.clone(),
                },
                other => other.clone(),
            })
            .collect();
        FeatureSpace::with_names(domains, self.names.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_levels_and_lookup() {
        let d = Domain::Quantized {
            lo: 0.0,
            hi: 1.0,
            step: 1e-6,
        };
        assert_eq!(d.levels(), Some(1_000_001));
        assert_eq!(d.level_of(&0.7), Some(700_000));
        assert_eq!(d.level_of(&0.7000004), None);
        assert_eq!(d.level_of(&1.5), None);
        let d = Domain::Quantized {
            lo: 0.0,
            hi: 2.0,
            step: 0.5,
        };
        assert_eq!(d.levels(), Some(5));
        assert_eq!(d.value_at(3), 1.5);
        let d = Domain::Quantized {
            lo: 0.0,
            hi: 1.0,
            step: 0.3,
        };
        assert_eq!(d.levels(), Some(4));
        assert!((d.upper() - 0.9f64).abs() < 1e-12);
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(Domain::Real { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(Domain::<f64>::Categorical(vec![]).validate().is_err());
        assert!(Domain::Quantized {
            lo: 0.0,
            hi: 1.0,
            step: 0.0
        }
        .validate()
        .is_err());
        assert!(FeatureSpace::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn point_membership() {
        let s = FeatureSpace::new(vec![
            Domain::Binary,
            Domain::Integer { lo: -2, hi: 2 },
            Domain::Categorical(vec![0.5, 2.0]),
            Domain::Real { lo: 0.0, hi: 1.0 },
        ])
        .unwrap();
        assert!(s.contains(&[1.0, -2.0, 2.0, 0.3]));
        assert!(!s.contains(&[0.5, 0.0, 2.0, 0.3]));
        assert!(!s.contains(&[1.0, 3.0, 2.0, 0.3]));
        assert!(!s.contains(&[1.0, 0.0, 1.0, 0.3]));
        assert!(matches!(s.check_point(&[1.0]), Err(Error::Dimension { .. })));
        assert!(!s.is_discrete());
        assert_eq!(s.size(), None);
    }
}
