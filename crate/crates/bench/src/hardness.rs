//! Constraint bounds calibrated to a target query hardness.
//!
//! The sum of `E` independent draws of an attribute with mean `mu` and
//! standard deviation `sigma` is treated as normal with mean `E mu` and
//! standard deviation `sqrt(E) sigma`. Every constraint is given the same
//! satisfaction probability `10^(-h / m)`, so a random `E`-tuple sample
//! satisfies all `m` of them with probability `10^(-h)`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    AtMost,
    /// Interval centred on the expected sum.
    Between,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub attr: String,
    pub direction: Direction,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessSpec {
    pub hardness: f64,
    pub expected_size: f64,
    pub constraints: Vec<ConstraintSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HardnessError {
    #[error("hardness must be positive, got {0}")]
    Hardness(f64),
    #[error("expected package size must be at least 1, got {0}")]
    ExpectedSize(f64),
    #[error("attribute {0}: standard deviation must be positive")]
    Spread(String),
    #[error("no constraints")]
    Empty,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl HardnessSpec {
    pub fn validate(&self) -> Result<(), HardnessError> {
        if !(self.hardness > 0.0) || !self.hardness.is_finite() {
            return Err(HardnessError::Hardness(self.hardness));
        }
        if !(self.expected_size >= 1.0) {
            return Err(HardnessError::ExpectedSize(self.expected_size));
        }
        if self.constraints.is_empty() {
            return Err(HardnessError::Empty);
        }
        if let Some(c) = self.constraints.iter().find(|c| !(c.std > 0.0)) {
            return Err(HardnessError::Spread(c.attr.clone()));
        }
        Ok(())
    }

    /// Satisfaction probability assigned to each constraint.
    pub fn per_constraint_probability(&self) -> f64 {
        10f64.powf(-self.hardness / self.constraints.len() as f64)
    }

    fn sum_moments(&self, c: &ConstraintSpec) -> (f64, f64) {
        (self.expected_size * c.mean, self.expected_size.sqrt() * c.std)
    }
}

pub fn derive_bounds(spec: &HardnessSpec) -> Result<Vec<Bound>, HardnessError> {
    spec.validate()?;
    let p = spec.per_constraint_probability();
    let phi = std_normal();
    Ok(spec
        .constraints
        .iter()
        .map(|c| {
            let (centre, spread) = spec.sum_moments(c);
            match c.direction {
                Direction::AtLeast => Bound {
                    lower: centre + spread * phi.inverse_cdf(1.0 - p),
                    upper: f64::INFINITY,
                },
                Direction::AtMost => Bound {
                    lower: f64::NEG_INFINITY,
                    upper: centre - spread * phi.inverse_cdf(1.0 - p),
                },
                Direction::Between => {
                    let z = phi.inverse_cdf(0.5 * (1.0 + p));
                    Bound {
                        lower: centre - spread * z,
                        upper: centre + spread * z,
                    }
                }
            }
        })
        .collect())
}

/// Probability that the sum of `E` random tuples lands in `bound`.
pub fn satisfaction_probability(spec: &HardnessSpec, c: &ConstraintSpec, bound: Bound) -> f64 {
    let (centre, spread) = spec.sum_moments(c);
    let phi = std_normal();
    let cdf = |b: f64| {
        if b == f64::INFINITY {
            1.0
        } else if b == f64::NEG_INFINITY {
            0.0
        } else {
            phi.cdf((b - centre) / spread)
        }
    };
    cdf(bound.upper) - cdf(bound.lower)
}

/// `-log10` of the joint satisfaction probability of `bounds`.
pub fn implied_hardness(spec: &HardnessSpec, bounds: &[Bound]) -> f64 {
    -spec
        .constraints
        .iter()
        .zip(bounds)
        .map(|(c, &b)| satisfaction_probability(spec, c, b).log10())
        .sum::<f64>()
}
