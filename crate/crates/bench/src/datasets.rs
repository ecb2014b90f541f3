//! Synthetic relations with prescribed per-attribute moments, and the two
//! benchmark query templates built on them.

use pq_core::model::{Aggregate, GlobalConstraint, PackageQuery, Relation, Repeat, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hardness::{derive_bounds, ConstraintSpec, Direction, HardnessError, HardnessSpec};

/// Expected package size used to calibrate the templates.
pub const EXPECTED_SIZE: f64 = 30.0;
pub const COUNT_RANGE: (f64, f64) = (15.0, 45.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Family {
    Normal,
    Uniform,
    /// A `zero_fraction` share of exact zeros, the rest gamma distributed so
    /// that the column as a whole keeps the requested moments.
    ZeroInflated { zero_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub family: Family,
}

impl AttributeSpec {
    pub fn new(name: &str, mean: f64, std: f64, family: Family) -> Self {
        Self {
            name: name.to_string(),
            mean,
            std,
            family,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("attribute {0}: moments not reachable with this family")]
    Moments(String),
    #[error(transparent)]
    Hardness(#[from] HardnessError),
}

/// Normal columns mix in the `shared` factor with weight `rho` when given.
fn column(spec: &AttributeSpec, n: usize, rng: &mut ChaCha8Rng, shared: Option<(&[f64], f64)>) -> Result<Vec<f64>, DatasetError> {
    let bad = || DatasetError::Moments(spec.name.clone());
    let (mu, sigma) = (spec.mean, spec.std);
    if !(sigma >= 0.0) {
        return Err(bad());
    }
    let out = match spec.family {
        Family::Normal => match shared {
            Some((common, rho)) => {
                let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
                common
                    .iter()
                    .map(|&c| {
                        let own: f64 = rng.sample(StandardNormal);
                        mu + sigma * (a * c + b * own)
                    })
                    .collect()
            }
            None => {
                let d = Normal::new(mu, sigma).map_err(|_| bad())?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
        },
        Family::Uniform => {
            let half = sigma * 3f64.sqrt();
            (0..n).map(|_| mu - half + 2.0 * half * rng.random::<f64>()).collect()
        }
        Family::ZeroInflated { zero_fraction: z } => {
            if !(0.0..1.0).contains(&z) {
                return Err(bad());
            }
            // moments of the non-zero part
            let m = mu / (1.0 - z);
            let s2 = (sigma * sigma + mu * mu) / (1.0 - z) - m * m;
            if !(m > 0.0 && s2 > 0.0) {
                return Err(bad());
            }
            let g = Gamma::new(m * m / s2, s2 / m).map_err(|_| bad())?;
            (0..n)
                .map(|_| if rng.random::<f64>() < z { 0.0 } else { g.sample(rng) })
                .collect()
        }
    };
    Ok(out)
}

/// Independent columns, or, with `correlation = Some(rho)`, normal columns
/// sharing one common factor so any two have correlation `rho`.
pub fn generate_relation(
    attrs: &[AttributeSpec],
    n: usize,
    seed: u64,
    correlation: Option<f64>,
) -> Result<Relation, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common: Option<Vec<f64>> = correlation.map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect());
    let shared = common.as_deref().zip(correlation.map(|r| r.clamp(0.0, 1.0)));
    let mut cols = Vec::with_capacity(attrs.len());
    for a in attrs {
        cols.push(column(a, n, &mut rng, shared)?);
    }
    let names = attrs.iter().map(|a| a.name.clone()).collect();
    Ok(Relation::new(names, cols).expect("generated columns are consistent"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Sdss,
    Tpch,
}

/// A relation schema with one objective and three hardness-calibrated sums
/// on top of `COUNT BETWEEN 15 AND 45`.
#[derive(Debug, Clone)]
pub struct Template {
    pub table: &'static str,
    pub attributes: Vec<AttributeSpec>,
    pub objective: (Sense, &'static str),
    pub constrained: [(&'static str, Direction); 3],
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Sdss => "sdss",
            Dataset::Tpch => "tpch",
        }
    }

    pub fn template(self) -> Template {
        match self {
            Dataset::Sdss => Template {
                table: "sdss",
                attributes: vec![
                    AttributeSpec::new("tmass_prox", 14.45, 14.96, Family::ZeroInflated { zero_fraction: 0.3 }),
                    AttributeSpec::new("j", 14.82, 1.562, Family::Normal),
                    AttributeSpec::new("h", 14.05, 1.657, Family::Normal),
                    AttributeSpec::new("k", 13.73, 1.727, Family::Normal),
                ],
                objective: (Sense::Minimize, "tmass_prox"),
                constrained: [("j", Direction::AtLeast), ("h", Direction::AtMost), ("k", Direction::Between)],
            },
            Dataset::Tpch => Template {
                table: "tpch",
                attributes: vec![
                    AttributeSpec::new("price", 38240.0, 23290.0, Family::Uniform),
                    AttributeSpec::new("quantity", 25.50, 14.43, Family::Uniform),
                    AttributeSpec::new("discount", 1912.0, 1833.0, Family::Uniform),
                    AttributeSpec::new("tax", 1530.0, 1485.0, Family::Uniform),
                ],
                objective: (Sense::Maximize, "price"),
                constrained: [
                    ("quantity", Direction::AtLeast),
                    ("discount", Direction::AtMost),
                    ("tax", Direction::Between),
                ],
            },
        }
    }
}

impl Template {
    pub fn attribute(&self, name: &str) -> &AttributeSpec {
        self.attributes.iter().find(|a| a.name == name).expect("template attribute")
    }

    pub fn hardness_spec(&self, hardness: f64) -> HardnessSpec {
        HardnessSpec {
            hardness,
            expected_size: EXPECTED_SIZE,
            constraints: self
                .constrained
                .iter()
                .map(|&(name, direction)| {
                    let a = self.attribute(name);
                    ConstraintSpec {
                        attr: name.to_string(),
                        direction,
                        mean: a.mean,
                        std: a.std,
                    }
                })
                .collect(),
        }
    }

    pub fn query(&self, hardness: f64) -> Result<PackageQuery, DatasetError> {
        let spec = self.hardness_spec(hardness);
        let bounds = derive_bounds(&spec)?;
        let mut q = PackageQuery::new(self.table, Repeat::Limited(0))
            .with_constraint(GlobalConstraint::between(Aggregate::Count, COUNT_RANGE.0, COUNT_RANGE.1));
        for (c, b) in spec.constraints.iter().zip(bounds) {
            q = q.with_constraint(GlobalConstraint::between(Aggregate::Sum(c.attr.clone()), b.lower, b.upper));
        }
        let (sense, attr) = self.objective;
        Ok(q.with_objective(sense, attr))
    }

    pub fn relation(&self, n: usize, seed: u64) -> Result<Relation, DatasetError> {
        generate_relation(&self.attributes, n, seed, None)
    }
}
