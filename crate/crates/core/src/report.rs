//! Check records shared by the analysis reports.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    Exact,
    CertifiedBound,
    MonteCarlo { se: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Holds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub provenance: Provenance,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, provenance: Provenance) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
            relation: Relation::AtMost,
            pass: measured <= tolerance,
            provenance,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64, provenance: Provenance) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
            relation: Relation::AtLeast,
            pass: measured >= tolerance,
            provenance,
        }
    }

    pub fn holds(name: impl Into<String>, pass: bool, provenance: Provenance) -> Self {
        Check {
            name: name.into(),
            measured: if pass { 1.0 } else { 0.0 },
            tolerance: 1.0,
            relation: Relation::Holds,
            pass,
            provenance,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
