//! Report structures shared by all axiom checkers.
//!
//! Reports serialise to a stable JSON shape: identical run configuration
//! (including the seed) must yield byte identical output.

use serde::{Deserialize, Serialize};

/// Run parameters echoed verbatim into every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub budget: usize,
    pub samples: u64,
    pub precision: Option<String>,
    pub output: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            budget: 8,
            samples: 256,
            precision: None,
            output: "text".to_string(),
        }
    }
}

/// How a checker walks the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Every tuple of the (finite) carrier.
    Exhaustive,
    /// Pseudo random tuples drawn from a seeded generator.
    Sampled { trials: u64, seed: u64 },
}

impl Scope {
    pub fn seed(&self) -> u64 {
        match self {
            Scope::Exhaustive => 0,
            Scope::Sampled { seed, .. } => *seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// Outcome of one axiom within a checker run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    pub seed: u64,
    pub trials: u64,
}

impl AxiomReport {
    pub fn pass(axiom: &str, seed: u64, trials: u64) -> Self {
        AxiomReport { axiom: axiom.to_string(), status: Status::Pass, witness: None, seed, trials }
    }

    pub fn fail(axiom: &str, witness: String, seed: u64, trials: u64) -> Self {
        AxiomReport {
            axiom: axiom.to_string(),
            status: Status::Fail,
            witness: Some(witness),
            seed,
            trials,
        }
    }

    pub fn skipped(axiom: &str, reason: String) -> Self {
        AxiomReport {
            axiom: axiom.to_string(),
            status: Status::Skipped,
            witness: Some(reason),
            seed: 0,
            trials: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// A bundle of axiom outcomes for one structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub subject: String,
    pub items: Vec<AxiomReport>,
}

impl CheckReport {
    pub fn new(subject: &str) -> Self {
        CheckReport { subject: subject.to_string(), items: Vec::new() }
    }

    pub fn push(&mut self, item: AxiomReport) {
        self.items.push(item);
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed())
    }

    /// First failing axiom, if any.
    pub fn first_failure(&self) -> Option<&AxiomReport> {
        self.items.iter().find(|i| !i.passed())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialisation cannot fail")
    }
}
