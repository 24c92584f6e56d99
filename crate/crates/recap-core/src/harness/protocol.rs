//! The seven evaluation protocols over three domains.
//!
//! Three intra-domain rows (train and test on the same domain), one
//! inter-domain row (train and test on the union), and three cross-domain
//! rows (train on two domains, test on the held-out third). Cross rows are
//! where generalization is actually measured.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Intra,
    Inter,
    Cross,
}

impl ProtocolKind {
    /// Name used in report CSVs; matches the serde spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Intra => "intra",
            ProtocolKind::Inter => "inter",
            ProtocolKind::Cross => "cross",
        }
    }
}

/// One train/test domain assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentProtocol {
    pub name: String,
    pub train_domains: Vec<String>,
    pub test_domains: Vec<String>,
    pub kind: ProtocolKind,
}

impl ExperimentProtocol {
    /// Checks the structural invariant for the protocol's kind.
    pub fn validate(&self) -> Result<()> {
        let overlap: Vec<&String> =
            self.train_domains.iter().filter(|d| self.test_domains.contains(d)).collect();
        let ok = match self.kind {
            ProtocolKind::Intra => {
                self.train_domains.len() == 1 && self.train_domains == self.test_domains
            }
            ProtocolKind::Inter => {
                !self.train_domains.is_empty() && self.train_domains == self.test_domains
            }
            ProtocolKind::Cross => {
                !self.train_domains.is_empty()
                    && !self.test_domains.is_empty()
                    && overlap.is_empty()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "protocol {} violates its {:?} structure (train {:?}, test {:?})",
                self.name, self.kind, self.train_domains, self.test_domains
            )))
        }
    }
}

/// The standard 7-row protocol table for exactly three domains:
/// 3 intra, 1 inter, 3 cross (each domain held out once).
pub fn build_protocols(domains: &[String]) -> Result<Vec<ExperimentProtocol>> {
    if domains.len() != 3 {
        return Err(Error::InvalidInput(format!(
            "protocol table needs exactly 3 domains, got {}",
            domains.len()
        )));
    }
    let d = domains;
    let mut out = Vec::with_capacity(7);
    for i in 0..3 {
        out.push(ExperimentProtocol {
            name: format!("intra-{}", d[i]),
            train_domains: vec![d[i].clone()],
            test_domains: vec![d[i].clone()],
            kind: ProtocolKind::Intra,
        });
    }
    out.push(ExperimentProtocol {
        name: "inter-all".to_string(),
        train_domains: d.to_vec(),
        test_domains: d.to_vec(),
        kind: ProtocolKind::Inter,
    });
    for holdout in 0..3 {
        let train: Vec<String> =
            (0..3).filter(|&i| i != holdout).map(|i| d[i].clone()).collect();
        out.push(ExperimentProtocol {
            name: format!("cross-{}+{}-to-{}", train[0], train[1], d[holdout]),
            train_domains: train,
            test_domains: vec![d[holdout].clone()],
            kind: ProtocolKind::Cross,
        });
    }
    for p in &out {
        p.validate()?;
    }
    Ok(out)
}
