use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameters {
    pub window: u32,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub status: Status,
    /// Event ids demonstrating a FAIL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<u64>>,
    pub parameters: Parameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<Verdict>,
}

impl Verdict {
    pub fn pass(criterion: &str, parameters: Parameters) -> Self {
        Verdict {
            criterion: criterion.to_owned(),
            status: Status::Pass,
            witness: None,
            parameters,
            detail: None,
            components: Vec::new(),
        }
    }

    pub fn fail(
        criterion: &str,
        parameters: Parameters,
        witness: Vec<u64>,
        detail: String,
    ) -> Self {
        let mut witness = witness;
        witness.sort_unstable();
        witness.dedup();
        Verdict {
            criterion: criterion.to_owned(),
            status: Status::Fail,
            witness: Some(witness),
            parameters,
            detail: Some(detail),
            components: Vec::new(),
        }
    }

    pub fn inconclusive(criterion: &str, parameters: Parameters, detail: String) -> Self {
        Verdict {
            criterion: criterion.to_owned(),
            status: Status::Inconclusive,
            witness: None,
            parameters,
            detail: Some(detail),
            components: Vec::new(),
        }
    }

    /// FAIL if any part fails, else INCONCLUSIVE if any part is, else PASS.
    /// The witness and detail come from the first decisive component.
    pub fn conjunction(criterion: &str, parameters: Parameters, parts: Vec<Verdict>) -> Self {
        let decisive = parts
            .iter()
            .find(|v| v.status == Status::Fail)
            .or_else(|| parts.iter().find(|v| v.status == Status::Inconclusive));
        let (status, witness, detail) = match decisive {
            Some(v) => (
                v.status,
                v.witness.clone(),
                Some(format!(
                    "{}: {}",
                    v.criterion,
                    v.detail.clone().unwrap_or_default()
                )),
            ),
            None => (Status::Pass, None, None),
        };
        Verdict {
            criterion: criterion.to_owned(),
            status,
            witness,
            parameters,
            detail,
            components: parts,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    pub fn component(&self, criterion: &str) -> Option<&Verdict> {
        self.components.iter().find(|v| v.criterion == criterion)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.criterion, self.status)?;
        if let Some(w) = &self.witness {
            write!(f, " witness={w:?}")?;
        }
        if let Some(d) = &self.detail {
            write!(f, " ({d})")?;
        }
        Ok(())
    }
}
