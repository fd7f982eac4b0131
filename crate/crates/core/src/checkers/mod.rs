//! Verdict engines for the consistency criteria and the communication
//! properties.
//!
//! Finite histories are judged with three values. Safety clauses are refuted
//! outright. Eventual clauses are only refuted when the history is declared
//! complete; otherwise lingering violations give INCONCLUSIVE. "Eventually"
//! is read off the last `w` completed reads of every correct process.

mod communication;
mod consistency;
mod verdict;

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::History;
use crate::policy::{LengthScore, ScoreFn};

pub use verdict::{Parameters, Status, Verdict};

pub const DEFAULT_WINDOW: u32 = 3;

/// Number of trailing reads per process that must already agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct EventualityWindow(u32);

impl EventualityWindow {
    pub fn new(stabilization_suffix: u32) -> Result<Self> {
        if stabilization_suffix == 0 {
            return Err(Error::Config(
                "eventuality window must be at least 1".into(),
            ));
        }
        Ok(EventualityWindow(stabilization_suffix))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl Default for EventualityWindow {
    fn default() -> Self {
        EventualityWindow(DEFAULT_WINDOW)
    }
}

impl TryFrom<u32> for EventualityWindow {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        EventualityWindow::new(v)
    }
}

impl From<EventualityWindow> for u32 {
    fn from(w: EventualityWindow) -> u32 {
        w.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    BlockValidity,
    LocalMonotonicRead,
    StrongPrefix,
    EverGrowingTree,
    EventualPrefix,
    Sc,
    Ec,
    UpdateAgreement,
    Lrc,
}

impl Criterion {
    pub const ALL: [Criterion; 9] = [
        Criterion::BlockValidity,
        Criterion::LocalMonotonicRead,
        Criterion::StrongPrefix,
        Criterion::EverGrowingTree,
        Criterion::EventualPrefix,
        Criterion::Sc,
        Criterion::Ec,
        Criterion::UpdateAgreement,
        Criterion::Lrc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::BlockValidity => "block-validity",
            Criterion::LocalMonotonicRead => "local-monotonic-read",
            Criterion::StrongPrefix => "strong-prefix",
            Criterion::EverGrowingTree => "ever-growing-tree",
            Criterion::EventualPrefix => "eventual-prefix",
            Criterion::Sc => "sc",
            Criterion::Ec => "ec",
            Criterion::UpdateAgreement => "update-agreement",
            Criterion::Lrc => "lrc",
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let alias = match s {
            "lmr" => Some(Criterion::LocalMonotonicRead),
            "egt" => Some(Criterion::EverGrowingTree),
            "ep" => Some(Criterion::EventualPrefix),
            "bv" => Some(Criterion::BlockValidity),
            "sp" => Some(Criterion::StrongPrefix),
            "ua" => Some(Criterion::UpdateAgreement),
            _ => None,
        };
        alias
            .or_else(|| Criterion::ALL.into_iter().find(|c| c.name() == s))
            .ok_or_else(|| Error::Config(format!("unknown criterion {s:?}")))
    }
}

/// Checker configuration: the eventuality window and the score function.
#[derive(Clone, Debug)]
pub struct Checker {
    window: EventualityWindow,
    score: Arc<dyn ScoreFn>,
}

impl Default for Checker {
    fn default() -> Self {
        Checker::new(EventualityWindow::default())
    }
}

impl Checker {
    pub fn new(window: EventualityWindow) -> Self {
        Checker {
            window,
            score: Arc::new(LengthScore),
        }
    }

    pub fn with_window(window: u32) -> Result<Self> {
        Ok(Checker::new(EventualityWindow::new(window)?))
    }

    pub fn with_score(mut self, score: impl ScoreFn + 'static) -> Self {
        self.score = Arc::new(score);
        self
    }

    pub fn window(&self) -> EventualityWindow {
        self.window
    }

    fn params(&self, h: &History) -> Parameters {
        Parameters {
            window: self.window.get(),
            complete: h.is_complete(),
        }
    }

    pub fn check(&self, h: &History, criterion: Criterion) -> Verdict {
        match criterion {
            Criterion::BlockValidity => self.block_validity(h),
            Criterion::LocalMonotonicRead => self.local_monotonic_read(h),
            Criterion::StrongPrefix => self.strong_prefix(h),
            Criterion::EverGrowingTree => self.ever_growing_tree(h),
            Criterion::EventualPrefix => self.eventual_prefix(h),
            Criterion::Sc => self.sc(h),
            Criterion::Ec => self.ec(h),
            Criterion::UpdateAgreement => self.update_agreement(h),
            Criterion::Lrc => self.lrc(h),
        }
    }

    pub fn check_all(&self, h: &History) -> Vec<Verdict> {
        Criterion::ALL.iter().map(|c| self.check(h, *c)).collect()
    }

    pub fn sc(&self, h: &History) -> Verdict {
        Verdict::conjunction(
            "sc",
            self.params(h),
            vec![
                self.block_validity(h),
                self.local_monotonic_read(h),
                self.strong_prefix(h),
                self.ever_growing_tree(h),
            ],
        )
    }

    pub fn ec(&self, h: &History) -> Verdict {
        Verdict::conjunction(
            "ec",
            self.params(h),
            vec![
                self.block_validity(h),
                self.local_monotonic_read(h),
                self.ever_growing_tree(h),
                self.eventual_prefix(h),
            ],
        )
    }
}

pub fn check_block_validity(h: &History) -> Verdict {
    Checker::default().block_validity(h)
}

pub fn check_local_monotonic_read(h: &History) -> Verdict {
    Checker::default().local_monotonic_read(h)
}

pub fn check_strong_prefix(h: &History) -> Verdict {
    Checker::default().strong_prefix(h)
}

pub fn check_ever_growing_tree(h: &History, w: EventualityWindow) -> Verdict {
    Checker::new(w).ever_growing_tree(h)
}

pub fn check_eventual_prefix(h: &History, w: EventualityWindow) -> Verdict {
    Checker::new(w).eventual_prefix(h)
}

pub fn check_update_agreement(h: &History) -> Verdict {
    Checker::default().update_agreement(h)
}

pub fn check_lrc(h: &History) -> Verdict {
    Checker::default().lrc(h)
}

pub fn check_sc(h: &History, w: EventualityWindow) -> Verdict {
    Checker::new(w).sc(h)
}

pub fn check_ec(h: &History, w: EventualityWindow) -> Verdict {
    Checker::new(w).ec(h)
}
