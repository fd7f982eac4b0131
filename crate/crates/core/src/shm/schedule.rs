use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A process as a sequence of atomic steps against shared state.
pub trait Machine {
    type Shared;
    type Output;

    /// Take one step. Returns the output of an operation completed by this
    /// step, if any.
    fn step(&mut self, shared: &mut Self::Shared) -> Result<Option<Self::Output>>;

    fn done(&self) -> bool;
}

/// An explicit interleaving plus crash points. `crash_points[p] = c` means
/// process `p` takes at most `c` steps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashSchedule {
    pub n: usize,
    pub f: usize,
    pub steps: Vec<usize>,
    #[serde(default)]
    pub crash_points: BTreeMap<usize, usize>,
}

impl CrashSchedule {
    pub fn new(
        n: usize,
        f: usize,
        steps: Vec<usize>,
        crash_points: BTreeMap<usize, usize>,
    ) -> Result<Self> {
        let s = CrashSchedule {
            n,
            f,
            steps,
            crash_points,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.f >= self.n {
            return Err(Error::Config(format!(
                "crash bound f={} must be below n={}",
                self.f, self.n
            )));
        }
        if self.crash_points.len() > self.f {
            return Err(Error::Config(format!(
                "{} crashes exceed the bound f={}",
                self.crash_points.len(),
                self.f
            )));
        }
        if let Some(p) = self
            .steps
            .iter()
            .chain(self.crash_points.keys())
            .find(|&&p| p >= self.n)
        {
            return Err(Error::Config(format!("process {p} out of range")));
        }
        Ok(())
    }

    pub fn crashed_after(&self, process: usize) -> Option<usize> {
        self.crash_points.get(&process).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run<O> {
    /// Completed-operation outputs per process.
    pub outputs: Vec<Vec<O>>,
    /// Steps actually taken per process.
    pub own_steps: Vec<usize>,
    /// Processes in the order their steps executed.
    pub trace: Vec<usize>,
}

fn step_one<M: Machine>(
    machines: &mut [M],
    shared: &mut M::Shared,
    p: usize,
    run: &mut Run<M::Output>,
) -> Result<()> {
    if let Some(out) = machines[p].step(shared)? {
        run.outputs[p].push(out);
    }
    run.own_steps[p] += 1;
    run.trace.push(p);
    Ok(())
}

/// Execute an explicit schedule. Entries naming finished or crashed
/// processes are skipped.
pub fn run_schedule<M: Machine>(
    shared: &mut M::Shared,
    machines: &mut [M],
    schedule: &CrashSchedule,
) -> Result<Run<M::Output>> {
    if machines.len() != schedule.n {
        return Err(Error::Config("schedule and machine counts differ".into()));
    }
    schedule.validate()?;
    let n = machines.len();
    let mut run = Run {
        outputs: (0..n).map(|_| Vec::new()).collect(),
        own_steps: vec![0; n],
        trace: Vec::new(),
    };
    for &p in &schedule.steps {
        let crashed = schedule
            .crashed_after(p)
            .is_some_and(|c| run.own_steps[p] >= c);
        if machines[p].done() || crashed {
            continue;
        }
        step_one(machines, shared, p, &mut run)?;
    }
    Ok(run)
}

/// Step a uniformly chosen live process until every process is finished or
/// crashed, or `max_steps` steps have been taken.
pub fn run_random<M: Machine, R: Rng>(
    shared: &mut M::Shared,
    machines: &mut [M],
    rng: &mut R,
    crash_points: &BTreeMap<usize, usize>,
    max_steps: usize,
) -> Result<Run<M::Output>> {
    let n = machines.len();
    let mut run = Run {
        outputs: (0..n).map(|_| Vec::new()).collect(),
        own_steps: vec![0; n],
        trace: Vec::new(),
    };
    for _ in 0..max_steps {
        let live: Vec<usize> = (0..n)
            .filter(|&p| !machines[p].done())
            .filter(|&p| crash_points.get(&p).is_none_or(|&c| run.own_steps[p] < c))
            .collect();
        if live.is_empty() {
            break;
        }
        let p = live[rng.gen_range(0..live.len())];
        step_one(machines, shared, p, &mut run)?;
    }
    Ok(run)
}

/// Every interleaving of processes taking `counts[p]` steps each.
pub fn interleavings(counts: &[usize]) -> Vec<Vec<usize>> {
    fn go(left: &mut [usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, total: usize) {
        if cur.len() == total {
            out.push(cur.clone());
            return;
        }
        for p in 0..left.len() {
            if left[p] > 0 {
                left[p] -= 1;
                cur.push(p);
                go(left, cur, out, total);
                cur.pop();
                left[p] += 1;
            }
        }
    }
    let total = counts.iter().sum();
    let mut out = Vec::new();
    go(
        &mut counts.to_vec(),
        &mut Vec::with_capacity(total),
        &mut out,
        total,
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaving_counts_are_multinomial() {
        assert_eq!(interleavings(&[2, 2]).len(), 6);
        assert_eq!(interleavings(&[1, 1, 1]).len(), 6);
        assert_eq!(interleavings(&[4, 4, 4]).len(), 34650);
        assert_eq!(interleavings(&[]), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn crash_bound_is_enforced() {
        assert!(CrashSchedule::new(2, 2, vec![], BTreeMap::new()).is_err());
        assert!(CrashSchedule::new(3, 1, vec![], BTreeMap::from([(0, 1), (1, 1)])).is_err());
        assert!(CrashSchedule::new(3, 1, vec![5], BTreeMap::new()).is_err());
        assert!(CrashSchedule::new(3, 1, vec![0, 1, 2], BTreeMap::from([(2, 0)])).is_ok());
    }
}
