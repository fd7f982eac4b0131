use std::collections::BTreeMap;

use super::figures;
use super::scenario::{
    Body, ChannelKind, ChannelModel, DelayOverride, DropRule, Expectation, OracleConfig, OwnUpdate,
    ProcessSpec, Scenario, ScriptSpec, SimSpec, SCHEMA_VERSION,
};
use crate::checkers::Criterion;
use crate::error::{Error, Result};
use crate::oracle::{Capacity, Merit};
use crate::refinement::DEFAULT_MAX_GRANT_ATTEMPTS;

pub const PRESET_NAMES: [&str; 8] = [
    "bitcoin-like",
    "consortium-like",
    "fork-strong-violation",
    "update-drop",
    "figure-3",
    "figure-4",
    "figure-5",
    "figure-6",
];

fn merit(n: u64, d: u64) -> Merit {
    Merit::ratio(n, d).expect("preset merits are in range")
}

fn scenario(
    name: &str,
    seed: u64,
    window: u32,
    expect: &[(Criterion, Expectation)],
    body: Body,
) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.to_owned(),
        seed,
        declared_complete: true,
        window,
        expect: expect.iter().copied().collect::<BTreeMap<_, _>>(),
        body,
    }
}

fn script(name: &str, n: u8, expect: &[(Criterion, Expectation)]) -> Scenario {
    let events = figures::figure(n).expect("figure exists");
    scenario(
        name,
        0,
        1,
        expect,
        Body::Script(ScriptSpec {
            events,
            processes: Vec::new(),
            correct: None,
        }),
    )
}

/// Four miners, one puzzle attempt per interval, a prodigal oracle and a
/// synchronous channel faster than the block rate, then a quiet tail.
fn bitcoin_like() -> Scenario {
    let miners = [("m1", 1, 2), ("m2", 1, 3), ("m3", 1, 4), ("m4", 1, 6)];
    let processes = miners
        .iter()
        .enumerate()
        .map(|(i, (id, n, d))| {
            ProcessSpec::new(*id, merit(*n, *d)).appending(5, Some(2 + i as u64))
        })
        .collect();
    scenario(
        "bitcoin-like",
        7,
        3,
        &[(Criterion::Ec, Expectation::Pass)],
        Body::Simulated(SimSpec {
            processes,
            channel: ChannelModel::new(ChannelKind::Synchronous { delta: 3 }),
            oracle: OracleConfig {
                capacity: Capacity::Unbounded,
            },
            duration: 160,
            quiesce_after: Some(120),
            read_interval: 4,
            max_grant_attempts: 1,
        }),
    )
}

/// A single-slot oracle: stale appends are refused instead of forking.
fn consortium_like() -> Scenario {
    let processes = (1..=4)
        .map(|i| ProcessSpec::new(format!("v{i}"), merit(1, 1)).appending(6, Some(i)))
        .collect();
    scenario(
        "consortium-like",
        11,
        3,
        &[
            (Criterion::Sc, Expectation::Pass),
            (Criterion::Ec, Expectation::Pass),
        ],
        Body::Simulated(SimSpec {
            processes,
            channel: ChannelModel::new(ChannelKind::Synchronous { delta: 4 }),
            oracle: OracleConfig {
                capacity: Capacity::Bounded(1),
            },
            duration: 120,
            quiesce_after: Some(90),
            read_interval: 3,
            max_grant_attempts: DEFAULT_MAX_GRANT_ATTEMPTS,
        }),
    )
}

/// Two processes append at the same tick under a prodigal oracle; each
/// learns the other's block before its own comes back, and both read in
/// between.
fn fork_strong_violation() -> Scenario {
    let processes = ["p1", "p2"]
        .iter()
        .map(|id| {
            ProcessSpec::new(*id, merit(1, 1))
                .appending(100, Some(1))
                .first_read(3)
                .own_update(OwnUpdate::OnSelfDelivery)
        })
        .collect();
    let mut channel = ChannelModel::new(ChannelKind::Synchronous { delta: 4 });
    for (from, to, ticks) in [
        ("p1", "p1", 4),
        ("p2", "p2", 4),
        ("p1", "p2", 1),
        ("p2", "p1", 1),
    ] {
        channel.delay_overrides.push(DelayOverride {
            from: from.into(),
            to: to.into(),
            ticks,
        });
    }
    scenario(
        "fork-strong-violation",
        1,
        3,
        &[
            (Criterion::StrongPrefix, Expectation::Fail),
            (Criterion::Sc, Expectation::Fail),
        ],
        Body::Simulated(SimSpec {
            processes,
            channel,
            oracle: OracleConfig {
                capacity: Capacity::Unbounded,
            },
            duration: 20,
            quiesce_after: Some(2),
            read_interval: 5,
            max_grant_attempts: DEFAULT_MAX_GRANT_ATTEMPTS,
        }),
    )
}

/// One appender; every copy of its first block toward `p3` is lost.
fn update_drop() -> Scenario {
    let processes = vec![
        ProcessSpec::new("p1", merit(1, 1)).appending(5, Some(2)),
        ProcessSpec::new("p2", merit(1, 1)),
        ProcessSpec::new("p3", merit(1, 1)),
    ];
    let mut channel = ChannelModel::new(ChannelKind::Synchronous { delta: 2 });
    channel.drops.push(DropRule {
        from: None,
        to: "p3".into(),
        block: Some("p1-1".into()),
    });
    scenario(
        "update-drop",
        3,
        3,
        &[
            (Criterion::UpdateAgreement, Expectation::Fail),
            (Criterion::Ec, Expectation::NotPass),
        ],
        Body::Simulated(SimSpec {
            processes,
            channel,
            oracle: OracleConfig {
                capacity: Capacity::Bounded(1),
            },
            duration: 60,
            quiesce_after: Some(40),
            read_interval: 3,
            max_grant_attempts: DEFAULT_MAX_GRANT_ATTEMPTS,
        }),
    )
}

pub fn preset(name: &str) -> Result<Scenario> {
    use Criterion::*;
    use Expectation::*;
    Ok(match name {
        "bitcoin-like" => bitcoin_like(),
        "consortium-like" => consortium_like(),
        "fork-strong-violation" => fork_strong_violation(),
        "update-drop" => update_drop(),
        "figure-3" => script(name, 3, &[(Sc, Pass), (Ec, Pass)]),
        "figure-4" => script(name, 4, &[(Sc, Fail), (Ec, Pass), (StrongPrefix, Fail)]),
        "figure-5" => script(name, 5, &[(Ec, NotPass), (Sc, NotPass)]),
        "figure-6" => script(name, 6, &[(UpdateAgreement, Pass), (Lrc, Pass)]),
        _ => return Err(Error::Config(format!("unknown preset {name:?}"))),
    })
}

pub fn all_presets() -> Vec<Scenario> {
    PRESET_NAMES
        .iter()
        .map(|n| preset(n).expect("listed presets exist"))
        .collect()
}
