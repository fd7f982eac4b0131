use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use btlab_core::campaign;
use btlab_core::checkers::Criterion;
use btlab_core::netsim::{self, Scenario};
use btlab_core::{Checker, History, ProcessId};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Run blocktree scenarios, check traces and run property campaigns.
#[derive(Parser, Debug)]
#[command(name = "btlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct SeedArg {
    /// Root seed. Falls back to BTLAB_SEED.
    #[arg(long, env = "BTLAB_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate or replay a scenario and check its expectations.
    Run {
        /// Scenario JSON file.
        #[arg(required_unless_present = "preset")]
        scenario: Option<PathBuf>,
        /// Use a built-in preset instead of a file.
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        #[command(flatten)]
        seed: SeedArg,
        /// Directory for the trace, audit log and report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a JSON-lines trace against one or more criteria.
    Check {
        trace: PathBuf,
        /// Criterion name or alias; repeatable. Defaults to all.
        #[arg(long = "criterion", short)]
        criteria: Vec<String>,
        #[arg(long, default_value_t = btlab_core::checkers::DEFAULT_WINDOW)]
        window: u32,
        /// Treat the trace as a complete history.
        #[arg(long)]
        complete: bool,
        /// Comma-separated correct processes. Defaults to every process.
        #[arg(long, value_delimiter = ',')]
        correct: Vec<String>,
    },
    /// Validate a trace, or compare it against a fresh run of a scenario.
    Replay {
        trace: PathBuf,
        /// Re-run this scenario and require a byte-identical trace.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run a randomized or exhaustive property campaign.
    Campaign {
        #[arg(long, value_enum)]
        lab: Lab,
        /// Number of randomized runs; the lab's default when omitted.
        #[arg(long)]
        runs: Option<u64>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// List presets, or write them as scenario files.
    Presets {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Lab {
    Shm,
    Hierarchy,
    Kfork,
    Containment,
}

const DEFAULT_CAMPAIGN_SEED: u64 = 1;

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_trace(path: &Path) -> Result<History> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    History::from_jsonl(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("json values serialize")
    );
}

fn cmd_run(
    scenario: Option<PathBuf>,
    preset: Option<String>,
    seed: SeedArg,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut s = match (scenario, preset) {
        (Some(path), _) => load_scenario(&path)?,
        (None, Some(name)) => netsim::preset(&name)?,
        (None, None) => bail!("a scenario file or --preset is required"),
    };
    if let Some(seed) = seed.seed {
        s.seed = seed;
    }
    let run = netsim::run(&s)?;
    let report = netsim::report(&s, &run)?;
    let report_json = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(dir) = out {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(
            dir.join(format!("{}.trace.jsonl", s.name)),
            run.history.to_jsonl(),
        )?;
        fs::write(
            dir.join(format!("{}.audit.jsonl", s.name)),
            run.audit_jsonl(),
        )?;
        fs::write(dir.join(format!("{}.report.json", s.name)), &report_json)?;
    }
    print!("{report_json}");
    eprint!("{}", report.summary());
    Ok(if report.all_expectations_met {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_check(
    trace: PathBuf,
    criteria: Vec<String>,
    window: u32,
    complete: bool,
    correct: Vec<String>,
) -> Result<ExitCode> {
    let mut h = load_trace(&trace)?.declared_complete(complete);
    if !correct.is_empty() {
        h = h.with_correct(correct.into_iter().map(ProcessId::new))?;
    }
    let checker = Checker::with_window(window)?;
    let criteria: Vec<Criterion> = if criteria.is_empty() {
        Criterion::ALL.to_vec()
    } else {
        criteria
            .iter()
            .map(|c| c.parse())
            .collect::<btlab_core::Result<_>>()?
    };
    for c in criteria {
        println!("{}", serde_json::to_string(&checker.check(&h, c))?);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(trace: PathBuf, scenario: Option<PathBuf>, seed: SeedArg) -> Result<ExitCode> {
    let text =
        fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
    let h = History::from_jsonl(&text).with_context(|| format!("parsing {}", trace.display()))?;
    let mut summary = json!({
        "trace": trace.display().to_string(),
        "events": h.len(),
        "operations": h.ops().len(),
        "processes": h.processes(),
        "canonical": h.to_jsonl() == text,
    });
    let mut ok = true;
    if let Some(path) = scenario {
        let mut s = load_scenario(&path)?;
        if let Some(seed) = seed.seed {
            s.seed = seed;
        }
        let fresh = netsim::run(&s)?.history.to_jsonl();
        let first_difference = fresh
            .lines()
            .zip(text.lines())
            .position(|(a, b)| a != b)
            .or_else(|| {
                (fresh.lines().count() != text.lines().count())
                    .then(|| fresh.lines().count().min(text.lines().count()))
            });
        ok = first_difference.is_none();
        summary["identical"] = json!(ok);
        if let Some(line) = first_difference {
            summary["first_difference_line"] = json!(line + 1);
        }
    }
    print(&summary);
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_campaign(lab: Lab, runs: Option<u64>, seed: SeedArg) -> Result<ExitCode> {
    let root = seed.seed.unwrap_or(DEFAULT_CAMPAIGN_SEED);
    let (summary, violation): (Value, Option<String>) = match lab {
        Lab::Shm => {
            let runs = runs.unwrap_or(200);
            let r = if runs == 0 {
                campaign::ShmReport::default()
            } else {
                campaign::shm(runs, root)?
            };
            let violation = (!r.ok()).then(|| {
                r.consensus
                    .violations
                    .first()
                    .map(|s| format!("consensus counterexample seed {s}"))
                    .or_else(|| r.cas.first_mismatch.clone())
                    .or_else(|| r.snapshot.first_mismatch.clone())
                    .unwrap_or_else(|| "shm properties violated".into())
            });
            (serde_json::to_value(&r)?, violation)
        }
        Lab::Hierarchy => {
            let r = campaign::hierarchy(runs.unwrap_or(1000), root)?;
            let violation = r
                .sc_pass_ec_fail
                .first()
                .map(|s| format!("SC PASS with EC FAIL, counterexample seed {s}"));
            (serde_json::to_value(&r)?, violation)
        }
        Lab::Kfork => {
            let mut reports = Vec::new();
            let mut violation = None;
            for k in 1..=3 {
                let r = campaign::kfork(k, runs.unwrap_or(200), root)?;
                if let Some(s) = r.violations.first() {
                    violation.get_or_insert(format!("k={k} exceeded, counterexample seed {s}"));
                }
                reports.push(r);
            }
            (serde_json::to_value(&reports)?, violation)
        }
        Lab::Containment => {
            let r = campaign::containment(runs.unwrap_or(100), root)?;
            let violation = r
                .mismatches
                .first()
                .map(|s| format!("replay diverged, counterexample seed {s}"));
            (serde_json::to_value(&r)?, violation)
        }
    };
    print(&json!({ "seed": root, "passed": violation.is_none(), "report": summary }));
    Ok(match violation {
        Some(msg) => {
            eprintln!("btlab: {msg}");
            ExitCode::from(1)
        }
        None => ExitCode::SUCCESS,
    })
}

fn cmd_presets(write: Option<PathBuf>) -> Result<ExitCode> {
    match write {
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for s in netsim::all_presets() {
                let path = dir.join(format!("{}.json", s.name));
                fs::write(&path, s.to_json())
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
        }
        None => netsim::PRESET_NAMES.iter().for_each(|n| println!("{n}")),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            preset,
            seed,
            out,
        } => cmd_run(scenario, preset, seed, out),
        Command::Check {
            trace,
            criteria,
            window,
            complete,
            correct,
        } => cmd_check(trace, criteria, window, complete, correct),
        Command::Replay {
            trace,
            scenario,
            seed,
        } => cmd_replay(trace, scenario, seed),
        Command::Campaign { lab, runs, seed } => cmd_campaign(lab, runs, seed),
        Command::Presets { write } => cmd_presets(write),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("btlab: {e:#}");
            ExitCode::from(2)
        }
    }
}
