//! `hwsim` — compile, validate, run, score and serve hidden-world episodes.

mod endpoint;

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hwsim_core::belief::MemoryMode;
use hwsim_core::eval::{paired_bootstrap, score_episode, ScoreCard};
use hwsim_core::protocol::{run_client, serve_session, Session};
use hwsim_core::runtime::{
    run_episode, HeuristicPlanner, InterfaceMode, Planner, RunConfig, ScriptedPlanner, TaskRunLog,
};
use hwsim_core::scenario::{
    audit_dataset, bundled, compile_episode, parse_scenario, read_dataset, validate_scenario, write_dataset, Episode,
    ScenarioFile,
};

use endpoint::{connect, Endpoint, Listener};

#[derive(Parser)]
#[command(name = "hwsim", version, about = "Hidden-world household task simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a scenario, compile it and write the episode + transition dataset.
    Compile {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        /// Output directory (default: ./<episode_id>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the deterministic checks and report; writes nothing.
    Validate { scenario: String },
    /// Run an episode and write one TaskRunLog per line.
    Run {
        /// Compiled episode directory, scenario file or bundled name.
        episode: String,
        #[arg(long, value_enum, default_value_t = PlannerKind::Heuristic)]
        planner: PlannerKind,
        #[arg(long, value_enum, default_value_t = Interface::Diff)]
        interface: Interface,
        #[arg(long, value_enum, default_value_t = Memory::Full)]
        memory: Memory,
        /// Node cap for `--memory bounded`.
        #[arg(long, default_value_t = 20)]
        memory_cap: usize,
        /// Forgetting rate for `--memory bounded`.
        #[arg(long, default_value_t = 0.1)]
        forget_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable the gated visual oracle.
        #[arg(long)]
        no_visual_oracle: bool,
        /// Where an external planner is listening (with `--planner external`).
        #[arg(long, default_value = "stdio")]
        connect: Endpoint,
        /// Read timeout for the external planner, in milliseconds.
        #[arg(long)]
        timeout_ms: Option<u64>,
        /// Log file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score TaskRunLogs against an episode.
    Score {
        episode: String,
        logs: PathBuf,
        /// Structured report (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flat per-task table; printed to stdout when `--out` is given and this is not.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Paired bootstrap over a CSV/TSV of `a,b` metric pairs.
    Bootstrap {
        pairs: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve episodes to external planners over the wire protocol.
    Serve {
        episode: String,
        #[arg(long, default_value = "stdio")]
        listen: Endpoint,
        #[arg(long, value_enum, default_value_t = Interface::Diff)]
        interface: Interface,
        #[arg(long, value_enum, default_value_t = Memory::Full)]
        memory: Memory,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_visual_oracle: bool,
        #[arg(long)]
        timeout_ms: Option<u64>,
        /// Stop after this many sessions (0 = forever).
        #[arg(long, default_value_t = 0)]
        sessions: usize,
        /// Directory for per-session transcript, logs and scorecard.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Act as a planner client against a server.
    Client {
        /// Needed for `--planner ground-truth`.
        episode: Option<String>,
        #[arg(long)]
        connect: Endpoint,
        #[arg(long, value_enum, default_value_t = ClientPlanner::Heuristic)]
        planner: ClientPlanner,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerKind {
    Heuristic,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClientPlanner {
    Heuristic,
    GroundTruth,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interface {
    Flow,
    Diff,
}

#[derive(Clone, Copy, ValueEnum)]
enum Memory {
    None,
    Bounded,
    Full,
}

fn memory_mode(m: Memory, cap: usize, rate: f64) -> Result<MemoryMode> {
    Ok(match m {
        Memory::None => MemoryMode::None,
        Memory::Full => MemoryMode::Full,
        Memory::Bounded => {
            if !(0.0..=1.0).contains(&rate) {
                bail!("--forget-rate must be in [0, 1]");
            }
            MemoryMode::Bounded { cap, rate }
        }
    })
}

fn run_config(interface: Interface, memory: MemoryMode, seed: u64, no_visual_oracle: bool) -> Result<RunConfig> {
    let cfg = RunConfig {
        interface: match interface {
            Interface::Flow => InterfaceMode::Flow,
            Interface::Diff => InterfaceMode::Diff,
        },
        memory,
        seed,
        visual_oracle: !no_visual_oracle,
        ..RunConfig::default()
    };
    Ok(cfg.with_env()?)
}

/// Scenario from a file path, falling back to a bundled name.
fn load_scenario(arg: &str) -> Result<(String, ScenarioFile)> {
    let path = Path::new(arg);
    let (name, text) = if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        (arg.to_string(), text)
    } else if let Some((_, t)) = bundled::ALL.iter().find(|(n, _)| *n == arg) {
        (format!("<bundled:{arg}>"), t.to_string())
    } else {
        bail!("{arg}: no such file or bundled scenario");
    };
    match parse_scenario(&text) {
        Ok(s) => Ok((name, s)),
        Err(e) => {
            for d in &e.0 {
                eprintln!("{name}: {d}");
            }
            bail!("{name}: {} parse error(s)", e.0.len())
        }
    }
}

/// A compiled episode directory, or a scenario compiled on the fly.
fn load_episode(arg: &str) -> Result<Episode> {
    let path = Path::new(arg);
    if path.is_dir() {
        let ds = read_dataset(path).with_context(|| format!("reading episode {arg}"))?;
        return Ok(ds.manifest.episode()?);
    }
    let (name, s) = load_scenario(arg)?;
    let (ep, _) = compile_episode(&s).with_context(|| format!("compiling {name}"))?;
    Ok(ep)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_logs(w: &mut dyn Write, logs: &[TaskRunLog]) -> Result<()> {
    for l in logs {
        serde_json::to_writer(&mut *w, l)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_logs(path: &Path) -> Result<Vec<TaskRunLog>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut logs = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let log =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: bad TaskRunLog", path.display(), i + 1))?;
        logs.push(log);
    }
    Ok(logs)
}

fn summarize(logs: &[TaskRunLog]) {
    for l in logs {
        let outcome = serde_json::to_value(&l.outcome)
            .ok()
            .and_then(|v| v.get("status").and_then(|s| s.as_str()).map(str::to_string))
            .unwrap_or_default();
        eprintln!(
            "task {} [{}]: {} in {} primitives, {} replans, {} visual queries",
            l.task_id,
            l.position,
            outcome,
            l.counters.primitives_attempted,
            l.counters.replans,
            l.counters.visual_queries
        );
    }
}

fn compile(scenario: &str, out: Option<PathBuf>) -> Result<()> {
    let (name, s) = load_scenario(scenario)?;
    let report = validate_scenario(&s);
    if !report.passed() {
        for d in report.failures() {
            eprintln!("{name}: {d}");
        }
        bail!("{name}: validation failed");
    }
    let (ep, records) = compile_episode(&s).with_context(|| format!("compiling {name}"))?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&ep.episode_id));
    let ds = write_dataset(&dir, &ep, &records)?;
    let audit = audit_dataset(&ds);
    print!("{audit}");
    println!(
        "compiled {}: {} tasks, {} records -> {}",
        ep.episode_id,
        ep.tasks.len(),
        records.len(),
        dir.display()
    );
    if !audit.findings.is_empty() {
        bail!("{name}: audit reported {} finding(s)", audit.findings.len());
    }
    Ok(())
}

fn validate(scenario: &str) -> Result<()> {
    let (name, s) = load_scenario(scenario)?;
    let report = validate_scenario(&s);
    print!("{report}");
    if !report.passed() {
        for d in report.failures() {
            eprintln!("{name}: {d}");
        }
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
        bail!("{name}: failed checks: {}", failed.join(", "));
    }
    Ok(())
}

fn timeout(ms: Option<u64>) -> Option<Duration> {
    ms.map(Duration::from_millis)
}

fn write_session(dir: &Path, s: &Session) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut t = io::BufWriter::new(fs::File::create(dir.join("transcript.jsonl"))?);
    for line in &s.transcript {
        serde_json::to_writer(&mut t, line)?;
        t.write_all(b"\n")?;
    }
    t.flush()?;
    write_logs(
        &mut io::BufWriter::new(fs::File::create(dir.join("logs.jsonl"))?),
        &s.logs,
    )?;
    if let Some(card) = &s.scorecard {
        fs::write(dir.join("scorecard.json"), serde_json::to_string_pretty(card)? + "\n")?;
    }
    Ok(())
}

fn score(episode: &str, logs: &Path, out: Option<PathBuf>, tsv: Option<PathBuf>) -> Result<()> {
    let ep = load_episode(episode)?;
    let logs = read_logs(logs)?;
    let card = score_episode(&ep, &logs)?;
    let json = serde_json::to_string_pretty(&card)? + "\n";
    match (&out, &tsv) {
        (None, None) => print!("{json}"),
        (Some(p), t) => {
            fs::write(p, json).with_context(|| format!("writing {}", p.display()))?;
            match t {
                Some(t) => fs::write(t, card.to_tsv())?,
                None => print!("{}", card.to_tsv()),
            }
        }
        (None, Some(t)) => {
            print!("{json}");
            fs::write(t, card.to_tsv())?;
        }
    }
    Ok(())
}

/// Reads the last two numeric columns of each row; a non-numeric first row is a header.
fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let delim = if path.extension().is_some_and(|e| e == "tsv") {
        b'\t'
    } else {
        b','
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delim)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            bail!("{}:{}: need two columns", path.display(), i + 1);
        }
        let x = rec[rec.len() - 2].parse::<f64>();
        let y = rec[rec.len() - 1].parse::<f64>();
        match (x, y) {
            (Ok(x), Ok(y)) => {
                a.push(x);
                b.push(y);
            }
            _ if i == 0 => continue,
            _ => bail!("{}:{}: non-numeric pair", path.display(), i + 1),
        }
    }
    Ok((a, b))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Compile { scenario, out } => compile(&scenario, out),
        Cmd::Validate { scenario } => validate(&scenario),
        Cmd::Run {
            episode,
            planner,
            interface,
            memory,
            memory_cap,
            forget_rate,
            seed,
            no_visual_oracle,
            connect: endpoint,
            timeout_ms,
            out,
        } => {
            let ep = load_episode(&episode)?;
            let cfg = run_config(
                interface,
                memory_mode(memory, memory_cap, forget_rate)?,
                seed,
                no_visual_oracle,
            )?;
            let logs = match planner {
                PlannerKind::Heuristic => run_episode(&ep, &mut HeuristicPlanner::default(), &cfg),
                PlannerKind::External => {
                    if endpoint == Endpoint::Stdio && out.is_none() {
                        bail!("--planner external over stdio needs --out for the logs");
                    }
                    let c = connect(&endpoint, timeout(timeout_ms))?;
                    let s = serve_session(&ep, &cfg, c.reader, c.writer);
                    if let Some(e) = &s.error {
                        eprintln!("warning: planner session broke: {e}");
                    }
                    s.logs
                }
            };
            summarize(&logs);
            write_logs(&mut *output(out.as_deref())?, &logs)
        }
        Cmd::Score {
            episode,
            logs,
            out,
            tsv,
        } => score(&episode, &logs, out, tsv),
        Cmd::Bootstrap { pairs, resamples, seed } => {
            let (a, b) = read_pairs(&pairs)?;
            let r = paired_bootstrap(&a, &b, resamples, seed)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(())
        }
        Cmd::Serve {
            episode,
            listen,
            interface,
            memory,
            seed,
            no_visual_oracle,
            timeout_ms,
            sessions,
            out,
        } => {
            let ep = Arc::new(load_episode(&episode)?);
            let mode = memory_mode(memory, 20, 0.1)?;
            let cfg = Arc::new(run_config(interface, mode, seed, no_visual_oracle)?);
            let mut listener = Listener::bind(&listen)?;
            eprintln!("serving {} on {}", ep.episode_id, listener.local());
            let mut handles = Vec::new();
            let mut n = 0usize;
            while sessions == 0 || n < sessions {
                let Some(c) = listener.accept(timeout(timeout_ms))? else {
                    break;
                };
                let (ep, cfg, out) = (Arc::clone(&ep), Arc::clone(&cfg), out.clone());
                let id = n;
                n += 1;
                // Each session runs on its own copy of the episode state.
                handles.push(thread::spawn(move || -> Result<Option<ScoreCard>> {
                    let s = serve_session(&ep, &cfg, c.reader, c.writer);
                    if let Some(e) = &s.error {
                        eprintln!("session {id} ({}): {e}", c.peer);
                    }
                    if let Some(dir) = out {
                        write_session(&dir.join(format!("session_{id:03}")), &s)?;
                    }
                    Ok(s.scorecard)
                }));
            }
            let mut failed = 0;
            for (id, h) in handles.into_iter().enumerate() {
                match h.join() {
                    Ok(Ok(Some(card))) => eprintln!("session {id}: tsr {:.3} f1 {:.3}", card.tsr, card.f1),
                    Ok(Ok(None)) => eprintln!("session {id}: no scorecard"),
                    Ok(Err(e)) => {
                        failed += 1;
                        eprintln!("session {id}: error: {e:#}");
                    }
                    Err(_) => {
                        failed += 1;
                        eprintln!("session {id}: panicked");
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} session(s) failed");
            }
            Ok(())
        }
        Cmd::Client {
            episode,
            connect: endpoint,
            planner,
        } => {
            let mut p: Box<dyn Planner> = match planner {
                ClientPlanner::Heuristic => Box::new(HeuristicPlanner::default()),
                ClientPlanner::GroundTruth => {
                    let Some(e) = episode else {
                        bail!("--planner ground-truth needs the episode");
                    };
                    Box::new(ScriptedPlanner::ground_truth(&load_episode(&e)?))
                }
            };
            let c = connect(&endpoint, None)?;
            match run_client(&mut *p, c.reader, c.writer)? {
                Some(card) => print!("{}", card.to_tsv()),
                None => bail!("server ended the run without a scorecard"),
            }
            Ok(())
        }
    }
}
