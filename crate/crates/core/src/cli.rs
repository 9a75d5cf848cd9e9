//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::batch::compare;
use crate::controller::{Strategy, StrategyConfig};
use crate::engine::run;
use crate::metrics::{summary, write_report};
use crate::pathfind::{path_find, PathQuery};
use crate::scenario::{parse_topology, random_scenario, RandomSpec, Scenario};
use crate::topology::Vec2;

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sdvn",
    version,
    about = "Vehicular camera streaming over a software-defined network"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one strategy and write a report.
    Run {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Strategy,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate both strategies and check they deliver the same payloads.
    Compare {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict a path toward a destination given a heading.
    Pathfind {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        #[arg(long, allow_hyphen_values = true)]
        vx: f64,
        #[arg(long, allow_hyphen_values = true)]
        vy: f64,
    },
    /// Check scenario files without simulating.
    Validate {
        #[command(flatten)]
        input: Input,
    },
    /// Write a random small scenario.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Input {
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct Tuning {
    /// Idle timeout at the camera, seconds.
    #[arg(long)]
    pub t_base: Option<f64>,
    /// Timeout decay per hop.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub preinstall_hops: Option<usize>,
    /// Flow-table capacity per switch.
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Recorded in the summary; the simulation itself has no randomness.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

impl Tuning {
    fn config(&self, strategy: Strategy) -> StrategyConfig {
        let mut c = StrategyConfig::with_strategy(strategy);
        if let Some(t) = self.t_base {
            c.t_base = t;
        }
        if let Some(k) = self.k {
            c.k = k;
        }
        if let Some(h) = self.preinstall_hops {
            c.preinstall_hops = h;
        }
        c
    }

    fn note(&self) -> String {
        self.seed.map(|s| format!("seed: {s}\n\n")).unwrap_or_default()
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn load(input: &Input, tuning: Option<&Tuning>) -> Result<Scenario, Failure> {
    let mut s = Scenario::load(&input.topology, &input.trace).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    for w in s.warnings() {
        eprintln!("warning: {w}");
    }
    if let Some(t) = tuning {
        if let Some(c) = t.capacity {
            if c == 0 {
                return Err(fail(EXIT_USAGE, "capacity must be positive"));
            }
            s.params.capacity = Some(c);
        }
    }
    Ok(s)
}

fn check(cfg: &StrategyConfig) -> Result<(), Failure> {
    cfg.validate().map_err(|e| fail(EXIT_USAGE, e.to_string()))
}

fn write_summary_note(dir: &Path, note: &str) -> Result<(), Failure> {
    if note.is_empty() {
        return Ok(());
    }
    let path = dir.join("summary.txt");
    let body = fs::read_to_string(&path).map_err(|e| fail(EXIT_RUNTIME, format!("{}: {e}", path.display())))?;
    fs::write(&path, format!("{note}{body}")).map_err(|e| fail(EXIT_RUNTIME, format!("{}: {e}", path.display())))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            input,
            strategy,
            tuning,
            out,
        } => {
            let s = load(&input, Some(&tuning))?;
            let cfg = tuning.config(strategy);
            check(&cfg)?;
            let report = run(&s, &cfg).map_err(|e| fail(EXIT_RUNTIME, e.to_string()))?;
            write_report(&[&report], &out).map_err(|e| fail(EXIT_RUNTIME, e.to_string()))?;
            write_summary_note(&out, &tuning.note())?;
            println!(
                "{}: {} deliveries, {} packet-ins, report in {}",
                strategy,
                report.deliveries.len(),
                report.counters.packet_ins,
                out.display()
            );
            Ok(())
        }
        Command::Compare { input, tuning, out } => {
            let s = load(&input, Some(&tuning))?;
            let cfg = tuning.config(Strategy::Optimized);
            check(&cfg)?;
            let cmp = compare(&s, &cfg).map_err(|e| fail(EXIT_RUNTIME, e.to_string()))?;
            let reports = [&cmp.baseline, &cmp.optimized];
            write_report(&reports, &out).map_err(|e| fail(EXIT_RUNTIME, e.to_string()))?;
            write_summary_note(&out, &tuning.note())?;
            print!("{}", summary(&reports));
            match cmp.first_divergence() {
                Some(d) => Err(fail(EXIT_DIVERGED, format!("delivery equivalence violated: {d}"))),
                None => Ok(()),
            }
        }
        Command::Pathfind {
            topology,
            src,
            dst,
            vx,
            vy,
        } => {
            let text =
                fs::read_to_string(&topology).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", topology.display())))?;
            let (topo, _) =
                parse_topology(&text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", topology.display())))?;
            let q = PathQuery::new(src.as_str(), dst.as_str(), Vec2::new(vx, vy));
            match path_find(&q, &topo) {
                Ok(p) => {
                    let names: Vec<&str> = p.nodes().iter().map(|n| n.as_str()).collect();
                    println!("{}", names.join(" "));
                    Ok(())
                }
                Err(e) if e.class() == "TopologyError" => Err(fail(EXIT_USAGE, e.to_string())),
                Err(e) => {
                    println!("{}", e.class());
                    Err(fail(EXIT_RUNTIME, e.to_string()))
                }
            }
        }
        Command::Validate { input } => {
            let s = load(&input, None)?;
            let plans = s.vehicle_plans();
            println!(
                "ok: {} nodes, {} links, {} vehicles, {} requests, {} marks discarded",
                s.topology.len(),
                s.topology.links().len(),
                plans.vehicles.len(),
                s.requests.len(),
                plans.discarded
            );
            Ok(())
        }
        Command::Generate { seed, out } => {
            let s = random_scenario(seed, &RandomSpec::default());
            fs::create_dir_all(&out).map_err(|e| fail(EXIT_RUNTIME, format!("{}: {e}", out.display())))?;
            for (name, body) in [("topology.txt", s.topology_text()), ("trace.txt", s.trace_text())] {
                let p = out.join(name);
                fs::write(&p, body).map_err(|e| fail(EXIT_RUNTIME, format!("{}: {e}", p.display())))?;
            }
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
