//! Command-line front end: load a network, explore its state space, decide
//! the three deadlock notions, export SMV/CTL models and drive an external
//! symbolic checker for cross-validation.
//!
//! Exit codes: 0 when the analysis completed (whether or not deadlocks were
//! found), 1 on usage, parse or validation errors, 2 when a budget ran out
//! and some requested verdict is unknown.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use psn::corpus;
use psn::deadlock::{
    check_inclusions, detect_global, detect_local, detect_weak, DeadlockStatus, DeadlockVerdict,
    Notion,
};
use psn::explore::{explore, explore_until, Budget, ExploreOptions, StateGraph};
use psn::network::NetworkSpec;
use psn::report::build_report;
use psn::semantics::{enabled_pr, has_any_step};
use psn::smv::{emit_ctl, emit_smv, run_external_checker, CheckerOutcome};

#[derive(Parser)]
#[command(name = "psn", about = "Deadlock analysis for packet switching networks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore the state space and decide deadlock notions.
    Check(CheckArgs),
    /// Validate a network description and report violations.
    Validate(ValidateArgs),
    /// Emit the SMV model, optionally with CTL deadlock formulas.
    ExportSmv(ExportArgs),
    /// Run the native analysis and an external symbolic checker, then
    /// compare verdicts.
    Xcheck(XcheckArgs),
}

#[derive(Args)]
struct NetworkArgs {
    /// Network description file.
    #[arg(long, conflicts_with = "builtin")]
    network: Option<PathBuf>,
    /// Builtin network: ring4, ring4-ex3, ring4-ex4, grid17.
    #[arg(long)]
    builtin: Option<String>,
    /// Terminal set for grid17, e.g. 11,12,13,15.
    #[arg(long, value_delimiter = ',')]
    terminals: Option<Vec<u32>>,
}

impl NetworkArgs {
    fn load(&self) -> Result<NetworkSpec> {
        match (&self.network, &self.builtin) {
            (Some(path), None) => {
                if self.terminals.is_some() {
                    bail!("--terminals only applies to builtin networks");
                }
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                Ok(corpus::parse_network(&text)?)
            }
            (None, Some(name)) => Ok(corpus::builtin(name, self.terminals.as_deref())?),
            _ => bail!("exactly one of --network or --builtin is required"),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum NotionArg {
    Global,
    Local,
    Weak,
    All,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct BudgetArgs {
    /// Stop exploration after this many states.
    #[arg(long, default_value_t = 50_000_000)]
    max_states: usize,
    /// Stop exploration after this many seconds.
    #[arg(long, default_value_t = 600.0)]
    max_seconds: f64,
    /// Expansion workers: 0 = all cores, 1 = sequential.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl BudgetArgs {
    fn options(&self) -> ExploreOptions {
        ExploreOptions {
            budget: Budget {
                max_states: Some(self.max_states),
                max_seconds: Some(self.max_seconds),
            },
            workers: self.workers,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Which deadlock notion to decide.
    #[arg(long, value_enum, default_value_t = NotionArg::All)]
    notion: NotionArg,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Include replayable witness traces in the report.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Also write the topology as a DOT digraph to this file.
    #[arg(long)]
    emit_dot: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Which CTL formulas to append as CTLSPEC lines.
    #[arg(long, value_enum, default_value_t = CtlArg::All)]
    ctl: CtlArg,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CtlArg {
    All,
    Global,
    Local,
    Weak,
    None,
}

#[derive(Args)]
struct XcheckArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Path to the symbolic checker; falls back to PSN_SMV_TOOL.
    #[arg(long)]
    tool: Option<PathBuf>,
    /// Wall-clock cap for the external checker run, in seconds.
    #[arg(long, default_value_t = 9000.0)]
    tool_timeout: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(args) => run_check(args),
        Command::Validate(args) => run_validate(args),
        Command::ExportSmv(args) => run_export(args),
        Command::Xcheck(args) => run_xcheck(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn requested(notion: NotionArg) -> Vec<Notion> {
    match notion {
        NotionArg::Global => vec![Notion::Global],
        NotionArg::Local => vec![Notion::Local],
        NotionArg::Weak => vec![Notion::Weak],
        NotionArg::All => vec![Notion::Global, Notion::Local, Notion::Weak],
    }
}

fn run_check(args: CheckArgs) -> Result<ExitCode> {
    let spec = args.net.load()?;
    let opts = args.budget.options();
    let notions = requested(args.notion);
    let start = Instant::now();

    // Single existential questions can stop at the first witness; local
    // deadlock and absence claims need the full graph.
    let graph: StateGraph = match args.notion {
        NotionArg::Global => {
            let spec_ref = &spec;
            explore_until(&spec, &opts, move |s| !has_any_step(spec_ref, s)).0
        }
        NotionArg::Weak => {
            let spec_ref = &spec;
            explore_until(&spec, &opts, move |s| {
                !s.is_initial() && !enabled_pr(spec_ref, s)
            })
            .0
        }
        _ => explore(&spec, &opts),
    };

    let mut verdicts: Vec<DeadlockVerdict> = Vec::new();
    for notion in &notions {
        let verdict = match notion {
            Notion::Global => detect_global(&graph),
            Notion::Weak => detect_weak(&graph),
            Notion::Local => match detect_local(&graph) {
                Ok(v) => v,
                Err(_) => DeadlockVerdict {
                    notion: Notion::Local,
                    status: DeadlockStatus::Unknown,
                    witness: None,
                    witness_channels: Vec::new(),
                    trace: None,
                    exhaustive: false,
                },
            },
        };
        verdicts.push(verdict);
    }

    let inclusions = if graph.is_complete() && args.notion == NotionArg::All {
        Some(check_inclusions(&graph).map_err(|e| anyhow!(e))?)
    } else {
        None
    };
    let wall_ms = start.elapsed().as_millis() as u64;
    let report = build_report(&graph, wall_ms, &verdicts, inclusions.as_ref(), args.trace);
    match args.format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", report.to_json()),
    }
    let unknown = verdicts
        .iter()
        .any(|v| v.status == DeadlockStatus::Unknown);
    Ok(ExitCode::from(if unknown { 2 } else { 0 }))
}

fn run_validate(args: ValidateArgs) -> Result<ExitCode> {
    let loaded = match (&args.net.network, &args.net.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            corpus::parse_network(&text).map_err(|e| anyhow!(e))
        }
        _ => args.net.load().map_err(|e| anyhow!(e)),
    };
    let spec = match loaded {
        Ok(spec) => spec,
        Err(err) => {
            eprintln!("invalid: {err:#}");
            return Ok(ExitCode::from(1));
        }
    };
    println!(
        "valid: {} ({} nodes, {} terminals, {} channels)",
        spec.name(),
        spec.node_count(),
        spec.terminal_count(),
        spec.channel_count()
    );
    if let Some(path) = &args.emit_dot {
        std::fs::write(path, render_dot(&spec))
            .with_context(|| format!("cannot write {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::from(0))
}

fn render_dot(spec: &NetworkSpec) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", spec.name()).unwrap();
    for &n in spec.nodes() {
        let shape = if spec.is_terminal(n) {
            " [shape=doublecircle]"
        } else {
            ""
        };
        writeln!(out, "  {n}{shape};").unwrap();
    }
    for c in spec.channel_ids() {
        let ch = spec.channel(c);
        writeln!(
            out,
            "  {} -> {} [label=\"{}\"];",
            ch.source,
            ch.target,
            spec.channel_name(c)
        )
        .unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

fn run_export(args: ExportArgs) -> Result<ExitCode> {
    let spec = args.net.load()?;
    let model = emit_smv(&spec)?;
    let mut text = model.text.clone();
    let notions = match args.ctl {
        CtlArg::All => vec![Notion::Global, Notion::Local, Notion::Weak],
        CtlArg::Global => vec![Notion::Global],
        CtlArg::Local => vec![Notion::Local],
        CtlArg::Weak => vec![Notion::Weak],
        CtlArg::None => vec![],
    };
    for notion in notions {
        let formula = emit_ctl(&spec, notion)?;
        text.push_str(&format!("-- {notion} deadlock\nCTLSPEC {}\n", formula.text));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::from(0))
}

fn run_xcheck(args: XcheckArgs) -> Result<ExitCode> {
    let spec = args.net.load()?;
    let tool = args
        .tool
        .clone()
        .or_else(|| std::env::var_os("PSN_SMV_TOOL").map(PathBuf::from))
        .ok_or_else(|| anyhow!("no checker given; pass --tool or set PSN_SMV_TOOL"))?;

    let opts = args.budget.options();
    let graph = explore(&spec, &opts);
    let native = [
        detect_global(&graph),
        detect_local(&graph).unwrap_or(DeadlockVerdict {
            notion: Notion::Local,
            status: DeadlockStatus::Unknown,
            witness: None,
            witness_channels: Vec::new(),
            trace: None,
            exhaustive: false,
        }),
        detect_weak(&graph),
    ];

    let model = emit_smv(&spec)?;
    let formulas = vec![
        emit_ctl(&spec, Notion::Global)?,
        emit_ctl(&spec, Notion::Local)?,
        emit_ctl(&spec, Notion::Weak)?,
    ];
    let external = run_external_checker(
        &model,
        &formulas,
        &tool,
        Duration::from_secs_f64(args.tool_timeout),
    )?;

    let mut agree = true;
    let mut any_unknown = false;
    println!("{:<8} {:<10} {:<10} agreement", "notion", "native", "external");
    for (verdict, outcome) in native.iter().zip(&external) {
        let native_str = match verdict.status {
            DeadlockStatus::Found => "found",
            DeadlockStatus::Absent => "absent",
            DeadlockStatus::Unknown => "unknown",
        };
        let external_str = match outcome {
            CheckerOutcome::True => "found",
            CheckerOutcome::False => "absent",
            CheckerOutcome::Timeout => "timeout",
        };
        let comparable = verdict.status != DeadlockStatus::Unknown
            && *outcome != CheckerOutcome::Timeout;
        let line = if !comparable {
            any_unknown = true;
            "skipped"
        } else if native_str == external_str {
            "ok"
        } else {
            agree = false;
            "MISMATCH"
        };
        println!("{:<8} {:<10} {:<10} {}", verdict.notion, native_str, external_str, line);
    }
    if !agree {
        bail!("native and external verdicts disagree");
    }
    Ok(ExitCode::from(if any_unknown { 2 } else { 0 }))
}
