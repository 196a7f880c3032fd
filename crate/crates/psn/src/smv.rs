//! SMV model and CTL formula emission, plus an optional client for an
//! external symbolic model checker.
//!
//! One model variable per channel, valued 0..|N| with 0 for the empty
//! channel and each terminal encoded by its position in the sorted node
//! list (which is the identifier itself when nodes are numbered densely
//! from 1). The transition relation is a disjunction of one guarded case
//! block per send, process and receive instance; every block carries the
//! frame conjunct over all other channels and a TRUE-branch stutter.
//! Output is byte-deterministic and pinned by golden files in the tests.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::deadlock::Notion;
use crate::network::{ChannelId, NetworkSpec, NodeId, ValidationReport};

/// A complete SMV model with its naming maps.
#[derive(Clone, Debug)]
pub struct SmvModel {
    pub text: String,
    /// Channel to model variable name.
    pub var_map: Vec<(ChannelId, String)>,
    /// Terminal to integer code; the empty channel is always 0.
    pub value_map: Vec<(NodeId, u32)>,
}

/// One deadlock formula over the model variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtlFormula {
    pub notion: Notion,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot export an invalid network:\n{0}")]
    Invalid(ValidationReport),
}

/// Verdict of the external checker for one formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckerOutcome {
    True,
    False,
    Timeout,
}

#[derive(Debug, Error)]
pub enum CheckerError {
    #[error("model checker not found at {0}")]
    ToolNotFound(String),
    #[error("model checker i/o failed: {0}")]
    Io(String),
    #[error("could not parse checker output: {0}")]
    Parse(String),
}

/// Transition rule instances of a spec, in emission order.
pub(crate) struct Instances {
    /// (channel, message): a terminal injects `message` into `channel`.
    pub sends: Vec<(ChannelId, NodeId)>,
    /// (from, message, to): `from` forwards `message` into `to`.
    pub processes: Vec<(ChannelId, NodeId, ChannelId)>,
    /// (channel, message): the target consumes `message`.
    pub receives: Vec<(ChannelId, NodeId)>,
}

/// Enumerate rule instances. Process and receive instances range over the
/// routable contents of each channel only; contents outside those sets
/// never occur in any reachable state, so dropping their instances leaves
/// the reachable behavior of the model untouched.
pub(crate) fn instances(spec: &NetworkSpec) -> Instances {
    let routable = spec.routable_sets();
    let mut sends = Vec::new();
    let mut processes = Vec::new();
    let mut receives = Vec::new();
    for c in spec.channel_ids() {
        let source = spec.channel(c).source;
        if spec.is_terminal(source) {
            for &m in spec.terminals() {
                if m != source && spec.rout(source, m) == Some(c) {
                    sends.push((c, m));
                }
            }
        }
    }
    for c in spec.channel_ids() {
        let target = spec.channel(c).target;
        for &m in routable.routable(c) {
            if target != m {
                let next = spec
                    .next_channel(c, m)
                    .expect("routable content has a next channel");
                processes.push((c, m, next));
            }
        }
    }
    for c in spec.channel_ids() {
        let target = spec.channel(c).target;
        for &m in routable.routable(c) {
            if target == m {
                receives.push((c, m));
            }
        }
    }
    Instances {
        sends,
        processes,
        receives,
    }
}

fn var_name(c: ChannelId) -> String {
    format!("c{}", c.0 + 1)
}

fn code_of(spec: &NetworkSpec, m: NodeId) -> u32 {
    spec.nodes()
        .binary_search(&m)
        .map(|i| i as u32 + 1)
        .expect("message destinations are declared nodes")
}

fn validated(spec: &NetworkSpec) -> Result<(), ExportError> {
    let report = spec.validate();
    if report.is_valid() {
        Ok(())
    } else {
        Err(ExportError::Invalid(report))
    }
}

/// Emit the SMV model of a valid, correct spec.
pub fn emit_smv(spec: &NetworkSpec) -> Result<SmvModel, ExportError> {
    validated(spec)?;
    let inst = instances(spec);
    let nvars = spec.channel_count();
    let top = spec.node_count();

    let frame = |out: &mut String, changed: &[(ChannelId, Option<u32>)]| {
        for c in spec.channel_ids() {
            if c.0 > 0 {
                out.push_str(" & ");
            }
            let v = var_name(c);
            match changed.iter().find(|(cc, _)| *cc == c) {
                Some((_, Some(code))) => write!(out, "next({v}) = {code}").unwrap(),
                Some((_, None)) => write!(out, "next({v}) = 0").unwrap(),
                None => write!(out, "next({v}) = {v}").unwrap(),
            }
        }
    };

    let mut text = String::new();
    writeln!(
        text,
        "-- {}: {} nodes, {} terminals, {} channels",
        spec.name(),
        spec.node_count(),
        spec.terminal_count(),
        nvars
    )
    .unwrap();
    writeln!(text, "MODULE main").unwrap();
    writeln!(text, "VAR").unwrap();
    for c in spec.channel_ids() {
        writeln!(text, "  {} : 0..{};", var_name(c), top).unwrap();
    }
    writeln!(text, "INIT").unwrap();
    let init: Vec<String> = spec.channel_ids().map(|c| format!("{} = 0", var_name(c))).collect();
    writeln!(text, "  {};", init.join(" & ")).unwrap();
    writeln!(text, "TRANS").unwrap();

    let mut stutter = String::new();
    frame(&mut stutter, &[]);

    let mut first = true;
    let mut block = |text: &mut String, comment: String, guard: String, changed: &[(ChannelId, Option<u32>)]| {
        let sep = if first { "  " } else { "  | " };
        first = false;
        writeln!(text, "{sep}-- {comment}").unwrap();
        writeln!(text, "  (case").unwrap();
        let mut effect = String::new();
        frame(&mut effect, changed);
        writeln!(text, "    {guard} : {effect};").unwrap();
        writeln!(text, "    TRUE : {stutter};").unwrap();
        writeln!(text, "  esac)").unwrap();
    };

    for &(c, m) in &inst.sends {
        let code = code_of(spec, m);
        block(
            &mut text,
            format!("send: {} -> {} via {}", spec.channel(c).source, m, spec.channel_name(c)),
            format!("{} = 0", var_name(c)),
            &[(c, Some(code))],
        );
    }
    for &(from, m, to) in &inst.processes {
        let code = code_of(spec, m);
        block(
            &mut text,
            format!(
                "process: {} holding {} forwards into {}",
                spec.channel_name(from),
                m,
                spec.channel_name(to)
            ),
            format!("{} = {} & {} = 0", var_name(from), code, var_name(to)),
            &[(from, None), (to, Some(code))],
        );
    }
    for &(c, m) in &inst.receives {
        let code = code_of(spec, m);
        block(
            &mut text,
            format!("receive: {} from {}", m, spec.channel_name(c)),
            format!("{} = {}", var_name(c), code),
            &[(c, None)],
        );
    }
    writeln!(text, "  ;").unwrap();

    Ok(SmvModel {
        text,
        var_map: spec.channel_ids().map(|c| (c, var_name(c))).collect(),
        value_map: spec
            .terminals()
            .iter()
            .map(|&m| (m, code_of(spec, m)))
            .collect(),
    })
}

/// The enabling-condition families shared by the deadlock formulas:
/// some channel empty; some process instance enabled; some receive
/// instance enabled.
pub(crate) fn ctl_families(spec: &NetworkSpec) -> (Vec<String>, Vec<String>, Vec<String>) {
    let inst = instances(spec);
    let empties = spec
        .channel_ids()
        .map(|c| format!("{} = 0", var_name(c)))
        .collect();
    let processes = inst
        .processes
        .iter()
        .map(|&(from, m, to)| {
            format!(
                "({} = {} & {} = 0)",
                var_name(from),
                code_of(spec, m),
                var_name(to)
            )
        })
        .collect();
    let receives = inst
        .receives
        .iter()
        .map(|&(c, m)| format!("({} = {})", var_name(c), code_of(spec, m)))
        .collect();
    (empties, processes, receives)
}

fn disjunction(atoms: &[String]) -> String {
    if atoms.is_empty() {
        "FALSE".to_owned()
    } else {
        atoms.join(" | ")
    }
}

/// Emit the CTL deadlock formula for one notion.
///
/// Global: a state is reachable in which no send, process or receive
/// condition holds. Local: for some channel and message, a state is
/// reachable from which the content never changes. Weak: a state with
/// some non-empty channel is reachable in which no process or receive
/// condition holds.
pub fn emit_ctl(spec: &NetworkSpec, notion: Notion) -> Result<CtlFormula, ExportError> {
    validated(spec)?;
    let (empties, processes, receives) = ctl_families(spec);
    let text = match notion {
        Notion::Global => format!(
            "EF (!(({}) | ({}) | ({})))",
            disjunction(&empties),
            disjunction(&processes),
            disjunction(&receives)
        ),
        Notion::Local => {
            let mut parts = Vec::new();
            for c in spec.channel_ids() {
                for &m in spec.terminals() {
                    parts.push(format!("EF (AG ({} = {}))", var_name(c), code_of(spec, m)));
                }
            }
            parts.join(" | ")
        }
        Notion::Weak => {
            let nonempty: Vec<String> = spec
                .channel_ids()
                .map(|c| format!("{} != 0", var_name(c)))
                .collect();
            format!(
                "EF (({}) & !(({}) | ({})))",
                disjunction(&nonempty),
                disjunction(&processes),
                disjunction(&receives)
            )
        }
    };
    Ok(CtlFormula { notion, text })
}

/// The pinned invocation of the external checker: interactive mode on the
/// model file, driven by a fixed command script.
pub fn checker_invocation(model_path: &Path) -> (Vec<String>, &'static str) {
    (
        vec!["-int".to_owned(), model_path.display().to_string()],
        "go\ncheck_ctlspec\nquit\n",
    )
}

/// Run an external symbolic checker on the model plus formulas and map its
/// per-formula verdicts back. Formula order in the output must match the
/// input order; a kill on timeout leaves the remaining formulas as
/// [`CheckerOutcome::Timeout`].
pub fn run_external_checker(
    model: &SmvModel,
    formulas: &[CtlFormula],
    tool: &Path,
    timeout: Duration,
) -> Result<Vec<CheckerOutcome>, CheckerError> {
    let io_err = |e: std::io::Error| CheckerError::Io(e.to_string());
    let dir = tempfile::tempdir().map_err(io_err)?;
    let path = dir.path().join("model.smv");
    let mut text = model.text.clone();
    for f in formulas {
        text.push_str("CTLSPEC ");
        text.push_str(&f.text);
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(io_err)?;

    let (args, script) = checker_invocation(&path);
    let mut child = Command::new(tool)
        .args(&args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CheckerError::ToolNotFound(tool.display().to_string())
            } else {
                CheckerError::Io(e.to_string())
            }
        })?;

    // Feed the command script; a tool that exits early may close the pipe.
    if let Some(mut stdin) = child.stdin.take() {
        let _ = stdin.write_all(script.as_bytes());
    }
    let stdout = child.stdout.take().expect("stdout was piped");
    let reader = std::thread::spawn(move || {
        use std::io::Read;
        let mut buf = String::new();
        let mut stdout = stdout;
        let _ = stdout.read_to_string(&mut buf);
        buf
    });

    let start = Instant::now();
    let mut timed_out = false;
    loop {
        match child.try_wait().map_err(io_err)? {
            Some(_) => break,
            None => {
                if start.elapsed() >= timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    timed_out = true;
                    break;
                }
                std::thread::sleep(Duration::from_millis(20));
            }
        }
    }
    let output = reader.join().unwrap_or_default();

    let mut verdicts = Vec::new();
    for line in output.lines() {
        if line.contains("specification") {
            if line.trim_end().ends_with("is true") {
                verdicts.push(CheckerOutcome::True);
            } else if line.trim_end().ends_with("is false") {
                verdicts.push(CheckerOutcome::False);
            }
        }
    }
    if verdicts.len() > formulas.len() {
        return Err(CheckerError::Parse(format!(
            "{} verdict lines for {} formulas",
            verdicts.len(),
            formulas.len()
        )));
    }
    if verdicts.len() < formulas.len() && !timed_out {
        return Err(CheckerError::Parse(format!(
            "{} verdict lines for {} formulas",
            verdicts.len(),
            formulas.len()
        )));
    }
    verdicts.resize(formulas.len(), CheckerOutcome::Timeout);
    Ok(verdicts)
}
