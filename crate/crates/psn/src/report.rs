//! Run reports: one record per analysis with per-notion verdicts,
//! witnesses, replayable traces and state-space statistics, rendered as
//! text or JSON. The JSON layout is versioned and described by the schema
//! file shipped in `docs/`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::deadlock::{DeadlockStatus, DeadlockVerdict, InclusionCheck, Notion};
use crate::explore::StateGraph;
use crate::network::NetworkSpec;
use crate::semantics::TransitionStep;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Debug, Clone)]
pub struct RunReport {
    pub schema_version: u32,
    pub network: String,
    pub terminals: Vec<u32>,
    pub stats: RunStats,
    pub verdicts: Verdicts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inclusions: Option<InclusionSummary>,
}

#[derive(Serialize, Debug, Clone)]
pub struct RunStats {
    pub states: usize,
    pub complete: bool,
    pub wall_ms: u64,
}

#[derive(Serialize, Debug, Clone, Default)]
pub struct Verdicts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global: Option<VerdictReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<VerdictReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak: Option<VerdictReport>,
}

#[derive(Serialize, Debug, Clone)]
pub struct VerdictReport {
    pub status: DeadlockStatus,
    pub exhaustive: bool,
    /// Channel contents of the witness state, in channel order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<ChannelContent>>,
    /// For local deadlocks, the channels whose content never changes.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    #[serde(default)]
    pub deadlocked_channels: Vec<ChannelContent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<StepReport>>,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct ChannelContent {
    pub channel: String,
    pub content: Option<u32>,
}

#[derive(Serialize, Debug, Clone)]
pub struct StepReport {
    pub kind: crate::semantics::StepKind,
    pub actor: u32,
    pub message: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
}

#[derive(Serialize, Debug, Clone)]
pub struct InclusionSummary {
    pub holds: bool,
    pub global_states: usize,
    pub weak_states: usize,
    pub local_states: usize,
}

fn step_report(spec: &NetworkSpec, t: &TransitionStep) -> StepReport {
    StepReport {
        kind: t.kind,
        actor: t.actor.0,
        message: t.message.0,
        from: t.from_channel.map(|c| spec.channel_name(c).to_owned()),
        to: t.to_channel.map(|c| spec.channel_name(c).to_owned()),
    }
}

/// Assemble a report. Witness traces are replayed against the semantics
/// before they are emitted; a trace that does not reproduce its witness is
/// a bug, not a reportable outcome.
pub fn build_report(
    graph: &StateGraph,
    wall_ms: u64,
    verdicts: &[DeadlockVerdict],
    inclusions: Option<&InclusionCheck>,
    include_traces: bool,
) -> RunReport {
    let spec = graph.spec();
    let mut out = Verdicts::default();
    for v in verdicts {
        let mut report = VerdictReport {
            status: v.status,
            exhaustive: v.exhaustive,
            witness: None,
            deadlocked_channels: Vec::new(),
            trace: None,
        };
        if let Some(idx) = v.witness {
            let state = graph.state(idx);
            report.witness = Some(
                spec.channel_ids()
                    .map(|c| ChannelContent {
                        channel: spec.channel_name(c).to_owned(),
                        content: state.get(c).map(|m| m.0),
                    })
                    .collect(),
            );
            report.deadlocked_channels = v
                .witness_channels
                .iter()
                .map(|&(c, m)| ChannelContent {
                    channel: spec.channel_name(c).to_owned(),
                    content: Some(m.0),
                })
                .collect();
            if include_traces {
                let trace = v.trace.as_ref().expect("found verdicts carry a trace");
                let replayed = trace.replay(spec).expect("witness trace replays");
                assert_eq!(replayed, state, "witness trace must reproduce the witness");
                report.trace = Some(trace.steps.iter().map(|t| step_report(spec, t)).collect());
            }
        }
        match v.notion {
            Notion::Global => out.global = Some(report),
            Notion::Local => out.local = Some(report),
            Notion::Weak => out.weak = Some(report),
        }
    }
    RunReport {
        schema_version: SCHEMA_VERSION,
        network: spec.name().to_owned(),
        terminals: spec.terminals().iter().map(|m| m.0).collect(),
        stats: RunStats {
            states: graph.state_count(),
            complete: graph.is_complete(),
            wall_ms,
        },
        verdicts: out,
        inclusions: inclusions.map(|c| InclusionSummary {
            holds: c.holds(),
            global_states: c.global_count,
            weak_states: c.weak_count,
            local_states: c.local_count,
        }),
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text rendering carrying exactly the verdicts of the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "network: {} (terminals: {})",
            self.network,
            self.terminals
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
        .unwrap();
        writeln!(
            out,
            "states explored: {}{} in {} ms",
            self.stats.states,
            if self.stats.complete {
                " (complete)"
            } else {
                " (truncated)"
            },
            self.stats.wall_ms
        )
        .unwrap();
        let mut notion = |name: &str, v: &Option<VerdictReport>| {
            if let Some(v) = v {
                let status = match v.status {
                    DeadlockStatus::Found => "FOUND",
                    DeadlockStatus::Absent => "absent",
                    DeadlockStatus::Unknown => "unknown",
                };
                write!(out, "{name:>6}: {status}").unwrap();
                if let Some(witness) = &v.witness {
                    let filled: Vec<String> = witness
                        .iter()
                        .filter_map(|cc| cc.content.map(|m| format!("{}={}", cc.channel, m)))
                        .collect();
                    write!(out, "  witness: {}", filled.join(" ")).unwrap();
                }
                if !v.deadlocked_channels.is_empty() {
                    let chans: Vec<String> = v
                        .deadlocked_channels
                        .iter()
                        .map(|cc| cc.channel.clone())
                        .collect();
                    write!(out, "  deadlocked: {}", chans.join(" ")).unwrap();
                }
                writeln!(out).unwrap();
                if let Some(trace) = &v.trace {
                    for (i, s) in trace.iter().enumerate() {
                        let desc = match (&s.from, &s.to) {
                            (None, Some(to)) => {
                                format!("send {} -> {} via {}", s.actor, s.message, to)
                            }
                            (Some(from), Some(to)) => format!(
                                "process {from} -> {to} (msg {}) at node {}",
                                s.message, s.actor
                            ),
                            (Some(from), None) => format!("receive {} from {from}", s.message),
                            (None, None) => String::new(),
                        };
                        writeln!(out, "        {:>3}. {desc}", i + 1).unwrap();
                    }
                }
            }
        };
        notion("global", &self.verdicts.global);
        notion("local", &self.verdicts.local);
        notion("weak", &self.verdicts.weak);
        if let Some(inc) = &self.inclusions {
            writeln!(
                out,
                "inclusions: global \u{2286} weak \u{2286} local {} (|G|={}, |W|={}, |L|={})",
                if inc.holds { "hold" } else { "VIOLATED" },
                inc.global_states,
                inc.weak_states,
                inc.local_states
            )
            .unwrap();
        }
        out
    }
}
