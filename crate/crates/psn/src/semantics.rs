//! Operational semantics: channel-content states and the send, process and
//! receive steps over them.
//!
//! A state assigns each channel either a message (the destination terminal)
//! or the empty value. The transition rules are:
//!
//! * send: a terminal inserts a message for another terminal into its
//!   routed channel, provided that channel is empty;
//! * process: a node forwards the message from an incoming channel into
//!   the next routed channel, provided that channel is empty;
//! * receive: a terminal consumes a message that reached it.
//!
//! A state with no enabled step keeps only the implicit self-loop that
//! totalizes the transition relation. The self-loop is never materialized;
//! consumers treat an empty step list accordingly.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::network::{ChannelId, Message, NetworkSpec, NodeId};

/// One assignment of contents to every channel of a spec.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct NetState {
    contents: Box<[Message]>,
}

impl NetState {
    /// The all-empty state for a network with `channels` channels.
    pub fn empty(channels: usize) -> Self {
        NetState {
            contents: vec![None; channels].into_boxed_slice(),
        }
    }

    pub fn from_contents(contents: Vec<Message>) -> Self {
        NetState {
            contents: contents.into_boxed_slice(),
        }
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn get(&self, c: ChannelId) -> Message {
        self.contents[c.index()]
    }

    pub fn set(&mut self, c: ChannelId, m: Message) {
        self.contents[c.index()] = m;
    }

    /// True for the unique initial state: every channel empty.
    pub fn is_initial(&self) -> bool {
        self.contents.iter().all(|m| m.is_none())
    }

    pub fn contents(&self) -> &[Message] {
        &self.contents
    }
}

impl fmt::Display for NetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.contents.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match m {
                Some(n) => write!(f, "{n}")?,
                None => write!(f, "_")?,
            }
        }
        write!(f, ")")
    }
}

/// The three step kinds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Send,
    Process,
    Receive,
}

/// A labeled transition: which rule fired, for which message, between
/// which channels, driven by which node.
///
/// Send has only `to_channel`, receive only `from_channel`, process both.
/// The actor is the sending terminal, the forwarding node or the receiving
/// terminal respectively.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct TransitionStep {
    pub kind: StepKind,
    pub message: NodeId,
    pub from_channel: Option<ChannelId>,
    pub to_channel: Option<ChannelId>,
    pub actor: NodeId,
}

impl TransitionStep {
    pub fn send(actor: NodeId, message: NodeId, to: ChannelId) -> Self {
        TransitionStep {
            kind: StepKind::Send,
            message,
            from_channel: None,
            to_channel: Some(to),
            actor,
        }
    }

    pub fn process(actor: NodeId, message: NodeId, from: ChannelId, to: ChannelId) -> Self {
        TransitionStep {
            kind: StepKind::Process,
            message,
            from_channel: Some(from),
            to_channel: Some(to),
            actor,
        }
    }

    pub fn receive(actor: NodeId, message: NodeId, from: ChannelId) -> Self {
        TransitionStep {
            kind: StepKind::Receive,
            message,
            from_channel: Some(from),
            to_channel: None,
            actor,
        }
    }

    /// Human-readable rendering using the spec's channel names.
    pub fn describe(&self, spec: &NetworkSpec) -> String {
        let name = |c: Option<ChannelId>| c.map(|c| spec.channel_name(c).to_owned());
        match self.kind {
            StepKind::Send => format!(
                "send {} -> {} via {}",
                self.actor,
                self.message,
                name(self.to_channel).unwrap_or_default()
            ),
            StepKind::Process => format!(
                "process {} -> {} (msg {}) at node {}",
                name(self.from_channel).unwrap_or_default(),
                name(self.to_channel).unwrap_or_default(),
                self.message,
                self.actor
            ),
            StepKind::Receive => format!(
                "receive {} from {}",
                self.message,
                name(self.from_channel).unwrap_or_default()
            ),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepError {
    #[error("step is not enabled in this state")]
    NotEnabled,
    #[error("state dimension {got} does not match channel count {want}")]
    DimensionMismatch { got: usize, want: usize },
}

/// Enumerate the enabled steps of `s` in canonical order: sends sorted by
/// (actor, message), then processes by source channel, then receives by
/// source channel. The order fixes successor indexing, trace selection and
/// witness choice across runs.
pub fn enabled_steps(spec: &NetworkSpec, s: &NetState) -> Vec<TransitionStep> {
    let mut steps = Vec::new();
    for_each_enabled_step(spec, s, |t| steps.push(t));
    steps
}

/// Visitor form of [`enabled_steps`]; avoids the intermediate vector in
/// hot paths.
pub fn for_each_enabled_step(spec: &NetworkSpec, s: &NetState, mut f: impl FnMut(TransitionStep)) {
    debug_assert_eq!(s.len(), spec.channel_count());
    for &m in spec.terminals() {
        for &m2 in spec.terminals() {
            if m == m2 {
                continue;
            }
            if let Some(c) = spec.rout(m, m2) {
                if s.get(c).is_none() {
                    f(TransitionStep::send(m, m2, c));
                }
            }
        }
    }
    for c in spec.channel_ids() {
        if let Some(m) = s.get(c) {
            let target = spec.channel(c).target;
            if target != m {
                if let Some(next) = spec.rout(target, m) {
                    if s.get(next).is_none() {
                        f(TransitionStep::process(target, m, c, next));
                    }
                }
            }
        }
    }
    for c in spec.channel_ids() {
        if let Some(m) = s.get(c) {
            if spec.channel(c).target == m {
                f(TransitionStep::receive(m, m, c));
            }
        }
    }
}

/// True when at least one step of any kind is enabled.
pub fn has_any_step(spec: &NetworkSpec, s: &NetState) -> bool {
    let mut found = false;
    for &m in spec.terminals() {
        for &m2 in spec.terminals() {
            if m != m2 {
                if let Some(c) = spec.rout(m, m2) {
                    if s.get(c).is_none() {
                        found = true;
                    }
                }
            }
        }
        if found {
            return true;
        }
    }
    enabled_pr(spec, s)
}

/// True when at least one process or receive step is enabled.
pub fn enabled_pr(spec: &NetworkSpec, s: &NetState) -> bool {
    debug_assert_eq!(s.len(), spec.channel_count());
    for c in spec.channel_ids() {
        if let Some(m) = s.get(c) {
            let target = spec.channel(c).target;
            if target == m {
                return true;
            }
            if let Some(next) = spec.rout(target, m) {
                if s.get(next).is_none() {
                    return true;
                }
            }
        }
    }
    false
}

/// Check that `t` is enabled in `s`.
pub fn is_enabled(spec: &NetworkSpec, s: &NetState, t: &TransitionStep) -> bool {
    match t.kind {
        StepKind::Send => {
            let to = match t.to_channel {
                Some(c) if t.from_channel.is_none() => c,
                _ => return false,
            };
            spec.is_terminal(t.actor)
                && spec.is_terminal(t.message)
                && t.actor != t.message
                && spec.rout(t.actor, t.message) == Some(to)
                && s.get(to).is_none()
        }
        StepKind::Process => {
            let (from, to) = match (t.from_channel, t.to_channel) {
                (Some(f), Some(c)) if f != c => (f, c),
                _ => return false,
            };
            let target = spec.channel(from).target;
            s.get(from) == Some(t.message)
                && target != t.message
                && t.actor == target
                && spec.rout(target, t.message) == Some(to)
                && s.get(to).is_none()
        }
        StepKind::Receive => {
            let from = match t.from_channel {
                Some(c) if t.to_channel.is_none() => c,
                _ => return false,
            };
            s.get(from) == Some(t.message)
                && spec.channel(from).target == t.message
                && t.actor == t.message
        }
    }
}

/// Apply an enabled step. Fails with [`StepError::NotEnabled`] when the
/// step's preconditions do not hold in `s`.
pub fn apply(spec: &NetworkSpec, s: &NetState, t: &TransitionStep) -> Result<NetState, StepError> {
    if s.len() != spec.channel_count() {
        return Err(StepError::DimensionMismatch {
            got: s.len(),
            want: spec.channel_count(),
        });
    }
    if !is_enabled(spec, s, t) {
        return Err(StepError::NotEnabled);
    }
    Ok(apply_unchecked(s, t))
}

/// Apply without re-checking enabledness. Callers must have produced `t`
/// from an enumeration over `s`.
pub(crate) fn apply_unchecked(s: &NetState, t: &TransitionStep) -> NetState {
    let mut next = s.clone();
    if let Some(from) = t.from_channel {
        next.set(from, None);
    }
    if let Some(to) = t.to_channel {
        next.set(to, Some(t.message));
    }
    next
}

/// Reconstruct the unique step between a state and one of its successors
/// by diffing channel contents. Returns `None` when the pair differs in an
/// impossible way.
pub fn step_between(spec: &NetworkSpec, from: &NetState, to: &NetState) -> Option<TransitionStep> {
    let mut emptied = None;
    let mut filled = None;
    for c in spec.channel_ids() {
        match (from.get(c), to.get(c)) {
            (a, b) if a == b => {}
            (Some(m), None) => {
                if emptied.is_some() {
                    return None;
                }
                emptied = Some((c, m));
            }
            (None, Some(m)) => {
                if filled.is_some() {
                    return None;
                }
                filled = Some((c, m));
            }
            _ => return None,
        }
    }
    let step = match (emptied, filled) {
        (None, Some((c, m))) => TransitionStep::send(spec.channel(c).source, m, c),
        (Some((c, m)), None) => TransitionStep::receive(m, m, c),
        (Some((cf, mf)), Some((ct, mt))) if mf == mt => {
            TransitionStep::process(spec.channel(cf).target, mf, cf, ct)
        }
        _ => return None,
    };
    is_enabled(spec, from, &step).then_some(step)
}

/// The atomic propositions of a state: one `name=content` entry per
/// channel, empty channels included.
pub fn label(spec: &NetworkSpec, s: &NetState) -> Vec<String> {
    spec.channel_ids()
        .map(|c| match s.get(c) {
            Some(m) => format!("{}={}", spec.channel_name(c), m),
            None => format!("{}=⊥", spec.channel_name(c)),
        })
        .collect()
}
