//! Deadlock detection over an explored state graph.
//!
//! Three notions are decided:
//!
//! * global: a reachable state with no enabled step at all;
//! * weak: a reachable non-initial state with no enabled process or
//!   receive step (only sends, or nothing, remain);
//! * local: a reachable state in which some non-empty channel holds the
//!   same message along every future.
//!
//! Absence claims need the complete reachable graph; witnesses found in a
//! truncated graph are still sound. Absence questions over an incomplete
//! graph come back as [`DeadlockStatus::Unknown`], never as a guess.

use std::collections::VecDeque;
use std::fmt;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::explore::{GraphError, StateGraph, StateIdx, Trace};
use crate::network::{ChannelId, NetworkSpec, NodeId};
use crate::semantics::{apply, enabled_steps, NetState, StepKind, TransitionStep};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Notion {
    Global,
    Weak,
    Local,
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Notion::Global => write!(f, "global"),
            Notion::Weak => write!(f, "weak"),
            Notion::Local => write!(f, "local"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeadlockStatus {
    /// A witness state was found; sound on any graph.
    Found,
    /// No witness exists; proven over a complete graph only.
    Absent,
    /// The graph was truncated before a verdict was possible.
    Unknown,
}

/// Verdict for one deadlock notion, with a replayable witness when found.
#[derive(Clone, Debug, PartialEq)]
pub struct DeadlockVerdict {
    pub notion: Notion,
    pub status: DeadlockStatus,
    /// Lowest-index witness in breadth-first order.
    pub witness: Option<StateIdx>,
    /// For local deadlocks, every (channel, message) pair of the witness
    /// whose content can never change again.
    pub witness_channels: Vec<(ChannelId, NodeId)>,
    pub trace: Option<Trace>,
    /// Whether the verdict was proven over a complete graph.
    pub exhaustive: bool,
}

impl DeadlockVerdict {
    pub fn found(&self) -> bool {
        self.status == DeadlockStatus::Found
    }

    fn new(notion: Notion, status: DeadlockStatus, exhaustive: bool) -> Self {
        DeadlockVerdict {
            notion,
            status,
            witness: None,
            witness_channels: Vec::new(),
            trace: None,
            exhaustive,
        }
    }

    fn with_witness(mut self, graph: &StateGraph, idx: StateIdx) -> Self {
        self.witness = Some(idx);
        self.trace = Some(graph.trace_to(idx).expect("witness index is stored"));
        self
    }
}

/// Exact deadlock state sets of a complete graph.
#[derive(Clone, Debug, Default)]
pub struct DeadlockSets {
    pub global: Vec<StateIdx>,
    pub weak: Vec<StateIdx>,
    pub local: Vec<StateIdx>,
}

/// Result of verifying the inclusion chain global ⊆ weak ⊆ local on a
/// complete graph.
#[derive(Clone, Debug)]
pub struct InclusionCheck {
    pub g_subset_w: bool,
    pub g_subset_l: bool,
    pub w_subset_l: bool,
    pub counterexamples: Vec<StateIdx>,
    pub global_count: usize,
    pub weak_count: usize,
    pub local_count: usize,
}

impl InclusionCheck {
    pub fn holds(&self) -> bool {
        self.g_subset_w && self.g_subset_l && self.w_subset_l
    }
}

/// Decide global deadlock: some reachable state without any enabled step,
/// equivalently a state whose only transition is the totalizing self-loop.
pub fn detect_global(graph: &StateGraph) -> DeadlockVerdict {
    let flags = graph.stuck_flags();
    match flags.no_step.iter().position(|&b| b) {
        Some(idx) => {
            DeadlockVerdict::new(Notion::Global, DeadlockStatus::Found, graph.is_complete())
                .with_witness(graph, idx as StateIdx)
        }
        None if graph.is_complete() => {
            DeadlockVerdict::new(Notion::Global, DeadlockStatus::Absent, true)
        }
        None => DeadlockVerdict::new(Notion::Global, DeadlockStatus::Unknown, false),
    }
}

/// Decide weak deadlock: some reachable non-initial state with no enabled
/// process or receive step.
pub fn detect_weak(graph: &StateGraph) -> DeadlockVerdict {
    let flags = graph.stuck_flags();
    match flags.pr_stuck.iter().skip(1).position(|&b| b) {
        Some(offset) => {
            let idx = (offset + 1) as StateIdx;
            DeadlockVerdict::new(Notion::Weak, DeadlockStatus::Found, graph.is_complete())
                .with_witness(graph, idx)
        }
        None if graph.is_complete() => {
            DeadlockVerdict::new(Notion::Weak, DeadlockStatus::Absent, true)
        }
        None => DeadlockVerdict::new(Notion::Weak, DeadlockStatus::Unknown, false),
    }
}

/// Decide local deadlock. The inner quantifier ranges over every future of
/// a state, so this requires a complete graph.
pub fn detect_local(graph: &StateGraph) -> Result<DeadlockVerdict, GraphError> {
    let local = local_flags(graph)?;
    let witness = match local.iter().position(|&b| b) {
        None => return Ok(DeadlockVerdict::new(Notion::Local, DeadlockStatus::Absent, true)),
        Some(idx) => idx as StateIdx,
    };
    let mut verdict = DeadlockVerdict::new(Notion::Local, DeadlockStatus::Found, true)
        .with_witness(graph, witness);
    verdict.witness_channels = deadlocked_channels(graph, witness)?;
    Ok(verdict)
}

/// The (channel, message) pairs of a state whose content survives every
/// future. Evaluated by one forward closure walk.
pub fn deadlocked_channels(
    graph: &StateGraph,
    idx: StateIdx,
) -> Result<Vec<(ChannelId, NodeId)>, GraphError> {
    let spec = graph.spec();
    let origin = graph.state(idx);
    let mut candidates: Vec<(ChannelId, NodeId)> = spec
        .channel_ids()
        .filter_map(|c| origin.get(c).map(|m| (c, m)))
        .collect();
    let mut visited = vec![false; graph.state_count()];
    visited[idx as usize] = true;
    let mut queue = VecDeque::from([idx]);
    while let Some(cur) = queue.pop_front() {
        let s = graph.state(cur);
        candidates.retain(|&(c, m)| s.get(c) == Some(m));
        if candidates.is_empty() {
            break;
        }
        for succ in graph.successor_indices(cur)? {
            if !visited[succ as usize] {
                visited[succ as usize] = true;
                queue.push_back(succ);
            }
        }
    }
    Ok(candidates)
}

/// Per-state local-deadlock flags over a complete graph.
///
/// For each (channel, message) candidate the set of states holding that
/// content is shrunk to its greatest subset closed under all successors:
/// a state is eliminated once any successor leaves the set, and the
/// elimination propagates along predecessor links. Survivors of any
/// candidate are locally deadlocked.
fn local_flags(graph: &StateGraph) -> Result<Vec<bool>, GraphError> {
    let spec = graph.spec();
    let csr = graph.successor_csr()?;
    let tcount = spec.terminal_count();

    // Bucket states by (channel, content); only observed pairs fill up.
    let mut buckets: Vec<Vec<StateIdx>> = vec![Vec::new(); spec.channel_count() * tcount];
    for (idx, s) in graph.states().enumerate() {
        for c in spec.channel_ids() {
            if let Some(m) = s.get(c) {
                let md = spec.terminal_dense(m).expect("contents are terminals");
                buckets[c.index() * tcount + md].push(idx as StateIdx);
            }
        }
    }

    let mut local = vec![false; graph.state_count()];
    for bucket in buckets.iter().filter(|b| !b.is_empty()) {
        let pos: FxHashMap<StateIdx, u32> = bucket
            .iter()
            .enumerate()
            .map(|(p, &idx)| (idx, p as u32))
            .collect();
        let mut alive = vec![true; bucket.len()];
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); bucket.len()];
        let mut queue: Vec<u32> = Vec::new();
        for (p, &idx) in bucket.iter().enumerate() {
            for &succ in csr.successors(idx) {
                match pos.get(&succ) {
                    Some(&q) => preds[q as usize].push(p as u32),
                    None => {
                        if alive[p] {
                            alive[p] = false;
                            queue.push(p as u32);
                        }
                    }
                }
            }
        }
        while let Some(dead) = queue.pop() {
            for &p in &preds[dead as usize] {
                if alive[p as usize] {
                    alive[p as usize] = false;
                    queue.push(p);
                }
            }
        }
        for (p, &idx) in bucket.iter().enumerate() {
            if alive[p] {
                local[idx as usize] = true;
            }
        }
    }
    Ok(local)
}

/// Greedily run process and receive steps from a local deadlock until none
/// is enabled. Each such step strictly decreases the state weight, so this
/// terminates within `weight` steps, and the resulting state is a weak
/// deadlock that preserves the deadlocked channel contents. Returns the
/// index of that state and the number of steps taken.
pub fn weak_from_local(
    graph: &StateGraph,
    local_witness: StateIdx,
) -> Result<(StateIdx, usize), GraphError> {
    if !graph.is_complete() {
        return Err(GraphError::Incomplete);
    }
    let spec = graph.spec();
    let mut s = graph.state(local_witness);
    let bound = spec
        .weight(&s)
        .expect("weight is defined on correct networks");
    let mut taken = 0usize;
    loop {
        let step = enabled_steps(spec, &s)
            .into_iter()
            .find(|t| t.kind != StepKind::Send);
        match step {
            None => break,
            Some(t) => {
                s = apply(spec, &s, &t).expect("enumerated step applies");
                taken += 1;
                assert!(
                    taken as u64 <= bound,
                    "send-free runs are bounded by the state weight"
                );
            }
        }
    }
    let idx = graph
        .find(&s)
        .expect("send-free descendants of a stored state are stored");
    Ok((idx, taken))
}

/// Exact global, weak and local state sets of a complete graph.
pub fn deadlock_sets(graph: &StateGraph) -> Result<DeadlockSets, GraphError> {
    if !graph.is_complete() {
        return Err(GraphError::Incomplete);
    }
    let flags = graph.stuck_flags();
    let local = local_flags(graph)?;
    let mut sets = DeadlockSets::default();
    for idx in 0..graph.state_count() {
        if flags.no_step[idx] {
            sets.global.push(idx as StateIdx);
        }
        if idx != 0 && flags.pr_stuck[idx] {
            sets.weak.push(idx as StateIdx);
        }
        if local[idx] {
            sets.local.push(idx as StateIdx);
        }
    }
    Ok(sets)
}

/// Verify the inclusion chain global ⊆ weak ⊆ local over the exact sets.
pub fn check_inclusions(graph: &StateGraph) -> Result<InclusionCheck, GraphError> {
    let sets = deadlock_sets(graph)?;
    let n = graph.state_count();
    let mut in_weak = vec![false; n];
    for &i in &sets.weak {
        in_weak[i as usize] = true;
    }
    let mut in_local = vec![false; n];
    for &i in &sets.local {
        in_local[i as usize] = true;
    }
    let mut counterexamples = Vec::new();
    let mut g_subset_w = true;
    let mut g_subset_l = true;
    let mut w_subset_l = true;
    for &g in &sets.global {
        if !in_weak[g as usize] {
            g_subset_w = false;
            counterexamples.push(g);
        }
        if !in_local[g as usize] {
            g_subset_l = false;
            counterexamples.push(g);
        }
    }
    for &w in &sets.weak {
        if !in_local[w as usize] {
            w_subset_l = false;
            counterexamples.push(w);
        }
    }
    counterexamples.sort_unstable();
    counterexamples.dedup();
    counterexamples.truncate(16);
    Ok(InclusionCheck {
        g_subset_w,
        g_subset_l,
        w_subset_l,
        counterexamples,
        global_count: sets.global.len(),
        weak_count: sets.weak.len(),
        local_count: sets.local.len(),
    })
}

/// Local and weak deadlocks exist together or not at all on a correct
/// network. Returns whether the two sets are consistent in that sense.
pub fn check_equiexistence(graph: &StateGraph) -> Result<bool, GraphError> {
    let sets = deadlock_sets(graph)?;
    Ok(sets.local.is_empty() == sets.weak.is_empty())
}

/// Targeted reachability search: build a trace that fills every listed
/// channel with the listed message, by injecting each message at a
/// terminal whose route passes through the target channel and forwarding
/// it there over empty channels. Fill orders are backtracked. Returns the
/// reached state and its trace, or `None` when no interleaving works.
pub fn seeded_witness_search(
    spec: &NetworkSpec,
    targets: &[(ChannelId, NodeId)],
) -> Option<(NetState, Trace)> {
    let initial = NetState::empty(spec.channel_count());
    let mut steps = Vec::new();
    let mut remaining: Vec<(ChannelId, NodeId)> = targets.to_vec();
    if fill_targets(spec, &initial, &mut remaining, &mut steps) {
        let trace = Trace { steps };
        let state = trace.replay(spec).expect("planned steps replay");
        Some((state, trace))
    } else {
        None
    }
}

fn fill_targets(
    spec: &NetworkSpec,
    state: &NetState,
    remaining: &mut Vec<(ChannelId, NodeId)>,
    steps: &mut Vec<TransitionStep>,
) -> bool {
    if remaining.is_empty() {
        return true;
    }
    for i in 0..remaining.len() {
        let (target_channel, message) = remaining[i];
        for &from in spec.terminals() {
            if from == message {
                continue;
            }
            let path = match route_through(spec, from, message, target_channel) {
                Some(p) => p,
                None => continue,
            };
            if path.iter().any(|&c| state.get(c).is_some()) {
                continue;
            }
            let mut next = state.clone();
            let depth = steps.len();
            steps.push(TransitionStep::send(from, message, path[0]));
            for w in path.windows(2) {
                steps.push(TransitionStep::process(
                    spec.channel(w[0]).target,
                    message,
                    w[0],
                    w[1],
                ));
            }
            for t in &steps[depth..] {
                next = match apply(spec, &next, t) {
                    Ok(n) => n,
                    Err(_) => unreachable!("planned path runs over empty channels"),
                };
            }
            let removed = remaining.remove(i);
            if fill_targets(spec, &next, remaining, steps) {
                return true;
            }
            remaining.insert(i, removed);
            steps.truncate(depth);
        }
    }
    false
}

/// The channel sequence a message for `m` injected at `from` traverses,
/// up to and including `through`, or `None` if its route misses that
/// channel.
fn route_through(
    spec: &NetworkSpec,
    from: NodeId,
    m: NodeId,
    through: ChannelId,
) -> Option<Vec<ChannelId>> {
    let mut c = spec.rout(from, m)?;
    let mut path = vec![c];
    for _ in 0..=spec.channel_count() {
        if c == through {
            return Some(path);
        }
        if spec.channel(c).target == m {
            return None;
        }
        c = spec.next_channel(c, m).ok()?;
        path.push(c);
    }
    None
}
