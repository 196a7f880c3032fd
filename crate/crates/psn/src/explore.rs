//! Reachable state graph construction.
//!
//! Exploration is a level-synchronized breadth-first search from the unique
//! all-empty initial state. Each level is expanded in fixed-size chunks:
//! successor generation for a chunk is data parallel (rayon, behind the
//! `parallel` feature), while deduplication and index assignment happen
//! sequentially in frontier order. State indexing, parent links and witness
//! selection are therefore identical regardless of worker count.
//!
//! States are stored packed. Every channel gets a code alphabet from its
//! routable destination set (0 means empty), and the codes are packed into
//! a single 128-bit word when they fit, or one byte per channel otherwise.
//! The routable restriction is exact: reachable contents never leave the
//! routable sets, which the test suite checks against unpruned exploration.

use std::fmt;
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::network::{ChannelId, NetworkSpec, NodeId};
use crate::semantics::{
    apply, enabled_steps, step_between, NetState, StepError, TransitionStep,
};

/// Index of a state in a [`StateGraph`]. Index 0 is the initial state.
pub type StateIdx = u32;

const NO_PARENT: StateIdx = StateIdx::MAX;

/// Chunk of the frontier expanded (possibly in parallel) before merging.
const CHUNK: usize = 16 * 1024;

/// Resource limits for one exploration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    /// Stop after storing this many states. Must be positive when present.
    pub max_states: Option<usize>,
    /// Stop after this much wall-clock time. Must be positive when present.
    pub max_seconds: Option<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_states: Some(50_000_000),
            max_seconds: Some(600.0),
        }
    }
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget {
            max_states: None,
            max_seconds: None,
        }
    }
}

/// Which content alphabet each channel is packed with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PackingMode {
    /// Per-channel routable destination sets. Exact for reachable states.
    #[default]
    Routable,
    /// Every terminal for every channel. Used to cross-check pruning.
    FullAlphabet,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExploreOptions {
    pub budget: Budget,
    /// 0 uses the process-wide rayon pool, 1 forces sequential expansion,
    /// any other value runs a dedicated pool of that size. Ignored without
    /// the `parallel` feature.
    pub workers: usize,
    pub packing: PackingMode,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("state index {0} is not in the graph")]
    UnknownState(StateIdx),
    #[error("state graph is incomplete; universal analysis over it would be unsound")]
    Incomplete,
}

/// Replayable step sequence from the initial state to some target state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TransitionStep>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Replay from the all-empty state, failing if any step is disabled.
    pub fn replay(&self, spec: &NetworkSpec) -> Result<NetState, StepError> {
        let mut s = NetState::empty(spec.channel_count());
        for t in &self.steps {
            s = apply(spec, &s, t)?;
        }
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// State packing

struct ChannelCoder {
    /// Bit offset in the narrow representation.
    offset: u32,
    /// Bit width; 0 when the channel can never hold a message.
    bits: u32,
    /// code-1 -> destination terminal.
    decode: Vec<NodeId>,
    /// code-1 -> dense terminal index.
    decode_dense: Vec<usize>,
}

pub(crate) struct Packer {
    coders: Vec<ChannelCoder>,
    total_bits: u32,
}

impl Packer {
    pub(crate) fn new(spec: &NetworkSpec, mode: PackingMode) -> Self {
        let routable = spec.routable_sets();
        let mut coders = Vec::with_capacity(spec.channel_count());
        let mut offset = 0u32;
        for c in spec.channel_ids() {
            let alphabet: Vec<NodeId> = match mode {
                PackingMode::Routable => routable.routable(c).to_vec(),
                PackingMode::FullAlphabet => spec.terminals().to_vec(),
            };
            assert!(
                alphabet.len() < 256,
                "more than 255 routable destinations on one channel"
            );
            let bits = usize::BITS - alphabet.len().leading_zeros();
            let decode_dense = alphabet
                .iter()
                .map(|m| spec.terminal_dense(*m).expect("routable dest is a terminal"))
                .collect();
            coders.push(ChannelCoder {
                offset,
                bits,
                decode: alphabet,
                decode_dense,
            });
            offset += bits;
        }
        Packer {
            coders,
            total_bits: offset,
        }
    }

    fn narrow(&self) -> bool {
        self.total_bits <= 128
    }

    fn code_of(&self, c: usize, m: NodeId) -> Option<u8> {
        self.coders[c]
            .decode
            .binary_search(&m)
            .ok()
            .map(|i| (i + 1) as u8)
    }

    fn message_of(&self, c: usize, code: u8) -> Option<NodeId> {
        if code == 0 {
            None
        } else {
            Some(self.coders[c].decode[code as usize - 1])
        }
    }
}

/// Packed representation of a state, generic over narrow and wide storage.
pub(crate) trait Key: Sized + Eq + std::hash::Hash + Clone + Send + Sync {
    fn pack(packer: &Packer, s: &NetState) -> Self;
    fn code(&self, packer: &Packer, c: usize) -> u8;
    /// Write `code` into channel `c`, which may hold anything.
    fn with_code(&self, packer: &Packer, c: usize, code: u8) -> Self;

    fn unpack(&self, packer: &Packer) -> NetState {
        NetState::from_contents(
            (0..packer.coders.len())
                .map(|c| packer.message_of(c, self.code(packer, c)))
                .collect(),
        )
    }
}

impl Key for u128 {
    fn pack(packer: &Packer, s: &NetState) -> Self {
        let mut bits = 0u128;
        for (c, coder) in packer.coders.iter().enumerate() {
            if let Some(m) = s.get(ChannelId(c as u32)) {
                let code = packer
                    .code_of(c, m)
                    .expect("state content outside the channel alphabet");
                bits |= (code as u128) << coder.offset;
            }
        }
        bits
    }

    fn code(&self, packer: &Packer, c: usize) -> u8 {
        let coder = &packer.coders[c];
        ((self >> coder.offset) & ((1u128 << coder.bits) - 1)) as u8
    }

    fn with_code(&self, packer: &Packer, c: usize, code: u8) -> Self {
        let coder = &packer.coders[c];
        let mask = ((1u128 << coder.bits) - 1) << coder.offset;
        (self & !mask) | ((code as u128) << coder.offset)
    }
}

impl Key for Box<[u8]> {
    fn pack(packer: &Packer, s: &NetState) -> Self {
        (0..packer.coders.len())
            .map(|c| match s.get(ChannelId(c as u32)) {
                Some(m) => packer
                    .code_of(c, m)
                    .expect("state content outside the channel alphabet"),
                None => 0,
            })
            .collect()
    }

    fn code(&self, _packer: &Packer, c: usize) -> u8 {
        self[c]
    }

    fn with_code(&self, _packer: &Packer, c: usize, code: u8) -> Self {
        let mut next = self.clone();
        next[c] = code;
        next
    }
}

// ---------------------------------------------------------------------------
// Precomputed expansion tables

/// Routing analytics flattened into code-level tables so that successor
/// generation runs on packed states without hash or search lookups. The
/// enumeration order matches [`enabled_steps`] exactly; the test suite
/// cross-checks the two paths.
struct ExpandTables {
    /// Send instances in canonical (actor, message) order: target channel
    /// and the message code it receives.
    sends: Vec<(usize, u8)>,
    /// Per channel, the code whose message is deliverable at the target.
    /// 0 when no routable message is.
    receive_code: Vec<u8>,
    /// Per channel and content code, the forwarding destination as
    /// (next channel, code there). `None` for deliverable contents.
    forward: Vec<Vec<Option<(usize, u8)>>>,
}

impl ExpandTables {
    fn new(spec: &NetworkSpec, packer: &Packer) -> Self {
        let mut sends = Vec::new();
        for &m in spec.terminals() {
            for &m2 in spec.terminals() {
                if m == m2 {
                    continue;
                }
                if let Some(c) = spec.rout(m, m2) {
                    let code = packer
                        .code_of(c.index(), m2)
                        .expect("send destination is routable on its injection channel");
                    sends.push((c.index(), code));
                }
            }
        }
        let mut receive_code = Vec::with_capacity(spec.channel_count());
        let mut forward = Vec::with_capacity(spec.channel_count());
        for c in spec.channel_ids() {
            let target = spec.channel(c).target;
            let mut recv = 0u8;
            let mut fwd = Vec::new();
            for (i, &m) in packer.coders[c.index()].decode.iter().enumerate() {
                let code = (i + 1) as u8;
                if m == target {
                    recv = code;
                    fwd.push(None);
                } else {
                    let next = spec
                        .next_channel(c, m)
                        .expect("routable content has a next channel");
                    let next_code = packer
                        .code_of(next.index(), m)
                        .expect("forwarded content stays routable");
                    fwd.push(Some((next.index(), next_code)));
                }
            }
            receive_code.push(recv);
            forward.push(fwd);
        }
        ExpandTables {
            sends,
            receive_code,
            forward,
        }
    }

    /// Successors of `key` in canonical order: sends, processes, receives.
    fn expand<K: Key>(&self, packer: &Packer, key: &K, out: &mut Vec<K>) {
        let n = packer.coders.len();
        let mut buf = [0u8; 64];
        let mut heap = Vec::new();
        let codes: &mut [u8] = if n <= 64 {
            &mut buf[..n]
        } else {
            heap.resize(n, 0);
            &mut heap
        };
        for (c, slot) in codes.iter_mut().enumerate() {
            *slot = key.code(packer, c);
        }
        let codes = &*codes;
        for &(c, code) in &self.sends {
            if codes[c] == 0 {
                out.push(key.with_code(packer, c, code));
            }
        }
        for (c, &code) in codes.iter().enumerate() {
            if code != 0 && code != self.receive_code[c] {
                if let Some((next, next_code)) = self.forward[c][code as usize - 1] {
                    if codes[next] == 0 {
                        out.push(
                            key.with_code(packer, c, 0).with_code(packer, next, next_code),
                        );
                    }
                }
            }
        }
        for (c, &code) in codes.iter().enumerate() {
            if code != 0 && code == self.receive_code[c] {
                out.push(key.with_code(packer, c, 0));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Graph storage

struct Core<K: Key> {
    states: Vec<K>,
    index: FxHashMap<K, StateIdx>,
}

impl<K: Key> Core<K> {
    fn new() -> Self {
        Core {
            states: Vec::new(),
            index: FxHashMap::default(),
        }
    }

    fn insert_new(&mut self, key: K) -> StateIdx {
        let idx = self.states.len() as StateIdx;
        self.index.insert(key.clone(), idx);
        self.states.push(key);
        idx
    }
}

enum Inner {
    Narrow(Core<u128>),
    Wide(Core<Box<[u8]>>),
}

/// The explored fragment of the reachable state space.
///
/// State 0 is the all-empty initial state. Parent links form a tree rooted
/// there, recorded at first discovery, so parent-chain replay yields a
/// breadth-first-minimal trace. Successor lists are recomputed on demand
/// from the semantics rather than stored.
pub struct StateGraph {
    spec: NetworkSpec,
    packer: Packer,
    inner: Inner,
    parents: Vec<StateIdx>,
    /// Per channel, a bitmask over dense terminal indices of contents that
    /// occur in some stored state.
    seen: Vec<u64>,
    complete: bool,
}

impl StateGraph {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn state_count(&self) -> usize {
        match &self.inner {
            Inner::Narrow(core) => core.states.len(),
            Inner::Wide(core) => core.states.len(),
        }
    }

    /// True when exploration exhausted the frontier within budget and
    /// without an early stop.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Unpack a stored state. Panics on an out-of-range index.
    pub fn state(&self, idx: StateIdx) -> NetState {
        match &self.inner {
            Inner::Narrow(core) => core.states[idx as usize].unpack(&self.packer),
            Inner::Wide(core) => core.states[idx as usize].unpack(&self.packer),
        }
    }

    /// Index of a state, if it was stored.
    pub fn find(&self, s: &NetState) -> Option<StateIdx> {
        match &self.inner {
            Inner::Narrow(core) => {
                let key: u128 = Key::pack(&self.packer, s);
                core.index.get(&key).copied()
            }
            Inner::Wide(core) => {
                let key: Box<[u8]> = Key::pack(&self.packer, s);
                core.index.get(&key).copied()
            }
        }
    }

    pub fn states(&self) -> impl Iterator<Item = NetState> + '_ {
        (0..self.state_count() as StateIdx).map(|i| self.state(i))
    }

    /// Parent at first discovery; `None` for the initial state.
    pub fn parent(&self, idx: StateIdx) -> Option<StateIdx> {
        match self.parents[idx as usize] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    /// True when some stored state has this channel content.
    pub fn content_seen(&self, c: ChannelId, m: NodeId) -> bool {
        match self.spec.terminal_dense(m) {
            Some(d) => self.seen[c.index()] & (1 << d) != 0,
            None => false,
        }
    }

    /// BFS depth of a state, which equals the length of its trace.
    pub fn depth(&self, idx: StateIdx) -> Result<usize, GraphError> {
        if idx as usize >= self.state_count() {
            return Err(GraphError::UnknownState(idx));
        }
        let mut depth = 0;
        let mut cur = idx;
        while let Some(p) = self.parent(cur) {
            depth += 1;
            cur = p;
        }
        Ok(depth)
    }

    /// Parent-chain trace from the initial state to `idx`.
    pub fn trace_to(&self, idx: StateIdx) -> Result<Trace, GraphError> {
        if idx as usize >= self.state_count() {
            return Err(GraphError::UnknownState(idx));
        }
        let mut chain = vec![idx];
        let mut cur = idx;
        while let Some(p) = self.parent(cur) {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        let steps = chain
            .windows(2)
            .map(|w| {
                step_between(&self.spec, &self.state(w[0]), &self.state(w[1]))
                    .expect("parent links connect states one step apart")
            })
            .collect();
        Ok(Trace { steps })
    }

    /// Outgoing edges of a stored state, recomputed from the semantics.
    /// Requires a complete graph so that every successor resolves.
    pub fn edges(&self, idx: StateIdx) -> Result<Vec<(TransitionStep, StateIdx)>, GraphError> {
        if !self.complete {
            return Err(GraphError::Incomplete);
        }
        if idx as usize >= self.state_count() {
            return Err(GraphError::UnknownState(idx));
        }
        let s = self.state(idx);
        Ok(enabled_steps(&self.spec, &s)
            .into_iter()
            .map(|t| {
                let succ = crate::semantics::apply_unchecked(&s, &t);
                let si = self
                    .find(&succ)
                    .expect("successor of a stored state is stored in a complete graph");
                (t, si)
            })
            .collect())
    }

    /// Successor indices only; same contract as [`edges`](Self::edges).
    pub fn successor_indices(&self, idx: StateIdx) -> Result<Vec<StateIdx>, GraphError> {
        Ok(self.edges(idx)?.into_iter().map(|(_, i)| i).collect())
    }

    /// Forward closure of a state along stored edges, itself included,
    /// in breadth-first order. Requires a complete graph.
    pub fn successors_from(&self, idx: StateIdx) -> Result<Vec<StateIdx>, GraphError> {
        if !self.complete {
            return Err(GraphError::Incomplete);
        }
        if idx as usize >= self.state_count() {
            return Err(GraphError::UnknownState(idx));
        }
        let mut visited = vec![false; self.state_count()];
        visited[idx as usize] = true;
        let mut order = vec![idx];
        let mut head = 0;
        while head < order.len() {
            let cur = order[head];
            head += 1;
            for succ in self.successor_indices(cur)? {
                if !visited[succ as usize] {
                    visited[succ as usize] = true;
                    order.push(succ);
                }
            }
        }
        Ok(order)
    }
}

/// Per-state stuckness flags, computed on the packed representation:
/// `no_step[i]` means state `i` enables nothing at all, `pr_stuck[i]` that
/// it enables no process or receive step.
pub(crate) struct StuckFlags {
    pub(crate) no_step: Vec<bool>,
    pub(crate) pr_stuck: Vec<bool>,
}

fn scan_stuck<K: Key>(core: &Core<K>, packer: &Packer, tables: &ExpandTables) -> StuckFlags {
    let mut send_channels: Vec<usize> = tables.sends.iter().map(|&(c, _)| c).collect();
    send_channels.sort_unstable();
    send_channels.dedup();
    let n = packer.coders.len();
    let mut no_step = Vec::with_capacity(core.states.len());
    let mut pr_stuck = Vec::with_capacity(core.states.len());
    let mut codes = vec![0u8; n];
    for key in &core.states {
        for (c, slot) in codes.iter_mut().enumerate() {
            *slot = key.code(packer, c);
        }
        let mut pr = true;
        for (c, &code) in codes.iter().enumerate() {
            if code != 0 {
                if code == tables.receive_code[c] {
                    pr = false;
                    break;
                }
                if let Some((next, _)) = tables.forward[c][code as usize - 1] {
                    if codes[next] == 0 {
                        pr = false;
                        break;
                    }
                }
            }
        }
        let can_send = send_channels.iter().any(|&c| codes[c] == 0);
        no_step.push(pr && !can_send);
        pr_stuck.push(pr);
    }
    StuckFlags { no_step, pr_stuck }
}

impl StateGraph {
    pub(crate) fn stuck_flags(&self) -> StuckFlags {
        let tables = ExpandTables::new(&self.spec, &self.packer);
        match &self.inner {
            Inner::Narrow(core) => scan_stuck(core, &self.packer, &tables),
            Inner::Wide(core) => scan_stuck(core, &self.packer, &tables),
        }
    }
}

/// Flattened successor adjacency of a complete graph.
pub(crate) struct Csr {
    offsets: Vec<usize>,
    targets: Vec<StateIdx>,
}

impl Csr {
    pub(crate) fn successors(&self, idx: StateIdx) -> &[StateIdx] {
        &self.targets[self.offsets[idx as usize]..self.offsets[idx as usize + 1]]
    }
}

impl StateGraph {
    /// Successor lists for every state at once, recomputed through the
    /// packed fast path. Requires a complete graph.
    pub(crate) fn successor_csr(&self) -> Result<Csr, GraphError> {
        if !self.complete {
            return Err(GraphError::Incomplete);
        }
        let tables = ExpandTables::new(&self.spec, &self.packer);
        Ok(match &self.inner {
            Inner::Narrow(core) => build_csr(core, &self.packer, &tables),
            Inner::Wide(core) => build_csr(core, &self.packer, &tables),
        })
    }
}

fn build_csr<K: Key>(core: &Core<K>, packer: &Packer, tables: &ExpandTables) -> Csr {
    let mut offsets = Vec::with_capacity(core.states.len() + 1);
    offsets.push(0);
    let mut targets = Vec::new();
    let mut succs = Vec::new();
    for key in &core.states {
        succs.clear();
        tables.expand(packer, key, &mut succs);
        for s in &succs {
            targets.push(
                *core
                    .index
                    .get(s)
                    .expect("complete graph stores every successor"),
            );
        }
        offsets.push(targets.len());
    }
    Csr { offsets, targets }
}

impl fmt::Debug for StateGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateGraph")
            .field("network", &self.spec.name())
            .field("states", &self.state_count())
            .field("complete", &self.complete)
            .finish()
    }
}

// ---------------------------------------------------------------------------
// Exploration

/// Explore the reachable states of a valid, correct spec.
pub fn explore(spec: &NetworkSpec, opts: &ExploreOptions) -> StateGraph {
    explore_impl(spec, opts, None).0
}

/// Explore with an on-state predicate. Exploration stops at the first
/// state satisfying the hook (evaluated in discovery order, the initial
/// state included) and returns its index; the graph is then marked
/// incomplete. A budget stop returns no witness.
pub fn explore_until(
    spec: &NetworkSpec,
    opts: &ExploreOptions,
    mut hook: impl FnMut(&NetState) -> bool,
) -> (StateGraph, Option<StateIdx>) {
    explore_impl(spec, opts, Some(&mut hook))
}

fn explore_impl(
    spec: &NetworkSpec,
    opts: &ExploreOptions,
    hook: Option<&mut dyn FnMut(&NetState) -> bool>,
) -> (StateGraph, Option<StateIdx>) {
    debug_assert!(
        spec.validate().is_valid(),
        "exploration requires a valid, correct spec"
    );
    if let Some(n) = opts.budget.max_states {
        assert!(n > 0, "state budget must be positive");
    }
    if let Some(s) = opts.budget.max_seconds {
        assert!(s > 0.0, "time budget must be positive");
    }
    assert!(
        spec.terminal_count() <= 64,
        "at most 64 terminals are supported"
    );

    let packer = Packer::new(spec, opts.packing);
    let tables = ExpandTables::new(spec, &packer);
    if packer.narrow() && spec.channel_count() <= 64 {
        let (core, parents, seen, complete, witness) =
            explore_core::<u128>(spec, &packer, &tables, opts, hook);
        (
            StateGraph {
                spec: spec.clone(),
                packer,
                inner: Inner::Narrow(core),
                parents,
                seen,
                complete,
            },
            witness,
        )
    } else {
        let (core, parents, seen, complete, witness) =
            explore_core::<Box<[u8]>>(spec, &packer, &tables, opts, hook);
        (
            StateGraph {
                spec: spec.clone(),
                packer,
                inner: Inner::Wide(core),
                parents,
                seen,
                complete,
            },
            witness,
        )
    }
}

fn explore_core<K: Key>(
    spec: &NetworkSpec,
    packer: &Packer,
    tables: &ExpandTables,
    opts: &ExploreOptions,
    mut hook: Option<&mut dyn FnMut(&NetState) -> bool>,
) -> (Core<K>, Vec<StateIdx>, Vec<u64>, bool, Option<StateIdx>) {
    let start = Instant::now();
    let deadline = opts
        .budget
        .max_seconds
        .map(|s| start + Duration::from_secs_f64(s));
    let max_states = opts.budget.max_states.unwrap_or(usize::MAX);

    let mut core = Core::new();
    let mut parents = Vec::new();
    let mut seen = vec![0u64; spec.channel_count()];

    let initial = NetState::empty(spec.channel_count());
    core.insert_new(K::pack(packer, &initial));
    parents.push(NO_PARENT);
    if let Some(h) = hook.as_deref_mut() {
        if h(&initial) {
            return (core, parents, seen, false, Some(0));
        }
    }

    #[cfg(feature = "parallel")]
    let pool = match opts.workers {
        0 | 1 => None,
        n => rayon::ThreadPoolBuilder::new().num_threads(n).build().ok(),
    };

    let mut frontier: Vec<StateIdx> = vec![0];
    let mut complete = true;
    let mut witness = None;

    'levels: while !frontier.is_empty() {
        let mut next_frontier = Vec::new();
        for chunk in frontier.chunks(CHUNK) {
            // Expansion phase: read-only, order-preserving, parallelizable.
            let expand_one = |&idx: &StateIdx| {
                let mut succs = Vec::new();
                tables.expand(packer, &core.states[idx as usize], &mut succs);
                succs
            };
            #[cfg(feature = "parallel")]
            let expanded: Vec<Vec<K>> = if opts.workers != 1 && chunk.len() >= 128 {
                match &pool {
                    Some(p) => p.install(|| chunk.par_iter().map(expand_one).collect()),
                    None => chunk.par_iter().map(expand_one).collect(),
                }
            } else {
                chunk.iter().map(expand_one).collect()
            };
            #[cfg(not(feature = "parallel"))]
            let expanded: Vec<Vec<K>> = chunk.iter().map(expand_one).collect();

            // Merge phase: sequential, in frontier order.
            for (local, succs) in expanded.into_iter().enumerate() {
                let parent = chunk[local];
                for key in succs {
                    if core.index.contains_key(&key) {
                        continue;
                    }
                    if core.states.len() >= max_states {
                        complete = false;
                        break 'levels;
                    }
                    for (c, mask) in seen.iter_mut().enumerate() {
                        let code = key.code(packer, c);
                        if code != 0 {
                            *mask |= 1 << packer.coders[c].decode_dense[code as usize - 1];
                        }
                    }
                    let idx = core.insert_new(key);
                    parents.push(parent);
                    next_frontier.push(idx);
                    if let Some(h) = hook.as_deref_mut() {
                        if h(&core.states[idx as usize].unpack(packer)) {
                            complete = false;
                            witness = Some(idx);
                            break 'levels;
                        }
                    }
                }
            }
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    complete = false;
                    break 'levels;
                }
            }
        }
        frontier = next_frontier;
    }
    (core, parents, seen, complete, witness)
}
