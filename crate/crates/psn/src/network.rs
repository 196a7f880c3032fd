//! Static network description: nodes, terminals, channels and the routing
//! function, together with the analytics derived from them (hop counts,
//! next-channel chains, per-channel routable message sets, state weight).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::semantics::NetState;

/// Node identifier as written in the input description.
///
/// Identifiers are arbitrary positive integers; reports always show them
/// verbatim. Internally they are mapped to dense indices.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense index into the channel table of a [`NetworkSpec`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
#[serde(transparent)]
pub struct ChannelId(pub u32);

impl ChannelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Directed channel between two declared nodes.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct Channel {
    pub source: NodeId,
    pub target: NodeId,
}

/// Channel content: the destination terminal of the message it carries,
/// or `None` for an empty channel.
pub type Message = Option<NodeId>;

/// Errors from routing lookups and hop-count computations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    /// The routing function has no entry for this pair. Raised for lookups
    /// with `node == dest`, for destinations outside the terminal set, and
    /// for pairs an invalid description left unrouted.
    #[error("no route from node {node} to terminal {dest}")]
    RouteUndefined { node: NodeId, dest: NodeId },
    /// The message in this channel is already at its destination; there is
    /// no next channel for it.
    #[error("message for {dest} in channel {channel} is at its destination")]
    AtDestination { channel: ChannelId, dest: NodeId },
    /// Hop counting did not terminate, so routing cycles for this pair.
    #[error("routing never delivers messages for {dest} placed in channel {channel}")]
    RoutingCycle { channel: ChannelId, dest: NodeId },
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Errors raised while assembling a [`NetworkSpec`] from raw parts.
///
/// These are reference-level problems that leave no sensible spec to
/// validate. Semantic problems in a well-formed description (bad routing,
/// too few terminals) are reported by [`NetworkSpec::validate`] instead.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("node identifiers must be positive")]
    ZeroNodeId,
    #[error("node {0} is declared twice")]
    DuplicateNode(u32),
    #[error("terminal {0} is not a declared node")]
    UnknownTerminal(u32),
    #[error("channel {name} endpoint {node} is not a declared node")]
    UnknownEndpoint { name: String, node: u32 },
    #[error("channel name {0} is used twice")]
    DuplicateChannelName(String),
    #[error("parallel channel from {from} to {to}; at most one channel per ordered node pair")]
    ParallelChannel { from: u32, to: u32 },
    #[error("route references undeclared node {0}")]
    UnknownRouteNode(u32),
    #[error("route destination {0} is not a terminal")]
    RouteDestNotTerminal(u32),
    #[error("route from {0} to itself is not allowed")]
    SelfRoute(u32),
    #[error("route references unknown channel {0}")]
    UnknownRouteChannel(String),
    #[error("duplicate route for node {node} to terminal {dest}")]
    DuplicateRoute { node: u32, dest: u32 },
    #[error("no path from {from} to {to}; shortest-path routing impossible")]
    NoPath { from: u32, to: u32 },
    #[error("two equal-length shortest paths from {from} to {to}; refusing to pick one")]
    AmbiguousShortestPath { from: u32, to: u32 },
}

/// A single violated well-formedness or correctness condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// Fewer than two terminals.
    TooFewTerminals { count: usize },
    /// `rout(node, dest)` names a channel that does not leave `node`.
    SourceMismatch {
        node: NodeId,
        dest: NodeId,
        channel: ChannelId,
    },
    /// The routing function is missing an entry it must define.
    MissingRoute { node: NodeId, dest: NodeId },
    /// Following the routing function toward `dest` loops through `cycle`.
    RoutingCycle { dest: NodeId, cycle: Vec<NodeId> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewTerminals { count } => {
                write!(f, "only {count} terminal(s) declared; at least 2 required")
            }
            Violation::SourceMismatch {
                node,
                dest,
                channel,
            } => write!(
                f,
                "source mismatch: route from {node} to {dest} uses channel {channel} which does not leave {node}"
            ),
            Violation::MissingRoute { node, dest } => {
                write!(f, "incomplete routing: no route from {node} to {dest}")
            }
            Violation::RoutingCycle { dest, cycle } => {
                let path: Vec<String> = cycle.iter().map(|n| n.to_string()).collect();
                write!(
                    f,
                    "incorrect routing: messages for {dest} cycle through {}",
                    path.join(" -> ")
                )
            }
        }
    }
}

/// Outcome of [`NetworkSpec::validate`]: every violated condition, in a
/// fixed order. Empty means the description is valid and correct.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            writeln!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Result of following the routing function from one node toward one
/// destination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathResult {
    /// Destination reached after this many hops.
    Hops(u32),
    /// The walk revisited a node; the repeated segment.
    Cycle(Vec<NodeId>),
    /// The walk hit a pair with no routing entry.
    Undefined { node: NodeId },
}

/// Per-pair hop counts or detected routing cycles for a whole spec.
#[derive(Clone, Debug, Default)]
pub struct CorrectnessReport {
    entries: BTreeMap<(NodeId, NodeId), PathResult>,
}

impl CorrectnessReport {
    /// True when every (node, terminal) pair reaches its destination.
    pub fn is_correct(&self) -> bool {
        self.entries
            .values()
            .all(|r| matches!(r, PathResult::Hops(_)))
    }

    /// Hop count for a pair, if the destination is reached at all.
    pub fn hops(&self, node: NodeId, dest: NodeId) -> Option<u32> {
        match self.entries.get(&(node, dest)) {
            Some(PathResult::Hops(k)) => Some(*k),
            _ => None,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &PathResult)> {
        self.entries.iter()
    }

    /// Distinct routing cycles, one per (destination, cycle) pair.
    pub fn cycles(&self) -> Vec<(NodeId, Vec<NodeId>)> {
        let mut seen = BTreeSet::new();
        for ((_, dest), result) in &self.entries {
            if let PathResult::Cycle(cycle) = result {
                seen.insert((*dest, cycle.clone()));
            }
        }
        seen.into_iter().collect()
    }
}

/// Per-channel sets of destinations whose routes pass through the channel.
///
/// A message for `m` can only ever occupy channel `c` if `c` lies on the
/// routed path from some terminal toward `m`. The sets are the least ones
/// closed under injection at terminals and forwarding along next channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutableSets {
    sets: Vec<Vec<NodeId>>,
}

impl RoutableSets {
    /// Destinations routable through `c`, sorted ascending.
    pub fn routable(&self, c: ChannelId) -> &[NodeId] {
        &self.sets[c.index()]
    }

    pub fn contains(&self, c: ChannelId, m: NodeId) -> bool {
        self.sets[c.index()].binary_search(&m).is_ok()
    }
}

/// How the routing table of a spec is supplied.
pub enum RoutingSource<'a> {
    /// Explicit `(node, dest, channel name)` triples.
    Explicit(&'a [(u32, u32, String)]),
    /// Derive the table by breadth-first search; requires a unique shortest
    /// path for every routed pair.
    ShortestPath,
}

/// A packet switching network: nodes, terminals, channels and the routing
/// function. Immutable once built; all analytics borrow it.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    name: String,
    nodes: Vec<NodeId>,
    terminals: Vec<NodeId>,
    channels: Vec<Channel>,
    channel_names: Vec<String>,
    /// `node_dense * |terminals| + terminal_dense`, `None` where undefined.
    routing: Vec<Option<ChannelId>>,
}

impl NetworkSpec {
    /// Assemble a spec from raw parts. Reference errors (unknown
    /// identifiers, duplicate names, parallel channels) fail here; semantic
    /// problems are left for [`validate`](Self::validate) to report.
    pub fn from_parts(
        name: &str,
        nodes: &[u32],
        terminals: &[u32],
        channels: &[(String, u32, u32)],
        routing: RoutingSource<'_>,
    ) -> Result<Self, BuildError> {
        if nodes.iter().any(|&n| n == 0) {
            return Err(BuildError::ZeroNodeId);
        }
        let mut node_ids: Vec<NodeId> = nodes.iter().map(|&n| NodeId(n)).collect();
        node_ids.sort();
        for w in node_ids.windows(2) {
            if w[0] == w[1] {
                return Err(BuildError::DuplicateNode(w[0].0));
            }
        }

        let mut term_ids: Vec<NodeId> = terminals.iter().map(|&t| NodeId(t)).collect();
        term_ids.sort();
        term_ids.dedup();
        for t in &term_ids {
            if node_ids.binary_search(t).is_err() {
                return Err(BuildError::UnknownTerminal(t.0));
            }
        }

        let mut chans = Vec::with_capacity(channels.len());
        let mut names = Vec::with_capacity(channels.len());
        let mut by_name: BTreeMap<&str, ChannelId> = BTreeMap::new();
        let mut pairs = BTreeSet::new();
        for (i, (cname, src, dst)) in channels.iter().enumerate() {
            for end in [*src, *dst] {
                if node_ids.binary_search(&NodeId(end)).is_err() {
                    return Err(BuildError::UnknownEndpoint {
                        name: cname.clone(),
                        node: end,
                    });
                }
            }
            if by_name.insert(cname, ChannelId(i as u32)).is_some() {
                return Err(BuildError::DuplicateChannelName(cname.clone()));
            }
            if !pairs.insert((*src, *dst)) {
                return Err(BuildError::ParallelChannel {
                    from: *src,
                    to: *dst,
                });
            }
            chans.push(Channel {
                source: NodeId(*src),
                target: NodeId(*dst),
            });
            names.push(cname.clone());
        }

        let mut spec = NetworkSpec {
            name: name.to_owned(),
            nodes: node_ids,
            terminals: term_ids,
            channels: chans,
            channel_names: names,
            routing: Vec::new(),
        };
        spec.routing = vec![None; spec.nodes.len() * spec.terminals.len()];

        match routing {
            RoutingSource::Explicit(entries) => {
                for (n, m, cname) in entries {
                    let nd = spec
                        .node_dense(NodeId(*n))
                        .ok_or(BuildError::UnknownRouteNode(*n))?;
                    if n == m {
                        return Err(BuildError::SelfRoute(*n));
                    }
                    let md = spec
                        .terminal_dense(NodeId(*m))
                        .ok_or(BuildError::RouteDestNotTerminal(*m))?;
                    let c = *by_name
                        .get(cname.as_str())
                        .ok_or_else(|| BuildError::UnknownRouteChannel(cname.clone()))?;
                    let slot = &mut spec.routing[nd * spec.terminals.len() + md];
                    if slot.is_some() {
                        return Err(BuildError::DuplicateRoute { node: *n, dest: *m });
                    }
                    *slot = Some(c);
                }
            }
            RoutingSource::ShortestPath => {
                let terminals = spec.terminals.clone();
                for m in terminals {
                    let table = spec.shortest_path_routes(m)?;
                    let md = spec.terminal_dense(m).unwrap();
                    for (nd, c) in table.into_iter().enumerate() {
                        spec.routing[nd * spec.terminals.len() + md] = c;
                    }
                }
            }
        }
        Ok(spec)
    }

    /// Unique-shortest-path next channels toward `dest` for every node.
    /// `Ok(table)` is indexed by dense node index; the entry for `dest`
    /// itself is `None`.
    pub(crate) fn shortest_path_routes(
        &self,
        dest: NodeId,
    ) -> Result<Vec<Option<ChannelId>>, BuildError> {
        let n = self.nodes.len();
        let dd = self.node_dense(dest).expect("dest is a declared node");
        // Reverse BFS from dest gives hop distances.
        let mut dist = vec![u32::MAX; n];
        dist[dd] = 0;
        let mut queue = std::collections::VecDeque::from([dd]);
        while let Some(v) = queue.pop_front() {
            for (ci, ch) in self.channels.iter().enumerate() {
                let sd = self.node_dense(ch.source).unwrap();
                let td = self.node_dense(ch.target).unwrap();
                if td == v && dist[sd] == u32::MAX {
                    dist[sd] = dist[v] + 1;
                    queue.push_back(sd);
                }
                let _ = ci;
            }
        }
        let mut table = vec![None; n];
        for (nd, node) in self.nodes.iter().enumerate() {
            if nd == dd {
                continue;
            }
            if dist[nd] == u32::MAX {
                return Err(BuildError::NoPath {
                    from: node.0,
                    to: dest.0,
                });
            }
            let mut pick = None;
            for (ci, ch) in self.channels.iter().enumerate() {
                if ch.source == *node {
                    let td = self.node_dense(ch.target).unwrap();
                    if dist[td] != u32::MAX && dist[td] + 1 == dist[nd] {
                        if pick.is_some() {
                            return Err(BuildError::AmbiguousShortestPath {
                                from: node.0,
                                to: dest.0,
                            });
                        }
                        pick = Some(ChannelId(ci as u32));
                    }
                }
            }
            table[nd] = pick;
        }
        Ok(table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn terminals(&self) -> &[NodeId] {
        &self.terminals
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: ChannelId) -> Channel {
        self.channels[c.index()]
    }

    pub fn channel_name(&self, c: ChannelId) -> &str {
        &self.channel_names[c.index()]
    }

    pub fn channel_ids(&self) -> impl Iterator<Item = ChannelId> {
        (0..self.channels.len() as u32).map(ChannelId)
    }

    /// Channel between two nodes, if one is declared.
    pub fn channel_between(&self, source: NodeId, target: NodeId) -> Option<ChannelId> {
        self.channels
            .iter()
            .position(|ch| ch.source == source && ch.target == target)
            .map(|i| ChannelId(i as u32))
    }

    pub fn is_terminal(&self, n: NodeId) -> bool {
        self.terminals.binary_search(&n).is_ok()
    }

    pub(crate) fn node_dense(&self, n: NodeId) -> Option<usize> {
        self.nodes.binary_search(&n).ok()
    }

    pub(crate) fn terminal_dense(&self, m: NodeId) -> Option<usize> {
        self.terminals.binary_search(&m).ok()
    }

    /// Routing lookup. `None` when the pair has no entry, which includes
    /// `n == m` and destinations outside the terminal set.
    pub fn rout(&self, n: NodeId, m: NodeId) -> Option<ChannelId> {
        if n == m {
            return None;
        }
        let nd = self.node_dense(n)?;
        let md = self.terminal_dense(m)?;
        self.routing[nd * self.terminals.len() + md]
    }

    /// Explicit routing triples in deterministic order, for serialization.
    pub fn routing_entries(&self) -> Vec<(NodeId, NodeId, ChannelId)> {
        let mut out = Vec::new();
        for (nd, n) in self.nodes.iter().enumerate() {
            for (md, m) in self.terminals.iter().enumerate() {
                if let Some(c) = self.routing[nd * self.terminals.len() + md] {
                    out.push((*n, *m, c));
                }
            }
        }
        out
    }

    /// Report every violated well-formedness or correctness condition.
    /// Structural checks always run; the routing-cycle check runs only when
    /// the structure is sound enough to follow routes.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.terminals.len() < 2 {
            violations.push(Violation::TooFewTerminals {
                count: self.terminals.len(),
            });
        }
        for (nd, n) in self.nodes.iter().enumerate() {
            for (md, m) in self.terminals.iter().enumerate() {
                if n == m {
                    continue;
                }
                match self.routing[nd * self.terminals.len() + md] {
                    None => violations.push(Violation::MissingRoute { node: *n, dest: *m }),
                    Some(c) => {
                        if self.channel(c).source != *n {
                            violations.push(Violation::SourceMismatch {
                                node: *n,
                                dest: *m,
                                channel: c,
                            });
                        }
                    }
                }
            }
        }
        if violations.is_empty() {
            for (dest, cycle) in self.check_correct().cycles() {
                violations.push(Violation::RoutingCycle { dest, cycle });
            }
        }
        ValidationReport { violations }
    }

    /// For each terminal and node, the hop count to the destination or the
    /// routing cycle that prevents delivery. Walks are cut off after
    /// `|N|` hops; by then an unreached destination implies a revisit.
    pub fn check_correct(&self) -> CorrectnessReport {
        let mut entries = BTreeMap::new();
        for &m in &self.terminals {
            for &n in &self.nodes {
                entries.insert((n, m), self.follow_route(n, m));
            }
        }
        CorrectnessReport { entries }
    }

    fn follow_route(&self, n: NodeId, m: NodeId) -> PathResult {
        let mut cur = n;
        let mut visited = Vec::with_capacity(self.nodes.len() + 1);
        for k in 0..=self.nodes.len() as u32 {
            if cur == m {
                return PathResult::Hops(k);
            }
            visited.push(cur);
            match self.rout(cur, m) {
                Some(c) => cur = self.channel(c).target,
                None => return PathResult::Undefined { node: cur },
            }
        }
        // Pigeonhole: some node repeats within the first |N|+1 entries.
        let repeat = visited
            .iter()
            .position(|v| *v == cur)
            .expect("walk longer than |N| must revisit a node");
        let mut cycle = visited[repeat..].to_vec();
        // Rotate so the smallest node comes first, independent of start.
        let min = cycle
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .map(|(i, _)| i)
            .unwrap();
        cycle.rotate_left(min);
        PathResult::Cycle(cycle)
    }

    /// `target(rout(n, m))`: the node a message for `m` moves to next.
    pub fn next_hop(&self, n: NodeId, m: NodeId) -> Result<NodeId, NetError> {
        let c = self
            .rout(n, m)
            .ok_or(NetError::RouteUndefined { node: n, dest: m })?;
        Ok(self.channel(c).target)
    }

    /// `rout(target(c), m)`: the channel a message for `m` sitting in `c`
    /// is forwarded into. Undefined when the message is already deliverable.
    pub fn next_channel(&self, c: ChannelId, m: NodeId) -> Result<ChannelId, NetError> {
        let t = self.channel(c).target;
        if t == m {
            return Err(NetError::AtDestination { channel: c, dest: m });
        }
        self.rout(t, m)
            .ok_or(NetError::RouteUndefined { node: t, dest: m })
    }

    /// Remaining channel steps until the message in `c` is received:
    /// 0 for an empty slot, 1 when `c` targets the destination, otherwise
    /// one more than the count for the next channel. Bounded by `|C|` on
    /// correct networks; exceeding the bound reports a cycle.
    pub fn steps_to_dest(&self, c: ChannelId, msg: Message) -> Result<u32, NetError> {
        let m = match msg {
            None => return Ok(0),
            Some(m) => m,
        };
        let mut cur = c;
        let mut count = 0u32;
        loop {
            if self.channel(cur).target == m {
                return Ok(count + 1);
            }
            cur = self.next_channel(cur, m)?;
            count += 1;
            if count as usize > self.channel_count() + 1 {
                return Err(NetError::RoutingCycle { channel: c, dest: m });
            }
        }
    }

    /// Total remaining channel steps over all channels of a state. Strictly
    /// decreases under process and receive steps, which bounds every
    /// send-free run.
    pub fn weight(&self, s: &NetState) -> Result<u64, NetError> {
        assert_eq!(
            s.len(),
            self.channel_count(),
            "state dimension does not match channel count"
        );
        let mut total = 0u64;
        for c in self.channel_ids() {
            total += self.steps_to_dest(c, s.get(c))? as u64;
        }
        Ok(total)
    }

    /// Least per-channel destination sets closed under terminal injection
    /// and forwarding. Used to prune per-channel content alphabets; pruning
    /// is exact because reachable contents never leave these sets.
    pub fn routable_sets(&self) -> RoutableSets {
        let mut sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); self.channel_count()];
        let mut work: Vec<(ChannelId, NodeId)> = Vec::new();
        for &m in &self.terminals {
            for &m2 in &self.terminals {
                if m2 == m {
                    continue;
                }
                if let Some(c) = self.rout(m2, m) {
                    if sets[c.index()].insert(m) {
                        work.push((c, m));
                    }
                }
            }
        }
        while let Some((c, m)) = work.pop() {
            if self.channel(c).target == m {
                continue;
            }
            if let Ok(next) = self.next_channel(c, m) {
                if sets[next.index()].insert(m) {
                    work.push((next, m));
                }
            }
        }
        RoutableSets {
            sets: sets
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        }
    }
}
