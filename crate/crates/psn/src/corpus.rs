//! Builtin networks, the network description file format and its parser.
//!
//! File format, line oriented, `#` starts a comment:
//!
//! ```text
//! name: ring4
//! nodes: 1 2 3 4
//! terminals: 1 2 3 4
//! channel c1 1 -> 2
//! channel c2 2 -> 3
//! route 1 2 c1
//! route 1 3 c1
//! # or instead of route lines:
//! routing: shortest-path
//! ```
//!
//! Node lists accept spaces or commas. Explicit routing must cover every
//! (node, terminal) pair with distinct endpoints.

use std::fmt::Write as _;

use thiserror::Error;

use crate::network::{BuildError, NetworkSpec, NodeId, RoutingSource, ValidationReport};

/// The 27 directed edges of the 17-node builtin topology.
const GRID17_EDGES: [(u32, u32); 27] = [
    (1, 2),
    (2, 3),
    (3, 4),
    (3, 17),
    (4, 5),
    (4, 6),
    (5, 6),
    (6, 7),
    (7, 8),
    (7, 17),
    (8, 9),
    (8, 10),
    (9, 10),
    (10, 11),
    (11, 12),
    (11, 17),
    (12, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (15, 17),
    (16, 1),
    (16, 2),
    (17, 3),
    (17, 7),
    (17, 11),
    (17, 15),
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("network description is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error("unknown builtin network {0:?}; available: ring4, ring4-ex3, ring4-ex4, grid17")]
    UnknownBuiltin(String),
    #[error("builtin grid17 needs a terminal set (--terminals)")]
    TerminalsRequired,
    #[error("builtin {0:?} has a fixed terminal set")]
    TerminalsFixed(String),
}

/// Names accepted by [`builtin`].
pub fn builtin_names() -> &'static [&'static str] {
    &["ring4", "ring4-ex3", "ring4-ex4", "grid17"]
}

/// Construct a builtin network. The ring variants have fixed terminal
/// sets; `grid17` requires one.
pub fn builtin(name: &str, terminals: Option<&[u32]>) -> Result<NetworkSpec, CorpusError> {
    match name {
        "ring4" | "ring4-ex3" | "ring4-ex4" => {
            if terminals.is_some() {
                return Err(CorpusError::TerminalsFixed(name.to_owned()));
            }
            ring_variant(name)
        }
        "grid17" => {
            let terminals = terminals.ok_or(CorpusError::TerminalsRequired)?;
            grid17(terminals)
        }
        other => Err(CorpusError::UnknownBuiltin(other.to_owned())),
    }
}

/// Four nodes on a directed ring, all terminal, with `rout(n, m) = c_n`.
/// The `-ex3` variant adds a dedicated channel `c5: 3 -> 2` used only by
/// `rout(3, 2)`; the `-ex4` variant adds `c5: 2 -> 1` used only by
/// `rout(2, 1)`.
fn ring_variant(name: &str) -> Result<NetworkSpec, CorpusError> {
    let nodes = [1u32, 2, 3, 4];
    let mut channels: Vec<(String, u32, u32)> = (1..=4u32)
        .map(|i| (format!("c{i}"), i, i % 4 + 1))
        .collect();
    let extra = match name {
        "ring4" => None,
        "ring4-ex3" => Some((3u32, 2u32)),
        "ring4-ex4" => Some((2u32, 1u32)),
        _ => unreachable!(),
    };
    if let Some((src, dst)) = extra {
        channels.push(("c5".to_owned(), src, dst));
    }
    let mut routes = Vec::new();
    for n in 1..=4u32 {
        for m in 1..=4u32 {
            if n == m {
                continue;
            }
            let via = match extra {
                Some((src, dst)) if (n, m) == (src, dst) => "c5".to_owned(),
                _ => format!("c{n}"),
            };
            routes.push((n, m, via));
        }
    }
    let spec = NetworkSpec::from_parts(
        name,
        &nodes,
        &nodes,
        &channels,
        RoutingSource::Explicit(&routes),
    )?;
    let report = spec.validate();
    if !report.is_valid() {
        return Err(CorpusError::Invalid(report));
    }
    Ok(spec)
}

/// The 17-node, 27-channel topology with shortest-path routing toward the
/// given terminals. Channels are named `(src->dst)`. Shortest paths are
/// checked to be unique for every ordered node pair, not just the routed
/// ones, before the routing table is accepted.
fn grid17(terminals: &[u32]) -> Result<NetworkSpec, CorpusError> {
    let nodes: Vec<u32> = (1..=17).collect();
    let channels: Vec<(String, u32, u32)> = GRID17_EDGES
        .iter()
        .map(|&(s, t)| (format!("({s}->{t})"), s, t))
        .collect();
    let spec = NetworkSpec::from_parts(
        "grid17",
        &nodes,
        terminals,
        &channels,
        RoutingSource::ShortestPath,
    )?;
    debug_assert_eq!(spec.channel_count(), 27);
    for &dest in spec.nodes() {
        spec.shortest_path_routes(dest)?;
    }
    let report = spec.validate();
    if !report.is_valid() {
        return Err(CorpusError::Invalid(report));
    }
    Ok(spec)
}

/// Parse a network description. The spec is validated; descriptions with
/// violations are rejected with the full report.
pub fn parse_network(text: &str) -> Result<NetworkSpec, CorpusError> {
    let mut name = None;
    let mut nodes: Option<Vec<u32>> = None;
    let mut terminals: Option<Vec<u32>> = None;
    let mut channels: Vec<(String, u32, u32)> = Vec::new();
    let mut routes: Vec<(u32, u32, String)> = Vec::new();
    let mut shortest_path = false;

    let err = |line: usize, message: String| CorpusError::Parse { line, message };
    let parse_id = |line: usize, tok: &str| -> Result<u32, CorpusError> {
        tok.parse::<u32>()
            .map_err(|_| err(line, format!("expected a node identifier, got {tok:?}")))
    };
    let parse_id_list = |line: usize, rest: &str| -> Result<Vec<u32>, CorpusError> {
        rest.split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| parse_id(line, t))
            .collect()
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("name:") {
            name = Some(rest.trim().to_owned());
        } else if let Some(rest) = content.strip_prefix("nodes:") {
            nodes = Some(parse_id_list(line, rest)?);
        } else if let Some(rest) = content.strip_prefix("terminals:") {
            terminals = Some(parse_id_list(line, rest)?);
        } else if let Some(rest) = content.strip_prefix("routing:") {
            match rest.trim() {
                "shortest-path" => shortest_path = true,
                other => {
                    return Err(err(
                        line,
                        format!("unknown routing directive {other:?}; expected shortest-path"),
                    ))
                }
            }
        } else if let Some(rest) = content.strip_prefix("channel ") {
            // channel <name> <src> -> <dst>
            let mut parts = rest.split_whitespace();
            let cname = parts
                .next()
                .ok_or_else(|| err(line, "channel needs a name".into()))?;
            let src = parts
                .next()
                .ok_or_else(|| err(line, "channel needs a source node".into()))?;
            let arrow = parts.next();
            let dst = match arrow {
                Some("->") => parts
                    .next()
                    .ok_or_else(|| err(line, "channel needs a target node".into()))?,
                _ => return Err(err(line, "expected `channel <name> <src> -> <dst>`".into())),
            };
            if parts.next().is_some() {
                return Err(err(line, "trailing tokens after channel declaration".into()));
            }
            channels.push((cname.to_owned(), parse_id(line, src)?, parse_id(line, dst)?));
        } else if let Some(rest) = content.strip_prefix("route ") {
            // route <node> <dest> <channel>
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(err(line, "expected `route <node> <dest> <channel>`".into()));
            }
            routes.push((
                parse_id(line, parts[0])?,
                parse_id(line, parts[1])?,
                parts[2].to_owned(),
            ));
        } else {
            return Err(err(line, format!("unrecognized directive {content:?}")));
        }
    }

    let nodes = nodes.ok_or_else(|| err(0, "missing `nodes:` section".into()))?;
    let terminals = terminals.ok_or_else(|| err(0, "missing `terminals:` section".into()))?;
    if shortest_path && !routes.is_empty() {
        return Err(err(
            0,
            "explicit `route` lines conflict with `routing: shortest-path`".into(),
        ));
    }
    let source = if shortest_path {
        RoutingSource::ShortestPath
    } else {
        RoutingSource::Explicit(&routes)
    };
    let spec = NetworkSpec::from_parts(
        name.as_deref().unwrap_or("unnamed"),
        &nodes,
        &terminals,
        &channels,
        source,
    )?;
    let report = spec.validate();
    if !report.is_valid() {
        return Err(CorpusError::Invalid(report));
    }
    Ok(spec)
}

/// Canonical text form of a spec. Routing is always written explicitly,
/// so a serialized spec parses back to an equal one regardless of how its
/// table was produced.
pub fn serialize_network(spec: &NetworkSpec) -> String {
    let mut out = String::new();
    writeln!(out, "name: {}", spec.name()).unwrap();
    let ids = |xs: &[NodeId]| {
        xs.iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(out, "nodes: {}", ids(spec.nodes())).unwrap();
    writeln!(out, "terminals: {}", ids(spec.terminals())).unwrap();
    for c in spec.channel_ids() {
        let ch = spec.channel(c);
        writeln!(
            out,
            "channel {} {} -> {}",
            spec.channel_name(c),
            ch.source,
            ch.target
        )
        .unwrap();
    }
    for (n, m, c) in spec.routing_entries() {
        writeln!(out, "route {} {} {}", n, m, spec.channel_name(c)).unwrap();
    }
    out
}
