//! The line-oriented netlist format.
//!
//! ```text
//! # comment to end of line
//! node <id> kind=<pgm|pcm|pmm> [<param>=<value>]...
//! edge <id> from=<node> to=<node> R=<ohms> L=<henries>
//! ```
//!
//! Values are decimals with optional engineering suffixes (`u`, `m`, `k`,
//! `M`). Node parameter keys are limited to the kind's known set; anything
//! else is rejected rather than ignored, so a typo cannot silently fall back
//! to a default. Edges may reference nodes declared later in the file.

use super::{EdgeSpec, NodeId, NodeKind, NodeSpec, Topology};
use crate::error::ParseError;
use crate::units::{format_value, parse_value};

/// Parameter keys accepted on a generation node.
pub(crate) const PGM_KEYS: &[&str] = &[
    "l_ac", "r_ac", "c_ac", "f", "l_dc", "r_dc", "c_dc", "r_damp", "phi", "v_src_d", "v_src_q",
];

/// Parameter keys accepted on any load-bearing node.
pub(crate) const LOAD_KEYS: &[&str] = &["c_bus", "r_shunt", "v_floor"];

/// Additional keys accepted on a node with energy storage.
pub(crate) const ESS_KEYS: &[&str] = &["capacity_ah", "initial_ah", "w_track", "p_min", "p_max"];

pub(crate) fn allowed_keys(kind: NodeKind) -> Vec<&'static str> {
    match kind {
        NodeKind::Pgm => PGM_KEYS.to_vec(),
        NodeKind::Pcm => LOAD_KEYS.iter().chain(ESS_KEYS).copied().collect(),
        NodeKind::Pmm => LOAD_KEYS.to_vec(),
    }
}

/// Strips a `#` comment and surrounding whitespace.
pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => line[..pos].trim(),
        None => line.trim(),
    }
}

/// 1-based column of `token` within `line`, best effort.
fn column_of(line: &str, token: &str) -> usize {
    line.find(token).map(|p| p + 1).unwrap_or(1)
}

pub(crate) struct KeyValue<'a> {
    pub key: &'a str,
    pub raw: &'a str,
}

/// Splits a `key=value` token, reporting a syntax error otherwise.
pub(crate) fn split_key_value<'a>(
    token: &'a str,
    line_no: usize,
    line: &str,
) -> Result<KeyValue<'a>, ParseError> {
    match token.split_once('=') {
        Some((key, raw)) if !key.is_empty() && !raw.is_empty() => Ok(KeyValue { key, raw }),
        _ => Err(ParseError::syntax(
            line_no,
            column_of(line, token),
            format!("expected key=value, found '{token}'"),
        )),
    }
}

pub(crate) fn numeric_value(
    kv: &KeyValue<'_>,
    line_no: usize,
    line: &str,
) -> Result<f64, ParseError> {
    parse_value(kv.raw).ok_or_else(|| {
        ParseError::syntax(
            line_no,
            column_of(line, kv.raw),
            format!("'{}' is not a number (suffixes: u, m, k, M)", kv.raw),
        )
    })
}

struct PendingEdge {
    line_no: usize,
    id: String,
    from: String,
    to: String,
    resistance: f64,
    inductance: f64,
}

/// Incremental netlist reader, shared by the plain netlist parser and the
/// scenario parser (which interleaves node/edge lines with other stanzas).
pub(crate) struct NetlistBuilder {
    nodes: Vec<NodeSpec>,
    edges: Vec<PendingEdge>,
}

impl NetlistBuilder {
    pub(crate) fn new() -> Self {
        NetlistBuilder {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    /// Consumes one pre-stripped directive if it is a netlist line.
    /// Returns `Ok(false)` when the directive belongs to someone else.
    pub(crate) fn try_line(&mut self, line_no: usize, line: &str) -> Result<bool, ParseError> {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("node") => {
                self.node_line(line_no, line, tokens)?;
                Ok(true)
            }
            Some("edge") => {
                self.edge_line(line_no, line, tokens)?;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn node_line<'a>(
        &mut self,
        line_no: usize,
        line: &str,
        mut tokens: impl Iterator<Item = &'a str>,
    ) -> Result<(), ParseError> {
        let id = tokens
            .next()
            .ok_or_else(|| ParseError::syntax(line_no, line.len() + 1, "node id missing"))?;
        if id.contains('=') {
            return Err(ParseError::syntax(
                line_no,
                column_of(line, id),
                "node id must come before parameters",
            ));
        }
        if self.nodes.iter().any(|n| n.id == id) {
            return Err(ParseError::semantic(
                line_no,
                format!("duplicate node id '{id}'"),
            ));
        }

        let mut kind = None;
        let mut overrides: Vec<(String, f64)> = Vec::new();
        for token in tokens {
            let kv = split_key_value(token, line_no, line)?;
            if kv.key == "kind" {
                if kind.is_some() {
                    return Err(ParseError::semantic(line_no, "kind given twice"));
                }
                kind = Some(match kv.raw {
                    "pgm" => NodeKind::Pgm,
                    "pcm" => NodeKind::Pcm,
                    "pmm" => NodeKind::Pmm,
                    other => {
                        return Err(ParseError::semantic(
                            line_no,
                            format!("unknown node kind '{other}' (expected pgm, pcm, or pmm)"),
                        ))
                    }
                });
                continue;
            }
            let value = numeric_value(&kv, line_no, line)?;
            overrides.push((kv.key.to_string(), value));
        }

        let kind = kind.ok_or_else(|| {
            ParseError::semantic(
                line_no,
                format!("node '{id}' is missing kind=<pgm|pcm|pmm>"),
            )
        })?;

        let allowed = allowed_keys(kind);
        for (key, _) in &overrides {
            if !allowed.contains(&key.as_str()) {
                return Err(ParseError::semantic(
                    line_no,
                    format!(
                        "unknown key '{key}' for {} node '{id}' (allowed: {})",
                        kind.as_str(),
                        allowed.join(", ")
                    ),
                ));
            }
        }
        for (i, (key, _)) in overrides.iter().enumerate() {
            if overrides[..i].iter().any(|(k, _)| k == key) {
                return Err(ParseError::semantic(
                    line_no,
                    format!("key '{key}' given twice for node '{id}'"),
                ));
            }
        }

        self.nodes.push(NodeSpec {
            id: id.to_string(),
            kind,
            overrides,
        });
        Ok(())
    }

    fn edge_line<'a>(
        &mut self,
        line_no: usize,
        line: &str,
        mut tokens: impl Iterator<Item = &'a str>,
    ) -> Result<(), ParseError> {
        let id = tokens
            .next()
            .ok_or_else(|| ParseError::syntax(line_no, line.len() + 1, "edge id missing"))?;
        if id.contains('=') {
            return Err(ParseError::syntax(
                line_no,
                column_of(line, id),
                "edge id must come before parameters",
            ));
        }
        if self.edges.iter().any(|e| e.id == id) {
            return Err(ParseError::semantic(
                line_no,
                format!("duplicate edge id '{id}'"),
            ));
        }

        let mut from = None;
        let mut to = None;
        let mut resistance = None;
        let mut inductance = None;
        for token in tokens {
            let kv = split_key_value(token, line_no, line)?;
            match kv.key {
                "from" => from = Some(kv.raw.to_string()),
                "to" => to = Some(kv.raw.to_string()),
                "R" => resistance = Some(numeric_value(&kv, line_no, line)?),
                "L" => inductance = Some(numeric_value(&kv, line_no, line)?),
                other => {
                    return Err(ParseError::semantic(
                        line_no,
                        format!("unknown key '{other}' for edge '{id}' (allowed: from, to, R, L)"),
                    ))
                }
            }
        }

        let missing =
            |what: &str| ParseError::semantic(line_no, format!("edge '{id}' is missing {what}"));
        let from = from.ok_or_else(|| missing("from=<node>"))?;
        let to = to.ok_or_else(|| missing("to=<node>"))?;
        let resistance = resistance.ok_or_else(|| missing("R=<ohms>"))?;
        let inductance = inductance.ok_or_else(|| missing("L=<henries>"))?;

        if resistance <= 0.0 {
            return Err(ParseError::semantic(
                line_no,
                format!("edge '{id}' needs positive resistance, got {resistance}"),
            ));
        }
        if inductance <= 0.0 {
            return Err(ParseError::semantic(
                line_no,
                format!("edge '{id}' needs positive inductance, got {inductance}"),
            ));
        }
        if from == to {
            return Err(ParseError::semantic(
                line_no,
                format!("edge '{id}' connects node '{from}' to itself"),
            ));
        }

        self.edges.push(PendingEdge {
            line_no,
            id: id.to_string(),
            from,
            to,
            resistance,
            inductance,
        });
        Ok(())
    }

    /// Resolves edge endpoints and produces the topology.
    pub(crate) fn finish(self) -> Result<Topology, ParseError> {
        let nodes = self.nodes;
        let mut edges = Vec::with_capacity(self.edges.len());
        for pending in self.edges {
            let resolve = |name: &str| -> Result<NodeId, ParseError> {
                nodes
                    .iter()
                    .position(|n| n.id == name)
                    .map(NodeId)
                    .ok_or_else(|| {
                        ParseError::semantic(pending.line_no, format!("unknown node '{name}'"))
                    })
            };
            edges.push(EdgeSpec {
                from: resolve(&pending.from)?,
                to: resolve(&pending.to)?,
                id: pending.id,
                resistance: pending.resistance,
                inductance: pending.inductance,
            });
        }
        Topology::from_parse(nodes, edges)
    }
}

/// Parses complete netlist text into a [`Topology`].
pub fn parse_netlist(text: &str) -> Result<Topology, ParseError> {
    let mut builder = NetlistBuilder::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if !builder.try_line(line_no, line)? {
            let directive = line.split_whitespace().next().unwrap_or(line);
            return Err(ParseError::syntax(
                line_no,
                column_of(raw, directive),
                format!("unknown directive '{directive}' (expected node or edge)"),
            ));
        }
    }
    builder.finish()
}

/// Renders a topology as netlist text that parses back to an equal value.
pub(crate) fn serialize(topology: &Topology) -> String {
    let mut out = String::new();
    for (_, node) in topology.nodes() {
        out.push_str(&format!("node {} kind={}", node.id, node.kind.as_str()));
        for (key, value) in &node.overrides {
            out.push_str(&format!(" {key}={}", format_value(*value)));
        }
        out.push('\n');
    }
    for (_, edge) in topology.edges() {
        out.push_str(&format!(
            "edge {} from={} to={} R={} L={}\n",
            edge.id,
            topology.node(edge.from).id,
            topology.node(edge.to).id,
            format_value(edge.resistance),
            format_value(edge.inductance),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "\
# one generator, one load, one line
node g1 kind=pgm
node m1 kind=pmm c_bus=1m
edge e1 from=g1 to=m1 R=2m L=20u
";

    #[test]
    fn parses_minimal_netlist() {
        let t = parse_netlist(MINIMAL).unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.edge_count(), 1);
        assert_eq!(t.node(t.find_node("g1").unwrap()).kind, NodeKind::Pgm);
        let e = t.edge(t.find_edge("e1").unwrap());
        assert_eq!(e.resistance, 2e-3);
        assert_eq!(e.inductance, 20e-6);
        assert!(t.validate().is_ok());
    }

    #[test]
    fn forward_references_are_allowed() {
        let t =
            parse_netlist("edge e1 from=g1 to=m1 R=1m L=1u\nnode g1 kind=pgm\nnode m1 kind=pmm\n")
                .unwrap();
        assert_eq!(t.edge_count(), 1);
    }

    #[test]
    fn unknown_endpoint_is_semantic_error() {
        let err = parse_netlist("node g1 kind=pgm\nedge e1 from=g1 to=z9 R=1m L=1u\n").unwrap_err();
        match err {
            ParseError::Semantic { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown node 'z9'"), "{message}");
            }
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_semantic_error() {
        let err = parse_netlist("node g1 kind=pgm bogus=1\n").unwrap_err();
        assert!(
            matches!(err, ParseError::Semantic { line: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn ess_keys_are_rejected_on_plain_loads() {
        let err = parse_netlist("node m1 kind=pmm capacity_ah=10\n").unwrap_err();
        assert!(matches!(err, ParseError::Semantic { .. }), "{err:?}");
    }

    #[test]
    fn duplicate_node_id_is_semantic_error() {
        let err = parse_netlist("node a kind=pgm\nnode a kind=pmm\n").unwrap_err();
        assert!(
            matches!(err, ParseError::Semantic { line: 2, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn non_positive_line_parameters_are_rejected() {
        for bad in [
            "node a kind=pgm\nnode b kind=pmm\nedge e from=a to=b R=0 L=1u\n",
            "node a kind=pgm\nnode b kind=pmm\nedge e from=a to=b R=1m L=-1u\n",
        ] {
            assert!(matches!(
                parse_netlist(bad).unwrap_err(),
                ParseError::Semantic { line: 3, .. }
            ));
        }
    }

    #[test]
    fn self_loop_is_semantic_error() {
        let err = parse_netlist("node a kind=pgm\nedge e from=a to=a R=1m L=1u\n").unwrap_err();
        match err {
            ParseError::Semantic { message, .. } => {
                assert!(message.contains("itself"), "{message}")
            }
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_line_and_column() {
        let err = parse_netlist("node g1 kind=pgm\nwires everywhere\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::syntax(2, 1, "unknown directive 'wires' (expected node or edge)")
        );
    }

    #[test]
    fn bad_number_points_at_the_value() {
        let err = parse_netlist("node g1 kind=pgm l_ac=10x\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn serialization_round_trips() {
        let t = parse_netlist(MINIMAL).unwrap();
        let text = t.to_netlist();
        let reparsed = parse_netlist(&text).unwrap();
        assert_eq!(t, reparsed);
    }

    proptest! {
        /// Any topology the generator can produce survives
        /// serialize-then-parse unchanged.
        #[test]
        fn round_trip_random_topologies(
            n_loads in 1usize..5,
            n_pgms in 1usize..3,
            edge_seed in proptest::collection::vec((0usize..7, 0usize..7, 1e-4f64..1.0, 1e-6f64..1e-2), 1..8),
            params in proptest::collection::vec(1e-7f64..1e7, 4),
        ) {
            let mut nodes = Vec::new();
            for i in 0..n_pgms {
                nodes.push(NodeSpec {
                    id: format!("g{i}"),
                    kind: NodeKind::Pgm,
                    overrides: vec![("l_ac".to_string(), params[i % params.len()])],
                });
            }
            for i in 0..n_loads {
                nodes.push(NodeSpec {
                    id: format!("m{i}"),
                    kind: if i % 2 == 0 { NodeKind::Pcm } else { NodeKind::Pmm },
                    overrides: vec![("c_bus".to_string(), params[(i + 1) % params.len()])],
                });
            }
            let count = nodes.len();
            let mut edges = Vec::new();
            for (k, (a, b, r, l)) in edge_seed.into_iter().enumerate() {
                let from = a % count;
                let to = b % count;
                if from == to {
                    continue;
                }
                edges.push(EdgeSpec {
                    id: format!("e{k}"),
                    from: NodeId(from),
                    to: NodeId(to),
                    resistance: r,
                    inductance: l,
                });
            }
            let topology = Topology::new(nodes, edges);
            let reparsed = parse_netlist(&topology.to_netlist()).unwrap();
            prop_assert_eq!(topology, reparsed);
        }
    }
}
