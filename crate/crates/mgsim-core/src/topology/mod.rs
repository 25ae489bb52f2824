//! Network structure: power-module nodes joined by RL line edges.
//!
//! The connection convention is strict: modules (nodes) never touch each
//! other directly — every adjacency goes through a line (edge), and lines
//! never connect to lines. Nodes own a voltage state, lines own a current
//! state, so every signal that crosses a component boundary is backed by an
//! integrator and the network is free of algebraic loops by construction.
//! [`Topology::evaluation_order`] materializes that argument as a checked
//! per-step schedule.
//!
//! Edge current sign convention: positive current flows from `from` to `to`.
//! A generator's injection is the sum of currents leaving it minus those
//! entering; a load's delivery is the reverse.

pub(crate) mod netlist;

pub use netlist::parse_netlist;

use crate::error::ParseError;
use thiserror::Error;

/// Index of a node within its [`Topology`], in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Index of an edge within its [`Topology`], in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub(crate) usize);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What a node is, which fixes both its state block and its role in KCL
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Power generation module: rectified three-phase source, six states.
    Pgm,
    /// Power conversion module: bus capacitance with a load and shunt
    /// energy storage.
    Pcm,
    /// Power-consuming module: bus capacitance with a load only.
    Pmm,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Pgm => "pgm",
            NodeKind::Pcm => "pcm",
            NodeKind::Pmm => "pmm",
        }
    }

    /// True for node kinds that consume power (have a bus-capacitor load).
    pub fn is_load(self) -> bool {
        matches!(self, NodeKind::Pcm | NodeKind::Pmm)
    }
}

/// A declared node: identity, kind, and raw parameter overrides.
///
/// Overrides are kept as written (key/value, declaration order) so a
/// topology can be serialized back to netlist text verbatim; they are
/// resolved against defaults when a scenario is built.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub overrides: Vec<(String, f64)>,
}

/// A declared RL line between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub from: NodeId,
    pub to: NodeId,
    /// Series resistance in ohms; must be positive.
    pub resistance: f64,
    /// Series inductance in henries; must be positive.
    pub inductance: f64,
}

/// An immutable node/edge graph. Construction is permissive — structural
/// problems are reported by [`Topology::validate`], not hidden behind a
/// constructor error — but simulation refuses topologies with findings.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<NodeSpec>,
    edges: Vec<EdgeSpec>,
}

/// Problems found by [`Topology::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// Node has no incident edge; it would be simulated in isolation.
    IsolatedNode {
        node: String,
    },
    /// Edge starts and ends on the same node. Modules may only be joined
    /// through a line between two distinct modules.
    SelfLoop {
        edge: String,
    },
    /// An edge endpoint does not name a node of this topology.
    DanglingEndpoint {
        edge: String,
    },
    NonPositiveResistance {
        edge: String,
        value: f64,
    },
    NonPositiveInductance {
        edge: String,
        value: f64,
    },
    DuplicateNodeId {
        id: String,
    },
    DuplicateEdgeId {
        id: String,
    },
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Finding::IsolatedNode { node } => write!(f, "node '{node}' has no incident line"),
            Finding::SelfLoop { edge } => {
                write!(f, "edge '{edge}' connects a node to itself")
            }
            Finding::DanglingEndpoint { edge } => {
                write!(f, "edge '{edge}' references a node outside this topology")
            }
            Finding::NonPositiveResistance { edge, value } => {
                write!(f, "edge '{edge}' has non-positive resistance {value} ohm")
            }
            Finding::NonPositiveInductance { edge, value } => {
                write!(f, "edge '{edge}' has non-positive inductance {value} H")
            }
            Finding::DuplicateNodeId { id } => write!(f, "duplicate node id '{id}'"),
            Finding::DuplicateEdgeId { id } => write!(f, "duplicate edge id '{id}'"),
        }
    }
}

/// Outcome of structural validation: empty means simulable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.findings.is_empty() {
            return write!(f, "ok");
        }
        for (i, finding) in self.findings.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Errors from topology queries.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TopologyError {
    #[error("unknown node id '{0}'")]
    UnknownNode(String),
    #[error("edge current vector has {got} entries, topology has {expected} edges")]
    CurrentLength { expected: usize, got: usize },
    #[error("causality violation: {0}")]
    Causality(String),
}

impl Topology {
    pub fn new(nodes: Vec<NodeSpec>, edges: Vec<EdgeSpec>) -> Self {
        Topology { nodes, edges }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeSpec)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &EdgeSpec)> {
        self.edges.iter().enumerate().map(|(i, e)| (EdgeId(i), e))
    }

    pub fn node(&self, id: NodeId) -> &NodeSpec {
        &self.nodes[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> &EdgeSpec {
        &self.edges[id.0]
    }

    pub fn find_node(&self, id: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.id == id).map(NodeId)
    }

    pub fn find_edge(&self, id: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.id == id).map(EdgeId)
    }

    /// Edges incident to `node`, in declaration order.
    pub fn edges_at(&self, node: NodeId) -> impl Iterator<Item = (EdgeId, &EdgeSpec)> {
        self.edges()
            .filter(move |(_, e)| e.from == node || e.to == node)
    }

    /// Checks the connection convention: no isolated nodes, no self-loops,
    /// positive line parameters, well-formed endpoints, unique ids.
    pub fn validate(&self) -> ValidationReport {
        let mut findings = Vec::new();

        for (i, node) in self.nodes.iter().enumerate() {
            if self.nodes[..i].iter().any(|other| other.id == node.id) {
                findings.push(Finding::DuplicateNodeId {
                    id: node.id.clone(),
                });
            }
        }
        for (i, edge) in self.edges.iter().enumerate() {
            if self.edges[..i].iter().any(|other| other.id == edge.id) {
                findings.push(Finding::DuplicateEdgeId {
                    id: edge.id.clone(),
                });
            }
        }

        let mut degree = vec![0usize; self.nodes.len()];
        for edge in &self.edges {
            if edge.from.0 >= self.nodes.len() || edge.to.0 >= self.nodes.len() {
                findings.push(Finding::DanglingEndpoint {
                    edge: edge.id.clone(),
                });
                continue;
            }
            if edge.from == edge.to {
                findings.push(Finding::SelfLoop {
                    edge: edge.id.clone(),
                });
            }
            degree[edge.from.0] += 1;
            degree[edge.to.0] += 1;
            if edge.resistance <= 0.0 {
                findings.push(Finding::NonPositiveResistance {
                    edge: edge.id.clone(),
                    value: edge.resistance,
                });
            }
            if edge.inductance <= 0.0 {
                findings.push(Finding::NonPositiveInductance {
                    edge: edge.id.clone(),
                    value: edge.inductance,
                });
            }
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if degree[i] == 0 {
                findings.push(Finding::IsolatedNode {
                    node: node.id.clone(),
                });
            }
        }

        ValidationReport { findings }
    }

    /// Sum of edge currents leaving `node` minus those entering it.
    ///
    /// This raw signed sum is orientation-free bookkeeping: summed over all
    /// nodes it cancels edge by edge.
    pub fn signed_current_sum(
        &self,
        node: NodeId,
        edge_currents: &[f64],
    ) -> Result<f64, TopologyError> {
        if edge_currents.len() != self.edges.len() {
            return Err(TopologyError::CurrentLength {
                expected: self.edges.len(),
                got: edge_currents.len(),
            });
        }
        if node.0 >= self.nodes.len() {
            return Err(TopologyError::UnknownNode(format!("#{}", node.0)));
        }
        let mut sum = 0.0;
        for (i, edge) in self.edges.iter().enumerate() {
            if edge.from == node {
                sum += edge_currents[i];
            }
            if edge.to == node {
                sum -= edge_currents[i];
            }
        }
        Ok(sum)
    }

    /// KCL injection oriented by the node's role: for a generator, the
    /// current drawn from it into the network; for a load, the current
    /// delivered to it.
    pub fn node_injection_current(
        &self,
        node: NodeId,
        edge_currents: &[f64],
    ) -> Result<f64, TopologyError> {
        let raw = self.signed_current_sum(node, edge_currents)?;
        Ok(match self.node(node).kind {
            NodeKind::Pgm => raw,
            NodeKind::Pcm | NodeKind::Pmm => -raw,
        })
    }

    /// Same as [`Topology::node_injection_current`] but addressed by name.
    pub fn node_injection_current_by_id(
        &self,
        node: &str,
        edge_currents: &[f64],
    ) -> Result<f64, TopologyError> {
        let id = self
            .find_node(node)
            .ok_or_else(|| TopologyError::UnknownNode(node.to_string()))?;
        self.node_injection_current(id, edge_currents)
    }

    /// Builds the per-step evaluation schedule and proves it causal.
    ///
    /// The order is fixed and declaration-stable: read all node voltages
    /// (states), evaluate all edge derivatives from them, accumulate KCL
    /// sums from edge current states, then evaluate node derivatives from
    /// those sums. Because each consumed signal is state-backed, the
    /// schedule contains no same-step algebraic coupling; `verify` fails
    /// loudly if a future component kind ever introduces one.
    pub fn evaluation_order(&self) -> Result<Schedule, TopologyError> {
        let mut tasks = Vec::with_capacity(3 * self.nodes.len() + self.edges.len());
        for i in 0..self.nodes.len() {
            tasks.push(Task::ReadNodeVoltage(NodeId(i)));
        }
        for i in 0..self.edges.len() {
            tasks.push(Task::EdgeDerivative(EdgeId(i)));
        }
        for i in 0..self.nodes.len() {
            tasks.push(Task::AccumulateKcl(NodeId(i)));
        }
        for i in 0..self.nodes.len() {
            tasks.push(Task::NodeDerivative(NodeId(i)));
        }
        let schedule = Schedule { tasks };
        schedule.verify(self)?;
        Ok(schedule)
    }

    /// Renders the topology back to netlist text. `parse_netlist` on the
    /// result reproduces the topology exactly.
    pub fn to_netlist(&self) -> String {
        netlist::serialize(self)
    }

    pub(crate) fn from_parse(
        nodes: Vec<NodeSpec>,
        edges: Vec<EdgeSpec>,
    ) -> Result<Self, ParseError> {
        Ok(Topology { nodes, edges })
    }

    /// Merges parameter overrides into a node's entry, replacing existing
    /// keys so repeated directives never accumulate duplicates.
    pub(crate) fn apply_overrides(&mut self, node: NodeId, pairs: &[(String, f64)]) {
        let spec = &mut self.nodes[node.0];
        for (key, value) in pairs {
            match spec.overrides.iter_mut().find(|(k, _)| k == key) {
                Some(entry) => entry.1 = *value,
                None => spec.overrides.push((key.clone(), *value)),
            }
        }
    }
}

/// One unit of work in the per-step schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Publish a node's output voltage from its state block.
    ReadNodeVoltage(NodeId),
    /// Evaluate an edge's current derivative from published node voltages.
    EdgeDerivative(EdgeId),
    /// Sum incident edge current states into the node's KCL injection.
    AccumulateKcl(NodeId),
    /// Evaluate a node's state derivatives from its KCL sum and held
    /// control commands.
    NodeDerivative(NodeId),
}

/// How a signal consumed during the step came to exist. Anything a task
/// consumes must be `State` or `StateAggregate`; an `AlgebraicOutput`
/// consumed in the step that produced it would be an algebraic loop hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SignalOrigin {
    State,
    StateAggregate,
    #[allow(dead_code)] // no current component produces one; the verifier guards the future
    AlgebraicOutput,
}

/// A verified, deterministic per-step evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    tasks: Vec<Task>,
}

impl Schedule {
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    /// Builds a schedule without verification, for diagnostics and tests.
    pub fn from_tasks(tasks: Vec<Task>) -> Self {
        Schedule { tasks }
    }

    /// Checks that the schedule covers every node and edge exactly once per
    /// phase and that every consumed signal is available and state-backed
    /// by the time it is consumed.
    pub fn verify(&self, topology: &Topology) -> Result<(), TopologyError> {
        let n = topology.node_count();
        let m = topology.edge_count();
        let mut voltage_seen = vec![false; n];
        let mut kcl_seen = vec![false; n];
        let mut node_deriv_seen = vec![false; n];
        let mut edge_deriv_seen = vec![false; m];
        // Signal table: what each task may consume and where it came from.
        let mut voltage_origin: Vec<Option<SignalOrigin>> = vec![None; n];
        let mut kcl_origin: Vec<Option<SignalOrigin>> = vec![None; n];

        let fail = |msg: String| Err(TopologyError::Causality(msg));

        for task in &self.tasks {
            match *task {
                Task::ReadNodeVoltage(node) => {
                    if node.0 >= n || voltage_seen[node.0] {
                        return fail(format!(
                            "voltage of node #{} scheduled twice or out of range",
                            node.0
                        ));
                    }
                    voltage_seen[node.0] = true;
                    voltage_origin[node.0] = Some(SignalOrigin::State);
                }
                Task::EdgeDerivative(edge) => {
                    if edge.0 >= m || edge_deriv_seen[edge.0] {
                        return fail(format!("edge #{} scheduled twice or out of range", edge.0));
                    }
                    edge_deriv_seen[edge.0] = true;
                    let spec = topology.edge(edge);
                    for endpoint in [spec.from, spec.to] {
                        match voltage_origin.get(endpoint.0).copied().flatten() {
                            Some(SignalOrigin::State) => {}
                            Some(SignalOrigin::AlgebraicOutput) => {
                                return fail(format!(
                                    "edge '{}' consumes an algebraic voltage produced this step",
                                    spec.id
                                ));
                            }
                            _ => {
                                return fail(format!(
                                    "edge '{}' consumes voltage of node #{} before it is read",
                                    spec.id, endpoint.0
                                ));
                            }
                        }
                    }
                }
                Task::AccumulateKcl(node) => {
                    if node.0 >= n || kcl_seen[node.0] {
                        return fail(format!(
                            "KCL of node #{} scheduled twice or out of range",
                            node.0
                        ));
                    }
                    kcl_seen[node.0] = true;
                    // Edge currents are read from state directly; the sum is an
                    // aggregate of states, not an algebraic output.
                    kcl_origin[node.0] = Some(SignalOrigin::StateAggregate);
                }
                Task::NodeDerivative(node) => {
                    if node.0 >= n || node_deriv_seen[node.0] {
                        return fail(format!(
                            "derivative of node #{} scheduled twice or out of range",
                            node.0
                        ));
                    }
                    node_deriv_seen[node.0] = true;
                    match kcl_origin.get(node.0).copied().flatten() {
                        Some(SignalOrigin::State) | Some(SignalOrigin::StateAggregate) => {}
                        Some(SignalOrigin::AlgebraicOutput) => {
                            return fail(format!(
                                "node '{}' consumes an algebraic KCL sum produced this step",
                                topology.node(node).id
                            ));
                        }
                        None => {
                            return fail(format!(
                                "node '{}' consumes its KCL sum before it is accumulated",
                                topology.node(node).id
                            ));
                        }
                    }
                }
            }
        }

        if !voltage_seen.iter().all(|&s| s)
            || !kcl_seen.iter().all(|&s| s)
            || !node_deriv_seen.iter().all(|&s| s)
            || !edge_deriv_seen.iter().all(|&s| s)
        {
            return fail("schedule does not cover every node and edge".to_string());
        }
        Ok(())
    }

    /// Deterministic textual form; byte-identical across runs for the same
    /// topology.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for task in &self.tasks {
            match *task {
                Task::ReadNodeVoltage(n) => out.push_str(&format!("read_voltage {}\n", n.0)),
                Task::EdgeDerivative(e) => out.push_str(&format!("edge_derivative {}\n", e.0)),
                Task::AccumulateKcl(n) => out.push_str(&format!("accumulate_kcl {}\n", n.0)),
                Task::NodeDerivative(n) => out.push_str(&format!("node_derivative {}\n", n.0)),
            }
        }
        out
    }
}
