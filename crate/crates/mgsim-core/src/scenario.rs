//! Scenario files: a netlist plus everything needed to run it.
//!
//! A scenario extends the netlist grammar with stanzas, one directive per
//! line, in any order:
//!
//! ```text
//! netlist <path>                  # external topology, relative to this file
//! node/edge ...                   # or the topology inline
//! duration <seconds>
//! solver dt=10u method=rk4 decimation=100 init=nominal [control_period=<s>]
//! droop rbase=2 vref=12k wmeas=10 # global droop design
//! droop <pgm> weight=5 [r=<ohm>] [wmeas=<rad/s>]  # per-generator share
//! secondary vstar=12k main=<node> kp=0.05 ki=2 [shift_min=..] [shift_max=..]
//! rectifier kp=0 ki=1e-3 [v_ref_d=..] [v_ref_q=..]
//! ess mode=highpass rate=1        # global storage compensation
//! ess <pcm> [mode=..] [rate=..] [zone=<load>,<load>,...]
//! profile <load> <step|ramp|hold> t=<s> P=<W>
//! override <node> <key>=<value>...
//! ```
//!
//! Loading resolves every default, so a [`Scenario`] is self-contained:
//! serializing it with [`Scenario::to_text`] and reloading reproduces the
//! same simulation byte for byte.

use crate::components::{EssParams, LoadParams, PgmParams};
use crate::control::{DroopConfig, StorageMode};
use crate::error::ParseError;
use crate::solver::{InitMode, Method, SolverConfig};
use crate::topology::netlist::{
    allowed_keys, numeric_value, split_key_value, strip_comment, NetlistBuilder,
};
use crate::topology::{NodeId, NodeKind, Topology};
use crate::units::{format_value, parse_value};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

/// Failure to load a scenario.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// How a load's commanded power changes at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Jump to the level at `t_start` (left-closed: the new level applies
    /// at the boundary instant itself).
    Step,
    /// Ramp linearly from the previous level, reaching this level at the
    /// next segment's start. A trailing ramp behaves as a step.
    Ramp,
    /// Keep the level; a marker for explicit plateaus.
    Hold,
}

impl SegmentKind {
    fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Step => "step",
            SegmentKind::Ramp => "ramp",
            SegmentKind::Hold => "hold",
        }
    }
}

/// One scheduled point of a load profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub kind: SegmentKind,
    pub level_w: f64,
}

/// Piecewise power schedule for one load. Zero before the first segment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadProfile {
    segments: Vec<Segment>,
}

impl LoadProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self, String> {
        for (i, seg) in segments.iter().enumerate() {
            if !seg.t_start.is_finite() || seg.t_start < 0.0 {
                return Err(format!(
                    "segment time {} must be finite and >= 0",
                    seg.t_start
                ));
            }
            if !seg.level_w.is_finite() || seg.level_w < 0.0 {
                return Err(format!(
                    "segment level {} must be finite and >= 0",
                    seg.level_w
                ));
            }
            if i > 0 && segments[i - 1].t_start >= seg.t_start {
                return Err(format!(
                    "segment times must be strictly increasing ({} then {})",
                    segments[i - 1].t_start,
                    seg.t_start
                ));
            }
        }
        Ok(LoadProfile { segments })
    }

    pub fn constant(level_w: f64) -> Self {
        LoadProfile {
            segments: vec![Segment {
                t_start: 0.0,
                kind: SegmentKind::Step,
                level_w,
            }],
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Commanded power at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        // Active segment: the last one whose start is <= t (left-closed).
        let idx = match self.segments.iter().rposition(|s| s.t_start <= t) {
            Some(i) => i,
            None => return 0.0,
        };
        let seg = &self.segments[idx];
        match seg.kind {
            SegmentKind::Step | SegmentKind::Hold => seg.level_w,
            SegmentKind::Ramp => {
                let from = if idx == 0 {
                    0.0
                } else {
                    self.segments[idx - 1].level_w
                };
                match self.segments.get(idx + 1) {
                    Some(next) if next.t_start > seg.t_start => {
                        let frac = (t - seg.t_start) / (next.t_start - seg.t_start);
                        from + (seg.level_w - from) * frac.clamp(0.0, 1.0)
                    }
                    _ => seg.level_w,
                }
            }
        }
    }

    /// Times at which the commanded power changes its definition.
    pub fn change_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().map(|s| s.t_start)
    }
}

/// Resolved per-generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmSettings {
    pub node: NodeId,
    pub params: PgmParams,
    pub droop: DroopConfig,
    pub weight: f64,
    /// Pole (rad/s) of the low-pass filter on the measured output current
    /// feeding the droop law and the conduction-drop feedforward.
    pub meas_rate: f64,
    pub rect_kp: f64,
    pub rect_ki: f64,
    /// AC-side voltage references used by the rectifier feedforward.
    pub v_ref_d: f64,
    pub v_ref_q: f64,
}

/// Resolved per-storage settings (conversion-module nodes only).
#[derive(Debug, Clone, PartialEq)]
pub struct StorageSettings {
    pub params: EssParams,
    pub mode: StorageMode,
    /// Energy-management filter rate (1/s); the advertised storage
    /// response.
    pub filter_rate: f64,
    /// Load nodes whose commanded power this storage compensates.
    pub zone: Vec<NodeId>,
}

/// Resolved per-load settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSettings {
    pub node: NodeId,
    pub params: LoadParams,
    pub profile: LoadProfile,
    pub storage: Option<StorageSettings>,
}

/// Resolved secondary-loop settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondarySettings {
    /// Main-bus setpoint (V).
    pub v_setpoint: f64,
    /// Node whose voltage the loop measures.
    pub main_bus: NodeId,
    pub kp: f64,
    pub ki: f64,
    pub shift_min: f64,
    pub shift_max: f64,
}

/// A fully resolved, runnable scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub solver: SolverConfig,
    pub pgms: Vec<PgmSettings>,
    pub loads: Vec<LoadSettings>,
    pub secondary: SecondarySettings,
    /// Base virtual resistance the droop design divided across weights.
    pub r_base: f64,
}

impl Scenario {
    /// Generator settings for a node, if it is a generator.
    pub fn pgm_for(&self, node: NodeId) -> Option<&PgmSettings> {
        self.pgms.iter().find(|p| p.node == node)
    }

    /// Load settings for a node, if it is a load.
    pub fn load_for(&self, node: NodeId) -> Option<&LoadSettings> {
        self.loads.iter().find(|l| l.node == node)
    }

    /// Union of all profile change times, sorted and deduplicated —
    /// the natural interval boundaries for steady-state metrics.
    pub fn event_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .loads
            .iter()
            .flat_map(|l| l.profile.change_times())
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        times
    }

    /// Serializes the resolved scenario, defaults included, to text that
    /// [`load_scenario_text`] reads back into an equivalent scenario.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved scenario\n");
        out.push_str(&format!("duration {}\n", format_value(self.solver.t_end)));
        out.push_str(&format!(
            "solver dt={} method={} decimation={} init={}",
            format_value(self.solver.dt),
            self.solver.method.as_str(),
            self.solver.decimation,
            match self.solver.init {
                InitMode::Nominal => "nominal",
                InitMode::Cold => "cold",
            }
        ));
        if let Some(p) = self.solver.control_period {
            out.push_str(&format!(" control_period={}", format_value(p)));
        }
        out.push('\n');

        for (id, node) in self.topology.nodes() {
            out.push_str(&format!("node {} kind={}", node.id, node.kind.as_str()));
            match node.kind {
                NodeKind::Pgm => {
                    let p = &self.pgm_for(id).expect("resolved pgm").params;
                    for (key, value) in [
                        ("l_ac", p.l_ac),
                        ("r_ac", p.r_ac),
                        ("c_ac", p.c_ac),
                        ("f", p.f_hz),
                        ("l_dc", p.l_dc),
                        ("r_dc", p.r_dc),
                        ("c_dc", p.c_dc),
                        ("r_damp", p.r_damp),
                        ("phi", p.phase_rad),
                        ("v_src_d", p.v_src_d),
                        ("v_src_q", p.v_src_q),
                    ] {
                        out.push_str(&format!(" {key}={}", format_value(value)));
                    }
                }
                NodeKind::Pcm | NodeKind::Pmm => {
                    let settings = self.load_for(id).expect("resolved load");
                    let p = &settings.params;
                    for (key, value) in [
                        ("c_bus", p.capacitance),
                        ("r_shunt", p.shunt_resistance),
                        ("v_floor", p.v_floor),
                    ] {
                        out.push_str(&format!(" {key}={}", format_value(value)));
                    }
                    if let Some(storage) = &settings.storage {
                        let e = &storage.params;
                        for (key, value) in [
                            ("capacity_ah", e.capacity_ah),
                            ("initial_ah", e.initial_charge_ah),
                            ("w_track", e.tracking_rate),
                            ("p_min", e.p_min_w),
                            ("p_max", e.p_max_w),
                        ] {
                            out.push_str(&format!(" {key}={}", format_value(value)));
                        }
                    }
                }
            }
            out.push('\n');
        }
        for (_, edge) in self.topology.edges() {
            out.push_str(&format!(
                "edge {} from={} to={} R={} L={}\n",
                edge.id,
                self.topology.node(edge.from).id,
                self.topology.node(edge.to).id,
                format_value(edge.resistance),
                format_value(edge.inductance),
            ));
        }

        out.push_str(&format!(
            "secondary vstar={} main={} kp={} ki={} shift_min={} shift_max={}\n",
            format_value(self.secondary.v_setpoint),
            self.topology.node(self.secondary.main_bus).id,
            format_value(self.secondary.kp),
            format_value(self.secondary.ki),
            format_value(self.secondary.shift_min),
            format_value(self.secondary.shift_max),
        ));
        out.push_str(&format!("droop rbase={}\n", format_value(self.r_base)));
        for pgm in &self.pgms {
            out.push_str(&format!(
                "droop {} weight={} r={} vref={} wmeas={}\n",
                self.topology.node(pgm.node).id,
                format_value(pgm.weight),
                format_value(pgm.droop.resistance),
                format_value(pgm.droop.v_ref),
                format_value(pgm.meas_rate),
            ));
            out.push_str(&format!(
                "rectifier {} kp={} ki={} v_ref_d={} v_ref_q={}\n",
                self.topology.node(pgm.node).id,
                format_value(pgm.rect_kp),
                format_value(pgm.rect_ki),
                format_value(pgm.v_ref_d),
                format_value(pgm.v_ref_q),
            ));
        }
        for load in &self.loads {
            if let Some(storage) = &load.storage {
                let zone: Vec<&str> = storage
                    .zone
                    .iter()
                    .map(|&n| self.topology.node(n).id.as_str())
                    .collect();
                out.push_str(&format!(
                    "ess {} mode={} rate={} zone={}\n",
                    self.topology.node(load.node).id,
                    match storage.mode {
                        StorageMode::Highpass => "highpass",
                        StorageMode::Lowpass => "lowpass",
                    },
                    format_value(storage.filter_rate),
                    zone.join(","),
                ));
            }
            for seg in load.profile.segments() {
                out.push_str(&format!(
                    "profile {} {} t={} P={}\n",
                    self.topology.node(load.node).id,
                    seg.kind.as_str(),
                    format_value(seg.t_start),
                    format_value(seg.level_w),
                ));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Key-value pairs from one directive, with its line number.
type GlobalStanza = (usize, Vec<(String, String)>);
/// Like [`GlobalStanza`] but addressed to one named node.
type PerNodeStanza = (usize, String, Vec<(String, String)>);
/// Numeric parameter overrides addressed to one named node.
type OverrideStanza = (usize, String, Vec<(String, f64)>);

#[derive(Default)]
struct RawStanzas {
    duration: Option<f64>,
    solver: Vec<GlobalStanza>,
    droop_global: Vec<GlobalStanza>,
    droop_per: Vec<PerNodeStanza>,
    secondary: Vec<GlobalStanza>,
    rectifier_global: Vec<GlobalStanza>,
    rectifier_per: Vec<PerNodeStanza>,
    ess_global: Vec<GlobalStanza>,
    ess_per: Vec<PerNodeStanza>,
    profiles: Vec<(usize, String, SegmentKind, f64, f64)>,
    overrides: Vec<OverrideStanza>,
    netlist_ref: Option<(usize, String)>,
}

/// Loads and resolves a scenario from a file. Netlist references are
/// resolved relative to the scenario file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario_text(&text, path.parent())
}

/// Parses and resolves scenario text. `base_dir` anchors `netlist <path>`
/// references; inline topologies need none.
pub fn load_scenario_text(text: &str, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let mut netlist = NetlistBuilder::new();
    let mut raw = RawStanzas::default();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw_line);
        if line.is_empty() {
            continue;
        }
        if netlist.try_line(line_no, line)? {
            continue;
        }
        parse_stanza(line_no, line, &mut raw)?;
    }

    // Topology: inline lines or an external reference, not both.
    let topology = match (&raw.netlist_ref, netlist.is_empty()) {
        (Some((line, _)), false) => {
            return Err(ParseError::semantic(
                *line,
                "scenario mixes an inline topology with a netlist reference",
            )
            .into());
        }
        (Some((_, path)), true) => {
            let base = base_dir.ok_or_else(|| {
                ScenarioError::Invalid(
                    "netlist references need a base directory (inline text has none)".to_string(),
                )
            })?;
            let full = base.join(path);
            let netlist_text =
                std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io {
                    path: full.clone(),
                    source,
                })?;
            crate::topology::parse_netlist(&netlist_text).map_err(|e| {
                ScenarioError::Invalid(format!("in netlist {}: {e}", full.display()))
            })?
        }
        (None, false) => netlist.finish()?,
        (None, true) => {
            return Err(ScenarioError::Invalid(
                "scenario declares no topology (inline node/edge lines or netlist <path>)"
                    .to_string(),
            ));
        }
    };

    resolve(topology, raw)
}

fn parse_stanza(line_no: usize, line: &str, raw: &mut RawStanzas) -> Result<(), ParseError> {
    let mut tokens = line.split_whitespace();
    let directive = tokens.next().expect("non-empty line");
    let rest: Vec<&str> = tokens.collect();

    let kv_list = |items: &[&str]| -> Result<Vec<(String, String)>, ParseError> {
        items
            .iter()
            .map(|tok| {
                let kv = split_key_value(tok, line_no, line)?;
                Ok((kv.key.to_string(), kv.raw.to_string()))
            })
            .collect()
    };

    match directive {
        "netlist" => {
            if rest.len() != 1 {
                return Err(ParseError::semantic(
                    line_no,
                    "netlist takes exactly one path",
                ));
            }
            if raw.netlist_ref.is_some() {
                return Err(ParseError::semantic(line_no, "netlist given twice"));
            }
            raw.netlist_ref = Some((line_no, rest[0].to_string()));
        }
        "duration" => {
            if rest.len() != 1 {
                return Err(ParseError::semantic(
                    line_no,
                    "duration takes exactly one value",
                ));
            }
            let value = parse_value(rest[0]).ok_or_else(|| {
                ParseError::syntax(line_no, 1, format!("'{}' is not a number", rest[0]))
            })?;
            if raw.duration.is_some() {
                return Err(ParseError::semantic(line_no, "duration given twice"));
            }
            raw.duration = Some(value);
        }
        "solver" => raw.solver.push((line_no, kv_list(&rest)?)),
        "droop" | "rectifier" | "ess" => {
            // First token without '=' is a node id; otherwise global.
            let (target, items) = match rest.first() {
                Some(first) if !first.contains('=') => {
                    (Some(first.to_string()), kv_list(&rest[1..])?)
                }
                _ => (None, kv_list(&rest)?),
            };
            match (directive, target) {
                ("droop", None) => raw.droop_global.push((line_no, items)),
                ("droop", Some(id)) => raw.droop_per.push((line_no, id, items)),
                ("rectifier", None) => raw.rectifier_global.push((line_no, items)),
                ("rectifier", Some(id)) => raw.rectifier_per.push((line_no, id, items)),
                ("ess", None) => raw.ess_global.push((line_no, items)),
                ("ess", Some(id)) => raw.ess_per.push((line_no, id, items)),
                _ => unreachable!(),
            }
        }
        "secondary" => raw.secondary.push((line_no, kv_list(&rest)?)),
        "profile" => {
            if rest.len() != 4 {
                return Err(ParseError::semantic(
                    line_no,
                    "profile needs: <node> <step|ramp|hold> t=<s> P=<W>",
                ));
            }
            let node = rest[0].to_string();
            let kind = match rest[1] {
                "step" => SegmentKind::Step,
                "ramp" => SegmentKind::Ramp,
                "hold" => SegmentKind::Hold,
                other => {
                    return Err(ParseError::semantic(
                        line_no,
                        format!("unknown profile kind '{other}' (expected step, ramp, or hold)"),
                    ))
                }
            };
            let mut t = None;
            let mut p = None;
            for tok in &rest[2..] {
                let kv = split_key_value(tok, line_no, line)?;
                let value = numeric_value(&kv, line_no, line)?;
                match kv.key {
                    "t" => t = Some(value),
                    "P" => p = Some(value),
                    other => {
                        return Err(ParseError::semantic(
                            line_no,
                            format!("unknown profile key '{other}' (expected t, P)"),
                        ))
                    }
                }
            }
            let t = t.ok_or_else(|| ParseError::semantic(line_no, "profile is missing t=<s>"))?;
            let p = p.ok_or_else(|| ParseError::semantic(line_no, "profile is missing P=<W>"))?;
            raw.profiles.push((line_no, node, kind, t, p));
        }
        "override" => {
            if rest.is_empty() {
                return Err(ParseError::semantic(
                    line_no,
                    "override needs: <node> <key>=<value>...",
                ));
            }
            let node = rest[0].to_string();
            let mut pairs = Vec::new();
            for tok in &rest[1..] {
                let kv = split_key_value(tok, line_no, line)?;
                let value = numeric_value(&kv, line_no, line)?;
                pairs.push((kv.key.to_string(), value));
            }
            if pairs.is_empty() {
                return Err(ParseError::semantic(
                    line_no,
                    "override has no key=value pairs",
                ));
            }
            raw.overrides.push((line_no, node, pairs));
        }
        other => {
            return Err(ParseError::syntax(
                line_no,
                1,
                format!("unknown directive '{other}'"),
            ));
        }
    }
    Ok(())
}

struct KvReader<'a> {
    line_no: usize,
    context: &'a str,
    items: &'a [(String, String)],
    used: Vec<bool>,
}

impl<'a> KvReader<'a> {
    fn new(line_no: usize, context: &'a str, items: &'a [(String, String)]) -> Self {
        KvReader {
            line_no,
            context,
            items,
            used: vec![false; items.len()],
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        for (i, (k, v)) in self.items.iter().enumerate() {
            if k == key {
                self.used[i] = true;
                return Some(v.as_str());
            }
        }
        None
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ParseError> {
        match self.raw(key) {
            None => Ok(None),
            Some(text) => parse_value(text).map(Some).ok_or_else(|| {
                ParseError::semantic(
                    self.line_no,
                    format!("{}: '{text}' is not a number for {key}", self.context),
                )
            }),
        }
    }

    fn finish(self) -> Result<(), ParseError> {
        for (i, (k, _)) in self.items.iter().enumerate() {
            if !self.used[i] {
                return Err(ParseError::semantic(
                    self.line_no,
                    format!("{}: unknown key '{k}'", self.context),
                ));
            }
        }
        Ok(())
    }
}

fn resolve(topology: Topology, raw: RawStanzas) -> Result<Scenario, ScenarioError> {
    let report = topology.validate();
    if !report.is_ok() {
        return Err(ScenarioError::Invalid(format!("topology: {report}")));
    }

    // --- apply parameter overrides onto node specs -----------------------
    let mut topology = topology;
    for (line_no, node_name, pairs) in &raw.overrides {
        let node_id = topology.find_node(node_name).ok_or_else(|| {
            ParseError::semantic(*line_no, format!("override: unknown node '{node_name}'"))
        })?;
        let kind = topology.node(node_id).kind;
        let allowed = allowed_keys(kind);
        for (key, _) in pairs {
            if !allowed.contains(&key.as_str()) {
                return Err(ParseError::semantic(
                    *line_no,
                    format!(
                        "override: unknown key '{key}' for {} node '{node_name}'",
                        kind.as_str()
                    ),
                )
                .into());
            }
        }
        topology.apply_overrides(node_id, pairs);
    }

    // --- solver -----------------------------------------------------------
    let mut solver = SolverConfig {
        t_end: raw.duration.unwrap_or(1.0),
        ..SolverConfig::default()
    };
    for (line_no, items) in &raw.solver {
        let mut kv = KvReader::new(*line_no, "solver", items);
        if let Some(dt) = kv.number("dt")? {
            solver.dt = dt;
        }
        if let Some(d) = kv.number("decimation")? {
            if d < 1.0 || d.fract() != 0.0 {
                return Err(ParseError::semantic(
                    *line_no,
                    format!("solver: decimation must be a positive integer, got {d}"),
                )
                .into());
            }
            solver.decimation = d as usize;
        }
        if let Some(p) = kv.number("control_period")? {
            solver.control_period = Some(p);
        }
        if let Some(m) = kv.raw("method") {
            solver.method = Method::from_str(m)
                .map_err(|e| ParseError::semantic(*line_no, format!("solver: {e}")))?;
        }
        if let Some(i) = kv.raw("init") {
            solver.init = InitMode::from_str(i)
                .map_err(|e| ParseError::semantic(*line_no, format!("solver: {e}")))?;
        }
        kv.finish()?;
    }
    solver.validate().map_err(ScenarioError::Invalid)?;

    // --- global droop / secondary / rectifier / storage defaults ----------
    let mut r_base = 2.0;
    let mut v_ref_global: Option<f64> = None;
    // Default current-measurement pole: one to two decades below the LC
    // resonances of typical link and line parameters, so the droop loop is
    // gain-stabilized without touching its static characteristic.
    let mut meas_rate_global = 10.0;
    for (line_no, items) in &raw.droop_global {
        let mut kv = KvReader::new(*line_no, "droop", items);
        if let Some(r) = kv.number("rbase")? {
            r_base = r;
        }
        if let Some(v) = kv.number("vref")? {
            v_ref_global = Some(v);
        }
        if let Some(w) = kv.number("wmeas")? {
            meas_rate_global = w;
        }
        kv.finish()?;
    }
    if r_base <= 0.0 {
        return Err(ScenarioError::Invalid(format!(
            "droop base resistance must be positive, got {r_base}"
        )));
    }
    if meas_rate_global <= 0.0 {
        return Err(ScenarioError::Invalid(format!(
            "droop measurement rate must be positive, got {meas_rate_global}"
        )));
    }

    let load_nodes: Vec<NodeId> = topology
        .nodes()
        .filter(|(_, n)| n.kind.is_load())
        .map(|(id, _)| id)
        .collect();
    let pgm_nodes: Vec<NodeId> = topology
        .nodes()
        .filter(|(_, n)| n.kind == NodeKind::Pgm)
        .map(|(id, _)| id)
        .collect();

    let mut v_setpoint = 12_000.0;
    let mut main_bus: Option<NodeId> = None;
    let mut sec_kp = 0.05;
    let mut sec_ki = 2.0;
    let mut shift_min: Option<f64> = None;
    let mut shift_max: Option<f64> = None;
    for (line_no, items) in &raw.secondary {
        let mut kv = KvReader::new(*line_no, "secondary", items);
        if let Some(v) = kv.number("vstar")? {
            v_setpoint = v;
        }
        if let Some(name) = kv.raw("main") {
            main_bus = Some(topology.find_node(name).ok_or_else(|| {
                ParseError::semantic(*line_no, format!("secondary: unknown node '{name}'"))
            })?);
        }
        if let Some(v) = kv.number("kp")? {
            sec_kp = v;
        }
        if let Some(v) = kv.number("ki")? {
            sec_ki = v;
        }
        if let Some(v) = kv.number("shift_min")? {
            shift_min = Some(v);
        }
        if let Some(v) = kv.number("shift_max")? {
            shift_max = Some(v);
        }
        kv.finish()?;
    }
    if v_setpoint <= 0.0 {
        return Err(ScenarioError::Invalid(format!(
            "bus setpoint must be positive, got {v_setpoint}"
        )));
    }
    // Default main bus: the first declared load node.
    let main_bus = match main_bus {
        Some(n) => n,
        None => *load_nodes.first().ok_or_else(|| {
            ScenarioError::Invalid("scenario has no load node to use as main bus".to_string())
        })?,
    };
    let secondary = SecondarySettings {
        v_setpoint,
        main_bus,
        kp: sec_kp,
        ki: sec_ki,
        shift_min: shift_min.unwrap_or(-0.1 * v_setpoint),
        shift_max: shift_max.unwrap_or(0.1 * v_setpoint),
    };

    // Pure-integral default: the DC link of a generation module is a lightly
    // damped LC (about 2.2 krad/s with only the milliohm-scale series loss),
    // so the voltage loop must be gain-stabilized. With a plant gain near
    // 12.6 kV per unit modulation, ki = 1e-3 puts the loop crossover around
    // 13 rad/s while holding the magnitude at the resonant peak near 0.26
    // even with no damping credit for the AC side.
    let mut rect_kp_global = 0.0;
    let mut rect_ki_global = 1e-3;
    let mut rect_vd_global: Option<f64> = None;
    let mut rect_vq_global: Option<f64> = None;
    for (line_no, items) in &raw.rectifier_global {
        let mut kv = KvReader::new(*line_no, "rectifier", items);
        if let Some(v) = kv.number("kp")? {
            rect_kp_global = v;
        }
        if let Some(v) = kv.number("ki")? {
            rect_ki_global = v;
        }
        if let Some(v) = kv.number("v_ref_d")? {
            rect_vd_global = Some(v);
        }
        if let Some(v) = kv.number("v_ref_q")? {
            rect_vq_global = Some(v);
        }
        kv.finish()?;
    }

    let mut ess_mode_global = StorageMode::Highpass;
    let mut ess_rate_global = 1.0;
    for (line_no, items) in &raw.ess_global {
        let mut kv = KvReader::new(*line_no, "ess", items);
        if let Some(m) = kv.raw("mode") {
            ess_mode_global = parse_mode(m, *line_no)?;
        }
        if let Some(r) = kv.number("rate")? {
            ess_rate_global = r;
        }
        kv.finish()?;
    }

    // --- per-generator resolution -----------------------------------------
    let weights_default_vref = v_ref_global.unwrap_or(v_setpoint);
    let mut pgms = Vec::with_capacity(pgm_nodes.len());
    for &node in &pgm_nodes {
        let spec = topology.node(node).clone();
        let params = pgm_params_from(&spec.overrides);
        validate_pgm_params(&params, &spec.id)?;

        let mut weight = 1.0;
        let mut explicit_r: Option<f64> = None;
        let mut v_ref = weights_default_vref;
        let mut meas_rate = meas_rate_global;
        for (line_no, id, items) in &raw.droop_per {
            if id != &spec.id {
                continue;
            }
            let mut kv = KvReader::new(*line_no, "droop", items);
            if let Some(w) = kv.number("weight")? {
                weight = w;
            }
            if let Some(r) = kv.number("r")? {
                explicit_r = Some(r);
            }
            if let Some(v) = kv.number("vref")? {
                v_ref = v;
            }
            if let Some(w) = kv.number("wmeas")? {
                meas_rate = w;
            }
            kv.finish()?;
        }
        if weight <= 0.0 {
            return Err(ScenarioError::Invalid(format!(
                "droop weight for '{}' must be positive, got {weight}",
                spec.id
            )));
        }
        let resistance = explicit_r.unwrap_or(r_base / weight);
        if resistance <= 0.0 {
            return Err(ScenarioError::Invalid(format!(
                "droop resistance for '{}' must be positive, got {resistance}",
                spec.id
            )));
        }
        if meas_rate <= 0.0 {
            return Err(ScenarioError::Invalid(format!(
                "droop measurement rate for '{}' must be positive, got {meas_rate}",
                spec.id
            )));
        }

        let mut rect_kp = rect_kp_global;
        let mut rect_ki = rect_ki_global;
        let mut v_ref_d = rect_vd_global.unwrap_or(params.v_src_d);
        let mut v_ref_q = rect_vq_global.unwrap_or(params.v_src_q);
        for (line_no, id, items) in &raw.rectifier_per {
            if id != &spec.id {
                continue;
            }
            let mut kv = KvReader::new(*line_no, "rectifier", items);
            if let Some(v) = kv.number("kp")? {
                rect_kp = v;
            }
            if let Some(v) = kv.number("ki")? {
                rect_ki = v;
            }
            if let Some(v) = kv.number("v_ref_d")? {
                v_ref_d = v;
            }
            if let Some(v) = kv.number("v_ref_q")? {
                v_ref_q = v;
            }
            kv.finish()?;
        }

        pgms.push(PgmSettings {
            node,
            params,
            droop: DroopConfig { v_ref, resistance },
            weight,
            meas_rate,
            rect_kp,
            rect_ki,
            v_ref_d,
            v_ref_q,
        });
    }

    // Per-node stanzas must address real nodes of the right kind.
    for (line_no, id, _) in &raw.droop_per {
        let node = topology
            .find_node(id)
            .ok_or_else(|| ParseError::semantic(*line_no, format!("droop: unknown node '{id}'")))?;
        if topology.node(node).kind != NodeKind::Pgm {
            return Err(ParseError::semantic(
                *line_no,
                format!("droop: node '{id}' is not a generator"),
            )
            .into());
        }
    }
    for (line_no, id, _) in &raw.rectifier_per {
        let node = topology.find_node(id).ok_or_else(|| {
            ParseError::semantic(*line_no, format!("rectifier: unknown node '{id}'"))
        })?;
        if topology.node(node).kind != NodeKind::Pgm {
            return Err(ParseError::semantic(
                *line_no,
                format!("rectifier: node '{id}' is not a generator"),
            )
            .into());
        }
    }

    // --- per-load resolution ------------------------------------------------
    let mut loads = Vec::with_capacity(load_nodes.len());
    for &node in &load_nodes {
        let spec = topology.node(node).clone();
        let params = load_params_from(spec.kind, &spec.overrides);
        validate_load_params(&params, &spec.id)?;

        // Profile: gather this node's segments in file order.
        let mut segments = Vec::new();
        for (line_no, id, kind, t, p) in &raw.profiles {
            if id != &spec.id {
                continue;
            }
            let _ = line_no;
            segments.push(Segment {
                t_start: *t,
                kind: *kind,
                level_w: *p,
            });
        }
        let profile = LoadProfile::new(segments)
            .map_err(|e| ScenarioError::Invalid(format!("profile for '{}': {e}", spec.id)))?;

        let storage = if spec.kind == NodeKind::Pcm {
            let params = ess_params_from(&spec.overrides);
            validate_ess_params(&params, &spec.id)?;
            let mut mode = ess_mode_global;
            let mut rate = ess_rate_global;
            let mut zone = vec![node];
            for (line_no, id, items) in &raw.ess_per {
                if id != &spec.id {
                    continue;
                }
                let mut kv = KvReader::new(*line_no, "ess", items);
                if let Some(m) = kv.raw("mode") {
                    mode = parse_mode(m, *line_no)?;
                }
                if let Some(r) = kv.number("rate")? {
                    rate = r;
                }
                if let Some(list) = kv.raw("zone") {
                    zone = list
                        .split(',')
                        .map(|name| {
                            let n = topology.find_node(name).ok_or_else(|| {
                                ParseError::semantic(
                                    *line_no,
                                    format!("ess zone: unknown node '{name}'"),
                                )
                            })?;
                            if !topology.node(n).kind.is_load() {
                                return Err(ParseError::semantic(
                                    *line_no,
                                    format!("ess zone: node '{name}' is not a load"),
                                ));
                            }
                            Ok(n)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                }
                kv.finish()?;
            }
            if rate <= 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "storage filter rate for '{}' must be positive, got {rate}",
                    spec.id
                )));
            }
            Some(StorageSettings {
                params,
                mode,
                filter_rate: rate,
                zone,
            })
        } else {
            None
        };

        loads.push(LoadSettings {
            node,
            params,
            profile,
            storage,
        });
    }

    // Per-storage stanzas must address conversion modules.
    for (line_no, id, _) in &raw.ess_per {
        let node = topology
            .find_node(id)
            .ok_or_else(|| ParseError::semantic(*line_no, format!("ess: unknown node '{id}'")))?;
        if topology.node(node).kind != NodeKind::Pcm {
            return Err(ParseError::semantic(
                *line_no,
                format!(
                    "ess: node '{id}' has no storage (kind {})",
                    topology.node(node).kind.as_str()
                ),
            )
            .into());
        }
    }
    // Profiles must address load nodes.
    for (line_no, id, ..) in &raw.profiles {
        let node = topology.find_node(id).ok_or_else(|| {
            ParseError::semantic(*line_no, format!("profile: unknown node '{id}'"))
        })?;
        if !topology.node(node).kind.is_load() {
            return Err(ParseError::semantic(
                *line_no,
                format!("profile: node '{id}' is not a load"),
            )
            .into());
        }
    }

    Ok(Scenario {
        topology,
        solver,
        pgms,
        loads,
        secondary,
        r_base,
    })
}

fn parse_mode(text: &str, line_no: usize) -> Result<StorageMode, ParseError> {
    match text {
        "highpass" => Ok(StorageMode::Highpass),
        "lowpass" => Ok(StorageMode::Lowpass),
        other => Err(ParseError::semantic(
            line_no,
            format!("unknown storage mode '{other}' (expected highpass or lowpass)"),
        )),
    }
}

fn lookup(overrides: &[(String, f64)], key: &str) -> Option<f64> {
    overrides
        .iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
}

fn pgm_params_from(overrides: &[(String, f64)]) -> PgmParams {
    let d = PgmParams::default();
    PgmParams {
        l_ac: lookup(overrides, "l_ac").unwrap_or(d.l_ac),
        r_ac: lookup(overrides, "r_ac").unwrap_or(d.r_ac),
        c_ac: lookup(overrides, "c_ac").unwrap_or(d.c_ac),
        f_hz: lookup(overrides, "f").unwrap_or(d.f_hz),
        l_dc: lookup(overrides, "l_dc").unwrap_or(d.l_dc),
        r_dc: lookup(overrides, "r_dc").unwrap_or(d.r_dc),
        c_dc: lookup(overrides, "c_dc").unwrap_or(d.c_dc),
        r_damp: lookup(overrides, "r_damp").unwrap_or(d.r_damp),
        phase_rad: lookup(overrides, "phi").unwrap_or(d.phase_rad),
        v_src_d: lookup(overrides, "v_src_d").unwrap_or(d.v_src_d),
        v_src_q: lookup(overrides, "v_src_q").unwrap_or(d.v_src_q),
    }
}

fn load_params_from(kind: NodeKind, overrides: &[(String, f64)]) -> LoadParams {
    let d = match kind {
        NodeKind::Pcm => LoadParams::pcm_defaults(),
        _ => LoadParams::pmm_defaults(),
    };
    LoadParams {
        capacitance: lookup(overrides, "c_bus").unwrap_or(d.capacitance),
        shunt_resistance: lookup(overrides, "r_shunt").unwrap_or(d.shunt_resistance),
        v_floor: lookup(overrides, "v_floor").unwrap_or(d.v_floor),
    }
}

fn ess_params_from(overrides: &[(String, f64)]) -> EssParams {
    let d = EssParams::default();
    let capacity = lookup(overrides, "capacity_ah").unwrap_or(d.capacity_ah);
    EssParams {
        tracking_rate: lookup(overrides, "w_track").unwrap_or(d.tracking_rate),
        capacity_ah: capacity,
        // Default initial charge: half full.
        initial_charge_ah: lookup(overrides, "initial_ah").unwrap_or(0.5 * capacity),
        p_min_w: lookup(overrides, "p_min").unwrap_or(d.p_min_w),
        p_max_w: lookup(overrides, "p_max").unwrap_or(d.p_max_w),
    }
}

fn validate_pgm_params(p: &PgmParams, id: &str) -> Result<(), ScenarioError> {
    let bad = |what: &str, v: f64| {
        Err(ScenarioError::Invalid(format!(
            "generator '{id}': {what} must be positive, got {v}"
        )))
    };
    if p.l_ac <= 0.0 {
        return bad("l_ac", p.l_ac);
    }
    if p.c_ac <= 0.0 {
        return bad("c_ac", p.c_ac);
    }
    if p.l_dc <= 0.0 {
        return bad("l_dc", p.l_dc);
    }
    if p.c_dc <= 0.0 {
        return bad("c_dc", p.c_dc);
    }
    if p.r_damp <= 0.0 {
        return bad("r_damp", p.r_damp);
    }
    if p.f_hz <= 0.0 {
        return bad("f", p.f_hz);
    }
    if p.r_ac < 0.0 || p.r_dc < 0.0 {
        return Err(ScenarioError::Invalid(format!(
            "generator '{id}': resistances must be non-negative"
        )));
    }
    Ok(())
}

fn validate_load_params(p: &LoadParams, id: &str) -> Result<(), ScenarioError> {
    if p.capacitance <= 0.0 || p.shunt_resistance <= 0.0 || p.v_floor <= 0.0 {
        return Err(ScenarioError::Invalid(format!(
            "load '{id}': c_bus, r_shunt, and v_floor must be positive"
        )));
    }
    Ok(())
}

fn validate_ess_params(p: &EssParams, id: &str) -> Result<(), ScenarioError> {
    if p.tracking_rate <= 0.0 || p.capacity_ah <= 0.0 {
        return Err(ScenarioError::Invalid(format!(
            "storage '{id}': w_track and capacity_ah must be positive"
        )));
    }
    if p.initial_charge_ah < 0.0 || p.initial_charge_ah > p.capacity_ah {
        return Err(ScenarioError::Invalid(format!(
            "storage '{id}': initial_ah must lie within [0, capacity_ah]"
        )));
    }
    if p.p_min_w > 0.0 || p.p_max_w < 0.0 || p.p_min_w >= p.p_max_w {
        return Err(ScenarioError::Invalid(format!(
            "storage '{id}': power limits must satisfy p_min <= 0 <= p_max"
        )));
    }
    Ok(())
}
