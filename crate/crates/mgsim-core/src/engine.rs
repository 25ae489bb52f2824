//! The simulation engine: flattens a scenario into one state vector,
//! advances it with the fixed-step integrator, and records decimated
//! outputs.
//!
//! # State layout
//!
//! Nodes first, in declaration order — a generation module owns six slots,
//! a conversion module three (bus voltage, storage current, storage charge
//! used), a consuming module one (bus voltage) — then one current slot per
//! edge, in declaration order. The layout is fixed at construction, so runs
//! are bitwise reproducible.
//!
//! # Causality
//!
//! Every signal a component consumes during a derivative evaluation is
//! backed by a state (node voltages, edge currents) or held constant over
//! the step (controller commands). The per-step order is the verified
//! schedule from [`Topology::evaluation_order`]: read voltages, edge
//! derivatives, KCL sums, node derivatives. Controllers run between steps —
//! zero-order hold — ahead of the integrator stages, so no algebraic loop
//! can form.

use crate::components::ess::{self, EssState};
use crate::components::{
    line_derivative, load_derivative, pgm_derivatives, EssParams, LoadParams, PgmParams, PgmState,
};
use crate::control::{
    droop_command, rectifier_feedforward, DroopConfig, EssCompensator, LowPassFilter,
    RectifierControl, SecondaryControl,
};
use crate::error::SimulationError;
use crate::scenario::{LoadProfile, Scenario};
use crate::solver::{step_in_place, InitMode, SolverConfig, StepBuffers};
use crate::timeseries::TimeSeries;
use crate::topology::NodeKind;

/// Any state beyond this magnitude (or non-finite) aborts the run. Real
/// shipboard quantities live many orders of magnitude below it; reaching it
/// means the integration has left physics.
pub const DIVERGENCE_MAGNITUDE: f64 = 1e15;

/// A labeled instant of the simulation: the full flat state vector at `t`.
/// Interpret slots through the [`Engine`] that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub values: Vec<f64>,
}

struct PgmRuntime {
    id: String,
    /// First of the six state slots.
    offset: usize,
    params: PgmParams,
    droop: DroopConfig,
    /// KCL incidence: (edge state slot, sign) summing to the current drawn
    /// from this generator into the network.
    incidence: Vec<(usize, f64)>,
}

struct StorageRuntime {
    params: EssParams,
    current_slot: usize,
    charge_slot: usize,
    /// Indices into `Model::loads` whose profiles form this unit's zone.
    zone: Vec<usize>,
}

struct LoadRuntime {
    id: String,
    voltage_slot: usize,
    params: LoadParams,
    profile: LoadProfile,
    storage: Option<StorageRuntime>,
    /// KCL incidence summing to the current delivered into this bus.
    incidence: Vec<(usize, f64)>,
}

struct EdgeRuntime {
    id: String,
    slot: usize,
    from_voltage_slot: usize,
    to_voltage_slot: usize,
    resistance: f64,
    inductance: f64,
}

/// Everything constant during integration.
struct Model {
    pgms: Vec<PgmRuntime>,
    loads: Vec<LoadRuntime>,
    edges: Vec<EdgeRuntime>,
    dim: usize,
}

/// Controller outputs, held constant across the integrator stages of each
/// step (zero-order hold).
#[derive(Clone)]
struct Commands {
    /// Per generator, in model order; always within `[0, 1]`.
    modulation: Vec<f64>,
    /// Per load, in model order (zero for loads without storage), in amps.
    storage_reference: Vec<f64>,
    secondary_shift: f64,
}

struct Controllers {
    secondary: SecondaryControl,
    /// Parallel to `Model::pgms`.
    rectifiers: Vec<RectifierControl>,
    /// Parallel to `Model::pgms`: band-limits each generator's measured
    /// output current before it reaches the droop law and feedforward.
    current_meters: Vec<LowPassFilter>,
    /// Parallel to `Model::loads`; present exactly where storage is.
    compensators: Vec<Option<EssCompensator>>,
}

/// Where one output column's value comes from.
enum RecordSource {
    Time,
    State(usize),
    PgmInjection(usize),
    StoragePower(usize),
    StorageSoc(usize),
    Modulation(usize),
    SecondaryShift,
}

impl Model {
    fn injection(&self, incidence: &[(usize, f64)], state: &[f64]) -> f64 {
        incidence
            .iter()
            .map(|&(slot, sign)| sign * state[slot])
            .sum()
    }

    /// Evaluates all state derivatives at `(t, state)` under held commands.
    ///
    /// Order mirrors the verified schedule: edge derivatives consume node
    /// voltage states, node derivatives consume edge current states through
    /// their KCL sums. Nothing consumes a value computed earlier in the same
    /// call, so the evaluation is causal by construction.
    fn derivatives(&self, t: f64, state: &[f64], derivative: &mut [f64], commands: &Commands) {
        for edge in &self.edges {
            derivative[edge.slot] = line_derivative(
                state[edge.slot],
                state[edge.from_voltage_slot],
                state[edge.to_voltage_slot],
                edge.resistance,
                edge.inductance,
            );
        }

        for (k, pgm) in self.pgms.iter().enumerate() {
            let drawn = self.injection(&pgm.incidence, state);
            let block = PgmState::from_slice(&state[pgm.offset..pgm.offset + PgmState::DIM]);
            let d = pgm_derivatives(&block, &pgm.params, commands.modulation[k], drawn);
            d.write_slice(&mut derivative[pgm.offset..pgm.offset + PgmState::DIM]);
        }

        for (j, load) in self.loads.iter().enumerate() {
            let delivered = self.injection(&load.incidence, state);
            let power = load.profile.eval(t);
            let mut current_in = delivered;
            if let Some(storage) = &load.storage {
                let i_storage = state[storage.current_slot];
                current_in += i_storage;
                derivative[storage.current_slot] = ess::current_derivative(
                    i_storage,
                    commands.storage_reference[j],
                    storage.params.tracking_rate,
                );
                derivative[storage.charge_slot] = ess::charge_derivative(i_storage);
            }
            derivative[load.voltage_slot] =
                load_derivative(state[load.voltage_slot], &load.params, power, current_in);
        }
    }

    /// Output-column label of a state slot, for divergence reports.
    fn locate(&self, slot: usize) -> String {
        const PGM_SIGNALS: [&str; 6] = ["i_l_d", "i_l_q", "v_c_d", "v_c_q", "i_dc", "v_dc_link"];
        for pgm in &self.pgms {
            if (pgm.offset..pgm.offset + PgmState::DIM).contains(&slot) {
                return format!("{}.{}", pgm.id, PGM_SIGNALS[slot - pgm.offset]);
            }
        }
        for load in &self.loads {
            if slot == load.voltage_slot {
                return format!("{}.v_bus", load.id);
            }
            if let Some(storage) = &load.storage {
                if slot == storage.current_slot {
                    return format!("{}.i_ess", load.id);
                }
                if slot == storage.charge_slot {
                    return format!("{}.charge", load.id);
                }
            }
        }
        for edge in &self.edges {
            if slot == edge.slot {
                return format!("{}.i", edge.id);
            }
        }
        format!("state[{slot}]")
    }
}

/// A constructed simulation, ready to run once.
pub struct Engine {
    model: Model,
    controllers: Controllers,
    commands: Commands,
    state: Vec<f64>,
    buffers: StepBuffers,
    solver: SolverConfig,
    main_voltage_slot: usize,
    control_every: u64,
    columns: Vec<String>,
    plan: Vec<RecordSource>,
    t: f64,
}

impl Engine {
    /// Validates the scenario (structure, schedule causality, solver
    /// settings, control references) and builds the initial state.
    pub fn new(scenario: &Scenario) -> Result<Self, SimulationError> {
        scenario
            .solver
            .validate()
            .map_err(SimulationError::Config)?;

        let report = scenario.topology.validate();
        if !report.is_ok() {
            return Err(SimulationError::Config(format!("topology: {report}")));
        }
        scenario
            .topology
            .evaluation_order()
            .map_err(|e| SimulationError::Config(e.to_string()))?;

        // --- state layout -------------------------------------------------
        let mut offset = 0usize;
        let mut voltage_slots = Vec::with_capacity(scenario.topology.node_count());
        let mut pgms = Vec::new();
        let mut loads = Vec::new();
        for (node, spec) in scenario.topology.nodes() {
            match spec.kind {
                NodeKind::Pgm => {
                    let settings = scenario.pgm_for(node).ok_or_else(|| {
                        SimulationError::Config(format!(
                            "no generator settings for node '{}'",
                            spec.id
                        ))
                    })?;
                    voltage_slots.push(offset + PgmState::DIM - 1); // v_dc_link
                    pgms.push(PgmRuntime {
                        id: spec.id.clone(),
                        offset,
                        params: settings.params.clone(),
                        droop: settings.droop.clone(),
                        incidence: Vec::new(),
                    });
                    offset += PgmState::DIM;
                }
                NodeKind::Pcm | NodeKind::Pmm => {
                    let settings = scenario.load_for(node).ok_or_else(|| {
                        SimulationError::Config(format!("no load settings for node '{}'", spec.id))
                    })?;
                    voltage_slots.push(offset);
                    let storage = settings.storage.as_ref().map(|s| StorageRuntime {
                        params: s.params.clone(),
                        current_slot: offset + 1,
                        charge_slot: offset + 2,
                        zone: Vec::new(), // filled below, needs load ordinals
                    });
                    let width = 1 + if storage.is_some() { EssState::DIM } else { 0 };
                    loads.push(LoadRuntime {
                        id: spec.id.clone(),
                        voltage_slot: offset,
                        params: settings.params.clone(),
                        profile: settings.profile.clone(),
                        storage,
                        incidence: Vec::new(),
                    });
                    offset += width;
                }
            }
        }
        let edge_base = offset;
        let mut edges = Vec::with_capacity(scenario.topology.edge_count());
        for (i, (_, spec)) in scenario.topology.edges().enumerate() {
            edges.push(EdgeRuntime {
                id: spec.id.clone(),
                slot: edge_base + i,
                from_voltage_slot: voltage_slots[spec.from.index()],
                to_voltage_slot: voltage_slots[spec.to.index()],
                resistance: spec.resistance,
                inductance: spec.inductance,
            });
        }
        let dim = edge_base + edges.len();

        // --- KCL incidence lists -------------------------------------------
        // Generators: drawn current = leaving - entering. Loads: delivered
        // current = entering - leaving.
        let mut pgm_ordinal = 0usize;
        let mut load_ordinal = 0usize;
        let mut node_to_load = vec![usize::MAX; scenario.topology.node_count()];
        for (node, spec) in scenario.topology.nodes() {
            let orientation = if spec.kind == NodeKind::Pgm {
                1.0
            } else {
                -1.0
            };
            let mut incidence = Vec::new();
            for (i, (_, edge)) in scenario.topology.edges().enumerate() {
                if edge.from == node {
                    incidence.push((edge_base + i, orientation));
                }
                if edge.to == node {
                    incidence.push((edge_base + i, -orientation));
                }
            }
            if spec.kind == NodeKind::Pgm {
                pgms[pgm_ordinal].incidence = incidence;
                pgm_ordinal += 1;
            } else {
                node_to_load[node.index()] = load_ordinal;
                loads[load_ordinal].incidence = incidence;
                load_ordinal += 1;
            }
        }

        // Storage zones: scenario node ids -> load ordinals.
        for settings in &scenario.loads {
            let Some(s) = &settings.storage else { continue };
            let owner = node_to_load[settings.node.index()];
            let mut zone = Vec::with_capacity(s.zone.len());
            for &member in &s.zone {
                let ordinal = node_to_load[member.index()];
                if ordinal == usize::MAX {
                    return Err(SimulationError::Config(format!(
                        "storage zone of '{}' references non-load node '{}'",
                        scenario.topology.node(settings.node).id,
                        scenario.topology.node(member).id
                    )));
                }
                zone.push(ordinal);
            }
            if let Some(storage) = loads[owner].storage.as_mut() {
                storage.zone = zone;
            }
        }

        let model = Model {
            pgms,
            loads,
            edges,
            dim,
        };

        // --- controllers ---------------------------------------------------
        let secondary = SecondaryControl::new(
            scenario.secondary.v_setpoint,
            scenario.secondary.kp,
            scenario.secondary.ki,
        )
        .with_limits(scenario.secondary.shift_min, scenario.secondary.shift_max);

        let mut rectifiers = Vec::with_capacity(model.pgms.len());
        let mut initial_modulation = Vec::with_capacity(model.pgms.len());
        for settings in &scenario.pgms {
            let id = &scenario.topology.node(settings.node).id;
            // The feedforward denominator is constant over a run; refuse a
            // degenerate one here rather than mid-simulation.
            let lambda0 = rectifier_feedforward(
                settings.droop.v_ref,
                0.0,
                settings.params.r_dc,
                settings.v_ref_d,
                settings.v_ref_q,
                settings.params.phase_rad,
            )
            .map_err(|e| SimulationError::Config(format!("generator '{id}': {e}")))?;
            if !(0.0..=1.0).contains(&lambda0) {
                return Err(SimulationError::Config(format!(
                    "generator '{id}': no-load modulation {lambda0:.4} is outside [0, 1]; \
                     the droop reference is unreachable from the AC references"
                )));
            }
            rectifiers.push(RectifierControl::new(
                settings.rect_kp,
                settings.rect_ki,
                settings.params.r_dc,
                settings.v_ref_d,
                settings.v_ref_q,
                settings.params.phase_rad,
            ));
            initial_modulation.push(lambda0);
        }

        let nominal = scenario.solver.init == InitMode::Nominal;
        let mut compensators = Vec::with_capacity(model.loads.len());
        for load in &model.loads {
            match &load.storage {
                None => compensators.push(None),
                Some(storage) => {
                    let settings = scenario
                        .loads
                        .iter()
                        .find(|l| scenario.topology.node(l.node).id == load.id)
                        .and_then(|l| l.storage.as_ref())
                        .expect("storage settings exist for storage runtime");
                    let comp = if nominal {
                        let p0: f64 = storage
                            .zone
                            .iter()
                            .map(|&z| model.loads[z].profile.eval(0.0))
                            .sum();
                        EssCompensator::with_initial_filtered(
                            settings.filter_rate,
                            settings.mode,
                            p0,
                        )
                    } else {
                        EssCompensator::new(settings.filter_rate, settings.mode)
                    };
                    compensators.push(Some(comp));
                }
            }
        }

        // --- initial state ---------------------------------------------------
        let mut state = vec![0.0; model.dim];
        if nominal {
            for load in &model.loads {
                state[load.voltage_slot] = scenario.secondary.v_setpoint;
            }
            for (pgm, &lambda0) in model.pgms.iter().zip(&initial_modulation) {
                let id = &pgm.id;
                let block = pgm_equilibrium(&pgm.params, lambda0).ok_or_else(|| {
                    SimulationError::Config(format!(
                        "generator '{id}': nominal initialization has no equilibrium"
                    ))
                })?;
                block.write_slice(&mut state[pgm.offset..pgm.offset + PgmState::DIM]);
            }
        }

        // Current meters start settled at the initial flows, so the start of
        // a run does not transiently bias the droop targets.
        let current_meters: Vec<LowPassFilter> = scenario
            .pgms
            .iter()
            .zip(&model.pgms)
            .map(|(settings, pgm)| {
                LowPassFilter::with_initial(
                    settings.meas_rate,
                    model.injection(&pgm.incidence, &state),
                )
            })
            .collect();

        // --- output columns ---------------------------------------------------
        let mut columns = vec!["t_s".to_string()];
        let mut plan = vec![RecordSource::Time];
        for (node, spec) in scenario.topology.nodes() {
            columns.push(format!("v_{}", spec.id));
            plan.push(RecordSource::State(voltage_slots[node.index()]));
        }
        for edge in &model.edges {
            columns.push(format!("i_{}", edge.id));
            plan.push(RecordSource::State(edge.slot));
        }
        for (k, pgm) in model.pgms.iter().enumerate() {
            columns.push(format!("ig_{}", pgm.id));
            plan.push(RecordSource::PgmInjection(k));
        }
        for (j, load) in model.loads.iter().enumerate() {
            if load.storage.is_some() {
                columns.push(format!("p_ess_{}", load.id));
                plan.push(RecordSource::StoragePower(j));
            }
        }
        for (j, load) in model.loads.iter().enumerate() {
            if load.storage.is_some() {
                columns.push(format!("soc_{}", load.id));
                plan.push(RecordSource::StorageSoc(j));
            }
        }
        for (k, pgm) in model.pgms.iter().enumerate() {
            columns.push(format!("lambda_{}", pgm.id));
            plan.push(RecordSource::Modulation(k));
        }
        columns.push("dv_sec".to_string());
        plan.push(RecordSource::SecondaryShift);

        let main_voltage_slot = voltage_slots[scenario.secondary.main_bus.index()];
        let dt = scenario.solver.dt;
        let control_every = match scenario.solver.control_period {
            None => 1,
            Some(period) => (period / dt).round().max(1.0) as u64,
        };

        let commands = Commands {
            modulation: initial_modulation,
            storage_reference: vec![0.0; model.loads.len()],
            secondary_shift: 0.0,
        };

        Ok(Engine {
            buffers: StepBuffers::new(model.dim),
            model,
            controllers: Controllers {
                secondary,
                rectifiers,
                current_meters,
                compensators,
            },
            commands,
            state,
            solver: scenario.solver.clone(),
            main_voltage_slot,
            control_every,
            columns,
            plan,
            t: 0.0,
        })
    }

    /// Output column names, in recording order.
    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    /// Current simulation time (s).
    pub fn time(&self) -> f64 {
        self.t
    }

    /// Snapshot of the flat state vector.
    pub fn state(&self) -> SystemState {
        SystemState {
            t: self.t,
            values: self.state.clone(),
        }
    }

    /// Bus voltage of a node by id (link voltage for generators).
    pub fn node_voltage(&self, id: &str) -> Option<f64> {
        for pgm in &self.model.pgms {
            if pgm.id == id {
                return Some(self.state[pgm.offset + PgmState::DIM - 1]);
            }
        }
        self.model
            .loads
            .iter()
            .find(|l| l.id == id)
            .map(|l| self.state[l.voltage_slot])
    }

    /// Current of an edge by id.
    pub fn edge_current(&self, id: &str) -> Option<f64> {
        self.model
            .edges
            .iter()
            .find(|e| e.id == id)
            .map(|e| self.state[e.slot])
    }

    /// State of charge of a node's storage, if it has one.
    pub fn storage_soc(&self, id: &str) -> Option<f64> {
        let load = self.model.loads.iter().find(|l| l.id == id)?;
        let storage = load.storage.as_ref()?;
        Some(ess::soc(
            &EssState {
                current_a: self.state[storage.current_slot],
                charge_used_c: self.state[storage.charge_slot],
            },
            &storage.params,
        ))
    }

    fn update_controls(&mut self, t: f64) -> Result<(), SimulationError> {
        let dt_c = self.control_every as f64 * self.solver.dt;
        let state = &self.state;

        let v_main = state[self.main_voltage_slot];
        self.commands.secondary_shift = self.controllers.secondary.update(v_main, dt_c);

        for (k, pgm) in self.model.pgms.iter().enumerate() {
            // Both the droop law and the conduction-drop feedforward see the
            // band-limited output current, never the instantaneous ringing
            // one; at steady state the two differ only by the microamp-scale
            // damping-shunt draw.
            let drawn = self.model.injection(&pgm.incidence, state);
            let measured = self.controllers.current_meters[k].update(drawn, dt_c);
            let v_command = droop_command(&pgm.droop, measured, self.commands.secondary_shift);
            let v_link = state[pgm.offset + PgmState::DIM - 1];
            let modulation = self.controllers.rectifiers[k]
                .update(v_command, v_link, measured, dt_c)
                .map_err(|e| SimulationError::Config(format!("generator '{}': {e}", pgm.id)))?;
            self.commands.modulation[k] = modulation;
        }

        for (j, load) in self.model.loads.iter().enumerate() {
            let (Some(storage), Some(comp)) =
                (&load.storage, self.controllers.compensators[j].as_mut())
            else {
                continue;
            };
            let p_zone: f64 = storage
                .zone
                .iter()
                .map(|&z| self.model.loads[z].profile.eval(t))
                .sum();
            let p_reference = comp.update(p_zone, dt_c);
            // Convert the power reference to a current command at the local
            // bus voltage, floored to keep the division well-conditioned.
            let v_effective = state[load.voltage_slot].max(load.params.v_floor);
            let soc = ess::soc(
                &EssState {
                    current_a: state[storage.current_slot],
                    charge_used_c: state[storage.charge_slot],
                },
                &storage.params,
            );
            let raw = p_reference / v_effective;
            self.commands.storage_reference[j] =
                ess::saturate_reference(raw, v_effective, soc, &storage.params);
        }
        Ok(())
    }

    fn record(&self, t: f64, row: &mut Vec<f64>) {
        row.clear();
        for source in &self.plan {
            let value = match *source {
                RecordSource::Time => t,
                RecordSource::State(slot) => self.state[slot],
                RecordSource::PgmInjection(k) => {
                    let pgm = &self.model.pgms[k];
                    self.model.injection(&pgm.incidence, &self.state)
                }
                RecordSource::StoragePower(j) => {
                    let load = &self.model.loads[j];
                    let storage = load.storage.as_ref().expect("planned storage column");
                    self.state[load.voltage_slot] * self.state[storage.current_slot]
                }
                RecordSource::StorageSoc(j) => {
                    let load = &self.model.loads[j];
                    let storage = load.storage.as_ref().expect("planned storage column");
                    ess::soc(
                        &EssState {
                            current_a: self.state[storage.current_slot],
                            charge_used_c: self.state[storage.charge_slot],
                        },
                        &storage.params,
                    )
                }
                RecordSource::Modulation(k) => self.commands.modulation[k],
                RecordSource::SecondaryShift => self.commands.secondary_shift,
            };
            row.push(value);
        }
    }

    fn check_in_range(&self, t: f64) -> Result<(), SimulationError> {
        for (slot, &value) in self.state.iter().enumerate() {
            // The negated comparison also catches NaN, which `>` would miss.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(value.abs() <= DIVERGENCE_MAGNITUDE) {
                return Err(SimulationError::Divergence {
                    t,
                    component: self.model.locate(slot),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Runs from the current (initial) state to `t_end`, recording every
    /// `decimation`-th step plus the final one. Single-shot: the engine is
    /// left at `t_end`.
    pub fn run(&mut self) -> Result<TimeSeries, SimulationError> {
        let steps = self.solver.step_count();
        let dt = self.solver.dt;
        let decimation = self.solver.decimation as u64;
        let mut series = TimeSeries::new(self.columns.clone());
        let mut row = Vec::with_capacity(self.columns.len());

        for i in 0..=steps {
            let t = i as f64 * dt;
            self.t = t;
            if i % self.control_every == 0 {
                self.update_controls(t)?;
            }
            if i % decimation == 0 || i == steps {
                self.record(t, &mut row);
                series.push_row(&row);
            }
            if i == steps {
                break;
            }
            let model = &self.model;
            let commands = &self.commands;
            step_in_place(
                self.solver.method,
                &mut |t, s, ds| model.derivatives(t, s, ds, commands),
                t,
                dt,
                &mut self.state,
                &mut self.buffers,
            );
            self.check_in_range((i + 1) as f64 * dt)?;
        }
        self.t = steps as f64 * dt;
        Ok(series)
    }
}

/// Builds an engine from the scenario and runs it to completion.
pub fn simulate(scenario: &Scenario) -> Result<TimeSeries, SimulationError> {
    Engine::new(scenario)?.run()
}

/// Equilibrium of one generation module at fixed modulation and zero
/// network draw. The module is linear in its states for a held modulation,
/// so the exact equilibrium is a 6x6 linear solve; the matrix is extracted
/// by probing the derivative function with unit states.
fn pgm_equilibrium(params: &PgmParams, modulation: f64) -> Option<PgmState> {
    use nalgebra::{DMatrix, DVector};

    let eval = |x: &[f64; 6]| -> [f64; 6] {
        let d = pgm_derivatives(&PgmState::from_slice(x), params, modulation, 0.0);
        let mut out = [0.0; 6];
        d.write_slice(&mut out);
        out
    };

    let b = eval(&[0.0; 6]);
    let mut a = DMatrix::zeros(6, 6);
    for j in 0..6 {
        let mut unit = [0.0; 6];
        unit[j] = 1.0;
        let column = eval(&unit);
        for i in 0..6 {
            a[(i, j)] = column[i] - b[i];
        }
    }
    let rhs = DVector::from_iterator(6, b.iter().map(|&v| -v));
    let solution = a.lu().solve(&rhs)?;
    let mut out = [0.0; 6];
    for (slot, value) in out.iter_mut().zip(solution.iter()) {
        *slot = *value;
    }
    Some(PgmState::from_slice(&out))
}
