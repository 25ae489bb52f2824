//! Shunt energy storage: a current source with first-order reference
//! tracking and coulomb-counted state of charge.
//!
//! Sign convention: positive current is discharge — power injected into the
//! bus. The battery current equals the injected current, so the charge
//! integral runs on the same state.

/// Storage hardware constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EssParams {
    /// Current-loop tracking rate of the storage converter (1/s). This is
    /// the speed at which the device follows its reference, distinct from
    /// (and much faster than) the energy-management filter that shapes the
    /// reference itself.
    pub tracking_rate: f64,
    /// Total capacity (A·h).
    pub capacity_ah: f64,
    /// Charge available at the start of a run (A·h).
    pub initial_charge_ah: f64,
    /// Most negative admissible terminal power, i.e. the charging limit (W).
    pub p_min_w: f64,
    /// Most positive admissible terminal power, i.e. the discharge limit (W).
    pub p_max_w: f64,
}

impl Default for EssParams {
    fn default() -> Self {
        EssParams {
            tracking_rate: 50.0,
            capacity_ah: 10.0,
            initial_charge_ah: 5.0,
            p_min_w: -2e6,
            p_max_w: 2e6,
        }
    }
}

/// Storage states: injected current and the running charge integral.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EssState {
    /// Injected (discharge-positive) current (A).
    pub current_a: f64,
    /// Integrated discharge, `∫ i dt`, in coulombs (A·s).
    pub charge_used_c: f64,
}

impl EssState {
    pub const DIM: usize = 2;
}

/// First-order tracking of the effective current reference.
pub fn current_derivative(current_a: f64, reference_a: f64, tracking_rate: f64) -> f64 {
    tracking_rate * (reference_a - current_a)
}

/// The charge integral runs directly on the injected current.
pub fn charge_derivative(current_a: f64) -> f64 {
    current_a
}

/// Clamps a raw current reference to what the device may actually do:
/// terminal power inside `[p_min_w, p_max_w]`, no discharge at empty, no
/// charge at full. `v_bus` must be positive (callers floor it first).
pub fn saturate_reference(reference_a: f64, v_bus: f64, soc: f64, params: &EssParams) -> f64 {
    debug_assert!(v_bus > 0.0, "bus voltage must be floored positive");
    let mut i = reference_a.clamp(params.p_min_w / v_bus, params.p_max_w / v_bus);
    if soc <= 0.0 {
        i = i.min(0.0);
    }
    if soc >= 1.0 {
        i = i.max(0.0);
    }
    i
}

/// Coulomb-counting state of charge.
pub fn soc(state: &EssState, params: &EssParams) -> f64 {
    (params.initial_charge_ah - state.charge_used_c / 3600.0) / params.capacity_ah
}

/// State of charge from an integrated terminal energy (J) and the measured
/// bus voltage, for telemetry paths that only see power. Coincides with
/// [`soc`] whenever the bus voltage is constant.
pub fn soc_from_power(energy_used_j: f64, v_bus: f64, params: &EssParams) -> f64 {
    (params.initial_charge_ah * v_bus - energy_used_j / 3600.0) / (params.capacity_ah * v_bus)
}
