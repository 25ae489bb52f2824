//! Load module: a bus capacitor feeding a constant-power draw in parallel
//! with a resistive shunt. This models both dedicated load modules and the
//! load side of a conversion module.

/// Load constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadParams {
    /// Bus capacitance (F).
    pub capacitance: f64,
    /// Parallel resistive load / bleed (ohm).
    pub shunt_resistance: f64,
    /// Undervoltage foldback knee (V). At or above the knee the draw is
    /// exactly `power / v`; below it the draw folds back linearly through
    /// zero (constant impedance `v_floor^2 / power`), so a collapsed or
    /// even negative bus always dissipates instead of feeding the network.
    pub v_floor: f64,
}

impl LoadParams {
    /// Conversion-module bus defaults.
    pub fn pcm_defaults() -> Self {
        LoadParams {
            capacitance: 100e-6,
            shunt_resistance: 1e6,
            v_floor: 120.0,
        }
    }

    /// Dedicated load-module bus defaults (larger bus capacitor).
    pub fn pmm_defaults() -> Self {
        LoadParams {
            capacitance: 1e-3,
            shunt_resistance: 1e6,
            v_floor: 120.0,
        }
    }
}

/// Voltage derivative of a load bus.
///
/// `current_in_a` is the net current delivered by the network (entering
/// minus leaving) plus any local storage injection.
pub fn load_derivative(voltage: f64, params: &LoadParams, power_w: f64, current_in_a: f64) -> f64 {
    let cpl_draw = if voltage >= params.v_floor {
        power_w / voltage
    } else {
        // Foldback region: the converter-fed draw acts as a fixed impedance
        // through zero. The drawn power v * i = power_w * (v / v_floor)^2 is
        // non-negative for every voltage, so the load can never pump energy
        // into an undervolted or ringing bus.
        power_w * voltage / (params.v_floor * params.v_floor)
    };
    (-cpl_draw - voltage / params.shunt_resistance + current_in_a) / params.capacitance
}
