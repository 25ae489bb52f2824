//! Benchmark helpers: ready-to-run scenarios with the recording and horizon
//! knobs preset so every benchmark measures stepping work, not output.

use mgsim_core::{builtin_scenario, load_scenario_text, Scenario};

/// The bundled four-zone system trimmed to `steps` integration steps with
/// recording effectively disabled.
pub fn four_zone_horizon(steps: usize) -> Scenario {
    let mut scenario = load_scenario_text(builtin_scenario("sps4zone").unwrap(), None).unwrap();
    scenario.solver.t_end = scenario.solver.dt * steps as f64;
    scenario.solver.decimation = steps.max(1);
    scenario
}

/// The bundled single-generator system over its full horizon.
pub fn minimal() -> Scenario {
    load_scenario_text(builtin_scenario("minimal").unwrap(), None).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_helper_scales_steps() {
        let scenario = four_zone_horizon(500);
        assert!((scenario.solver.t_end - 500.0 * scenario.solver.dt).abs() < 1e-12);
        assert_eq!(scenario.solver.step_count(), 500);
    }

    #[test]
    fn helpers_produce_runnable_scenarios() {
        mgsim_core::Engine::new(&four_zone_horizon(10)).unwrap();
        mgsim_core::Engine::new(&minimal()).unwrap();
    }
}
