//! Fixed-step explicit integration.
//!
//! Systems are flat `&[f64]` state vectors with a derivative callback
//! `f(t, state, dstate)`. Both methods are allocation-free per step once a
//! [`StepBuffers`] workspace exists, and bit-deterministic: the same system
//! stepped twice produces identical state bits.

use std::str::FromStr;

/// Integration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(format!("unknown method '{other}' (expected euler or rk4)")),
        }
    }
}

/// How the engine seeds the state vector before a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Buses at nominal voltage, generator internals at their no-load
    /// operating point, lines at zero current. Avoids an artificial
    /// black-start transient.
    #[default]
    Nominal,
    /// Everything at zero; the run starts with the full energization
    /// transient.
    Cold,
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nominal" => Ok(InitMode::Nominal),
            "cold" => Ok(InitMode::Cold),
            other => Err(format!(
                "unknown init mode '{other}' (expected nominal or cold)"
            )),
        }
    }
}

/// Solver settings for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Step size (s).
    pub dt: f64,
    /// End time (s); a zero-length run still records its initial sample.
    pub t_end: f64,
    pub method: Method,
    /// Record every n-th step (1 records everything).
    pub decimation: usize,
    /// Controller update period (s); `None` updates controllers every step.
    pub control_period: Option<f64>,
    pub init: InitMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-5,
            t_end: 1.0,
            method: Method::Rk4,
            decimation: 100,
            control_period: None,
            init: InitMode::Nominal,
        }
    }
}

impl SolverConfig {
    /// Checks the numeric sanity of the configuration.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.decimation == 0 {
            return Err("decimation must be at least 1".to_string());
        }
        if let Some(p) = self.control_period {
            if !(p.is_finite() && p > 0.0) {
                return Err(format!("control period must be positive, got {p}"));
            }
        }
        Ok(())
    }

    /// Number of steps covering `[0, t_end]`.
    pub fn step_count(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Reusable stage workspace for one state dimension.
#[derive(Debug, Clone)]
pub struct StepBuffers {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl StepBuffers {
    pub fn new(dim: usize) -> Self {
        StepBuffers {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }
}

/// Advances `state` from `t` to `t + dt` with the chosen method.
///
/// The derivative callback may depend on `t` (for scheduled inputs); held
/// control commands are the callback's own business.
pub fn step_in_place<F>(
    method: Method,
    f: &mut F,
    t: f64,
    dt: f64,
    state: &mut [f64],
    bufs: &mut StepBuffers,
) where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = state.len();
    debug_assert_eq!(bufs.k1.len(), dim);
    match method {
        Method::Euler => {
            f(t, state, &mut bufs.k1);
            for (s, k) in state.iter_mut().zip(&bufs.k1) {
                *s += dt * k;
            }
        }
        Method::Rk4 => {
            f(t, state, &mut bufs.k1);
            for ((stage, s), k) in bufs.stage.iter_mut().zip(&*state).zip(&bufs.k1) {
                *stage = s + 0.5 * dt * k;
            }
            f(t + 0.5 * dt, &bufs.stage, &mut bufs.k2);
            for ((stage, s), k) in bufs.stage.iter_mut().zip(&*state).zip(&bufs.k2) {
                *stage = s + 0.5 * dt * k;
            }
            f(t + 0.5 * dt, &bufs.stage, &mut bufs.k3);
            for ((stage, s), k) in bufs.stage.iter_mut().zip(&*state).zip(&bufs.k3) {
                *stage = s + dt * k;
            }
            f(t + dt, &bufs.stage, &mut bufs.k4);
            for ((((s, k1), k2), k3), k4) in state
                .iter_mut()
                .zip(&bufs.k1)
                .zip(&bufs.k2)
                .zip(&bufs.k3)
                .zip(&bufs.k4)
            {
                *s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::line::line_derivative;

    /// Integrates the RL step response and returns the relative error at
    /// the final time against the closed form.
    fn rl_error(method: Method, dt: f64) -> f64 {
        let (r, l, dv) = (0.01, 1e-5, 100.0);
        let t_end = 5e-3;
        let steps = (t_end / dt).round() as u64;
        let mut state = [0.0];
        let mut bufs = StepBuffers::new(1);
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = line_derivative(y[0], dv, 0.0, r, l);
        };
        for k in 0..steps {
            step_in_place(method, &mut f, k as f64 * dt, dt, &mut state, &mut bufs);
        }
        let exact = dv / r * (1.0 - (-r * (steps as f64 * dt) / l).exp());
        ((state[0] - exact) / exact).abs()
    }

    #[test]
    fn rk4_matches_the_rl_closed_form() {
        assert!(rl_error(Method::Rk4, 1e-5) < 1e-4);
    }

    #[test]
    fn halving_dt_cuts_rk4_error_sixteenfold() {
        let coarse = rl_error(Method::Rk4, 4e-5);
        let fine = rl_error(Method::Rk4, 2e-5);
        let ratio = coarse / fine;
        assert!(
            (12.0..24.0).contains(&ratio),
            "error ratio {ratio} (coarse {coarse}, fine {fine})"
        );
    }

    #[test]
    fn empirical_orders_hold() {
        let rk4 = (rl_error(Method::Rk4, 4e-5) / rl_error(Method::Rk4, 2e-5)).log2();
        assert!(rk4 >= 3.8, "rk4 order {rk4}");
        let euler = (rl_error(Method::Euler, 4e-5) / rl_error(Method::Euler, 2e-5)).log2();
        assert!(euler >= 0.9, "euler order {euler}");
    }

    #[test]
    fn equilibria_are_fixed_points_bit_for_bit() {
        // A zero derivative leaves the state bits untouched for both
        // methods, over many steps.
        for method in [Method::Euler, Method::Rk4] {
            let mut state = [12_000.0, -3.25, 7255.2];
            let snapshot = state;
            let mut bufs = StepBuffers::new(3);
            let mut f = |_t: f64, _y: &[f64], dy: &mut [f64]| dy.fill(0.0);
            for k in 0..100_000u64 {
                step_in_place(method, &mut f, k as f64 * 1e-5, 1e-5, &mut state, &mut bufs);
            }
            assert_eq!(state, snapshot, "{method:?} drifted");
        }
    }

    #[test]
    fn stepping_is_deterministic() {
        let run = || {
            let mut state = [1.0, 0.0];
            let mut bufs = StepBuffers::new(2);
            // Lightly damped oscillator: plenty of float activity.
            let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -(2.0 * std::f64::consts::PI * 50.0).powi(2) * y[0] - 3.0 * y[1];
            };
            for k in 0..10_000u64 {
                step_in_place(
                    Method::Rk4,
                    &mut f,
                    k as f64 * 1e-5,
                    1e-5,
                    &mut state,
                    &mut bufs,
                );
            }
            state
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stage_times_see_scheduled_inputs() {
        // Integrate dy/dt = u(t) with u stepping mid-interval; RK4's inner
        // stages must sample u at t + dt/2.
        let mut state = [0.0];
        let mut bufs = StepBuffers::new(1);
        let mut sampled = Vec::new();
        let mut f = |t: f64, _y: &[f64], dy: &mut [f64]| {
            sampled.push(t);
            dy[0] = if t >= 0.5e-5 { 1.0 } else { 0.0 };
        };
        step_in_place(Method::Rk4, &mut f, 0.0, 1e-5, &mut state, &mut bufs);
        assert_eq!(sampled, vec![0.0, 0.5e-5, 0.5e-5, 1e-5]);
    }

    #[test]
    fn config_validation_catches_nonsense() {
        let good = SolverConfig::default();
        assert!(good.validate().is_ok());
        assert!(SolverConfig {
            dt: 0.0,
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            t_end: -1.0,
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            decimation: 0,
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            control_period: Some(0.0),
            ..good
        }
        .validate()
        .is_err());
    }

    #[test]
    fn step_count_handles_the_empty_run() {
        let cfg = SolverConfig {
            t_end: 0.0,
            ..SolverConfig::default()
        };
        assert_eq!(cfg.step_count(), 0);
        let cfg = SolverConfig {
            t_end: 20.0,
            dt: 1e-5,
            ..SolverConfig::default()
        };
        assert_eq!(cfg.step_count(), 2_000_000);
    }
}
