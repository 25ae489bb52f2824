//! Hierarchical control: droop sharing, secondary bus restoration,
//! rectifier device control, and storage fluctuation compensation.
//!
//! All controllers here are discrete maps updated once per control period
//! and held (zero-order) between updates. None of them feeds an algebraic
//! path back into the plant within a step, which preserves the network's
//! causal schedule.

use crate::components::pgm::RECTIFIER_VOLTAGE_GAIN;
use crate::error::ControlError;

/// Denominator magnitude below which the rectifier feedforward refuses to
/// invert (V).
pub const FEEDFORWARD_MIN_DENOMINATOR: f64 = 1e-6;

/// Droop law of one generator: setpoint as an affine map of its injected
/// current.
#[derive(Debug, Clone, PartialEq)]
pub struct DroopConfig {
    /// Open-circuit voltage command (V).
    pub v_ref: f64,
    /// Virtual resistance (ohm); higher values shed more load.
    pub resistance: f64,
}

/// Voltage setpoint for a generator injecting `current_a`, shifted by the
/// secondary correction shared across all generators.
pub fn droop_command(config: &DroopConfig, current_a: f64, secondary_shift_v: f64) -> f64 {
    config.v_ref - config.resistance * current_a + secondary_shift_v
}

/// Splits a base virtual resistance across generators so that steady-state
/// currents share in proportion to `weights`.
///
/// Weights and `r_base` must be positive.
pub fn design_droop_resistances(r_base: f64, weights: &[f64]) -> Vec<f64> {
    assert!(r_base > 0.0, "droop base resistance must be positive");
    weights
        .iter()
        .map(|&w| {
            assert!(w > 0.0, "droop weights must be positive");
            r_base / w
        })
        .collect()
}

/// First-order measurement filter, advanced by the exact exponential for
/// each zero-order-hold interval.
///
/// Sensed electrical quantities are band-limited before they enter control
/// laws. Feeding a raw instantaneous current into the droop law couples the
/// controller to the network's lightly damped LC resonances through the
/// rectifier feedforward, which destabilizes the loop; a measurement pole a
/// decade or two below those resonances restores gain margin while leaving
/// the static droop characteristic untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPassFilter {
    rate: f64,
    value: f64,
}

impl LowPassFilter {
    /// A filter with pole `rate` (rad/s), starting from zero.
    pub fn new(rate: f64) -> Self {
        Self::with_initial(rate, 0.0)
    }

    /// A filter pre-settled at `value`, for starting at an operating point.
    pub fn with_initial(rate: f64, value: f64) -> Self {
        assert!(
            rate > 0.0 && rate.is_finite(),
            "filter rate must be positive and finite"
        );
        LowPassFilter { rate, value }
    }

    /// Current filtered value without advancing time.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Advances the filter by `dt` toward `input` and returns the new value.
    pub fn update(&mut self, input: f64, dt: f64) -> f64 {
        let settle = 1.0 - (-self.rate * dt).exp();
        self.value += settle * (input - self.value);
        self.value
    }
}

/// Discrete PI with conditional anti-windup: the integral is committed only
/// when the resulting output stays inside the clamp, so a saturated loop
/// holds its integral instead of winding up.
#[derive(Debug, Clone, PartialEq)]
pub struct PiController {
    pub kp: f64,
    pub ki: f64,
    integral: f64,
}

impl PiController {
    pub fn new(kp: f64, ki: f64) -> Self {
        PiController {
            kp,
            ki,
            integral: 0.0,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// One rectangle-rule update producing an output in `[lo, hi]`.
    pub fn update_clamped(&mut self, error: f64, dt: f64, lo: f64, hi: f64) -> f64 {
        let trial_integral = self.integral + error * dt;
        let trial = self.kp * error + self.ki * trial_integral;
        if trial > hi {
            hi
        } else if trial < lo {
            lo
        } else {
            self.integral = trial_integral;
            trial
        }
    }
}

/// Secondary loop: restores a designated main bus to its setpoint by
/// producing the shared droop shift.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryControl {
    /// Bus voltage setpoint (V).
    pub v_setpoint: f64,
    pi: PiController,
    shift_min: f64,
    shift_max: f64,
}

impl SecondaryControl {
    /// Default shift authority is +-10% of the setpoint.
    pub fn new(v_setpoint: f64, kp: f64, ki: f64) -> Self {
        SecondaryControl {
            v_setpoint,
            pi: PiController::new(kp, ki),
            shift_min: -0.1 * v_setpoint,
            shift_max: 0.1 * v_setpoint,
        }
    }

    pub fn with_limits(mut self, shift_min: f64, shift_max: f64) -> Self {
        self.shift_min = shift_min;
        self.shift_max = shift_max;
        self
    }

    pub fn integral(&self) -> f64 {
        self.pi.integral()
    }

    /// Produces the droop shift from the measured main-bus voltage.
    pub fn update(&mut self, v_measured: f64, dt: f64) -> f64 {
        let error = self.v_setpoint - v_measured;
        self.pi
            .update_clamped(error, dt, self.shift_min, self.shift_max)
    }
}

/// Modulation command that would hold the link at `v_target_v` in steady
/// state, from the inverse rectifier map evaluated at the AC-side voltage
/// references.
pub fn rectifier_feedforward(
    v_target_v: f64,
    i_dc_a: f64,
    r_dc_ohm: f64,
    v_ref_d: f64,
    v_ref_q: f64,
    phase_rad: f64,
) -> Result<f64, ControlError> {
    let (sin_phi, cos_phi) = phase_rad.sin_cos();
    let denominator = v_ref_d * cos_phi + v_ref_q * sin_phi;
    if denominator.abs() < FEEDFORWARD_MIN_DENOMINATOR {
        return Err(ControlError::DegenerateReference {
            denominator,
            threshold: FEEDFORWARD_MIN_DENOMINATOR,
        });
    }
    Ok((r_dc_ohm * i_dc_a + v_target_v) / (RECTIFIER_VOLTAGE_GAIN * denominator))
}

/// Device-level rectifier control: feedforward plus PI trim on the link
/// voltage, with the total modulation clamped to `[0, 1]` and the integral
/// frozen while clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifierControl {
    pi: PiController,
    /// DC link resistance used by the feedforward inversion (ohm).
    pub r_dc_ohm: f64,
    /// AC-side d-axis voltage reference (V).
    pub v_ref_d: f64,
    /// AC-side q-axis voltage reference (V).
    pub v_ref_q: f64,
    /// Firing phase (rad).
    pub phase_rad: f64,
}

impl RectifierControl {
    pub fn new(
        kp: f64,
        ki: f64,
        r_dc_ohm: f64,
        v_ref_d: f64,
        v_ref_q: f64,
        phase_rad: f64,
    ) -> Self {
        RectifierControl {
            pi: PiController::new(kp, ki),
            r_dc_ohm,
            v_ref_d,
            v_ref_q,
            phase_rad,
        }
    }

    pub fn integral(&self) -> f64 {
        self.pi.integral()
    }

    /// One update: returns the modulation command in `[0, 1]`.
    pub fn update(
        &mut self,
        v_target_v: f64,
        v_measured_v: f64,
        i_dc_a: f64,
        dt: f64,
    ) -> Result<f64, ControlError> {
        let feedforward = rectifier_feedforward(
            v_target_v,
            i_dc_a,
            self.r_dc_ohm,
            self.v_ref_d,
            self.v_ref_q,
            self.phase_rad,
        )?;
        let error = v_target_v - v_measured_v;
        let trim = self
            .pi
            .update_clamped(error, dt, -feedforward, 1.0 - feedforward);
        Ok(feedforward + trim)
    }
}

/// Which part of the filtered load a storage unit serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    /// Inject the fluctuation component (load minus its low-pass), decaying
    /// to zero injection in steady state. The default.
    Highpass,
    /// Inject the low-pass itself, so storage gradually assumes the steady
    /// load.
    Lowpass,
}

/// Per-zone storage compensator: a first-order filter on the zone load
/// power whose complement (or output, in low-pass mode) becomes the storage
/// power reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EssCompensator {
    /// Filter rate (1/s); this is the advertised storage response rate.
    pub filter_rate: f64,
    pub mode: StorageMode,
    filtered_w: f64,
}

impl EssCompensator {
    pub fn new(filter_rate: f64, mode: StorageMode) -> Self {
        EssCompensator {
            filter_rate,
            mode,
            filtered_w: 0.0,
        }
    }

    /// Starts the filter already settled at `filtered_w`, so a run that
    /// begins in steady state produces no artificial storage transient.
    pub fn with_initial_filtered(filter_rate: f64, mode: StorageMode, filtered_w: f64) -> Self {
        EssCompensator {
            filter_rate,
            mode,
            filtered_w,
        }
    }

    pub fn filtered_w(&self) -> f64 {
        self.filtered_w
    }

    /// Advances the filter by `dt` under a constant `p_load_w` and returns
    /// the storage power reference (W).
    ///
    /// The filter is integrated exactly over the interval, so a load step
    /// produces the textbook exponential at every sample time regardless of
    /// step size.
    pub fn update(&mut self, p_load_w: f64, dt: f64) -> f64 {
        let settle = 1.0 - (-self.filter_rate * dt).exp();
        self.filtered_w += settle * (p_load_w - self.filtered_w);
        match self.mode {
            StorageMode::Highpass => p_load_w - self.filtered_w,
            StorageMode::Lowpass => self.filtered_w,
        }
    }
}
