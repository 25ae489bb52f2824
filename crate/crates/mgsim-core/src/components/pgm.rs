//! Power generation module: a three-phase source behind an ideal averaged
//! rectifier, an AC-side RL/C filter in the rotating frame, and a DC-side
//! LC link with a damping shunt.
//!
//! The rectifier itself is algebraic and lossless: its DC voltage and AC
//! currents are linear in the link current and capacitor voltages for a
//! fixed modulation command, so the module contributes exactly six states
//! and no internal loops.

use std::f64::consts::PI;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// DC output voltage per volt of modulated AC capacitor voltage.
pub const RECTIFIER_VOLTAGE_GAIN: f64 = 3.0 * SQRT3 / PI;

/// AC current drawn per ampere of DC link current at full modulation.
pub const RECTIFIER_CURRENT_GAIN: f64 = 2.0 * SQRT3 / PI;

/// Physical constants of one generation module.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmParams {
    /// Per-phase AC inductance (H).
    pub l_ac: f64,
    /// Per-phase AC resistance (ohm).
    pub r_ac: f64,
    /// AC filter capacitance (F).
    pub c_ac: f64,
    /// Electrical frequency (Hz).
    pub f_hz: f64,
    /// DC link inductance (H).
    pub l_dc: f64,
    /// DC link resistance (ohm).
    pub r_dc: f64,
    /// DC link capacitance (F).
    pub c_dc: f64,
    /// Damping shunt across the DC link capacitor (ohm).
    pub r_damp: f64,
    /// Rectifier firing phase (rad).
    pub phase_rad: f64,
    /// Source d-axis voltage (V).
    pub v_src_d: f64,
    /// Source q-axis voltage (V).
    pub v_src_q: f64,
}

impl Default for PgmParams {
    fn default() -> Self {
        PgmParams {
            l_ac: 100e-6,
            r_ac: 0.01,
            c_ac: 100e-6,
            f_hz: 120.0,
            l_dc: 200e-6,
            r_dc: 0.01,
            c_dc: 1e-3,
            r_damp: 1e6,
            phase_rad: 0.0,
            v_src_d: 7620.0,
            v_src_q: 0.0,
        }
    }
}

impl PgmParams {
    /// Electrical angular frequency (rad/s).
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.f_hz
    }
}

/// The six states of a generation module. Field order matches the state
/// vector layout.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PgmState {
    /// d-axis AC inductor current (A).
    pub i_l_d: f64,
    /// q-axis AC inductor current (A).
    pub i_l_q: f64,
    /// d-axis AC capacitor voltage (V).
    pub v_c_d: f64,
    /// q-axis AC capacitor voltage (V).
    pub v_c_q: f64,
    /// DC link inductor current (A).
    pub i_dc: f64,
    /// DC link capacitor voltage (V) — the module's bus-facing output.
    pub v_dc_link: f64,
}

impl PgmState {
    pub const DIM: usize = 6;

    pub fn from_slice(s: &[f64]) -> Self {
        PgmState {
            i_l_d: s[0],
            i_l_q: s[1],
            v_c_d: s[2],
            v_c_q: s[3],
            i_dc: s[4],
            v_dc_link: s[5],
        }
    }

    pub fn write_slice(&self, s: &mut [f64]) {
        s[0] = self.i_l_d;
        s[1] = self.i_l_q;
        s[2] = self.v_c_d;
        s[3] = self.v_c_q;
        s[4] = self.i_dc;
        s[5] = self.v_dc_link;
    }
}

/// Algebraic rectifier terminal quantities for a given operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierTerminals {
    /// Rectifier DC-side voltage (V).
    pub v_dc: f64,
    /// d-axis AC current drawn by the rectifier (A).
    pub i_d: f64,
    /// q-axis AC current drawn by the rectifier (A).
    pub i_q: f64,
}

/// Ideal averaged rectifier map.
///
/// Lossless by construction: `1.5 * (v_c_d * i_d + v_c_q * i_q)` equals
/// `v_dc * i_dc` up to floating-point reassociation, for every input.
pub fn rectifier_map(
    modulation: f64,
    phase_rad: f64,
    v_c_d: f64,
    v_c_q: f64,
    i_dc: f64,
) -> RectifierTerminals {
    let (sin_phi, cos_phi) = phase_rad.sin_cos();
    RectifierTerminals {
        v_dc: RECTIFIER_VOLTAGE_GAIN * modulation * (v_c_d * cos_phi + v_c_q * sin_phi),
        i_d: RECTIFIER_CURRENT_GAIN * modulation * cos_phi * i_dc,
        i_q: RECTIFIER_CURRENT_GAIN * modulation * sin_phi * i_dc,
    }
}

/// State derivatives of one generation module.
///
/// `i_g_in` is the current the network draws from the module's DC bus
/// (positive when generating). The modulation command is held by the
/// caller; it is an input here, not a state.
pub fn pgm_derivatives(
    state: &PgmState,
    params: &PgmParams,
    modulation: f64,
    i_g_in: f64,
) -> PgmState {
    let omega = params.omega();
    let rect = rectifier_map(
        modulation,
        params.phase_rad,
        state.v_c_d,
        state.v_c_q,
        state.i_dc,
    );
    PgmState {
        i_l_d: (params.v_src_d + omega * params.l_ac * state.i_l_q
            - params.r_ac * state.i_l_d
            - state.v_c_d)
            / params.l_ac,
        i_l_q: (params.v_src_q
            - omega * params.l_ac * state.i_l_d
            - params.r_ac * state.i_l_q
            - state.v_c_q)
            / params.l_ac,
        v_c_d: (state.i_l_d + omega * params.c_ac * state.v_c_q - rect.i_d) / params.c_ac,
        v_c_q: (state.i_l_q - omega * params.c_ac * state.v_c_d - rect.i_q) / params.c_ac,
        i_dc: (rect.v_dc - params.r_dc * state.i_dc - state.v_dc_link) / params.l_dc,
        v_dc_link: (state.i_dc - state.v_dc_link / params.r_damp - i_g_in) / params.c_dc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// d-axis capacitor voltage that rectifies to 12 kV at full modulation.
    fn v_c_d_for_12kv() -> f64 {
        12_000.0 / RECTIFIER_VOLTAGE_GAIN
    }

    #[test]
    fn full_modulation_reaches_twelve_kilovolts() {
        let v = v_c_d_for_12kv();
        assert!((v - 7255.2).abs() < 0.2, "inversion target {v}");
        let rect = rectifier_map(1.0, 0.0, v, 0.0, 100.0);
        assert!((rect.v_dc - 12_000.0).abs() < 1e-9);
    }

    #[test]
    fn zero_modulation_disconnects() {
        let rect = rectifier_map(0.0, 0.3, 7000.0, -150.0, 420.0);
        assert_eq!(rect.v_dc, 0.0);
        assert_eq!(rect.i_d, 0.0);
        assert_eq!(rect.i_q, 0.0);
    }

    #[test]
    fn known_point_matches_hand_calculation() {
        let rect = rectifier_map(0.953, 0.0, 7255.2, 0.0, 500.0);
        let expected_v = RECTIFIER_VOLTAGE_GAIN * 0.953 * 7255.2;
        let expected_i = RECTIFIER_CURRENT_GAIN * 0.953 * 500.0;
        assert_eq!(rect.v_dc, expected_v);
        assert_eq!(rect.i_d, expected_i);
        assert_eq!(rect.i_q, 0.0);
    }

    proptest! {
        /// AC power in equals DC power out, up to reassociation error.
        #[test]
        fn rectifier_is_lossless(
            modulation in 0.0f64..1.0,
            phase in -1.5f64..1.5,
            v_c_d in -15e3f64..15e3,
            v_c_q in -15e3f64..15e3,
            i_dc in -5e3f64..5e3,
        ) {
            let rect = rectifier_map(modulation, phase, v_c_d, v_c_q, i_dc);
            let ac = 1.5 * (v_c_d * rect.i_d + v_c_q * rect.i_q);
            let dc = rect.v_dc * i_dc;
            let scale = ac.abs().max(dc.abs()).max(1.0);
            prop_assert!((ac - dc).abs() <= 1e-12 * scale, "ac={ac}, dc={dc}");
        }
    }

    #[test]
    fn unforced_origin_is_an_equilibrium() {
        let params = PgmParams {
            v_src_d: 0.0,
            v_src_q: 0.0,
            ..PgmParams::default()
        };
        let d = pgm_derivatives(&PgmState::default(), &params, 0.0, 0.0);
        assert_eq!(d, PgmState::default());
    }

    #[test]
    fn network_draw_discharges_the_link_capacitor() {
        let params = PgmParams::default();
        let state = PgmState {
            v_dc_link: 12_000.0,
            ..PgmState::default()
        };
        let base = pgm_derivatives(&state, &params, 0.95, 0.0);
        let drawn = pgm_derivatives(&state, &params, 0.95, 250.0);
        assert_eq!(base.v_dc_link - drawn.v_dc_link, 250.0 / params.c_dc);
        // Only the link capacitor equation sees the network draw.
        assert_eq!(base.i_l_d, drawn.i_l_d);
        assert_eq!(base.i_dc, drawn.i_dc);
    }

    /// Newton oracle: solve all six derivatives for zero at fixed modulation
    /// and zero network draw, independently of any simulation loop.
    fn equilibrium_oracle(params: &PgmParams, modulation: f64) -> PgmState {
        use nalgebra::{DMatrix, DVector};
        let f = |x: &[f64]| -> [f64; 6] {
            let d = pgm_derivatives(&PgmState::from_slice(x), params, modulation, 0.0);
            let mut out = [0.0; 6];
            d.write_slice(&mut out);
            out
        };
        let mut x = [0.0, 0.0, params.v_src_d, params.v_src_q, 0.0, 12_000.0];
        for _ in 0..50 {
            let fx = f(&x);
            let norm: f64 = fx.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-9 {
                break;
            }
            let mut jac = DMatrix::zeros(6, 6);
            for j in 0..6 {
                let h = 1e-4 * x[j].abs().max(1.0);
                let mut xp = x;
                xp[j] += h;
                let fp = f(&xp);
                for i in 0..6 {
                    jac[(i, j)] = (fp[i] - fx[i]) / h;
                }
            }
            let rhs = DVector::from_iterator(6, fx.iter().map(|v| -v));
            let step = jac.lu().solve(&rhs).expect("singular Jacobian");
            for i in 0..6 {
                x[i] += step[i];
            }
        }
        PgmState::from_slice(&x)
    }

    #[test]
    fn no_load_equilibrium_exists_and_is_consistent() {
        let params = PgmParams::default();
        // Feedforward inversion for a 12 kV link at zero link current.
        let modulation = PI / (3.0 * SQRT3) * 12_000.0 / params.v_src_d;
        assert!(modulation < 1.0);

        let eq = equilibrium_oracle(&params, modulation);
        let d = pgm_derivatives(&eq, &params, modulation, 0.0);

        // Normalize derivatives per unit: voltages against the 12 kV bus,
        // currents against 1 kA, both per second.
        let pu = [
            d.i_l_d / 1e3,
            d.i_l_q / 1e3,
            d.v_c_d / 12e3,
            d.v_c_q / 12e3,
            d.i_dc / 1e3,
            d.v_dc_link / 12e3,
        ];
        for (i, v) in pu.iter().enumerate() {
            assert!(v.abs() < 1e-6, "derivative {i} = {v} pu/s");
        }
        // The solved operating point is physically sensible. At no load the
        // rotating-frame LC filter amplifies the source by 1 / (1 - w^2 L C),
        // so the feedforward modulation puts the link that factor above its
        // 12 kV target; series-resistance corrections at the damping shunt's
        // microamp draw are a few millivolts.
        let w = params.omega();
        let lc_gain = 1.0 / (1.0 - w * w * params.l_ac * params.c_ac);
        assert!(
            (eq.v_dc_link - 12_000.0 * lc_gain).abs() < 0.1,
            "link {} vs analytic {}",
            eq.v_dc_link,
            12_000.0 * lc_gain
        );
        assert!(
            (eq.i_dc - eq.v_dc_link / params.r_damp).abs() < 1e-6,
            "link current {} should feed only the damping shunt",
            eq.i_dc
        );
    }
}
