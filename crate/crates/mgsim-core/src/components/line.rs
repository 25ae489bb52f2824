//! RL distribution line: one current state per edge.

/// Current derivative of a series RL line.
///
/// Positive current flows from the `v_in` terminal to the `v_out` terminal.
pub fn line_derivative(
    current: f64,
    v_in: f64,
    v_out: f64,
    resistance: f64,
    inductance: f64,
) -> f64 {
    (v_in - v_out - resistance * current) / inductance
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_drive_no_change() {
        assert_eq!(line_derivative(0.0, 12_000.0, 12_000.0, 0.01, 1e-5), 0.0);
    }

    #[test]
    fn steady_current_balances_the_drop() {
        // 100 V across 0.01 ohm carries 10 kA with zero derivative.
        assert_eq!(
            line_derivative(10_000.0, 12_100.0, 12_000.0, 0.01, 1e-5),
            0.0
        );
    }

    #[test]
    fn step_response_matches_the_closed_form() {
        // di/dt = (dv - R i) / L  =>  i(t) = dv/R * (1 - exp(-R t / L)).
        let (r, l, dv) = (0.01, 1e-5, 100.0);
        let dt = 1e-5;
        let mut i = 0.0;
        let mut t = 0.0;
        for _ in 0..500 {
            // Local RK4, written out so this test does not depend on the
            // solver module it helps to validate.
            let f = |i: f64| line_derivative(i, dv, 0.0, r, l);
            let k1 = f(i);
            let k2 = f(i + 0.5 * dt * k1);
            let k3 = f(i + 0.5 * dt * k2);
            let k4 = f(i + dt * k3);
            i += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += dt;
        }
        let exact = dv / r * (1.0 - (-r * t / l).exp());
        assert!(
            ((i - exact) / exact).abs() < 1e-4,
            "numeric {i} vs analytic {exact}"
        );
    }
}
