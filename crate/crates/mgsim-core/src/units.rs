//! Numeric literals with engineering suffixes.
//!
//! Netlist and scenario files write quantities as plain decimals optionally
//! followed by a single scale suffix: `u` (1e-6), `m` (1e-3), `k` (1e3),
//! `M` (1e6). Suffixes are case-sensitive — `1m` is a millihenry where
//! `1M` is a megawatt-scale number. The mantissa accepts anything Rust's
//! float parser does (`0.01`, `1.5e2`, ...).

/// Parses a decimal literal with an optional engineering suffix.
///
/// Returns `None` when the mantissa is not a valid decimal number, when the
/// suffix is unknown, or when the result is not finite. A suffix takes the
/// place of scientific notation (`100u` reads as `100e-6`, in one
/// correctly-rounded conversion), so a mantissa with its own exponent
/// cannot also carry a suffix.
pub fn parse_value(text: &str) -> Option<f64> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let exponent = match text.chars().last() {
        Some('u') => Some("e-6"),
        Some('m') => Some("e-3"),
        Some('k') => Some("e3"),
        Some('M') => Some("e6"),
        _ => None,
    };
    let value: f64 = match exponent {
        None => text.parse().ok()?,
        Some(exponent) => {
            let mantissa = &text[..text.len() - 1];
            if mantissa.contains(['e', 'E']) {
                return None;
            }
            format!("{mantissa}{exponent}").parse().ok()?
        }
    };
    value.is_finite().then_some(value)
}

/// Formats a value so that `parse_value` recovers the identical bits.
///
/// Used by the netlist/scenario serializers; relies on Rust's
/// shortest-roundtrip float formatting and never emits a suffix.
pub fn format_value(value: f64) -> String {
    format!("{value}")
}
