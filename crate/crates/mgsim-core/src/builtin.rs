//! Scenarios compiled into the library, addressable by name from the CLI
//! and tests.

/// Names of the bundled scenarios, in presentation order.
pub fn builtin_names() -> &'static [&'static str] {
    &["sps4zone", "minimal"]
}

/// The text of a bundled scenario, if `name` is one.
pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    match name {
        "sps4zone" => Some(include_str!("../scenarios/sps4zone.scn")),
        "minimal" => Some(include_str!("../scenarios/minimal.scn")),
        _ => None,
    }
}
