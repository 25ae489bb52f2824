//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while reading netlist or scenario text.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    /// The line is not syntactically a directive.
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// The line parses but names something that cannot exist: duplicate ids,
    /// unknown node references, unknown keys, non-positive line parameters.
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
}

impl ParseError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn semantic(line: usize, message: impl Into<String>) -> Self {
        ParseError::Semantic {
            line,
            message: message.into(),
        }
    }
}

/// Errors raised by control-law evaluation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ControlError {
    /// The rectifier feedforward denominator collapsed: the AC-side voltage
    /// reference projected onto the firing phase is too small to invert.
    #[error("degenerate rectifier reference: |{denominator}| V below {threshold} V")]
    DegenerateReference { denominator: f64, threshold: f64 },
}

/// Errors raised while integrating a system.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimulationError {
    /// A state left the representable range. `component` names the state
    /// owner as it appears in output columns.
    #[error("numerical divergence at t = {t} s: {component} = {value}")]
    Divergence {
        t: f64,
        component: String,
        value: f64,
    },
    /// The scenario references a control target that does not exist.
    #[error("invalid configuration: {0}")]
    Config(String),
}
