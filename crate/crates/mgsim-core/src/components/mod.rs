//! Averaged component models.
//!
//! Every model here is low-bandwidth: switching is averaged away and each
//! component reduces to a small set of continuous states with closed-form
//! derivatives. All derivative functions are pure — same inputs, same bits —
//! which is what makes whole-run determinism possible.

pub mod ess;
pub mod line;
pub mod load;
pub mod pgm;

pub use ess::{EssParams, EssState};
pub use line::line_derivative;
pub use load::{load_derivative, LoadParams};
pub use pgm::{pgm_derivatives, rectifier_map, PgmParams, PgmState, RectifierTerminals};
