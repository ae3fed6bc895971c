//! Exponents, wing-depth choice, per-term estimate checks and the main sweep.

pub mod checks;
pub mod exponents;
pub mod sweep;

pub use checks::{
    check_large_modes, check_small_modes, Applicability, LargeModeReport, ModeConstant, SmallModeReport, TermReport,
};
pub use exponents::{alpha_large, alpha_small, exponent_from_f64, rho, to_f64, Exponent};
pub use sweep::{b_values, choose_b, theorem_sweep, BoundReport, BoundRow, ChosenB, SweepConfig};
