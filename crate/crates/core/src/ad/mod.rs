//! Reverse-mode automatic differentiation for the small dense graphs the
//! recurrent filters need. Complex quantities are carried as separate real
//! and imaginary nodes.

mod complex;
mod gradcheck;
mod tape;

pub use complex::CVar;
pub use gradcheck::{grad_check, GradCheckReport, SMALL_GRADIENT};
pub use tape::{sigmoid, Tape, Var};
