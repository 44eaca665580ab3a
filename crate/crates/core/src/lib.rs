//! Numerics for recurrence sets of finite conformal iterated function
//! systems on [0,1]: cylinder enumeration, topological pressure and
//! depth-n Bowen roots, recurrence-target witnesses and covering series,
//! the separated Cantor construction with its mass distribution, and the
//! continued-fraction / quadratic-surd applications.

pub mod cantor;
pub mod error;
pub mod exact;
pub mod ifs;
pub mod number_theory;
pub mod numeric;
pub mod potential;
pub mod recurrence;
pub mod thermo;

pub use error::{Error, Result};
pub use ifs::{
    build_system, cylinder_record, enumerate_cylinders, BranchSpec, CylinderRecord, IfsSystem,
    SystemKind, Word,
};
pub use potential::Potential;

/// Default cap on cylinder evaluations per operation.
pub const DEFAULT_BUDGET: u64 = 50_000_000;
