//! Alternating-shear passive scalar laboratory.
//!
//! Builds piecewise-in-time shear velocity programs, evaluates the inviscid
//! transport solution exactly by composing shear maps, solves the
//! advection–diffusion equation pseudospectrally with exact sub-flows, and
//! measures dissipation, norm growth and Hölder diagnostics.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod field;
pub mod inviscid;
pub mod oracle;
pub mod profile;
pub mod program;
pub mod viscous;

pub use error::{Error, Result};
pub use field::{Axis, Layout, SpectralField};
pub use inviscid::{HarmonicData, HarmonicKind, InitialData};
pub use profile::SawtoothProfile;
pub use program::{Direction, Stage, StageSchedule};
pub use viscous::{DissipationLedger, SolverConfig};
