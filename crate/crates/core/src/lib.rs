//! Simulation and parameter estimation for a driven, lossy, dephasing bosonic
//! mode that is read out through the dispersive shift of a coupled qubit.
//!
//! The state-space code ([`fockspace`], [`ode`], [`pulses`], [`lindblad`] and
//! the moment equations in [`protocols::moments`]) is generic over the scalar
//! type through [`Real`]. Device arithmetic, protocols, fitting and I/O work
//! in `f64`; the aliases below fix the generic types to double precision.

pub mod dataio;
pub mod dispersive;
pub mod error;
pub mod estimation;
pub mod fockspace;
pub mod lindblad;
pub mod ode;
pub mod protocols;
pub mod pulses;
pub mod scalar;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type ComplexMatrix = fockspace::Matrix<f64>;
pub type DensityMatrix = fockspace::Density<f64>;
pub type PulseSegment = pulses::Segment<f64>;
pub type PulseSchedule = pulses::Schedule<f64>;
pub type DissipatorSpec = lindblad::Dissipator<f64>;
pub type Trajectory = lindblad::Trajectory<f64>;
pub type SolverOptions = lindblad::SolverOptions<f64>;
pub type Moments = protocols::moments::Moments<f64>;
