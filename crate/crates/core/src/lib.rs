//! Numerical laboratory for Carleman-based stability of a time-dependent
//! potential `q(t, x2)` in the heat equation `∂t u − Δu + q(t,x2) f(x1) u = 0`
//! on a two-dimensional waveguide.
//!
//! Modules, bottom-up:
//!
//! * [`grid`]: space-time grid, sampled fields, stencils, quadrature, persistence
//! * [`weights`]: Carleman weight systems and their assumption checks
//! * [`forward`]: Crank–Nicolson forward solver and manufactured data
//! * [`transform`]: the `u, ũ → v → w → z` reduction with consistency checks
//! * [`carleman`]: weighted norms, integral lemmas and Carleman-estimate checks
//! * [`stability`]: both sides of the stability estimate and perturbation sweeps

pub mod carleman;
pub mod error;
pub mod fit;
pub mod forward;
pub mod grid;
pub mod par;
pub mod presets;
pub mod report;
pub mod stability;
pub mod transform;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{FieldKind, ScalarField, Segment, SpaceTimeGrid, WaveguideDomain};
pub use weights::{Regime, WeightParams, WeightSystem};
