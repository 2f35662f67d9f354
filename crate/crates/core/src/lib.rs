//! Geometry, kernels, admissible paths, first-exit simulation and grid
//! solvers for `L = ∇_X·(A∇_X) + X·∇_Y − ∂_t`.

pub mod chains;
pub mod domain;
pub mod group;
pub mod kernel;
pub mod par;
pub mod quad;
pub mod simulate;
pub mod solve;
pub mod stats;
pub mod verify;
