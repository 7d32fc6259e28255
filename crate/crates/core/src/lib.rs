//! Score-based diffusion on SO(3) and SE(3)^N.
//!
//! The crate is organised bottom-up:
//!
//! - [`so3`]: exact rotation-group primitives (hat/vee, exp/log, angle,
//!   tangent Gaussians, uniform sampling, quaternions).
//! - [`igso3`]: the isotropic Gaussian on SO(3) as a truncated heat-kernel
//!   series, its angular derivative, conditional score and tabulated sampler,
//!   plus the SU(2) analogue.
//! - [`schedules`]: translation (VP) and rotation noise schedules and the
//!   denoising score-matching weights.
//! - [`se3`]: frames, centering, forward noising and the time-reversed
//!   geodesic random walk on SE(3)^N.
//! - [`toy`]: a discrete target on SO(3) with its exact mixture score and
//!   matched forward/reverse simulations.
//! - [`backbone`] and [`pdb`]: residue frames from backbone atoms, atom
//!   reconstruction, training losses and PDB output.
//! - [`cli`]: the command-line driver behind the `se3-diffuse` binary.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backbone;
pub mod cli;
mod error;
pub mod igso3;
pub mod pdb;
pub mod rng;
pub mod schedules;
pub mod se3;
pub mod so3;
pub mod stats;
pub mod tabulated;
pub mod toy;

pub use error::{Error, Result};
pub use so3::{Rotation, Vec3};
