//! Denoising diffusion of per-vertex signals on triangle meshes.
//!
//! Signals (typically RGB texture colour) live on mesh vertices. A noise
//! prediction network propagates features over the surface with a spectral
//! heat kernel built from the cotangent Laplace-Beltrami operator, combined
//! with tangent-plane gradient features and a timestep-aware per-vertex MLP.
//! The network is trained with the usual DDPM objective and sampled with
//! ancestral sampling.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: triangle meshes, OBJ/PLY IO, normals and tangent frames.
//! - [`spectral`]: stiffness/mass assembly, generalized eigensolver, heat
//!   filter, gradient operators and the on-disk operator cache.
//! - [`net`]: the noise prediction network with hand-written reverse mode.
//! - [`diffusion`]: noise schedule, forward noising, training and sampling.
//! - [`data`]: image baking, per-face atlas conversion and padded batches.
//! - [`eval`]: minimum matching distance, coverage and timing.

pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod io_util;
pub mod linalg;
pub mod mesh;
pub mod net;
pub mod spectral;

pub use error::{Error, Result};
pub use mesh::{Mesh, TangentFrames};
pub use spectral::SpectralOperators;
