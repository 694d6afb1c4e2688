//! Physical model: units, the four-site Hamiltonian, bath spectral densities and
//! density matrices.

pub mod density;
pub mod spectral;
pub mod system;
pub mod units;

pub use density::{DensityDiagnostics, DensityMatrix};
pub use spectral::SpectralDensity;
pub use system::{dipole_coupling, ExcitonSystem, TetramerGeometry, MATRIX_REL_TOL};
pub use units::{Frame, FrameMap};
