//! Self-contained numerical kernels: Hermitian eigendecomposition, a dense
//! semidefinite-program solver over Hermitian blocks, rank-one extraction
//! with Gaussian randomization, and the proximal quadratic solve used by the
//! consensus updates.

mod eig;
mod extract;
mod prox;
mod sdp;

pub use eig::{hermitian_eig, principal_eigenvector, HermitianEig};
pub use extract::{rank_one_extract, ExtractionContext, RankOneCandidate};
pub use prox::prox_quadratic_solve;
pub use sdp::{sdp_solve, BlockMatrix, SdpConstraint, SdpProblem, SdpSolution, SdpStatus, Sense};
