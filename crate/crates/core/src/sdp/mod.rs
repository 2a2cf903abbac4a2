//! Semidefinite programming over Hermitian blocks.

mod certificate;
mod problem;
mod solver;

pub use certificate::{check_certificate, CertificateReport};
pub use problem::{
    embed_complex, embed_hermitian, extract_hermitian, from_basis_coefficients, hermitian_basis, BlockTerm, Constraint,
    RealConstraint, RealSdp, RealTerm, SdpProblem, Sense,
};
pub use solver::{solve, solve_real, RealSolution, SdpSolution, SolveStatus, SolverOptions};
