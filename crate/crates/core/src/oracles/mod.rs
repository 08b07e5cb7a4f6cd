//! Independent numerical checks: dense eigenvalues, sampling of the
//! eigenvalue landscape, certificate audits and finite differences.

mod audit;
mod eigen;
mod sample;

pub use audit::{
    check_certificate_sampled, finite_difference_audit, CertificateAudit, AUDIT_IDENTITY_TOL,
    AUDIT_PSD_TOL,
};
pub use eigen::{jacobi_eigenvalues, max_eigenvalue};
pub use sample::{
    infer_bounding_box, sample_max_eigenvalue, worker_threads, SampleReport, DEFAULT_SEED,
    MIN_ACCEPTANCE,
};
