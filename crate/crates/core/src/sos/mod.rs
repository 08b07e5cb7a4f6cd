//! Truncated quadratic-module membership compiled to SDPs, and certificate
//! reconstruction.

mod certificate;
mod compile;

pub use certificate::{
    extract_certificate, polish_solution, Certificate, CertificateStats, FreeCertificate,
    GramCertificate, MembershipCertificate, PSD_SLACK, RESIDUAL_TOL,
};
pub use compile::{
    compile, gram_basis, AffineTarget, CompiledSos, DecisionParam, FreeLayout, GramLayout,
    Membership, ParamConstraint, ParamSign, ParamSlot, SosMembershipProblem,
};

use serde::Serialize;

use crate::error::Result;
use crate::sdp::{solve, SdpOptions, SdpSolution, SolveStatus};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub n_constraints: usize,
    pub block_dims: Vec<usize>,
    pub n_free: usize,
    pub pruned_basis_monomials: usize,
}

impl SolverStats {
    fn new(compiled: &CompiledSos, sol: Option<&SdpSolution>, status: SolveStatus) -> Self {
        let nan = f64::NAN;
        SolverStats {
            status,
            iterations: sol.map_or(0, |s| s.iterations),
            primal_objective: sol.map_or(nan, |s| s.primal_objective),
            dual_objective: sol.map_or(nan, |s| s.dual_objective),
            primal_infeasibility: sol.map_or(nan, |s| s.primal_infeasibility),
            dual_infeasibility: sol.map_or(nan, |s| s.dual_infeasibility),
            relative_gap: sol.map_or(nan, SdpSolution::relative_gap),
            n_constraints: compiled.sdp.n_constraints(),
            block_dims: compiled.sdp.block_dims.clone(),
            n_free: compiled.sdp.n_free,
            pruned_basis_monomials: compiled.pruned,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MembershipOutcome {
    pub status: SolveStatus,
    /// Present whenever a validated decomposition was read back, even if the
    /// solver stopped short of its own tolerances.
    pub certificate: Option<Certificate>,
    pub solver: SolverStats,
    /// Why a returned iterate did not yield a certificate.
    pub rejection: Option<String>,
}

/// Compiles, solves and validates in one step.
pub fn solve_membership(
    problem: &SosMembershipProblem,
    opts: &SdpOptions,
) -> Result<MembershipOutcome> {
    let compiled = compile(problem)?;
    if compiled.structurally_infeasible {
        return Ok(MembershipOutcome {
            status: SolveStatus::PrimalInfeasible,
            certificate: None,
            solver: SolverStats::new(&compiled, None, SolveStatus::PrimalInfeasible),
            rejection: Some("a coefficient row has no unknowns but a nonzero target".into()),
        });
    }
    let sol = solve(&compiled.sdp, opts)?;
    let (certificate, rejection) = match sol.status {
        SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible => (None, None),
        _ => match extract_certificate(problem, &compiled, &sol) {
            Ok(c) => (Some(c), None),
            // Stalled iterates are typically interior with a small residual;
            // projecting onto the coefficient identity usually recovers them.
            Err(e) => match polish_solution(&compiled, &sol)
                .map(|p| extract_certificate(problem, &compiled, &p))
            {
                Some(Ok(c)) => (Some(c), None),
                Some(Err(e2)) => (None, Some(format!("{e}; after polishing: {e2}"))),
                None => (None, Some(e.to_string())),
            },
        },
    };
    if let Some(r) = &rejection {
        log::debug!("no certificate from {:?} iterate: {r}", sol.status);
    }
    Ok(MembershipOutcome {
        status: sol.status,
        solver: SolverStats::new(&compiled, Some(&sol), sol.status),
        certificate,
        rejection,
    })
}
