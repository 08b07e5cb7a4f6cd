use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::compile::{CompiledSos, ParamSlot, SosMembershipProblem};
use crate::error::{Error, Result};
use crate::poly::{Monomial, Polynomial};
use crate::sdp::SdpSolution;

/// Largest accepted coefficient mismatch of the reconstructed identity.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Most negative accepted Gram eigenvalue.
pub const PSD_SLACK: f64 = 1e-7;

/// `multiplier * basis^T matrix basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramCertificate {
    pub multiplier: Polynomial,
    pub basis: Vec<Monomial>,
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

impl GramCertificate {
    pub fn sos(&self) -> Polynomial {
        let n_vars = self.multiplier.n_vars();
        let mut terms = Vec::new();
        for a in 0..self.basis.len() {
            for b in a..self.basis.len() {
                let q = self.matrix[(a, b)];
                let w = if a == b { q } else { 2.0 * q };
                terms.push((self.basis[a].mul(&self.basis[b]), w));
            }
        }
        Polynomial::from_terms(n_vars, terms)
    }

    pub fn term(&self) -> Polynomial {
        self.multiplier
            .mul(&self.sos())
            .expect("multiplier and basis share variables")
    }
}

/// `constraint * polynomial` for an equality constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeCertificate {
    pub constraint: Polynomial,
    pub polynomial: Polynomial,
}

/// The decomposition of one membership target.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipCertificate {
    pub grams: Vec<GramCertificate>,
    pub free_multipliers: Vec<FreeCertificate>,
    pub identity_residual: f64,
}

impl MembershipCertificate {
    /// `sum_j g_j sigma_j + sum_j h_j p_j`.
    pub fn expansion(&self, n_vars: usize) -> Result<Polynomial> {
        let mut out = Polynomial::zero(n_vars);
        for g in &self.grams {
            out = out.add(&g.term())?;
        }
        for f in &self.free_multipliers {
            out = out.add(&f.constraint.mul(&f.polynomial)?)?;
        }
        Ok(out)
    }

    /// Max coefficient of `target - expansion`.
    pub fn residual_against(&self, target: &Polynomial) -> Result<f64> {
        let diff = target.sub(&self.expansion(target.n_vars())?)?;
        Ok(diff.max_abs_coeff())
    }

    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.grams
            .iter()
            .map(|g| g.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub level: u32,
    /// Objective value at the returned parameters.
    pub optimum: f64,
    pub params: Vec<f64>,
    /// One decomposition per membership, in problem order.
    pub parts: Vec<MembershipCertificate>,
    /// Largest identity residual over the parts.
    pub identity_residual: f64,
}

/// Compact summary for reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateStats {
    pub level: u32,
    pub optimum: f64,
    pub gram_sizes: Vec<usize>,
    pub min_gram_eigenvalue: f64,
    pub n_free_multiplier_coeffs: usize,
    pub identity_residual: f64,
}

impl Certificate {
    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.parts
            .iter()
            .map(MembershipCertificate::min_gram_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn stats(&self) -> CertificateStats {
        let grams = self.parts.iter().flat_map(|p| &p.grams);
        let free = self.parts.iter().flat_map(|p| &p.free_multipliers);
        CertificateStats {
            level: self.level,
            optimum: self.optimum,
            gram_sizes: grams.map(|g| g.basis.len()).collect(),
            min_gram_eigenvalue: self.min_gram_eigenvalue(),
            n_free_multiplier_coeffs: free.map(|f| f.polynomial.n_terms()).sum(),
            identity_residual: self.identity_residual,
        }
    }

    /// Checks every stored identity and the Gram spectra against `targets`
    /// (one per part).
    pub fn validate(&mut self, targets: &[Polynomial]) -> Result<()> {
        if targets.len() != self.parts.len() {
            return Err(Error::MalformedProblem(format!(
                "{} targets for {} certificate parts",
                targets.len(),
                self.parts.len()
            )));
        }
        let mut worst: f64 = 0.0;
        for (part, target) in self.parts.iter_mut().zip(targets) {
            part.identity_residual = part.residual_against(target)?;
            worst = worst.max(part.identity_residual);
        }
        self.identity_residual = worst;
        let min_eig = self.min_gram_eigenvalue();
        if min_eig < -PSD_SLACK {
            return Err(Error::IndefiniteGram {
                min_eigenvalue: min_eig,
            });
        }
        if !(worst <= RESIDUAL_TOL) {
            return Err(Error::CertificateRejected {
                residual: worst,
                tol: RESIDUAL_TOL,
            });
        }
        Ok(())
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

/// Reads Gram matrices and multipliers from `solution` and validates the
/// reconstructed identities.
pub fn extract_certificate(
    problem: &SosMembershipProblem,
    compiled: &CompiledSos,
    solution: &SdpSolution,
) -> Result<Certificate> {
    let params: Vec<f64> = compiled
        .params
        .iter()
        .map(|slot| match *slot {
            ParamSlot::Free(k) => solution.x_free[k],
            ParamSlot::Block(b) => solution.x_blocks[b][(0, 0)],
        })
        .collect();
    let mut parts: Vec<MembershipCertificate> = (0..problem.memberships.len())
        .map(|_| MembershipCertificate {
            grams: Vec::new(),
            free_multipliers: Vec::new(),
            identity_residual: f64::NAN,
        })
        .collect();
    for g in &compiled.grams {
        let matrix = solution.x_blocks[g.block].clone();
        parts[g.membership].grams.push(GramCertificate {
            multiplier: g.multiplier.clone(),
            basis: g.basis.clone(),
            min_eigenvalue: min_eigenvalue(&matrix),
            matrix,
        });
    }
    for f in &compiled.free {
        let n_vars = f.constraint.n_vars();
        parts[f.membership].free_multipliers.push(FreeCertificate {
            constraint: f.constraint.clone(),
            polynomial: Polynomial::from_terms(
                n_vars,
                f.basis
                    .iter()
                    .enumerate()
                    .map(|(k, m)| (m.clone(), solution.x_free[f.first_free + k])),
            ),
        });
    }
    let optimum = problem.objective.iter().map(|&(k, c)| c * params[k]).sum();
    let targets = problem
        .memberships
        .iter()
        .map(|m| m.target.evaluate(&params))
        .collect::<Result<Vec<_>>>()?;
    let mut cert = Certificate {
        level: problem.level,
        optimum,
        params,
        parts,
        identity_residual: f64::NAN,
    };
    cert.validate(&targets)?;
    Ok(cert)
}

/// Returns a copy of `solution` whose Gram matrices and free multipliers meet
/// the coefficient rows exactly (up to rounding), with the decision
/// parameters held fixed. The correction has minimum Euclidean norm, so an
/// interior iterate with a small residual stays positive semidefinite.
pub fn polish_solution(compiled: &CompiledSos, solution: &SdpSolution) -> Option<SdpSolution> {
    let mut cols: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut free_cols: HashMap<usize, usize> = HashMap::new();
    let mut n_cols = 0;
    for g in &compiled.grams {
        let n = g.basis.len();
        for i in 0..n {
            for j in i..n {
                cols.insert((g.block, i, j), n_cols);
                n_cols += 1;
            }
        }
    }
    for f in &compiled.free {
        for k in 0..f.basis.len() {
            free_cols.insert(f.first_free + k, n_cols);
            n_cols += 1;
        }
    }
    let n_rows = compiled.rows.len();
    if n_rows == 0 || n_cols == 0 {
        return None;
    }
    let mut a = DMatrix::zeros(n_rows, n_cols);
    let mut r = DVector::zeros(n_rows);
    for (row, c) in compiled.sdp.constraints[..n_rows].iter().enumerate() {
        for e in &c.entries {
            if let Some(&col) = cols.get(&(e.block, e.i, e.j)) {
                a[(row, col)] += if e.i == e.j { e.value } else { 2.0 * e.value };
            }
        }
        for &(k, v) in &c.free {
            if let Some(&col) = free_cols.get(&k) {
                a[(row, col)] += v;
            }
        }
        r[row] = c.rhs - c.lhs(&solution.x_blocks, &solution.x_free);
    }
    let svd = a.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    let delta = svd.solve(&r, tol).ok()?;
    if !delta.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut out = solution.clone();
    for (&(b, i, j), &col) in &cols {
        out.x_blocks[b][(i, j)] += delta[col];
        if i != j {
            out.x_blocks[b][(j, i)] += delta[col];
        }
    }
    for (&k, &col) in &free_cols {
        out.x_free[k] += delta[col];
    }
    Some(out)
}
