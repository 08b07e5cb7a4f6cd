use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::game::SemialgebraicSet;
use crate::poly::{monomials_up_to, Monomial, Polynomial};
use crate::sdp::{BlockEntry, Constraint, Relation, SdpProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamSign {
    Free,
    Nonnegative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionParam {
    pub name: String,
    pub sign: ParamSign,
}

impl DecisionParam {
    pub fn free(name: impl Into<String>) -> Self {
        DecisionParam {
            name: name.into(),
            sign: ParamSign::Free,
        }
    }

    pub fn nonnegative(name: impl Into<String>) -> Self {
        DecisionParam {
            name: name.into(),
            sign: ParamSign::Nonnegative,
        }
    }
}

/// `constant + sum_k params[k] * linear[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineTarget {
    pub constant: Polynomial,
    pub linear: Vec<Polynomial>,
}

impl AffineTarget {
    pub fn fixed(p: Polynomial) -> Self {
        AffineTarget {
            constant: p,
            linear: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.constant.n_vars()
    }

    pub fn degree(&self) -> u32 {
        self.linear
            .iter()
            .map(Polynomial::degree)
            .fold(self.constant.degree(), u32::max)
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<Polynomial> {
        let mut out = self.constant.clone();
        for (p, &v) in self.linear.iter().zip(params) {
            out = out.add(&p.scale(v))?;
        }
        Ok(out)
    }
}

/// `sum_k coeffs * params (= | <=) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub relation: Relation,
}

/// `target(params)` must lie in the truncated quadratic module of `set`.
#[derive(Clone, Debug)]
pub struct Membership {
    pub target: AffineTarget,
    pub set: SemialgebraicSet,
}

/// Find decision parameters such that every membership holds at degree
/// `level`, minimizing `objective . params`.
#[derive(Clone, Debug)]
pub struct SosMembershipProblem {
    pub memberships: Vec<Membership>,
    pub params: Vec<DecisionParam>,
    pub level: u32,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<ParamConstraint>,
}

impl SosMembershipProblem {
    /// One membership, no side constraints.
    pub fn single(
        target: AffineTarget,
        set: SemialgebraicSet,
        level: u32,
        params: Vec<DecisionParam>,
        objective: Vec<(usize, f64)>,
    ) -> Self {
        SosMembershipProblem {
            memberships: vec![Membership { target, set }],
            params,
            level,
            objective,
            constraints: Vec::new(),
        }
    }

    /// Feasibility query for a fixed polynomial.
    pub fn feasibility(target: Polynomial, set: SemialgebraicSet, level: u32) -> Self {
        Self::single(
            AffineTarget::fixed(target),
            set,
            level,
            Vec::new(),
            Vec::new(),
        )
    }
}

/// Monomials of degree `<= (level - constraint_degree) / 2`; empty (with a
/// warning) when `level < constraint_degree`.
pub fn gram_basis(level: u32, constraint_degree: u32, n_vars: usize) -> Vec<Monomial> {
    if level < constraint_degree {
        log::warn!(
            "level {level} is below constraint degree {constraint_degree}; multiplier dropped"
        );
        return Vec::new();
    }
    monomials_up_to(n_vars, (level - constraint_degree) / 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamSlot {
    Free(usize),
    Block(usize),
}

/// One SOS multiplier `g * b^T Q b` of the decomposition.
#[derive(Clone, Debug)]
pub struct GramLayout {
    pub membership: usize,
    pub multiplier: Polynomial,
    pub basis: Vec<Monomial>,
    pub block: usize,
}

/// One free multiplier `h * p` with `p` over `basis`.
#[derive(Clone, Debug)]
pub struct FreeLayout {
    pub membership: usize,
    pub constraint: Polynomial,
    pub basis: Vec<Monomial>,
    pub first_free: usize,
}

/// A compiled SDP together with the bookkeeping needed to read a certificate back.
#[derive(Clone, Debug)]
pub struct CompiledSos {
    pub sdp: SdpProblem,
    pub params: Vec<ParamSlot>,
    pub grams: Vec<GramLayout>,
    pub free: Vec<FreeLayout>,
    /// Membership and matched monomial of each coefficient row, in row order.
    /// Coefficient rows come first among the SDP constraints.
    pub rows: Vec<(usize, Monomial)>,
    /// Scale that each coefficient row was divided by.
    pub row_scales: Vec<f64>,
    /// A coefficient row reads `0 = c` with `c != 0`: no decomposition exists.
    pub structurally_infeasible: bool,
    /// Basis monomials removed because their Gram diagonal is forced to zero.
    pub pruned: usize,
}

#[derive(Default)]
struct Row {
    gram: BTreeMap<(usize, usize, usize), f64>,
    free: BTreeMap<usize, f64>,
    params: BTreeMap<usize, f64>,
    rhs: f64,
}

impl Row {
    fn is_empty(&self) -> bool {
        self.gram.values().all(|&v| v == 0.0)
            && self.free.values().all(|&v| v == 0.0)
            && self.params.values().all(|&v| v == 0.0)
    }
}

/// Coefficient rows of `target(params) - sum_j g_j s_j - sum_j h_j p_j = 0`
/// keyed by monomial, with everything involving unknowns on the left.
fn assemble(
    membership: &Membership,
    grams: &[(Polynomial, Vec<Monomial>)],
    free: &[FreeLayout],
    monos: &[Monomial],
) -> Vec<Row> {
    let index: BTreeMap<&Monomial, usize> = monos.iter().enumerate().map(|(k, m)| (m, k)).collect();
    let mut rows: Vec<Row> = (0..monos.len()).map(|_| Row::default()).collect();
    for (m, c) in membership.target.constant.terms() {
        rows[index[m]].rhs += c;
    }
    for (k, lin) in membership.target.linear.iter().enumerate() {
        for (m, c) in lin.terms() {
            *rows[index[m]].params.entry(k).or_default() -= c;
        }
    }
    for (g, (mult, basis)) in grams.iter().enumerate() {
        for a in 0..basis.len() {
            for b in a..basis.len() {
                let ab = basis[a].mul(&basis[b]);
                for (gm, gc) in mult.terms() {
                    let row = &mut rows[index[&gm.mul(&ab)]];
                    *row.gram.entry((g, a, b)).or_default() += gc;
                }
            }
        }
    }
    for f in free {
        for (k, bm) in f.basis.iter().enumerate() {
            for (hm, hc) in f.constraint.terms() {
                let row = &mut rows[index[&hm.mul(bm)]];
                *row.free.entry(f.first_free + k).or_default() += hc;
            }
        }
    }
    rows
}

/// Basis indices whose Gram diagonal some row forces to zero: the row has a
/// zero right-hand side and only same-signed diagonal Gram contributions.
fn forced_zero_diagonals(rows: &[Row]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for row in rows {
        if row.rhs != 0.0
            || row.free.values().any(|&v| v != 0.0)
            || row.params.values().any(|&v| v != 0.0)
        {
            continue;
        }
        let nz: Vec<(&(usize, usize, usize), &f64)> =
            row.gram.iter().filter(|(_, &v)| v != 0.0).collect();
        if nz.is_empty() || nz.iter().any(|((_, a, b), _)| a != b) {
            continue;
        }
        let positive = *nz[0].1 > 0.0;
        if nz.iter().all(|(_, &v)| (v > 0.0) == positive) {
            out.extend(nz.iter().map(|((g, a, _), _)| (*g, *a)));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn check_membership(m: &Membership, n_params: usize, level: u32) -> Result<()> {
    let n = m.target.n_vars();
    if m.set.n_vars() != n {
        return Err(Error::VarCountMismatch {
            left: n,
            right: m.set.n_vars(),
        });
    }
    if m.target.linear.len() != n_params {
        return Err(Error::MalformedProblem(format!(
            "target has {} parameter coefficients for {} parameters",
            m.target.linear.len(),
            n_params
        )));
    }
    if let Some(p) = m.target.linear.iter().find(|p| p.n_vars() != n) {
        return Err(Error::VarCountMismatch {
            left: n,
            right: p.n_vars(),
        });
    }
    let degree = m.target.degree();
    if degree > level {
        return Err(Error::DegreeViolation {
            level,
            required: degree,
        });
    }
    Ok(())
}

/// Rows, Gram multipliers and free multipliers of one membership after
/// pruning.
struct MembershipRows {
    monos: Vec<Monomial>,
    rows: Vec<Row>,
    grams: Vec<(Polynomial, Vec<Monomial>)>,
    free: Vec<FreeLayout>,
    pruned: usize,
}

fn membership_rows(index: usize, m: &Membership, level: u32, n_free: &mut usize) -> MembershipRows {
    let n = m.target.n_vars();
    let monos = monomials_up_to(n, level);
    let mut grams: Vec<(Polynomial, Vec<Monomial>)> = Vec::new();
    grams.push((Polynomial::constant(n, 1.0), gram_basis(level, 0, n)));
    for g in m.set.inequalities() {
        grams.push((g.clone(), gram_basis(level, g.degree(), n)));
    }
    let mut free = Vec::new();
    for h in m.set.equalities() {
        if h.degree() > level {
            log::warn!(
                "level {level} is below equality degree {}; multiplier dropped",
                h.degree()
            );
            continue;
        }
        let basis = monomials_up_to(n, level - h.degree());
        let count = basis.len();
        free.push(FreeLayout {
            membership: index,
            constraint: h.clone(),
            first_free: *n_free,
            basis,
        });
        *n_free += count;
    }
    let mut pruned = 0;
    let rows = loop {
        let rows = assemble(m, &grams, &free, &monos);
        let zero = forced_zero_diagonals(&rows);
        if zero.is_empty() {
            break rows;
        }
        pruned += zero.len();
        for &(g, a) in zero.iter().rev() {
            grams[g].1.remove(a);
        }
    };
    MembershipRows {
        monos,
        rows,
        grams,
        free,
        pruned,
    }
}

pub fn compile(problem: &SosMembershipProblem) -> Result<CompiledSos> {
    if problem.memberships.is_empty() {
        return Err(Error::MalformedProblem("no membership constraints".into()));
    }
    for m in &problem.memberships {
        check_membership(m, problem.params.len(), problem.level)?;
    }
    let check_param = |k: usize| -> Result<()> {
        if k >= problem.params.len() {
            return Err(Error::MalformedProblem(format!(
                "parameter {k} out of range"
            )));
        }
        Ok(())
    };
    for &(k, _) in &problem.objective {
        check_param(k)?;
    }
    for c in &problem.constraints {
        for &(k, _) in &c.coeffs {
            check_param(k)?;
        }
    }

    // parameters first, then free-multiplier coefficients
    let mut n_free = 0;
    let mut n_param_blocks = 0;
    let params: Vec<ParamSlot> = problem
        .params
        .iter()
        .map(|p| match p.sign {
            ParamSign::Free => {
                n_free += 1;
                ParamSlot::Free(n_free - 1)
            }
            ParamSign::Nonnegative => {
                n_param_blocks += 1;
                ParamSlot::Block(n_param_blocks - 1)
            }
        })
        .collect();
    let parts: Vec<MembershipRows> = problem
        .memberships
        .iter()
        .enumerate()
        .map(|(i, m)| membership_rows(i, m, problem.level, &mut n_free))
        .collect();

    // drop empty Gram blocks; map surviving ones after the parameter blocks
    let mut block_dims: Vec<usize> = vec![1; n_param_blocks];
    let mut gram_layout = Vec::new();
    let mut block_of: Vec<Vec<Option<usize>>> = Vec::with_capacity(parts.len());
    for (i, part) in parts.iter().enumerate() {
        let mut of = vec![None; part.grams.len()];
        for (g, (mult, basis)) in part.grams.iter().enumerate() {
            if basis.is_empty() {
                continue;
            }
            of[g] = Some(block_dims.len());
            block_dims.push(basis.len());
            gram_layout.push(GramLayout {
                membership: i,
                multiplier: mult.clone(),
                block: block_dims.len() - 1,
                basis: basis.clone(),
            });
        }
        block_of.push(of);
    }

    let mut sdp = SdpProblem::new(block_dims, n_free);
    let param_terms = |coeffs: &mut dyn Iterator<Item = (usize, f64)>| {
        let mut entries = Vec::new();
        let mut free_terms = Vec::new();
        for (k, v) in coeffs {
            match params[k] {
                ParamSlot::Free(f) => free_terms.push((f, v)),
                ParamSlot::Block(b) => entries.push(BlockEntry {
                    block: b,
                    i: 0,
                    j: 0,
                    value: v,
                }),
            }
        }
        (entries, free_terms)
    };
    let (entries, free_terms) = param_terms(&mut problem.objective.iter().copied());
    sdp.objective.entries = entries;
    sdp.objective.free = free_terms;

    let mut structurally_infeasible = false;
    let mut row_monos = Vec::new();
    let mut row_scales = Vec::new();
    let mut pruned = 0;
    let mut free = Vec::new();
    for (i, part) in parts.into_iter().enumerate() {
        pruned += part.pruned;
        free.extend(part.free);
        for (mono, row) in part.monos.into_iter().zip(part.rows) {
            if row.is_empty() {
                if row.rhs != 0.0 {
                    structurally_infeasible = true;
                }
                continue;
            }
            let (mut entries, mut free_terms) =
                param_terms(&mut row.params.iter().map(|(&k, &v)| (k, v)));
            for (&(g, a, b), &v) in &row.gram {
                if v != 0.0 {
                    entries.push(BlockEntry {
                        block: block_of[i][g].expect("surviving row touches a dropped block"),
                        i: a,
                        j: b,
                        value: v,
                    });
                }
            }
            free_terms.extend(
                row.free
                    .iter()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(&k, &v)| (k, v)),
            );
            let scale = entries
                .iter()
                .map(|e| e.value.abs())
                .chain(free_terms.iter().map(|f| f.1.abs()))
                .fold(0.0, f64::max);
            for e in &mut entries {
                e.value /= scale;
            }
            for f in &mut free_terms {
                f.1 /= scale;
            }
            sdp.constraints
                .push(Constraint::eq(entries, free_terms, row.rhs / scale));
            row_monos.push((i, mono));
            row_scales.push(scale);
        }
    }
    for c in &problem.constraints {
        let (entries, free_terms) = param_terms(&mut c.coeffs.iter().copied());
        sdp.constraints.push(Constraint {
            entries,
            free: free_terms,
            rhs: c.rhs,
            relation: c.relation,
        });
    }
    if pruned > 0 {
        log::debug!("pruned {pruned} Gram basis monomials with forced-zero diagonals");
    }
    Ok(CompiledSos {
        sdp,
        params,
        grams: gram_layout,
        free,
        rows: row_monos,
        row_scales,
        structurally_infeasible,
        pruned,
    })
}
