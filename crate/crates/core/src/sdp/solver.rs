//! Infeasible-start primal-dual interior-point method (HKM direction with
//! Mehrotra predictor-corrector) for [`SdpProblem`].
//!
//! Internally, 1x1 blocks and the slacks of `<=` rows are merged into one
//! nonnegative orthant; free variables enter the Newton system through an
//! augmented (quasi-definite) KKT matrix factored by LU.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::problem::{Relation, SdpProblem};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpOptions {
    /// Relative tolerance on primal/dual feasibility and duality gap.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// `<X, S>` summed over all cones; nonnegative for any interior pair.
    pub complementarity: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Primal blocks in the order of `SdpProblem::block_dims`.
    pub x_blocks: Vec<DMatrix<f64>>,
    pub x_free: Vec<f64>,
    /// Dual multipliers, one per constraint row (nonpositive on `<=` rows).
    pub y: Vec<f64>,
    /// Dual slack blocks `C - A^*(y)`.
    pub s_blocks: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub history: Vec<IterationStats>,
}

impl SdpSolution {
    /// Relative duality gap of the returned iterate.
    pub fn relative_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
            / (1.0 + self.primal_objective.abs() + self.dual_objective.abs())
    }
}

pub fn solve(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let model = Model::build(problem);
    let mut ipm = Ipm::new(&model, opts);
    let status = ipm.run();
    Ok(ipm.into_solution(problem, status))
}

type Entries = Vec<(usize, usize, f64)>;

struct DenseBlock {
    n: usize,
    c: DMatrix<f64>,
    rows: Vec<usize>,
    /// Upper-triangular entries per touching row.
    upper: Vec<Entries>,
    /// Both triangles expanded per touching row.
    full: Vec<Entries>,
}

#[derive(Clone, Copy)]
enum Slot {
    Dense(usize),
    Lp(usize),
}

struct Model {
    m: usize,
    b: DVector<f64>,
    dense: Vec<DenseBlock>,
    c_lp: DVector<f64>,
    /// Per LP coordinate: `(row, coefficient)`.
    lp_cols: Vec<Vec<(usize, f64)>>,
    c_free: DVector<f64>,
    a_free: DMatrix<f64>,
    elim: Option<FreeElim>,
    slots: Vec<Slot>,
    norm_c: f64,
}

impl Model {
    fn build(p: &SdpProblem) -> Model {
        let m = p.constraints.len();
        let mut slots = Vec::with_capacity(p.block_dims.len());
        let mut dense_dims = Vec::new();
        let mut n_lp = 0;
        for &d in &p.block_dims {
            if d >= 2 {
                slots.push(Slot::Dense(dense_dims.len()));
                dense_dims.push(d);
            } else {
                slots.push(Slot::Lp(n_lp));
                n_lp += 1;
            }
        }
        let n_slack = p
            .constraints
            .iter()
            .filter(|c| c.relation == Relation::Le)
            .count();
        let n_lp_total = n_lp + n_slack;

        let mut c_dense: Vec<DMatrix<f64>> =
            dense_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let mut c_lp: DVector<f64> = DVector::zeros(n_lp_total);
        for e in &p.objective.entries {
            match slots[e.block] {
                Slot::Dense(k) => {
                    c_dense[k][(e.i, e.j)] += e.value;
                    if e.i != e.j {
                        c_dense[k][(e.j, e.i)] += e.value;
                    }
                }
                Slot::Lp(k) => c_lp[k] += e.value,
            }
        }
        let mut c_free: DVector<f64> = DVector::zeros(p.n_free);
        for &(k, v) in &p.objective.free {
            c_free[k] += v;
        }

        let mut dense_rows: Vec<BTreeMap<usize, BTreeMap<(usize, usize), f64>>> =
            vec![BTreeMap::new(); dense_dims.len()];
        let mut lp_rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_lp_total];
        let mut a_free = DMatrix::zeros(m, p.n_free);
        let mut b = DVector::zeros(m);
        let mut slack = n_lp;
        for (r, con) in p.constraints.iter().enumerate() {
            b[r] = con.rhs;
            for e in &con.entries {
                match slots[e.block] {
                    Slot::Dense(k) => {
                        *dense_rows[k]
                            .entry(r)
                            .or_default()
                            .entry((e.i, e.j))
                            .or_default() += e.value;
                    }
                    Slot::Lp(k) => *lp_rows[k].entry(r).or_default() += e.value,
                }
            }
            for &(k, v) in &con.free {
                a_free[(r, k)] += v;
            }
            if con.relation == Relation::Le {
                lp_rows[slack].insert(r, 1.0);
                slack += 1;
            }
        }

        let dense = dense_dims
            .iter()
            .zip(c_dense)
            .zip(dense_rows)
            .map(|((&n, c), rows_map)| {
                let mut rows = Vec::new();
                let mut upper = Vec::new();
                let mut full = Vec::new();
                for (r, ents) in rows_map {
                    let up: Entries = ents
                        .into_iter()
                        .filter(|&(_, v)| v != 0.0)
                        .map(|((i, j), v)| (i, j, v))
                        .collect();
                    if up.is_empty() {
                        continue;
                    }
                    let mut fl = Vec::with_capacity(2 * up.len());
                    for &(i, j, v) in &up {
                        fl.push((i, j, v));
                        if i != j {
                            fl.push((j, i, v));
                        }
                    }
                    rows.push(r);
                    upper.push(up);
                    full.push(fl);
                }
                DenseBlock {
                    n,
                    c,
                    rows,
                    upper,
                    full,
                }
            })
            .collect::<Vec<_>>();
        let lp_cols = lp_rows
            .into_iter()
            .map(|col| col.into_iter().filter(|&(_, v)| v != 0.0).collect())
            .collect();

        let dense_norm: f64 = dense.iter().map(|d: &DenseBlock| d.c.norm_squared()).sum();
        let norm_c = (dense_norm + c_lp.norm_squared() + c_free.norm_squared()).sqrt();
        Model {
            m,
            b,
            dense,
            c_lp,
            lp_cols,
            c_free,
            elim: FreeElim::new(&a_free),
            a_free,
            slots,
            norm_c,
        }
    }

    /// `A^*(y)` split into dense blocks, LP coordinates and free variables.
    fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>, DVector<f64>) {
        let xs = (0..self.dense.len())
            .map(|k| self.adjoint_dense(k, y))
            .collect();
        (xs, self.adjoint_lp(y), self.a_free.transpose() * y)
    }

    fn n_lp(&self) -> usize {
        self.c_lp.len()
    }

    fn n_free(&self) -> usize {
        self.c_free.len()
    }

    /// `A(X)` contribution of dense block `k` for symmetric `x`, accumulated into `out`.
    fn apply_dense(&self, k: usize, x: &DMatrix<f64>, out: &mut DVector<f64>) {
        let blk = &self.dense[k];
        for (row, ents) in blk.rows.iter().zip(&blk.upper) {
            let mut s = 0.0;
            for &(i, j, v) in ents {
                s += if i == j {
                    v * x[(i, j)]
                } else {
                    2.0 * v * x[(i, j)]
                };
            }
            out[*row] += s;
        }
    }

    /// `sum_r y_r A_r` restricted to dense block `k`.
    fn adjoint_dense(&self, k: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.dense[k];
        let mut out = DMatrix::zeros(blk.n, blk.n);
        for (row, ents) in blk.rows.iter().zip(&blk.upper) {
            let yr = y[*row];
            if yr == 0.0 {
                continue;
            }
            for &(i, j, v) in ents {
                out[(i, j)] += yr * v;
                if i != j {
                    out[(j, i)] += yr * v;
                }
            }
        }
        out
    }

    fn apply_lp(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        for (k, col) in self.lp_cols.iter().enumerate() {
            for &(r, v) in col {
                out[r] += v * x[k];
            }
        }
    }

    fn adjoint_lp(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_lp(),
            self.lp_cols
                .iter()
                .map(|col| col.iter().map(|&(r, v)| v * y[r]).sum::<f64>()),
        )
    }

    /// `A(X) + A_l x_l + A_f x_f`.
    fn apply(&self, xs: &[DMatrix<f64>], xl: &DVector<f64>, xf: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.a_free * xf;
        for (k, x) in xs.iter().enumerate() {
            self.apply_dense(k, x, &mut out);
        }
        self.apply_lp(xl, &mut out);
        out
    }
}

#[derive(Clone)]
struct State {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    zl: DVector<f64>,
    xf: DVector<f64>,
    y: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dzl: DVector<f64>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rl: DVector<f64>,
    rf: DVector<f64>,
}

/// Iterations without improvement tolerated once close to optimal.
const STALL_WINDOW: usize = 8;

struct Ipm<'a> {
    model: &'a Model,
    opts: &'a SdpOptions,
    st: State,
    history: Vec<IterationStats>,
    last: Option<IterationStats>,
    /// Iterate with the smallest worst-case relative measure so far.
    best: Option<(f64, State, IterationStats)>,
    /// Smallest-gap iterate among those within `10 tol` of feasibility.
    best_feasible: Option<(f64, State, IterationStats)>,
}

fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Largest `alpha` with `X + alpha dX` PSD, given the Cholesky factor of `X`.
fn max_step_psd(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let t = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&t.transpose())?;
    let w = sym(&w);
    let lmin = w.symmetric_eigenvalues().min();
    if !lmin.is_finite() {
        return None;
    }
    Some(if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    })
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

impl<'a> Ipm<'a> {
    fn new(model: &'a Model, opts: &'a SdpOptions) -> Self {
        let norm_b_row = |r: usize| 1.0 + model.b[r].abs();
        let mut x = Vec::new();
        let mut s = Vec::new();
        for blk in &model.dense {
            let n = blk.n as f64;
            let mut xi: f64 = 10.0f64.max(n.sqrt());
            let mut eta: f64 = 10.0f64.max(n.sqrt()).max(blk.c.norm());
            for (row, ents) in blk.rows.iter().zip(&blk.full) {
                let an = ents.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                xi = xi.max(n * norm_b_row(*row) / (1.0 + an));
                eta = eta.max(an);
            }
            x.push(DMatrix::identity(blk.n, blk.n) * xi);
            s.push(DMatrix::identity(blk.n, blk.n) * eta);
        }
        let n_lp = model.n_lp();
        let mut xl = DVector::zeros(n_lp);
        let mut zl = DVector::zeros(n_lp);
        for k in 0..n_lp {
            let an = model.lp_cols[k]
                .iter()
                .map(|e| e.1 * e.1)
                .sum::<f64>()
                .sqrt();
            let bmax = model.lp_cols[k]
                .iter()
                .map(|e| norm_b_row(e.0))
                .fold(1.0, f64::max);
            xl[k] = 10.0f64.max(bmax / (1.0 + an));
            zl[k] = 10.0f64.max(an).max(model.c_lp[k].abs());
        }
        Ipm {
            model,
            opts,
            st: State {
                x,
                s,
                xl,
                zl,
                xf: DVector::zeros(model.n_free()),
                y: DVector::zeros(model.m),
            },
            history: Vec::new(),
            last: None,
            best: None,
            best_feasible: None,
        }
    }

    fn residuals(&self) -> Residuals {
        let m = self.model;
        let st = &self.st;
        let rp = &m.b - m.apply(&st.x, &st.xl, &st.xf);
        let rd = (0..m.dense.len())
            .map(|k| &m.dense[k].c - m.adjoint_dense(k, &st.y) - &st.s[k])
            .collect();
        let rl = &m.c_lp - m.adjoint_lp(&st.y) - &st.zl;
        let rf = &m.c_free - m.a_free.transpose() * &st.y;
        Residuals { rp, rd, rl, rf }
    }

    fn n_cone(&self) -> f64 {
        (self.model.dense.iter().map(|b| b.n).sum::<usize>() + self.model.n_lp()) as f64
    }

    fn complementarity(&self) -> f64 {
        let st = &self.st;
        st.x.iter()
            .zip(&st.s)
            .map(|(x, s)| inner(x, s))
            .sum::<f64>()
            + st.xl.dot(&st.zl)
    }

    fn primal_objective(&self) -> f64 {
        let m = self.model;
        let st = &self.st;
        m.dense
            .iter()
            .zip(&st.x)
            .map(|(b, x)| inner(&b.c, x))
            .sum::<f64>()
            + m.c_lp.dot(&st.xl)
            + m.c_free.dot(&st.xf)
    }

    fn run(&mut self) -> SolveStatus {
        let status = self.iterate();
        if matches!(
            status,
            SolveStatus::NumericalFailure | SolveStatus::IterationLimit
        ) {
            self.restore_best();
        }
        status
    }

    /// Falls back to the best nearly feasible iterate, else the best overall.
    fn restore_best(&mut self) {
        if let Some((_, st, stats)) = self.best_feasible.take().or_else(|| self.best.take()) {
            log::debug!(
                "restoring iterate {} after loss of progress",
                stats.iteration
            );
            self.st = st;
            self.last = Some(stats);
        }
    }

    fn iterate(&mut self) -> SolveStatus {
        let tol = self.opts.tol;
        let model = self.model;
        let norm_b = model.b.norm();
        let mut stalls = 0;
        let mut steps = (0.0, 0.0);
        for iter in 0..=self.opts.max_iter {
            let res = self.residuals();
            let pobj = self.primal_objective();
            let dobj = model.b.dot(&self.st.y);
            let compl = self.complementarity();
            let rd_norm = (res.rd.iter().map(|r| r.norm_squared()).sum::<f64>()
                + res.rl.norm_squared()
                + res.rf.norm_squared())
            .sqrt();
            let relp = res.rp.norm() / (1.0 + norm_b);
            let reld = rd_norm / (1.0 + model.norm_c);
            let denom = 1.0 + pobj.abs() + dobj.abs();
            let gap = (pobj - dobj).abs() / denom;
            let relc = compl / denom;
            let stats = IterationStats {
                iteration: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                primal_infeasibility: relp,
                dual_infeasibility: reld,
                complementarity: compl,
                step_primal: steps.0,
                step_dual: steps.1,
            };
            self.history.push(stats.clone());
            self.last = Some(stats.clone());
            if ![pobj, dobj, compl, relp, reld]
                .iter()
                .all(|v| v.is_finite())
            {
                return SolveStatus::NumericalFailure;
            }
            log::trace!("iter {iter}: pobj {pobj:.9e} dobj {dobj:.9e} relp {relp:.2e} reld {reld:.2e} gap {gap:.2e}");
            if relp <= tol && reld <= tol && gap <= tol && relc <= tol {
                return SolveStatus::Optimal;
            }
            let merit = relp.max(reld).max(gap).max(relc);
            if self.best.as_ref().is_none_or(|b| merit < b.0) {
                self.best = Some((merit, self.st.clone(), stats.clone()));
            }
            if relp <= 10.0 * tol
                && reld <= 10.0 * tol
                && self.best_feasible.as_ref().is_none_or(|b| gap < b.0)
            {
                self.best_feasible = Some((gap, self.st.clone(), stats));
            }
            if let Some(status) = self.infeasibility(&res, pobj, dobj) {
                return status;
            }
            if iter == self.opts.max_iter {
                return SolveStatus::IterationLimit;
            }
            // Near-optimal but no longer improving: the iterate has hit the
            // conditioning floor of the Newton system.
            if let Some((best, _, at)) = &self.best {
                if *best <= 1e-5 && iter >= at.iteration + STALL_WINDOW {
                    return SolveStatus::NumericalFailure;
                }
            }
            match self.step(&res, compl) {
                Some(s) => {
                    steps = s;
                    if s.0.max(s.1) < 1e-8 {
                        stalls += 1;
                        if stalls >= 3 {
                            return SolveStatus::NumericalFailure;
                        }
                    } else {
                        stalls = 0;
                    }
                }
                None => return SolveStatus::NumericalFailure,
            }
        }
        SolveStatus::IterationLimit
    }

    /// Farkas-type tests on the current (diverging) iterate.
    fn infeasibility(&self, res: &Residuals, pobj: f64, dobj: f64) -> Option<SolveStatus> {
        let model = self.model;
        let st = &self.st;
        let tol = self.opts.tol;
        if dobj > 0.0 {
            // Dual ray: A^*(y) + S = C - Rd must vanish relative to b^T y.
            let ray = (model
                .dense
                .iter()
                .zip(&res.rd)
                .map(|(b, r)| (&b.c - r).norm_squared())
                .sum::<f64>()
                + (&model.c_lp - &res.rl).norm_squared()
                + (&model.c_free - &res.rf).norm_squared())
            .sqrt();
            if ray / dobj < tol {
                return Some(SolveStatus::PrimalInfeasible);
            }
        }
        if pobj < 0.0 {
            let ray = model.apply(&st.x, &st.xl, &st.xf).norm();
            if ray / (-pobj) < tol {
                return Some(SolveStatus::DualInfeasible);
            }
        }
        None
    }

    /// Forms and factors the Schur complement `M`, reduced to the null space
    /// of `A_f^T` when there are free variables.
    fn factor(&self, lx: &[DMatrix<f64>], rs: &[DMatrix<f64>]) -> Option<Kkt> {
        let model = self.model;
        let m = model.m;
        let mut k = DMatrix::zeros(m, m);
        for (bi, blk) in model.dense.iter().enumerate() {
            schur_dense(blk, &lx[bi], &rs[bi], true, &mut k);
        }
        for (c, col) in model.lp_cols.iter().enumerate() {
            let d = self.st.xl[c] / self.st.zl[c];
            for &(r1, v1) in col {
                for &(r2, v2) in col {
                    k[(r1, r2)] += d * v1 * v2;
                }
            }
        }
        // A A^* in the metric of the current primal iterate.
        let mut q = &model.a_free * model.a_free.transpose();
        for (bi, blk) in model.dense.iter().enumerate() {
            schur_dense(blk, &lx[bi], &lx[bi], false, &mut q);
        }
        for (c, col) in model.lp_cols.iter().enumerate() {
            let d = self.st.xl[c] * self.st.xl[c];
            for &(r1, v1) in col {
                for &(r2, v2) in col {
                    q[(r1, r2)] += d * v1 * v2;
                }
            }
        }
        Kkt::new(k, q, model.elim.as_ref())
    }

    /// Solves for a direction given the complementarity targets `rc` (dense) and
    /// `rcl` (LP part).
    fn direction(
        &self,
        kkt: &Kkt,
        res: &Residuals,
        g: &[DMatrix<f64>],
        rc: &[DMatrix<f64>],
        rcl: &DVector<f64>,
    ) -> Option<Direction> {
        let model = self.model;
        let st = &self.st;
        let m = model.m;
        let d = st.xl.component_div(&st.zl);
        let mut h = res.rp.clone();
        let mut tmp = DVector::zeros(m);
        for k in 0..model.dense.len() {
            let w = &rc[k] - sym(&(&st.x[k] * &res.rd[k] * &g[k]));
            model.apply_dense(k, &w, &mut tmp);
        }
        let wl = rcl - d.component_mul(&res.rl);
        model.apply_lp(&wl, &mut tmp);
        h -= tmp;
        let (mut dy, mut dxf) = kkt.solve(model.elim.as_ref(), &h, &res.rf)?;
        let mut dir = self.assemble(res, g, rc, rcl, dy.clone(), dxf.clone());
        // Refine against the exact operator: the formed Schur matrix carries
        // rounding that grows with its condition number.
        let mut err = &res.rp - model.apply(&dir.dx, &dir.dxl, &dir.dxf);
        for _ in 0..2 {
            let zero = DVector::zeros(model.n_free());
            let Some((ey, ef)) = kkt.solve(model.elim.as_ref(), &err, &zero) else {
                break;
            };
            let cand = self.assemble(res, g, rc, rcl, &dy + &ey, &dxf + &ef);
            let cand_err = &res.rp - model.apply(&cand.dx, &cand.dxl, &cand.dxf);
            if !(cand_err.norm() < err.norm()) {
                break;
            }
            dy += ey;
            dxf += ef;
            dir = cand;
            err = cand_err;
        }
        // Rounding left in the primal equations is removed by the correction
        // of least norm in the metric of the current iterate, which keeps it
        // small along the directions where X is near the boundary.
        for _ in 0..2 {
            let Some(w) = kkt.primal.solve(&err) else {
                break;
            };
            let (cx, cl, cf) = model.adjoint(&w);
            for (k, c) in cx.iter().enumerate() {
                dir.dx[k] += sym(&(&st.x[k] * c * &st.x[k]));
            }
            dir.dxl += st.xl.component_mul(&st.xl).component_mul(&cl);
            dir.dxf += cf;
            err = &res.rp - model.apply(&dir.dx, &dir.dxl, &dir.dxf);
        }
        let ok = dir
            .dy
            .iter()
            .chain(dir.dxf.iter())
            .chain(dir.dxl.iter())
            .all(|v| v.is_finite());
        ok.then_some(dir)
    }

    fn assemble(
        &self,
        res: &Residuals,
        g: &[DMatrix<f64>],
        rc: &[DMatrix<f64>],
        rcl: &DVector<f64>,
        dy: DVector<f64>,
        dxf: DVector<f64>,
    ) -> Direction {
        let model = self.model;
        let st = &self.st;
        let d = st.xl.component_div(&st.zl);
        let mut dx = Vec::with_capacity(rc.len());
        let mut ds = Vec::with_capacity(rc.len());
        for k in 0..model.dense.len() {
            let dsk = &res.rd[k] - model.adjoint_dense(k, &dy);
            let dxk = &rc[k] - sym(&(&st.x[k] * &dsk * &g[k]));
            dx.push(dxk);
            ds.push(dsk);
        }
        let dzl = &res.rl - model.adjoint_lp(&dy);
        let dxl = rcl - d.component_mul(&dzl);
        Direction {
            dx,
            ds,
            dxl,
            dzl,
            dxf,
            dy,
        }
    }

    fn max_steps(
        &self,
        lx: &[DMatrix<f64>],
        ls: &[DMatrix<f64>],
        dir: &Direction,
    ) -> Option<(f64, f64)> {
        let mut ap = max_step_lp(&self.st.xl, &dir.dxl);
        let mut ad = max_step_lp(&self.st.zl, &dir.dzl);
        for k in 0..lx.len() {
            ap = ap.min(max_step_psd(&lx[k], &dir.dx[k])?);
            ad = ad.min(max_step_psd(&ls[k], &dir.ds[k])?);
        }
        Some((ap, ad))
    }

    /// One predictor-corrector step; returns the step lengths taken.
    fn step(&mut self, res: &Residuals, compl: f64) -> Option<(f64, f64)> {
        let model = self.model;
        let nd = model.dense.len();
        let mut lx = Vec::with_capacity(nd);
        let mut ls = Vec::with_capacity(nd);
        let mut g = Vec::with_capacity(nd);
        let mut rs = Vec::with_capacity(nd);
        for k in 0..nd {
            lx.push(self.st.x[k].clone().cholesky()?.l());
            let l = self.st.s[k].clone().cholesky()?.l();
            let n = l.nrows();
            let r = l
                .solve_lower_triangular(&DMatrix::identity(n, n))?
                .transpose();
            g.push(sym(&(&r * r.transpose())));
            rs.push(r);
            ls.push(l);
        }
        let kkt = self.factor(&lx, &rs)?;
        let n_cone = self.n_cone();
        let mu = if n_cone > 0.0 { compl / n_cone } else { 0.0 };

        // predictor
        let rc: Vec<DMatrix<f64>> = self.st.x.iter().map(|x| -x).collect();
        let rcl = -&self.st.xl;
        let pred = self.direction(&kkt, res, &g, &rc, &rcl)?;
        let (ap, ad) = self.max_steps(&lx, &ls, &pred)?;
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for k in 0..nd {
            mu_aff += inner(
                &(&self.st.x[k] + &pred.dx[k] * ap),
                &(&self.st.s[k] + &pred.ds[k] * ad),
            );
        }
        mu_aff += (&self.st.xl + &pred.dxl * ap).dot(&(&self.st.zl + &pred.dzl * ad));
        let sigma = if mu > 0.0 && n_cone > 0.0 {
            (mu_aff / n_cone / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // corrector
        let target = sigma * mu;
        let rc: Vec<DMatrix<f64>> = (0..nd)
            .map(|k| &g[k] * target - &self.st.x[k] - sym(&(&pred.dx[k] * &pred.ds[k] * &g[k])))
            .collect();
        let rcl = DVector::from_iterator(
            model.n_lp(),
            (0..model.n_lp()).map(|c| {
                let z = self.st.zl[c];
                target / z - self.st.xl[c] - pred.dxl[c] * pred.dzl[c] / z
            }),
        );
        let dir = self.direction(&kkt, res, &g, &rc, &rcl)?;
        let (mp, md) = self.max_steps(&lx, &ls, &dir)?;
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let ap = (gamma * mp).min(1.0);
        let ad = (gamma * md).min(1.0);

        let st = &mut self.st;
        for k in 0..nd {
            st.x[k] += &dir.dx[k] * ap;
            st.s[k] += &dir.ds[k] * ad;
            st.x[k] = sym(&st.x[k]);
            st.s[k] = sym(&st.s[k]);
        }
        st.xl += &dir.dxl * ap;
        st.xf += &dir.dxf * ap;
        st.zl += &dir.dzl * ad;
        st.y += &dir.dy * ad;
        Some((ap, ad))
    }

    fn into_solution(self, problem: &SdpProblem, status: SolveStatus) -> SdpSolution {
        let model = self.model;
        let st = self.st;
        let mut x_blocks = Vec::with_capacity(problem.block_dims.len());
        let mut s_blocks = Vec::with_capacity(problem.block_dims.len());
        for slot in &model.slots {
            match *slot {
                Slot::Dense(k) => {
                    x_blocks.push(st.x[k].clone());
                    s_blocks.push(st.s[k].clone());
                }
                Slot::Lp(k) => {
                    x_blocks.push(DMatrix::from_element(1, 1, st.xl[k]));
                    s_blocks.push(DMatrix::from_element(1, 1, st.zl[k]));
                }
            }
        }
        let last = self.last.unwrap_or(IterationStats {
            iteration: 0,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            primal_infeasibility: f64::NAN,
            dual_infeasibility: f64::NAN,
            complementarity: f64::NAN,
            step_primal: 0.0,
            step_dual: 0.0,
        });
        SdpSolution {
            status,
            x_blocks,
            x_free: st.xf.iter().copied().collect(),
            y: st.y.iter().copied().collect(),
            s_blocks,
            primal_objective: last.primal_objective,
            dual_objective: last.dual_objective,
            primal_infeasibility: last.primal_infeasibility,
            dual_infeasibility: last.dual_infeasibility,
            iterations: last.iteration,
            history: self.history,
        }
    }
}

/// Adds `tr(A_a X A_b G)` for every pair of rows touching `blk` into `k`.
/// Adds `tr(A_a X A_b G)` for every pair of rows touching `blk` into `k`,
/// as the Gram matrix of `P_a = L^T A_a R` with `X = L L^T`, `G = R R^T`.
/// Forming it this way keeps the result positive semidefinite in floating
/// point.
fn schur_dense(
    blk: &DenseBlock,
    l: &DMatrix<f64>,
    r: &DMatrix<f64>,
    r_upper: bool,
    k: &mut DMatrix<f64>,
) {
    let n = blk.n;
    let rows = blk.rows.len();
    // `L` is lower triangular, `R` upper or lower as flagged.
    let outer = |col: &mut nalgebra::DVectorViewMut<f64>, v: f64, i: usize, j: usize| {
        let ts = if r_upper { j..n } else { 0..j + 1 };
        for s in 0..=i {
            let li = v * l[(i, s)];
            for t in ts.clone() {
                col[s * n + t] += li * r[(j, t)];
            }
        }
    };
    let mut p = DMatrix::<f64>::zeros(n * n, rows);
    for (a, ents) in blk.upper.iter().enumerate() {
        let mut col = p.column_mut(a);
        for &(i, j, v) in ents {
            outer(&mut col, v, i, j);
            if i != j {
                outer(&mut col, v, j, i);
            }
        }
    }
    let gram = p.tr_mul(&p);
    for a in 0..rows {
        for b in 0..rows {
            k[(blk.rows[a], blk.rows[b])] += gram[(a, b)];
        }
    }
}

/// Orthogonal splitting of `R^m` into the range of `A_f` and the null space
/// of `A_f^T`, from a thin SVD `A_f = U_1 Sigma V_1^T`.
struct FreeElim {
    u1: DMatrix<f64>,
    sinv: DVector<f64>,
    v1t: DMatrix<f64>,
    null: DMatrix<f64>,
}

impl FreeElim {
    fn new(a_free: &DMatrix<f64>) -> Option<FreeElim> {
        let (m, nf) = a_free.shape();
        if nf == 0 {
            return None;
        }
        let svd = a_free.clone().svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let smax = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-12 * smax.max(f64::MIN_POSITIVE))
            .collect();
        let u1 = u.select_columns(&keep);
        let v1t = vt.select_rows(&keep);
        let sinv = DVector::from_iterator(
            keep.len(),
            keep.iter().map(|&i| 1.0 / svd.singular_values[i]),
        );
        let proj = DMatrix::identity(m, m) - &u1 * u1.transpose();
        let eig = proj.symmetric_eigen();
        let cols: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let null = eig.eigenvectors.select_columns(&cols);
        Some(FreeElim {
            u1,
            sinv,
            v1t,
            null,
        })
    }

    /// Minimum-norm `y` with `A_f^T y = r`.
    fn range_solution(&self, r: &DVector<f64>) -> DVector<f64> {
        &self.u1 * (&self.v1t * r).component_mul(&self.sinv)
    }

    /// Least-squares `x` with `A_f x = t`.
    fn free_solution(&self, t: &DVector<f64>) -> DVector<f64> {
        self.v1t.transpose() * (self.u1.transpose() * t).component_mul(&self.sinv)
    }
}

enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Cholesky(c) => Some(c.solve(rhs)),
            Factor::Lu(lu) => lu.solve(rhs),
        }
    }
}

/// Cholesky factor, falling back to a slightly shifted matrix and then LU.
/// The flag reports whether a shift was applied.
fn spd_factor(k: DMatrix<f64>) -> Option<(Factor, bool)> {
    let n = k.nrows();
    if let Some(c) = k.clone().cholesky() {
        if Kkt::well_posed(c.l_dirty().diagonal().iter().map(|v| v * v)) {
            return Some((Factor::Cholesky(c), false));
        }
    }
    let scale = (0..n).map(|i| k[(i, i)].abs()).fold(1.0, f64::max);
    let mut reg = k;
    for i in 0..n {
        reg[(i, i)] += 1e-12 * scale;
    }
    if let Some(c) = reg.clone().cholesky() {
        return Some((Factor::Cholesky(c), true));
    }
    let lu = reg.lu();
    (n == 0 || lu.is_invertible()).then_some((Factor::Lu(lu), true))
}

/// Factored Schur system. With free variables, `dy = dy_r + N z` where `dy_r`
/// meets the free-variable equations and `N^T M N z` carries the rest.
struct Kkt {
    schur: DMatrix<f64>,
    /// `N^T M N`, or `M` itself without free variables; unregularized.
    reduced: Option<DMatrix<f64>>,
    factor: Factor,
    regularized: bool,
    /// Factor of `A A^*` in the metric of the primal iterate.
    primal: Factor,
}

impl Kkt {
    fn new(schur: DMatrix<f64>, primal: DMatrix<f64>, elim: Option<&FreeElim>) -> Option<Kkt> {
        let reduced = elim.map(|e| e.null.transpose() * &schur * &e.null);
        let (factor, regularized) = spd_factor(sym(reduced.as_ref().unwrap_or(&schur)))?;
        let (primal, _) = spd_factor(sym(&primal))?;
        Some(Kkt {
            schur,
            reduced,
            factor,
            regularized,
            primal,
        })
    }

    fn well_posed(pivots: impl Iterator<Item = f64>) -> bool {
        let (min, max) = pivots.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        max == 0.0 || min > 1e-15 * max
    }

    /// Solves `M dy + A_f dxf = h`, `A_f^T dy = rf`.
    fn solve(
        &self,
        elim: Option<&FreeElim>,
        h: &DVector<f64>,
        rf: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let k = self.reduced.as_ref().unwrap_or(&self.schur);
        let (dy, dxf) = match elim {
            None => (self.refined(k, h)?, DVector::zeros(0)),
            Some(e) => {
                let dy_r = e.range_solution(rf);
                let t = h - &self.schur * &dy_r;
                let z = self.refined(k, &(e.null.transpose() * &t))?;
                let dy = dy_r + &e.null * z;
                let dxf = e.free_solution(&(h - &self.schur * &dy));
                (dy, dxf)
            }
        };
        dy.iter()
            .chain(dxf.iter())
            .all(|v| v.is_finite())
            .then_some((dy, dxf))
    }

    fn refined(&self, k: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        if rhs.is_empty() {
            return Some(rhs.clone());
        }
        let mut x = self.factor.solve(rhs)?;
        let mut r = rhs - k * &x;
        let mut r_norm = r.norm();
        let rounds = if self.regularized { 4 } else { 1 };
        for _ in 0..rounds {
            let Some(dx) = self.factor.solve(&r) else {
                break;
            };
            let cand = &x + dx;
            let cand_r = rhs - k * &cand;
            let cand_norm = cand_r.norm();
            if !(cand_norm < r_norm) {
                break;
            }
            x = cand;
            r = cand_r;
            r_norm = cand_norm;
        }
        Some(x)
    }
}
