use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One upper-triangular entry `(i, j)` with `i <= j` of a symmetric
/// coefficient matrix in PSD block `block`. Off-diagonal entries stand for
/// both `(i, j)` and `(j, i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Relation {
    Eq,
    Le,
}

/// `sum_b <A_b, X_b> + a_f^T x_free  (= | <=)  rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub entries: Vec<BlockEntry>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
    pub relation: Relation,
}

impl Constraint {
    pub fn eq(entries: Vec<BlockEntry>, free: Vec<(usize, f64)>, rhs: f64) -> Self {
        Constraint {
            entries,
            free,
            rhs,
            relation: Relation::Eq,
        }
    }

    pub fn le(entries: Vec<BlockEntry>, free: Vec<(usize, f64)>, rhs: f64) -> Self {
        Constraint {
            entries,
            free,
            rhs,
            relation: Relation::Le,
        }
    }

    /// Evaluates the left-hand side.
    pub fn lhs(&self, blocks: &[DMatrix<f64>], free: &[f64]) -> f64 {
        inner(&self.entries, blocks) + self.free.iter().map(|&(k, v)| v * free[k]).sum::<f64>()
    }
}

/// Linear objective over block entries and free variables (minimized).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Objective {
    pub entries: Vec<BlockEntry>,
    pub free: Vec<(usize, f64)>,
}

impl Objective {
    pub fn value(&self, blocks: &[DMatrix<f64>], free: &[f64]) -> f64 {
        inner(&self.entries, blocks) + self.free.iter().map(|&(k, v)| v * free[k]).sum::<f64>()
    }
}

fn inner(entries: &[BlockEntry], blocks: &[DMatrix<f64>]) -> f64 {
    entries
        .iter()
        .map(|e| {
            let x = blocks[e.block][(e.i, e.j)];
            if e.i == e.j {
                e.value * x
            } else {
                2.0 * e.value * x
            }
        })
        .sum()
}

/// `minimize <C, X> + c_f^T x_f` over PSD blocks `X_b` and free scalars `x_f`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub n_free: usize,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, n_free: usize) -> Self {
        SdpProblem {
            block_dims,
            n_free,
            objective: Objective::default(),
            constraints: Vec::new(),
        }
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Same problem with duplicate entries merged, zeros dropped and all
    /// coefficient lists sorted.
    pub fn canonical(&self) -> SdpProblem {
        let entries = |list: &[BlockEntry]| -> Vec<BlockEntry> {
            let mut map: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
            for e in list {
                *map.entry((e.block, e.i, e.j)).or_default() += e.value;
            }
            map.into_iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|((block, i, j), value)| BlockEntry { block, i, j, value })
                .collect()
        };
        let free = |list: &[(usize, f64)]| -> Vec<(usize, f64)> {
            let mut map: BTreeMap<usize, f64> = BTreeMap::new();
            for &(k, v) in list {
                *map.entry(k).or_default() += v;
            }
            map.into_iter().filter(|&(_, v)| v != 0.0).collect()
        };
        SdpProblem {
            block_dims: self.block_dims.clone(),
            n_free: self.n_free,
            objective: Objective {
                entries: entries(&self.objective.entries),
                free: free(&self.objective.free),
            },
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    entries: entries(&c.entries),
                    free: free(&c.free),
                    rhs: c.rhs,
                    relation: c.relation,
                })
                .collect(),
        }
    }

    /// Rejects out-of-range indices, lower-triangular entries and non-finite data.
    pub fn validate(&self) -> Result<()> {
        let check_entries = |entries: &[BlockEntry], what: &str| -> Result<()> {
            for e in entries {
                let dim = *self.block_dims.get(e.block).ok_or_else(|| {
                    Error::MalformedProblem(format!("{what}: block {} does not exist", e.block))
                })?;
                if e.i > e.j || e.j >= dim {
                    return Err(Error::MalformedProblem(format!(
                        "{what}: entry ({}, {}) invalid for block {} of size {dim}",
                        e.i, e.j, e.block
                    )));
                }
                if !e.value.is_finite() {
                    return Err(Error::MalformedProblem(format!(
                        "{what}: non-finite coefficient"
                    )));
                }
            }
            Ok(())
        };
        let check_free = |free: &[(usize, f64)], what: &str| -> Result<()> {
            for &(k, v) in free {
                if k >= self.n_free {
                    return Err(Error::MalformedProblem(format!(
                        "{what}: free variable {k} out of range"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::MalformedProblem(format!(
                        "{what}: non-finite coefficient"
                    )));
                }
            }
            Ok(())
        };
        if self.block_dims.iter().any(|&d| d == 0) {
            return Err(Error::MalformedProblem("zero-sized block".into()));
        }
        check_entries(&self.objective.entries, "objective")?;
        check_free(&self.objective.free, "objective")?;
        for (r, c) in self.constraints.iter().enumerate() {
            let what = format!("constraint {r}");
            check_entries(&c.entries, &what)?;
            check_free(&c.free, &what)?;
            if !c.rhs.is_finite() {
                return Err(Error::MalformedProblem(format!(
                    "{what}: non-finite right-hand side"
                )));
            }
        }
        Ok(())
    }
}
