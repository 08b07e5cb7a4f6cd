use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eigen::max_eigenvalue;
use crate::error::{Error, Result};
use crate::game::{PolynomialGame, SemialgebraicSet};
use crate::hierarchy::CertKind;
use crate::poly::PolyMatrix;

pub const DEFAULT_SEED: u64 = 0x5EED;
/// Sampling aborts below this acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Draws allowed for a single sample before the domain is declared too thin.
const MAX_DRAWS: u64 = 100_000;

/// Worker threads for sampling: `GAMECERT_THREADS` if set, else the
/// available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("GAMECERT_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    pub samples: usize,
    pub attempts: u64,
    pub acceptance_rate: f64,
    /// Largest observed maximum eigenvalue; a lower bound on the true maximum
    /// over the domain.
    pub max: f64,
    pub argmax: Vec<f64>,
    /// Concave kind only: the largest eigenvalue per player's Hessian.
    pub per_player_max: Option<Vec<f64>>,
    pub seed: u64,
}

/// Coordinate bounds implied by the domain: univariate affine constraints,
/// propagation through multivariate affine ones, and diagonal balls
/// `c - sum w_k x_k^2 >= 0`.
pub fn infer_bounding_box(set: &SemialgebraicSet) -> Option<Vec<(f64, f64)>> {
    let n = set.n_vars();
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    let mut affine: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    for g in set.inequalities() {
        match g.degree() {
            0 | 1 => {
                let mut b = 0.0;
                let mut a = Vec::new();
                for (m, c) in g.terms() {
                    match m.exponents().iter().position(|&e| e > 0) {
                        None => b = c,
                        Some(k) => a.push((k, c)),
                    }
                }
                affine.push((b, a));
            }
            2 => {
                let mut c0 = None;
                let mut diag = Vec::new();
                let mut ok = true;
                for (m, c) in g.terms() {
                    let e = m.exponents();
                    if m.is_one() {
                        c0 = Some(c);
                    } else if m.degree() == 2 && c < 0.0 && e.iter().any(|&v| v == 2) {
                        diag.push((e.iter().position(|&v| v == 2).unwrap(), -c));
                    } else {
                        ok = false;
                    }
                }
                if let (true, Some(c0)) = (ok, c0) {
                    if c0 >= 0.0 {
                        for (k, w) in diag {
                            let r = (c0 / w).sqrt();
                            lo[k] = lo[k].max(-r);
                            hi[k] = hi[k].min(r);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    // b + sum a_j x_j >= 0 bounds x_k given bounds on the others
    for _ in 0..n + 1 {
        for (b, a) in &affine {
            for &(k, ak) in a {
                let mut rest = *b;
                for &(j, aj) in a {
                    if j != k {
                        rest += if aj > 0.0 { aj * hi[j] } else { aj * lo[j] };
                    }
                }
                if !rest.is_finite() {
                    continue;
                }
                let bound = -rest / ak;
                if ak > 0.0 {
                    lo[k] = lo[k].max(bound);
                } else {
                    hi[k] = hi[k].min(bound);
                }
            }
        }
    }
    lo.into_iter()
        .zip(hi)
        .map(|(l, h)| (l.is_finite() && h.is_finite() && l <= h).then_some((l, h)))
        .collect()
}

fn matrices(game: &PolynomialGame, kind: CertKind) -> Result<Vec<PolyMatrix>> {
    match kind {
        CertKind::Monotone => Ok(vec![game.symmetrized_jacobian()]),
        CertKind::Concave => (0..game.n_players())
            .map(|i| game.player_hessian(i))
            .collect(),
    }
}

struct Sample {
    attempts: u64,
    point: Vec<f64>,
    values: Vec<f64>,
}

/// Draws one accepted point from the stream of sample `index`.
fn draw(
    seed: u64,
    index: usize,
    bbox: &[(f64, f64)],
    set: &SemialgebraicSet,
    mats: &[PolyMatrix],
) -> Result<Option<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let max_attempts = MAX_DRAWS;
    for attempt in 1..=max_attempts {
        let point: Vec<f64> = bbox
            .iter()
            .map(|&(l, h)| if l == h { l } else { rng.gen_range(l..=h) })
            .collect();
        if !set.contains(&point, 0.0) {
            continue;
        }
        let values = mats
            .iter()
            .map(|m| Ok(max_eigenvalue(&m.evaluate(&point)?, m.dim())))
            .collect::<Result<Vec<f64>>>()?;
        return Ok(Some(Sample {
            attempts: attempt,
            point,
            values,
        }));
    }
    Ok(None)
}

/// Rejection-samples the domain and records the largest eigenvalue of the
/// symmetrized Jacobian (monotone) or of each player's Hessian (concave).
/// Sample `s` uses stream `s` of the seeded generator, so the result does
/// not depend on the thread count.
pub fn sample_max_eigenvalue(
    game: &PolynomialGame,
    kind: CertKind,
    n_samples: usize,
    bounding_box: Option<&[(f64, f64)]>,
    seed: u64,
) -> Result<SampleReport> {
    if n_samples == 0 {
        return Err(Error::Sampling("no samples requested".into()));
    }
    let set = game.domain();
    let bbox = match bounding_box {
        Some(b) => b.to_vec(),
        None => infer_bounding_box(set).ok_or_else(|| {
            Error::Sampling("no bounding box derivable from the domain; supply one".into())
        })?,
    };
    if bbox.len() != game.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: game.n_vars(),
            got: bbox.len(),
        });
    }
    let mats = matrices(game, kind)?;
    let threads = worker_threads().min(n_samples);
    let chunk = n_samples.div_ceil(threads);
    let results: Vec<Result<Vec<Option<Sample>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (bbox, mats) = (&bbox, &mats);
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for s in t * chunk..((t + 1) * chunk).min(n_samples) {
                        let sample = draw(seed, s, bbox, set, mats)?;
                        let stop = sample.is_none();
                        out.push(sample);
                        if stop {
                            break;
                        }
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling thread panicked"))
            .collect()
    });

    let mut attempts = 0u64;
    let mut best: Option<Sample> = None;
    let mut per_player = vec![f64::NEG_INFINITY; mats.len()];
    for chunk in results {
        for sample in chunk? {
            let Some(s) = sample else {
                return Err(Error::Sampling(format!(
                    "acceptance rate below {MIN_ACCEPTANCE:e}: no feasible point in {} draws",
                    MAX_DRAWS
                )));
            };
            attempts += s.attempts;
            for (p, v) in per_player.iter_mut().zip(&s.values) {
                *p = p.max(*v);
            }
            let top = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let better = best
                .as_ref()
                .is_none_or(|b| top > b.values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            if better {
                best = Some(s);
            }
        }
    }
    let acceptance_rate = n_samples as f64 / attempts as f64;
    if acceptance_rate < MIN_ACCEPTANCE {
        return Err(Error::Sampling(format!(
            "acceptance rate {acceptance_rate:.2e} below {MIN_ACCEPTANCE:e}"
        )));
    }
    let best = best.expect("n_samples > 0");
    Ok(SampleReport {
        samples: n_samples,
        attempts,
        acceptance_rate,
        max: best
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        argmax: best.point,
        per_player_max: (kind == CertKind::Concave).then_some(per_player),
        seed,
    })
}
