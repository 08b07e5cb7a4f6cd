/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// `a` is row-major `n x n`; only symmetric input is meaningful. Sweeps run
/// until the off-diagonal Frobenius norm drops below `1e-12` relative to the
/// full norm (absolute `1e-12` for tiny matrices).
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    let at = |i: usize, j: usize| i * n + j;
    let total: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = 1e-12 * total.max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[at(i, j)] * m[at(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[at(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[at(p, p)];
                let aqq = m[at(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                m[at(p, p)] = app - t * apq;
                m[at(q, q)] = aqq + t * apq;
                m[at(p, q)] = 0.0;
                m[at(q, p)] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let g = m[at(k, p)];
                    let h = m[at(k, q)];
                    let kp = g - s * (h + g * tau);
                    let kq = h + s * (g - h * tau);
                    m[at(k, p)] = kp;
                    m[at(p, k)] = kp;
                    m[at(k, q)] = kq;
                    m[at(q, k)] = kq;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[at(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Largest eigenvalue of a symmetric row-major matrix (`-inf` when empty).
pub fn max_eigenvalue(a: &[f64], n: usize) -> f64 {
    jacobi_eigenvalues(a, n)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let e = jacobi_eigenvalues(&[0.0, 10.0, 10.0, 0.0], 2);
        assert!((e[0] + 10.0).abs() < 1e-12 && (e[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn block_with_zero_row() {
        let a = [0.0, 10.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(max_eigenvalue(&a, 3), 10.0);
    }

    #[test]
    fn diagonal_is_exact() {
        assert_eq!(
            jacobi_eigenvalues(&[3.0, 0.0, 0.0, -2.0], 2),
            vec![-2.0, 3.0]
        );
    }

    #[test]
    fn tridiagonal_spectrum() {
        // tridiagonal 2 -1 with known spectrum 2 - 2 cos(k pi / (n + 1))
        let n = 7;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0;
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let e = jacobi_eigenvalues(&a, n);
        for (k, v) in e.iter().enumerate() {
            let exact =
                2.0 - 2.0 * (((k + 1) as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        }
    }
}
