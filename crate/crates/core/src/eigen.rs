//! Eigenvalues of small Hermitian matrices.
//!
//! 2×2 matrices use the closed form. Larger ones are embedded into the real
//! symmetric matrix `[[Re, -Im], [Im, Re]]` of twice the size, whose spectrum
//! is the Hermitian spectrum with every eigenvalue doubled, and diagonalized
//! with cyclic Jacobi rotations.

use num_complex::Complex64;

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_THRESHOLD: f64 = 1e-13;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a Hermitian `dim × dim` matrix stored row-major, ascending.
///
/// Only the upper triangle is trusted; the caller is responsible for
/// Hermiticity.
pub fn hermitian_eigenvalues(dim: usize, m: &[Complex64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), dim * dim);
    match dim {
        1 => vec![m[0].re],
        2 => {
            let a = m[0].re;
            let d = m[3].re;
            let b = m[1];
            let mean = 0.5 * (a + d);
            let half_diff = 0.5 * (a - d);
            let r = (half_diff * half_diff + b.norm_sqr()).sqrt();
            vec![mean - r, mean + r]
        }
        _ => {
            let n = 2 * dim;
            let mut s = vec![0.0; n * n];
            for i in 0..dim {
                for j in 0..dim {
                    let z = m[i * dim + j];
                    s[i * n + j] = z.re;
                    s[(i + dim) * n + (j + dim)] = z.re;
                    s[i * n + (j + dim)] = -z.im;
                    s[(i + dim) * n + j] = z.im;
                }
            }
            let mut doubled = symmetric_jacobi_eigenvalues(n, &mut s);
            doubled.sort_by(f64::total_cmp);
            // each eigenvalue appears twice; average the pair
            doubled.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect()
        }
    }
}

fn off_norm(n: usize, a: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi on a real symmetric matrix; destroys `a`.
fn symmetric_jacobi_eigenvalues(n: usize, a: &mut [f64]) -> Vec<f64> {
    for _ in 0..MAX_SWEEPS {
        if off_norm(n, a) < JACOBI_THRESHOLD {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let m = [c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
        let ev = hermitian_eigenvalues(2, &m);
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn four_by_four_diagonal() {
        let mut m = vec![c(0.0, 0.0); 16];
        for (i, v) in [0.4, 0.1, 0.3, 0.2].iter().enumerate() {
            m[i * 4 + i] = c(*v, 0.0);
        }
        let ev = hermitian_eigenvalues(4, &m);
        for (got, want) in ev.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn four_by_four_complex_projector() {
        // |v><v| for v = (1, i, -1, -i)/2 has spectrum {0, 0, 0, 1}
        let v = [c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        let mut m = vec![c(0.0, 0.0); 16];
        for i in 0..4 {
            for j in 0..4 {
                m[i * 4 + j] = v[i] * v[j].conj();
            }
        }
        let ev = hermitian_eigenvalues(4, &m);
        assert!(ev[..3].iter().all(|x| x.abs() < 1e-12), "{ev:?}");
        assert!((ev[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_is_preserved() {
        let m = [
            c(0.3, 0.0),
            c(0.1, 0.05),
            c(0.0, -0.02),
            c(0.01, 0.0),
            c(0.1, -0.05),
            c(0.2, 0.0),
            c(0.03, 0.03),
            c(0.0, 0.0),
            c(0.0, 0.02),
            c(0.03, -0.03),
            c(0.25, 0.0),
            c(-0.04, 0.01),
            c(0.01, 0.0),
            c(0.0, 0.0),
            c(-0.04, -0.01),
            c(0.25, 0.0),
        ];
        let ev = hermitian_eigenvalues(4, &m);
        let sum: f64 = ev.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }
}
