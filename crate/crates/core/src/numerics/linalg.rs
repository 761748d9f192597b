use super::tensor::Tensor;
use crate::{Error, Result};

const SYM_TOL: f64 = 1e-10;
const OFF_DIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second tensor, so `A ≈ V diag(λ) Vᵀ`. Inputs are
/// small here (≤ 64×64), where Jacobi is simple and accurate.
pub fn sym_eig(a: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let (n, m) = a.dims2()?;
    if n != m {
        return Err(Error::ShapeMismatch {
            op: "sym_eig",
            detail: format!("matrix is {}x{}", n, m),
        });
    }
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((a.get2(i, j) - a.get2(j, i)).abs());
        }
    }
    if max_asym > SYM_TOL {
        return Err(Error::NotSymmetric(max_asym));
    }

    let mut w: Vec<f64> = a.data().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += 2.0 * w[i * n + j] * w[i * n + j];
                }
            }
            s.sqrt()
        };
        if off < OFF_DIAG_TOL {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                // rotation angle that zeroes w[p][q]
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let wkp = w[k * n + p];
                    let wkq = w[k * n + q];
                    w[k * n + p] = c * wkp - s * wkq;
                    w[k * n + q] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[p * n + k];
                    let wqk = w[q * n + k];
                    w[p * n + k] = c * wpk - s * wqk;
                    w[q * n + k] = s * wpk + c * wqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i * n + i].partial_cmp(&w[j * n + j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    Ok((eigenvalues, Tensor::new(vec![n, n], vectors)?))
}

/// Principal square root of a PSD symmetric matrix via its
/// eigendecomposition. Eigenvalues slightly below zero (roundoff from an
/// upstream product) are clamped; materially negative ones are an error.
pub fn sqrtm_psd(a: &Tensor) -> Result<Tensor> {
    let (eigenvalues, v) = sym_eig(a)?;
    let scale = eigenvalues.iter().fold(1.0f64, |m, &l| m.max(l.abs()));
    let tol = 1e-10 * scale;
    let n = eigenvalues.len();
    let mut roots = Vec::with_capacity(n);
    for &l in &eigenvalues {
        if l < -tol {
            return Err(Error::NegativeEigenvalue(l));
        }
        roots.push(l.max(0.0).sqrt());
    }
    // V diag(sqrt λ) Vᵀ
    let mut scaled = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            scaled[i * n + j] = v.get2(i, j) * roots[j];
        }
    }
    let scaled = Tensor::new(vec![n, n], scaled)?;
    let vt = v.transpose2()?;
    scaled.matmul2(&vt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn random_symmetric(n: usize, rng: &mut Rng) -> Tensor {
        let raw = rng.standard_normal(vec![n, n]);
        let mut m = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            for j in 0..n {
                let v = 0.5 * (raw.get2(i, j) + raw.get2(j, i));
                m.set2(i, j, v);
            }
        }
        m
    }

    #[test]
    fn identity_eigenvalues() {
        let mut i3 = Tensor::zeros(vec![3, 3]);
        for i in 0..3 {
            i3.set2(i, i, 1.0);
        }
        let (l, _) = sym_eig(&i3).unwrap();
        assert_eq!(l, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenvalues() {
        let mut d = Tensor::zeros(vec![2, 2]);
        d.set2(0, 0, 9.0);
        d.set2(1, 1, 4.0);
        let (l, _) = sym_eig(&d).unwrap();
        assert_eq!(l, vec![4.0, 9.0]);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = Rng::new(3);
        let a = random_symmetric(8, &mut rng);
        let (l, v) = sym_eig(&a).unwrap();
        // A ≈ V diag(λ) Vᵀ
        let mut lv = Tensor::zeros(vec![8, 8]);
        for i in 0..8 {
            for j in 0..8 {
                lv.set2(i, j, v.get2(i, j) * l[j]);
            }
        }
        let recon = lv.matmul2(&v.transpose2().unwrap()).unwrap();
        let mut err = Tensor::zeros(vec![8, 8]);
        for i in 0..8 {
            for j in 0..8 {
                err.set2(i, j, recon.get2(i, j) - a.get2(i, j));
            }
        }
        assert!(err.frobenius_norm() < 1e-8, "recon err {}", err.frobenius_norm());

        let vtv = v.transpose2().unwrap().matmul2(&v).unwrap();
        let mut ortho_err = 0.0f64;
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                ortho_err = ortho_err.max((vtv.get2(i, j) - want).abs());
            }
        }
        assert!(ortho_err < 1e-8);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn sqrtm_diagonal() {
        let mut d = Tensor::zeros(vec![2, 2]);
        d.set2(0, 0, 4.0);
        d.set2(1, 1, 9.0);
        let s = sqrtm_psd(&d).unwrap();
        assert!((s.get2(0, 0) - 2.0).abs() < 1e-12);
        assert!((s.get2(1, 1) - 3.0).abs() < 1e-12);
        assert!(s.get2(0, 1).abs() < 1e-12);
    }

    #[test]
    fn sqrtm_squares_back() {
        let mut rng = Rng::new(17);
        let b = random_symmetric(8, &mut rng);
        let a = b.matmul2(&b).unwrap(); // b symmetric => b·b is PSD
        let s = sqrtm_psd(&a).unwrap();
        let ss = s.matmul2(&s).unwrap();
        let mut err = Tensor::zeros(vec![8, 8]);
        for i in 0..8 {
            for j in 0..8 {
                err.set2(i, j, ss.get2(i, j) - a.get2(i, j));
            }
        }
        assert!(err.frobenius_norm() < 1e-8, "err {}", err.frobenius_norm());
    }

    #[test]
    fn sqrtm_rejects_negative() {
        let mut d = Tensor::zeros(vec![2, 2]);
        d.set2(0, 0, -1.0);
        d.set2(1, 1, 1.0);
        assert!(matches!(sqrtm_psd(&d), Err(Error::NegativeEigenvalue(_))));
    }
}
