//! Small dense linear-algebra helpers for complex Hermitian matrices.
//!
//! Dimensions in this crate are tiny (2(n_max+1) ≤ ~64), so eigensolves use
//! a cyclic Jacobi iteration on the real symmetric embedding instead of an
//! external LAPACK backend.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Matrix trace.
pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().iter().sum()
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product, row-major convention: `(a ⊗ b)[ip+k, jq+l] = a[i,j] b[k,l]`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// `c = a · b` without allocating. All three must be square with equal
/// dimension and standard (row-major contiguous) layout.
pub fn matmul_into(a: &Array2<C64>, b: &Array2<C64>, c: &mut Array2<C64>) {
    let n = a.nrows();
    debug_assert_eq!(a.dim(), (n, n));
    debug_assert_eq!(b.dim(), (n, n));
    debug_assert_eq!(c.dim(), (n, n));
    let a = a.as_slice().expect("matmul_into: a not contiguous");
    let b = b.as_slice().expect("matmul_into: b not contiguous");
    let c = c.as_slice_mut().expect("matmul_into: c not contiguous");
    c.fill(C64::new(0.0, 0.0));
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            let brow = &b[k * n..(k + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += aik * brow[j];
            }
        }
    }
}

/// Frobenius-norm distance from Hermiticity, `max_{jk} |m_{jk} - conj(m_{kj})|`.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for k in j..n {
            let d = (m[[j, k]] - m[[k, j]].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Eigenvalues and eigenvectors of a real symmetric matrix by cyclic Jacobi
/// rotations. Returns `(eigenvalues, columns-of-eigenvectors)`, unsorted.
pub fn jacobi_eigh(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(m.dim(), (n, n), "jacobi_eigh: matrix must be square");
    let mut a = m.clone();
    let mut v = Array2::eye(n);
    // Off-diagonal Frobenius norm squared as the convergence measure.
    let off2 = |a: &Array2<f64>| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[[p, q]] * a[[p, q]];
            }
        }
        s
    };
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().max(1.0);
    let tol = 1e-30 * scale;
    for _sweep in 0..100 {
        if off2(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigs = (0..n).map(|k| a[[k, k]]).collect();
    (eigs, v)
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
///
/// Uses the real symmetric embedding `[[Re, -Im], [Im, Re]]`, whose spectrum
/// is that of the Hermitian matrix with every eigenvalue doubled.
pub fn eigvals_hermitian(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    let mut emb = Array2::zeros((2 * n, 2 * n));
    for j in 0..n {
        for k in 0..n {
            let z = m[[j, k]];
            emb[[j, k]] = z.re;
            emb[[j, k + n]] = -z.im;
            emb[[j + n, k]] = z.im;
            emb[[j + n, k + n]] = z.re;
        }
    }
    let (mut eigs, _) = jacobi_eigh(&emb);
    eigs.sort_by(f64::total_cmp);
    // Each eigenvalue appears twice in the embedding; keep one per pair.
    eigs.into_iter().step_by(2).collect()
}

/// `exp(i g)` for a real symmetric generator `g`, via eigendecomposition.
/// The result is unitary to machine precision.
pub fn expm_i_real_symmetric(g: &Array2<f64>) -> Array2<C64> {
    let n = g.nrows();
    let (eigs, v) = jacobi_eigh(g);
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            let mut z = C64::new(0.0, 0.0);
            for (l, lam) in eigs.iter().enumerate() {
                z += C64::from_polar(1.0, *lam) * v[[j, l]] * v[[k, l]];
            }
            out[[j, k]] = z;
        }
    }
    out
}
