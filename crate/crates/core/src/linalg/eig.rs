use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations on `(S + Sᵀ)/2`.
///
/// Each rotation annihilates one off-diagonal pair; sweeps continue until
/// the off-diagonal mass is negligible relative to the Frobenius norm.
pub fn sym_eig(s: &DMatrix<f64>) -> Result<SymEigen> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(Error::dims("sym_eig (square)", n, s.ncols()));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sym_eig input"));
    }
    if n == 0 {
        return Ok(SymEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let mut a = (s + s.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = a.norm_squared();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "Jacobi eigensolver",
            detail: format!("{MAX_SWEEPS} sweeps on a {n}x{n} matrix"),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Largest eigenvalue of the symmetric part of `s`.
pub fn sym_eig_max(s: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eig(s)?.max())
}

/// Induced 2-norm, `√λ_max(MᵀM)`.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() < m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    sym_eig_max(&gram).map(|l| l.max(0.0).sqrt()).unwrap_or(f64::NAN)
}

/// Log-norm induced by the 2-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormResult {
    pub mu: f64,
    pub is_contractive: bool,
}

pub fn log_norm(a: &DMatrix<f64>) -> Result<LogNormResult> {
    if !a.is_square() {
        return Err(Error::dims("log_norm (square)", a.nrows(), a.ncols()));
    }
    let mu = sym_eig_max(&((a + a.transpose()) * 0.5))?;
    Ok(LogNormResult {
        mu,
        is_contractive: mu < 0.0,
    })
}

/// Largest real part of the eigenvalues, from the real Schur form.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::dims("spectral_abscissa (square)", a.nrows(), a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectral_abscissa input"));
    }
    if a.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or(Error::NoConvergence {
        what: "real Schur decomposition",
        detail: format!("{}x{} matrix", a.nrows(), a.ncols()),
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Symmetric PSD square root via the eigen-decomposition.
pub fn sym_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eig(s)?;
    if eig.min() < -1e-10 * eig.max().abs().max(f64::MIN_POSITIVE) {
        return Err(Error::invalid("sym_sqrt", format!("matrix is indefinite (min eigenvalue {:.3e})", eig.min())));
    }
    let d = DMatrix::from_diagonal(&eig.values.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.vectors * d * eig.vectors.transpose())
}
