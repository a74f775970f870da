use nalgebra::{DMatrix, DVector};

use super::{expm, norm2, spectral_abscissa, sym_eig};
use crate::error::{Error, Result};

/// Solution of `ĀᵀP + PĀ = −Q`.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub p: DMatrix<f64>,
    /// Frobenius norm of `ĀᵀP + PĀ + Q`.
    pub residual: f64,
}

fn check_symmetric_psd(q: &DMatrix<f64>, what: &'static str) -> Result<()> {
    let scale = q.amax().max(f64::MIN_POSITIVE);
    if (q - q.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid(what, "matrix is not symmetric"));
    }
    let eig = sym_eig(q)?;
    if eig.min() < -1e-10 * scale {
        return Err(Error::invalid(what, format!("matrix is not PSD (min eigenvalue {:.3e})", eig.min())));
    }
    Ok(())
}

/// Observability-type Lyapunov equation `ĀᵀP + PĀ = −Q` by Kronecker
/// vectorization: `(I⊗Āᵀ + Āᵀ⊗I) vec(P) = −vec(Q)`.
pub fn lyap_observability(abar: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let n = abar.nrows();
    if !abar.is_square() || q.shape() != (n, n) {
        return Err(Error::dims(
            "lyap_observability",
            format!("{n}x{n}"),
            format!("A {}x{}, Q {}x{}", abar.nrows(), abar.ncols(), q.nrows(), q.ncols()),
        ));
    }
    check_symmetric_psd(q, "Q")?;
    let abscissa = spectral_abscissa(abar)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let at = abar.transpose();
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let vec_p = k.lu().solve(&rhs).ok_or(Error::Singular("Lyapunov Kronecker system"))?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Lyapunov solution"));
    }
    let residual = (&at * &p + &p * abar + q).norm();
    Ok(LyapunovSolution { p, residual })
}

const MAX_INTERVALS: usize = 1 << 22;

/// Finite-horizon observability Gramian `∫₀ᴺ e^{Āᵀs} C̄ᵀC̄ e^{Ās} ds`.
///
/// Composite Simpson on a uniform grid; the step is halved until the trace
/// changes by less than 1e-8 relative. Samples are propagated with
/// `e^{Āh}` so each level costs one matrix exponential.
pub fn gramian_finite(abar: &DMatrix<f64>, cbar: &DMatrix<f64>, horizon: f64) -> Result<DMatrix<f64>> {
    let n = abar.nrows();
    if !abar.is_square() || cbar.ncols() != n {
        return Err(Error::dims(
            "gramian_finite",
            format!("A {n}x{n}, C with {n} columns"),
            format!("A {}x{}, C {}x{}", abar.nrows(), abar.ncols(), cbar.nrows(), cbar.ncols()),
        ));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("N", format!("horizon must be positive, got {horizon}")));
    }
    let ctc = cbar.transpose() * cbar;
    if ctc.iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::zeros(n, n));
    }

    let a_norm = norm2(abar);
    let mut intervals = ((horizon * a_norm).ceil() as usize).max(16);
    intervals += intervals % 2;

    let mut previous = simpson_gramian(abar, &ctc, horizon, intervals)?;
    loop {
        intervals *= 2;
        if intervals > MAX_INTERVALS {
            return Err(Error::NoConvergence {
                what: "finite-horizon Gramian quadrature",
                detail: format!("trace not converged with {} intervals", intervals / 2),
            });
        }
        let current = simpson_gramian(abar, &ctc, horizon, intervals)?;
        let (t_prev, t_cur) = (previous.trace(), current.trace());
        if (t_cur - t_prev).abs() <= 1e-8 * t_cur.abs() {
            return Ok((&current + current.transpose()) * 0.5);
        }
        previous = current;
    }
}

fn simpson_gramian(abar: &DMatrix<f64>, ctc: &DMatrix<f64>, horizon: f64, intervals: usize) -> Result<DMatrix<f64>> {
    let h = horizon / intervals as f64;
    let step = expm(&(abar * h))?;
    let mut phi = DMatrix::<f64>::identity(abar.nrows(), abar.ncols());
    let mut acc = DMatrix::zeros(abar.nrows(), abar.ncols());
    for k in 0..=intervals {
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += (phi.transpose() * ctc * &phi) * w;
        phi = &phi * &step;
    }
    Ok(acc * (h / 3.0))
}
