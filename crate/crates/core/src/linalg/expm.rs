//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (Higham 2005), and the parameter derivative of `e^{At}` through the
//! block-triangular exponential.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{A}`.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dims("expm (square)", n, a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("expm input"));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    if n == 0 {
        return Ok(eye);
    }
    let a_norm = norm1(a);

    for &(m, theta) in &THETA {
        if a_norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, coeffs, &eye);
            return solve_pade(u, v);
        }
    }

    let s = if a_norm > THETA_13 {
        (a_norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-s);
    let (u, v) = pade13(&scaled, &eye);
    let mut x = solve_pade(u, v)?;
    for _ in 0..s {
        x = &x * &x;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("expm result"));
    }
    Ok(x)
}

fn pade_low(a: &DMatrix<f64>, b: &[f64], eye: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let a2 = a * a;
    let mut pow = eye.clone();
    let mut u = eye * b[1];
    let mut v = eye * b[0];
    for k in 1..b.len() / 2 {
        pow = &pow * &a2;
        u += &pow * b[2 * k + 1];
        v += &pow * b[2 * k];
    }
    (a * u, v)
}

fn pade13(a: &DMatrix<f64>, eye: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + eye * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + eye * b[0];
    (u, v)
}

fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = &v - &u;
    let p = v + u;
    q.lu().solve(&p).ok_or(Error::Singular("Pade denominator"))
}

/// `∂e^{At}/∂θ = ∫₀ᵗ e^{(t−τ)A} E e^{τA} dτ` with `E = ∂A/∂θ`.
///
/// Read off as the upper-right block of `exp(t·[[A, E], [0, A]])`.
pub fn expm_param_derivative(a: &DMatrix<f64>, e: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || a.shape() != e.shape() {
        return Err(Error::dims(
            "expm_param_derivative",
            format!("{n}x{n} pair"),
            format!("A {}x{}, E {}x{}", a.nrows(), a.ncols(), e.nrows(), e.ncols()),
        ));
    }
    if !t.is_finite() {
        return Err(Error::invalid("t", "time must be finite"));
    }
    if e.iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::zeros(n, n));
    }
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    block.view_mut((n, n), (n, n)).copy_from(&(a * t));
    block.view_mut((0, n), (n, n)).copy_from(&(e * t));
    let big = expm(&block)?;
    Ok(big.view((0, n), (n, n)).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::linalg::{log_norm, sym_eig};

    fn rk4_flow(a: &DMatrix<f64>, t: f64, steps: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let h = t / steps as f64;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut x = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
            for _ in 0..steps {
                let k1 = a * &x;
                let k2 = a * (&x + &k1 * (h / 2.0));
                let k3 = a * (&x + &k2 * (h / 2.0));
                let k4 = a * (&x + &k3 * h);
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            out.set_column(j, &x);
        }
        out
    }

    fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mu = log_norm(&a).unwrap().mu;
        for i in 0..n {
            a[(i, i)] -= mu + 0.5;
        }
        a
    }

    #[test]
    fn zero_and_nilpotent() {
        assert_eq!(expm(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let e = expm(&dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap();
        assert!((e - dmatrix![1.0, 1.0; 0.0, 1.0]).amax() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        assert!(expm(&dmatrix![f64::NAN]).is_err());
        assert!(expm(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn matches_rk4_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = random_stable(&mut rng, 3);
            let oracle = rk4_flow(&a, 1.0, 4000);
            let e = expm(&a).unwrap();
            assert!((e - oracle).amax() < 1e-9);
        }
    }

    #[test]
    fn matches_spectral_formula_on_symmetric() {
        // every Padé degree branch, plus heavy scaling
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for scale in [1e-3, 0.1, 0.5, 1.5, 4.0, 20.0, 60.0] {
            let m = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let s = (&m + m.transpose()) * (scale / 2.0);
            let eig = sym_eig(&s).unwrap();
            let oracle = &eig.vectors
                * DMatrix::from_diagonal(&eig.values.map(f64::exp))
                * eig.vectors.transpose();
            let got = expm(&s).unwrap();
            let rel = (got - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-12, "scale {scale}: rel {rel:e}");
        }
    }

    #[test]
    fn semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a = random_stable(&mut rng, 4) * 3.0;
            let (t1, t2) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let lhs = expm(&(&a * (t1 + t2))).unwrap();
            let rhs = expm(&(&a * t1)).unwrap() * expm(&(&a * t2)).unwrap();
            assert!((&lhs - rhs).norm() <= 1e-10 * lhs.norm());
        }
    }

    #[test]
    fn derivative_scalar() {
        let d = expm_param_derivative(&dmatrix![-2.0], &dmatrix![1.0], 1.5).unwrap();
        let expected = 1.5 * (-3.0f64).exp();
        assert!((d[(0, 0)] - expected).abs() < 1e-15);
        assert!((d[(0, 0)] - 0.074681).abs() < 1e-6);
    }

    #[test]
    fn derivative_of_zero_direction() {
        let a = dmatrix![-1.0, 2.0; 0.0, -3.0];
        assert_eq!(expm_param_derivative(&a, &DMatrix::zeros(2, 2), 2.0).unwrap(), DMatrix::zeros(2, 2));
        assert!(expm_param_derivative(&a, &DMatrix::zeros(3, 3), 2.0).is_err());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let a = random_stable(&mut rng, 2);
            let e = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let t = rng.gen_range(0.2..3.0);
            let h = 1e-6;
            let fd = (expm(&((&a + &e * h) * t)).unwrap() - expm(&((&a - &e * h) * t)).unwrap()) / (2.0 * h);
            let exact = expm_param_derivative(&a, &e, t).unwrap();
            let rel = (&fd - &exact).norm() / exact.norm();
            assert!(rel <= 1e-5, "rel {rel:e}");
        }
    }
}
