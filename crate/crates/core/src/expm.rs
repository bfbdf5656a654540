//! Dense matrix exponentials and the block-triangular exponentials that
//! evaluate semigroup convolution integrals exactly.
//!
//! For an upper block-triangular matrix `[[L, B], [0, L]]`, the exponential
//! of `t` times it has `exp(tL)` on the diagonal and
//! `int_0^t exp(sL) B exp((t-s)L) ds` in the top-right block; the 3x3
//! analogue produces the doubly-convolved integral needed for second
//! moments. This turns every time integral in the moment identities into a
//! single Pade/scaling-and-squaring evaluation with no quadrature error.

use nalgebra::DMatrix;

/// Scaling-and-squaring Pade exponential of a dense matrix.
pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.exp()
}

/// Returns `(exp(tL), int_0^t exp(sL) B exp((t-s)L) ds)` from one
/// exponential of the 2n x 2n block matrix `t [[L, B], [0, L]]`.
pub(crate) fn block_integral(
    l: &DMatrix<f64>,
    b: &DMatrix<f64>,
    t: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = l.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(l);
    big.view_mut((0, n), (n, n)).copy_from(b);
    big.view_mut((n, n), (n, n)).copy_from(l);
    let e = expm(&(big * t));
    (
        e.view((0, 0), (n, n)).into(),
        e.view((0, n), (n, n)).into(),
    )
}

/// Returns `(exp(tL), Omega_t, Omega2_t)` where `Omega_t` is the single
/// convolution integral above and `Omega2_t` is the ordered double
/// convolution `int int exp(sL) B exp(rL) B exp((t-s-r)L)`, read off the
/// first block row of `exp(t [[L,B,0],[0,L,B],[0,0,L]])`.
pub(crate) fn block_double_integral(
    l: &DMatrix<f64>,
    b: &DMatrix<f64>,
    t: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = l.nrows();
    let mut big = DMatrix::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(l);
    big.view_mut((n, n), (n, n)).copy_from(l);
    big.view_mut((2 * n, 2 * n), (n, n)).copy_from(l);
    big.view_mut((0, n), (n, n)).copy_from(b);
    big.view_mut((n, 2 * n), (n, n)).copy_from(b);
    let e = expm(&(big * t));
    (
        e.view((0, 0), (n, n)).into(),
        e.view((0, n), (n, n)).into(),
        e.view((0, 2 * n), (n, n)).into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_relative_eq!(expm(&z), DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn block_integral_with_identity_perturbation_is_t_exp() {
        // B = I gives int_0^t exp(tL) ds = t exp(tL)
        let l = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -1.0]);
        let (etl, omega) = block_integral(&l, &DMatrix::identity(2, 2), 3.0);
        assert_relative_eq!(omega, etl * 3.0, max_relative = 1e-12);
    }

    #[test]
    fn double_integral_with_identity_is_half_t_squared_exp() {
        let l = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -1.0]);
        let t = 2.5;
        let (etl, omega, omega2) = block_double_integral(&l, &DMatrix::identity(2, 2), t);
        assert_relative_eq!(omega, &etl * t, max_relative = 1e-12);
        assert_relative_eq!(omega2, etl * (t * t / 2.0), max_relative = 1e-12);
    }

    #[test]
    fn commuting_blocks_reduce_to_closed_form() {
        // L and B diagonal: integral is t e^{tL} B entrywise
        let l = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -0.5]));
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -3.0]));
        let t = 1.7;
        let (_, omega) = block_integral(&l, &b, t);
        for i in 0..2 {
            let expected = t * (t * l[(i, i)]).exp() * b[(i, i)];
            assert_relative_eq!(omega[(i, i)], expected, max_relative = 1e-12);
        }
    }
}
