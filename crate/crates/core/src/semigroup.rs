//! Exact time-t evaluation of the weighted killed semigroup: survival mass,
//! conditional endpoint and two-time laws, penalized limits, and the first
//! two conditional moments of an additive observable, all through dense
//! (block) matrix exponentials.
//!
//! Conventions: internal computations use the uncompensated `exp(tL)` and
//! form ratios, which are invariant under the spectral shift. Only
//! [`survival`] applies the `exp(lambda0 t)` factor, and it does so inside
//! the exponential to avoid overflow. If the survival vector underflows
//! (possible under heavy killing), evaluators transparently recompute with
//! the shifted generator `L + lambda0 I`.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::expm::{block_double_integral, block_integral, expm};
use crate::model::{tilted_generator, FkWeight, Observable, SymmetricChain};
use crate::spectral::{ground_state, qe_quantities};
use crate::Result;

const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Conditional moments of `A_t / t` for every start state, together with the
/// stationary limit they approach.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub t: f64,
    /// Conditional mean of `A_t / t` started from each state.
    pub per_state_mean: DVector<f64>,
    /// Conditional second moment of `A_t / t`; absent when only means were
    /// requested.
    pub per_state_second: Option<DVector<f64>>,
    /// Limit of the conditional mean: `sum V' eta + sum G J`.
    pub limit_mean: f64,
    /// Square of `limit_mean`; the variance of `A_t / t` vanishes as `t`
    /// grows.
    pub limit_second: f64,
}

fn base_generator(chain: &SymmetricChain, weight: &FkWeight) -> Result<DMatrix<f64>> {
    Ok(tilted_generator(chain, weight, 1.0)?.matrix().clone())
}

fn shift(l: &DMatrix<f64>, lambda0: f64) -> DMatrix<f64> {
    let mut out = l.clone();
    for i in 0..l.nrows() {
        out[(i, i)] += lambda0;
    }
    out
}

fn underflows(v: &DVector<f64>) -> bool {
    v.iter().any(|x| x.abs() < UNDERFLOW_FLOOR)
}

fn check_denominator(den: &DVector<f64>) -> Result<()> {
    if den.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvariantViolation(
            "vanishing survival denominator".into(),
        ));
    }
    Ok(())
}

/// Survival factor `Phi_t = exp(lambda0 t) exp(tL) 1`, evaluated through the
/// shifted generator so that no overflow occurs for any killing strength.
/// Converges to `phi0 <phi0, m>` as `t` grows.
pub fn survival(chain: &SymmetricChain, weight: &FkWeight, t: f64) -> Result<DVector<f64>> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be nonnegative, got {t}"
        )));
    }
    let l = base_generator(chain, weight)?;
    let sp = ground_state(chain, weight, 1.0)?;
    let ones = DVector::from_element(chain.n(), 1.0);
    Ok(expm(&(shift(&l, sp.lambda0) * t)) * ones)
}

/// Conditional endpoint law: `x -> (exp(tL) f)(x) / (exp(tL) 1)(x)`.
/// Converges to the quasi-stationary average of `f` as `t` grows.
pub fn endpoint_conditional(
    chain: &SymmetricChain,
    weight: &FkWeight,
    t: f64,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    if t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    let n = chain.n();
    if f.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "f has length {}, expected {n}",
            f.len()
        )));
    }
    let l = base_generator(chain, weight)?;
    let ones = DVector::from_element(n, 1.0);
    let mut e = expm(&(&l * t));
    let mut den = &e * &ones;
    if underflows(&den) {
        let sp = ground_state(chain, weight, 1.0)?;
        e = expm(&(shift(&l, sp.lambda0) * t));
        den = &e * &ones;
    }
    check_denominator(&den)?;
    let num = &e * f;
    Ok(num.component_div(&den))
}

/// Conditional two-time law
/// `x -> E_{x|t}[f(X_{pt}) g(X_{qt})]` for `0 < p < q <= 1`, evaluated as a
/// product of three semigroup factors sandwiching the diagonal observables.
pub fn two_time_conditional(
    chain: &SymmetricChain,
    weight: &FkWeight,
    t: f64,
    p: f64,
    q: f64,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    if t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    if !(0.0 < p && p < q && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < p < q <= 1, got p = {p}, q = {q}"
        )));
    }
    let n = chain.n();
    if f.len() != n || g.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "observable vectors must have length {n}"
        )));
    }
    let l = base_generator(chain, weight)?;
    let ones = DVector::from_element(n, 1.0);

    let eval = |l: &DMatrix<f64>| -> (DVector<f64>, DVector<f64>) {
        let e1 = expm(&(l * (p * t)));
        let e2 = expm(&(l * ((q - p) * t)));
        let e3 = if q < 1.0 {
            Some(expm(&(l * ((1.0 - q) * t))))
        } else {
            None
        };
        let tail = |v: &DVector<f64>| match &e3 {
            Some(e) => e * v,
            None => v.clone(),
        };
        let num = &e1 * f.component_mul(&(&e2 * g.component_mul(&tail(&ones))));
        let den = &e1 * (&e2 * tail(&ones));
        (num, den)
    };

    let (mut num, mut den) = eval(&l);
    if underflows(&den) {
        let sp = ground_state(chain, weight, 1.0)?;
        (num, den) = eval(&shift(&l, sp.lambda0));
    }
    check_denominator(&den)?;
    Ok(num.component_div(&den))
}

/// The penalized (t -> infinity first) law of `f(X_s)`:
/// `x -> phi0(x)^{-1} exp(lambda0 s) (exp(sL) (f phi0))(x)`. As `s` grows this
/// tends to the quasi-ergodic average of `f`, which differs from the
/// quasi-stationary one.
pub fn penalization_limit(
    chain: &SymmetricChain,
    weight: &FkWeight,
    f: &DVector<f64>,
    s: f64,
) -> Result<DVector<f64>> {
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be nonnegative, got {s}"
        )));
    }
    let n = chain.n();
    if f.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "f has length {}, expected {n}",
            f.len()
        )));
    }
    let l = base_generator(chain, weight)?;
    let sp = ground_state(chain, weight, 1.0)?;
    let e = expm(&(shift(&l, sp.lambda0) * s));
    let v = &e * f.component_mul(&sp.phi0);
    Ok(v.component_div(&sp.phi0))
}

/// Perturbation matrix merging the continuous and jump parts of an
/// observable: `B = diag(V') + (q_ij G_ij e^{-F_ij})`.
fn perturbation(
    chain: &SymmetricChain,
    weight: &FkWeight,
    vp: &DVector<f64>,
    g: &DMatrix<f64>,
    square_jump: bool,
) -> DMatrix<f64> {
    let n = chain.n();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let gij = if square_jump {
                    g[(i, j)] * g[(i, j)]
                } else {
                    g[(i, j)]
                };
                b[(i, j)] = chain.q()[(i, j)] * gij * (-weight.f()[(i, j)]).exp();
            }
        }
        b[(i, i)] = vp[i];
    }
    b
}

fn limit_mean(
    chain: &SymmetricChain,
    weight: &FkWeight,
    obs: &Observable,
) -> Result<f64> {
    let sp = ground_state(chain, weight, 1.0)?;
    let qe = qe_quantities(chain, weight, &sp)?;
    let n = chain.n();
    let mut total = 0.0;
    for i in 0..n {
        total += obs.vp()[i] * qe.eta[i];
        for j in 0..n {
            total += obs.g()[(i, j)] * qe.jphi[(i, j)];
        }
    }
    Ok(total)
}

fn check_obs(chain: &SymmetricChain, obs: &Observable, t: f64) -> Result<()> {
    if t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    if obs.n() != chain.n() {
        return Err(Error::DimensionMismatch(format!(
            "observable size {} differs from chain size {}",
            obs.n(),
            chain.n()
        )));
    }
    Ok(())
}

/// Conditional mean of `A_t / t` for every start state, via the top-right
/// block of `exp(t [[L, B], [0, L]])`.
pub fn conditional_mean(
    chain: &SymmetricChain,
    weight: &FkWeight,
    obs: &Observable,
    t: f64,
) -> Result<MomentReport> {
    check_obs(chain, obs, t)?;
    let n = chain.n();
    let l = base_generator(chain, weight)?;
    let b = perturbation(chain, weight, obs.vp(), obs.g(), false);
    let ones = DVector::from_element(n, 1.0);

    let (mut etl, mut omega) = block_integral(&l, &b, t);
    let mut den = &etl * &ones;
    if underflows(&den) {
        let sp = ground_state(chain, weight, 1.0)?;
        (etl, omega) = block_integral(&shift(&l, sp.lambda0), &b, t);
        den = &etl * &ones;
    }
    check_denominator(&den)?;
    let mean = (&omega * &ones).component_div(&den) / t;

    let limit = limit_mean(chain, weight, obs)?;
    Ok(MomentReport {
        t,
        per_state_mean: mean,
        per_state_second: None,
        limit_mean: limit,
        limit_second: limit * limit,
    })
}

/// Conditional second moment of `A_t / t`, assembled from the ordered double
/// convolution (observable applied twice) plus the same-jump term weighted by
/// `G^2`.
pub fn conditional_second_moment(
    chain: &SymmetricChain,
    weight: &FkWeight,
    obs: &Observable,
    t: f64,
) -> Result<MomentReport> {
    check_obs(chain, obs, t)?;
    let n = chain.n();
    let l = base_generator(chain, weight)?;
    let b = perturbation(chain, weight, obs.vp(), obs.g(), false);
    let has_jumps = obs.g().iter().any(|&x| x != 0.0);
    let ones = DVector::from_element(n, 1.0);

    let eval = |l: &DMatrix<f64>| {
        let (etl, omega, omega2) = block_double_integral(l, &b, t);
        let omsq = if has_jumps {
            let bsq = perturbation(chain, weight, &DVector::zeros(n), obs.g(), true);
            block_integral(l, &bsq, t).1
        } else {
            DMatrix::zeros(n, n)
        };
        (etl, omega, omega2, omsq)
    };

    let (mut etl, mut omega, mut omega2, mut omsq) = eval(&l);
    let mut den = &etl * &ones;
    if underflows(&den) {
        let sp = ground_state(chain, weight, 1.0)?;
        (etl, omega, omega2, omsq) = eval(&shift(&l, sp.lambda0));
        den = &etl * &ones;
    }
    check_denominator(&den)?;
    let mean = (&omega * &ones).component_div(&den) / t;
    let second = ((&omega2 * &ones) * 2.0 + &omsq * &ones).component_div(&den) / (t * t);

    let limit = limit_mean(chain, weight, obs)?;
    Ok(MomentReport {
        t,
        per_state_mean: mean,
        per_state_second: Some(second),
        limit_mean: limit,
        limit_second: limit * limit,
    })
}
