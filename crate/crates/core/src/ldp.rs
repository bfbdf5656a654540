//! Large-deviation pipeline for the weighted additive functional: the scaled
//! cumulant generating function `C(theta) = -lambda0(theta)`, its exact
//! derivative through the tilted ground state, the deviation-level map
//! `Psi = -C'` with its bisection inverse, and the rate computed along two
//! algebraically independent routes (Legendre data versus the bilinear form
//! of the tilted ground state).

use nalgebra::DVector;

use crate::error::Error;
use crate::model::{dirichlet_form, FkWeight, SymmetricChain};
use crate::spectral::ground_state;
use crate::Result;

/// Tilt-domain policy for the deviation pipeline. Tilts are nonpositive by
/// default (upper deviations of the functional); positive tilts probe lower
/// deviations and must be enabled explicitly.
#[derive(Debug, Clone, Copy)]
pub struct LdpOptions {
    /// Initial left end of the bisection bracket.
    pub theta_min: f64,
    /// Hard floor for the automatic bracket extension; beyond this the
    /// exponentials `exp(-theta F)` overflow long before.
    pub theta_floor: f64,
    /// Allow tilts above zero (outside the default upper-deviation range).
    pub allow_positive_tilt: bool,
}

impl Default for LdpOptions {
    fn default() -> Self {
        Self {
            theta_min: -50.0,
            theta_floor: -1e4,
            allow_positive_tilt: false,
        }
    }
}

/// Sampled deviation curve: `C`, `C'`, `Psi` and the tilted ground states on
/// a grid of tilts.
#[derive(Debug, Clone)]
pub struct LdpCurve {
    pub thetas: Vec<f64>,
    pub c: Vec<f64>,
    pub cprime: Vec<f64>,
    pub psi: Vec<f64>,
    /// Ground state per grid tilt, in grid order.
    pub phi0_theta: Vec<DVector<f64>>,
    /// Set when the weight vanishes identically: `Psi` is constant and no
    /// deviation level is attainable.
    pub degenerate: bool,
}

/// Rate of the upper-deviation event at one level, computed both from
/// Legendre data and from the bilinear form of the tilted ground state.
#[derive(Debug, Clone, Copy)]
pub struct RatePoint {
    pub gamma: f64,
    pub theta_gamma: f64,
    pub rate_legendre: f64,
    pub rate_bilinear: f64,
    /// Absolute difference between the two routes.
    pub agreement: f64,
}

/// Scaled cumulant generating function `C(theta) = -lambda0(theta)` of the
/// additive functional attached to the weight pair.
pub fn scgf(chain: &SymmetricChain, weight: &FkWeight, theta: f64) -> Result<f64> {
    Ok(-ground_state(chain, weight, theta)?.lambda0)
}

/// Exact derivative of the cumulant function at `theta`, evaluated with the
/// tilted ground state:
/// `C'(theta) = -sum_i V_i phi_i^2 m_i
///  - sum_ij F_ij phi_i phi_j e^{-theta F_ij} q_ij m_i`.
pub fn scgf_derivative(chain: &SymmetricChain, weight: &FkWeight, theta: f64) -> Result<f64> {
    let sp = ground_state(chain, weight, theta)?;
    let phi = &sp.phi0;
    let n = chain.n();
    let mut total = 0.0;
    for i in 0..n {
        total -= weight.v()[i] * phi[i] * phi[i] * chain.m()[i];
        for j in 0..n {
            if i != j {
                total -= weight.f()[(i, j)]
                    * phi[i]
                    * phi[j]
                    * (-theta * weight.f()[(i, j)]).exp()
                    * chain.q()[(i, j)]
                    * chain.m()[i];
            }
        }
    }
    Ok(total)
}

fn psi(chain: &SymmetricChain, weight: &FkWeight, theta: f64) -> Result<f64> {
    Ok(-scgf_derivative(chain, weight, theta)?)
}

/// Inverts the deviation-level map: finds the nonpositive tilt with
/// `Psi(theta) = gamma` by bisection over `[theta_min, 0]`, extending the
/// bracket by doubling when the level lies beyond it.
pub fn psi_inverse(chain: &SymmetricChain, weight: &FkWeight, gamma: f64) -> Result<f64> {
    psi_inverse_with(chain, weight, gamma, &LdpOptions::default())
}

pub fn psi_inverse_with(
    chain: &SymmetricChain,
    weight: &FkWeight,
    gamma: f64,
    opts: &LdpOptions,
) -> Result<f64> {
    let psi_at_zero = psi(chain, weight, 0.0)?;
    if weight.is_zero() {
        return Err(Error::GammaOutOfRange {
            gamma,
            lo: psi_at_zero,
            hi: psi_at_zero,
        });
    }
    let mut lo = opts.theta_min;
    let mut psi_lo = psi(chain, weight, lo)?;
    while gamma >= psi_lo && lo > opts.theta_floor {
        lo = (lo * 2.0).max(opts.theta_floor);
        psi_lo = psi(chain, weight, lo)?;
    }
    // Psi decreases in theta, so levels are attainable in (Psi(0), Psi(lo))
    if gamma <= psi_at_zero || gamma >= psi_lo {
        return Err(Error::GammaOutOfRange {
            gamma,
            lo: psi_at_zero,
            hi: psi_lo,
        });
    }
    let tol = 1e-10 * gamma.abs().max(1.0);
    let mut hi = 0.0f64;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let val = psi(chain, weight, mid)?;
        if (val - gamma).abs() <= tol {
            return Ok(mid);
        }
        if val > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = (psi(chain, weight, mid)? - gamma).abs();
    if residual <= tol {
        Ok(mid)
    } else {
        Err(Error::InvariantViolation(format!(
            "level inversion stalled at residual {residual:e}"
        )))
    }
}

/// Rate of `P_x(A_t / t >= gamma, survival)` on the exponential scale,
/// computed as `C(theta) - theta C'(theta)` at the inverted tilt and
/// cross-checked against `-A(phi, phi)` where `A` adds to the base Dirichlet
/// form the jump bracket `1 - e^{-theta F} - theta F e^{-theta F}`.
pub fn rate(chain: &SymmetricChain, weight: &FkWeight, gamma: f64) -> Result<RatePoint> {
    rate_with(chain, weight, gamma, &LdpOptions::default())
}

pub fn rate_with(
    chain: &SymmetricChain,
    weight: &FkWeight,
    gamma: f64,
    opts: &LdpOptions,
) -> Result<RatePoint> {
    let theta_gamma = psi_inverse_with(chain, weight, gamma, opts)?;
    let c = scgf(chain, weight, theta_gamma)?;
    let cp = scgf_derivative(chain, weight, theta_gamma)?;
    let rate_legendre = c - theta_gamma * cp;

    let sp = ground_state(chain, weight, theta_gamma)?;
    let phi = &sp.phi0;
    // dirichlet_form at tilt zero reduces to the base energy of the chain
    let base = dirichlet_form(chain, weight, 0.0, phi)?;
    let n = chain.n();
    let mut bracket = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let tf = theta_gamma * weight.f()[(i, j)];
                bracket += phi[i]
                    * phi[j]
                    * (1.0 - (-tf).exp() - tf * (-tf).exp())
                    * chain.q()[(i, j)]
                    * chain.m()[i];
            }
        }
    }
    let rate_bilinear = -(base + bracket);
    let agreement = (rate_legendre - rate_bilinear).abs();
    if agreement > 1e-8 * rate_legendre.abs().max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "rate routes disagree by {agreement:e} at gamma = {gamma}"
        )));
    }
    Ok(RatePoint {
        gamma,
        theta_gamma,
        rate_legendre,
        rate_bilinear,
        agreement,
    })
}

/// Samples `C`, `C'`, and `Psi` over a tilt grid and enforces the convexity
/// and monotonicity the theory guarantees.
pub fn ldp_curve(chain: &SymmetricChain, weight: &FkWeight, thetas: &[f64]) -> Result<LdpCurve> {
    ldp_curve_with(chain, weight, thetas, &LdpOptions::default())
}

pub fn ldp_curve_with(
    chain: &SymmetricChain,
    weight: &FkWeight,
    thetas: &[f64],
    opts: &LdpOptions,
) -> Result<LdpCurve> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("empty tilt grid".into()));
    }
    if thetas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "tilt grid must be strictly increasing".into(),
        ));
    }
    if !opts.allow_positive_tilt && thetas.iter().any(|&t| t > 0.0) {
        return Err(Error::InvalidParameter(
            "positive tilts are outside the default deviation range; \
             set allow_positive_tilt to probe them"
                .into(),
        ));
    }
    let degenerate = weight.is_zero();
    let mut c = Vec::with_capacity(thetas.len());
    let mut cprime = Vec::with_capacity(thetas.len());
    let mut psi_vals = Vec::with_capacity(thetas.len());
    let mut phis = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let sp = ground_state(chain, weight, theta)?;
        c.push(-sp.lambda0);
        let cp = scgf_derivative(chain, weight, theta)?;
        cprime.push(cp);
        psi_vals.push(-cp);
        phis.push(sp.phi0);
    }
    for k in 1..thetas.len().saturating_sub(1) {
        let h1 = thetas[k] - thetas[k - 1];
        let h2 = thetas[k + 1] - thetas[k];
        // divided second difference, scaled back to a uniform-grid convention
        let dd = 2.0 * ((c[k + 1] - c[k]) / h2 - (c[k] - c[k - 1]) / h1) / (h1 + h2);
        let second_diff = dd * h1 * h2;
        if second_diff < -1e-8 {
            return Err(Error::InvariantViolation(format!(
                "cumulant function not convex at theta = {} (second difference {second_diff:e})",
                thetas[k]
            )));
        }
    }
    if !degenerate {
        for k in 1..thetas.len() {
            if psi_vals[k] >= psi_vals[k - 1] {
                return Err(Error::InvariantViolation(format!(
                    "deviation-level map not strictly decreasing between theta = {} and {}",
                    thetas[k - 1],
                    thetas[k]
                )));
            }
        }
    }
    Ok(LdpCurve {
        thetas: thetas.to_vec(),
        c,
        cprime,
        psi: psi_vals,
        phi0_theta: phis,
        degenerate,
    })
}
