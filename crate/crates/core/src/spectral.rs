//! Principal eigenpair of the tilted generator, the ground-state transform,
//! and the limit measures it produces: the quasi-stationary distribution
//! `nu = phi0 m / <phi0, m>`, the quasi-ergodic distribution `eta = phi0^2 m`,
//! and the tilted jump measure `J_ij = phi0_i phi0_j e^{-F_ij} q_ij m_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::model::{tilted_generator, FkWeight, SymmetricChain};
use crate::Result;

/// Entries of the eigenvector this far below zero indicate a broken chain
/// rather than roundoff.
const POSITIVITY_TOL: f64 = 1e-10;
const GAP_TOL: f64 = 1e-10;

/// Principal eigenpair and full spectrum of the negative tilted generator.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Bottom of the spectrum; decay rate of the weighted survival mass.
    pub lambda0: f64,
    /// Strictly positive ground state, normalized in `L^2(m)`.
    pub phi0: DVector<f64>,
    /// All eigenvalues, ascending.
    pub spectrum: DVector<f64>,
    /// `lambda1 - lambda0`; controls the exponential convergence rate of
    /// every conditional limit.
    pub gap: f64,
}

/// Conservative chain obtained from the ground-state transform. Its rates are
/// `q_ij e^{-F_ij} phi0_j / phi0_i`; it never dies and is reversible with
/// stationary law `eta = phi0^2 m`.
#[derive(Debug, Clone)]
pub struct DoobChain {
    rates: DMatrix<f64>,
    stationary: DVector<f64>,
}

impl DoobChain {
    pub fn n(&self) -> usize {
        self.stationary.len()
    }

    /// Off-diagonal jump rates (diagonal is zero).
    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Stationary and reversible law `eta`.
    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    /// Generator with zero row sums.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut g = self.rates.clone();
        for i in 0..n {
            g[(i, i)] = -self.rates.row(i).sum();
        }
        g
    }
}

/// The three limit measures of the conditioned process.
#[derive(Debug, Clone)]
pub struct QeQuantities {
    /// Quasi-stationary distribution: the limit law of the endpoint given
    /// survival (Yaglom limit), proportional to `phi0 m`.
    pub nu: DVector<f64>,
    /// Quasi-ergodic distribution: the limit of conditioned time averages,
    /// `phi0^2 m`.
    pub eta: DVector<f64>,
    /// Symmetric tilted jump measure; its entries give the limiting rate at
    /// which jump functionals accumulate.
    pub jphi: DMatrix<f64>,
}

/// Solves the symmetrized eigenproblem of the tilted generator and returns
/// the sign-fixed, `L^2(m)`-normalized ground state with the full spectrum.
pub fn ground_state(chain: &SymmetricChain, weight: &FkWeight, theta: f64) -> Result<SpectralData> {
    let gen = tilted_generator(chain, weight, theta)?;
    let n = gen.n();
    let sym = gen.symmetrized_negative();
    if sym.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tilted generator has non-finite entries at tilt {theta}"
        )));
    }
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver(format!("symmetric QL failed at n = {n}")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let spectrum = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let lambda0 = spectrum[0];
    let gap = spectrum[1] - spectrum[0];
    if gap < GAP_TOL {
        return Err(Error::DegenerateGap { gap });
    }

    let mut v: DVector<f64> = eig.eigenvectors.column(order[0]).into();
    let lead = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
    if v[lead] < 0.0 {
        v.neg_mut();
    }
    let mut phi0 = DVector::from_fn(n, |i, _| v[i] / chain.m()[i].sqrt());
    for i in 0..n {
        if phi0[i] < -POSITIVITY_TOL {
            return Err(Error::NonPositiveGroundState {
                index: i,
                value: phi0[i],
            });
        }
        if phi0[i] < 0.0 {
            phi0[i] = 0.0;
        }
    }
    let norm2: f64 = (0..n).map(|i| phi0[i] * phi0[i] * chain.m()[i]).sum();
    phi0 /= norm2.sqrt();

    Ok(SpectralData {
        lambda0,
        phi0,
        spectrum,
        gap,
    })
}

/// Residual of the eigenvalue equation, used to reject spectral data computed
/// for a different chain or weight.
fn eigenpair_residual(
    chain: &SymmetricChain,
    weight: &FkWeight,
    spectral: &SpectralData,
) -> Result<f64> {
    let gen = tilted_generator(chain, weight, 1.0)?;
    let lhs = -(gen.matrix() * &spectral.phi0);
    let mut worst = 0.0f64;
    for i in 0..gen.n() {
        worst = worst.max((lhs[i] - spectral.lambda0 * spectral.phi0[i]).abs());
    }
    let scale = 1.0 + gen.matrix().amax();
    Ok(worst / scale)
}

/// Ground-state transform of the weighted chain: the conservative process
/// whose generator is `phi0^{-1} (L + lambda0) phi0`.
pub fn doob_transform(
    chain: &SymmetricChain,
    weight: &FkWeight,
    spectral: &SpectralData,
) -> Result<DoobChain> {
    let n = chain.n();
    if spectral.phi0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "spectral data has size {}, chain has {n}",
            spectral.phi0.len()
        )));
    }
    let residual = eigenpair_residual(chain, weight, spectral)?;
    if residual > 1e-8 {
        return Err(Error::StaleSpectralData { residual });
    }
    let mut rates = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rates[(i, j)] = chain.q()[(i, j)]
                    * (-weight.f()[(i, j)]).exp()
                    * spectral.phi0[j]
                    / spectral.phi0[i];
            }
        }
    }
    let stationary = DVector::from_fn(n, |i, _| spectral.phi0[i] * spectral.phi0[i] * chain.m()[i]);
    Ok(DoobChain { rates, stationary })
}

/// Computes the quasi-stationary law, the quasi-ergodic law, and the tilted
/// jump measure from a ground state at unit tilt.
pub fn qe_quantities(
    chain: &SymmetricChain,
    weight: &FkWeight,
    spectral: &SpectralData,
) -> Result<QeQuantities> {
    let n = chain.n();
    if spectral.phi0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "spectral data has size {}, chain has {n}",
            spectral.phi0.len()
        )));
    }
    let phi0 = &spectral.phi0;
    let mass: f64 = (0..n).map(|i| phi0[i] * chain.m()[i]).sum();
    let nu = DVector::from_fn(n, |i, _| phi0[i] * chain.m()[i] / mass);
    let eta = DVector::from_fn(n, |i, _| phi0[i] * phi0[i] * chain.m()[i]);
    let mut jphi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                jphi[(i, j)] = phi0[i]
                    * phi0[j]
                    * (-weight.f()[(i, j)]).exp()
                    * chain.q()[(i, j)]
                    * chain.m()[i];
            }
        }
    }
    Ok(QeQuantities { nu, eta, jphi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_discrete_stable, validate};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    const LAMBDA0: f64 = 0.381966011250105; // (3 - sqrt 5) / 2
    const PHI0: [f64; 2] = [0.525731112119133, 0.850650808352040];

    #[test]
    fn two_state_ground_state_is_golden() {
        let chain = SymmetricChain::two_state();
        let sp = ground_state(&chain, &FkWeight::zero(2), 1.0).unwrap();
        assert_relative_eq!(sp.lambda0, LAMBDA0, epsilon = 1e-12);
        assert_relative_eq!(sp.phi0[0], PHI0[0], epsilon = 1e-12);
        assert_relative_eq!(sp.phi0[1], PHI0[1], epsilon = 1e-12);
        assert_relative_eq!(sp.gap, 5f64.sqrt(), epsilon = 1e-12);
        // normalization in L^2(m)
        let norm: f64 = sp.phi0.iter().map(|x| x * x).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_tilt_yields_flat_ground_state() {
        let chain = SymmetricChain::two_state();
        let weight = FkWeight::from_potential(DVector::from_vec(vec![1.0, 0.0]));
        let sp = ground_state(&chain, &weight, -1.0).unwrap();
        assert!(sp.lambda0.abs() < 1e-12);
        assert_relative_eq!(sp.phi0[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(sp.phi0[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(sp.gap, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rayleigh_quotient_recovers_lambda0() {
        let chain = SymmetricChain::two_state();
        let mut f = DMatrix::zeros(2, 2);
        f[(0, 1)] = 0.3;
        f[(1, 0)] = 0.3;
        let weight = FkWeight::new(DVector::from_vec(vec![0.5, -0.1]), f).unwrap();
        for theta in [0.0, 1.0, -0.7] {
            let sp = ground_state(&chain, &weight, theta).unwrap();
            let form = crate::model::dirichlet_form(&chain, &weight, theta, &sp.phi0).unwrap();
            assert_relative_eq!(form, sp.lambda0, max_relative = 1e-10);
        }
    }

    #[test]
    fn unweighted_ground_state_is_tilt_independent() {
        let chain = SymmetricChain::two_state();
        let a = ground_state(&chain, &FkWeight::zero(2), 0.0).unwrap();
        let b = ground_state(&chain, &FkWeight::zero(2), -3.0).unwrap();
        assert_relative_eq!(a.lambda0, b.lambda0, epsilon = 1e-12);
        assert_relative_eq!(a.phi0, b.phi0, epsilon = 1e-12);
    }

    #[test]
    fn rate_scaling_moves_lambda0_not_phi0() {
        let chain = SymmetricChain::two_state();
        let weight = FkWeight::from_potential(DVector::from_vec(vec![0.4, 0.0]));
        let c = 3.5;
        let scaled = SymmetricChain::new(
            chain.m().clone(),
            chain.q() * c,
            chain.kappa() * c,
        )
        .unwrap();
        let scaled_weight = FkWeight::from_potential(DVector::from_vec(vec![0.4 * c, 0.0]));
        let base = ground_state(&chain, &weight, 1.0).unwrap();
        let sc = ground_state(&scaled, &scaled_weight, 1.0).unwrap();
        assert_relative_eq!(sc.lambda0, c * base.lambda0, max_relative = 1e-10);
        assert_relative_eq!(sc.phi0, base.phi0, epsilon = 1e-10);
    }

    #[test]
    fn stable_chain_has_positive_bottom_eigenvalue() {
        let chain = build_discrete_stable(41, 1.0, 1.0, 1.0).unwrap();
        let weight = FkWeight::zero(41);
        assert!(validate(&chain, &weight).passed);
        let sp = ground_state(&chain, &weight, 1.0).unwrap();
        assert!(sp.lambda0 > 0.0);
        // frozen from an independent dense eigensolve
        assert_relative_eq!(sp.lambda0, 3.554927438810732, max_relative = 1e-9);
        assert_relative_eq!(sp.gap, 4.820186645874329, max_relative = 1e-9);
        assert!(sp.phi0.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn doob_rates_follow_ground_state_ratios() {
        let chain = SymmetricChain::two_state();
        let weight = FkWeight::zero(2);
        let sp = ground_state(&chain, &weight, 1.0).unwrap();
        let doob = doob_transform(&chain, &weight, &sp).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert_relative_eq!(doob.rates()[(0, 1)], golden, epsilon = 1e-12);
        assert_relative_eq!(doob.rates()[(1, 0)], 1.0 / golden, epsilon = 1e-12);
        assert_relative_eq!(doob.stationary()[0], 0.276393202250021, epsilon = 1e-12);
        assert_relative_eq!(doob.stationary()[1], 0.723606797749979, epsilon = 1e-12);
        // detailed balance flux
        let flux = doob.stationary()[0] * doob.rates()[(0, 1)];
        assert_relative_eq!(flux, 0.447213595499958, epsilon = 1e-12);
        assert_relative_eq!(flux, doob.stationary()[1] * doob.rates()[(1, 0)], epsilon = 1e-14);
    }

    #[test]
    fn doob_generator_is_conservative_and_matches_conjugation() {
        let chain = build_discrete_stable(15, 1.2, 1.0, 0.7).unwrap();
        let mut f = DMatrix::zeros(15, 15);
        f[(3, 4)] = 0.2;
        f[(4, 3)] = 0.2;
        let weight = FkWeight::new(DVector::from_fn(15, |i, _| 0.1 * i as f64), f).unwrap();
        let sp = ground_state(&chain, &weight, 1.0).unwrap();
        let doob = doob_transform(&chain, &weight, &sp).unwrap();
        let g = doob.generator();
        for i in 0..15 {
            assert!(g.row(i).sum().abs() < 1e-12, "row {i} sum {}", g.row(i).sum());
        }
        // operator identity phi0^{-1} (L + lambda0) phi0
        let l = tilted_generator(&chain, &weight, 1.0).unwrap();
        for i in 0..15 {
            for j in 0..15 {
                let conj = l.matrix()[(i, j)] * sp.phi0[j] / sp.phi0[i]
                    + if i == j { sp.lambda0 } else { 0.0 };
                assert_relative_eq!(g[(i, j)], conj, epsilon = 1e-10, max_relative = 1e-10);
            }
        }
        // eta is stationary: eta^T G = 0
        let etag = doob.stationary().transpose() * &g;
        for j in 0..15 {
            assert!(etag[(0, j)].abs() < 1e-12);
        }
    }

    #[test]
    fn stale_spectral_data_is_rejected() {
        let chain = SymmetricChain::two_state();
        let weight = FkWeight::zero(2);
        let other = FkWeight::from_potential(DVector::from_vec(vec![2.0, 0.0]));
        let sp = ground_state(&chain, &other, 1.0).unwrap();
        assert!(matches!(
            doob_transform(&chain, &weight, &sp),
            Err(Error::StaleSpectralData { .. })
        ));
    }

    #[test]
    fn qe_quantities_match_golden_values() {
        let chain = SymmetricChain::two_state();
        let weight = FkWeight::zero(2);
        let sp = ground_state(&chain, &weight, 1.0).unwrap();
        let qe = qe_quantities(&chain, &weight, &sp).unwrap();
        assert_relative_eq!(qe.nu[0], 0.381966011250105, epsilon = 1e-12);
        assert_relative_eq!(qe.nu[1], 0.618033988749895, epsilon = 1e-12);
        assert_relative_eq!(qe.eta[0], 0.276393202250021, epsilon = 1e-12);
        assert_relative_eq!(qe.eta[1], 0.723606797749979, epsilon = 1e-12);
        assert_relative_eq!(qe.jphi[(0, 1)], 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(qe.jphi[(0, 1)], qe.jphi[(1, 0)], epsilon = 1e-15);
        assert_relative_eq!(qe.nu.sum(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(qe.eta.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jump_measure_total_mass_is_mean_doob_intensity() {
        let chain = build_discrete_stable(11, 0.9, 1.0, 1.0).unwrap();
        let weight = FkWeight::zero(11);
        let sp = ground_state(&chain, &weight, 1.0).unwrap();
        let doob = doob_transform(&chain, &weight, &sp).unwrap();
        let qe = qe_quantities(&chain, &weight, &sp).unwrap();
        let mass: f64 = qe.jphi.iter().sum();
        let mean_intensity: f64 = (0..11)
            .map(|i| doob.stationary()[i] * doob.rates().row(i).sum())
            .sum();
        assert_relative_eq!(mass, mean_intensity, max_relative = 1e-10);
        // consistency J_ij = eta_i rates_ij
        for i in 0..11 {
            for j in 0..11 {
                assert_relative_eq!(
                    qe.jphi[(i, j)],
                    doob.stationary()[i] * doob.rates()[(i, j)],
                    max_relative = 1e-10,
                    epsilon = 1e-14
                );
            }
        }
    }
}
