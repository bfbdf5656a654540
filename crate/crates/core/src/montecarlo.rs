//! Path-level machinery: event-driven simulation of the killed chain with its
//! competing exponential clocks, self-normalized conditional estimators,
//! ergodic occupation sampling of the conservative transformed chain, and
//! tilted importance sampling for upper-tail probabilities.
//!
//! Randomness contract: every path draws from its own counter-based stream
//! keyed by `(master seed, path index)`, so estimates do not depend on
//! execution order, and estimator reductions run in fixed path order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp1;

use crate::error::Error;
use crate::model::{FkWeight, Observable, SymmetricChain};
use crate::spectral::{ground_state, DoobChain};
use crate::Result;

/// Everything recorded along one simulated path up to the horizon `t`.
#[derive(Debug, Clone)]
pub struct PathRecord {
    /// Whether the path reached the horizon before the killing clock rang.
    pub alive_at_t: bool,
    /// Accumulated weight functional: `int V(X_s) ds + sum F` over jumps.
    pub a_weight: f64,
    /// Accumulated observable functional: `int V'(X_s) ds + sum G` over jumps.
    pub a_obs: f64,
    /// Final state, or `None` once killed.
    pub endpoint: Option<usize>,
    pub n_jumps: u64,
    /// Per-state sojourn times; sums to the horizon on surviving paths and to
    /// the killing time otherwise.
    pub occupation: Vec<f64>,
}

/// A weighted Monte Carlo estimate with its delta-method standard error and
/// the effective sample size of the weights.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: u64,
    /// `(sum w)^2 / sum w^2`: variance-equivalent number of unweighted paths.
    pub ess: f64,
    /// Raised when the effective sample size drops below 10, signalling
    /// variance blow-up of the weights.
    pub low_ess: bool,
}

/// Independent stream for one path: same master seed, stream index = path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Precomputed competing-clock tables for one rate matrix with killing.
struct ClockTable {
    /// Total event rate per state (jumps plus killing).
    total: Vec<f64>,
    kill: Vec<f64>,
    /// Cumulative jump rates per row; binary-searched at each event.
    cum: Vec<Vec<f64>>,
}

impl ClockTable {
    fn new(rates: &DMatrix<f64>, kill: &DVector<f64>) -> Self {
        let n = rates.nrows();
        let mut cum = Vec::with_capacity(n);
        let mut total = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            let mut acc = 0.0;
            for j in 0..n {
                if i != j {
                    acc += rates[(i, j)];
                }
                row.push(acc);
            }
            total.push(acc + kill[i]);
            cum.push(row);
        }
        Self {
            total,
            kill: kill.iter().copied().collect(),
            cum,
        }
    }

    fn next_jump(&self, state: usize, draw: f64) -> usize {
        self.cum[state].partition_point(|&c| c <= draw)
    }
}

/// One exact-in-law trajectory: exponential holding times at the total event
/// rate, then a jump or a kill chosen proportionally to the competing rates.
fn simulate(
    table: &ClockTable,
    v_weight: &DVector<f64>,
    f_weight: &DMatrix<f64>,
    v_obs: &DVector<f64>,
    g_obs: &DMatrix<f64>,
    t_end: f64,
    start: usize,
    rng: &mut ChaCha12Rng,
) -> PathRecord {
    let n = table.total.len();
    let mut occupation = vec![0.0; n];
    let mut state = start;
    let mut t_cur = 0.0;
    let mut a_weight = 0.0;
    let mut a_obs = 0.0;
    let mut n_jumps = 0u64;
    loop {
        let total = table.total[state];
        let tau = if total > 0.0 {
            rng.sample::<f64, _>(Exp1) / total
        } else {
            f64::INFINITY
        };
        if t_cur + tau >= t_end {
            let dt = t_end - t_cur;
            occupation[state] += dt;
            a_weight += v_weight[state] * dt;
            a_obs += v_obs[state] * dt;
            return PathRecord {
                alive_at_t: true,
                a_weight,
                a_obs,
                endpoint: Some(state),
                n_jumps,
                occupation,
            };
        }
        occupation[state] += tau;
        a_weight += v_weight[state] * tau;
        a_obs += v_obs[state] * tau;
        t_cur += tau;
        let draw = rng.random::<f64>() * total;
        if draw < table.kill[state] {
            return PathRecord {
                alive_at_t: false,
                a_weight,
                a_obs,
                endpoint: None,
                n_jumps,
                occupation,
            };
        }
        let next = table.next_jump(state, draw - table.kill[state]);
        a_weight += f_weight[(state, next)];
        a_obs += g_obs[(state, next)];
        n_jumps += 1;
        state = next;
    }
}

fn check_sizes(chain: &SymmetricChain, weight: &FkWeight, obs: &Observable) -> Result<()> {
    if weight.n() != chain.n() || obs.n() != chain.n() {
        return Err(Error::DimensionMismatch(format!(
            "weight ({}) and observable ({}) must match chain size {}",
            weight.n(),
            obs.n(),
            chain.n()
        )));
    }
    Ok(())
}

/// Samples one killed-chain path, accumulating both additive functionals.
/// Deterministic given the stream.
pub fn sample_path(
    chain: &SymmetricChain,
    weight: &FkWeight,
    obs: &Observable,
    t: f64,
    rng: &mut ChaCha12Rng,
) -> Result<PathRecord> {
    if t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    check_sizes(chain, weight, obs)?;
    let table = ClockTable::new(chain.q(), chain.kappa());
    Ok(simulate(
        &table,
        weight.v(),
        weight.f(),
        obs.vp(),
        obs.g(),
        t,
        0.min(chain.n() - 1),
        rng,
    ))
}

/// Self-normalized estimate of the conditional mean of `A_t / t` from state
/// `x`: paths are weighted by `exp(-A_weight)` on survival, the ratio
/// estimator shares paths between numerator and denominator, and the
/// standard error comes from the first-order delta method.
pub fn fk_estimate(
    chain: &SymmetricChain,
    weight: &FkWeight,
    obs: &Observable,
    t: f64,
    x: usize,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    if t <= 0.0 || n_paths == 0 {
        return Err(Error::InvalidParameter(
            "need a positive horizon and at least one path".into(),
        ));
    }
    check_sizes(chain, weight, obs)?;
    if x >= chain.n() {
        return Err(Error::InvalidParameter(format!(
            "start state {x} out of range"
        )));
    }
    let table = ClockTable::new(chain.q(), chain.kappa());
    let mut samples = Vec::with_capacity(n_paths as usize);
    let mut alive = 0u64;
    for k in 0..n_paths {
        let mut rng = path_rng(seed, k);
        let path = simulate(&table, weight.v(), weight.f(), obs.vp(), obs.g(), t, x, &mut rng);
        if path.alive_at_t {
            alive += 1;
            samples.push(((-path.a_weight).exp(), path.a_obs / t));
        }
    }
    let sum_w: f64 = samples.iter().map(|(w, _)| w).sum();
    if !(sum_w > 0.0) {
        return Err(Error::DegenerateConditioning {
            survival_estimate: alive as f64 / n_paths as f64,
        });
    }
    let sum_wv: f64 = samples.iter().map(|(w, v)| w * v).sum();
    let value = sum_wv / sum_w;
    let mut sq = 0.0;
    let mut sum_w2 = 0.0;
    for (w, v) in &samples {
        sq += (w * (v - value)).powi(2);
        sum_w2 += w * w;
    }
    let ess = sum_w * sum_w / sum_w2;
    Ok(McEstimate {
        value,
        stderr: sq.sqrt() / sum_w,
        n_paths,
        ess,
        low_ess: ess < 10.0,
    })
}

/// One long trajectory of the conservative transformed chain; returns the
/// per-state occupation fractions, which converge to the stationary law.
pub fn doob_occupation(doob: &DoobChain, t_total: f64, x: usize, seed: u64) -> Result<Vec<f64>> {
    if t_total <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {t_total}"
        )));
    }
    let n = doob.n();
    if x >= n {
        return Err(Error::InvalidParameter(format!(
            "start state {x} out of range"
        )));
    }
    let zero_v = DVector::zeros(n);
    let zero_m = DMatrix::zeros(n, n);
    let table = ClockTable::new(doob.rates(), &zero_v);
    let mut rng = path_rng(seed, 0);
    let path = simulate(&table, &zero_v, &zero_m, &zero_v, &zero_m, t_total, x, &mut rng);
    Ok(path.occupation.iter().map(|o| o / t_total).collect())
}

/// Unbiased importance-sampling estimate of the upper-tail probability
/// `P_x(A_t / t >= gamma, survival)` for the weight functional itself.
///
/// Paths are drawn from the conservative ground-state transform of the
/// `theta`-tilted chain (no path is wasted on killing) and reweighted by the
/// inverse transform density
/// `exp(theta A - lambda0(theta) t) phi(x) / phi(X_t)`. Nonpositive tilts
/// keep the weight bounded on the event; `theta = 0` degenerates to plain
/// sampling under the transform of the unweighted chain.
#[allow(clippy::too_many_arguments)]
pub fn tail_probability(
    chain: &SymmetricChain,
    weight: &FkWeight,
    gamma: f64,
    t: f64,
    x: usize,
    theta_tilt: f64,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    if theta_tilt > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tilt must be nonpositive, got {theta_tilt}"
        )));
    }
    if t <= 0.0 || n_paths == 0 {
        return Err(Error::InvalidParameter(
            "need a positive horizon and at least one path".into(),
        ));
    }
    if weight.n() != chain.n() || x >= chain.n() {
        return Err(Error::DimensionMismatch(format!(
            "weight size {} or start state {x} inconsistent with chain size {}",
            weight.n(),
            chain.n()
        )));
    }
    let n = chain.n();
    let sp = ground_state(chain, weight, theta_tilt)?;
    let mut rates = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rates[(i, j)] = chain.q()[(i, j)]
                    * (-theta_tilt * weight.f()[(i, j)]).exp()
                    * sp.phi0[j]
                    / sp.phi0[i];
            }
        }
    }
    let zero_v = DVector::zeros(n);
    let table = ClockTable::new(&rates, &zero_v);
    let zero_m = DMatrix::zeros(n, n);

    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for k in 0..n_paths {
        let mut rng = path_rng(seed, k);
        // the weight functional is accumulated as the "observable" of the
        // transformed path; the tilted dynamics only changes the jump law
        let path = simulate(&table, &zero_v, &zero_m, weight.v(), weight.f(), t, x, &mut rng);
        if path.a_obs >= gamma * t {
            let endpoint = path.endpoint.expect("transformed chain is conservative");
            let y = (theta_tilt * path.a_obs - sp.lambda0 * t).exp() * sp.phi0[x]
                / sp.phi0[endpoint];
            sum += y;
            sum2 += y * y;
        }
    }
    let nf = n_paths as f64;
    let value = sum / nf;
    let var = ((sum2 / nf) - value * value).max(0.0);
    let stderr = (var / nf).sqrt();
    let ess = if sum2 > 0.0 { sum * sum / sum2 } else { 0.0 };
    Ok(McEstimate {
        value,
        stderr,
        n_paths,
        ess,
        low_ess: ess < 10.0,
    })
}
