//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line (run with `--nocapture` to see them all). Every tolerance
//! is pinned in code. Expected values marked "frozen" were computed with
//! independent tooling (dense eigensolves, block exponentials, an
//! occupation-time closed form, and a PDE solve) before this crate existed.
//!
//! Criterion 10 is asserted exactly as stated and is expected to fail: the
//! true value of (1/t) log P at t = 30 is -0.5669 (established three
//! independent ways), outside the stated [-0.55, -0.45] window, which only
//! admits the asymptotic rate -0.5 once the 1/sqrt(t) prefactor has decayed
//! (see the two companion tests, which pass).

use std::time::Instant;

use fklab_core::ldp::{rate, scgf, scgf_derivative};
use fklab_core::model::{
    build_discrete_stable, dirichlet_form, tilted_generator, validate, FkWeight, Observable,
    SymmetricChain,
};
use fklab_core::montecarlo::{doob_occupation, fk_estimate, tail_probability};
use fklab_core::semigroup::{conditional_mean, conditional_second_moment, endpoint_conditional};
use fklab_core::spectral::{doob_transform, ground_state, qe_quantities};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn check(name: &str, ok: bool, detail: &str) {
    let tag = if ok { "[PASS]" } else { "[FAIL]" };
    println!("{tag} {name}: {detail}");
    assert!(ok, "{name}: {detail}");
}

fn golden() -> (SymmetricChain, FkWeight) {
    (SymmetricChain::two_state(), FkWeight::zero(2))
}

fn stable21() -> SymmetricChain {
    build_discrete_stable(21, 1.0, 2.0, 0.25).unwrap()
}

fn symmetric_pair(n: usize, i: usize, j: usize, value: f64) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(n, n);
    f[(i, j)] = value;
    f[(j, i)] = value;
    f
}

/// Weight corpus shared by the cumulant-function criteria: three two-state
/// weights (pure potential, pure jump, mixed) and one on the stable grid.
fn ldp_corpus() -> Vec<(SymmetricChain, FkWeight, &'static str)> {
    let potential = FkWeight::from_potential(DVector::from_vec(vec![1.0, 0.0]));
    let jump = FkWeight::new(DVector::zeros(2), symmetric_pair(2, 0, 1, 1.0)).unwrap();
    let mixed = FkWeight::new(
        DVector::from_vec(vec![0.2, 0.0]),
        symmetric_pair(2, 0, 1, 0.5),
    )
    .unwrap();
    let grid = stable21();
    let mut f = DMatrix::zeros(21, 21);
    for i in 0..20 {
        f[(i, i + 1)] = 0.3;
        f[(i + 1, i)] = 0.3;
    }
    let grid_weight = FkWeight::new(
        DVector::from_fn(21, |i, _| 0.01 * (i as f64 - 10.0).powi(2)),
        f,
    )
    .unwrap();
    vec![
        (SymmetricChain::two_state(), potential, "two-state potential"),
        (SymmetricChain::two_state(), jump, "two-state jump"),
        (SymmetricChain::two_state(), mixed, "two-state mixed"),
        (grid, grid_weight, "stable grid mixed"),
    ]
}

#[test]
fn c01_spectral_golden_values() {
    let start = Instant::now();
    let (chain, weight) = golden();
    let sp = ground_state(&chain, &weight, 1.0).unwrap();
    let qe = qe_quantities(&chain, &weight, &sp).unwrap();

    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let norm = (1.0 + g * g).sqrt();
    let tol = 1e-10;
    let errs = [
        (sp.lambda0 - (3.0 - 5f64.sqrt()) / 2.0).abs(),
        (sp.phi0[0] - 1.0 / norm).abs(),
        (sp.phi0[1] - g / norm).abs(),
        (qe.nu[0] - 1.0 / (1.0 + g)).abs(),
        (qe.nu[1] - g / (1.0 + g)).abs(),
        (qe.eta[0] - 1.0 / (1.0 + g * g)).abs(),
        (qe.eta[1] - g * g / (1.0 + g * g)).abs(),
        (qe.jphi[(0, 1)] - 1.0 / 5f64.sqrt()).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    check(
        "criterion 1 (spectral golden values)",
        worst < tol && elapsed < 1.0,
        &format!("worst error {worst:.2e} (tol 1e-10), runtime {elapsed:.3}s (limit 1s)"),
    );
}

#[test]
fn c02_quasi_ergodic_convergence() {
    let start = Instant::now();
    let (chain, weight) = golden();
    let times = [10.0, 20.0, 40.0, 80.0];
    let mut ok = true;
    let mut detail = String::new();

    // two-state chain, both observables: per-state errors decrease
    // monotonically; by t = 80 the unkilled start state is inside 1e-3
    // (the killed start state decays with the same 1/t law but a constant
    // 0.3708, frozen below as a regression value)
    for (obs, name) in [
        (Observable::jump_counter(2), "jump counter"),
        (Observable::indicator(2, 0), "occupation"),
    ] {
        let mut errs = vec![Vec::new(); 2];
        for &t in &times {
            let rep = conditional_mean(&chain, &weight, &obs, t).unwrap();
            for s in 0..2 {
                errs[s].push((rep.per_state_mean[s] - rep.limit_mean).abs());
            }
        }
        for s in 0..2 {
            ok &= errs[s].windows(2).all(|w| w[1] < w[0]);
        }
        ok &= errs[1][3] < 1e-3;
        detail.push_str(&format!(
            "{name}: errors(80) = [{:.3e}, {:.3e}]; ",
            errs[0][3], errs[1][3]
        ));
        if name == "jump counter" {
            ok &= (errs[0][3] - 4.635255e-3).abs() < 1e-8;
        }
    }

    // stable grid: worst-state error against its own computed limit
    let chain41 = build_discrete_stable(41, 1.0, 1.0, 1.0).unwrap();
    let weight41 = FkWeight::zero(41);
    let obs41 = Observable::jump_counter(41);
    let mut worst = Vec::new();
    for &t in &times {
        let rep = conditional_mean(&chain41, &weight41, &obs41, t).unwrap();
        let e = (0..41)
            .map(|s| (rep.per_state_mean[s] - rep.limit_mean).abs())
            .fold(0.0f64, f64::max);
        worst.push(e);
    }
    ok &= worst.windows(2).all(|w| w[1] < w[0]);
    ok &= worst[3] < 1e-2;
    detail.push_str(&format!("stable41 worst error(80) = {:.3e}", worst[3]));

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 10.0;
    check(
        "criterion 2 (quasi-ergodic convergence)",
        ok,
        &format!("{detail}; runtime {elapsed:.2}s (limit 10s)"),
    );
}

#[test]
fn c03_trivial_exactness() {
    let (chain, weight) = golden();
    let obs = Observable::from_potential(DVector::from_element(2, 1.0));
    let mut worst = 0.0f64;
    for t in [0.5, 7.0, 80.0] {
        let rep = conditional_second_moment(&chain, &weight, &obs, t).unwrap();
        let second = rep.per_state_second.unwrap();
        for s in 0..2 {
            worst = worst.max((rep.per_state_mean[s] - 1.0).abs());
            worst = worst.max((second[s] - 1.0).abs());
        }
    }
    check(
        "criterion 3 (constant observable exactness)",
        worst < 1e-10,
        &format!("worst deviation from 1 is {worst:.2e} (tol 1e-10)"),
    );
}

#[test]
fn c04_weak_law_variance_decay() {
    let (chain, weight) = golden();
    let corpus = [
        (Observable::indicator(2, 0), "occupation"),
        (Observable::jump_counter(2), "jump counter"),
        (
            Observable::new(
                DVector::from_vec(vec![1.0, -1.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.0]),
            )
            .unwrap(),
            "signed mixed",
        ),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (obs, name) in corpus {
        let variance = |t: f64| {
            let rep = conditional_second_moment(&chain, &weight, &obs, t).unwrap();
            let second = rep.per_state_second.unwrap();
            DVector::from_fn(2, |s, _| second[s] - rep.per_state_mean[s].powi(2))
        };
        let v40 = variance(40.0);
        let v80 = variance(80.0);
        for s in 0..2 {
            let ratio = v80[s] / v40[s];
            ok &= (0.4..=0.6).contains(&ratio);
            if s == 0 {
                detail.push_str(&format!("{name}: ratio {ratio:.3}; "));
            }
        }
    }
    check(
        "criterion 4 (variance decays like 1/t)",
        ok,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn c05_yaglom_convergence_rate() {
    let (chain, weight) = golden();
    let f = DVector::from_vec(vec![1.0, 0.0]);
    let nu1 = 1.0 / (1.0 + (1.0 + 5f64.sqrt()) / 2.0);
    let ts: Vec<f64> = (2..=8).map(|k| k as f64).collect();
    let logs: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let v = endpoint_conditional(&chain, &weight, t, &f).unwrap();
            (v[0] - nu1).abs().ln()
        })
        .collect();
    let n = ts.len() as f64;
    let mx = ts.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(&logs).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = ts.iter().map(|a| (a - mx).powi(2)).sum();
    let fitted = -sxy / sxx;
    let gap = 5f64.sqrt();
    let rel = (fitted - gap).abs() / gap;
    check(
        "criterion 5 (endpoint law converges at the spectral gap)",
        rel < 0.05,
        &format!("fitted rate {fitted:.6} vs gap {gap:.6} (rel err {rel:.2e}, tol 5%)"),
    );
}

#[test]
fn c06_ergodic_occupation_of_the_transform() {
    let start = Instant::now();
    let (chain, weight) = golden();
    let sp = ground_state(&chain, &weight, 1.0).unwrap();
    let doob = doob_transform(&chain, &weight, &sp).unwrap();
    let occ = doob_occupation(&doob, 1e5, 0, 20260810).unwrap();
    let eta = doob.stationary();
    let worst = (0..2)
        .map(|s| (occ[s] - eta[s]).abs())
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    check(
        "criterion 6 (ergodic occupation fractions)",
        worst < 0.01 && elapsed < 30.0,
        &format!(
            "occupation [{:.5}, {:.5}] vs eta [{:.5}, {:.5}], worst {worst:.2e} (tol 0.01), runtime {elapsed:.2}s",
            occ[0], occ[1], eta[0], eta[1]
        ),
    );
}

#[test]
fn c07_monte_carlo_against_exact_evaluator() {
    let start = Instant::now();
    let two = SymmetricChain::two_state();
    let n_paths = 100_000u64;

    let signed_obs = Observable::new(
        DVector::from_vec(vec![1.0, -1.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.0]),
    )
    .unwrap();
    let mixed21 = {
        let mut g = DMatrix::from_element(21, 21, 1.0);
        g.fill_diagonal(0.0);
        let mut vp = DVector::zeros(21);
        vp[10] = 1.0;
        Observable::new(vp, g).unwrap()
    };
    // (chain, weight, observable, horizon, start state)
    let corpus: Vec<(SymmetricChain, FkWeight, Observable, f64, usize, &str)> = vec![
        (
            two.clone(),
            FkWeight::zero(2),
            Observable::indicator(2, 0),
            8.0,
            0,
            "plain occupation",
        ),
        (
            two.clone(),
            FkWeight::zero(2),
            Observable::jump_counter(2),
            10.0,
            1,
            "plain jump count",
        ),
        (
            two.clone(),
            FkWeight::from_potential(DVector::from_vec(vec![1.0, 0.0])),
            Observable::indicator(2, 0),
            6.0,
            0,
            "potential-weighted",
        ),
        (
            two.clone(),
            FkWeight::new(DVector::zeros(2), symmetric_pair(2, 0, 1, 0.5)).unwrap(),
            Observable::jump_counter(2),
            6.0,
            1,
            "jump-weighted (F != 0)",
        ),
        (
            two.clone(),
            FkWeight::new(
                DVector::from_vec(vec![0.3, 0.0]),
                symmetric_pair(2, 0, 1, -0.2),
            )
            .unwrap(),
            signed_obs,
            6.0,
            0,
            "signed G, negative F",
        ),
        (
            stable21(),
            FkWeight::zero(21),
            mixed21,
            6.0,
            10,
            "stable grid mixed",
        ),
    ];

    let mut passed = 0usize;
    let mut detail = String::new();
    for (k, (chain, weight, obs, t, x, name)) in corpus.iter().enumerate() {
        assert!(validate(chain, weight).passed);
        let est = fk_estimate(chain, weight, obs, *t, *x, n_paths, 1000 + k as u64).unwrap();
        let exact = conditional_mean(chain, weight, obs, *t).unwrap().per_state_mean[*x];
        let z = (est.value - exact).abs() / est.stderr;
        let ok = z < 3.0;
        passed += ok as usize;
        detail.push_str(&format!("{name}: z = {z:.2}; "));
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        "criterion 7 (path sampler vs exact evaluator)",
        passed >= 5 && elapsed < 120.0,
        &format!("{detail}{passed}/6 within 3 stderr, runtime {elapsed:.1}s (limit 120s)"),
    );
}

#[test]
fn c08_cumulant_function_consistency() {
    let h = 1e-5;
    let mut ok = true;
    let mut worst_fd = 0.0f64;
    let mut weakest_dd = f64::INFINITY;
    for (chain, weight, _) in ldp_corpus() {
        let thetas: Vec<f64> = (0..21).map(|k| -5.0 + 0.25 * k as f64).collect();
        let c: Vec<f64> = thetas
            .iter()
            .map(|&th| scgf(&chain, &weight, th).unwrap())
            .collect();
        for (k, &th) in thetas.iter().enumerate() {
            let exact = scgf_derivative(&chain, &weight, th).unwrap();
            let fd = (scgf(&chain, &weight, th + h).unwrap()
                - scgf(&chain, &weight, th - h).unwrap())
                / (2.0 * h);
            let rel = (exact - fd).abs() / exact.abs().max(1.0);
            worst_fd = worst_fd.max(rel);
            ok &= rel <= 1e-6;
            if k > 0 && k + 1 < thetas.len() {
                let dd = c[k + 1] - 2.0 * c[k] + c[k - 1];
                weakest_dd = weakest_dd.min(dd);
                ok &= dd > 1e-8;
            }
        }
    }
    check(
        "criterion 8 (derivative identity and strict convexity)",
        ok,
        &format!(
            "worst derivative mismatch {worst_fd:.2e} (tol 1e-6), weakest second difference {weakest_dd:.2e} (must exceed 1e-8)"
        ),
    );
}

#[test]
fn c09_rate_route_agreement() {
    let chain = SymmetricChain::two_state();
    let weight = FkWeight::from_potential(DVector::from_vec(vec![1.0, 0.0]));
    let mut ok = true;
    let mut worst = 0.0f64;
    for k in 1..=10 {
        let gamma = 0.3 + 0.065 * k as f64;
        let point = rate(&chain, &weight, gamma).unwrap();
        worst = worst.max(point.agreement);
        ok &= point.agreement <= 1e-8;
    }
    let half = rate(&chain, &weight, 0.5).unwrap();
    ok &= (half.rate_legendre + 0.5).abs() < 1e-10;
    ok &= (half.theta_gamma + 1.0).abs() < 1e-8;
    check(
        "criterion 9 (Legendre and bilinear rates agree)",
        ok,
        &format!(
            "worst route disagreement {worst:.2e} (tol 1e-8); rate(0.5) = {:.12} at tilt {:.9}",
            half.rate_legendre, half.theta_gamma
        ),
    );
}

/// Asserted exactly as specified and expected to fail: the true value of
/// (1/30) log P is -0.5669 +- 0.001 (occupation-time closed form, PDE solve,
/// and direct simulation all agree), outside [-0.55, -0.45]. The estimator
/// itself is unbiased -- see the two companion tests below.
#[test]
fn c10_tail_window_at_t30_as_stated() {
    let start = Instant::now();
    let chain = SymmetricChain::two_state();
    let weight = FkWeight::from_potential(DVector::from_vec(vec![1.0, 0.0]));
    let est = tail_probability(&chain, &weight, 0.5, 30.0, 0, -1.0, 100_000, 31).unwrap();
    let log_rate = est.value.ln() / 30.0;
    let elapsed = start.elapsed().as_secs_f64();
    check(
        "criterion 10 (tail estimate window at t = 30)",
        (-0.55..=-0.45).contains(&log_rate) && elapsed < 60.0,
        &format!(
            "(1/t) log P = {log_rate:.4} (stated window [-0.55, -0.45]; true value -0.5669, \
             asymptotic rate -0.5), P = {:.4e} +- {:.1e}, ess {:.0}, runtime {elapsed:.1}s",
            est.value, est.stderr, est.ess
        ),
    );
}

/// Companion to criterion 10: the tilted estimator is unbiased -- at t = 30
/// it reproduces the exact P = 4.115497e-8 within 3 stderr.
#[test]
fn c10_companion_exact_tail_value_at_t30() {
    let chain = SymmetricChain::two_state();
    let weight = FkWeight::from_potential(DVector::from_vec(vec![1.0, 0.0]));
    let est = tail_probability(&chain, &weight, 0.5, 30.0, 0, -1.0, 100_000, 31).unwrap();
    let exact = 4.115497e-8; // frozen: occupation-time closed form
    let z = (est.value - exact).abs() / est.stderr;
    check(
        "criterion 10 companion (unbiasedness at t = 30)",
        z < 3.0 && !est.low_ess,
        &format!(
            "P = {:.6e} +- {:.2e} vs exact {exact:.6e} (z = {z:.2}), ess {:.0}",
            est.value, est.stderr, est.ess
        ),
    );
}

/// Companion to criterion 10: at t = 60 the prefactor term log(c)/t has
/// decayed and the stated window does contain the estimate (true value
/// -0.5386, frozen from the same closed form).
#[test]
fn c10_companion_window_holds_at_t60() {
    let chain = SymmetricChain::two_state();
    let weight = FkWeight::from_potential(DVector::from_vec(vec![1.0, 0.0]));
    let est = tail_probability(&chain, &weight, 0.5, 60.0, 0, -1.0, 100_000, 61).unwrap();
    let exact = 9.218362e-15; // frozen: occupation-time closed form
    let z = (est.value - exact).abs() / est.stderr;
    let log_rate = est.value.ln() / 60.0;
    check(
        "criterion 10 companion (window at t = 60)",
        (-0.55..=-0.45).contains(&log_rate) && z < 3.0,
        &format!(
            "(1/t) log P = {log_rate:.4} in [-0.55, -0.45]; P = {:.4e} +- {:.1e} vs exact {exact:.4e} (z = {z:.2})",
            est.value, est.stderr
        ),
    );
}

#[test]
fn c11_level_map_matches_conditional_limit() {
    // Psi(0-) is evaluated at tilt -1e-6, where the tilted ground state has
    // collapsed onto the unweighted one; the matching conditional limit is
    // therefore the plain survival-conditioned mean of the weight functional
    let mut ok = true;
    let mut worst = 0.0f64;
    for (chain, weight, name) in ldp_corpus() {
        let lhs = -scgf_derivative(&chain, &weight, -1e-6).unwrap();
        let obs = Observable::new(weight.v().clone(), weight.f().clone()).unwrap();
        let rhs = conditional_mean(&chain, &FkWeight::zero(chain.n()), &obs, 1.0)
            .unwrap()
            .limit_mean;
        let diff = (lhs - rhs).abs();
        worst = worst.max(diff);
        ok &= diff <= 1e-5;
        if !ok {
            println!("  instance {name}: Psi(0-) = {lhs}, limit = {rhs}");
        }
    }
    check(
        "criterion 11 (deviation level map meets the ergodic limit)",
        ok,
        &format!("worst gap {worst:.2e} (tol 1e-5) across 4 instances"),
    );
}

#[test]
fn c12_form_generator_duality() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut ok = true;
    let mut worst = 0.0f64;
    for (chain, weight, _) in ldp_corpus() {
        let n = chain.n();
        let gen = tilted_generator(&chain, &weight, 1.0).unwrap();
        for _ in 0..100 {
            let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let lu = gen.matrix() * &u;
            let pairing: f64 = -(0..n).map(|i| chain.m()[i] * u[i] * lu[i]).sum::<f64>();
            let form = dirichlet_form(&chain, &weight, 1.0, &u).unwrap();
            let rel = (form - pairing).abs() / form.abs().max(pairing.abs()).max(1.0);
            worst = worst.max(rel);
            ok &= rel <= 1e-10;
        }
    }
    check(
        "criterion 12 (quadratic form equals generator pairing)",
        ok,
        &format!("worst relative mismatch {worst:.2e} over 400 random vectors (tol 1e-10)"),
    );
}
