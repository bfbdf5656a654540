//! Finite-state symmetric Markov chains with killing, Feynman-Kac weights,
//! path observables, and the tilted generators they induce.
//!
//! A chain lives on states `0..n` with symmetrizing measure `m`, jump rates
//! `q[i][j]` satisfying detailed balance `m_i q_ij = m_j q_ji`, and killing
//! rates `kappa` sending mass to a cemetery state. A weight pair `(V, F)`
//! penalizes paths by `exp(-int V(X_s) ds - sum F(X_{s-}, X_s))` on survival;
//! an observable pair `(V', G)` is the additive functional whose conditional
//! law is studied.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

const SYMMETRY_RTOL: f64 = 1e-12;

/// Irreducible finite-state chain, symmetric with respect to `m`, killed at
/// state-dependent rates `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricChain {
    m: DVector<f64>,
    q: DMatrix<f64>,
    kappa: DVector<f64>,
}

impl SymmetricChain {
    /// Assembles a chain from its measure, jump-rate matrix, and killing rates.
    /// Only shape consistency is enforced here; semantic rules (positivity,
    /// detailed balance, irreducibility, explosiveness) are checked by
    /// [`validate`].
    pub fn new(m: DVector<f64>, q: DMatrix<f64>, kappa: DVector<f64>) -> Result<Self> {
        let n = m.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "q is {}x{}, expected {n}x{n}",
                q.nrows(),
                q.ncols()
            )));
        }
        if kappa.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "kappa has length {}, expected {n}",
                kappa.len()
            )));
        }
        Ok(Self { m, q, kappa })
    }

    /// Two-state chain with unit jump rates, uniform measure, and killing at
    /// state 0 only. Every spectral quantity of this chain has a closed form
    /// (the ground state is a normalized golden-ratio vector), which makes it
    /// the reference instance throughout the test suite.
    pub fn two_state() -> Self {
        Self::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .expect("shapes are consistent by construction")
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self) -> &DVector<f64> {
        &self.m
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }

    /// Total exit rate (jumps plus killing) out of each state.
    pub fn exit_rates(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.q.row(i).sum() + self.kappa[i])
    }
}

/// Feynman-Kac weight pair: a potential `V` (continuous part, Revuz density
/// of the weighting measure with respect to `m`) and a symmetric jump weight
/// `F` vanishing on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct FkWeight {
    v: DVector<f64>,
    f: DMatrix<f64>,
}

impl FkWeight {
    pub fn new(v: DVector<f64>, f: DMatrix<f64>) -> Result<Self> {
        let n = v.len();
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "F is {}x{}, expected {n}x{n}",
                f.nrows(),
                f.ncols()
            )));
        }
        Ok(Self { v, f })
    }

    /// The neutral weight: no potential, no jump penalty.
    pub fn zero(n: usize) -> Self {
        Self {
            v: DVector::zeros(n),
            f: DMatrix::zeros(n, n),
        }
    }

    /// Pure potential weight, `F = 0`.
    pub fn from_potential(v: DVector<f64>) -> Self {
        let n = v.len();
        Self {
            v,
            f: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// True when both components vanish identically, in which case the tilted
    /// family degenerates and no deviation analysis is possible.
    pub fn is_zero(&self) -> bool {
        self.v.iter().all(|&x| x == 0.0) && self.f.iter().all(|&x| x == 0.0)
    }
}

/// Observable pair `(V', G)` defining the additive functional
/// `int V'(X_s) ds + sum G(X_{s-}, X_s)`. `G` need not be symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    vp: DVector<f64>,
    g: DMatrix<f64>,
}

impl Observable {
    pub fn new(vp: DVector<f64>, g: DMatrix<f64>) -> Result<Self> {
        let n = vp.len();
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "G is {}x{}, expected {n}x{n}",
                g.nrows(),
                g.ncols()
            )));
        }
        for i in 0..n {
            if g[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "G must vanish on the diagonal, got G[{i}][{i}] = {}",
                    g[(i, i)]
                )));
            }
        }
        if vp.iter().chain(g.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "observable entries must be finite".into(),
            ));
        }
        Ok(Self { vp, g })
    }

    /// Occupation observable: `V'` only, no jump term.
    pub fn from_potential(vp: DVector<f64>) -> Self {
        let n = vp.len();
        Self {
            vp,
            g: DMatrix::zeros(n, n),
        }
    }

    /// Indicator of a single state; its conditional time-average converges to
    /// the quasi-ergodic mass of that state.
    pub fn indicator(n: usize, state: usize) -> Self {
        let mut vp = DVector::zeros(n);
        vp[state] = 1.0;
        Self::from_potential(vp)
    }

    /// Counts jumps: `G = 1` off the diagonal, `V' = 0`.
    pub fn jump_counter(n: usize) -> Self {
        let mut g = DMatrix::from_element(n, n, 1.0);
        g.fill_diagonal(0.0);
        Self {
            vp: DVector::zeros(n),
            g,
        }
    }

    pub fn n(&self) -> usize {
        self.vp.len()
    }

    pub fn vp(&self) -> &DVector<f64> {
        &self.vp
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }
}

/// One failed validation rule with its worst offender.
#[derive(Debug, Clone)]
pub struct Violation {
    pub rule: String,
    pub indices: Option<(usize, usize)>,
    pub magnitude: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.indices {
            Some((i, j)) => write!(
                out,
                "{} (worst at ({i}, {j}), magnitude {:e})",
                self.rule, self.magnitude
            ),
            None => write!(out, "{} (magnitude {:e})", self.rule, self.magnitude),
        }
    }
}

/// Outcome of [`validate`]: all rule failures, each reported once with its
/// worst offending indices and magnitude.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            passed: violations.is_empty(),
            violations,
        }
    }

    /// Converts a failed report into an error; passing reports yield `Ok`.
    pub fn into_result(self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed {
            write!(out, "all rules hold")
        } else {
            for (k, v) in self.violations.iter().enumerate() {
                if k > 0 {
                    writeln!(out)?;
                }
                write!(out, "  - {v}")?;
            }
            Ok(())
        }
    }
}

struct RuleCheck {
    rule: &'static str,
    worst: f64,
    at: Option<(usize, usize)>,
}

impl RuleCheck {
    fn new(rule: &'static str) -> Self {
        Self {
            rule,
            worst: 0.0,
            at: None,
        }
    }

    fn offend(&mut self, magnitude: f64, at: (usize, usize)) {
        if magnitude > self.worst || self.at.is_none() {
            self.worst = magnitude;
            self.at = Some(at);
        }
    }

    fn push_into(self, out: &mut Vec<Violation>) {
        if self.at.is_some() {
            out.push(Violation {
                rule: self.rule.to_string(),
                indices: self.at,
                magnitude: self.worst,
            });
        }
    }
}

/// Checks every structural rule of a chain/weight pair and reports each
/// failure with its worst offender. Callers treat `passed = false` as fatal.
pub fn validate(chain: &SymmetricChain, weight: &FkWeight) -> ValidationReport {
    let n = chain.n();
    let mut violations = Vec::new();

    if weight.n() != n {
        violations.push(Violation {
            rule: "dimension-consistency (weight size differs from chain size)".into(),
            indices: None,
            magnitude: (weight.n() as f64 - n as f64).abs(),
        });
        return ValidationReport::from_violations(violations);
    }

    let mut finite = RuleCheck::new("finiteness (all entries must be finite)");
    for (i, &x) in chain.m.iter().enumerate() {
        if !x.is_finite() {
            finite.offend(f64::INFINITY, (i, i));
        }
    }
    for (i, &x) in chain.kappa.iter().enumerate() {
        if !x.is_finite() {
            finite.offend(f64::INFINITY, (i, i));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if !chain.q[(i, j)].is_finite() || !weight.f[(i, j)].is_finite() {
                finite.offend(f64::INFINITY, (i, j));
            }
        }
    }
    for (i, &x) in weight.v.iter().enumerate() {
        if !x.is_finite() {
            finite.offend(f64::INFINITY, (i, i));
        }
    }
    let any_nonfinite = finite.at.is_some();
    finite.push_into(&mut violations);
    if any_nonfinite {
        // comparisons below are meaningless with NaN/inf entries
        return ValidationReport::from_violations(violations);
    }

    let mut m_pos = RuleCheck::new("m-positivity (symmetrizing measure must be strictly positive)");
    for (i, &x) in chain.m.iter().enumerate() {
        if x <= 0.0 {
            m_pos.offend(-x, (i, i));
        }
    }
    m_pos.push_into(&mut violations);

    let mut q_nonneg = RuleCheck::new("q-nonnegativity");
    let mut q_diag = RuleCheck::new("q-zero-diagonal");
    for i in 0..n {
        for j in 0..n {
            let x = chain.q[(i, j)];
            if i == j && x != 0.0 {
                q_diag.offend(x.abs(), (i, j));
            }
            if i != j && x < 0.0 {
                q_nonneg.offend(-x, (i, j));
            }
        }
    }
    q_nonneg.push_into(&mut violations);
    q_diag.push_into(&mut violations);

    let mut sym = RuleCheck::new("m-symmetry");
    for i in 0..n {
        for j in (i + 1)..n {
            let a = chain.m[i] * chain.q[(i, j)];
            let b = chain.m[j] * chain.q[(j, i)];
            let gap = (a - b).abs();
            if gap > SYMMETRY_RTOL * a.max(1.0) {
                sym.offend(gap, (i, j));
            }
        }
    }
    sym.push_into(&mut violations);

    let mut kappa_nonneg = RuleCheck::new("kappa-nonnegativity");
    for (i, &x) in chain.kappa.iter().enumerate() {
        if x < 0.0 {
            kappa_nonneg.offend(-x, (i, i));
        }
    }
    kappa_nonneg.push_into(&mut violations);

    if chain.kappa.iter().all(|&x| x <= 0.0) {
        violations.push(Violation {
            rule: "no killing (process conservative, violates explosiveness)".into(),
            indices: None,
            magnitude: 0.0,
        });
    }

    if !strongly_connected(&chain.q) {
        violations.push(Violation {
            rule: "irreducibility (jump graph must be strongly connected)".into(),
            indices: None,
            magnitude: 0.0,
        });
    }

    let mut f_sym = RuleCheck::new("F-symmetry");
    let mut f_diag = RuleCheck::new("F-zero-diagonal");
    for i in 0..n {
        if weight.f[(i, i)] != 0.0 {
            f_diag.offend(weight.f[(i, i)].abs(), (i, i));
        }
        for j in (i + 1)..n {
            let gap = (weight.f[(i, j)] - weight.f[(j, i)]).abs();
            if gap > 0.0 {
                f_sym.offend(gap, (i, j));
            }
        }
    }
    f_sym.push_into(&mut violations);
    f_diag.push_into(&mut violations);

    ValidationReport::from_violations(violations)
}

/// Both a forward and a reverse breadth-first sweep from state 0 must cover
/// every state for the positive-rate digraph to be strongly connected.
fn strongly_connected(q: &DMatrix<f64>) -> bool {
    let n = q.nrows();
    if n == 0 {
        return false;
    }
    let reach = |reversed: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let rate = if reversed { q[(j, i)] } else { q[(i, j)] };
                if rate > 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    reach(false) == n && reach(true) == n
}

/// Generator of the tilted sub-Markovian semigroup acting on functions,
/// together with the tilt it was built at and the measure it is symmetric
/// against.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    matrix: DMatrix<f64>,
    theta: f64,
    basis_measure: DVector<f64>,
}

impl GeneratorMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn basis_measure(&self) -> &DVector<f64> {
        &self.basis_measure
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `D_sqrt(m) (-L) D_sqrt(m)^{-1}`: symmetric by detailed balance, so a
    /// symmetric eigensolver applies and the spectrum is real.
    pub fn symmetrized_negative(&self) -> DMatrix<f64> {
        let n = self.n();
        let s = DVector::from_fn(n, |i, _| self.basis_measure[i].sqrt());
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = -self.matrix[(i, j)] * s[i] / s[j];
            }
        }
        // average away the last-bit asymmetry so downstream solvers see an
        // exactly symmetric matrix
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        out
    }
}

/// Assembles the generator of the theta-tilted Feynman-Kac semigroup:
/// off-diagonal `q_ij exp(-theta F_ij)`, diagonal
/// `-(sum_j q_ij + kappa_i + theta V_i)`. Applying `exp(tL)` to `f` evaluates
/// the weighted killed expectation of `f(X_t)`.
pub fn tilted_generator(
    chain: &SymmetricChain,
    weight: &FkWeight,
    theta: f64,
) -> Result<GeneratorMatrix> {
    let n = chain.n();
    if weight.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight size {} differs from chain size {n}",
            weight.n()
        )));
    }
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                l[(i, j)] = chain.q[(i, j)] * (-theta * weight.f[(i, j)]).exp();
            }
        }
        l[(i, i)] = -(chain.q.row(i).sum() + chain.kappa[i] + theta * weight.v[i]);
    }
    Ok(GeneratorMatrix {
        matrix: l,
        theta,
        basis_measure: chain.m.clone(),
    })
}

/// Quadratic form of the tilted generator:
/// base Dirichlet energy plus killing, potential, and jump-weight terms.
/// Equals `-<u, L u>_m` for the matching [`tilted_generator`].
pub fn dirichlet_form(
    chain: &SymmetricChain,
    weight: &FkWeight,
    theta: f64,
    u: &DVector<f64>,
) -> Result<f64> {
    let n = chain.n();
    if weight.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight size {} differs from chain size {n}",
            weight.n()
        )));
    }
    if u.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "u has length {}, expected {n}",
            u.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = u[i] - u[j];
            total += chain.m[i] * chain.q[(i, j)] * d * d;
        }
    }
    for i in 0..n {
        total += chain.kappa[i] * chain.m[i] * u[i] * u[i];
        total += theta * weight.v[i] * chain.m[i] * u[i] * u[i];
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += u[i]
                    * u[j]
                    * (1.0 - (-theta * weight.f[(i, j)]).exp())
                    * chain.q[(i, j)]
                    * chain.m[i];
            }
        }
    }
    Ok(total)
}

/// Discretizes the absorbing one-dimensional stable process of index `alpha`
/// on the interval `(-radius, radius)`: cell centers carry measure `h`, jump
/// rates follow the stable kernel `scale * h / |x_i - x_j|^{1+alpha}`, and the
/// killing rate at each cell is the closed-form kernel mass of the exterior,
/// `(scale/alpha) [(radius - x)^{-alpha} + (radius + x)^{-alpha}]`.
pub fn build_discrete_stable(
    n_grid: usize,
    alpha: f64,
    radius: f64,
    scale: f64,
) -> Result<SymmetricChain> {
    if n_grid < 3 {
        return Err(Error::InvalidParameter(format!(
            "n_grid must be at least 3, got {n_grid}"
        )));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 2), got {alpha}"
        )));
    }
    if radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if scale <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let h = 2.0 * radius / n_grid as f64;
    let x = DVector::from_fn(n_grid, |i, _| -radius + (i as f64 + 0.5) * h);
    let mut q = DMatrix::zeros(n_grid, n_grid);
    for i in 0..n_grid {
        for j in 0..n_grid {
            if i != j {
                q[(i, j)] = scale * h / (x[i] - x[j]).abs().powf(1.0 + alpha);
            }
        }
    }
    let kappa = DVector::from_fn(n_grid, |i, _| {
        (scale / alpha) * ((radius - x[i]).powf(-alpha) + (radius + x[i]).powf(-alpha))
    });
    SymmetricChain::new(DVector::from_element(n_grid, h), q, kappa)
}
