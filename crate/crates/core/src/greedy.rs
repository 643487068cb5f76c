//! The greedy drivers: orthogonal greedy selection with L2 projection, its
//! uniform-norm-improved variant, and the weak Chebyshev greedy loop, plus
//! the particle-swarm search used for pole selection.

use std::cell::RefCell;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    self, golden_max, inner_product, l2_norm, pole_pair_integral, sup_abs, GridSpec,
    QuadratureRule, RESIDUAL_FLOOR,
};
use crate::domain::{
    pole_normalization, Approximant, BasisElement, DictionarySpec, ElementKind, GreedyTrace,
    Interval, IterationRecord, TargetFunction,
};
use crate::error::{Error, Result};
use crate::minimax::{best_uniform_coeffs, residual_value, MinimaxProblem};

/// Particle swarm hyperparameters. A fixed seed makes a run fully
/// deterministic.
#[derive(Debug, Clone, Copy)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 40,
            iterations: 200,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            seed: 0,
        }
    }
}

/// Maximizes a one-dimensional objective over a closed window by particle
/// swarm. Always returns the best particle seen; no per-run global-optimality
/// guarantee.
pub fn pso_maximize(
    objective: impl Fn(f64) -> f64,
    window: (f64, f64),
    cfg: &PsoConfig,
) -> (f64, f64) {
    let (lo, hi) = window;
    if !(hi > lo) {
        return (lo, objective(lo));
    }
    let swarm = cfg.swarm_size.max(2);
    let width = hi - lo;
    let v_max = 0.5 * width;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut xs: Vec<f64> = (0..swarm)
        .map(|_| lo + width * rng.random::<f64>())
        .collect();
    let mut vs: Vec<f64> = (0..swarm)
        .map(|_| v_max * (2.0 * rng.random::<f64>() - 1.0) * 0.2)
        .collect();
    let mut best_x = xs.clone();
    let mut best_v: Vec<f64> = xs.iter().map(|&x| objective(x)).collect();
    let (mut g_x, mut g_v) = best_x
        .iter()
        .zip(&best_v)
        .fold((lo, f64::NEG_INFINITY), |acc, (x, v)| {
            if *v > acc.1 {
                (*x, *v)
            } else {
                acc
            }
        });

    for _ in 0..cfg.iterations {
        for i in 0..swarm {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            vs[i] = cfg.inertia * vs[i]
                + cfg.cognitive * r1 * (best_x[i] - xs[i])
                + cfg.social * r2 * (g_x - xs[i]);
            vs[i] = vs[i].clamp(-v_max, v_max);
            xs[i] = (xs[i] + vs[i]).clamp(lo, hi);
            let val = objective(xs[i]);
            if val > best_v[i] {
                best_v[i] = val;
                best_x[i] = xs[i];
            }
            if val > g_v {
                g_v = val;
                g_x = xs[i];
            }
        }
    }
    (g_x, g_v)
}

/// Weakness sequence `t_k` of the Chebyshev greedy loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TSequence {
    /// `t_k = 1 / sqrt(k)`.
    InvSqrtK,
    /// Constant `t` in (0, 1].
    Constant(f64),
}

impl TSequence {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            Self::InvSqrtK => 1.0 / (k as f64).sqrt(),
            Self::Constant(t) => *t,
        }
    }
}

/// Configuration of the weak Chebyshev greedy driver.
#[derive(Debug, Clone, Copy)]
pub struct WcgaConfig {
    pub t_sequence: TSequence,
    /// Candidate-window discretization count (the window is split into
    /// `m + 1` points).
    pub m: usize,
    pub max_terms: usize,
    /// Stop once the working uniform error drops to this level.
    pub target_error: Option<f64>,
}

impl WcgaConfig {
    pub fn new(max_terms: usize) -> Self {
        Self {
            t_sequence: TSequence::InvSqrtK,
            m: 100,
            max_terms,
            target_error: None,
        }
    }

    pub fn with_target_error(mut self, e: f64) -> Self {
        self.target_error = Some(e);
        self
    }
}

/// Shared numeric settings of a greedy run. `eval` is the interval uniform
/// errors are reported on; the fit interval is used when absent.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunSettings {
    pub eval: Option<Interval>,
    pub grid: GridSpec,
    pub quad: QuadratureRule,
    /// Stop a run early once the recorded uniform error reaches this level.
    pub target_uniform_error: Option<f64>,
}

impl RunSettings {
    fn eval_interval(&self, fit: Interval) -> Interval {
        self.eval.unwrap_or(fit)
    }
}

/// When the uniform-norm coefficient fit runs in an improved-OGA run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimaxMode {
    /// One fit after the last greedy step.
    FinalOnly,
    /// A fit after every greedy step; the recorded error sequence is then
    /// non-increasing.
    EveryStep,
}

/// Inner product of a dictionary element pair, closed form for pole kinds.
fn cross_inner(
    a: &BasisElement,
    b: &BasisElement,
    on: Interval,
    quad: &QuadratureRule,
) -> Result<f64> {
    let factor = |el: &BasisElement| -> Option<f64> {
        match el.kind() {
            ElementKind::NormalizedPole { fit } => Some(pole_normalization(*fit, el.param())),
            ElementKind::PlainPole => Some(1.0),
            _ => None,
        }
    };
    match (factor(a), factor(b)) {
        (Some(na), Some(nb)) => {
            Ok(na * nb * pole_pair_integral(on.lo(), on.hi(), a.param(), b.param()))
        }
        _ => inner_product(|z| a.eval(z), |z| b.eval(z), on, quad),
    }
}

// Selection maximizes |(r, g)|, the symmetrized-dictionary form. The plain
// signed form degenerates on this one-signed dictionary: once (r, g) < 0 for
// every element, its argmax sits on an already-selected pole.
const SIGNED_SELECTION: bool = false;

/// Greedy selection objective `|(r, g_param)|` decomposed as
/// `(f, g) - sum_i c_i (g_i, g)` so each quadrature sees a sign-stable
/// integrand.
struct SelectionObjective<'a> {
    f: &'a TargetFunction,
    dict: &'a DictionarySpec,
    basis: &'a [BasisElement],
    coeffs: &'a [f64],
    fit: Interval,
    quad: &'a QuadratureRule,
    first_error: RefCell<Option<Error>>,
}

impl SelectionObjective<'_> {
    fn eval(&self, param: f64) -> f64 {
        match self.signed(param) {
            Ok(v) => {
                if SIGNED_SELECTION {
                    v
                } else {
                    v.abs()
                }
            }
            Err(e) => {
                self.first_error.borrow_mut().get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    }

    fn signed(&self, param: f64) -> Result<f64> {
        let g = self.dict.element(param)?;
        let mut v = inner_product(|z| self.f.eval(z), |z| g.eval(z), self.fit, self.quad)?;
        for (c, gi) in self.coeffs.iter().zip(self.basis) {
            v -= c * cross_inner(gi, &g, self.fit, self.quad)?;
        }
        Ok(v)
    }
}

/// Derivative of a dictionary element with respect to its parameter.
fn element_param_deriv(dict: &DictionarySpec, param: f64) -> Box<dyn Fn(f64) -> f64> {
    match dict {
        DictionarySpec::PlainPole { .. } => {
            Box::new(move |z| 1.0 / ((z - param) * (z - param)))
        }
        DictionarySpec::NormalizedPole { fit, .. } => {
            let (a, b) = (fit.lo(), fit.hi());
            let s = 1.0 / (a - param) - 1.0 / (b - param);
            let s_prime = 1.0 / ((a - param) * (a - param)) - 1.0 / ((b - param) * (b - param));
            let norm = s.powf(-0.5);
            let norm_prime = -0.5 * s.powf(-1.5) * s_prime;
            Box::new(move |z| {
                norm / ((z - param) * (z - param)) + norm_prime / (z - param)
            })
        }
        DictionarySpec::NegativePower { .. } => Box::new(move |z: f64| -z.ln() * z.powf(-param)),
    }
}

/// Smooth evaluator of the selection objective's parameter derivative
/// `d/dp (r, g_p) = (f, dg) - sum_i c_i (g_i, dg)`: each integral runs on a
/// partition frozen at the seed parameter, so values vary smoothly with `p`
/// and the stationarity root can be located far below the noise floor of
/// value-based search.
struct FrozenDerivative<'a> {
    obj: &'a SelectionObjective<'a>,
    moment_partition: Vec<f64>,
    cross_partitions: Vec<Vec<f64>>,
}

impl<'a> FrozenDerivative<'a> {
    fn build(obj: &'a SelectionObjective<'a>, seed: f64) -> Result<Self> {
        let dg = element_param_deriv(obj.dict, seed);
        let (_, moment_partition) = quadrature_partition(|z| obj.f.eval(z) * dg(z), obj)?;
        let mut cross_partitions = Vec::with_capacity(obj.basis.len());
        for gi in obj.basis {
            let (_, part) = quadrature_partition(|z| gi.eval(z) * dg(z), obj)?;
            cross_partitions.push(part);
        }
        Ok(Self {
            obj,
            moment_partition,
            cross_partitions,
        })
    }

    fn phi_prime(&self, param: f64) -> f64 {
        let dg = element_param_deriv(self.obj.dict, param);
        let mut v = crate::analysis::quadrature::integrate_fixed(
            |z| self.obj.f.eval(z) * dg(z),
            &self.moment_partition,
        );
        for ((c, gi), part) in self
            .obj
            .coeffs
            .iter()
            .zip(self.obj.basis)
            .zip(&self.cross_partitions)
        {
            v -= c * crate::analysis::quadrature::integrate_fixed(
                |z| gi.eval(z) * dg(z),
                part,
            );
        }
        v
    }
}

fn quadrature_partition(
    f: impl Fn(f64) -> f64,
    obj: &SelectionObjective<'_>,
) -> Result<(f64, Vec<f64>)> {
    crate::analysis::quadrature::integrate_with_partition(f, obj.fit, obj.quad)
}

/// Bisects the stationarity condition of the (signed) objective inside a
/// small bracket around `seed`. Returns the refined parameter, or the seed
/// when no sign change brackets a maximum.
fn derivative_polish(
    obj: &SelectionObjective<'_>,
    seed_x: f64,
    bounds: (f64, f64),
    to_param: impl Fn(f64) -> f64,
    dparam_dx: impl Fn(f64) -> f64,
) -> f64 {
    let param_seed = to_param(seed_x);
    let Ok(phi_seed) = obj.signed(param_seed) else {
        return seed_x;
    };
    if phi_seed == 0.0 || !phi_seed.is_finite() {
        return seed_x;
    }
    // Signed selection maximizes phi itself; the absolute variant maximizes
    // the located peak's branch of |phi|.
    let s_hat = if SIGNED_SELECTION {
        1.0
    } else {
        phi_seed.signum()
    };
    let Ok(frozen) = FrozenDerivative::build(obj, param_seed) else {
        return seed_x;
    };
    let psi = |x: f64| s_hat * frozen.phi_prime(to_param(x)) * dparam_dx(x);

    let delta = 0.02 * (bounds.1 - bounds.0);
    let mut lo = (seed_x - delta).max(bounds.0);
    let mut hi = (seed_x + delta).min(bounds.1);
    let (psi_lo, psi_hi) = (psi(lo), psi(hi));
    if !(psi_lo > 0.0 && psi_hi < 0.0) {
        return seed_x;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x_star = 0.5 * (lo + hi);
    // Guard against a spurious root: the refined point must not lose value.
    match obj.signed(to_param(x_star)) {
        Ok(v) if s_hat * v >= s_hat * phi_seed - 1e-6 * phi_seed.abs() => x_star,
        _ => seed_x,
    }
}

/// Parabolic-vertex ascent around a located maximum. Comparison-based search
/// stalls at sqrt(eps) on a quadratically flat peak; fitting the parabola
/// through three wide-spaced samples recovers several more digits.
fn parabola_polish(h: &impl Fn(f64) -> f64, start: (f64, f64), lo: f64, hi: f64) -> (f64, f64) {
    let mut best = start;
    let mut step = 1e-4 * (hi - lo);
    for _ in 0..3 {
        let (a, b, c) = (best.0 - step, best.0, best.0 + step);
        if a < lo || c > hi {
            break;
        }
        let (ya, yb, yc) = (h(a), h(b), h(c));
        let denom = yc - 2.0 * yb + ya;
        if !(denom < 0.0) {
            break;
        }
        let vertex = b - 0.5 * step * (yc - ya) / denom;
        if vertex > lo && vertex < hi {
            let yv = h(vertex);
            if yv >= best.1 {
                best = (vertex, yv);
            }
        }
        step *= 1e-2;
    }
    best
}

/// Runs the swarm search for the next parameter. Pole windows span many
/// decades, so the search runs in `log10(-p)`; exponent ranges are searched
/// directly. The swarm result is polished by a local golden-section ascent
/// and a parabolic vertex fit.
fn search_next_param(
    obj: &SelectionObjective<'_>,
    dict: &DictionarySpec,
    pso: &PsoConfig,
    step: usize,
) -> Result<(f64, f64)> {
    // Decorrelate the per-step searches while keeping the run deterministic.
    let cfg = PsoConfig {
        seed: pso.seed.wrapping_add((step as u64).wrapping_mul(0x9e37_79b9)),
        ..*pso
    };
    let (lo, hi) = dict.param_range();
    let (arg, value) = if dict.is_pole_kind() {
        let (u_lo, u_hi) = ((-hi).log10(), (-lo).log10());
        let h = |u: f64| obj.eval((-(10f64.powf(u))).clamp(lo, hi));
        let (u_best, v_best) = pso_maximize(&h, (u_lo, u_hi), &cfg);
        let delta = 0.02 * (u_hi - u_lo);
        let (u_pol, v_pol) = golden_max(
            &h,
            (u_best - delta).max(u_lo),
            (u_best + delta).min(u_hi),
            60,
        );
        let seed = if v_pol > v_best {
            (u_pol, v_pol)
        } else {
            (u_best, v_best)
        };
        let (u_par, _) = parabola_polish(&h, seed, u_lo, u_hi);
        let to_param = |u: f64| (-(10f64.powf(u))).clamp(lo, hi);
        let u = derivative_polish(
            obj,
            u_par,
            (u_lo, u_hi),
            to_param,
            |u: f64| -(10f64.powf(u)) * std::f64::consts::LN_10,
        );
        let p = to_param(u);
        (p, h(u))
    } else {
        let h = |eta: f64| obj.eval(eta.clamp(lo, hi));
        let (e_best, v_best) = pso_maximize(&h, (lo, hi), &cfg);
        let delta = 0.02 * (hi - lo);
        let (e_pol, v_pol) =
            golden_max(&h, (e_best - delta).max(lo), (e_best + delta).min(hi), 60);
        let seed = if v_pol > v_best {
            (e_pol, v_pol)
        } else {
            (e_best, v_best)
        };
        let (e_par, _) = parabola_polish(&h, seed, lo, hi);
        let e = derivative_polish(
            obj,
            e_par,
            (lo, hi),
            |x: f64| x.clamp(lo, hi),
            |_| 1.0,
        );
        (e.clamp(lo, hi), h(e))
    };
    if value == f64::NEG_INFINITY {
        if let Some(err) = obj.first_error.borrow_mut().take() {
            return Err(err);
        }
    }
    Ok((arg, value))
}

/// L2 residual norm for trace records. Near-exact fits leave a
/// cancellation-noise integrand the quadrature cannot certify; the flagged
/// last estimate is the honest value then.
fn trace_l2(
    f: &TargetFunction,
    basis: &[BasisElement],
    coeffs: &[f64],
    on: Interval,
    quad: &QuadratureRule,
) -> Result<f64> {
    match l2_norm(|z| residual_value(f, basis, coeffs, z), on, quad) {
        Ok(v) => Ok(v),
        Err(Error::QuadratureFailure { estimate, .. }) => Ok(estimate.max(0.0).sqrt()),
        Err(e) => Err(e),
    }
}

/// Nudges a duplicate parameter per the domain policy: perturb once by a
/// relative 1e-12 and retry, otherwise fail.
fn resolve_duplicate(param: f64, basis: &[BasisElement], dict: &DictionarySpec) -> Result<f64> {
    let taken = |p: f64| basis.iter().any(|el| el.param() == p);
    if !taken(param) {
        return Ok(param);
    }
    let (lo, hi) = dict.param_range();
    for cand in [param + 1e-12 * param.abs(), param - 1e-12 * param.abs()] {
        let c = cand.clamp(lo, hi);
        if !taken(c) {
            return Ok(c);
        }
    }
    Err(Error::DuplicateParameter { param })
}

struct OgaState {
    basis: Vec<BasisElement>,
    coeffs: Vec<f64>,
    records: Vec<IterationRecord>,
}

fn oga_loop(
    f: &TargetFunction,
    dict: &DictionarySpec,
    on: Interval,
    n: usize,
    pso: &PsoConfig,
    settings: &RunSettings,
    mut per_step: impl FnMut(&mut OgaState, bool) -> Result<()>,
) -> Result<OgaState> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one greedy step".into()));
    }
    f.check_finite_on(on)?;
    let eval_iv = settings.eval_interval(on);
    if eval_iv != on {
        f.check_finite_on(eval_iv)?;
    }

    let mut state = OgaState {
        basis: Vec::new(),
        coeffs: Vec::new(),
        records: Vec::new(),
    };

    for k in 1..=n {
        let obj = SelectionObjective {
            f,
            dict,
            basis: &state.basis,
            coeffs: &state.coeffs,
            fit: on,
            quad: &settings.quad,
            first_error: RefCell::new(None),
        };
        let (param, _) = search_next_param(&obj, dict, pso, k)?;
        let param = resolve_duplicate(param, &state.basis, dict)?;
        state.basis.push(dict.element(param)?);

        let proj = analysis::project(f, &state.basis, on, &settings.quad)?;
        state.coeffs = proj.coeffs;

        let coeffs = state.coeffs.clone();
        let basis = state.basis.clone();
        let l2 = trace_l2(f, &basis, &coeffs, on, &settings.quad)?;
        let (uni, _) = sup_abs(
            |z| residual_value(f, &basis, &coeffs, z),
            eval_iv,
            &settings.grid,
        );
        state.records.push(IterationRecord {
            param,
            coeffs: state.coeffs.clone(),
            uniform_error: uni,
            l2_error: l2,
            gram_truncated: proj.truncated,
            window_degenerate: false,
        });
        // An early target stop counts as the last step so final-only fits
        // still run before the loop exits.
        let hit_target = |records: &[IterationRecord]| {
            settings
                .target_uniform_error
                .zip(records.last())
                .is_some_and(|(t, r)| r.uniform_error <= t)
        };
        let stopping = hit_target(&state.records);
        per_step(&mut state, k == n || stopping)?;
        if stopping || hit_target(&state.records) {
            break;
        }
    }
    Ok(state)
}

/// Orthogonal greedy algorithm: each step selects the dictionary element
/// with the largest residual inner product (by swarm search) and re-projects
/// onto everything selected so far. The L2 error is non-increasing; the
/// uniform error need not be.
pub fn run_oga(
    f: &TargetFunction,
    dict: &DictionarySpec,
    on: Interval,
    n: usize,
    pso: &PsoConfig,
    settings: &RunSettings,
) -> Result<GreedyTrace> {
    let state = oga_loop(f, dict, on, n, pso, settings, |_, _| Ok(()))?;
    let final_approximant = Approximant::new(state.basis, state.coeffs, on)?;
    Ok(GreedyTrace {
        iterations: state.records,
        final_approximant,
    })
}

/// Orthogonal greedy selection followed by a best uniform-norm coefficient
/// fit, warm-started from the projection coefficients. `FinalOnly` fits once
/// after the last step; `EveryStep` fits after each step (making the
/// recorded uniform errors non-increasing) while the greedy residual keeps
/// following the plain projection path.
pub fn run_improved_oga(
    f: &TargetFunction,
    dict: &DictionarySpec,
    on: Interval,
    n: usize,
    pso: &PsoConfig,
    mode: MinimaxMode,
    settings: &RunSettings,
) -> Result<GreedyTrace> {
    let eval_iv = settings.eval_interval(on);
    let mut prev_fit: Option<Vec<f64>> = None;
    let mut final_coeffs: Vec<f64> = Vec::new();

    let state = oga_loop(f, dict, on, n, pso, settings, |state, is_last| {
        if mode == MinimaxMode::FinalOnly && !is_last {
            return Ok(());
        }
        // Warm start: the projection coefficients, or the previous fit
        // zero-padded, whichever is already better in the working norm.
        let err_of = |c: &[f64]| {
            sup_abs(
                |z| residual_value(f, &state.basis, c, z),
                on,
                &settings.grid,
            )
            .0
        };
        let mut init = state.coeffs.clone();
        let mut init_err = err_of(&init);
        if let Some(prev) = &prev_fit {
            let mut padded = prev.clone();
            padded.resize(state.basis.len(), 0.0);
            let padded_err = err_of(&padded);
            if padded_err < init_err {
                init = padded;
                init_err = padded_err;
            }
        }
        let sol = match best_uniform_coeffs(
            &MinimaxProblem::new(f, &state.basis, on)
                .with_grid(settings.grid)
                .with_init(init.clone()),
        ) {
            Ok(s) => s,
            // A numerically degenerate basis cannot be refit; keeping the
            // warm start preserves the non-increasing error sequence.
            Err(Error::MinimaxFailure(_)) => crate::minimax::MinimaxSolution {
                coeffs: init,
                error: init_err,
                converged: false,
            },
            Err(e) => return Err(e),
        };

        let rec = state.records.last_mut().expect("record exists");
        rec.coeffs = sol.coeffs.clone();
        rec.uniform_error = if eval_iv == on {
            sol.error
        } else {
            sup_abs(
                |z| residual_value(f, &state.basis, &sol.coeffs, z),
                eval_iv,
                &settings.grid,
            )
            .0
        };
        rec.l2_error = trace_l2(f, &state.basis, &sol.coeffs, on, &settings.quad)?;
        prev_fit = Some(sol.coeffs.clone());
        final_coeffs = sol.coeffs;
        Ok(())
    })?;

    let final_approximant = Approximant::new(state.basis, final_coeffs, on)?;
    Ok(GreedyTrace {
        iterations: state.records,
        final_approximant,
    })
}

/// Candidate-pole window for one weak-greedy step.
///
/// With elements `g_p = 1/(z - p)`, `p` in `[L, R]`, `R < 0 < z*`, the
/// pointwise functional `<F_r, g_p> = sign(r(z*)) g_p(z*)` is largest in
/// magnitude at `p = R` and smallest at `p = L`. The slack-`t` window per
/// residual sign is
///
/// ```text
///   sign > 0:  [max(L, z* - (z* - R)/t), R]        toward the least-negative end
///   sign < 0:  [L, min(R, L + (z* - L)(1/t - 1))]  toward the most-negative end
/// ```
///
/// Both collapse to that branch's extreme pole at `t = 1` and widen
/// proportionally to `1/t - 1` as the slack grows.
fn wcga_window(
    sign_positive: bool,
    z_star: f64,
    t: f64,
    left: f64,
    right: f64,
) -> (f64, f64, bool) {
    if sign_positive {
        let raw = z_star - (z_star - right) / t;
        let lo = raw.max(left).min(right);
        (lo, right, lo >= right)
    } else {
        let raw = left + (z_star - left) * (1.0 / t - 1.0);
        let hi = raw.min(right).max(left);
        (left, hi, hi <= left)
    }
}

/// Weak Chebyshev greedy algorithm in the uniform norm: per step the
/// candidate window shrinks by the residual-sign rule, its grid is scanned
/// in ascending order, and the first candidate whose best-uniform fit
/// strictly improves the error is kept. If none improves, the right end of
/// the window enters with a zero coefficient, so the error sequence is
/// non-increasing by construction.
pub fn run_wcga(
    f: &TargetFunction,
    dict: &DictionarySpec,
    on: Interval,
    cfg: &WcgaConfig,
    settings: &RunSettings,
) -> Result<GreedyTrace> {
    if cfg.max_terms == 0 {
        return Err(Error::InvalidConfig("need at least one greedy term".into()));
    }
    if matches!(dict, DictionarySpec::NormalizedPole { .. }) {
        return Err(Error::InvalidConfig(
            "the weak Chebyshev driver takes plain-pole or negative-power dictionaries".into(),
        ));
    }
    f.check_finite_on(on)?;
    let eval_iv = settings.eval_interval(on);
    if eval_iv != on {
        f.check_finite_on(eval_iv)?;
    }

    let mut basis: Vec<BasisElement> = Vec::new();
    let mut coeffs: Vec<f64> = Vec::new();
    let mut records: Vec<IterationRecord> = Vec::new();

    let (mut err_prev, mut z_star) = sup_abs(|z| f.eval(z), on, &settings.grid);
    let (lo_all, hi_all) = dict.param_range();

    for k in 1..=cfg.max_terms {
        if err_prev < RESIDUAL_FLOOR {
            break;
        }
        let t_k = cfg.t_sequence.value(k);
        if !(t_k > 0.0 && t_k <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "weakness parameter t_{k} = {t_k} outside (0, 1]"
            )));
        }

        let (win_lo, win_hi, degenerate) = if dict.is_pole_kind() {
            let sign_positive = residual_value(f, &basis, &coeffs, z_star) > 0.0;
            wcga_window(sign_positive, z_star, t_k, lo_all, hi_all)
        } else {
            // The window-shrink rule is pole-specific; exponent dictionaries
            // scan their full range every step.
            (lo_all, hi_all, false)
        };

        let mut accepted: Option<(f64, Vec<f64>, f64)> = None;
        let mut padded = coeffs.clone();
        padded.push(0.0);

        // A new pole too close to an existing one adds no usable direction
        // and destroys the conditioning of the coefficient subproblem.
        let too_close = |cand: f64, basis: &[BasisElement]| {
            basis
                .iter()
                .any(|el| (el.param() - cand).abs() <= 1e-9 * cand.abs().max(el.param().abs()))
        };

        let n_cand = if win_hi > win_lo { cfg.m + 1 } else { 1 };
        let candidate = |i: usize| {
            if n_cand == 1 {
                win_hi
            } else {
                win_lo + (win_hi - win_lo) * i as f64 / cfg.m as f64
            }
        };
        for i in 0..n_cand {
            let cand = candidate(i);
            if too_close(cand, &basis) {
                continue;
            }
            let mut trial = basis.clone();
            trial.push(dict.element(cand)?);
            let sol = match best_uniform_coeffs(
                &MinimaxProblem::new(f, &trial, on)
                    .with_grid(settings.grid)
                    .with_init(padded.clone()),
            ) {
                Ok(s) => s,
                // Numerically degenerate candidate; skip it.
                Err(Error::MinimaxFailure(_)) => continue,
                Err(e) => return Err(e),
            };
            if sol.error < err_prev {
                accepted = Some((cand, sol.coeffs, sol.error));
                break;
            }
        }

        let (param, new_coeffs, new_err) = match accepted {
            Some(v) => v,
            None => {
                // Fall back to the window's right end with a zero
                // coefficient; the error stays put. Walk down the candidate
                // grid if the right end would collide with an existing pole.
                let p = (0..n_cand)
                    .rev()
                    .map(candidate)
                    .find(|&c| !too_close(c, &basis));
                match p {
                    Some(p) => (p, padded.clone(), err_prev),
                    // Window saturated: nothing new to add, stop early.
                    None => break,
                }
            }
        };
        basis.push(dict.element(param)?);
        coeffs = new_coeffs;
        err_prev = new_err;

        let b2 = basis.clone();
        let c2 = coeffs.clone();
        let l2 = trace_l2(f, &b2, &c2, on, &settings.quad)?;
        let uni = if eval_iv == on {
            new_err
        } else {
            sup_abs(|z| residual_value(f, &b2, &c2, z), eval_iv, &settings.grid).0
        };
        records.push(IterationRecord {
            param,
            coeffs: coeffs.clone(),
            uniform_error: uni,
            l2_error: l2,
            gram_truncated: false,
            window_degenerate: degenerate,
        });

        let (_, z_new) = sup_abs(|z| residual_value(f, &basis, &coeffs, z), on, &settings.grid);
        z_star = z_new;

        if let Some(target) = cfg.target_error {
            if err_prev <= target {
                break;
            }
        }
    }

    let final_approximant = Approximant::new(basis, coeffs, on)?;
    Ok(GreedyTrace {
        iterations: records,
        final_approximant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PoleWindow;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    fn window(l: f64, r: f64) -> PoleWindow {
        PoleWindow::new(l, r).unwrap()
    }

    #[test]
    fn pso_finds_unimodal_maximum() {
        let cfg = PsoConfig::default();
        let (arg, val) = pso_maximize(|p| -(p + 3.0) * (p + 3.0), (-10.0, -1.0), &cfg);
        assert!((arg + 3.0).abs() < 1e-6, "arg {arg}");
        assert!(val.abs() < 1e-6, "val {val}");
    }

    #[test]
    fn pso_is_deterministic_under_fixed_seed() {
        let cfg = PsoConfig {
            seed: 42,
            ..Default::default()
        };
        let f = |p: f64| (3.0 * p).sin() + 0.1 * p;
        let a = pso_maximize(f, (-10.0, -0.5), &cfg);
        let b = pso_maximize(f, (-10.0, -0.5), &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn pso_beats_coarse_scan_most_of_the_time() {
        // Statistical form of the quality contract: over several seeds the
        // swarm should match a 1000-point scan within a small slack nearly
        // always.
        let f = |p: f64| (5.0 * p).sin() / (1.0 + p * p) + 0.05 * (-(p + 4.0) * (p + 4.0)).exp();
        let (lo, hi) = (-10.0, -0.1);
        let scan_best = (0..1000)
            .map(|i| f(lo + (hi - lo) * i as f64 / 999.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut hits = 0;
        for seed in 0..10 {
            let cfg = PsoConfig {
                seed,
                ..Default::default()
            };
            let (_, v) = pso_maximize(f, (lo, hi), &cfg);
            if v >= scan_best - 1e-6 * scan_best.abs() {
                hits += 1;
            }
        }
        assert!(hits >= 8, "only {hits}/10 seeds matched the scan");
    }

    #[test]
    fn oga_recovers_single_dictionary_element() {
        let fit = iv(1e-4, 1.0);
        let dict = DictionarySpec::NormalizedPole {
            window: window(-50.0, -1e-6),
            fit,
        };
        let g0 = dict.element(-0.37).unwrap();
        let f = TargetFunction::custom(move |z| g0.eval(z));
        let trace = run_oga(
            &f,
            &dict,
            fit,
            1,
            &PsoConfig::default(),
            &RunSettings::default(),
        )
        .unwrap();
        assert!(
            trace.iterations[0].l2_error < 1e-8,
            "l2 {}",
            trace.iterations[0].l2_error
        );
    }

    #[test]
    fn oga_l2_errors_never_increase() {
        let fit = iv(1e-4, 1.0);
        let dict = DictionarySpec::NormalizedPole {
            window: window(-50.0, -1e-6),
            fit,
        };
        let f = TargetFunction::inverse_power(0.5).unwrap();
        let trace = run_oga(
            &f,
            &dict,
            fit,
            5,
            &PsoConfig::default(),
            &RunSettings::default(),
        )
        .unwrap();
        let mut last = f64::INFINITY;
        for it in &trace.iterations {
            assert!(it.l2_error <= last + 1e-10, "{} > {last}", it.l2_error);
            last = it.l2_error;
        }
    }

    #[test]
    fn oga_matches_exhaustive_grid_greedy() {
        // Oracle: exhaustive scan over a fixed 200-point pole grid. At step 1
        // (unit-norm dictionary) the selection objective determines the L2
        // error outright, so the swarm run must match the grid-greedy L2; at
        // every step the swarm's selected objective value must dominate the
        // grid scan of the same objective.
        let fit = iv(1e-3, 1.0);
        let win = window(-30.0, -1e-4);
        let dict = DictionarySpec::NormalizedPole { window: win, fit };
        let f = TargetFunction::inverse_power(0.5).unwrap();
        let quad = QuadratureRule::default();

        let grid_poles: Vec<f64> = (0..200)
            .map(|i| {
                (-(10f64.powf(
                    (-win.right()).log10()
                        + ((-win.left()).log10() - (-win.right()).log10()) * i as f64 / 199.0,
                )))
                .clamp(win.left(), win.right())
            })
            .collect();

        let trace = run_oga(
            &f,
            &dict,
            fit,
            2,
            &PsoConfig::default(),
            &RunSettings::default(),
        )
        .unwrap();

        // Step-1 L2 of the one-element grid greedy.
        let mut best_step1 = f64::INFINITY;
        for &p in &grid_poles {
            let basis = vec![dict.element(p).unwrap()];
            let proj = analysis::project(&f, &basis, fit, &quad).unwrap();
            let c = proj.coeffs.clone();
            let err =
                l2_norm(|z| residual_value(&f, &basis, &c, z), fit, &quad).unwrap();
            best_step1 = best_step1.min(err);
        }
        assert!(
            trace.iterations[0].l2_error <= best_step1 + 1e-6,
            "swarm {} vs grid oracle {best_step1}",
            trace.iterations[0].l2_error
        );

        // Objective dominance along the swarm's own trajectory.
        let mut basis: Vec<BasisElement> = Vec::new();
        let mut coeffs: Vec<f64> = Vec::new();
        for it in &trace.iterations {
            let obj = SelectionObjective {
                f: &f,
                dict: &dict,
                basis: &basis,
                coeffs: &coeffs,
                fit,
                quad: &quad,
                first_error: RefCell::new(None),
            };
            let selected = obj.eval(it.param);
            let grid_best = grid_poles
                .iter()
                .map(|&p| obj.eval(p))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                selected >= grid_best - 1e-6 * grid_best.abs(),
                "selected {selected} vs grid best {grid_best}"
            );
            basis.push(dict.element(it.param).unwrap());
            coeffs = it.coeffs.clone();
        }
    }

    #[test]
    fn improved_oga_is_exact_on_span_members() {
        let fit = iv(1e-4, 1.0);
        let dict = DictionarySpec::NormalizedPole {
            window: window(-50.0, -1e-6),
            fit,
        };
        let g0 = dict.element(-2.2).unwrap();
        let f = TargetFunction::custom(move |z| 3.0 * g0.eval(z));
        let trace = run_improved_oga(
            &f,
            &dict,
            fit,
            1,
            &PsoConfig::default(),
            MinimaxMode::FinalOnly,
            &RunSettings::default(),
        )
        .unwrap();
        assert!(
            trace.iterations[0].uniform_error <= 1e-10,
            "err {}",
            trace.iterations[0].uniform_error
        );
    }

    #[test]
    fn improved_oga_every_step_is_monotone_and_beats_plain() {
        let fit = iv(1e-4, 1.0);
        let dict = DictionarySpec::NormalizedPole {
            window: window(-50.0, -1e-6),
            fit,
        };
        let f = TargetFunction::two_term_frac(0.1, 1.0, 0.5, -0.5).unwrap();
        let pso = PsoConfig::default();
        let settings = RunSettings::default();
        let n = 4;
        let plain = run_oga(&f, &dict, fit, n, &pso, &settings).unwrap();
        let improved =
            run_improved_oga(&f, &dict, fit, n, &pso, MinimaxMode::EveryStep, &settings).unwrap();
        let mut last = f64::INFINITY;
        for it in &improved.iterations {
            assert!(
                it.uniform_error <= last + 1e-12,
                "{} > {last}",
                it.uniform_error
            );
            last = it.uniform_error;
        }
        assert!(
            improved.final_uniform_error().unwrap()
                <= plain.final_uniform_error().unwrap() + 1e-12
        );
        // Same pole sequence: the improved run only refits coefficients.
        assert_eq!(plain.selected_params(), improved.selected_params());
    }

    #[test]
    fn wcga_reaches_span_member() {
        let fit = iv(1e-3, 1.0);
        let dict = DictionarySpec::PlainPole {
            window: window(-10.0, -0.05),
        };
        let f = TargetFunction::custom(|z| 2.0 / (z + 0.05));
        let trace = run_wcga(
            &f,
            &dict,
            fit,
            &WcgaConfig::new(4).with_target_error(1e-9),
            &RunSettings::default(),
        )
        .unwrap();
        let best = trace
            .iterations
            .iter()
            .map(|it| it.uniform_error)
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "best error {best}");
    }

    #[test]
    fn wcga_errors_never_increase() {
        let fit = iv(1e-4, 1.0);
        let dict = DictionarySpec::PlainPole {
            window: window(-50.0, -1e-6),
        };
        let f = TargetFunction::two_term_frac(0.1, 1.0, 0.5, -0.5).unwrap();
        let trace = run_wcga(&f, &dict, fit, &WcgaConfig::new(6), &RunSettings::default()).unwrap();
        let mut last = f64::INFINITY;
        for it in &trace.iterations {
            assert!(
                it.uniform_error <= last + 1e-12,
                "{} > {last}",
                it.uniform_error
            );
            last = it.uniform_error;
        }
        // Every pole inside the configured window.
        for it in &trace.iterations {
            assert!(it.param >= -50.0 && it.param <= -1e-6);
        }
    }

    #[test]
    fn wcga_negative_power_dictionary_improves() {
        let fit = iv(1e-3, 1.0);
        let dict = DictionarySpec::negative_power(1e-8, 1.0 - 1e-8).unwrap();
        let f = TargetFunction::two_term_frac(0.1, 1.0, 0.4, 0.6).unwrap();
        let trace = run_wcga(&f, &dict, fit, &WcgaConfig::new(5), &RunSettings::default()).unwrap();
        let first = trace.iterations.first().unwrap().uniform_error;
        let last = trace.iterations.last().unwrap().uniform_error;
        assert!(last <= first);
        assert!(!trace.iterations.is_empty());
    }

    #[test]
    fn wcga_window_branches() {
        // t = 1 collapses each branch onto its extreme pole.
        let (lo, hi, degen) = wcga_window(true, 1.0, 1.0, -10.0, -0.5);
        assert_eq!((lo, hi), (-0.5, -0.5));
        assert!(degen);
        let (lo, hi, degen) = wcga_window(false, 1.0, 1.0, -10.0, -0.5);
        assert_eq!((lo, hi), (-10.0, -10.0));
        assert!(degen);
        // Smaller t widens into the window from that end.
        let (lo, hi, _) = wcga_window(true, 1.0, 0.5, -10.0, -0.5);
        assert_eq!(hi, -0.5);
        assert!((lo - (1.0 - 1.5 / 0.5)).abs() < 1e-15); // = -2.0
        let (lo, hi, _) = wcga_window(false, 1.0, 0.5, -10.0, -0.5);
        assert_eq!(lo, -10.0);
        assert_eq!(hi, -0.5); // 1/t - 1 = 1 widens past the right end; clamped
    }

    #[test]
    fn traces_are_bit_identical_under_fixed_seed() {
        let fit = iv(1e-4, 1.0);
        let dict = DictionarySpec::NormalizedPole {
            window: window(-50.0, -1e-6),
            fit,
        };
        let f = TargetFunction::inverse_power(0.5).unwrap();
        let pso = PsoConfig {
            seed: 7,
            swarm_size: 20,
            iterations: 60,
            ..Default::default()
        };
        let a = run_oga(&f, &dict, fit, 3, &pso, &RunSettings::default()).unwrap();
        let b = run_oga(&f, &dict, fit, 3, &pso, &RunSettings::default()).unwrap();
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            assert_eq!(x.param.to_bits(), y.param.to_bits());
            assert_eq!(x.uniform_error.to_bits(), y.uniform_error.to_bits());
            assert_eq!(x.l2_error.to_bits(), y.l2_error.to_bits());
            for (cx, cy) in x.coeffs.iter().zip(&y.coeffs) {
                assert_eq!(cx.to_bits(), cy.to_bits());
            }
        }
    }

    #[test]
    fn zero_steps_is_a_usage_error() {
        let fit = iv(1e-4, 1.0);
        let dict = DictionarySpec::PlainPole {
            window: window(-50.0, -1e-6),
        };
        let f = TargetFunction::inverse_power(0.5).unwrap();
        assert!(run_oga(
            &f,
            &dict,
            fit,
            0,
            &PsoConfig::default(),
            &RunSettings::default()
        )
        .is_err());
        assert!(run_wcga(&f, &dict, fit, &WcgaConfig::new(0), &RunSettings::default()).is_err());
    }
}
