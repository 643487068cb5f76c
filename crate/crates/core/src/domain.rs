//! Core value types: intervals, dictionaries, target functions, approximants,
//! and per-run traces.
//!
//! Everything here is an immutable value type; instances can be shared and
//! sent between threads freely.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with `0 <= lo < hi`, used both as the fitting
/// domain of an approximation and as the domain uniform errors are reported on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo >= hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.lo && z <= self.hi
    }
}

/// Window of candidate poles `[left, right]` with `left < right < 0`.
///
/// Keeping the whole window strictly negative is what guarantees every
/// shifted operator `A - pI` stays positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleWindow {
    left: f64,
    right: f64,
}

impl PoleWindow {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        if !(left.is_finite() && right.is_finite()) || left >= right || right >= 0.0 {
            return Err(Error::InvalidWindow { left, right });
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.left && p <= self.right
    }
}

impl Default for PoleWindow {
    /// Wide default window; observed greedy selections on the benchmark
    /// targets stay well inside `[-25, -2.5e-9]`.
    fn default() -> Self {
        Self {
            left: -100.0,
            right: -1e-9,
        }
    }
}

/// Parametric family the greedy algorithms select from.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySpec {
    /// `g_p(z) = (1/(a-p) - 1/(b-p))^{-1/2} / (z - p)`, unit L2 norm on `fit`.
    NormalizedPole { window: PoleWindow, fit: Interval },
    /// `g_p(z) = 1/(z - p)`.
    PlainPole { window: PoleWindow },
    /// `g_eta(z) = z^{-eta}` with `eta` in an open subrange of (0, 1).
    NegativePower { eta_lo: f64, eta_hi: f64 },
}

impl DictionarySpec {
    pub fn negative_power(eta_lo: f64, eta_hi: f64) -> Result<Self> {
        if !(eta_lo.is_finite() && eta_hi.is_finite())
            || eta_lo <= 0.0
            || eta_lo >= eta_hi
            || eta_hi >= 1.0
        {
            return Err(Error::InvalidExponentRange {
                lo: eta_lo,
                hi: eta_hi,
            });
        }
        Ok(Self::NegativePower { eta_lo, eta_hi })
    }

    /// Closed parameter range the greedy search runs over.
    pub fn param_range(&self) -> (f64, f64) {
        match self {
            Self::NormalizedPole { window, .. } | Self::PlainPole { window } => {
                (window.left(), window.right())
            }
            Self::NegativePower { eta_lo, eta_hi } => (*eta_lo, *eta_hi),
        }
    }

    pub fn contains_param(&self, param: f64) -> bool {
        let (lo, hi) = self.param_range();
        param >= lo && param <= hi
    }

    pub fn is_pole_kind(&self) -> bool {
        !matches!(self, Self::NegativePower { .. })
    }

    /// Instantiates the dictionary element for `param`, validating membership.
    pub fn element(&self, param: f64) -> Result<BasisElement> {
        if !self.contains_param(param) {
            return Err(Error::ParamOutsideSet { param });
        }
        let kind = match self {
            Self::NormalizedPole { fit, .. } => ElementKind::NormalizedPole { fit: *fit },
            Self::PlainPole { .. } => ElementKind::PlainPole,
            Self::NegativePower { .. } => ElementKind::NegativePower,
        };
        Ok(BasisElement { kind, param })
    }
}

/// Normalization factor of the unit-norm pole element:
/// `(1/(a-p) - 1/(b-p))^{-1/2}`.
pub fn pole_normalization(fit: Interval, p: f64) -> f64 {
    (1.0 / (fit.lo() - p) - 1.0 / (fit.hi() - p)).powf(-0.5)
}

/// What a single basis element evaluates as; `Custom` exists for tests and
/// embedding callers that bring their own functions.
#[derive(Clone)]
pub enum ElementKind {
    NormalizedPole { fit: Interval },
    PlainPole,
    NegativePower,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NormalizedPole { fit } => write!(f, "NormalizedPole {{ fit: {fit:?} }}"),
            Self::PlainPole => write!(f, "PlainPole"),
            Self::NegativePower => write!(f, "NegativePower"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// One dictionary element, identified by its kind and raw parameter
/// (the pole `p` or the exponent `eta`; parameters are stored raw so an
/// off-grid swarm search result is representable exactly).
#[derive(Debug, Clone)]
pub struct BasisElement {
    kind: ElementKind,
    param: f64,
}

impl BasisElement {
    pub fn custom(param: f64, f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        Self {
            kind: ElementKind::Custom(f),
            param,
        }
    }

    pub fn kind(&self) -> &ElementKind {
        &self.kind
    }

    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn is_pole(&self) -> bool {
        matches!(
            self.kind,
            ElementKind::NormalizedPole { .. } | ElementKind::PlainPole
        )
    }

    /// Evaluates the element. Callers keep `z` away from the pole itself;
    /// in all algorithm paths `z > 0` and poles are negative, so the
    /// denominator never vanishes.
    pub fn eval(&self, z: f64) -> f64 {
        match &self.kind {
            ElementKind::NormalizedPole { fit } => {
                pole_normalization(*fit, self.param) / (z - self.param)
            }
            ElementKind::PlainPole => 1.0 / (z - self.param),
            ElementKind::NegativePower => z.powf(-self.param),
            ElementKind::Custom(f) => f(z),
        }
    }
}

/// Checked element evaluation: validates parameter membership and rejects
/// evaluation at the pole itself.
pub fn eval_element(spec: &DictionarySpec, param: f64, z: f64) -> Result<f64> {
    let el = spec.element(param)?;
    if el.is_pole() && z == param {
        return Err(Error::PoleEvaluation { z, pole: param });
    }
    Ok(el.eval(z))
}

/// Scalar function being approximated.
#[derive(Clone)]
pub enum TargetFunction {
    /// `z^{-alpha}`, `alpha` in (0, 1).
    InversePower { alpha: f64 },
    /// `(s z^alpha + t z^beta)^{-1}`.
    TwoTermFrac { s: f64, t: f64, alpha: f64, beta: f64 },
    /// Rescaled interface target
    /// `(c^{-1/2}/g0 * z^{-1/2} + K c^{1/2}/g0 * z^{1/2})^{-1}` on (0, 1],
    /// where `g0 = max(c^{-1/2}, K c^{1/2})`.
    RescaledInterface { mu: f64, k: f64, c: f64 },
    /// Caller-supplied pointwise evaluator.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InversePower { alpha } => write!(f, "InversePower {{ alpha: {alpha} }}"),
            Self::TwoTermFrac { s, t, alpha, beta } => {
                write!(f, "TwoTermFrac {{ s: {s}, t: {t}, alpha: {alpha}, beta: {beta} }}")
            }
            Self::RescaledInterface { mu, k, c } => {
                write!(f, "RescaledInterface {{ mu: {mu}, k: {k}, c: {c} }}")
            }
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TargetFunction {
    pub fn inverse_power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidTarget(format!(
                "inverse-power exponent {alpha} outside (0, 1)"
            )));
        }
        Ok(Self::InversePower { alpha })
    }

    pub fn two_term_frac(s: f64, t: f64, alpha: f64, beta: f64) -> Result<Self> {
        for v in [s, t, alpha, beta] {
            if !v.is_finite() {
                return Err(Error::InvalidTarget("non-finite coefficient".into()));
            }
        }
        Ok(Self::TwoTermFrac { s, t, alpha, beta })
    }

    pub fn rescaled_interface(mu: f64, k: f64, c: f64) -> Result<Self> {
        if !(mu > 0.0 && k > 0.0 && c > 0.0) {
            return Err(Error::InvalidTarget(format!(
                "rescaled interface needs mu, K, c > 0 (got {mu}, {k}, {c})"
            )));
        }
        Ok(Self::RescaledInterface { mu, k, c })
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Self::InversePower { alpha } => z.powf(-alpha),
            Self::TwoTermFrac { s, t, alpha, beta } => {
                1.0 / (s * z.powf(*alpha) + t * z.powf(*beta))
            }
            Self::RescaledInterface { k, c, .. } => {
                let g0 = gamma0(*k, *c);
                let c1 = c.powf(-0.5) / g0;
                let c2 = k * c.powf(0.5) / g0;
                1.0 / (c1 * z.powf(-0.5) + c2 * z.powf(0.5))
            }
            Self::Custom(f) => f(z),
        }
    }

    /// Verifies the target is finite on the closed interval (endpoints plus
    /// a handful of interior probes).
    pub fn check_finite_on(&self, on: Interval) -> Result<()> {
        let n = 7;
        for i in 0..=n {
            let frac = i as f64 / n as f64;
            let z = if on.lo() > 0.0 {
                on.lo() * (on.hi() / on.lo()).powf(frac)
            } else {
                on.lo() + frac * on.width()
            };
            if !self.eval(z).is_finite() {
                return Err(Error::TargetNotFinite { z });
            }
        }
        Ok(())
    }
}

/// `gamma0 = max(c^{-1/2}, K c^{1/2})`, the rescaling constant of the
/// interface target.
pub fn gamma0(k: f64, c: f64) -> f64 {
    let a = c.powf(-0.5);
    let b = k * c.powf(0.5);
    a.max(b)
}

/// Linear combination of dictionary elements over a fit interval.
#[derive(Debug, Clone)]
pub struct Approximant {
    basis: Vec<BasisElement>,
    coeffs: Vec<f64>,
    fit: Interval,
}

impl Approximant {
    /// Validates pairwise-distinct parameters and (for pole kinds) negative
    /// poles.
    pub fn new(basis: Vec<BasisElement>, coeffs: Vec<f64>, fit: Interval) -> Result<Self> {
        if basis.len() != coeffs.len() {
            return Err(Error::PartialFractionShape {
                residues: coeffs.len(),
                poles: basis.len(),
            });
        }
        for (i, el) in basis.iter().enumerate() {
            if el.is_pole() && el.param() >= 0.0 {
                return Err(Error::NonNegativePole { pole: el.param() });
            }
            for other in &basis[..i] {
                if other.param() == el.param() {
                    return Err(Error::DuplicateParameter { param: el.param() });
                }
            }
        }
        Ok(Self { basis, coeffs, fit })
    }

    /// The zero approximant (empty basis).
    pub fn empty(fit: Interval) -> Self {
        Self {
            basis: Vec::new(),
            coeffs: Vec::new(),
            fit,
        }
    }

    pub fn basis(&self) -> &[BasisElement] {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn fit(&self) -> Interval {
        self.fit
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.basis
            .iter()
            .zip(&self.coeffs)
            .map(|(g, c)| c * g.eval(z))
            .sum()
    }
}

/// Checked approximant evaluation (plumbing counterpart of `eval_element`).
pub fn eval_approximant(phi: &Approximant, z: f64) -> f64 {
    phi.eval(z)
}

/// Rational function in partial-fraction form `c0 + sum_j r_j / (z - p_j)`,
/// all poles negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFraction {
    c0: f64,
    residues: Vec<f64>,
    poles: Vec<f64>,
}

impl PartialFraction {
    pub fn new(c0: f64, residues: Vec<f64>, poles: Vec<f64>) -> Result<Self> {
        if residues.len() != poles.len() {
            return Err(Error::PartialFractionShape {
                residues: residues.len(),
                poles: poles.len(),
            });
        }
        for &p in &poles {
            if !(p < 0.0) {
                return Err(Error::NonNegativePole { pole: p });
            }
        }
        Ok(Self { c0, residues, poles })
    }

    /// The identity map `R(z) = 1` (useful as a do-nothing preconditioner).
    pub fn identity() -> Self {
        Self {
            c0: 1.0,
            residues: Vec::new(),
            poles: Vec::new(),
        }
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn residues(&self) -> &[f64] {
        &self.residues
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.c0
            + self
                .residues
                .iter()
                .zip(&self.poles)
                .map(|(r, p)| r / (z - p))
                .sum::<f64>()
    }

    /// Change of variables `z -> z / z_scale` plus an overall value scale:
    /// if `R` approximates `f(w)` then the result approximates
    /// `value_scale * f(z / z_scale)`. Poles scale by `z_scale` (staying
    /// negative), residues by `value_scale * z_scale`.
    pub fn rescaled(&self, z_scale: f64, value_scale: f64) -> Self {
        Self {
            c0: self.c0 * value_scale,
            residues: self
                .residues
                .iter()
                .map(|r| r * value_scale * z_scale)
                .collect(),
            poles: self.poles.iter().map(|p| p * z_scale).collect(),
        }
    }
}

/// Per-iteration record of a greedy run.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Parameter selected at this step (pole or exponent).
    pub param: f64,
    /// Coefficients of the approximant after this step.
    pub coeffs: Vec<f64>,
    /// Uniform error on the evaluation interval.
    pub uniform_error: f64,
    /// L2 error on the fit interval.
    pub l2_error: f64,
    /// Gram solve fell back to spectral truncation.
    pub gram_truncated: bool,
    /// The candidate window collapsed to a single point this step.
    pub window_degenerate: bool,
}

/// Full record of a greedy run: one entry per iteration plus the final
/// approximant.
///
/// For every-step improved-OGA runs and WCGA runs with matching fit and
/// evaluation intervals, the `uniform_error` sequence is non-increasing.
#[derive(Debug, Clone)]
pub struct GreedyTrace {
    pub iterations: Vec<IterationRecord>,
    pub final_approximant: Approximant,
}

impl GreedyTrace {
    pub fn final_uniform_error(&self) -> Option<f64> {
        self.iterations.last().map(|it| it.uniform_error)
    }

    pub fn selected_params(&self) -> Vec<f64> {
        self.iterations.iter().map(|it| it.param).collect()
    }
}
