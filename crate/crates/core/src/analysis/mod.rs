//! L2 inner products, Gram matrices, orthogonal projection, and uniform-norm
//! evaluation on an interval.

pub mod quadrature;

pub use quadrature::{inner_product, integrate, l2_norm, QuadratureRule};

use nalgebra::{DMatrix, DVector};

use crate::domain::{pole_normalization, BasisElement, ElementKind, Interval, TargetFunction};
use crate::error::{Error, Result};

/// Residuals below this uniform norm are treated as converged.
pub const RESIDUAL_FLOOR: f64 = 1e-15;

/// Evaluation grid for sup-norm estimation: logarithmically spaced points
/// (intervals here span many decades and the error concentrates toward the
/// left end), each local maximum then polished by golden-section search.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub n_points: usize,
    pub refine_iters: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_points: 2000,
            refine_iters: 40,
        }
    }
}

impl GridSpec {
    /// Grid over the interval, endpoints included exactly. Falls back to
    /// uniform spacing when the interval touches zero.
    pub fn points(&self, on: Interval) -> Vec<f64> {
        let n = self.n_points.max(2);
        let (a, b) = (on.lo(), on.hi());
        let mut pts = Vec::with_capacity(n);
        if a > 0.0 {
            let ratio = b / a;
            for i in 0..n {
                pts.push(a * ratio.powf(i as f64 / (n - 1) as f64));
            }
        } else {
            for i in 0..n {
                pts.push(a + (b - a) * i as f64 / (n - 1) as f64);
            }
        }
        pts[0] = a;
        pts[n - 1] = b;
        pts
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

pub(crate) fn golden_max(
    h: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut hc = h(c);
    let mut hd = h(d);
    for _ in 0..iters {
        if hc >= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - INV_PHI * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + INV_PHI * (b - a);
            hd = h(d);
        }
    }
    if hc >= hd {
        (c, hc)
    } else {
        (d, hd)
    }
}

/// Refined local maxima of `|h|` over the interval: every grid-local maximum
/// (endpoints included) polished by golden-section search. Returned as
/// `(z, |h(z)|)` pairs in ascending `z` order.
pub fn abs_peaks(h: impl Fn(f64) -> f64, on: Interval, grid: &GridSpec) -> Vec<(f64, f64)> {
    let zs = grid.points(on);
    let abs_h = |z: f64| h(z).abs();
    let vals: Vec<f64> = zs.iter().map(|&z| abs_h(z)).collect();
    let n = zs.len();

    let mut peaks = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || vals[i] >= vals[i - 1];
        let right_ok = i == n - 1 || vals[i] >= vals[i + 1];
        if left_ok && right_ok {
            let lo = if i == 0 { zs[0] } else { zs[i - 1] };
            let hi = if i == n - 1 { zs[n - 1] } else { zs[i + 1] };
            let (z, v) = golden_max(&abs_h, lo, hi, grid.refine_iters);
            // Keep whichever of the grid point and the polished point is
            // higher, so the peak never undercuts the raw grid value.
            if v >= vals[i] {
                peaks.push((z, v));
            } else {
                peaks.push((zs[i], vals[i]));
            }
        }
    }
    peaks
}

/// Supremum of `|h|` over the interval: grid maximum refined around every
/// grid-local maximum. Returns `(value, argmax)`; never below the grid max.
pub fn sup_abs(h: impl Fn(f64) -> f64, on: Interval, grid: &GridSpec) -> (f64, f64) {
    let peaks = abs_peaks(&h, on, grid);
    // Ties go to the rightmost maximizer so the argmax is deterministic.
    let mut best = (f64::NEG_INFINITY, on.lo());
    for (z, v) in peaks {
        if v >= best.0 {
            best = (v, z);
        }
    }
    (best.0, best.1)
}

/// Uniform error `max_z |f(z) - phi(z)|` over the interval, with the
/// maximizer.
pub fn uniform_error(
    f: &TargetFunction,
    phi: &crate::domain::Approximant,
    on: Interval,
    grid: &GridSpec,
) -> (f64, f64) {
    sup_abs(|z| f.eval(z) - phi.eval(z), on, grid)
}

/// Applies the pointwise norming functional of `residual` to `g`:
/// `sign(residual(z*)) * g(z*)` with `z* = argmax |residual|`.
///
/// Returns `Err(ResidualNegligible)` when the residual's uniform norm is
/// below the convergence floor, signalling the caller to stop.
pub fn norming_functional_apply(
    residual: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    on: Interval,
    grid: &GridSpec,
) -> Result<f64> {
    let (norm, z_star) = sup_abs(&residual, on, grid);
    if norm < RESIDUAL_FLOOR {
        return Err(Error::ResidualNegligible);
    }
    let sign = if residual(z_star) > 0.0 { 1.0 } else { -1.0 };
    Ok(sign * g(z_star))
}

/// `int_a^b dz / (z - p)^2`, the closed form behind the pole normalization.
pub fn pole_square_integral(a: f64, b: f64, p: f64) -> f64 {
    1.0 / (a - p) - 1.0 / (b - p)
}

/// `int_a^b dz / ((z - p)(z - q))` via the log antiderivative
/// `(ln(z - p) - ln(z - q)) / (p - q)`, with a series fallback when the
/// poles nearly coincide and the direct form would cancel.
pub fn pole_pair_integral(a: f64, b: f64, p: f64, q: f64) -> f64 {
    let d = q - p;
    let near = a - p.max(q);
    if d.abs() <= 1e-5 * near {
        let f2 = pole_square_integral(a, b, p);
        let f3 = 0.5 * ((a - p).powi(-2) - (b - p).powi(-2));
        let f4 = ((a - p).powi(-3) - (b - p).powi(-3)) / 3.0;
        f2 + d * f3 + d * d * f4
    } else {
        (((b - p) / (b - q)).ln() - ((a - p) / (a - q)).ln()) / (p - q)
    }
}

pub(crate) fn check_distinct(basis: &[BasisElement]) -> Result<()> {
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    for (i, el) in basis.iter().enumerate() {
        for other in &basis[..i] {
            if other.param() == el.param() {
                return Err(Error::DuplicateParameter { param: el.param() });
            }
        }
    }
    Ok(())
}

fn element_pair_inner(
    gi: &BasisElement,
    gj: &BasisElement,
    on: Interval,
    rule: &QuadratureRule,
) -> Result<f64> {
    let factor = |el: &BasisElement| -> Option<f64> {
        match el.kind() {
            ElementKind::NormalizedPole { fit } => Some(pole_normalization(*fit, el.param())),
            ElementKind::PlainPole => Some(1.0),
            _ => None,
        }
    };
    match (factor(gi), factor(gj)) {
        (Some(ni), Some(nj)) => Ok(ni
            * nj
            * pole_pair_integral(on.lo(), on.hi(), gi.param(), gj.param())),
        // Power and custom kinds go through quadrature.
        _ => inner_product(|z| gi.eval(z), |z| gj.eval(z), on, rule),
    }
}

/// Gram matrix `G[i][j] = (g_i, g_j)` (closed form for pole kinds, quadrature
/// otherwise) and moment vector `m[i] = (f, g_i)`.
pub fn gram_and_moments(
    basis: &[BasisElement],
    f: &TargetFunction,
    on: Interval,
    rule: &QuadratureRule,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_distinct(basis)?;
    let n = basis.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = element_pair_inner(&basis[i], &basis[j], on, rule)?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let mut m = DVector::zeros(n);
    for i in 0..n {
        m[i] = inner_product(|z| f.eval(z), |z| basis[i].eval(z), on, rule)?;
    }
    Ok((g, m))
}

/// Coefficients of the L2-orthogonal projection of `f` onto the basis span.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: Vec<f64>,
    /// The Gram solve dropped near-null spectral modes (relative cutoff
    /// 1e-12); greedy bases get ill-conditioned and truncation is the
    /// standard stabilization.
    pub truncated: bool,
}

pub fn project(
    f: &TargetFunction,
    basis: &[BasisElement],
    on: Interval,
    rule: &QuadratureRule,
) -> Result<Projection> {
    let (g, m) = gram_and_moments(basis, f, on, rule)?;
    Ok(solve_spd_truncated(&g, &m))
}

/// Solves `G c = m` by symmetric eigendecomposition, discarding modes below
/// `1e-12 * lambda_max`.
pub fn solve_spd_truncated(g: &DMatrix<f64>, m: &DVector<f64>) -> Projection {
    let n = g.nrows();
    let eig = g.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-12 * lambda_max;
    let mut coeffs = DVector::zeros(n);
    let mut truncated = false;
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda > cutoff && lambda > 0.0 {
            let q = eig.eigenvectors.column(k);
            coeffs += q * (q.dot(m) / lambda);
        } else {
            truncated = true;
        }
    }
    Projection {
        coeffs: coeffs.iter().cloned().collect(),
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DictionarySpec, PoleWindow};

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn normalized_pole_has_unit_norm() {
        let fit = iv(1e-8, 1.0);
        let spec = DictionarySpec::NormalizedPole {
            window: PoleWindow::default(),
            fit,
        };
        let g = spec.element(-1.0).unwrap();
        let norm2 = inner_product(|z| g.eval(z), |z| g.eval(z), fit, &QuadratureRule::default())
            .unwrap();
        assert!((norm2 - 1.0).abs() < 1e-10, "norm^2 = {norm2}");
    }

    #[test]
    fn gram_of_single_normalized_pole_is_identity() {
        let fit = iv(1e-8, 1.0);
        let spec = DictionarySpec::NormalizedPole {
            window: PoleWindow::default(),
            fit,
        };
        let basis = vec![spec.element(-0.5).unwrap()];
        let f = TargetFunction::inverse_power(0.5).unwrap();
        let (g, _) = gram_and_moments(&basis, &f, fit, &QuadratureRule::default()).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_is_exactly_symmetric_and_matches_quadrature() {
        let on = iv(0.0, 1.0);
        let spec = DictionarySpec::PlainPole {
            window: PoleWindow::default(),
        };
        let basis = vec![spec.element(-1.0).unwrap(), spec.element(-2.0).unwrap()];
        let f = TargetFunction::custom(|z| z);
        let rule = QuadratureRule::default();
        let (g, _) = gram_and_moments(&basis, &f, on, &rule).unwrap();
        assert_eq!(g[(0, 1)], g[(1, 0)]);
        // Quadrature oracle for each entry.
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let q = inner_product(
                |z| basis[i].eval(z),
                |z| basis[j].eval(z),
                on,
                &rule,
            )
            .unwrap();
            assert!((g[(i, j)] - q).abs() < 1e-10, "entry ({i},{j})");
        }
        // The (0,1) entry against the hand closed form ln(4/3).
        assert!((g[(0, 1)] - (4.0f64 / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn near_coincident_poles_use_stable_series() {
        let (a, b) = (1e-2, 1.0);
        let p = -0.7;
        for eps in [1e-13, 1e-9, 1e-7] {
            let q = p + eps;
            let got = pole_pair_integral(a, b, p, q);
            // Reference by quadrature.
            let want = inner_product(
                |z| 1.0 / (z - p),
                |z| 1.0 / (z - q),
                iv(a, b),
                &QuadratureRule::default(),
            )
            .unwrap();
            assert!(
                (got - want).abs() < 1e-10 * want.abs(),
                "eps {eps}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn projection_recovers_basis_element() {
        let fit = iv(1e-6, 1.0);
        let spec = DictionarySpec::NormalizedPole {
            window: PoleWindow::default(),
            fit,
        };
        let basis = vec![
            spec.element(-0.3).unwrap(),
            spec.element(-2.0).unwrap(),
            spec.element(-11.0).unwrap(),
        ];
        let g0 = basis[0].clone();
        let f = TargetFunction::custom(move |z| g0.eval(z));
        let proj = project(&f, &basis, fit, &QuadratureRule::default()).unwrap();
        assert!((proj.coeffs[0] - 1.0).abs() < 1e-8, "{:?}", proj.coeffs);
        assert!(proj.coeffs[1].abs() < 1e-8);
        assert!(proj.coeffs[2].abs() < 1e-8);
    }

    #[test]
    fn projection_residual_is_orthogonal_to_span() {
        let fit = iv(1e-6, 1.0);
        let spec = DictionarySpec::NormalizedPole {
            window: PoleWindow::default(),
            fit,
        };
        let basis = vec![
            spec.element(-1.2e-4).unwrap(),
            spec.element(-1.7e-1).unwrap(),
            spec.element(-2.5e-9).unwrap(),
        ];
        let f = TargetFunction::inverse_power(0.5).unwrap();
        let rule = QuadratureRule::default();
        let proj = project(&f, &basis, fit, &rule).unwrap();
        let coeffs = proj.coeffs.clone();
        let b2 = basis.clone();
        let resid = move |z: f64| {
            f.eval(z)
                - coeffs
                    .iter()
                    .zip(&b2)
                    .map(|(c, g)| c * g.eval(z))
                    .sum::<f64>()
        };
        let f_norm = l2_norm(|z| z.powf(-0.5), fit, &rule).unwrap();
        for g in &basis {
            let ip = inner_product(&resid, |z| g.eval(z), fit, &rule).unwrap();
            assert!(ip.abs() < 1e-8 * f_norm, "({ip}) vs {f_norm}");
        }
    }

    #[test]
    fn projection_error_shrinks_with_nested_spans() {
        // Nested-spaces oracle: projecting onto more elements can only
        // reduce the L2 error.
        let fit = iv(1e-8, 1.0);
        let spec = DictionarySpec::NormalizedPole {
            window: PoleWindow::default(),
            fit,
        };
        let poles = [-1.2e-4, -1.7e-1, -2.5e-9];
        let f = TargetFunction::inverse_power(0.5).unwrap();
        let rule = QuadratureRule::default();
        let mut last = f64::INFINITY;
        for k in 1..=poles.len() {
            let basis: Vec<_> = poles[..k].iter().map(|&p| spec.element(p).unwrap()).collect();
            let proj = project(&f, &basis, fit, &rule).unwrap();
            let coeffs = proj.coeffs.clone();
            let basis2 = basis.clone();
            let f2 = f.clone();
            let err = l2_norm(
                move |z| {
                    f2.eval(z)
                        - coeffs
                            .iter()
                            .zip(&basis2)
                            .map(|(c, g)| c * g.eval(z))
                            .sum::<f64>()
                },
                fit,
                &rule,
            )
            .unwrap();
            assert!(err <= last + 1e-10, "k={k}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn sup_abs_finds_endpoint_maximum() {
        let on = iv(0.0, 1.0);
        let (v, z) = sup_abs(|z| z, on, &GridSpec::default());
        assert!((v - 1.0).abs() < 1e-12);
        assert!((z - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sup_abs_zero_residual() {
        let on = iv(1e-6, 1.0);
        let (v, _) = sup_abs(|_| 0.0, on, &GridSpec::default());
        assert_eq!(v, 0.0);
    }

    #[test]
    fn sup_abs_dominates_dense_grid() {
        // Refinement never loses the max seen by a much denser grid.
        let on = iv(1e-6, 1.0);
        let f = TargetFunction::inverse_power(0.5).unwrap();
        let h = move |z: f64| f.eval(z) - 2.0 / (z + 0.03) + 40.0 * (3.0 * z).sin() / (z + 1.0);
        let (v, _) = sup_abs(&h, on, &GridSpec::default());
        let dense = GridSpec {
            n_points: 100_000,
            refine_iters: 0,
        };
        let dense_max = dense
            .points(on)
            .iter()
            .map(|&z| h(z).abs())
            .fold(0.0f64, f64::max);
        assert!(v >= dense_max - 1e-9, "{v} vs dense {dense_max}");
    }

    #[test]
    fn norming_functional_reproduces_uniform_norm() {
        let on = iv(0.0, 1.0);
        let u = |z: f64| z - 0.5;
        let grid = GridSpec::default();
        // <F_u, u> = ||u||_inf.
        let v = norming_functional_apply(u, u, on, &grid).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        // argmax is z* = 1; g(z*) = 1/(1+1) = 0.5 with positive residual sign.
        let w = norming_functional_apply(u, |z| 1.0 / (z + 1.0), on, &grid).unwrap();
        assert!((w - 0.5).abs() < 1e-9);
    }

    #[test]
    fn norming_functional_signals_convergence() {
        let on = iv(0.0, 1.0);
        let r = norming_functional_apply(|_| 0.0, |_| 1.0, on, &GridSpec::default());
        assert!(matches!(r, Err(Error::ResidualNegligible)));
    }

    #[test]
    fn norming_functional_propagates_sign() {
        let on = iv(0.0, 1.0);
        let v =
            norming_functional_apply(|z| -(z + 1.0), |z| z + 2.0, on, &GridSpec::default())
                .unwrap();
        assert!(v < 0.0);
    }
}
