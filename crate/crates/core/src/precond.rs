//! Desk-scale preconditioner benchmark: a 1-D spectral surrogate of the
//! fractional interface operator `S = mu^{-1} A^{-1/2} + K mu^{-1} A^{1/2}`
//! (with `A = -Laplacian + I` on an interval), rational approximation of
//! `S^{-1}` on the rescaled spectrum, and preconditioned Krylov solves of
//! `S x = b`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{gamma0, DictionarySpec, Interval, PartialFraction, PoleWindow, TargetFunction};
use crate::error::{Error, Result};
use crate::greedy::{
    run_improved_oga, run_wcga, MinimaxMode, PsoConfig, RunSettings, WcgaConfig,
};
use crate::operator::{apply_exact, to_partial_fraction, RationalOperator, SpdMatrix};

/// `A = (1/h^2) tridiag(-1, 2, -1) + I` on `n` interior points of the unit
/// interval with Dirichlet ends (`h = 1/(n+1)`), carrying the physical
/// parameters of the interface operator. The preconditioning question only
/// sees the spectrum of `A`, and this one spreads like `O(h^{-2})` just as
/// the real discretization does.
#[derive(Debug, Clone)]
pub struct SurrogateOperator {
    n: usize,
    a: SpdMatrix,
    mu: f64,
    k: f64,
}

impl SurrogateOperator {
    pub fn new(n: usize, mu: f64, k: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("grid size {n} too small")));
        }
        if !(mu > 0.0 && k > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "physical parameters must be positive (mu = {mu}, K = {k})"
            )));
        }
        let h = 1.0 / (n as f64 + 1.0);
        let scale = 1.0 / (h * h);
        let mat = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * scale + 1.0
            } else if i.abs_diff(j) == 1 {
                -scale
            } else {
                0.0
            }
        });
        Ok(Self {
            n,
            a: SpdMatrix::new(mat)?,
            mu,
            k,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.a
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// The scalar symbol of `S`: `f_S(z) = (z^{-1/2} + K z^{1/2}) / mu`.
    pub fn interface_symbol(&self) -> TargetFunction {
        let (mu, k) = (self.mu, self.k);
        TargetFunction::custom(move |z: f64| (z.powf(-0.5) + k * z.powf(0.5)) / mu)
    }

    /// The scalar symbol of `S^{-1}`: `mu (z^{-1/2} + K z^{1/2})^{-1}`.
    pub fn inverse_symbol(&self) -> TargetFunction {
        let (mu, k) = (self.mu, self.k);
        TargetFunction::custom(move |z: f64| mu / (z.powf(-0.5) + k * z.powf(0.5)))
    }

    /// Applies `S` spectrally.
    pub fn apply_interface(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        apply_exact(&self.a, x, &self.interface_symbol())
    }

    /// Applies the exact `S^{-1}` spectrally (the perfect preconditioner).
    pub fn apply_interface_inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        apply_exact(&self.a, x, &self.inverse_symbol())
    }
}

/// Rescaling constants: any `c >= lambda_max` maps the spectrum into
/// `(0, 1]` and `gamma0 = max(c^{-1/2}, K c^{1/2})` normalizes the rescaled
/// symbol's coefficients.
#[derive(Debug, Clone, Copy)]
pub struct RescaleParams {
    pub c: f64,
    pub gamma0: f64,
}

/// Builds the rescaled interface target on `(0, 1]` together with `gamma0`,
/// so that `mu (z^{-1/2} + K z^{1/2})^{-1} = (mu / gamma0) * f(z / c)`
/// identically.
pub fn rescale_target(mu: f64, k: f64, c: f64) -> Result<(TargetFunction, f64)> {
    let f = TargetFunction::rescaled_interface(mu, k, c)?;
    Ok((f, gamma0(k, c)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    Cg,
    Gmres,
}

/// Result of one preconditioned Krylov solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub method: KrylovMethod,
}

fn pcg(
    apply_s: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    precond: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_it: usize,
) -> Result<SolveReport> {
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
            method: KrylovMethod::Cg,
        });
    }
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut history = Vec::new();
    for it in 1..=max_it {
        let sp = apply_s(&p)?;
        let denom = p.dot(&sp);
        if denom <= 0.0 {
            // Indefinite direction: the operator pair is not SPD after all.
            return Err(Error::NotSpd(
                "conjugate-gradient direction became indefinite".into(),
            ));
        }
        let alpha = rz / denom;
        x += &p * alpha;
        r -= &sp * alpha;
        let res = r.norm() / b_norm;
        history.push(res);
        if res <= tol {
            return Ok(SolveReport {
                iterations: it,
                residual_history: history,
                converged: true,
                method: KrylovMethod::Cg,
            });
        }
        z = precond(&r);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        p = &z + &p * beta;
        rz = rz_new;
    }
    Ok(SolveReport {
        iterations: max_it,
        residual_history: history,
        converged: false,
        method: KrylovMethod::Cg,
    })
}

fn gmres(
    apply_s: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    precond: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_it: usize,
) -> Result<SolveReport> {
    // Right-preconditioned full GMRES: solve (S M) u = b, then x = M u.
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
            method: KrylovMethod::Gmres,
        });
    }
    let n = b.len();
    let m = max_it.min(n);
    let mut v: Vec<DVector<f64>> = vec![b / b_norm];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![0.0f64; m];
    let mut g = DVector::<f64>::zeros(m + 1);
    g[0] = b_norm;
    let mut history = Vec::new();
    let mut iterations = m;
    let mut converged = false;

    for j in 0..m {
        let mut w = apply_s(&precond(&v[j]))?;
        for i in 0..=j {
            h[(i, j)] = w.dot(&v[i]);
            w -= &v[i] * h[(i, j)];
        }
        h[(j + 1, j)] = w.norm();
        if h[(j + 1, j)] > 1e-14 * b_norm {
            v.push(&w / h[(j + 1, j)]);
        } else {
            v.push(DVector::zeros(n));
        }
        // Apply accumulated Givens rotations, then form the next one.
        for i in 0..j {
            let tmp = cs[i] * h[(i, j)] + sn[i] * h[(i + 1, j)];
            h[(i + 1, j)] = -sn[i] * h[(i, j)] + cs[i] * h[(i + 1, j)];
            h[(i, j)] = tmp;
        }
        let denom = (h[(j, j)] * h[(j, j)] + h[(j + 1, j)] * h[(j + 1, j)]).sqrt();
        if denom == 0.0 {
            cs[j] = 1.0;
            sn[j] = 0.0;
        } else {
            cs[j] = h[(j, j)] / denom;
            sn[j] = h[(j + 1, j)] / denom;
        }
        h[(j, j)] = cs[j] * h[(j, j)] + sn[j] * h[(j + 1, j)];
        h[(j + 1, j)] = 0.0;
        g[j + 1] = -sn[j] * g[j];
        g[j] *= cs[j];

        let res = g[j + 1].abs() / b_norm;
        history.push(res);
        if res <= tol {
            iterations = j + 1;
            converged = true;
            break;
        }
    }

    let k = if converged { iterations } else { m };
    // Back-substitute y from the triangular system H y = g.
    let mut y = DVector::<f64>::zeros(k);
    for i in (0..k).rev() {
        let mut s = g[i];
        for l in (i + 1)..k {
            s -= h[(i, l)] * y[l];
        }
        y[i] = if h[(i, i)].abs() > 0.0 { s / h[(i, i)] } else { 0.0 };
    }
    let mut u = DVector::<f64>::zeros(n);
    for (l, yl) in y.iter().enumerate() {
        u += &v[l] * *yl;
    }
    let _x = precond(&u);
    Ok(SolveReport {
        iterations: if converged { iterations } else { m },
        residual_history: history,
        converged,
        method: KrylovMethod::Gmres,
    })
}

/// Solves `S x = b` with the rational approximant of `S^{-1}` as the
/// preconditioner. Conjugate gradients when the approximant is SPD (all
/// residues and the constant term non-negative), GMRES otherwise; hitting
/// `max_it` yields a flagged report, not an error.
pub fn run_preconditioned_solve(
    op: &SurrogateOperator,
    approximant: &PartialFraction,
    rhs: &DVector<f64>,
    tol: f64,
    max_it: usize,
) -> Result<SolveReport> {
    let rational = RationalOperator::new(op.matrix(), approximant)?;
    let apply_s = |x: &DVector<f64>| op.apply_interface(x);
    let precond = |x: &DVector<f64>| rational.apply(x);
    let spd = approximant.c0() >= 0.0 && approximant.residues().iter().all(|&r| r >= 0.0);
    if spd {
        match pcg(&apply_s, &precond, rhs, tol, max_it) {
            Ok(rep) => Ok(rep),
            // A numerically indefinite pair still solves fine under GMRES.
            Err(Error::NotSpd(_)) => gmres(&apply_s, &precond, rhs, tol, max_it),
            Err(e) => Err(e),
        }
    } else {
        gmres(&apply_s, &precond, rhs, tol, max_it)
    }
}

/// Same solve with the exact spectral inverse as preconditioner (baseline).
pub fn run_solve_with_exact_inverse(
    op: &SurrogateOperator,
    rhs: &DVector<f64>,
    tol: f64,
    max_it: usize,
) -> Result<SolveReport> {
    let apply_s = |x: &DVector<f64>| op.apply_interface(x);
    let precond = |x: &DVector<f64>| op.apply_interface_inverse(x).expect("spectral inverse");
    pcg(&apply_s, &precond, rhs, tol, max_it)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAlgo {
    ImprovedOga,
    Wcga,
}

/// Numeric knobs of a sweep; the defaults mirror the benchmark setup
/// (residual tolerance 0.1 for the rational fits).
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub target_error: f64,
    pub max_terms: usize,
    pub pso: PsoConfig,
    pub krylov_tol: f64,
    pub krylov_max_it: usize,
    pub seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            target_error: 0.1,
            max_terms: 15,
            pso: PsoConfig {
                swarm_size: 24,
                iterations: 60,
                ..Default::default()
            },
            krylov_tol: 1e-8,
            krylov_max_it: 200,
            seed: 0,
        }
    }
}

/// One sweep cell: parameters, fit quality, and iteration counts against
/// the exact-inverse baseline.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub mu: f64,
    pub k: f64,
    pub n: usize,
    pub n_poles: usize,
    pub achieved_error: f64,
    pub poles: Vec<f64>,
    pub iterations: usize,
    pub iterations_exact: usize,
    pub delta_vs_exact: i64,
    pub method: KrylovMethod,
    pub has_negative_residue: bool,
    pub converged: bool,
    /// Set when the cell could not be completed; other fields are then
    /// best-effort.
    pub failure: Option<String>,
}

fn failed_cell(mu: f64, k: f64, n: usize, msg: String) -> SweepCell {
    SweepCell {
        mu,
        k,
        n,
        n_poles: 0,
        achieved_error: f64::NAN,
        poles: Vec::new(),
        iterations: 0,
        iterations_exact: 0,
        delta_vs_exact: 0,
        method: KrylovMethod::Gmres,
        has_negative_residue: false,
        converged: false,
        failure: Some(msg),
    }
}

/// Builds the rational approximant of the rescaled inverse symbol for one
/// parameter set, to the target error, and returns it in the original
/// (unrescaled) variable.
pub fn build_cell_approximant(
    op: &SurrogateOperator,
    algo: SweepAlgo,
    settings: &SweepSettings,
) -> Result<(PartialFraction, f64, usize)> {
    let a = op.matrix();
    // c = lambda_max exactly; the fit interval is spectrum-aware.
    let c = a.lambda_max();
    let (f_tilde, g0) = rescale_target(op.mu(), op.k(), c)?;
    let z_min = (a.lambda_min() / c).max(1e-300);
    let fit = Interval::new(z_min, 1.0)?;
    let window = PoleWindow::default();
    let run = RunSettings::default();

    let (basis, coeffs, achieved) = match algo {
        SweepAlgo::ImprovedOga => {
            let dict = DictionarySpec::NormalizedPole { window, fit };
            let pso = PsoConfig {
                seed: settings.seed,
                ..settings.pso
            };
            let run = RunSettings {
                target_uniform_error: Some(settings.target_error),
                ..run
            };
            let trace = run_improved_oga(
                &f_tilde,
                &dict,
                fit,
                settings.max_terms,
                &pso,
                MinimaxMode::EveryStep,
                &run,
            )?;
            let last = trace.iterations.last().ok_or_else(|| {
                Error::InvalidConfig("greedy run produced no iterations".into())
            })?;
            if last.uniform_error > settings.target_error {
                return Err(Error::InvalidConfig(format!(
                    "fit stalled at {:.3e} after {} terms",
                    last.uniform_error, settings.max_terms
                )));
            }
            (
                trace.final_approximant.basis().to_vec(),
                trace.final_approximant.coeffs().to_vec(),
                last.uniform_error,
            )
        }
        SweepAlgo::Wcga => {
            let dict = DictionarySpec::PlainPole { window };
            let cfg = WcgaConfig::new(settings.max_terms)
                .with_target_error(settings.target_error);
            let trace = run_wcga(&f_tilde, &dict, fit, &cfg, &run)?;
            let last = trace.iterations.last().ok_or_else(|| {
                Error::InvalidConfig("weak-greedy run produced no iterations".into())
            })?;
            if last.uniform_error > settings.target_error {
                return Err(Error::InvalidConfig(format!(
                    "fit stalled at {:.3e} after {} terms",
                    last.uniform_error, settings.max_terms
                )));
            }
            (
                trace.final_approximant.basis().to_vec(),
                trace.final_approximant.coeffs().to_vec(),
                last.uniform_error,
            )
        }
    };

    let phi = crate::domain::Approximant::new(basis, coeffs, fit)?;
    let pf_tilde = to_partial_fraction(&phi)?;
    // Undo the rescaling: f_target(z) = (mu / gamma0) * f_tilde(z / c).
    let pf = pf_tilde.rescaled(c, op.mu() / g0);
    let n_poles = pf.poles().len();
    Ok((pf, achieved, n_poles))
}

/// Runs the full parameter sweep. Individual cell failures are recorded
/// in-table and the sweep continues.
pub fn sweep(
    mu_list: &[f64],
    k_list: &[f64],
    n_list: &[usize],
    algo: SweepAlgo,
    settings: &SweepSettings,
) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &mu in mu_list {
        for &k in k_list {
            for &n in n_list {
                cells.push(run_cell(mu, k, n, algo, settings));
            }
        }
    }
    cells
}

fn run_cell(mu: f64, k: f64, n: usize, algo: SweepAlgo, settings: &SweepSettings) -> SweepCell {
    let op = match SurrogateOperator::new(n, mu, k) {
        Ok(op) => op,
        Err(e) => return failed_cell(mu, k, n, e.to_string()),
    };
    let (pf, achieved, n_poles) = match build_cell_approximant(&op, algo, settings) {
        Ok(v) => v,
        Err(e) => return failed_cell(mu, k, n, e.to_string()),
    };

    // One shared right-hand side per cell, deterministic in the seed.
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ (n as u64) << 32 ^ cells_tag(mu, k));
    let rhs = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);

    let exact = match run_solve_with_exact_inverse(&op, &rhs, settings.krylov_tol, settings.krylov_max_it)
    {
        Ok(r) => r,
        Err(e) => return failed_cell(mu, k, n, e.to_string()),
    };
    let rational =
        match run_preconditioned_solve(&op, &pf, &rhs, settings.krylov_tol, settings.krylov_max_it) {
            Ok(r) => r,
            Err(e) => return failed_cell(mu, k, n, e.to_string()),
        };

    SweepCell {
        mu,
        k,
        n,
        n_poles,
        achieved_error: achieved,
        poles: pf.poles().to_vec(),
        iterations: rational.iterations,
        iterations_exact: exact.iterations,
        delta_vs_exact: rational.iterations as i64 - exact.iterations as i64,
        method: rational.method,
        has_negative_residue: pf.residues().iter().any(|&r| r < 0.0),
        converged: rational.converged && exact.converged,
        failure: None,
    }
}

fn cells_tag(mu: f64, k: f64) -> u64 {
    mu.to_bits() ^ k.to_bits().rotate_left(17)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_spectrum_grows_like_inverse_h_squared() {
        let op16 = SurrogateOperator::new(16, 1.0, 1.0).unwrap();
        let op64 = SurrogateOperator::new(64, 1.0, 1.0).unwrap();
        assert!(op64.matrix().lambda_max() > 10.0 * op16.matrix().lambda_max() / 16.0 * 4.0);
        assert!(op16.matrix().lambda_min() > 1.0);
    }

    #[test]
    fn rescale_identity_holds_pointwise() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(mu, k) in &[(1.0, 1.0), (1e-2, 1e-4), (2.5, 7.0)] {
            let c = 1.0 + rng.random::<f64>() * 1e6;
            let (f_tilde, g0) = rescale_target(mu, k, c).unwrap();
            for _ in 0..100 {
                let z = rng.random::<f64>() * c;
                let direct = mu / (z.powf(-0.5) + k * z.powf(0.5));
                let via = mu / g0 * f_tilde.eval(z / c);
                assert!(
                    (direct - via).abs() <= 1e-12 * direct.abs().max(via.abs()),
                    "mu={mu} k={k} c={c} z={z}: {direct} vs {via}"
                );
            }
        }
    }

    #[test]
    fn gamma0_arms() {
        // c = 1, K = 1: gamma0 = 1 and the rescaled symbol is symmetric.
        let (_, g0) = rescale_target(1.0, 1.0, 1.0).unwrap();
        assert_eq!(g0, 1.0);
        // K = 1e-4, c = 1e6: arms are 1e-3 and 1e-1; the larger wins.
        let (_, g0) = rescale_target(1.0, 1e-4, 1e6).unwrap();
        assert_eq!(g0, 1e-1);
    }

    #[test]
    fn exact_inverse_preconditioner_converges_in_one_iteration() {
        let op = SurrogateOperator::new(32, 1.0, 1.0).unwrap();
        let rhs = DVector::from_fn(32, |i, _| (i as f64 * 0.7).sin() + 1.5);
        let rep = run_solve_with_exact_inverse(&op, &rhs, 1e-8, 50).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1, "history {:?}", rep.residual_history);
    }

    #[test]
    fn identity_preconditioner_is_much_slower_than_rational() {
        let op = SurrogateOperator::new(64, 1.0, 1.0).unwrap();
        let rhs = DVector::from_fn(64, |i, _| ((i * i) as f64 * 0.11).cos());
        let ident = run_preconditioned_solve(&op, &PartialFraction::identity(), &rhs, 1e-8, 400)
            .unwrap();

        let (pf, achieved, _) =
            build_cell_approximant(&op, SweepAlgo::Wcga, &SweepSettings::default()).unwrap();
        assert!(achieved <= 0.1);
        let rational = run_preconditioned_solve(&op, &pf, &rhs, 1e-8, 400).unwrap();
        assert!(rational.converged);
        assert!(
            rational.iterations < ident.iterations,
            "rational {} vs identity {}",
            rational.iterations,
            ident.iterations
        );
    }

    #[test]
    fn rational_preconditioner_stays_near_exact_baseline() {
        let op = SurrogateOperator::new(64, 1.0, 1.0).unwrap();
        let rhs = DVector::from_fn(64, |i, _| (i as f64).sqrt() - 3.0);
        let (pf, _, _) =
            build_cell_approximant(&op, SweepAlgo::ImprovedOga, &SweepSettings::default()).unwrap();
        let rational = run_preconditioned_solve(&op, &pf, &rhs, 1e-8, 400).unwrap();
        let exact = run_solve_with_exact_inverse(&op, &rhs, 1e-8, 400).unwrap();
        assert!(rational.converged && exact.converged);
        // Paired-run oracle: the exact inverse needs exactly one step and a
        // 0.1-accurate rational preconditioner stays within a few of it.
        assert_eq!(exact.iterations, 1);
        assert!(
            rational.iterations as i64 - exact.iterations as i64 <= 10,
            "rational {} vs exact {}",
            rational.iterations,
            exact.iterations
        );
    }

    #[test]
    fn single_sweep_cell_is_well_formed() {
        let cells = sweep(
            &[1.0],
            &[1.0],
            &[16],
            SweepAlgo::ImprovedOga,
            &SweepSettings::default(),
        );
        assert_eq!(cells.len(), 1);
        let cell = &cells[0];
        assert!(cell.failure.is_none(), "{:?}", cell.failure);
        assert!(cell.n_poles >= 1);
        assert!(cell.achieved_error <= 0.1);
        assert!(cell.poles.iter().all(|&p| p < 0.0));
        assert!(cell.converged);
    }

    #[test]
    fn gmres_and_cg_agree_on_an_easy_system() {
        let op = SurrogateOperator::new(24, 1.0, 1.0).unwrap();
        let rhs = DVector::from_fn(24, |i, _| 1.0 / (1.0 + i as f64));
        let apply_s = |x: &DVector<f64>| op.apply_interface(x);
        let ident = |x: &DVector<f64>| x.clone();
        let a = pcg(&apply_s, &ident, &rhs, 1e-10, 500).unwrap();
        let b = gmres(&apply_s, &ident, &rhs, 1e-10, 500).unwrap();
        assert!(a.converged && b.converged);
        // GMRES minimizes the residual, so it can only be at least as fast.
        assert!(b.iterations <= a.iterations + 1);
    }
}
