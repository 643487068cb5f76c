//! Best uniform-norm approximation from the span of a fixed basis.
//!
//! The coefficient subproblem is linear, so instead of a general nonlinear
//! optimizer it is solved exactly: the discretized minimax problem
//! `min_c max_i |f(z_i) - sum_j c_j g_j(z_i)|` is an epigraph linear program,
//! handled here through its dual by a two-phase revised simplex. The grid is
//! then refined around the current residual's maxima and the solve repeated
//! until the certified (continuous) maximum stabilizes.

use nalgebra::{DMatrix, DVector};

use crate::analysis::{self, abs_peaks, sup_abs, GridSpec};
use crate::domain::{BasisElement, Interval, TargetFunction};
use crate::error::{Error, Result};

/// A best-uniform coefficient problem over a fixed basis.
#[derive(Debug, Clone)]
pub struct MinimaxProblem<'a> {
    pub f: &'a TargetFunction,
    pub basis: &'a [BasisElement],
    pub on: Interval,
    /// Warm-start coefficients; the returned error never exceeds this
    /// approximant's uniform error.
    pub init: Option<Vec<f64>>,
    pub grid: GridSpec,
    pub tol: f64,
    /// Simplex pivot budget per discrete solve.
    pub max_exchange: usize,
}

impl<'a> MinimaxProblem<'a> {
    pub fn new(f: &'a TargetFunction, basis: &'a [BasisElement], on: Interval) -> Self {
        Self {
            f,
            basis,
            on,
            init: None,
            grid: GridSpec::default(),
            tol: 1e-10,
            max_exchange: 200,
        }
    }

    pub fn with_init(mut self, init: Vec<f64>) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxSolution {
    pub coeffs: Vec<f64>,
    /// Certified uniform error of `coeffs` over the continuous interval.
    pub error: f64,
    /// False when a pivot or refinement budget ran out first.
    pub converged: bool,
}

pub(crate) fn residual_value(
    f: &TargetFunction,
    basis: &[BasisElement],
    coeffs: &[f64],
    z: f64,
) -> f64 {
    f.eval(z)
        - coeffs
            .iter()
            .zip(basis)
            .map(|(c, g)| c * g.eval(z))
            .sum::<f64>()
}

/// Solves the linear minimax problem: returns coefficients and the certified
/// uniform error over the interval.
pub fn best_uniform_coeffs(prob: &MinimaxProblem) -> Result<MinimaxSolution> {
    analysis::check_distinct(prob.basis)?;
    prob.f.check_finite_on(prob.on)?;
    let n = prob.basis.len();

    let mut points = prob.grid.points(prob.on);
    if let Some(init) = &prob.init {
        // Seed the point set with the warm start's residual maxima: its
        // active set is a good guess for the optimal one.
        if init.len() == n {
            for (z, _) in abs_peaks(
                |z| residual_value(prob.f, prob.basis, init, z),
                prob.on,
                &prob.grid,
            ) {
                points.push(z);
            }
        }
    }

    let mut coeffs = vec![0.0; n];
    let mut certified = f64::INFINITY;
    let mut converged = false;
    const MAX_ROUNDS: usize = 10;

    for _round in 0..MAX_ROUNDS {
        points.sort_by(f64::total_cmp);
        points.dedup();

        let m = points.len();
        let mut g = DMatrix::zeros(m, n);
        let mut fv = DVector::zeros(m);
        for (i, &z) in points.iter().enumerate() {
            fv[i] = prob.f.eval(z);
            for (j, el) in prob.basis.iter().enumerate() {
                g[(i, j)] = el.eval(z);
            }
        }

        let outcome = discrete_minimax(&fv, &g, prob.max_exchange)?;
        coeffs = outcome.coeffs;
        let t_grid = (0..m)
            .map(|i| (fv[i] - (0..n).map(|j| coeffs[j] * g[(i, j)]).sum::<f64>()).abs())
            .fold(0.0f64, f64::max);

        let peaks = abs_peaks(
            |z| residual_value(prob.f, prob.basis, &coeffs, z),
            prob.on,
            &prob.grid,
        );
        certified = peaks.iter().map(|p| p.1).fold(0.0f64, f64::max);

        if !outcome.hit_cap && certified - t_grid <= prob.tol * certified.max(1.0) {
            converged = true;
            break;
        }
        for (z, _) in peaks {
            points.push(z);
        }
    }

    // The warm start is honored strictly: if refinement stopped short of it,
    // return the warm start itself.
    if let Some(init) = &prob.init {
        if init.len() == n {
            let (t_init, _) = sup_abs(
                |z| residual_value(prob.f, prob.basis, init, z),
                prob.on,
                &prob.grid,
            );
            if t_init < certified {
                return Ok(MinimaxSolution {
                    coeffs: init.clone(),
                    error: t_init,
                    converged,
                });
            }
        }
    }

    Ok(MinimaxSolution {
        coeffs,
        error: certified,
        converged,
    })
}

struct DiscreteOutcome {
    coeffs: Vec<f64>,
    hit_cap: bool,
}

/// Discrete minimax on a fixed point set, through the dual linear program
///
/// ```text
///   max f'w   s.t.  G'w = 0,  ||w||_1 = 1,
/// ```
///
/// whose optimal equality multipliers are exactly the primal coefficients
/// and error level. Variables are split `w = u - v` with `u, v >= 0`.
fn discrete_minimax(
    f_vals: &DVector<f64>,
    g: &DMatrix<f64>,
    max_exchange: usize,
) -> Result<DiscreteOutcome> {
    let m = g.nrows();
    let n = g.ncols();
    if m < n + 1 {
        return Err(Error::MinimaxFailure(format!(
            "need more grid points ({m}) than basis elements ({n})"
        )));
    }

    // Column equilibration keeps the simplex tolerances meaningful when
    // basis elements differ by orders of magnitude in scale.
    let col_scale: Vec<f64> = (0..n)
        .map(|j| {
            let s = g.column(j).amax();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let f_scale = f_vals.amax();
    if f_scale == 0.0 {
        return Ok(DiscreteOutcome {
            coeffs: vec![0.0; n],
            hit_cap: false,
        });
    }

    let nrows = n + 1;
    // Scaled column entries: structural column i (from u_i) is [ga(i); 1],
    // column m+i (from v_i) is [-ga(i); 1]; artificial k is e_k.
    let ga = |i: usize, j: usize| g[(i, j)] / col_scale[j];
    let n_struct = 2 * m;
    let fill_column = |j: usize, out: &mut DVector<f64>| {
        out.fill(0.0);
        if j < m {
            for k in 0..n {
                out[k] = ga(j, k);
            }
            out[n] = 1.0;
        } else if j < n_struct {
            let i = j - m;
            for k in 0..n {
                out[k] = -ga(i, k);
            }
            out[n] = 1.0;
        } else {
            out[j - n_struct] = 1.0;
        }
    };

    let mut d = DVector::zeros(nrows);
    d[n] = 1.0;

    let mut basis: Vec<usize> = (n_struct..n_struct + nrows).collect();

    let phase2_cost = |j: usize| -> f64 {
        if j < m {
            -f_vals[j] / f_scale
        } else if j < n_struct {
            f_vals[j - m] / f_scale
        } else {
            0.0
        }
    };
    let phase1_cost = |j: usize| -> f64 {
        if j < n_struct {
            0.0
        } else {
            -1.0
        }
    };

    const EPS_RC: f64 = 1e-11;
    const EPS_PIV: f64 = 1e-11;

    let mut col_buf = DVector::zeros(nrows);
    let mut hit_cap = false;

    for phase in 1..=2 {
        let cost: &dyn Fn(usize) -> f64 = if phase == 1 { &phase1_cost } else { &phase2_cost };
        let pivot_cap = if phase == 1 {
            50 * nrows + 1000
        } else {
            max_exchange
        };
        let mut pivots = 0usize;
        let mut stalled = 0usize;

        loop {
            // Fresh factorization each pivot; the basis is tiny.
            let mut b_mat = DMatrix::zeros(nrows, nrows);
            for (k, &j) in basis.iter().enumerate() {
                fill_column(j, &mut col_buf);
                b_mat.set_column(k, &col_buf);
            }
            let lu = b_mat.clone().lu();
            let x_b = lu
                .solve(&d)
                .ok_or_else(|| Error::MinimaxFailure("singular working basis".into()))?;
            let c_b = DVector::from_iterator(nrows, basis.iter().map(|&j| cost(j)));
            let y = b_mat
                .transpose()
                .lu()
                .solve(&c_b)
                .ok_or_else(|| Error::MinimaxFailure("singular working basis".into()))?;

            // Pricing; Dantzig normally, Bland's rule once pivots stall.
            let mut entering: Option<(usize, f64)> = None;
            let bland = stalled > 40;
            let in_basis = |j: usize| basis.contains(&j);
            let mut consider = |j: usize, rc: f64| {
                if rc > EPS_RC {
                    match (&entering, bland) {
                        (None, _) => entering = Some((j, rc)),
                        (Some(_), true) => {}
                        (Some((_, best)), false) if rc > *best => entering = Some((j, rc)),
                        _ => {}
                    }
                }
            };
            for i in 0..m {
                let mut s = 0.0;
                for k in 0..n {
                    s += y[k] * ga(i, k);
                }
                if !in_basis(i) {
                    consider(i, cost(i) - (s + y[n]));
                }
                if !in_basis(m + i) {
                    consider(m + i, cost(m + i) - (-s + y[n]));
                }
            }
            // Artificial columns never re-enter.

            let Some((e_col, _)) = entering else {
                // Optimal for this phase.
                if phase == 1 {
                    let infeas: f64 = basis
                        .iter()
                        .zip(x_b.iter())
                        .filter(|(j, _)| **j >= n_struct)
                        .map(|(_, x)| x.abs())
                        .sum();
                    if infeas > 1e-9 {
                        return Err(Error::MinimaxFailure(
                            "phase-1 infeasibility did not vanish".into(),
                        ));
                    }
                    drive_out_artificials(&mut basis, n_struct, nrows, m, &fill_column)?;
                }
                break;
            };

            fill_column(e_col, &mut col_buf);
            let w = lu
                .solve(&col_buf)
                .ok_or_else(|| Error::MinimaxFailure("singular working basis".into()))?;

            let mut leave: Option<(usize, f64)> = None;
            for k in 0..nrows {
                if w[k] > EPS_PIV {
                    let ratio = x_b[k].max(0.0) / w[k];
                    let better = match leave {
                        None => true,
                        Some((lk, lr)) => {
                            ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[k] < basis[lk])
                        }
                    };
                    if better {
                        leave = Some((k, ratio));
                    }
                }
            }
            let Some((leave_k, ratio)) = leave else {
                return Err(Error::MinimaxFailure("dual problem unbounded".into()));
            };

            if ratio <= 1e-13 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            basis[leave_k] = e_col;
            pivots += 1;
            if pivots >= pivot_cap {
                if phase == 1 {
                    return Err(Error::MinimaxFailure(
                        "phase-1 pivot budget exhausted".into(),
                    ));
                }
                hit_cap = true;
                break;
            }
        }
    }

    // Multipliers of the final basis give the primal solution.
    let mut b_mat = DMatrix::zeros(nrows, nrows);
    for (k, &j) in basis.iter().enumerate() {
        fill_column(j, &mut col_buf);
        b_mat.set_column(k, &col_buf);
    }
    let c_b = DVector::from_iterator(nrows, basis.iter().map(|&j| phase2_cost(j)));
    let y = b_mat
        .transpose()
        .lu()
        .solve(&c_b)
        .ok_or_else(|| Error::MinimaxFailure("singular final basis".into()))?;

    let coeffs: Vec<f64> = (0..n).map(|j| -y[j] * f_scale / col_scale[j]).collect();
    Ok(DiscreteOutcome { coeffs, hit_cap })
}

/// Pivots any artificial column still (degenerately) basic out of the basis.
fn drive_out_artificials(
    basis: &mut [usize],
    n_struct: usize,
    nrows: usize,
    m: usize,
    fill_column: &impl Fn(usize, &mut DVector<f64>),
) -> Result<()> {
    let mut col_buf = DVector::zeros(nrows);
    loop {
        let Some(pos) = basis.iter().position(|&j| j >= n_struct) else {
            return Ok(());
        };
        let mut b_mat = DMatrix::zeros(nrows, nrows);
        for (k, &j) in basis.iter().enumerate() {
            fill_column(j, &mut col_buf);
            b_mat.set_column(k, &col_buf);
        }
        let lu = b_mat.lu();
        let mut replaced = false;
        for j in 0..2 * m {
            if basis.contains(&j) {
                continue;
            }
            fill_column(j, &mut col_buf);
            let w = lu
                .solve(&col_buf)
                .ok_or_else(|| Error::MinimaxFailure("singular working basis".into()))?;
            if w[pos].abs() > 1e-9 {
                basis[pos] = j;
                replaced = true;
                break;
            }
        }
        if !replaced {
            return Err(Error::MinimaxFailure(
                "basis functions are linearly dependent on the grid".into(),
            ));
        }
    }
}
