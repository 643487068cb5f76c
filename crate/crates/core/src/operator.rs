//! Applying rational approximants to SPD matrices via shifted solves, the
//! exact spectral oracle, and the uniform-error operator bound.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::analysis::{sup_abs, GridSpec};
use crate::domain::{
    pole_normalization, Approximant, ElementKind, Interval, PartialFraction, TargetFunction,
};
use crate::error::{Error, Result};

/// Dense symmetric positive definite matrix with its eigendecomposition
/// cached at construction (desk scale: everything dense, no Lanczos).
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry (to 1e-12 relative) and positive definiteness.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSpd(format!(
                "matrix is {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = mat.amax().max(f64::MIN_POSITIVE);
        for i in 0..mat.nrows() {
            for j in (i + 1)..mat.ncols() {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSpd(format!(
                        "asymmetric at ({i}, {j}): {} vs {}",
                        mat[(i, j)],
                        mat[(j, i)]
                    )));
                }
            }
        }
        let eig = mat.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        if !(lambda_min > 0.0) {
            return Err(Error::NotSpd(format!(
                "minimum eigenvalue {lambda_min} is not positive"
            )));
        }
        Ok(Self {
            mat,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.max()
    }

    /// Spectral interval `[lambda_min, lambda_max]`.
    pub fn spectral_interval(&self) -> Result<Interval> {
        Interval::new(self.lambda_min(), self.lambda_max())
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }
}

/// Converts a pole-basis approximant to partial-fraction form, folding the
/// normalization factors into the residues. Greedy approximants carry no
/// constant term, so `c0 = 0`.
pub fn to_partial_fraction(phi: &Approximant) -> Result<PartialFraction> {
    let mut residues = Vec::with_capacity(phi.len());
    let mut poles = Vec::with_capacity(phi.len());
    for (el, &c) in phi.basis().iter().zip(phi.coeffs()) {
        let residue = match el.kind() {
            ElementKind::PlainPole => c,
            ElementKind::NormalizedPole { fit } => c * pole_normalization(*fit, el.param()),
            ElementKind::NegativePower => {
                return Err(Error::UnsupportedConversion(
                    "negative-power elements are not rational",
                ))
            }
            ElementKind::Custom(_) => {
                return Err(Error::UnsupportedConversion(
                    "custom elements are not rational",
                ))
            }
        };
        residues.push(residue);
        poles.push(el.param());
    }
    PartialFraction::new(0.0, residues, poles)
}

/// `R(A)` as a reusable linear operator: one SPD factorization per shift,
/// shared across right-hand sides. Negative poles keep every shift SPD.
pub struct RationalOperator {
    c0: f64,
    terms: Vec<(f64, Cholesky<f64, nalgebra::Dyn>)>,
}

impl RationalOperator {
    pub fn new(a: &SpdMatrix, pf: &PartialFraction) -> Result<Self> {
        let n = a.dim();
        let mut terms = Vec::with_capacity(pf.poles().len());
        for (&r, &p) in pf.residues().iter().zip(pf.poles()) {
            let shifted = a.matrix() - DMatrix::identity(n, n) * p;
            let chol = Cholesky::new(shifted)
                .ok_or_else(|| Error::NotSpd(format!("factorization of A - ({p})I failed")))?;
            terms.push((r, chol));
        }
        Ok(Self { c0: pf.c0(), terms })
    }

    pub fn apply(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = b * self.c0;
        for (r, chol) in &self.terms {
            out += chol.solve(b) * *r;
        }
        out
    }
}

/// Applies `R(A) b = c0 b + sum_j r_j (A - p_j I)^{-1} b` via shifted SPD
/// solves.
pub fn apply_rational(
    a: &SpdMatrix,
    b: &DVector<f64>,
    pf: &PartialFraction,
) -> Result<DVector<f64>> {
    Ok(RationalOperator::new(a, pf)?.apply(b))
}

/// Exact `f(A) b` through the cached symmetric eigendecomposition
/// (`V f(D) V' b`), the oracle the rational application is judged against.
pub fn apply_exact(a: &SpdMatrix, b: &DVector<f64>, f: &TargetFunction) -> Result<DVector<f64>> {
    for &lambda in a.eigenvalues().iter() {
        if !f.eval(lambda).is_finite() {
            return Err(Error::TargetNotFinite { z: lambda });
        }
    }
    let vt_b = a.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        a.dim(),
        vt_b.iter()
            .zip(a.eigenvalues().iter())
            .map(|(x, &lambda)| x * f.eval(lambda)),
    );
    Ok(&a.eigenvectors * scaled)
}

/// Outcome of the uniform-error operator bound
/// `||f(A)b - R(A)b|| <= max_{[lambda_min, lambda_max]} |f - R| * ||b||`.
#[derive(Debug, Clone, Copy)]
pub struct OperatorBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides of the operator bound. The scalar error is taken
/// over the continuous spectral interval (never below its value at the
/// actual eigenvalues).
pub fn check_operator_bound(
    a: &SpdMatrix,
    b: &DVector<f64>,
    f: &TargetFunction,
    pf: &PartialFraction,
) -> Result<OperatorBound> {
    let exact = apply_exact(a, b, f)?;
    let rational = apply_rational(a, b, pf)?;
    let lhs = (&exact - rational).norm();

    let spectral = a.spectral_interval()?;
    let (mut sup, _) = sup_abs(
        |z| f.eval(z) - pf.eval(z),
        spectral,
        &GridSpec::default(),
    );
    for &lambda in a.eigenvalues().iter() {
        sup = sup.max((f.eval(lambda) - pf.eval(lambda)).abs());
    }
    let rhs = sup * b.norm();
    // The absolute floor covers the exactly-representable case: rhs is then
    // a true zero while lhs carries factorization round-off.
    let floor = 1e-12 * exact.norm().max(b.norm());
    Ok(OperatorBound {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-8) + floor,
    })
}
