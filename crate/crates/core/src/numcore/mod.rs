//! Dense complex matrices and hermitian spectral helpers.

pub mod mp;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const HERMITIAN_REL_TOL: f64 = 1e-12;

/// Square matrix that is hermitian up to round-off.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square_finite(&m)?;
        let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
        let n = m.nrows();
        for j in 0..n {
            for k in j..n {
                if (m[(j, k)] - m[(k, j)].conj()).norm() > HERMITIAN_REL_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not hermitian at ({j},{k})"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Builds the matrix from the upper triangle, mirroring it below the diagonal.
    pub fn from_upper(mut m: CMatrix) -> Result<Self> {
        check_square_finite(&m)?;
        let n = m.nrows();
        for j in 0..n {
            m[(j, j)] = Complex64::new(m[(j, j)].re, 0.0);
            for k in j + 1..n {
                m[(k, j)] = m[(j, k)].conj();
            }
        }
        Ok(Self(m))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            d.len(),
            d.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    fn hermitized(&self) -> CMatrix {
        (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0)
    }
}

fn check_square_finite(m: &CMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("matrix entry"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigReport {
    pub eigenvalues: Vec<f64>,
    pub min_eig: f64,
    pub psd: bool,
    pub tolerance: f64,
}

impl EigReport {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }
}

/// Ascending eigenvalues and eigenvectors of the hermitized matrix.
fn herm_eigen(m: &HermitianMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.hermitized().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.dim();
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

fn psd_rule(min_eig: f64, radius: f64, tol: f64) -> bool {
    min_eig >= -tol * radius.max(1.0)
}

pub fn herm_min_eig(m: &HermitianMatrix, tol: f64) -> Result<EigReport> {
    let (eigenvalues, _) = herm_eigen(m);
    let min_eig = eigenvalues[0];
    let radius = eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(EigReport {
        psd: psd_rule(min_eig, radius, tol),
        min_eig,
        eigenvalues,
        tolerance: tol,
    })
}

/// Hermitian square root; eigenvalues below `tol` are clamped to zero.
pub fn psd_sqrt(m: &HermitianMatrix, tol: f64) -> Result<CMatrix> {
    let (vals, vecs) = herm_eigen(m);
    let radius = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !psd_rule(vals[0], radius, tol) {
        return Err(Error::NotPsd { min_eig: vals[0] });
    }
    let roots = CVector::from_iterator(
        vals.len(),
        vals.iter()
            .map(|&x| Complex64::new(if x <= tol { 0.0 } else { x.sqrt() }, 0.0)),
    );
    let s = &vecs * CMatrix::from_diagonal(&roots) * vecs.adjoint();
    Ok((&s + s.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Smallest `C >= 0` with `C*den - num` positive semidefinite up to `-tol`.
///
/// Returns `None` when no finite constant works, which happens when `num`
/// reaches outside the range of `den`.
pub fn generalized_scale_bound(
    num: &HermitianMatrix,
    den: &HermitianMatrix,
    tol: f64,
) -> Result<Option<f64>> {
    if num.dim() != den.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            num.dim(),
            den.dim()
        )));
    }
    let a = num.hermitized();
    let b = den.hermitized();
    let feasible = |c: f64| -> bool {
        let m = HermitianMatrix(&b * Complex64::new(c, 0.0) - &a);
        let (vals, _) = herm_eigen(&m);
        vals[0] >= -tol
    };
    if feasible(0.0) {
        return Ok(Some(0.0));
    }

    // Generalized eigenvalues on the numerical range of `den`.
    let (dvals, dvecs) = herm_eigen(den);
    let keep: Vec<usize> = (0..dvals.len()).filter(|&i| dvals[i] > tol).collect();
    let mut hint = None;
    if !keep.is_empty() {
        let mut w = CMatrix::zeros(den.dim(), keep.len());
        for (j, &i) in keep.iter().enumerate() {
            let s = Complex64::new(1.0 / dvals[i].sqrt(), 0.0);
            w.set_column(j, &(dvecs.column(i) * s));
        }
        let reduced = HermitianMatrix(w.adjoint() * &a * &w);
        let (rvals, _) = herm_eigen(&reduced);
        let c = rvals[rvals.len() - 1].max(0.0);
        if feasible(c) {
            hint = Some(c);
        }
    }
    if let Some(c) = hint {
        return Ok(Some(c));
    }

    let mut hi = 1.0f64;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e15 {
            return Ok(None);
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(Some(hi))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |a, &x| a.max(x))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}
