//! Dense Hermitian linear algebra: eigendecomposition, propagators and
//! survival amplitudes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |m - m†|` divided by `max(1, max |m|)`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut res: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            res = res.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    res / max_abs(m).max(1.0)
}

/// `max |U†U - I|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let n = prod.nrows();
    let mut res: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            res = res.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    res
}

pub(crate) fn check_square_finite(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Validates a Hermitian input and returns its exact symmetrization `(M + M†)/2`.
pub fn hermitian_checked(m: &CMatrix) -> Result<CMatrix> {
    check_square_finite(m)?;
    let residual = hermiticity_residual(m);
    if residual > tolerance::HERMITIAN_INPUT {
        return Err(Error::NotHermitian { residual });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Spectral data `M = V diag(eps) V†` of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let m = hermitian_checked(m)?;
        let n = m.nrows();

        let (values, vectors) = if m.iter().all(|z| z.im == 0.0) {
            // real symmetric input: the real solver is several times faster
            let re = m.map(|z| z.re);
            let eig = SymmetricEigen::try_new(re, EIGEN_EPS, EIGEN_MAX_ITER)
                .ok_or(Error::ConvergenceFailure)?;
            let vecs = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            (eig.eigenvalues, vecs)
        } else {
            let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
                .ok_or(Error::ConvergenceFailure)?;
            (eig.eigenvalues, eig.eigenvectors)
        };

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
        let mut eigenvectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &vectors.column(src));
        }

        let out = Self {
            eigenvalues,
            eigenvectors,
        };
        let scale = max_abs(&m).max(f64::MIN_POSITIVE);
        if out.reconstruction_residual(&m) > tolerance::RECONSTRUCTION * scale {
            return Err(Error::ConvergenceFailure);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors `|mu>`.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn reconstruct(&self) -> CMatrix {
        let lambda = CMatrix::from_diagonal(&self.eigenvalues.map(|e| Complex64::new(e, 0.0)));
        &self.eigenvectors * lambda * self.eigenvectors.adjoint()
    }

    pub fn reconstruction_residual(&self, m: &CMatrix) -> f64 {
        max_abs(&(self.reconstruct() - m))
    }

    /// `U(t) = V diag(exp(-i eps t)) V†`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for mu in 0..n {
            let phase = Complex64::from_polar(1.0, -self.eigenvalues[mu] * t);
            scaled.column_mut(mu).iter_mut().for_each(|z| *z *= phase);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// Overlaps `|<mu|site>|^2`, normalized to sum to one.
    pub fn site_weights(&self, site: usize) -> Result<Vec<f64>> {
        if site >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: site,
                dim: self.dim(),
            });
        }
        let w: Vec<f64> = self
            .eigenvectors
            .row(site)
            .iter()
            .map(|z| z.norm_sqr())
            .collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }

    /// `<site| exp(-iMt) |site> = sum_mu |<mu|site>|^2 exp(-i eps_mu t)`.
    pub fn survival_amplitude(&self, t: f64, site: usize) -> Result<Complex64> {
        let w = self.site_weights(site)?;
        Ok(spectral_sum(&w, self.eigenvalues.as_slice(), t))
    }
}

pub(crate) fn spectral_sum(weights: &[f64], energies: &[f64], t: f64) -> Complex64 {
    weights
        .iter()
        .zip(energies)
        .map(|(&w, &e)| Complex64::from_polar(w, -e * t))
        .sum()
}

pub fn eig_hermitian(m: &CMatrix) -> Result<HermitianEigen> {
    HermitianEigen::new(m)
}

pub fn propagator(m: &CMatrix, t: f64) -> Result<CMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time must be finite, got {t}"
        )));
    }
    Ok(HermitianEigen::new(m)?.propagator(t))
}

pub fn survival_amplitude(m: &CMatrix, t: f64, site: usize) -> Result<Complex64> {
    if site >= m.nrows() {
        return Err(Error::IndexOutOfRange {
            index: site,
            dim: m.nrows(),
        });
    }
    HermitianEigen::new(m)?.survival_amplitude(t, site)
}
