//! Single-particle density matrix evolution: unitary steps, reset
//! specifications, the exact affine stroboscopic map and the brute-force
//! stroboscopic simulator.
//!
//! Entries follow `rho_ab = <a†_a a_b>` with `a(t) = U(t) a`, so one unitary
//! step reads `rho'_ab = sum U*_aa' U_bb' rho_a'b'`, i.e. `rho' = conj(U) rho U^T`.

use std::collections::HashMap;
use std::io::{self, Write};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::Float;
use crate::linalg::{
    check_square_finite, hermiticity_residual, unitarity_residual, CMatrix, CVector, HermitianEigen,
};
use crate::model::{QuadraticHamiltonian, Statistics};
use crate::tolerance;

/// Hermitian correlation matrix of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct Spdm {
    matrix: CMatrix,
    statistics: Statistics,
}

impl Spdm {
    pub fn new(matrix: CMatrix, statistics: Statistics) -> Result<Self> {
        check_square_finite(&matrix)?;
        let residual = hermiticity_residual(&matrix);
        if residual > tolerance::HERMITIAN_SPDM {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self { matrix, statistics })
    }

    /// Diagonal SPDM with the given occupations.
    pub fn diagonal(occupations: &[f64], statistics: Statistics) -> Result<Self> {
        let d = DVector::from_iterator(
            occupations.len(),
            occupations.iter().map(|&x| Complex64::new(x, 0.0)),
        );
        Self::new(CMatrix::from_diagonal(&d), statistics)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Eigenvalues within `[0, 1]` for fermions, `>= 0` for bosons, up to `slack`.
    pub fn is_physical(&self, slack: f64) -> Result<bool> {
        let eig = HermitianEigen::new(&self.matrix)?;
        let ev = eig.eigenvalues();
        let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(match self.statistics {
            Statistics::Fermion => lo >= -slack && hi <= 1.0 + slack,
            Statistics::Boson => lo >= -slack,
        })
    }
}

/// `conj(U) rho U^T` without further checks.
pub(crate) fn conjugate_by(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    u.map(|z| z.conj()) * rho * u.transpose()
}

/// One unitary step `rho'_ab = sum_{a'b'} U*_aa' U_bb' rho_a'b'`.
pub fn unitary_step(rho: &Spdm, u: &CMatrix) -> Result<Spdm> {
    if u.nrows() != rho.dim() || u.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: u.nrows(),
        });
    }
    let residual = unitarity_residual(u);
    if residual > tolerance::UNITARY {
        return Err(Error::NonUnitaryPropagator { residual });
    }
    Ok(Spdm {
        matrix: conjugate_by(u, &rho.matrix),
        statistics: rho.statistics,
    })
}

/// Reset set `R`, its complement `K` in row-major order, and reset values.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetSpec {
    dim: usize,
    reset: Vec<(usize, usize)>,
    kept: Vec<(usize, usize)>,
    /// Reset values on `R`; entries outside `R` are zero and unused.
    values: CMatrix,
    kept_index: HashMap<(usize, usize), usize>,
}

impl ResetSpec {
    /// `values` is a `dim x dim` matrix read only on the reset pairs.
    pub fn new<I>(dim: usize, reset_pairs: I, values: &CMatrix) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if values.nrows() != dim || values.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.nrows(),
            });
        }
        let mut mask = vec![false; dim * dim];
        for (a, b) in reset_pairs {
            if a >= dim || b >= dim {
                return Err(Error::IndexOutOfRange {
                    index: a.max(b),
                    dim,
                });
            }
            mask[a * dim + b] = true;
        }

        let mut reset = Vec::new();
        let mut kept = Vec::new();
        let mut stored = CMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                if mask[a * dim + b] {
                    if !mask[b * dim + a] {
                        return Err(Error::InvalidResetSpec(format!(
                            "pair ({a},{b}) is reset but ({b},{a}) is kept"
                        )));
                    }
                    let v = values[(a, b)];
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::NonFinite);
                    }
                    if (v - values[(b, a)].conj()).norm() > tolerance::HERMITIAN_SPDM {
                        return Err(Error::InvalidResetSpec(format!(
                            "reset values at ({a},{b}) and ({b},{a}) are not conjugate"
                        )));
                    }
                    stored[(a, b)] = v;
                    reset.push((a, b));
                } else {
                    kept.push((a, b));
                }
            }
        }
        // exact Hermiticity on R
        for &(a, b) in &reset {
            if a < b {
                let avg = 0.5 * (stored[(a, b)] + stored[(b, a)].conj());
                stored[(a, b)] = avg;
                stored[(b, a)] = avg.conj();
            } else if a == b {
                stored[(a, a)].im = 0.0;
            }
        }
        let kept_index = kept.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Ok(Self {
            dim,
            reset,
            kept,
            values: stored,
            kept_index,
        })
    }

    /// Repeated-interaction reset: `EE`, `SE` and `ES` are overwritten,
    /// with `rho_EE -> rho_env` and zero coherences.
    pub fn repeated_interaction(h: &QuadraticHamiltonian, rho_env: &CMatrix) -> Result<Self> {
        let values = embed_env_block(h, rho_env)?;
        let n = h.dim();
        let pairs = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| !(h.is_system(a) && h.is_system(b)));
        Self::new(n, pairs, &values)
    }

    /// Evolving-correlation reset: only `EE` is overwritten with `rho_env`.
    pub fn evolving_correlation(h: &QuadraticHamiltonian, rho_env: &CMatrix) -> Result<Self> {
        let values = embed_env_block(h, rho_env)?;
        let n = h.dim();
        let pairs = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| !h.is_system(a) && !h.is_system(b));
        Self::new(n, pairs, &values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reset_pairs(&self) -> &[(usize, usize)] {
        &self.reset
    }

    pub fn kept_pairs(&self) -> &[(usize, usize)] {
        &self.kept
    }

    pub fn reset_value(&self, a: usize, b: usize) -> Option<Complex64> {
        self.is_reset(a, b).then(|| self.values[(a, b)])
    }

    pub fn is_reset(&self, a: usize, b: usize) -> bool {
        a < self.dim && b < self.dim && !self.kept_index.contains_key(&(a, b))
    }

    pub fn kept_index(&self, a: usize, b: usize) -> Option<usize> {
        self.kept_index.get(&(a, b)).copied()
    }

    /// Matrix holding the reset values on `R` and zeros elsewhere.
    pub fn reset_matrix(&self) -> &CMatrix {
        &self.values
    }

    /// The kept vector `V_i = rho_{a_i b_i}`.
    pub fn extract_kept(&self, rho: &CMatrix) -> CVector {
        CVector::from_iterator(self.kept.len(), self.kept.iter().map(|&(a, b)| rho[(a, b)]))
    }

    /// Overwrites the entries of `R` with their reset values.
    pub fn apply_reset(&self, rho: &mut CMatrix) {
        for &(a, b) in &self.reset {
            rho[(a, b)] = self.values[(a, b)];
        }
    }

    /// Full SPDM from a kept vector, with reset values on `R`.
    pub fn assemble(&self, kept: &CVector) -> Result<CMatrix> {
        if kept.len() != self.kept.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kept.len(),
                found: kept.len(),
            });
        }
        let mut rho = self.values.clone();
        for (i, &(a, b)) in self.kept.iter().enumerate() {
            rho[(a, b)] = kept[i];
        }
        Ok(rho)
    }
}

fn embed_env_block(h: &QuadraticHamiltonian, rho_env: &CMatrix) -> Result<CMatrix> {
    let ne = h.env().len();
    if rho_env.nrows() != ne || rho_env.ncols() != ne {
        return Err(Error::DimensionMismatch {
            expected: ne,
            found: rho_env.nrows(),
        });
    }
    if ne > 0 {
        let residual = hermiticity_residual(rho_env);
        if residual > tolerance::HERMITIAN_SPDM {
            return Err(Error::NotHermitian { residual });
        }
        if !Spdm::new(rho_env.clone(), h.statistics())?
            .is_physical(tolerance::PHYSICAL_EIGENVALUE)?
        {
            return Err(Error::InvalidParameter(
                "reference environment block has an unphysical spectrum".into(),
            ));
        }
    }
    let mut values = CMatrix::zeros(h.dim(), h.dim());
    for (a, &x) in h.env().iter().enumerate() {
        for (b, &y) in h.env().iter().enumerate() {
            values[(x, y)] = rho_env[(a, b)];
        }
    }
    Ok(values)
}

pub fn ri_reset_spec(h: &QuadraticHamiltonian, rho_env: &CMatrix) -> Result<ResetSpec> {
    ResetSpec::repeated_interaction(h, rho_env)
}

pub fn ec_reset_spec(h: &QuadraticHamiltonian, rho_env: &CMatrix) -> Result<ResetSpec> {
    ResetSpec::evolving_correlation(h, rho_env)
}

/// Exact one-cycle update `V[n+1] = D V[n] + C` of the kept entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub d: CMatrix,
    pub c: CVector,
    pub tau: f64,
}

impl AffineMap {
    pub fn new(h: &QuadraticHamiltonian, spec: &ResetSpec, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step duration must be positive and finite, got {tau}"
            )));
        }
        if spec.dim() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: spec.dim(),
            });
        }
        Ok(Self::from_propagator(&h.propagator(tau)?, spec, tau))
    }

    /// `D_ij = U*_{a_i a_j} U_{b_i b_j}`, `C_i = sum_R U*_{a_i a'} U_{b_i b'} rho0_{a'b'}`.
    pub fn from_propagator(u: &CMatrix, spec: &ResetSpec, tau: f64) -> Self {
        let kept = spec.kept_pairs();
        let uc = u.map(|z| z.conj());
        let d = CMatrix::from_fn(kept.len(), kept.len(), |i, j| {
            let (ai, bi) = kept[i];
            let (aj, bj) = kept[j];
            uc[(ai, aj)] * u[(bi, bj)]
        });
        let w = conjugate_by(u, spec.reset_matrix());
        let c = spec.extract_kept(&w);
        Self { d, c, tau }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: v.len(),
            });
        }
        Ok(&self.d * v + &self.c)
    }

    /// Iterates the map `n_steps` times, recording every kept vector.
    pub fn iterate(&self, v0: &CVector, n_steps: usize) -> Result<StepTrace> {
        if v0.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: v0.len(),
            });
        }
        let mut v = v0.clone();
        let mut history = Vec::with_capacity(n_steps + 1);
        history.push(v.clone());
        let mut next = CVector::zeros(v.len());
        for _ in 0..n_steps {
            next.copy_from(&self.c);
            next.gemv(
                Complex64::new(1.0, 0.0),
                &self.d,
                &v,
                Complex64::new(1.0, 0.0),
            );
            std::mem::swap(&mut v, &mut next);
            history.push(v.clone());
        }
        Ok(StepTrace::new(self.tau, history, None))
    }
}

pub fn build_affine_map(h: &QuadraticHamiltonian, spec: &ResetSpec, tau: f64) -> Result<AffineMap> {
    AffineMap::new(h, spec, tau)
}

pub fn iterate_map(map: &AffineMap, v0: &CVector, n_steps: usize) -> Result<StepTrace> {
    map.iterate(v0, n_steps)
}

/// Stroboscopic history of the kept vector, optionally with full SPDMs.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub tau: f64,
    pub times: Vec<f64>,
    pub kept: Vec<CVector>,
    pub snapshots: Option<Vec<CMatrix>>,
}

impl StepTrace {
    fn new(tau: f64, kept: Vec<CVector>, snapshots: Option<Vec<CMatrix>>) -> Self {
        let times = (0..kept.len()).map(|n| n as f64 * tau).collect();
        Self {
            tau,
            times,
            kept,
            snapshots,
        }
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// One kept component over time.
    pub fn component(&self, index: usize) -> Vec<Complex64> {
        self.kept.iter().map(|v| v[index]).collect()
    }

    /// Largest entrywise difference in the kept vectors of two traces.
    pub fn max_deviation(&self, other: &StepTrace) -> f64 {
        self.kept
            .iter()
            .zip(&other.kept)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, rho_a_b_re, rho_a_b_im, ...`.
    pub fn write_csv<W: Write>(&self, out: &mut W, pairs: &[(usize, usize)]) -> io::Result<()> {
        write!(out, "t")?;
        for (a, b) in pairs {
            write!(out, ",rho_{a}_{b}_re,rho_{a}_{b}_im")?;
        }
        writeln!(out)?;
        for (t, v) in self.times.iter().zip(&self.kept) {
            write!(out, "{}", Float(*t))?;
            for z in v.iter() {
                write!(out, ",{},{}", Float(z.re), Float(z.im))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Reference simulator: full unitary step, then explicit overwrite of `R`.
pub fn brute_force_stroboscopic(
    h: &QuadraticHamiltonian,
    spec: &ResetSpec,
    rho_init: &Spdm,
    tau: f64,
    n_steps: usize,
    keep_snapshots: bool,
) -> Result<StepTrace> {
    if rho_init.dim() != h.dim() || spec.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho_init.dim().min(spec.dim()),
        });
    }
    let u = h.propagator(tau)?;
    let mut rho = rho_init.matrix().clone();
    let mut kept = vec![spec.extract_kept(&rho)];
    let mut snaps = keep_snapshots.then(|| vec![rho.clone()]);
    for _ in 0..n_steps {
        rho = conjugate_by(&u, &rho);
        spec.apply_reset(&mut rho);
        kept.push(spec.extract_kept(&rho));
        if let Some(s) = snaps.as_mut() {
            s.push(rho.clone());
        }
    }
    Ok(StepTrace::new(tau, kept, snaps))
}
