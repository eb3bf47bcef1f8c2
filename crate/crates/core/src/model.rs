//! Quadratic Hamiltonians with a system/environment split, the single-level
//! plus tight-binding-chain bath, and bath spectral data.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_checked, CMatrix, HermitianEigen};

/// Truncated chain length used when none is given.
pub const DEFAULT_BATH_SIZE: usize = 400;

/// Default Gaussian broadening of the spectral density, in units of the hopping.
pub const DEFAULT_BROADENING: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Fermion,
    Boson,
}

/// Parameters of a single level coupled to the end of an open tight-binding chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub omega0: f64,
    pub hopping: f64,
    pub coupling: f64,
    pub n_bath: usize,
}

impl ChainParams {
    pub fn new(omega0: f64, hopping: f64, coupling: f64, n_bath: usize) -> Self {
        Self {
            omega0,
            hopping,
            coupling,
            n_bath,
        }
    }

    /// Time after which reflections off the far end of the truncated chain
    /// can return to the system site, `N_b / (2J)`.
    pub fn revival_time(&self) -> f64 {
        self.n_bath as f64 / (2.0 * self.hopping)
    }

    fn validate(&self) -> Result<()> {
        if self.n_bath < 2 {
            return Err(Error::InvalidParameter(format!(
                "chain needs at least 2 bath sites, got {}",
                self.n_bath
            )));
        }
        if !(self.hopping > 0.0 && self.hopping.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "hopping must be positive and finite, got {}",
                self.hopping
            )));
        }
        if !self.omega0.is_finite() || !self.coupling.is_finite() {
            return Err(Error::InvalidParameter(
                "level energy and coupling must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Single-particle matrix `M` of `H = sum a†_a M_ab a_b` with an S/E split.
#[derive(Debug)]
pub struct QuadraticHamiltonian {
    matrix: CMatrix,
    system: Vec<usize>,
    env: Vec<usize>,
    statistics: Statistics,
    chain: Option<ChainParams>,
    eigen: OnceLock<HermitianEigen>,
}

impl Clone for QuadraticHamiltonian {
    fn clone(&self) -> Self {
        let eigen = OnceLock::new();
        if let Some(e) = self.eigen.get() {
            let _ = eigen.set(e.clone());
        }
        Self {
            matrix: self.matrix.clone(),
            system: self.system.clone(),
            env: self.env.clone(),
            statistics: self.statistics,
            chain: self.chain,
            eigen,
        }
    }
}

impl QuadraticHamiltonian {
    /// Validates and symmetrizes a user matrix with explicit index sets.
    pub fn new(
        matrix: CMatrix,
        system: Vec<usize>,
        env: Vec<usize>,
        statistics: Statistics,
    ) -> Result<Self> {
        let matrix = hermitian_checked(&matrix)?;
        let n = matrix.nrows();
        if system.is_empty() {
            return Err(Error::InvalidParameter("system index set is empty".into()));
        }
        let mut owner = vec![0u8; n];
        for &i in system.iter().chain(env.iter()) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, dim: n });
            }
            if owner[i] != 0 {
                return Err(Error::OverlappingPartition(i));
            }
            owner[i] = 1;
        }
        if let Some(gap) = owner.iter().position(|&o| o == 0) {
            return Err(Error::IndexGap(gap));
        }
        Ok(Self {
            matrix,
            system,
            env,
            statistics,
            chain: None,
            eigen: OnceLock::new(),
        })
    }

    /// `M = w0|0><0| - J sum_j (|j><j+1| + h.c.) + t_c (|0><1| + h.c.)`,
    /// sites `1..=N_b` forming the bath.
    pub fn single_level_chain(params: ChainParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_bath + 1;
        let mut m = CMatrix::zeros(n, n);
        m[(0, 0)] = Complex64::new(params.omega0, 0.0);
        m[(0, 1)] = Complex64::new(params.coupling, 0.0);
        m[(1, 0)] = Complex64::new(params.coupling, 0.0);
        for j in 1..params.n_bath {
            m[(j, j + 1)] = Complex64::new(-params.hopping, 0.0);
            m[(j + 1, j)] = Complex64::new(-params.hopping, 0.0);
        }
        let mut h = Self::new(m, vec![0], (1..n).collect(), Statistics::Fermion)?;
        h.chain = Some(params);
        Ok(h)
    }

    pub fn with_statistics(mut self, statistics: Statistics) -> Self {
        self.statistics = statistics;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn system(&self) -> &[usize] {
        &self.system
    }

    pub fn env(&self) -> &[usize] {
        &self.env
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn chain(&self) -> Option<&ChainParams> {
        self.chain.as_ref()
    }

    pub fn revival_time(&self) -> Option<f64> {
        self.chain.map(|c| c.revival_time())
    }

    pub fn is_system(&self, i: usize) -> bool {
        self.system.contains(&i)
    }

    /// The system index when `|S| = 1`.
    pub fn system_level(&self) -> Result<usize> {
        match self.system.as_slice() {
            [s] => Ok(*s),
            other => Err(Error::MultiLevelSystemUnsupported(other.len())),
        }
    }

    /// Eigendecomposition of `M`, computed on first use and shared afterwards.
    pub fn eigen(&self) -> Result<&HermitianEigen> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = HermitianEigen::new(&self.matrix)?;
        Ok(self.eigen.get_or_init(|| e))
    }

    pub fn propagator(&self, t: f64) -> Result<CMatrix> {
        Ok(self.eigen()?.propagator(t))
    }

    /// `sum_{x in E} |M_0x|^2` in the site basis.
    pub fn env_coupling_weight(&self) -> Result<f64> {
        let s = self.system_level()?;
        Ok(self
            .env
            .iter()
            .map(|&x| self.matrix[(s, x)].norm_sqr())
            .sum())
    }

    /// The environment block `M_EE` in the order of `env()`.
    pub fn env_block(&self) -> CMatrix {
        let ne = self.env.len();
        CMatrix::from_fn(ne, ne, |a, b| self.matrix[(self.env[a], self.env[b])])
    }
}

/// Bath modes `M_EE|k> = w_k|k>` and couplings `g_k = sum_x M_0x <x|k>`.
#[derive(Debug, Clone)]
pub struct BathSpectrum {
    mode_energies: Vec<f64>,
    couplings: Vec<Complex64>,
    /// Columns are bath eigenvectors in the local order of the environment indices.
    modes: CMatrix,
}

impl BathSpectrum {
    pub fn new(h: &QuadraticHamiltonian) -> Result<Self> {
        let s = h.system_level()?;
        let ne = h.env().len();
        if ne == 0 {
            return Ok(Self {
                mode_energies: Vec::new(),
                couplings: Vec::new(),
                modes: CMatrix::zeros(0, 0),
            });
        }
        let eig = HermitianEigen::new(&h.env_block())?;
        let modes = eig.eigenvectors().clone();
        let couplings = (0..ne)
            .map(|k| {
                h.env()
                    .iter()
                    .enumerate()
                    .map(|(a, &x)| h.matrix()[(s, x)] * modes[(a, k)])
                    .sum()
            })
            .collect();
        Ok(Self {
            mode_energies: eig.eigenvalues().as_slice().to_vec(),
            couplings,
            modes,
        })
    }

    pub fn len(&self) -> usize {
        self.mode_energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mode_energies.is_empty()
    }

    pub fn mode_energies(&self) -> &[f64] {
        &self.mode_energies
    }

    pub fn couplings(&self) -> &[Complex64] {
        &self.couplings
    }

    pub fn modes(&self) -> &CMatrix {
        &self.modes
    }

    /// `[min w_k, max w_k]`, `None` for an empty bath.
    pub fn band_edges(&self) -> Option<(f64, f64)> {
        Some((*self.mode_energies.first()?, *self.mode_energies.last()?))
    }

    /// `sum_k |g_k|^2`.
    pub fn coupling_weight(&self) -> f64 {
        self.couplings.iter().map(|g| g.norm_sqr()).sum()
    }

    /// Gaussian-broadened `J(w) = sum_k |g_k|^2 delta(w - w_k)`.
    pub fn spectral_density(&self, omega: f64, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "broadening must be positive, got {sigma}"
            )));
        }
        let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
        Ok(self
            .mode_energies
            .iter()
            .zip(&self.couplings)
            .map(|(&w, g)| {
                let z = (omega - w) / sigma;
                g.norm_sqr() * norm * (-0.5 * z * z).exp()
            })
            .sum())
    }

    /// Occupations `n_k` of the bath modes, checked against the statistics.
    pub fn occupations(
        &self,
        profile: &OccupationProfile,
        statistics: Statistics,
    ) -> Result<Vec<f64>> {
        self.mode_energies
            .iter()
            .map(|&w| {
                let n = profile.eval(w, statistics)?;
                check_occupation(n, statistics)?;
                Ok(n)
            })
            .collect()
    }

    /// Reference environment block, diagonal in the bath eigenbasis with
    /// entries `n_k`, written in the site basis of the environment.
    ///
    /// `<a†_e a_e'> = sum_k n_k conj(<e|k>) <e'|k>`.
    pub fn reference_block(&self, occupations: &[f64]) -> Result<CMatrix> {
        if occupations.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: occupations.len(),
            });
        }
        let n = DVector::from_iterator(
            occupations.len(),
            occupations.iter().map(|&x| Complex64::new(x, 0.0)),
        );
        let block = &self.modes * CMatrix::from_diagonal(&n) * self.modes.adjoint();
        Ok(block.map(|z| z.conj()))
    }
}

pub fn bath_spectrum(h: &QuadraticHamiltonian) -> Result<BathSpectrum> {
    BathSpectrum::new(h)
}

fn check_occupation(n: f64, statistics: Statistics) -> Result<()> {
    let ok = match statistics {
        Statistics::Fermion => (0.0..=1.0).contains(&n),
        Statistics::Boson => n >= 0.0 && n.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "occupation {n} is not valid for {statistics:?} statistics"
        )))
    }
}

/// Mode occupations of the reference environment state as a function of energy.
#[derive(Debug, Clone, PartialEq)]
pub enum OccupationProfile {
    Empty,
    Constant(f64),
    /// `1 / (exp(beta (w - mu)) + 1)`.
    FermiDirac {
        beta: f64,
        mu: f64,
    },
    /// `1 / (exp(beta (w - mu)) - 1)`, requires `w > mu`.
    BoseEinstein {
        beta: f64,
        mu: f64,
    },
    /// Piecewise-linear in `(w, n)` points sorted by `w`, clamped outside.
    Tabulated(Vec<(f64, f64)>),
}

impl OccupationProfile {
    pub fn eval(&self, omega: f64, statistics: Statistics) -> Result<f64> {
        let n = match self {
            Self::Empty => 0.0,
            Self::Constant(n) => *n,
            Self::FermiDirac { beta, mu } => 1.0 / ((beta * (omega - mu)).exp() + 1.0),
            Self::BoseEinstein { beta, mu } => {
                if omega <= *mu {
                    return Err(Error::InvalidParameter(format!(
                        "Bose occupation needs w > mu, got w = {omega}, mu = {mu}"
                    )));
                }
                1.0 / (beta * (omega - mu)).exp_m1()
            }
            Self::Tabulated(points) => interpolate(points, omega)?,
        };
        if !n.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "occupation at w = {omega} is not finite"
            )));
        }
        check_occupation(n, statistics)?;
        Ok(n)
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> Result<f64> {
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidParameter("empty occupation table".into())),
    };
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter(
            "occupation table energies must be strictly increasing".into(),
        ));
    }
    if x <= first.0 {
        return Ok(first.1);
    }
    if x >= last.0 {
        return Ok(last.1);
    }
    let i = points.partition_point(|p| p.0 <= x);
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn isolated_level_without_bath() {
        let m = CMatrix::from_element(1, 1, c(0.7));
        let h = QuadraticHamiltonian::new(m, vec![0], vec![], Statistics::Fermion).unwrap();
        assert!(h.env().is_empty());
        let spec = bath_spectrum(&h).unwrap();
        assert!(spec.is_empty());
        assert_eq!(spec.band_edges(), None);
    }

    #[test]
    fn two_level_partition() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.3), c(0.3), c(1.0)]);
        let h = QuadraticHamiltonian::new(m, vec![0], vec![1], Statistics::Fermion).unwrap();
        assert_eq!(h.system_level().unwrap(), 0);
        assert!((h.env_coupling_weight().unwrap() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn partition_errors() {
        let m = CMatrix::identity(3, 3);
        assert_eq!(
            QuadraticHamiltonian::new(m.clone(), vec![0, 1], vec![1, 2], Statistics::Fermion)
                .unwrap_err(),
            Error::OverlappingPartition(1)
        );
        assert_eq!(
            QuadraticHamiltonian::new(m.clone(), vec![0], vec![2], Statistics::Fermion)
                .unwrap_err(),
            Error::IndexGap(1)
        );
        assert!(matches!(
            QuadraticHamiltonian::new(m, vec![0], vec![1, 2, 3], Statistics::Fermion),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn small_chain_entries() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.4, 1.0, 0.2, 2)).unwrap();
        let expect = [[0.4, 0.2, 0.0], [0.2, 0.0, -1.0], [0.0, -1.0, 0.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(h.matrix()[(i, j)], c(v), "entry ({i},{j})");
            }
        }
        assert_eq!(h.system(), &[0]);
        assert_eq!(h.env(), &[1, 2]);
    }

    #[test]
    fn chain_rejects_bad_sizes() {
        assert!(
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 1.0, 0.2, 1)).is_err()
        );
        assert!(
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 0.0, 0.2, 4)).is_err()
        );
    }

    #[test]
    fn two_site_bath_modes() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 1.0, 0.2, 2)).unwrap();
        let spec = bath_spectrum(&h).unwrap();
        assert!((spec.mode_energies()[0] + 1.0).abs() < 1e-14);
        assert!((spec.mode_energies()[1] - 1.0).abs() < 1e-14);
        // each mode has weight 1/2 on the first bath site
        for g in spec.couplings() {
            assert!((g.norm_sqr() - 0.02).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_chain_has_zero_couplings() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 1.0, 0.0, 10)).unwrap();
        let spec = bath_spectrum(&h).unwrap();
        assert!(spec.couplings().iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn density_far_outside_band_vanishes() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 1.0, 0.2, 50)).unwrap();
        let spec = bath_spectrum(&h).unwrap();
        assert!(spec.spectral_density(4.0, 0.02).unwrap() < 1e-100);
        assert!(spec.spectral_density(0.0, 0.0).is_err());
    }

    #[test]
    fn occupation_profiles() {
        let fd = OccupationProfile::FermiDirac { beta: 2.0, mu: 0.5 };
        assert!((fd.eval(0.5, Statistics::Fermion).unwrap() - 0.5).abs() < 1e-15);
        let be = OccupationProfile::BoseEinstein { beta: 1.0, mu: 0.0 };
        let n = be.eval(1.0, Statistics::Boson).unwrap();
        assert!((n - 1.0 / (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!(be.eval(-1.0, Statistics::Boson).is_err());
        assert!(OccupationProfile::Constant(1.5)
            .eval(0.0, Statistics::Fermion)
            .is_err());
        assert!(OccupationProfile::Constant(1.5)
            .eval(0.0, Statistics::Boson)
            .is_ok());
        let tab = OccupationProfile::Tabulated(vec![(-1.0, 1.0), (1.0, 0.0)]);
        assert!((tab.eval(0.0, Statistics::Fermion).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(tab.eval(-5.0, Statistics::Fermion).unwrap(), 1.0);
        assert_eq!(tab.eval(5.0, Statistics::Fermion).unwrap(), 0.0);
    }

    #[test]
    fn reference_block_is_diagonal_in_mode_basis() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 1.0, 0.2, 6)).unwrap();
        let spec = bath_spectrum(&h).unwrap();
        let n: Vec<f64> = (0..6).map(|k| 0.1 * k as f64).collect();
        let block = spec.reference_block(&n).unwrap();
        let in_modes = spec.modes().adjoint() * block.map(|z| z.conj()) * spec.modes();
        for a in 0..6 {
            for b in 0..6 {
                let target = if a == b { n[a] } else { 0.0 };
                assert!((in_modes[(a, b)] - c(target)).norm() < 1e-13);
            }
        }
    }
}
