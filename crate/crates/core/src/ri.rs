//! Repeated-interaction analysis for a single system level.
//!
//! After every cycle the environment is reset and the system-environment
//! coherences are erased, so the system population obeys the scalar affine
//! recurrence `P[n+1] = a P[n] + b` with `a = |U00|^2` and
//! `b = sum_{ee'} U*_0e U_0e' rho0_ee'`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::AffineMap;
use crate::error::{Error, Result};
use crate::format::Float;
use crate::linalg::{spectral_sum, CMatrix, CVector};
use crate::model::{
    BathSpectrum, ChainParams, OccupationProfile, QuadraticHamiltonian, Statistics,
};
use crate::tolerance;

/// Scalar RI recurrence coefficients at one step duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiScalarMap {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
}

impl RiScalarMap {
    /// `occupations` are the reset occupations `n_k` of the bath modes in
    /// the order of `spectrum.mode_energies()`.
    pub fn new(
        h: &QuadraticHamiltonian,
        spectrum: &BathSpectrum,
        occupations: &[f64],
        tau: f64,
    ) -> Result<Self> {
        check_tau(tau)?;
        let s = h.system_level()?;
        if occupations.len() != spectrum.len() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.len(),
                found: occupations.len(),
            });
        }
        let eig = h.eigen()?;
        let a = eig.survival_amplitude(tau, s)?.norm_sqr().min(1.0);

        // row <s| U(tau) restricted to the environment, then rotated into bath modes
        let vecs = eig.eigenvectors();
        let phased: Vec<Complex64> = (0..eig.dim())
            .map(|mu| vecs[(s, mu)] * Complex64::from_polar(1.0, -eig.eigenvalues()[mu] * tau))
            .collect();
        let row: Vec<Complex64> = h
            .env()
            .iter()
            .map(|&x| {
                phased
                    .iter()
                    .enumerate()
                    .map(|(mu, p)| p * vecs[(x, mu)].conj())
                    .sum()
            })
            .collect();
        let modes = spectrum.modes();
        let b = occupations
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let ck: Complex64 = row.iter().enumerate().map(|(e, r)| r * modes[(e, k)]).sum();
                n * ck.norm_sqr()
            })
            .sum();
        Ok(Self { a, b, tau })
    }

    pub fn from_profile(
        h: &QuadraticHamiltonian,
        profile: &OccupationProfile,
        tau: f64,
    ) -> Result<Self> {
        let spectrum = BathSpectrum::new(h)?;
        let n = spectrum.occupations(profile, h.statistics())?;
        Self::new(h, &spectrum, &n, tau)
    }

    /// `P* = b / (1 - a)`, absent when `a` is numerically one.
    pub fn fixed_point(&self) -> Option<f64> {
        let gap = 1.0 - self.a;
        (gap.abs() >= tolerance::FIXED_POINT_ABSENT).then(|| self.b / gap)
    }

    /// Closed-form `P_n = P* + a^n (P0 - P*)`, or `P0 + n b` without a fixed point.
    pub fn population(&self, p0: f64, n: usize) -> f64 {
        match self.fixed_point() {
            Some(p_star) => p_star + self.a.powi(n as i32) * (p0 - p_star),
            None => p0 + n as f64 * self.b,
        }
    }

    pub fn evolve(&self, p0: f64, n_steps: usize) -> RiEvolution {
        RiEvolution {
            populations: (0..=n_steps).map(|n| self.population(p0, n)).collect(),
            fixed_point: self.fixed_point(),
        }
    }

    /// The same recurrence as a 1x1 affine map.
    pub fn as_affine_map(&self) -> AffineMap {
        AffineMap {
            d: CMatrix::from_element(1, 1, Complex64::new(self.a, 0.0)),
            c: CVector::from_element(1, Complex64::new(self.b, 0.0)),
            tau: self.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiEvolution {
    pub populations: Vec<f64>,
    pub fixed_point: Option<f64>,
}

pub fn ri_scalar_map(
    h: &QuadraticHamiltonian,
    profile: &OccupationProfile,
    tau: f64,
) -> Result<RiScalarMap> {
    RiScalarMap::from_profile(h, profile, tau)
}

pub fn ri_evolve(map: &RiScalarMap, p0: f64, n_steps: usize) -> RiEvolution {
    map.evolve(p0, n_steps)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "step duration must be positive and finite, got {tau}"
        )))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RateFlags {
    /// `|U00|` vanished; the rate is reported as infinite.
    pub infinite: bool,
    /// The step exceeds the finite-chain revival time.
    pub beyond_revival: bool,
}

impl RateFlags {
    pub fn label(&self) -> &'static str {
        match (self.infinite, self.beyond_revival) {
            (false, false) => "ok",
            (true, false) => "infinite",
            (false, true) => "revival",
            (true, true) => "infinite|revival",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEff {
    pub value: f64,
    pub flags: RateFlags,
}

/// `-ln(|U00|^2) / tau`.
pub fn gamma_from_amplitude(u00: Complex64, tau: f64) -> GammaEff {
    let mut flags = RateFlags::default();
    let value = if u00.norm() < tolerance::AMPLITUDE_ZERO {
        flags.infinite = true;
        f64::INFINITY
    } else {
        (-(u00.norm_sqr() - 1.0).ln_1p() / tau).max(0.0)
    };
    GammaEff { value, flags }
}

/// Map-extracted RI decay rate `Gamma_eff(tau) = -ln(|U00(tau)|^2) / tau`.
pub fn gamma_eff(h: &QuadraticHamiltonian, tau: f64) -> Result<GammaEff> {
    check_tau(tau)?;
    let s = h.system_level()?;
    let mut g = gamma_from_amplitude(h.eigen()?.survival_amplitude(tau, s)?, tau);
    g.flags.beyond_revival = h.revival_time().is_some_and(|t| tau > t);
    Ok(g)
}

/// Short-time Zeno coefficient `A_T = sum_k |g_k|^2 f(n_k)` with
/// `f = 1 - n` for fermions and `1 + n` for bosons.
pub fn zeno_coefficient(h: &QuadraticHamiltonian, profile: &OccupationProfile) -> Result<f64> {
    let spectrum = BathSpectrum::new(h)?;
    let n = spectrum.occupations(profile, h.statistics())?;
    let sign = match h.statistics() {
        Statistics::Fermion => -1.0,
        Statistics::Boson => 1.0,
    };
    Ok(spectrum
        .couplings()
        .iter()
        .zip(&n)
        .map(|(g, nk)| g.norm_sqr() * (1.0 + sign * nk))
        .sum())
}

/// Leading-order one-cycle change `-tau^2 sum_x |M_0x|^2 (P - n_x)` for a
/// diagonal SPDM with entries `rho_diag`.
pub fn short_time_delta_p(h: &QuadraticHamiltonian, rho_diag: &[f64], tau: f64) -> Result<f64> {
    let s = h.system_level()?;
    if rho_diag.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho_diag.len(),
        });
    }
    let p = rho_diag[s];
    let sum: f64 = h
        .env()
        .iter()
        .map(|&x| h.matrix()[(s, x)].norm_sqr() * (p - rho_diag[x]))
        .sum();
    Ok(-tau * tau * sum)
}

/// `[M, [M, rho]]_ss = (M^2 rho + rho M^2 - 2 M rho M)_ss` by matrix products.
pub fn double_commutator_direct(m: &CMatrix, rho_diag: &[f64], site: usize) -> Result<Complex64> {
    let n = m.nrows();
    if rho_diag.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho_diag.len(),
        });
    }
    if site >= n {
        return Err(Error::IndexOutOfRange {
            index: site,
            dim: n,
        });
    }
    let rho = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        rho_diag.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let m2 = m * m;
    let dc = &m2 * &rho + &rho * &m2 - (m * &rho * m).scale(2.0);
    Ok(dc[(site, site)])
}

/// Closed form `2 sum_g |M_sg|^2 (rho_ss - rho_gg)` for a diagonal SPDM,
/// checked against the direct matrix evaluation.
pub fn double_commutator_00(m: &CMatrix, rho_diag: &[f64], site: usize) -> Result<f64> {
    let direct = double_commutator_direct(m, rho_diag, site)?;
    let closed: f64 = 2.0
        * (0..m.nrows())
            .map(|g| m[(site, g)].norm_sqr() * (rho_diag[site] - rho_diag[g]))
            .sum::<f64>();
    let scale = (0..m.nrows()).map(|g| m[(site, g)].norm_sqr()).sum::<f64>()
        * rho_diag.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let diff = (direct - Complex64::new(closed, 0.0)).norm();
    if diff > tolerance::DOUBLE_COMMUTATOR * scale.max(1.0) {
        return Err(Error::IdentityMismatch(format!(
            "double commutator closed form {closed} vs direct {direct} (diff {diff:e})"
        )));
    }
    Ok(closed)
}

/// `Gamma_eff` sampled on an ascending grid of step durations.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub tau: Vec<f64>,
    pub gamma: Vec<f64>,
    pub zeno_coefficient: f64,
    pub flags: Vec<RateFlags>,
}

impl RateCurve {
    pub fn compute(h: &QuadraticHamiltonian, taus: &[f64], zeno_coefficient: f64) -> Result<Self> {
        check_grid(taus)?;
        let mut gamma = Vec::with_capacity(taus.len());
        let mut flags = Vec::with_capacity(taus.len());
        for &tau in taus {
            let g = gamma_eff(h, tau)?;
            gamma.push(g.value);
            flags.push(g.flags);
        }
        Ok(Self {
            tau: taus.to_vec(),
            gamma,
            zeno_coefficient,
            flags,
        })
    }

    /// Small-step asymptote `A_T tau`.
    pub fn asymptote(&self, i: usize) -> f64 {
        self.zeno_coefficient * self.tau[i]
    }

    pub fn anti_zeno_windows(&self) -> Result<Vec<AntiZenoWindow>> {
        anti_zeno_windows(&self.tau, &self.gamma)
    }

    /// Columns `tau, gamma_eff, gamma_zeno_asymptote[, gamma_normalized], flag`;
    /// the normalized column `gamma_eff / (A_T J)` is written when `hopping` is given.
    pub fn write_csv<W: Write>(&self, out: &mut W, hopping: Option<f64>) -> io::Result<()> {
        match hopping {
            Some(_) => writeln!(
                out,
                "tau,gamma_eff,gamma_zeno_asymptote,gamma_normalized,flag"
            )?,
            None => writeln!(out, "tau,gamma_eff,gamma_zeno_asymptote,flag")?,
        }
        for i in 0..self.tau.len() {
            write!(
                out,
                "{},{},{}",
                Float(self.tau[i]),
                Float(self.gamma[i]),
                Float(self.asymptote(i))
            )?;
            if let Some(j) = hopping {
                write!(
                    out,
                    ",{}",
                    Float(self.gamma[i] / (self.zeno_coefficient * j))
                )?;
            }
            writeln!(out, ",{}", self.flags[i].label())?;
        }
        Ok(())
    }
}

fn check_grid(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter("empty step-duration grid".into()));
    }
    for &t in taus {
        check_tau(t)?;
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "step-duration grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Runs of equal values strictly above both outer neighbours, as
/// inclusive `(first, last)` index pairs. Grid endpoints never qualify.
fn local_maximum_runs(values: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 1;
    while i + 1 < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        if j + 1 < values.len() && values[i] > values[i - 1] && values[i] > values[j + 1] {
            runs.push((i, j));
        }
        i = j + 1;
    }
    runs
}

/// Indices of discrete local maxima; a plateau contributes its smallest index.
pub fn ridge_points(values: &[f64]) -> Vec<usize> {
    local_maximum_runs(values)
        .into_iter()
        .map(|(i, _)| i)
        .collect()
}

/// A finite-step interval over which the rate rises to an interior maximum
/// and then falls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntiZenoWindow {
    pub start: usize,
    pub peak: usize,
    pub end: usize,
    pub tau_start: f64,
    pub tau_peak: f64,
    pub tau_end: f64,
    pub gamma_peak: f64,
}

/// Each interior local maximum with the strictly rising stretch before it
/// and the strictly falling stretch after it.
pub fn anti_zeno_windows(taus: &[f64], gammas: &[f64]) -> Result<Vec<AntiZenoWindow>> {
    if taus.len() != gammas.len() {
        return Err(Error::DimensionMismatch {
            expected: taus.len(),
            found: gammas.len(),
        });
    }
    if taus.len() < 5 {
        return Err(Error::TooFewPoints {
            required: 5,
            found: taus.len(),
        });
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "grid must be strictly ascending".into(),
        ));
    }
    Ok(local_maximum_runs(gammas)
        .into_iter()
        .map(|(first, last)| {
            let mut start = first;
            while start > 0 && gammas[start - 1] < gammas[start] {
                start -= 1;
            }
            let mut end = last;
            while end + 1 < gammas.len() && gammas[end + 1] < gammas[end] {
                end += 1;
            }
            AntiZenoWindow {
                start,
                peak: first,
                end,
                tau_start: taus[start],
                tau_peak: taus[first],
                tau_end: taus[end],
                gamma_peak: gammas[first],
            }
        })
        .collect())
}

/// `Gamma_eff(tau, w0)` for the single-level chain over a rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMap {
    pub tau: Vec<f64>,
    pub omega0: Vec<f64>,
    /// `gamma[i][j]` at `omega0[i]`, `tau[j]`.
    pub gamma: Vec<Vec<f64>>,
    /// Ridge indices into `tau`, per `omega0` row.
    pub ridge: Vec<Vec<usize>>,
    pub hopping: f64,
    pub coupling: f64,
    pub n_bath: usize,
}

impl DesignMap {
    /// Rows over `omega0` are independent and evaluated in parallel, each from
    /// one eigendecomposition.
    pub fn compute(
        omega0: &[f64],
        taus: &[f64],
        hopping: f64,
        coupling: f64,
        n_bath: usize,
    ) -> Result<Self> {
        check_grid(taus)?;
        if omega0.is_empty() || omega0.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "level-energy grid must be non-empty and finite".into(),
            ));
        }
        let gamma = omega0
            .par_iter()
            .map(|&w0| {
                let h = QuadraticHamiltonian::single_level_chain(ChainParams::new(
                    w0, hopping, coupling, n_bath,
                ))?;
                let eig = h.eigen()?;
                let weights = eig.site_weights(0)?;
                let energies = eig.eigenvalues().as_slice();
                Ok(taus
                    .iter()
                    .map(|&tau| {
                        gamma_from_amplitude(spectral_sum(&weights, energies, tau), tau).value
                    })
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let ridge = gamma.iter().map(|row| ridge_points(row)).collect();
        Ok(Self {
            tau: taus.to_vec(),
            omega0: omega0.to_vec(),
            gamma,
            ridge,
            hopping,
            coupling,
            n_bath,
        })
    }

    /// Ridge points as `(omega0, tau, gamma)`.
    pub fn ridge_points(&self) -> Vec<(f64, f64, f64)> {
        self.ridge
            .iter()
            .enumerate()
            .flat_map(|(i, js)| {
                js.iter()
                    .map(move |&j| (self.omega0[i], self.tau[j], self.gamma[i][j]))
            })
            .collect()
    }

    /// Long format `omega0, tau, gamma, is_ridge`, band edges as comment rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# band_edge omega0={}", -2.0 * self.hopping)?;
        writeln!(out, "# band_edge omega0={}", 2.0 * self.hopping)?;
        writeln!(out, "omega0,tau,gamma,is_ridge")?;
        for (i, &w0) in self.omega0.iter().enumerate() {
            for (j, &tau) in self.tau.iter().enumerate() {
                let ridge = u8::from(self.ridge[i].contains(&j));
                writeln!(
                    out,
                    "{},{},{},{ridge}",
                    Float(w0),
                    Float(tau),
                    Float(self.gamma[i][j])
                )?;
            }
        }
        Ok(())
    }
}

pub fn design_map(
    omega0: &[f64],
    taus: &[f64],
    hopping: f64,
    coupling: f64,
    n_bath: usize,
) -> Result<DesignMap> {
    DesignMap::compute(omega0, taus, hopping, coupling, n_bath)
}
