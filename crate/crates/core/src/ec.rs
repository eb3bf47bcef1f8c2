//! Evolving-correlation analysis: the continuous-reset generator, the
//! single-level `(P, s_k)` equations, the memory-kernel equation for `P`,
//! and the Markovian rate `2 pi J(w0)`.
//!
//! In the single-level equations `s_k = <a†_k a_0>` is the coherence between
//! bath mode `k` and the system level, so that
//!
//! ```text
//! dP/dt   = -i sum_k (g_k s_k* - s_k g_k*)
//! ds_k/dt = -i [D_k s_k + g_k (n_k - P)],   D_k = w0 - w_k
//! ```

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::dynamics::{AffineMap, ResetSpec};
use crate::error::{Error, Result};
use crate::format::Float;
use crate::linalg::{CMatrix, CVector};
use crate::model::{BathSpectrum, OccupationProfile, QuadraticHamiltonian};
use crate::tolerance;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Continuous-reset generator `dV/dt = D V + C` on the kept entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EcGenerator {
    pub d: CMatrix,
    pub c: CVector,
}

impl EcGenerator {
    /// `D_ij = i (M_{a_j a_i} d_{b_i b_j} - d_{a_i a_j} M_{b_i b_j})` and
    /// `C_i = i sum_R rho0_{a'b'} (M_{a' a_i} d_{b_i b'} - d_{a_i a'} M_{b_i b'})`.
    pub fn new(h: &QuadraticHamiltonian, spec: &ResetSpec) -> Result<Self> {
        if spec.dim() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: spec.dim(),
            });
        }
        let m = h.matrix();
        let kept = spec.kept_pairs();
        let d = CMatrix::from_fn(kept.len(), kept.len(), |i, j| {
            let (ai, bi) = kept[i];
            let (aj, bj) = kept[j];
            let mut z = Complex64::new(0.0, 0.0);
            if bi == bj {
                z += m[(aj, ai)];
            }
            if ai == aj {
                z -= m[(bi, bj)];
            }
            I * z
        });
        let r = spec.reset_matrix();
        let mt = m.transpose();
        let flow = &mt * r - r * &mt;
        let c = CVector::from_iterator(kept.len(), kept.iter().map(|&(a, b)| I * flow[(a, b)]));
        Ok(Self { d, c })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn rhs(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: v.len(),
            });
        }
        Ok(&self.d * v + &self.c)
    }

    /// `(max |(D(tau) - I)/tau - D|, max |C(tau)/tau - C|)`.
    pub fn finite_difference_residuals(&self, map: &AffineMap) -> Result<(f64, f64)> {
        if map.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: map.len(),
            });
        }
        let n = self.len();
        let tau = map.tau;
        let mut rd: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                let fd = (map.d[(i, j)] - Complex64::new(id, 0.0)) / tau;
                rd = rd.max((fd - self.d[(i, j)]).norm());
            }
        }
        let rc = (0..n)
            .map(|i| (map.c[i] / tau - self.c[i]).norm())
            .fold(0.0, f64::max);
        Ok((rd, rc))
    }
}

pub fn ec_generator(h: &QuadraticHamiltonian, spec: &ResetSpec) -> Result<EcGenerator> {
    EcGenerator::new(h, spec)
}

/// Single system level coupled to bath modes whose occupations are held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct EcSingleLevel {
    pub omega0: f64,
    pub detunings: Vec<f64>,
    pub couplings: Vec<Complex64>,
    pub occupations: Vec<f64>,
    /// Occupation the level relaxes to in the Markov limit, `n(w0)`.
    pub target: f64,
    /// Finite-chain revival time, if known.
    pub revival_time: Option<f64>,
}

impl EcSingleLevel {
    pub fn new(h: &QuadraticHamiltonian, profile: &OccupationProfile) -> Result<Self> {
        let s = h.system_level()?;
        let spectrum = BathSpectrum::new(h)?;
        let occupations = spectrum.occupations(profile, h.statistics())?;
        let omega0 = h.matrix()[(s, s)].re;
        let target = if spectrum.is_empty() {
            0.0
        } else {
            profile.eval(omega0, h.statistics()).unwrap_or_else(|_| {
                // outside the profile's domain: use the occupation of the nearest mode
                let k = nearest(spectrum.mode_energies(), omega0);
                occupations[k]
            })
        };
        Ok(Self {
            omega0,
            detunings: spectrum
                .mode_energies()
                .iter()
                .map(|w| omega0 - w)
                .collect(),
            couplings: spectrum.couplings().to_vec(),
            occupations,
            target,
            revival_time: h.revival_time(),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.detunings.len()
    }

    fn max_detuning(&self) -> f64 {
        self.detunings.iter().fold(0.0, |acc, d| acc.max(d.abs()))
    }

    fn check_step(&self, t_end: f64, dt: f64) -> Result<usize> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be non-negative, got {t_end}"
            )));
        }
        let product = dt * self.max_detuning();
        if product > tolerance::EC_STEP_GUARD {
            return Err(Error::StepTooLarge {
                product,
                limit: tolerance::EC_STEP_GUARD,
            });
        }
        Ok((t_end / dt).round() as usize)
    }

    fn derivative(&self, p: Complex64, s: &[Complex64], dp: &mut Complex64, ds: &mut [Complex64]) {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..s.len() {
            let g = self.couplings[k];
            acc += g * s[k].conj() - s[k] * g.conj();
            ds[k] = -I * (self.detunings[k] * s[k] + g * (self.occupations[k] - p));
        }
        *dp = -I * acc;
    }
}

fn nearest(values: &[f64], x: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map_or(0, |(k, _)| k)
}

/// Sampled `P(t)` with optional coherence weight `sum_k |s_k|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EcTrajectory {
    pub times: Vec<f64>,
    pub populations: Vec<f64>,
    /// Largest `|Im P|` met during integration.
    pub max_imag: f64,
    pub coherence_weight: Option<Vec<f64>>,
}

impl EcTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|P_a - P_b|` over shared samples with `t <= t_max`.
    pub fn sup_distance(&self, other: &EcTrajectory, t_max: f64) -> f64 {
        self.times
            .iter()
            .zip(self.populations.iter().zip(&other.populations))
            .take_while(|(t, _)| **t <= t_max)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Columns `t, P[, coherence_weight]`; `stride` thins the rows.
    pub fn write_csv<W: Write>(&self, out: &mut W, stride: usize) -> io::Result<()> {
        let stride = stride.max(1);
        match &self.coherence_weight {
            Some(_) => writeln!(out, "t,P,coherence_weight")?,
            None => writeln!(out, "t,P")?,
        }
        for i in (0..self.len()).step_by(stride) {
            write!(
                out,
                "{},{}",
                Float(self.times[i]),
                Float(self.populations[i])
            )?;
            if let Some(w) = &self.coherence_weight {
                write!(out, ",{}", Float(w[i]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Fixed-step RK4 integration from `s_k(0) = 0`.
pub fn ec_evolve_ode(
    problem: &EcSingleLevel,
    p0: f64,
    t_end: f64,
    dt: f64,
) -> Result<EcTrajectory> {
    let n_steps = problem.check_step(t_end, dt)?;
    let nk = problem.n_modes();
    let mut p = Complex64::new(p0, 0.0);
    let mut s = vec![Complex64::new(0.0, 0.0); nk];

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut pops = Vec::with_capacity(n_steps + 1);
    let mut weight = Vec::with_capacity(n_steps + 1);
    let mut max_imag: f64 = 0.0;
    let record = |t: f64,
                  p: Complex64,
                  s: &[Complex64],
                  times: &mut Vec<f64>,
                  pops: &mut Vec<f64>,
                  weight: &mut Vec<f64>| {
        times.push(t);
        pops.push(p.re);
        weight.push(s.iter().map(|z| z.norm_sqr()).sum());
    };
    record(0.0, p, &s, &mut times, &mut pops, &mut weight);

    let zero = Complex64::new(0.0, 0.0);
    let (mut k1p, mut k2p, mut k3p, mut k4p) = (zero, zero, zero, zero);
    let mut k1 = vec![zero; nk];
    let mut k2 = vec![zero; nk];
    let mut k3 = vec![zero; nk];
    let mut k4 = vec![zero; nk];
    let mut tmp = vec![zero; nk];
    for step in 1..=n_steps {
        problem.derivative(p, &s, &mut k1p, &mut k1);
        for k in 0..nk {
            tmp[k] = s[k] + k1[k] * (0.5 * dt);
        }
        problem.derivative(p + k1p * (0.5 * dt), &tmp, &mut k2p, &mut k2);
        for k in 0..nk {
            tmp[k] = s[k] + k2[k] * (0.5 * dt);
        }
        problem.derivative(p + k2p * (0.5 * dt), &tmp, &mut k3p, &mut k3);
        for k in 0..nk {
            tmp[k] = s[k] + k3[k] * dt;
        }
        problem.derivative(p + k3p * dt, &tmp, &mut k4p, &mut k4);
        let w = dt / 6.0;
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * w;
        for k in 0..nk {
            s[k] += (k1[k] + k2[k] * 2.0 + k3[k] * 2.0 + k4[k]) * w;
        }
        if !p.re.is_finite() || !p.im.is_finite() {
            return Err(Error::NonFinite);
        }
        max_imag = max_imag.max(p.im.abs());
        record(step as f64 * dt, p, &s, &mut times, &mut pops, &mut weight);
    }
    Ok(EcTrajectory {
        times,
        populations: pops,
        max_imag,
        coherence_weight: Some(weight),
    })
}

/// Solves `dP/dt = -int_0^t K(t-t') P(t') dt' + int_0^t L(u) du` with
/// `K(u) = 2 sum_k |g_k|^2 cos(D_k u)` and `L(u) = 2 sum_k |g_k|^2 n_k cos(D_k u)`.
///
/// The history integral uses the trapezoidal rule and the outer step the
/// implicit trapezoidal rule, solved exactly for the new sample.
pub fn ec_evolve_memory_kernel(
    problem: &EcSingleLevel,
    p0: f64,
    t_end: f64,
    dt: f64,
) -> Result<EcTrajectory> {
    let n_steps = problem.check_step(t_end, dt)?;
    let weights: Vec<f64> = problem
        .couplings
        .iter()
        .map(|g| 2.0 * g.norm_sqr())
        .collect();
    let mut kernel = vec![0.0; n_steps + 1];
    let mut feed = vec![0.0; n_steps + 1];
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let d = problem.detunings[k];
        let wn = w * problem.occupations[k];
        for m in 0..=n_steps {
            let cos = (d * m as f64 * dt).cos();
            kernel[m] += w * cos;
            feed[m] += wn * cos;
        }
    }
    // same quadrature as the history term, so equilibrium is preserved exactly
    let mut source = vec![0.0; n_steps + 1];
    for m in 1..=n_steps {
        source[m] = source[m - 1] + 0.5 * dt * (feed[m - 1] + feed[m]);
    }

    let mut p = Vec::with_capacity(n_steps + 1);
    p.push(p0);
    let mut f_prev = source[0];
    let half = 0.5 * dt;
    for n in 0..n_steps {
        let m = n + 1;
        // history at t_m without the j = m endpoint
        let mut hist = 0.5 * kernel[m] * p[0];
        for j in 1..m {
            hist += kernel[m - j] * p[j];
        }
        let f_partial = source[m] - dt * hist;
        let self_weight = dt * 0.5 * kernel[0];
        let next = (p[n] + half * (f_prev + f_partial)) / (1.0 + half * self_weight);
        if !next.is_finite() {
            return Err(Error::NonFinite);
        }
        f_prev = f_partial - self_weight * next;
        p.push(next);
    }
    Ok(EcTrajectory {
        times: (0..=n_steps).map(|i| i as f64 * dt).collect(),
        populations: p,
        max_imag: 0.0,
        coherence_weight: None,
    })
}

/// `Gamma_EC = 2 pi J(w0)` with Gaussian broadening `sigma`.
pub fn markov_rate(spectrum: &BathSpectrum, omega0: f64, sigma: f64) -> Result<f64> {
    if !omega0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "w0 must be finite, got {omega0}"
        )));
    }
    Ok(2.0 * PI * spectrum.spectral_density(omega0, sigma)?)
}

/// Least-squares slope of `ln |P - target|` over `[0.1, 0.9] t_fit`,
/// returned as a decay rate.
pub fn fit_decay_rate(times: &[f64], populations: &[f64], target: f64, t_fit: f64) -> Result<f64> {
    let (lo, hi) = (0.1 * t_fit, 0.9 * t_fit);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut n_window = 0;
    for (&t, &p) in times.iter().zip(populations) {
        if t < lo || t > hi {
            continue;
        }
        n_window += 1;
        let gap = (p - target).abs();
        if gap > f64::MIN_POSITIVE {
            xs.push(t);
            ys.push(gap.ln());
        }
    }
    if n_window < 3 {
        return Err(Error::TooFewPoints {
            required: 3,
            found: n_window,
        });
    }
    if xs.len() < 2 {
        // the population sits on the target throughout the window
        return Ok(0.0);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}

/// `min(t_end, revival time)`.
pub fn fit_horizon(problem: &EcSingleLevel, t_end: f64) -> f64 {
    problem.revival_time.map_or(t_end, |t| t.min(t_end))
}

/// Settings shared by the EC trajectory and rate comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcSettings {
    pub p0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcRateRow {
    pub tau: f64,
    pub gamma_strobo: f64,
    pub gamma_ode: f64,
    pub gamma_markov: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcComparison {
    pub rows: Vec<EcRateRow>,
}

impl EcComparison {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "tau,gamma_strobo,gamma_ode,gamma_markov")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                Float(r.tau),
                Float(r.gamma_strobo),
                Float(r.gamma_ode),
                Float(r.gamma_markov)
            )?;
        }
        Ok(())
    }
}

/// Population history `P(n tau)` of the exact EC stroboscopic map from a
/// product state with system occupation `p0`.
pub fn ec_stroboscopic_populations(
    h: &QuadraticHamiltonian,
    profile: &OccupationProfile,
    p0: f64,
    tau: f64,
    n_steps: usize,
) -> Result<Vec<f64>> {
    let s = h.system_level()?;
    let spectrum = BathSpectrum::new(h)?;
    let occ = spectrum.occupations(profile, h.statistics())?;
    let spec = ResetSpec::evolving_correlation(h, &spectrum.reference_block(&occ)?)?;
    let map = AffineMap::new(h, &spec, tau)?;
    let mut v0 = CVector::zeros(map.len());
    let idx = spec
        .kept_index(s, s)
        .ok_or_else(|| Error::InvalidResetSpec("system population is not a kept entry".into()))?;
    v0[idx] = Complex64::new(p0, 0.0);
    let trace = map.iterate(&v0, n_steps)?;
    Ok(trace.kept.iter().map(|v| v[idx].re).collect())
}

/// Fitted decay rates from the exact EC map at each `tau`, from the RK4
/// trajectory, and from the Markov formula.
pub fn ec_stroboscopic_compare(
    h: &QuadraticHamiltonian,
    profile: &OccupationProfile,
    taus: &[f64],
    settings: &EcSettings,
) -> Result<EcComparison> {
    let problem = EcSingleLevel::new(h, profile)?;
    let t_fit = fit_horizon(&problem, settings.t_end);
    let mut steps = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::GridMisfit(format!(
                "step duration {tau} is not positive"
            )));
        }
        let ratio = settings.t_end / tau;
        let n = ratio.round();
        if (ratio - n).abs() > tolerance::GRID_FIT * ratio.max(1.0) || n < 10.0 {
            return Err(Error::GridMisfit(format!(
                "t_end / tau = {ratio} must be an integer of at least 10"
            )));
        }
        steps.push(n as usize);
    }

    let ode = ec_evolve_ode(&problem, settings.p0, settings.t_end, settings.dt)?;
    let gamma_ode = fit_decay_rate(&ode.times, &ode.populations, problem.target, t_fit)?;
    let spectrum = BathSpectrum::new(h)?;
    let gamma_markov = markov_rate(&spectrum, problem.omega0, settings.sigma)?;

    let mut rows = Vec::with_capacity(taus.len());
    for (&tau, &n) in taus.iter().zip(&steps) {
        let pops = ec_stroboscopic_populations(h, profile, settings.p0, tau, n)?;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * tau).collect();
        rows.push(EcRateRow {
            tau,
            gamma_strobo: fit_decay_rate(&times, &pops, problem.target, t_fit)?,
            gamma_ode,
            gamma_markov,
        });
    }
    Ok(EcComparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChainParams, Statistics};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn one_mode(w0: f64, w1: f64, g: f64) -> QuadraticHamiltonian {
        let m = CMatrix::from_row_slice(2, 2, &[c(w0), c(g), c(g), c(w1)]);
        QuadraticHamiltonian::new(m, vec![0], vec![1], Statistics::Fermion).unwrap()
    }

    #[test]
    fn zero_matrix_generator_vanishes() {
        let h = QuadraticHamiltonian::new(
            CMatrix::zeros(3, 3),
            vec![0],
            vec![1, 2],
            Statistics::Fermion,
        )
        .unwrap();
        let spec =
            ResetSpec::evolving_correlation(&h, &CMatrix::identity(2, 2).scale(0.5)).unwrap();
        let gen = ec_generator(&h, &spec).unwrap();
        assert!(gen.d.iter().all(|z| z.norm() == 0.0));
        assert!(gen.c.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_mode_source_entries() {
        let (g, n) = (0.3, 0.7);
        let h = one_mode(0.1, -0.2, g);
        let spec = ResetSpec::evolving_correlation(&h, &CMatrix::from_element(1, 1, c(n))).unwrap();
        let gen = ec_generator(&h, &spec).unwrap();
        let i01 = spec.kept_index(0, 1).unwrap();
        let i10 = spec.kept_index(1, 0).unwrap();
        assert!((gen.c[i01] - Complex64::new(0.0, g * n)).norm() < 1e-15);
        assert!((gen.c[i10] - Complex64::new(0.0, -g * n)).norm() < 1e-15);
        assert_eq!(gen.c[spec.kept_index(0, 0).unwrap()], c(0.0));
    }

    #[test]
    fn decoupled_level_is_frozen() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.2, 1.0, 0.0, 10)).unwrap();
        let p = EcSingleLevel::new(&h, &OccupationProfile::Constant(0.3)).unwrap();
        let tr = ec_evolve_ode(&p, 0.8, 5.0, 0.01).unwrap();
        assert!(tr.populations.iter().all(|&x| (x - 0.8).abs() < 1e-15));
        let mk = ec_evolve_memory_kernel(&p, 0.8, 5.0, 0.01).unwrap();
        assert!(mk.populations.iter().all(|&x| (x - 0.8).abs() < 1e-15));
    }

    #[test]
    fn equilibrium_stays_put() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.2, 1.0, 0.3, 10)).unwrap();
        let p = EcSingleLevel::new(&h, &OccupationProfile::Constant(0.4)).unwrap();
        let mk = ec_evolve_memory_kernel(&p, 0.4, 5.0, 0.01).unwrap();
        assert!(mk.populations.iter().all(|&x| (x - 0.4).abs() < 1e-13));
        let tr = ec_evolve_ode(&p, 0.4, 5.0, 0.01).unwrap();
        assert!(tr.populations.iter().all(|&x| (x - 0.4).abs() < 1e-13));
    }

    #[test]
    fn resonant_single_mode_closed_form() {
        // P'' = -2 g^2 P, P'(0) = 0
        let g = 0.5;
        let h = one_mode(0.0, 0.0, g);
        let p = EcSingleLevel::new(&h, &OccupationProfile::Empty).unwrap();
        let mk = ec_evolve_memory_kernel(&p, 1.0, 4.0, 1e-3).unwrap();
        let ode = ec_evolve_ode(&p, 1.0, 4.0, 1e-3).unwrap();
        let w = (2.0f64).sqrt() * g;
        for (i, &t) in mk.times.iter().enumerate() {
            let exact = (w * t).cos();
            assert!((mk.populations[i] - exact).abs() < 1e-6);
            assert!((ode.populations[i] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn step_guard() {
        let h = one_mode(0.0, 3.0, 0.1);
        let p = EcSingleLevel::new(&h, &OccupationProfile::Empty).unwrap();
        assert!(matches!(
            ec_evolve_ode(&p, 1.0, 1.0, 0.05),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(matches!(
            ec_evolve_memory_kernel(&p, 1.0, 1.0, 0.05),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn markov_rate_outside_band() {
        let h = QuadraticHamiltonian::single_level_chain(ChainParams::new(5.0, 1.0, 0.05, 100))
            .unwrap();
        let spec = BathSpectrum::new(&h).unwrap();
        assert!(markov_rate(&spec, 5.0, 0.02).unwrap() < 1e-100);
    }

    #[test]
    fn fit_recovers_exponential() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let pops: Vec<f64> = times
            .iter()
            .map(|t| 0.25 + 0.5 * (-0.3 * t).exp())
            .collect();
        let g = fit_decay_rate(&times, &pops, 0.25, 19.9).unwrap();
        assert!((g - 0.3).abs() < 1e-10);
        let flat = vec![0.7; times.len()];
        assert!(fit_decay_rate(&times, &flat, 0.2, 19.9).unwrap().abs() < 1e-12);
        assert!(matches!(
            fit_decay_rate(&times[..2], &pops[..2], 0.25, 0.1),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn compare_rejects_misfit_grid() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 1.0, 0.05, 10)).unwrap();
        let settings = EcSettings {
            p0: 1.0,
            t_end: 1.0,
            dt: 0.01,
            sigma: 0.02,
        };
        let err = ec_stroboscopic_compare(&h, &OccupationProfile::Empty, &[0.3], &settings);
        assert!(matches!(err, Err(Error::GridMisfit(_))));
        let err = ec_stroboscopic_compare(&h, &OccupationProfile::Empty, &[0.5], &settings);
        assert!(matches!(err, Err(Error::GridMisfit(_))));
    }

    #[test]
    fn compare_with_zero_coupling() {
        let h =
            QuadraticHamiltonian::single_level_chain(ChainParams::new(0.0, 1.0, 0.0, 10)).unwrap();
        let settings = EcSettings {
            p0: 1.0,
            t_end: 2.0,
            dt: 0.01,
            sigma: 0.02,
        };
        let cmp =
            ec_stroboscopic_compare(&h, &OccupationProfile::Empty, &[0.1, 0.2], &settings).unwrap();
        for r in &cmp.rows {
            assert!(r.gamma_strobo.abs() < 1e-12);
            assert!(r.gamma_ode.abs() < 1e-12);
            assert!(r.gamma_markov.abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_csv() {
        let h = one_mode(0.0, 0.0, 0.2);
        let p = EcSingleLevel::new(&h, &OccupationProfile::Empty).unwrap();
        let tr = ec_evolve_ode(&p, 1.0, 0.1, 0.01).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t,P,coherence_weight"));
        assert_eq!(text.lines().count(), 4);
    }
}
