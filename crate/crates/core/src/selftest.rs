//! Built-in consistency checks on small random models with fixed seeds.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{brute_force_stroboscopic, AffineMap, ResetSpec, Spdm};
use crate::ec::EcGenerator;
use crate::error::Result;
use crate::linalg::{unitarity_residual, CMatrix, HermitianEigen};
use crate::model::{QuadraticHamiltonian, Statistics};
use crate::ri::{double_commutator_00, double_commutator_direct};

/// Deliberate defects for exercising the checks themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Negates the affine constant `C(tau)` before iterating.
    FlipResetConstant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }
}

impl fmt::Display for SelfTestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Random Hermitian matrix with entries of modulus at most `scale`.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(rng.gen_range(-scale..=scale), 0.0);
        for j in i + 1..n {
            let z = Complex64::from_polar(
                rng.gen_range(0.0..=scale),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Random fermionic SPDM `W diag(n) W†` with `n` in `[0, 1]`.
pub fn random_spdm<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let basis = HermitianEigen::new(&random_hermitian(rng, n, 1.0))
        .expect("random Hermitian matrix diagonalizes")
        .eigenvectors()
        .clone();
    let occ = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|_| Complex64::new(rng.gen_range(0.0..=1.0), 0.0)),
    ));
    let rho = &basis * occ * basis.adjoint();
    (&rho + rho.adjoint()).scale(0.5)
}

/// Random conjugation-closed reset set with values taken from `values`.
pub fn random_reset_spec<R: Rng>(rng: &mut R, values: &CMatrix, p: f64) -> Result<ResetSpec> {
    let n = values.nrows();
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a..n {
            if rng.gen_bool(p) {
                pairs.push((a, b));
                if a != b {
                    pairs.push((b, a));
                }
            }
        }
    }
    ResetSpec::new(n, pairs, values)
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn oracle_equivalence(fault: Fault) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = 2 + trial % 5;
        let m = random_hermitian(&mut rng, n, 1.0);
        let h = QuadraticHamiltonian::new(m, vec![0], (1..n).collect(), Statistics::Fermion)?;
        let values = random_spdm(&mut rng, n);
        let spec = random_reset_spec(&mut rng, &values, 0.4)?;
        let mut rho = random_spdm(&mut rng, n);
        spec.apply_reset(&mut rho);
        let tau = [0.05, 0.3, 1.0][trial % 3];
        let mut map = AffineMap::new(&h, &spec, tau)?;
        if fault == Fault::FlipResetConstant {
            map.c = -map.c;
        }
        let fast = map.iterate(&spec.extract_kept(&rho), 30)?;
        let rho = Spdm::new(rho, Statistics::Fermion)?;
        let slow = brute_force_stroboscopic(&h, &spec, &rho, tau, 30, false)?;
        worst = worst.max(fast.max_deviation(&slow));
    }
    Ok(check(
        "oracle-equivalence",
        worst <= 1e-12,
        format!("max deviation {worst:.3e} (limit 1e-12)"),
    ))
}

fn unitarity() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = 1 + trial % 8;
        let eig = HermitianEigen::new(&random_hermitian(&mut rng, n, 2.0))?;
        for &t in &[0.1, 1.0, 10.0] {
            worst = worst.max(unitarity_residual(&eig.propagator(t)));
        }
    }
    Ok(check(
        "unitarity",
        worst <= 1e-9,
        format!("max |U†U - I| {worst:.3e} (limit 1e-9)"),
    ))
}

fn double_commutator() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = 2 + trial % 9;
        let m = random_hermitian(&mut rng, n, 1.0);
        let rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let closed = double_commutator_00(&m, &rho, 0);
        let direct = double_commutator_direct(&m, &rho, 0)?;
        match closed {
            Ok(v) => worst = worst.max((direct - Complex64::new(v, 0.0)).norm()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    Ok(check(
        "double-commutator",
        worst <= 1e-12,
        format!("max |closed - direct| {worst:.3e} (limit 1e-12)"),
    ))
}

fn generator_consistency() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for trial in 0..5 {
        let n = 3 + trial % 3;
        let m = random_hermitian(&mut rng, n, 1.0);
        let h = QuadraticHamiltonian::new(m, vec![0], (1..n).collect(), Statistics::Fermion)?;
        let spec = ResetSpec::evolving_correlation(&h, &random_spdm(&mut rng, n - 1))?;
        let gen = EcGenerator::new(&h, &spec)?;
        let tau = 1e-3;
        let (d1, c1) = gen.finite_difference_residuals(&AffineMap::new(&h, &spec, tau)?)?;
        let (d2, c2) = gen.finite_difference_residuals(&AffineMap::new(&h, &spec, tau / 2.0)?)?;
        for slope in [(d1 / d2).log2(), (c1 / c2).log2()] {
            lo = lo.min(slope);
            hi = hi.max(slope);
        }
    }
    Ok(check(
        "generator-consistency",
        lo >= 0.8 && hi <= 1.2,
        format!("Richardson slopes in [{lo:.4}, {hi:.4}] (required [0.8, 1.2])"),
    ))
}

/// Runs every check; the report is identical between runs.
pub fn run_selftest(fault: Fault) -> Result<SelfTestReport> {
    Ok(SelfTestReport {
        checks: vec![
            oracle_equivalence(fault)?,
            unitarity()?,
            double_commutator()?,
            generator_consistency()?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let report = run_selftest(Fault::None).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn injected_fault_is_caught() {
        let report = run_selftest(Fault::FlipResetConstant).unwrap();
        assert_eq!(report.failures(), vec!["oracle-equivalence"]);
    }

    #[test]
    fn report_is_deterministic() {
        let a = run_selftest(Fault::None).unwrap().to_string();
        let b = run_selftest(Fault::None).unwrap().to_string();
        assert_eq!(a, b);
    }
}
