use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use zeno_core::dynamics::{AffineMap, ResetSpec};
use zeno_core::ec::{
    ec_evolve_memory_kernel, ec_evolve_ode, ec_stroboscopic_compare, EcSettings, EcSingleLevel,
};
use zeno_core::format::Float;
use zeno_core::ri::{zeno_coefficient, DesignMap, RateCurve, RiScalarMap};
use zeno_core::selftest::{run_selftest, Fault};
use zeno_core::{BathSpectrum, CMatrix, Complex64, Error, QuadraticHamiltonian};

use crate::config::{ModelKind, ProtocolKind, RunConfig, Solver};
use crate::error::CliError;

fn output_path(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.output.dir)?;
    Ok(cfg.output.dir.join(format!("{}{name}", cfg.output.prefix)))
}

fn write_file<F>(path: &PathBuf, header: &str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(header.as_bytes())?;
    body(&mut out)?;
    out.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Reference environment block from the configured occupations.
fn reference_block(cfg: &RunConfig, h: &QuadraticHamiltonian) -> Result<CMatrix, CliError> {
    let spectrum = BathSpectrum::new(h)?;
    let occ = spectrum.occupations(&cfg.profile()?, h.statistics())?;
    Ok(spectrum.reference_block(&occ)?)
}

fn reset_spec(cfg: &RunConfig, h: &QuadraticHamiltonian) -> Result<ResetSpec, CliError> {
    let block = reference_block(cfg, h)?;
    Ok(match cfg.protocol.kind {
        ProtocolKind::Ri => ResetSpec::repeated_interaction(h, &block)?,
        ProtocolKind::Ec => ResetSpec::evolving_correlation(h, &block)?,
        ProtocolKind::Custom => {
            let pairs = cfg.protocol.reset_pairs.clone().unwrap_or_default();
            let values = ResetSpec::repeated_interaction(h, &block)?
                .reset_matrix()
                .clone();
            ResetSpec::new(h.dim(), pairs.into_iter().map(|[a, b]| (a, b)), &values)
                .map_err(|e| CliError::Config(format!("protocol.reset_pairs: {e}")))?
        }
    })
}

fn level_label(level: Option<f64>) -> String {
    level.map_or_else(|| "as configured".to_string(), |w| w.to_string())
}

pub fn ri_rate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.protocol.kind != ProtocolKind::Ri {
        return Err(CliError::Config(
            "protocol.kind: ri-rate needs protocol.kind = \"ri\"".into(),
        ));
    }
    let taus = cfg.tau_grid();
    let profile = cfg.profile()?;
    let levels = cfg.levels();
    let curves = levels
        .par_iter()
        .map(|&w| {
            let h = cfg.hamiltonian(w)?;
            let a = zeno_coefficient(&h, &profile)?;
            let curve = RateCurve::compute(&h, &taus, a)?;
            let windows = if taus.len() >= 5 {
                curve.anti_zeno_windows()?
            } else {
                Vec::new()
            };
            Ok((curve, windows))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let hopping = (cfg.model.kind == ModelKind::Chain).then_some(cfg.model.hopping);
    let header = cfg.echo("ri-rate");
    for (i, ((curve, windows), &w)) in curves.iter().zip(&levels).enumerate() {
        let path = output_path(cfg, &format!("ri_rate_{i}.csv"))?;
        write_file(&path, &header, |out| {
            writeln!(out, "# omega0={}", level_label(w))?;
            writeln!(out, "# zeno_coefficient={}", curve.zeno_coefficient)?;
            for win in windows {
                writeln!(
                    out,
                    "# anti_zeno_window tau_start={} tau_peak={} tau_end={} gamma_peak={}",
                    win.tau_start, win.tau_peak, win.tau_end, win.gamma_peak
                )?;
            }
            curve.write_csv(out, hopping)
        })?;
    }
    Ok(())
}

pub fn ri_evolve(cfg: &RunConfig) -> Result<(), CliError> {
    let tau = *cfg
        .run
        .tau
        .first()
        .ok_or_else(|| CliError::Config("run.tau: needs at least one value".into()))?;
    let level = cfg.levels()[0];
    let h = cfg.hamiltonian(level)?;
    let header = cfg.echo("ri-evolve");
    let path = output_path(cfg, "ri_evolve.csv")?;

    if cfg.protocol.kind == ProtocolKind::Ri && h.system().len() == 1 {
        let map = RiScalarMap::from_profile(&h, &cfg.profile()?, tau)?;
        let ev = map.evolve(cfg.run.p0, cfg.run.n_steps);
        return write_file(&path, &header, |out| {
            writeln!(out, "# omega0={}", level_label(level))?;
            writeln!(out, "# a={} b={}", map.a, map.b)?;
            match ev.fixed_point {
                Some(p) => writeln!(out, "# fixed_point={p}")?,
                None => writeln!(out, "# fixed_point=none")?,
            }
            writeln!(out, "n,t,P")?;
            for (n, p) in ev.populations.iter().enumerate() {
                writeln!(out, "{n},{},{}", Float(n as f64 * tau), Float(*p))?;
            }
            Ok(())
        });
    }

    let spec = reset_spec(cfg, &h)?;
    let mut rho0 = spec.reset_matrix().clone();
    for &s in h.system() {
        rho0[(s, s)] = Complex64::new(cfg.run.p0, 0.0);
    }
    let map = AffineMap::new(&h, &spec, tau)?;
    let trace = map.iterate(&spec.extract_kept(&rho0), cfg.run.n_steps)?;
    write_file(&path, &header, |out| {
        writeln!(out, "# omega0={}", level_label(level))?;
        trace.write_csv(out, spec.kept_pairs())
    })
}

pub fn ec_run(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.protocol.kind != ProtocolKind::Ec {
        return Err(CliError::Config(
            "protocol.kind: ec-run needs protocol.kind = \"ec\"".into(),
        ));
    }
    let level = cfg.levels()[0];
    let h = cfg.hamiltonian(level)?;
    let profile = cfg.profile()?;
    let problem = EcSingleLevel::new(&h, &profile)?;
    let run = &cfg.run;
    let trajectory = match run.solver {
        Solver::Ode => ec_evolve_ode(&problem, run.p0, run.t_end, run.dt)?,
        Solver::MemoryKernel => ec_evolve_memory_kernel(&problem, run.p0, run.t_end, run.dt)?,
    };
    let header = cfg.echo("ec-run");
    let path = output_path(cfg, "ec_trajectory.csv")?;
    write_file(&path, &header, |out| {
        writeln!(out, "# omega0={}", level_label(level))?;
        writeln!(out, "# target={}", problem.target)?;
        if let Some(t) = problem.revival_time {
            writeln!(out, "# revival_time={t}")?;
        }
        trajectory.write_csv(out, run.stride)
    })?;

    if run.tau.is_empty() {
        return Ok(());
    }
    let settings = EcSettings {
        p0: run.p0,
        t_end: run.t_end,
        dt: run.dt,
        sigma: cfg.sigma(),
    };
    let comparison =
        ec_stroboscopic_compare(&h, &profile, &run.tau, &settings).map_err(|e| match e {
            Error::GridMisfit(msg) => CliError::Config(format!("run.tau: {msg}")),
            other => other.into(),
        })?;
    let path = output_path(cfg, "ec_rates.csv")?;
    write_file(&path, &header, |out| {
        writeln!(out, "# omega0={}", level_label(level))?;
        comparison.write_csv(out)
    })
}

pub fn design_map(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.model.kind != ModelKind::Chain {
        return Err(CliError::Config(
            "model.kind: design-map needs model.kind = \"chain\"".into(),
        ));
    }
    let omega0 = cfg.omega0_grid().ok_or_else(|| {
        CliError::Config("grid: design-map needs omega0_values or omega0_min/max/count".into())
    })?;
    let m = &cfg.model;
    let map = DesignMap::compute(&omega0, &cfg.tau_grid(), m.hopping, m.coupling, m.n_bath)?;
    let path = output_path(cfg, "design_map.csv")?;
    write_file(&path, &cfg.echo("design-map"), |out| map.write_csv(out))?;
    println!("ridge points: {}", map.ridge_points().len());
    Ok(())
}

pub fn selftest(fault: Fault) -> Result<(), CliError> {
    let report = run_selftest(fault)?;
    print!("{report}");
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::SelfTest(report.failures().join(", ")))
    }
}
