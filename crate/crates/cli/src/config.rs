//! Run configuration read from a sectioned TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zeno_core::{
    CMatrix, ChainParams, Complex64, OccupationProfile, QuadraticHamiltonian, Statistics,
};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub bath: BathSection,
    pub protocol: ProtocolSection,
    pub grid: GridSection,
    pub run: RunSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Chain,
    General,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticsKind {
    #[default]
    Fermion,
    Boson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub omega0: f64,
    pub hopping: f64,
    pub coupling: f64,
    pub n_bath: usize,
    pub statistics: StatisticsKind,
    /// Real and imaginary parts of `M`, row by row, for `kind = "general"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_re: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_im: Option<Vec<Vec<f64>>>,
    pub system: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Chain,
            omega0: 0.0,
            hopping: 1.0,
            coupling: 0.2,
            n_bath: zeno_core::model::DEFAULT_BATH_SIZE,
            statistics: StatisticsKind::Fermion,
            matrix_re: None,
            matrix_im: None,
            system: vec![0],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupationKind {
    #[default]
    Empty,
    Constant,
    FermiDirac,
    BoseEinstein,
    Tabulated,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub occupation: OccupationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// `[energy, occupation]` points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    #[default]
    Ri,
    Ec,
    Custom,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_pairs: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_count: usize,
    pub tau_spacing: Spacing,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0_values: Option<Vec<f64>>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            tau_min: 0.01,
            tau_max: 2.0,
            tau_count: 100,
            tau_spacing: Spacing::Linear,
            tau_values: None,
            omega0_min: None,
            omega0_max: None,
            omega0_count: None,
            omega0_values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub p0: f64,
    pub n_steps: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Spectral broadening, defaults to `0.02 J`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Step durations for `ri-evolve` (first entry) and the EC stroboscopic rates.
    pub tau: Vec<f64>,
    /// Row thinning for trajectory output.
    pub stride: usize,
    pub solver: Solver,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Ode,
    MemoryKernel,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            p0: 1.0,
            n_steps: 100,
            t_end: 100.0,
            dt: 0.01,
            sigma: None,
            tau: vec![0.1],
            stride: 1,
            solver: Solver::Ode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            prefix: String::new(),
        }
    }
}

/// Command-line values that replace configured ones.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tau: Vec<f64>,
    pub omega0: Vec<f64>,
    pub out: Option<PathBuf>,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn finite(key: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite, got {x}")))
    }
}

fn spaced(min: f64, max: f64, count: usize, spacing: Spacing) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| {
            let f = i as f64 / last;
            match spacing {
                Spacing::Linear => min + (max - min) * f,
                Spacing::Log => min * (max / min).powf(f),
            }
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.tau.is_empty() {
            let mut sorted = o.tau.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            self.grid.tau_values = Some(sorted);
            self.run.tau = o.tau.clone();
        }
        if !o.omega0.is_empty() {
            self.grid.omega0_values = Some(o.omega0.clone());
            self.model.omega0 = o.omega0[0];
        }
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        finite("model.omega0", m.omega0)?;
        finite("model.hopping", m.hopping)?;
        finite("model.coupling", m.coupling)?;
        if m.kind == ModelKind::Chain {
            if m.hopping <= 0.0 {
                return Err(invalid("model.hopping", "must be positive"));
            }
            if m.n_bath < 2 {
                return Err(invalid("model.n_bath", "must be at least 2"));
            }
        } else if m.matrix_re.is_none() {
            return Err(invalid(
                "model.matrix_re",
                "required for kind = \"general\"",
            ));
        }
        if m.system.is_empty() {
            return Err(invalid("model.system", "must list at least one level"));
        }

        let b = &self.bath;
        for (key, v) in [
            ("bath.value", b.value),
            ("bath.beta", b.beta),
            ("bath.mu", b.mu),
        ] {
            if let Some(x) = v {
                finite(key, x)?;
            }
        }

        let g = &self.grid;
        match &g.tau_values {
            Some(values) => {
                if values.is_empty() {
                    return Err(invalid("grid.tau_values", "must not be empty"));
                }
                for &t in values {
                    if !(t > 0.0 && t.is_finite()) {
                        return Err(invalid("grid.tau_values", format!("{t} is not positive")));
                    }
                }
                if values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("grid.tau_values", "must be strictly increasing"));
                }
            }
            None => {
                finite("grid.tau_min", g.tau_min)?;
                finite("grid.tau_max", g.tau_max)?;
                if g.tau_min <= 0.0 {
                    return Err(invalid("grid.tau_min", "must be positive"));
                }
                if g.tau_max < g.tau_min {
                    return Err(invalid("grid.tau_max", "must not be below grid.tau_min"));
                }
                if g.tau_count < 1 {
                    return Err(invalid("grid.tau_count", "must be at least 1"));
                }
            }
        }
        if let Some(values) = &g.omega0_values {
            if values.is_empty() {
                return Err(invalid("grid.omega0_values", "must not be empty"));
            }
            for &w in values {
                finite("grid.omega0_values", w)?;
            }
        } else if g.omega0_min.is_some() || g.omega0_max.is_some() || g.omega0_count.is_some() {
            let (min, max, count) = match (g.omega0_min, g.omega0_max, g.omega0_count) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(invalid(
                        "grid.omega0_min",
                        "omega0_min, omega0_max and omega0_count go together",
                    ))
                }
            };
            finite("grid.omega0_min", min)?;
            finite("grid.omega0_max", max)?;
            if max < min {
                return Err(invalid(
                    "grid.omega0_max",
                    "must not be below grid.omega0_min",
                ));
            }
            if count < 1 {
                return Err(invalid("grid.omega0_count", "must be at least 1"));
            }
        }

        let r = &self.run;
        finite("run.p0", r.p0)?;
        finite("run.t_end", r.t_end)?;
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(invalid("run.dt", "must be positive"));
        }
        if r.t_end <= 0.0 {
            return Err(invalid("run.t_end", "must be positive"));
        }
        if let Some(s) = r.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("run.sigma", "must be positive"));
            }
        }
        for &t in &r.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("run.tau", format!("{t} is not positive")));
            }
        }
        if r.stride < 1 {
            return Err(invalid("run.stride", "must be at least 1"));
        }
        if self.protocol.kind == ProtocolKind::Custom && self.protocol.reset_pairs.is_none() {
            return Err(invalid(
                "protocol.reset_pairs",
                "required for kind = \"custom\"",
            ));
        }
        Ok(())
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        let g = &self.grid;
        match &g.tau_values {
            Some(values) => values.clone(),
            None => spaced(g.tau_min, g.tau_max, g.tau_count, g.tau_spacing),
        }
    }

    /// Explicit or generated level-energy grid, `None` when unset.
    pub fn omega0_grid(&self) -> Option<Vec<f64>> {
        let g = &self.grid;
        if let Some(values) = &g.omega0_values {
            return Some(values.clone());
        }
        match (g.omega0_min, g.omega0_max, g.omega0_count) {
            (Some(a), Some(b), Some(c)) => Some(spaced(a, b, c, Spacing::Linear)),
            _ => None,
        }
    }

    pub fn statistics(&self) -> Statistics {
        match self.model.statistics {
            StatisticsKind::Fermion => Statistics::Fermion,
            StatisticsKind::Boson => Statistics::Boson,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.run
            .sigma
            .unwrap_or(zeno_core::model::DEFAULT_BROADENING * self.model.hopping.abs())
    }

    pub fn profile(&self) -> Result<OccupationProfile, CliError> {
        let b = &self.bath;
        let need = |key: &str, v: Option<f64>| {
            v.ok_or_else(|| invalid(key, format!("required for occupation = {:?}", b.occupation)))
        };
        Ok(match b.occupation {
            OccupationKind::Empty => OccupationProfile::Empty,
            OccupationKind::Constant => OccupationProfile::Constant(need("bath.value", b.value)?),
            OccupationKind::FermiDirac => OccupationProfile::FermiDirac {
                beta: need("bath.beta", b.beta)?,
                mu: b.mu.unwrap_or(0.0),
            },
            OccupationKind::BoseEinstein => OccupationProfile::BoseEinstein {
                beta: need("bath.beta", b.beta)?,
                mu: b.mu.unwrap_or(0.0),
            },
            OccupationKind::Tabulated => OccupationProfile::Tabulated(
                b.table
                    .as_ref()
                    .ok_or_else(|| invalid("bath.table", "required for occupation = tabulated"))?
                    .iter()
                    .map(|p| (p[0], p[1]))
                    .collect(),
            ),
        })
    }

    /// Level energies to run at: the omega0 grid, else the configured chain
    /// level, else the general matrix as written (`None`).
    pub fn levels(&self) -> Vec<Option<f64>> {
        match (self.omega0_grid(), self.model.kind) {
            (Some(grid), _) => grid.into_iter().map(Some).collect(),
            (None, ModelKind::Chain) => vec![Some(self.model.omega0)],
            (None, ModelKind::General) => vec![None],
        }
    }

    /// The model, with the single system level energy replaced by `omega0` if given.
    pub fn hamiltonian(&self, omega0: Option<f64>) -> Result<QuadraticHamiltonian, CliError> {
        let m = &self.model;
        let h = match m.kind {
            ModelKind::Chain => QuadraticHamiltonian::single_level_chain(ChainParams::new(
                omega0.unwrap_or(m.omega0),
                m.hopping,
                m.coupling,
                m.n_bath,
            ))?,
            ModelKind::General => {
                let re = m
                    .matrix_re
                    .as_ref()
                    .ok_or_else(|| invalid("model.matrix_re", "required for kind = \"general\""))?;
                let n = re.len();
                if re.iter().any(|row| row.len() != n) {
                    return Err(invalid("model.matrix_re", "must be square"));
                }
                let im = match &m.matrix_im {
                    Some(im) if im.len() != n || im.iter().any(|row| row.len() != n) => {
                        return Err(invalid("model.matrix_im", "must match model.matrix_re"))
                    }
                    Some(im) => im.clone(),
                    None => vec![vec![0.0; n]; n],
                };
                let mut matrix = CMatrix::from_fn(n, n, |i, j| Complex64::new(re[i][j], im[i][j]));
                if let Some(w) = omega0 {
                    match m.system.as_slice() {
                        [s] if *s < n => matrix[(*s, *s)] = Complex64::new(w, 0.0),
                        _ => {
                            return Err(invalid(
                                "model.system",
                                "an omega0 override needs exactly one system level",
                            ))
                        }
                    }
                }
                let env = (0..n).filter(|i| !m.system.contains(i)).collect();
                QuadraticHamiltonian::new(matrix, m.system.clone(), env, self.statistics())?
            }
        };
        Ok(h.with_statistics(self.statistics()))
    }

    /// The resolved configuration as `#`-prefixed TOML lines.
    pub fn echo(&self, command: &str) -> String {
        let body = toml::to_string(self).unwrap_or_default();
        let mut out = format!("# zeno {command}\n");
        for line in body.lines().filter(|l| !l.trim().is_empty()) {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}
