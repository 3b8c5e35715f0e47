//! Run configuration: a TOML file with `[model]`, `[numerics]`, `[task]` and
//! `[output]` tables, plus `section.key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use fk_kam::io::parse_potential;
use fk_kam::model::{NondegeneracyThresholds, PotentialMode};
use fk_kam::{diophantine_constant, Grid, KamError, KamOptions, ModelConfig, Potential};
use num_complex::Complex64;
use serde::Deserialize;

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            ConfigError::Parse(m) => f.write_str(m),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub j: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// total torus dimension
    #[serde(default = "default_d")]
    pub d: usize,
    pub omega: Vec<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_kappa_cutoff")]
    pub kappa_cutoff: usize,
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub eta: f64,
    /// amplitude multiplying the potential
    #[serde(default = "one")]
    pub mu: f64,
    pub potential_file: Option<PathBuf>,
    #[serde(default)]
    pub modes: Vec<ModeEntry>,
    #[serde(default = "default_strip")]
    pub potential_strip: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_range_margin")]
    pub range_margin: f64,
    #[serde(default = "default_analytic_strip")]
    pub analytic_strip: f64,
    #[serde(default = "yes")]
    pub check_nondegeneracy: bool,
    #[serde(default = "default_stall_ratio")]
    pub stall_ratio: f64,
    #[serde(default = "default_stall_steps")]
    pub stall_steps: usize,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBlock {
    /// series order for lindstedt and compare
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_mu_list")]
    pub mu_list: Vec<f64>,
    #[serde(default = "default_eta_count")]
    pub eta_count: usize,
    #[serde(default = "default_iota")]
    pub iota: f64,
    /// dense mode cutoff for oracle-check
    #[serde(default = "default_dense_cutoff")]
    pub dense_cutoff: i64,
    #[serde(default = "default_oracle_steps")]
    pub oracle_steps: usize,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    /// perturbed restarts after solve; 0 disables the probe
    #[serde(default)]
    pub probe_restarts: usize,
    #[serde(default = "default_probe_scale")]
    pub probe_scale: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for TaskBlock {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub dumps: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub task: TaskBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// directory of the config file, for relative paths
    #[serde(skip)]
    pub base: PathBuf,
}

fn default_d() -> usize {
    2
}
fn default_tau() -> f64 {
    1.0
}
fn default_kappa_cutoff() -> usize {
    200
}
fn default_beta() -> Vec<f64> {
    vec![1.0, 0.5]
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_strip() -> f64 {
    fk_kam::model::DEFAULT_POTENTIAL_STRIP
}
fn default_grid() -> usize {
    128
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    30
}
fn default_oversample() -> usize {
    2
}
fn default_range_margin() -> f64 {
    0.5
}
fn default_analytic_strip() -> f64 {
    0.1
}
fn default_stall_ratio() -> f64 {
    0.9
}
fn default_stall_steps() -> usize {
    2
}
fn default_order() -> usize {
    3
}
fn default_mu_list() -> Vec<f64> {
    (0..5).map(|i| 1e-3 * 10f64.powf(i as f64 / 4.0)).collect()
}
fn default_eta_count() -> usize {
    32
}
fn default_iota() -> f64 {
    0.01
}
fn default_dense_cutoff() -> i64 {
    21
}
fn default_oracle_steps() -> usize {
    4
}
fn default_oracle_tol() -> f64 {
    1e-8
}
fn default_probe_scale() -> f64 {
    1e-4
}
fn default_seed() -> u64 {
    7
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("override '{spec}' is not section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| ConfigError::Parse(format!("override key '{path}' is not section.key")))?;
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(t) = entry else {
        return Err(ConfigError::Parse(format!("'{section}' is not a table")));
    };
    t.insert(key.trim().to_string(), override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let (text, base) = match path {
            Some(p) => (
                std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.to_path_buf(), e))?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (String::new(), PathBuf::new()),
        };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.base = base;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid, KamError> {
        Grid::new(self.model.d - 1, self.numerics.grid_size)
    }

    /// Potential before scaling by `mu`.
    pub fn base_potential(&self) -> Result<Potential, KamError> {
        let m = &self.model;
        let mut modes: Vec<PotentialMode> = m
            .modes
            .iter()
            .map(|e| PotentialMode {
                j: e.j.clone(),
                amp: Complex64::new(e.re, e.im),
            })
            .collect();
        if let Some(file) = &m.potential_file {
            let path = if file.is_absolute() { file.clone() } else { self.base.join(file) };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| KamError::InvalidInput(format!("{}: {e}", path.display())))?;
            let p = parse_potential(&text)?;
            if p.dim_total() != m.d {
                return Err(KamError::ShapeMismatch(format!(
                    "potential file has d={}, model has d={}",
                    p.dim_total(),
                    m.d
                )));
            }
            modes.extend(p.modes().iter().cloned());
        }
        let mut p = if modes.is_empty() {
            Potential::zero(m.d)
        } else {
            Potential::new(m.d, modes)?
        };
        p.strip = m.potential_strip;
        Ok(p)
    }

    /// Model with the potential `base_potential()`, not scaled by `mu`.
    pub fn family_model(&self) -> Result<ModelConfig, KamError> {
        let m = &self.model;
        if m.omega.len() + 1 != m.d {
            return Err(KamError::ShapeMismatch(format!(
                "omega has {} entries for d={}",
                m.omega.len(),
                m.d
            )));
        }
        let freq = diophantine_constant(&m.omega, m.tau, m.kappa_cutoff)?;
        let mut cfg = ModelConfig::new(freq, m.beta.clone(), m.eta, self.base_potential()?)?;
        let n = &self.numerics;
        cfg.dealias = n.dealias;
        cfg.oversample = n.oversample;
        cfg.range_margin = n.range_margin;
        cfg.analytic_strip = n.analytic_strip;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The model with potential `mu W`.
    pub fn model(&self) -> Result<ModelConfig, KamError> {
        Ok(self.family_model()?.scaled(self.model.mu))
    }

    pub fn kam_options(&self) -> KamOptions {
        let n = &self.numerics;
        KamOptions {
            tol: n.tol,
            max_iter: n.max_iter,
            stall_ratio: n.stall_ratio,
            stall_steps: n.stall_steps,
            check_nondegeneracy: n.check_nondegeneracy,
            thresholds: NondegeneracyThresholds::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, over: &[&str]) -> Result<RunConfig, ConfigError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, text).unwrap();
        RunConfig::load(Some(&p), &over.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    #[test]
    fn defaults_fill_in() {
        let c = load("[model]\nomega = [0.6180339887498949]\n", &[]).unwrap();
        assert_eq!(c.numerics.grid_size, 128);
        assert_eq!(c.task.eta_count, 32);
        assert_eq!(c.model.beta, vec![1.0, 0.5]);
        assert!(c.base_potential().unwrap().is_zero());
    }

    #[test]
    fn missing_omega_and_unknown_keys_rejected() {
        assert!(matches!(load("[model]\nd = 2\n", &[]), Err(ConfigError::Parse(_))));
        assert!(load("[model]\nomega = [0.6]\nfoo = 1\n", &[]).is_err());
        assert!(load("[model]\nomega = [0.6]\n[numerics]\ngrid = 4\n", &[]).is_err());
    }

    #[test]
    fn overrides_replace_keys() {
        let c = load(
            "[model]\nomega = [0.6180339887498949]\n",
            &["numerics.grid_size=64", "model.mu=0.05", "output.dir=elsewhere", "model.beta=[2.0, 1.0]"],
        )
        .unwrap();
        assert_eq!(c.numerics.grid_size, 64);
        assert_eq!(c.model.mu, 0.05);
        assert_eq!(c.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(c.model.beta, vec![2.0, 1.0]);
        assert!(load("[model]\nomega = [0.6]\n", &["nonsense"]).is_err());
    }

    #[test]
    fn inline_modes_and_file_merge() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("w.txt"), "# d=2\n0 1 0.01 0\n").unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(
            &p,
            "[model]\nomega = [0.6180339887498949]\npotential_file = \"w.txt\"\nmodes = [{ j = [1, 0], re = 0.5 }]\n",
        )
        .unwrap();
        let c = RunConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(c.base_potential().unwrap().modes().len(), 4);
    }
}
