//! Scenario files: TOML sections with defaults for everything, dotted-path overrides,
//! and load-time validation that names the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use super::RunnerError;
use crate::diagnostics::{VerifyOptions, DEFAULT_EPS_FRONT, DEFAULT_EPS_MASS};
use crate::dynamics::ModelParams;
use crate::kernels::{validate_kernel, KernelSpec, ValidatedKernel};
use crate::simulator::{stability_bound, InitialProfile};

/// A kernel given inline or as a two-column table file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSource {
    File { table_file: PathBuf },
    Spec(KernelSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsConfig {
    pub j1: KernelSource,
    pub j2: KernelSource,
}

impl Default for KernelsConfig {
    fn default() -> Self {
        let uniform = KernelSource::Spec(KernelSpec::Uniform { half_width: 1.0 });
        Self { j1: uniform.clone(), j2: uniform }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub u0: InitialProfile,
    pub v0: InitialProfile,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            u0: InitialProfile::CosineBump { amplitude: 1.0 },
            v0: InitialProfile::Constant { value: 1.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub series_every: f64,
    pub window_pad: f64,
    /// Rerun at `dt / 2` and report the change in the final fronts.
    pub dt_halving_check: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            dx: 0.05,
            dt: 0.02,
            t_end: 50.0,
            snapshot_every: 10.0,
            series_every: 0.5,
            window_pad: 4.0,
            dt_halving_check: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub eps_front: f64,
    pub eps_mass: f64,
    /// Half-width of the `v_dev` window in the time series; `2 h0` when absent.
    pub v_dev_half_width: Option<f64>,
    /// Run the theorem checks (exit status 4 if any fails).
    pub verify: bool,
    pub tolerances: VerifyOptions,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            eps_front: DEFAULT_EPS_FRONT,
            eps_mass: DEFAULT_EPS_MASS,
            v_dev_half_width: None,
            verify: false,
            tolerances: VerifyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub svg: bool,
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), svg: true, snapshots: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeConfig {
    pub u0: f64,
    pub v0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { u0: 0.1, v0: 0.1, t_end: 200.0, dt: 0.01, sample_every: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    J1,
    J2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    pub lengths: Vec<f64>,
    pub kernel: KernelChoice,
    /// Cell width; support radius / 40 when absent.
    pub dx: Option<f64>,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { lengths: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0], kernel: KernelChoice::J1, dx: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub max_cells: usize,
    /// Echoed into the sweep output; every cell is deterministic.
    pub seed: Option<u64>,
    /// Also write each cell's full output under `cells/cell_NNNN/`.
    pub write_cells: bool,
    pub axes: Vec<SweepAxis>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { max_cells: 256, seed: None, write_cells: false, axes: Vec::new() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub kernels: KernelsConfig,
    pub initial: InitialConfig,
    pub numerics: NumericsConfig,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
    pub ode: OdeConfig,
    pub eigen: EigenConfig,
    pub sweep: SweepConfig,
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> RunnerError {
    RunnerError::ConfigInvalid { path: path.into(), reason: reason.into() }
}

fn from_value(value: Value) -> Result<ScenarioConfig, RunnerError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

/// Parse `value` of a `--set` as TOML, falling back to a bare string.
fn parse_override_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Set `path` (dotted) in a normalized config tree. Every parent must exist; the leaf
/// may be new only if the schema accepts it.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), RunnerError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(invalid(path, "malformed dotted path"));
    }
    let (leaf, parents) = keys.split_last().unwrap();
    let mut node = root;
    for key in parents {
        node = node
            .as_table_mut()
            .and_then(|t| t.get_mut(*key))
            .ok_or_else(|| invalid(path, format!("unknown path (no section `{key}`)")))?;
    }
    let table = node.as_table_mut().ok_or_else(|| invalid(path, "parent is not a section"))?;
    table.insert((*leaf).to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RunnerError> {
        let value: Value = toml::from_str::<toml::Table>(text)
            .map(Value::Table)
            .map_err(|e| invalid("", format!("TOML syntax: {}", e.message())))?;
        from_value(value)
    }

    pub fn from_file(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::ConfigRead { path: path.to_path_buf(), reason: e.to_string() })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_relative_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Table files are relative to the config file.
    fn resolve_relative_paths(&mut self, base: &Path) {
        for source in [&mut self.kernels.j1, &mut self.kernels.j2] {
            if let KernelSource::File { table_file } = source {
                if table_file.is_relative() {
                    *table_file = base.join(&*table_file);
                }
            }
        }
    }

    pub fn to_value(&self) -> Value {
        Value::try_from(self).expect("config is always representable as TOML")
    }

    /// Normalized TOML text (every field explicit).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Apply `path=value` overrides to the normalized form.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, RunnerError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = self.to_value();
        for item in overrides {
            let item = item.as_ref();
            let (path, raw) = item
                .split_once('=')
                .ok_or_else(|| invalid(item, "override must look like dotted.path=value"))?;
            set_path(&mut root, path.trim(), parse_override_value(raw.trim()))?;
        }
        from_value(root)
    }

    /// Apply typed overrides (sweep cells).
    pub fn with_values(&self, assignments: &[(String, Value)]) -> Result<Self, RunnerError> {
        let mut root = self.to_value();
        for (path, value) in assignments {
            set_path(&mut root, path, value.clone())?;
        }
        from_value(root)
    }

    pub fn v_dev_half_width(&self) -> f64 {
        self.diagnostics.v_dev_half_width.unwrap_or(2.0 * self.params.h0)
    }

    pub fn load_kernel(&self, which: KernelChoice) -> Result<ValidatedKernel, RunnerError> {
        let (name, source) = match which {
            KernelChoice::J1 => ("kernels.j1", &self.kernels.j1),
            KernelChoice::J2 => ("kernels.j2", &self.kernels.j2),
        };
        let spec = match source {
            KernelSource::Spec(spec) => spec.clone(),
            KernelSource::File { table_file } => {
                KernelSpec::from_table_file(table_file).map_err(|e| invalid(format!("{name}.table_file"), e.to_string()))?
            }
        };
        let resolution = self.numerics.dx.min(spec.declared_support() / 40.0);
        validate_kernel(&spec, resolution).map_err(|e| invalid(name, e.to_string()))
    }

    pub fn validate_params(&self) -> Result<(), RunnerError> {
        for (name, value) in self.params.named() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("params.{name}"), format!("must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Simulation numerics and diagnostics thresholds (parameters included).
    pub fn validate_numerics(&self) -> Result<(), RunnerError> {
        self.validate_params()?;
        let n = &self.numerics;
        for (name, value) in [
            ("dx", n.dx),
            ("dt", n.dt),
            ("t_end", n.t_end),
            ("snapshot_every", n.snapshot_every),
            ("series_every", n.series_every),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("numerics.{name}"), format!("must be positive, got {value}")));
            }
        }
        if !(n.window_pad >= 0.0 && n.window_pad.is_finite()) {
            return Err(invalid("numerics.window_pad", format!("must be nonnegative, got {}", n.window_pad)));
        }
        let bound = stability_bound(&self.params);
        if n.dt > bound {
            return Err(invalid("numerics.dt", format!("dt = {} exceeds the stability bound {bound}", n.dt)));
        }
        let d = &self.diagnostics;
        for (name, value) in [("eps_front", d.eps_front), ("eps_mass", d.eps_mass)] {
            if !(value > 0.0) {
                return Err(invalid(format!("diagnostics.{name}"), format!("must be positive, got {value}")));
            }
        }
        if let Some(l) = d.v_dev_half_width {
            if !(l > 0.0) {
                return Err(invalid("diagnostics.v_dev_half_width", format!("must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn validate_ode(&self) -> Result<(), RunnerError> {
        self.validate_params()?;
        let o = &self.ode;
        for (name, value) in [("t_end", o.t_end), ("dt", o.dt), ("sample_every", o.sample_every)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("ode.{name}"), format!("must be positive, got {value}")));
            }
        }
        if !(o.u0 >= 0.0 && o.v0 >= 0.0) {
            return Err(invalid("ode.u0", "initial ODE state must be nonnegative"));
        }
        Ok(())
    }

    pub fn validate_eigen(&self) -> Result<(), RunnerError> {
        self.validate_params()?;
        if let Some((i, l)) = self.eigen.lengths.iter().enumerate().find(|(_, l)| !(**l > 0.0)) {
            return Err(invalid(format!("eigen.lengths[{i}]"), format!("must be positive, got {l}")));
        }
        if let Some(dx) = self.eigen.dx {
            if !(dx > 0.0) {
                return Err(invalid("eigen.dx", format!("must be positive, got {dx}")));
            }
        }
        Ok(())
    }

    /// Full load-time validation; returns the validated kernels.
    pub fn validate(&self) -> Result<(ValidatedKernel, ValidatedKernel), RunnerError> {
        self.validate_numerics()?;
        Ok((self.load_kernel(KernelChoice::J1)?, self.load_kernel(KernelChoice::J2)?))
    }
}
