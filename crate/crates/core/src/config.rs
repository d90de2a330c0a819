//! Run configuration: a TOML file with fixed sections. Unknown keys are
//! rejected so a misspelled key can never fall back to a default silently.
//!
//! ```toml
//! [model]
//! n = 10                      # single-n commands
//! n_list = [6, 8, 10, 12, 14] # scan and macro-test
//! coupling_kind = "disordered"   # or "uniform"
//! g = 1.0                     # uniform coupling
//! g_range = [0.5, 1.5]        # disordered coupling
//! seed = 1                    # disordered draw for single-n commands
//! alpha = 0.0
//! epsilon = 0.0
//!
//! [amplitudes]
//! c0 = [0.7071067811865476, 0.0]  # (re, im)
//! c1 = [0.7071067811865476, 0.0]
//!
//! [evolution]
//! method = "iterative_krylov"  # or "dense_eigen"
//! dt = 0.1
//! t_max = 200.0
//! tolerance = 1e-9
//! krylov_dim = 16
//!
//! [pointer]
//! theta = 0.25
//!
//! [scan]
//! seeds = [1, 2, 3]
//! max_tail_variation = 0.01
//! record_timing = false
//!
//! [macro]
//! family = "pointer"          # or "single_unit"
//! k = 1
//! trials = 1000
//! seed = 7
//! t_max = 0.0                 # 0 compares static expectations
//! slack = 1e-9
//!
//! [output]
//! directory = "out"
//! formats = ["csv", "dat"]
//! ```

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolutionConfig, Method};
use crate::error::{Error, Result};
use crate::model::{CouplingKind, ModelSpec, DEFAULT_G_RANGE};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub amplitudes: AmplitudeSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub pointer: PointerSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default, rename = "macro")]
    pub macro_test: MacroSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingChoice {
    Uniform,
    Disordered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Only the cascade amplifier is implemented.
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    pub coupling_kind: CouplingChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_range: Option<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_kind() -> String {
    "cascade".into()
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            n: None,
            n_list: None,
            coupling_kind: CouplingChoice::Disordered,
            g: None,
            g_range: None,
            seed: 0,
            alpha: 0.0,
            epsilon: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSection {
    pub c0: [f64; 2],
    pub c1: [f64; 2],
}

impl Default for AmplitudeSection {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            c0: [h, 0.0],
            c1: [h, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
}

fn default_method() -> Method {
    Method::IterativeKrylov
}
fn default_dt() -> f64 {
    0.1
}
fn default_t_max() -> f64 {
    200.0
}
fn default_tolerance() -> f64 {
    1e-9
}
fn default_krylov_dim() -> usize {
    16
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            method: default_method(),
            dt: default_dt(),
            t_max: default_t_max(),
            tolerance: default_tolerance(),
            krylov_dim: default_krylov_dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerSection {
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    crate::macro_obs::DEFAULT_THETA
}

impl Default for PointerSection {
    fn default() -> Self {
        Self {
            theta: default_theta(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_tail")]
    pub max_tail_variation: f64,
    /// Fill the wall_time_s column. Off by default so repeated runs produce
    /// identical files.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_max_tail() -> f64 {
    crate::born::DEFAULT_MAX_TAIL_VARIATION
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            max_tail_variation: default_max_tail(),
            record_timing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    Pointer,
    SingleUnit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroSection {
    #[serde(default = "default_family")]
    pub family: FamilyChoice,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_macro_seed")]
    pub seed: u64,
    #[serde(default)]
    pub t_max: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_family() -> FamilyChoice {
    FamilyChoice::Pointer
}
fn default_k() -> usize {
    1
}
fn default_trials() -> usize {
    1000
}
fn default_macro_seed() -> u64 {
    7
}
fn default_slack() -> f64 {
    1e-9
}

impl Default for MacroSection {
    fn default() -> Self {
        Self {
            family: default_family(),
            k: default_k(),
            trials: default_trials(),
            seed: default_macro_seed(),
            t_max: 0.0,
            slack: default_slack(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Dat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that does not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.kind != "cascade" {
            return Err(invalid("model.kind", format!("unknown model `{}`", m.kind)));
        }
        match m.coupling_kind {
            CouplingChoice::Uniform => {
                if m.g.is_none() {
                    return Err(invalid("model.g", "required for uniform couplings"));
                }
                if m.g_range.is_some() {
                    return Err(invalid("model.g_range", "only valid for disordered couplings"));
                }
            }
            CouplingChoice::Disordered => {
                if m.g.is_some() {
                    return Err(invalid("model.g", "only valid for uniform couplings"));
                }
            }
        }
        if let Some(n_list) = &m.n_list {
            if n_list.is_empty() {
                return Err(invalid("model.n_list", "must not be empty"));
            }
        }
        for n in m.n.iter().chain(m.n_list.iter().flatten()) {
            self.model_spec(*n)?;
        }
        self.evolution_config()?;
        let t = self.evolution.t_max;
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("evolution.t_max", format!("must be > 0, got {t}")));
        }
        self.amplitudes()?;
        let theta = self.pointer.theta;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid("pointer.theta", format!("must lie in (0, 1), got {theta}")));
        }
        if self.scan.seeds.is_empty() {
            return Err(invalid("scan.seeds", "must not be empty"));
        }
        if !(self.scan.max_tail_variation > 0.0) {
            return Err(invalid("scan.max_tail_variation", "must be > 0"));
        }
        if !self.output.formats.contains(&Format::Csv) {
            return Err(invalid("output.formats", "must include \"csv\""));
        }
        let mt = &self.macro_test;
        if mt.trials == 0 {
            return Err(invalid("macro.trials", "must be > 0"));
        }
        if !(mt.t_max >= 0.0 && mt.slack >= 0.0) {
            return Err(invalid("macro", "t_max and slack must be >= 0"));
        }
        Ok(())
    }

    pub fn coupling_kind(&self) -> Result<CouplingKind> {
        let m = &self.model;
        Ok(match m.coupling_kind {
            CouplingChoice::Uniform => CouplingKind::Uniform {
                g: m.g.ok_or_else(|| invalid("model.g", "missing"))?,
            },
            CouplingChoice::Disordered => {
                let [g_min, g_max] = m.g_range.unwrap_or([DEFAULT_G_RANGE.0, DEFAULT_G_RANGE.1]);
                CouplingKind::Disordered {
                    seed: m.seed,
                    g_min,
                    g_max,
                }
            }
        })
    }

    pub fn model_spec(&self, n: usize) -> Result<ModelSpec> {
        let wrap = |key: &'static str| move |e: Error| invalid(key, e);
        ModelSpec::new(n, self.coupling_kind()?)
            .map_err(wrap("model"))?
            .with_basis_angle(self.model.alpha)
            .map_err(wrap("model.alpha"))?
            .with_self_energy(self.model.epsilon)
            .map_err(wrap("model.epsilon"))
    }

    /// The spec for single-n commands.
    pub fn single_spec(&self) -> Result<ModelSpec> {
        let n = self
            .model
            .n
            .ok_or_else(|| invalid("model.n", "required for this command"))?;
        self.model_spec(n)
    }

    pub fn n_list(&self) -> Result<Vec<usize>> {
        self.model
            .n_list
            .clone()
            .ok_or_else(|| invalid("model.n_list", "required for this command"))
    }

    pub fn evolution_config(&self) -> Result<EvolutionConfig> {
        let e = &self.evolution;
        let cfg = EvolutionConfig {
            method: e.method,
            krylov_dim: e.krylov_dim,
            dt: e.dt,
            tolerance: e.tolerance,
        };
        cfg.validate().map_err(|err| invalid("evolution", err))?;
        Ok(cfg)
    }

    pub fn amplitudes(&self) -> Result<(C64, C64)> {
        let [a, b] = self.amplitudes.c0;
        let [c, d] = self.amplitudes.c1;
        let (c0, c1) = (C64::new(a, b), C64::new(c, d));
        let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "amplitudes",
                format!("|c0|² + |c1|² must be 1, got norm {norm}"),
            ));
        }
        // renormalize the few ulps lost in decimal input
        Ok((c0 / norm, c1 / norm))
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}
