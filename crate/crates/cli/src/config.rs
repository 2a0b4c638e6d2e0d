//! Experiment configuration: one TOML file with `[model]`, `[sampler]`,
//! `[output]` and (for `experiment-deblur`) `[experiment]` tables. The grammar
//! is documented in `docs/config.md` at the workspace root.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use pdfp_langevin::pdfp::pdfp_solve;
use pdfp_langevin::target::{motion_blur_kernel, phantom};
use pdfp_langevin::*;
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub output: OutputSection,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Deblur,
    Illposed,
    Toy1d,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Ground-truth PGM, relative to the config file. Without it a synthetic
    /// phantom of `size` is used.
    pub image: Option<PathBuf>,
    #[serde(default = "default_size")]
    pub size: [usize; 2],
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_lambda_reg")]
    pub lambda_reg: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Seed of the observation noise; separate from the chain seed.
    #[serde(default)]
    pub noise_seed: u64,
    // illposed only
    #[serde(default = "default_dim_obs")]
    pub dim_obs: usize,
    #[serde(default = "default_param_shape")]
    pub param_shape: Vec<usize>,
    #[serde(default = "default_condition")]
    pub condition: f64,
    // toy1d only
    #[serde(default)]
    pub toy: ToyChoice,
}

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `1 x length` horizontal motion blur with equal weights.
    Motion { length: usize },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Motion { length: 7 }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ToyChoice {
    #[default]
    Lasso,
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum InitPoint {
    /// Minimizer of `U`, from a fixed 3000-iteration PDFP run.
    #[default]
    Map,
    /// The observation (deblur only).
    Observation,
    Zero,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub kind: String,
    pub delta: f64,
    /// Defaults to `delta`.
    pub rho: Option<f64>,
    #[serde(default = "one")]
    pub k: usize,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    #[serde(default)]
    pub p0: P0Choice,
    /// Transitions after burn-in.
    pub n: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: InitPoint,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum P0Choice {
    #[default]
    Literal,
    Kstep,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    /// Also write the energy trace.
    #[serde(default)]
    pub traces: bool,
    /// Number of coordinates whose traces feed the ESS summary.
    #[serde(default = "default_ess_coords")]
    pub ess_coords: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            traces: false,
            ess_coords: default_ess_coords(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub samplers: Vec<String>,
    pub k: Vec<usize>,
    /// Per-sampler `delta = rho` overriding `[sampler]`.
    #[serde(default)]
    pub delta: BTreeMap<String, f64>,
    /// Per-sampler starting point overriding `sampler.init`.
    #[serde(default)]
    pub init: BTreeMap<String, InitPoint>,
}

fn default_size() -> [usize; 2] {
    [64, 64]
}
fn default_sigma() -> f64 {
    0.01
}
fn default_lambda_reg() -> f64 {
    30.0
}
fn default_ridge() -> f64 {
    1e-4
}
fn default_dim_obs() -> usize {
    45
}
fn default_param_shape() -> Vec<usize> {
    vec![16, 16]
}
fn default_condition() -> f64 {
    1e10
}
fn one() -> usize {
    1
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_ess_coords() -> usize {
    50
}

/// A parsed config plus the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base_dir).with_context(|| format!("in config {}", path.display()))
    }

    pub fn from_str(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        config.check_fields()?;
        Ok(Self { config, base_dir })
    }

    pub fn image_path(&self) -> Option<PathBuf> {
        self.config.model.image.as_ref().map(|p| self.base_dir.join(p))
    }
}

impl ExperimentConfig {
    /// Range checks that need no model.
    fn check_fields(&self) -> Result<()> {
        let m = &self.model;
        ensure!(m.sigma > 0.0, "model.sigma: must be positive, got {}", m.sigma);
        ensure!(m.lambda_reg >= 0.0, "model.lambda_reg: must be nonnegative, got {}", m.lambda_reg);
        ensure!(m.ridge >= 0.0, "model.ridge: must be nonnegative, got {}", m.ridge);
        let KernelSpec::Motion { length } = m.kernel;
        ensure!(length > 0, "model.kernel.length: must be positive");
        let s = &self.sampler;
        self.sampler_kind().context("sampler.kind")?;
        ensure!(s.n > 0, "sampler.n: must be positive");
        ensure!(s.thin > 0, "sampler.thin: must be positive");
        if let Some(e) = &self.experiment {
            ensure!(!e.samplers.is_empty(), "experiment.samplers: must name at least one sampler");
            ensure!(!e.k.is_empty(), "experiment.k: must list at least one K");
            ensure!(e.k.iter().all(|&k| k > 0), "experiment.k: every K must be at least 1");
            for name in e.samplers.iter().chain(e.delta.keys()).chain(e.init.keys()) {
                name.parse::<SamplerKind>()
                    .map_err(|err| anyhow!("experiment.samplers: {err}"))?;
            }
        }
        Ok(())
    }

    pub fn sampler_kind(&self) -> Result<SamplerKind> {
        self.sampler.kind.parse().map_err(|e| anyhow!("{e}"))
    }

    /// Sampler settings for `kind` with `K = k` and optional `delta = rho`.
    pub fn sampler_config(&self, k: usize, delta_rho: Option<f64>) -> Config {
        let s = &self.sampler;
        let (delta, rho) = match delta_rho {
            Some(d) => (d, d),
            None => (s.delta, s.rho.unwrap_or(s.delta)),
        };
        let mut cfg = SamplerConfig::new(delta).with_rho(rho).with_k(k);
        cfg.gamma = s.gamma;
        cfg.lambda = s.lambda;
        cfg.p0 = match s.p0 {
            P0Choice::Literal => P0Init::Literal,
            P0Choice::Kstep => P0Init::KStep,
        };
        cfg
    }

    pub fn run_config(&self, track: Vec<usize>) -> RunConfig {
        let s = &self.sampler;
        let mut rc = RunConfig::new(s.burn_in + s.n, s.burn_in, s.thin);
        rc.track = track;
        rc.energy_trace = self.output.traces;
        rc
    }
}

/// A built model: the target plus whatever reference data it comes with.
#[derive(Debug)]
pub struct Model {
    pub kind: ModelKind,
    pub target: Target,
    pub truth: Option<RealField>,
    pub observation: Option<RealField>,
    pub toy: Option<ToyTarget<f64>>,
}

impl Model {
    pub fn build(loaded: &LoadedConfig) -> Result<Self> {
        let m = &loaded.config.model;
        match m.kind {
            ModelKind::Deblur => {
                let truth = match loaded.image_path() {
                    Some(p) => crate::pgm::read(&p)?,
                    None => phantom(m.size[0], m.size[1]).context("model.size")?,
                };
                let KernelSpec::Motion { length } = m.kernel;
                let kernel = motion_blur_kernel(length)?;
                let (model, target) = make_deblur_model(
                    &truth,
                    &kernel,
                    m.sigma,
                    m.lambda_reg,
                    m.ridge,
                    Noise::Seeded(m.noise_seed),
                )
                .context("model")?;
                Ok(Self {
                    kind: m.kind,
                    target,
                    truth: Some(truth),
                    observation: Some(model.observation),
                    toy: None,
                })
            }
            ModelKind::Illposed => {
                let (model, target) = make_illposed_dense(
                    m.dim_obs,
                    &m.param_shape,
                    m.condition,
                    m.sigma,
                    m.lambda_reg,
                    m.ridge,
                    m.noise_seed,
                )
                .context("model")?;
                Ok(Self {
                    kind: m.kind,
                    target,
                    truth: None,
                    observation: Some(model.observation),
                    toy: None,
                })
            }
            ModelKind::Toy1d => {
                let toy = make_toy_1d(match m.toy {
                    ToyChoice::Lasso => ToyKind::LassoPosterior,
                    ToyChoice::Gaussian => ToyKind::Gaussian,
                })?;
                Ok(Self {
                    kind: m.kind,
                    target: toy.target.clone(),
                    truth: None,
                    observation: None,
                    toy: Some(toy),
                })
            }
        }
    }

    /// Image shape when the parameter is a 2-D image with a known truth.
    pub fn is_image(&self) -> bool {
        self.truth.is_some() && self.target.param_shape().len() == 2
    }

    pub fn initial_point(&self, init: InitPoint) -> Result<RealField> {
        let shape = self.target.param_shape();
        match init {
            InitPoint::Zero => Ok(RealField::zeros(shape)),
            InitPoint::Observation => match (&self.observation, self.kind) {
                (Some(y), ModelKind::Deblur) => Ok(y.clone()),
                _ => bail!("sampler.init: `observation` needs a deblur model"),
            },
            InitPoint::Map => {
                let prob = self.target.problem();
                let start = match (&self.observation, self.kind) {
                    (Some(y), ModelKind::Deblur) => y.clone(),
                    _ => RealField::zeros(shape),
                };
                let dual = RealField::zeros(prob.op().range_shape());
                let sol = pdfp_solve(prob, &prob.default_params(), start, dual, Stopping::Steps(3000))?;
                Ok(sol.x)
            }
        }
    }
}
