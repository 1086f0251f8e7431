//! Flat run configuration shared by the config file and the command line,
//! and the sidecar written next to every observation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Args, ValueEnum};
use pnppds_core::degrade::{DegradationSpec, NoiseSpec};
use pnppds_core::denoisers::DenoiserSpec;
use pnppds_core::linops::{shipped_kernel, ConvolutionKernel, OperatorSpec};
use pnppds_core::solver::{Relaxation, SolverConfig, Task};
use pnppds_core::Shape;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Three-block primal-dual plug-and-play iteration.
    PnpPds,
    /// Forward-backward baseline with a quadratic fidelity.
    PnpFbs,
    /// Douglas-Rachford reference solution of the convex program behind a
    /// prox-type denoiser.
    PdsOracle,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::PnpPds => "pnp-pds",
            SolverKind::PnpFbs => "pnp-fbs",
            SolverKind::PdsOracle => "pds-oracle",
        }
    }
}

/// `identity`, `dct-threshold[:t]`, `scaled:f` or `external`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DenoiserChoice {
    Identity,
    DctThreshold(f64),
    Scaled(f64),
    External,
}

pub const DEFAULT_DCT_THRESHOLD: f64 = 0.01;

impl FromStr for DenoiserChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let value = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| anyhow!("{name} needs a {what}, e.g. {name}:0.5"))?
                .parse::<f64>()
                .with_context(|| format!("bad {what} in {s:?}"))
        };
        Ok(match name {
            "identity" => DenoiserChoice::Identity,
            "dct-threshold" => match arg {
                Some(_) => DenoiserChoice::DctThreshold(value("threshold")?),
                None => DenoiserChoice::DctThreshold(DEFAULT_DCT_THRESHOLD),
            },
            "scaled" => DenoiserChoice::Scaled(value("factor")?),
            "external" => DenoiserChoice::External,
            _ => bail!("unknown denoiser {s:?}: expected identity, dct-threshold[:t], scaled:f or external"),
        })
    }
}

impl TryFrom<String> for DenoiserChoice {
    type Error = anyhow::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DenoiserChoice> for String {
    fn from(d: DenoiserChoice) -> String {
        d.to_string()
    }
}

impl fmt::Display for DenoiserChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserChoice::Identity => write!(f, "identity"),
            DenoiserChoice::DctThreshold(t) => write!(f, "dct-threshold:{t}"),
            DenoiserChoice::Scaled(a) => write!(f, "scaled:{a}"),
            DenoiserChoice::External => write!(f, "external"),
        }
    }
}

impl DenoiserChoice {
    pub fn spec(&self, endpoint: Option<&str>) -> Result<DenoiserSpec> {
        Ok(match self {
            DenoiserChoice::Identity => DenoiserSpec::Identity,
            DenoiserChoice::DctThreshold(t) => DenoiserSpec::DctSoftThreshold { threshold: *t },
            DenoiserChoice::Scaled(a) => DenoiserSpec::Scaled { factor: *a },
            DenoiserChoice::External => DenoiserSpec::External {
                endpoint: endpoint
                    .ok_or_else(|| anyhow!("the external denoiser needs --endpoint"))?
                    .to_string(),
            },
        })
    }
}

/// Every key is optional; command-line values override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with the same keys (snake_case); flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kernel file (`H W` then rows of taps) or a shipped name such as `motion_b` or `b`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Fraction of pixels removed by a random mask.
    #[arg(long)]
    pub mask_frac: Option<f64>,
    /// Seed of the mask, defaulting to the noise seed.
    #[arg(long)]
    pub mask_seed: Option<u64>,
    /// Gaussian noise level.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Poisson scaling.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Data-ball radius; defaults to alpha * sigma * sqrt(K).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// GKL weight (Poisson) or quadratic weight (pnp-fbs).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stopping tolerance on the update rate; 0 runs the full iteration count.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// identity | dct-threshold[:t] | scaled:f | external
    #[arg(long)]
    pub denoiser: Option<DenoiserChoice>,
    /// tcp://host:port, unix:/path or exec:command
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Refuse parameters that violate the convergence conditions (default).
    #[arg(long = "strict", action = ArgAction::SetTrue, overrides_with = "no_strict")]
    #[serde(skip)]
    pub strict_flag: bool,
    #[arg(long = "no-strict", action = ArgAction::SetTrue)]
    #[serde(skip)]
    pub no_strict: bool,
    #[arg(skip)]
    pub strict: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report path; the trace goes next to it with a `.csv` extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Ground truth for PSNR/SSIM in the report.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Trace every n-th iteration.
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Sample depth of PNG/PGM/PPM output.
    #[arg(long)]
    pub bits: Option<u8>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    /// Loads `--config` if given and lays the command-line values on top.
    pub fn resolve(self) -> Result<RunConfig> {
        let mut base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<RunConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let top = self;
        overlay!(base, top; seed, kernel, mask_frac, mask_seed, sigma, eta, eps, alpha, lambda, gamma1, gamma2,
            rho, max_iters, tol, solver, denoiser, endpoint, out, report, reference, record_every, bits);
        if top.strict_flag {
            base.strict = Some(true);
        } else if top.no_strict {
            base.strict = Some(false);
        }
        base.config = top.config;
        Ok(base)
    }

    pub fn is_strict(&self) -> bool {
        self.strict.unwrap_or(true)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn bits(&self) -> u8 {
        self.bits.unwrap_or(16)
    }

    pub fn solver(&self) -> SolverKind {
        self.solver.unwrap_or(SolverKind::PnpPds)
    }

    pub fn denoiser(&self) -> DenoiserChoice {
        self.denoiser.clone().unwrap_or(DenoiserChoice::DctThreshold(DEFAULT_DCT_THRESHOLD))
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        let noise = match (self.sigma, self.eta) {
            (Some(_), Some(_)) => bail!("give either --sigma or --eta, not both"),
            (Some(sigma), None) => NoiseSpec::Gaussian { sigma },
            (None, Some(eta)) => NoiseSpec::Poisson { eta },
            (None, None) => NoiseSpec::None,
        };
        noise.validate()?;
        Ok(noise)
    }

    /// Operator for an image of the given shape.
    pub fn operator(&self, shape: Shape) -> Result<OperatorSpec> {
        match (&self.kernel, self.mask_frac) {
            (Some(_), Some(_)) => bail!("give either --kernel or --mask-frac, not both"),
            (Some(name), None) => {
                let kernel = load_kernel(name)?;
                let kernel = pnppds_core::linops::normalize_kernel(&kernel, shape)?;
                Ok(OperatorSpec::Blur {
                    height: kernel.height(),
                    width: kernel.width(),
                    taps: kernel.taps_f64(),
                    normalize: false,
                })
            }
            (None, Some(masked_fraction)) => Ok(OperatorSpec::Mask {
                masked_fraction,
                seed: self.mask_seed.unwrap_or(self.seed()),
            }),
            (None, None) => Ok(OperatorSpec::Identity),
        }
    }

    /// Solver settings with the library defaults for anything unset.
    pub fn solver_config(&self, task: Task, poisson_eta: Option<f64>) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            gamma1: self.gamma1.unwrap_or(d.gamma1),
            gamma2: self.gamma2.unwrap_or(d.gamma2),
            relaxation: Relaxation::Constant(self.rho.unwrap_or(1.0)),
            max_iters: self
                .max_iters
                .unwrap_or_else(|| pnppds_core::solver::default_iterations(task, poisson_eta)),
            stop_tol: self.tol.unwrap_or(d.stop_tol),
            record_every: self.record_every.unwrap_or(d.record_every),
            strict: self.is_strict(),
            ..d
        }
    }
}

/// A kernel file, or a shipped kernel by name.
pub fn load_kernel(name: &str) -> Result<ConvolutionKernel<f64>> {
    let path = Path::new(name);
    if path.exists() {
        return Ok(ConvolutionKernel::load(path, None).with_context(|| format!("loading kernel {name}"))?);
    }
    shipped_kernel(name).ok_or_else(|| anyhow!("no kernel file or shipped kernel named {name:?}"))
}

/// Metadata written to `<observation>.json` by `degrade`; enough to rebuild
/// the forward model in `restore`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub shape: Shape,
    pub degradation: DegradationSpec,
    pub task: Task,
    /// Clean image the observation came from.
    #[serde(default)]
    pub source: Option<PathBuf>,
    /// Kernel as named on the command line.
    #[serde(default)]
    pub kernel: Option<String>,
}

pub fn task_of(op: &OperatorSpec) -> Task {
    match op {
        OperatorSpec::Mask { .. } => Task::Inpaint,
        _ => Task::Deblur,
    }
}

pub fn sidecar_path(observation: &Path) -> PathBuf {
    let mut s = observation.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Sidecar {
    pub fn load(observation: &Path) -> Result<Sidecar> {
        let path = sidecar_path(observation);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading sidecar {} (run `degrade` first)", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn save(&self, observation: &Path) -> Result<()> {
        let path = sidecar_path(observation);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn denoiser_choices_parse_and_print() {
        for s in ["identity", "dct-threshold:0.02", "scaled:1.5", "external"] {
            assert_eq!(s.parse::<DenoiserChoice>().unwrap().to_string(), s);
        }
        assert_eq!(
            "dct-threshold".parse::<DenoiserChoice>().unwrap(),
            DenoiserChoice::DctThreshold(DEFAULT_DCT_THRESHOLD)
        );
        assert!("scaled".parse::<DenoiserChoice>().is_err());
        assert!("bm3d".parse::<DenoiserChoice>().is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"sigma": 0.02, "gamma1": 0.4, "strict": false, "denoiser": "scaled:0.5", "max_iters": 10}"#,
        )
        .unwrap();
        let flags = RunConfig {
            config: Some(path),
            gamma1: Some(0.3),
            strict_flag: true,
            ..RunConfig::default()
        };
        let cfg = flags.resolve().unwrap();
        assert_eq!(cfg.sigma, Some(0.02));
        assert_eq!(cfg.gamma1, Some(0.3));
        assert!(cfg.is_strict());
        assert_eq!(cfg.denoiser, Some(DenoiserChoice::Scaled(0.5)));
        assert_eq!(cfg.max_iters, Some(10));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sigmaa": 1}"#).is_err());
    }

    #[test]
    fn defaults_follow_the_task() {
        let cfg = RunConfig::default();
        let s = cfg.solver_config(Task::Inpaint, None);
        assert_eq!((s.gamma1, s.gamma2, s.max_iters), (0.5, 0.99, 3000));
        assert_eq!(cfg.solver_config(Task::Deblur, Some(2.0)).max_iters, 4800);
        assert!(cfg.is_strict());
    }

    #[test]
    fn operator_choice() {
        let shape = Shape::gray(32, 32);
        let cfg = RunConfig { kernel: Some("b".into()), ..RunConfig::default() };
        assert!(cfg.operator(shape).unwrap().is_blur());
        let cfg = RunConfig { mask_frac: Some(0.2), seed: Some(4), ..RunConfig::default() };
        assert_eq!(cfg.operator(shape).unwrap(), OperatorSpec::Mask { masked_fraction: 0.2, seed: 4 });
        let cfg = RunConfig { mask_frac: Some(0.2), kernel: Some("b".into()), ..RunConfig::default() };
        assert!(cfg.operator(shape).is_err());
        let cfg = RunConfig { sigma: Some(0.1), eta: Some(1.0), ..RunConfig::default() };
        assert!(cfg.noise().is_err());
    }
}
