//! Run configuration: a JSON file, overridden field by field by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use clcons::field::GridSpec;
use clcons::generators::GeneratorSpec;
use clcons::mollify::KernelProfile;

use crate::error::CliError;

/// System selection. Parameters that do not belong to the named system are
/// rejected when the system is built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    /// Custom system definition (JSON) for `name = "custom"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    /// Exponent of the power stored energy of the p-system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonRange {
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Quantity {
    MollificationError,
    GradientNorm,
    VmoModulus,
    CommutatorNorm,
    CompanionResidual,
    WeakResidual,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Self::MollificationError => "mollification_error",
            Self::GradientNorm => "gradient_norm",
            Self::VmoModulus => "vmo_modulus",
            Self::CommutatorNorm => "commutator_norm",
            Self::CompanionResidual => "companion_residual",
            Self::WeakResidual => "weak_residual",
        }
    }

    pub fn needs_system(self) -> bool {
        matches!(self, Self::CommutatorNorm | Self::CompanionResidual | Self::WeakResidual)
    }

    pub fn needs_test_function(self) -> bool {
        matches!(self, Self::CompanionResidual | Self::WeakResidual)
    }

    pub const ALL: [Quantity; 6] = [
        Self::MollificationError,
        Self::GradientNorm,
        Self::VmoModulus,
        Self::CommutatorNorm,
        Self::CompanionResidual,
        Self::WeakResidual,
    ];
}

/// Pass/fail limits for one quantity of a sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityThreshold {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_slope_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_compat")]
    pub compatibility_max: f64,
    #[serde(default = "default_fd")]
    pub fd_max: f64,
    /// Upper limit on the flux-gradient Hölder quotient; any finite value passes when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_max: Option<f64>,
    #[serde(default)]
    pub quantities: BTreeMap<Quantity, QuantityThreshold>,
}

fn default_compat() -> f64 {
    1e-8
}

fn default_fd() -> f64 {
    1e-5
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            compatibility_max: default_compat(),
            fd_max: default_fd(),
            holder_max: None,
            quantities: BTreeMap::new(),
        }
    }
}

/// Everything a run needs. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_range: Option<EpsilonRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Margin on every bounded axis; defaults to the largest epsilon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantities: Option<Vec<Quantity>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_profile: Option<KernelProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Random states drawn by check-system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
}

/// Flags shared by all subcommands; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Worker threads (defaults to CLCONS_JOBS, then to all cores).
    #[arg(long, env = "CLCONS_JOBS")]
    pub jobs: Option<usize>,
    /// burgers, euler, psystem or custom.
    #[arg(long)]
    pub system: Option<String>,
    /// Custom system definition file.
    #[arg(long)]
    pub system_file: Option<PathBuf>,
    #[arg(long)]
    pub space_dim: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub energy_gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Generator spec as inline JSON.
    #[arg(long)]
    pub generator: Option<String>,
    /// Comma-separated points per axis.
    #[arg(long, value_delimiter = ',')]
    pub points: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub extent: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub periodic: Vec<bool>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Vec<f64>,
    #[arg(long)]
    pub eps_lo: Option<f64>,
    #[arg(long)]
    pub eps_hi: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub phi_center: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub phi_radius: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub quantity: Vec<Quantity>,
    #[arg(long)]
    pub kernel: Option<KernelProfile>,
    #[arg(long)]
    pub samples: Option<usize>,
}

fn nonempty<T: Clone>(v: &[T]) -> Option<Vec<T>> {
    (!v.is_empty()).then(|| v.to_vec())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Start from the config file (if any) and apply every flag that was given.
    pub fn resolve(command: &str, args: &CommonArgs) -> Result<Self, CliError> {
        let mut c = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(cmd) = &c.command {
            if cmd != command {
                return Err(CliError::Config(format!(
                    "config is for `{cmd}` but the `{command}` subcommand was run"
                )));
            }
        }
        c.command = Some(command.to_string());

        if args.system.is_some() || args.system_file.is_some() {
            let mut sys = c.system.take().unwrap_or_default();
            if let Some(name) = &args.system {
                if *name != sys.name {
                    sys = SystemConfig {
                        name: name.clone(),
                        ..Default::default()
                    };
                }
            }
            if let Some(f) = &args.system_file {
                sys.file = Some(f.clone());
                if sys.name.is_empty() {
                    sys.name = "custom".into();
                }
            }
            c.system = Some(sys);
        }
        let sys_flags = [
            args.space_dim.is_some(),
            args.kappa.is_some(),
            args.gamma0.is_some(),
            args.rho_min.is_some(),
            args.energy_gamma.is_some(),
        ];
        if sys_flags.iter().any(|b| *b) {
            let sys = c
                .system
                .as_mut()
                .ok_or_else(|| CliError::Config("system parameters given without a system".into()))?;
            sys.d = args.space_dim.or(sys.d);
            sys.kappa = args.kappa.or(sys.kappa);
            sys.gamma0 = args.gamma0.or(sys.gamma0);
            sys.rho_min = args.rho_min.or(sys.rho_min);
            sys.energy_gamma = args.energy_gamma.or(sys.energy_gamma);
        }

        if let Some(g) = &args.generator {
            c.generator = Some(
                serde_json::from_str(g).map_err(|e| CliError::Config(format!("--generator: {e}")))?,
            );
        }
        if let Some(seed) = args.seed {
            c.seed = Some(seed);
        }
        if let Some(seed) = c.seed {
            match c.generator.as_mut() {
                Some(GeneratorSpec::Weierstrass { seed: s, .. }) | Some(GeneratorSpec::SmoothModes { seed: s, .. }) => {
                    *s = seed
                }
                _ => {}
            }
        }
        if !(args.points.is_empty() && args.extent.is_empty() && args.periodic.is_empty()) {
            let base = c.grid.take();
            let points = nonempty(&args.points)
                .or_else(|| base.as_ref().map(|g| g.points_per_axis.clone()))
                .ok_or_else(|| CliError::Config("grid needs --points".into()))?;
            let dims = points.len();
            let extent = nonempty(&args.extent)
                .or_else(|| base.as_ref().map(|g| g.extent_per_axis.clone()))
                .unwrap_or_else(|| vec![1.0; dims]);
            let periodic = nonempty(&args.periodic)
                .or_else(|| base.as_ref().map(|g| g.periodic_per_axis.clone()))
                .unwrap_or_else(|| vec![true; dims]);
            c.grid = Some(GridSpec {
                points_per_axis: points,
                extent_per_axis: extent,
                periodic_per_axis: periodic,
            });
        }
        macro_rules! take {
            ($($field:ident <- $flag:expr),* $(,)?) => {
                $(if let Some(v) = $flag.clone() { c.$field = Some(v); })*
            };
        }
        take!(
            input <- args.input,
            output <- args.output,
            epsilon <- args.epsilon,
            p <- args.p,
            q <- args.q,
            s <- args.s,
            gamma <- args.gamma,
            margin <- args.margin,
            kernel_profile <- args.kernel,
            samples <- args.samples,
        );
        if !args.epsilons.is_empty() {
            c.epsilons = Some(args.epsilons.clone());
            c.epsilon_range = None;
        }
        if args.eps_lo.is_some() || args.eps_hi.is_some() {
            let base = c.epsilon_range.take().unwrap_or(EpsilonRange { lo: None, hi: None });
            c.epsilon_range = Some(EpsilonRange {
                lo: args.eps_lo.or(base.lo),
                hi: args.eps_hi.or(base.hi),
            });
            c.epsilons = None;
        }
        match (nonempty(&args.phi_center), nonempty(&args.phi_radius)) {
            (Some(center), Some(radius)) => {
                c.test_function = Some(TestFunctionConfig {
                    center,
                    radius,
                })
            }
            (None, None) => {}
            _ => return Err(CliError::Config("--phi-center and --phi-radius go together".into())),
        }
        if !args.quantity.is_empty() {
            c.quantities = Some(args.quantity.clone());
        }
        Ok(c)
    }
}
