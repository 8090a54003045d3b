//! TOML run configuration.
//!
//! Files mirror four blocks, `[model]`, `[geometry]`, `[msa]` and
//! `[execution]`, plus one optional table per subcommand. Every block has
//! defaults, so an empty file is a valid configuration. Validation rebuilds
//! the typed objects, which reject out-of-range parameters with the violated
//! constraint in the message.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderKind, DisorderSpec};
use crate::error::{Error, Result};
use crate::localization::{DecayFamily, FitOptions, PlotSelection, DEFAULT_FLOOR};
use crate::msa::{LossConstant, MsaParams};
use crate::operator::Model;
use crate::weight::{HoppingKernel, WeightParams};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub msa: MsaConfig,
    #[serde(default)]
    pub execution: ExecutionConfig,
    #[serde(default)]
    pub quasi_metric: QuasiMetricConfig,
    #[serde(default)]
    pub wegner: WegnerConfig,
    #[serde(default)]
    pub pair_resonance: PairResonanceConfig,
    #[serde(default)]
    pub bad_pair: BadPairConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default)]
    pub eigen_decay: EigenDecayConfig,
    #[serde(default)]
    pub cover_check: CoverCheckConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub disorder: DisorderConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 1,
            epsilon: 0.05,
            kernel: KernelConfig::default(),
            disorder: DisorderConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    LogPower {
        gamma: f64,
        rho: f64,
        #[serde(default)]
        phase: Option<Vec<f64>>,
    },
    Stretched {
        s: f64,
        #[serde(default)]
        phase: Option<Vec<f64>>,
    },
    /// Explicit values `[[x₁, …, x_d, re, im], …]`.
    Table { entries: Vec<Vec<f64>> },
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::LogPower {
            gamma: 1.0,
            rho: 2.0,
            phase: None,
        }
    }
}

impl KernelConfig {
    pub fn build(&self, d: usize) -> Result<HoppingKernel> {
        let with_phase = |k: HoppingKernel, phase: &Option<Vec<f64>>| match phase {
            Some(p) => k.with_phase(p.clone()),
            None => Ok(k),
        };
        let kernel = match self {
            KernelConfig::LogPower { gamma, rho, phase } => with_phase(HoppingKernel::log_power(*gamma, *rho)?, phase)?,
            KernelConfig::Stretched { s, phase } => with_phase(HoppingKernel::stretched(*s)?, phase)?,
            KernelConfig::Table { entries } => {
                let parsed = entries
                    .iter()
                    .map(|row| {
                        if row.len() != d + 2 {
                            return Err(Error::invalid(
                                "table rows are [x₁, …, x_d, re, im]",
                                format!("row {row:?} for d = {d}"),
                            ));
                        }
                        let x: Vec<i64> = row[..d].iter().map(|&c| c as i64).collect();
                        Ok((x, Complex64::new(row[d], row[d + 1])))
                    })
                    .collect::<Result<Vec<_>>>()?;
                HoppingKernel::table(parsed)?
            }
        };
        kernel.check_dimension(d)?;
        Ok(kernel)
    }

    /// `(γ, ρ)` for log-power kernels.
    pub fn log_power_params(&self) -> Option<(f64, f64)> {
        match self {
            KernelConfig::LogPower { gamma, rho, .. } => Some((*gamma, *rho)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisorderConfig {
    #[serde(flatten)]
    pub kind: DisorderKind,
    pub m: f64,
    pub lambda: f64,
    pub beta: f64,
    pub beta0: f64,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        DisorderConfig {
            kind: DisorderKind::Uniform,
            m: 1.0,
            lambda: 1.0,
            beta: 1.0,
            beta0: 1.0,
        }
    }
}

impl DisorderConfig {
    pub fn build(&self) -> Result<DisorderSpec> {
        DisorderSpec::new(self.kind.clone(), self.m, self.lambda, self.beta, self.beta0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Outer scale `L`.
    #[serde(rename = "L")]
    pub big_l: i64,
    /// Inner scale `l`.
    pub l: i64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { big_l: 20, l: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MsaConfig {
    pub alpha: f64,
    pub p: f64,
    /// Defaults to the kernel's γ (or 1 for other kernels).
    pub gamma: Option<f64>,
    pub rho: f64,
    pub rho_prime: f64,
    pub kappa0: f64,
    pub kappa_inf: f64,
    pub energy: [f64; 2],
    pub grid_points: usize,
    pub loss_constant: LossConstant,
}

impl Default for MsaConfig {
    fn default() -> Self {
        MsaConfig {
            alpha: 1.3,
            p: 6.0,
            gamma: None,
            rho: 2.0,
            rho_prime: 1.5,
            kappa0: 0.2,
            kappa_inf: 0.1,
            energy: [-0.1, 0.1],
            grid_points: 41,
            loss_constant: LossConstant::TwoPowRho,
        }
    }
}

impl MsaConfig {
    /// `grid_points` evenly spaced energies across the interval.
    pub fn energy_grid(&self) -> Result<Vec<f64>> {
        let [lo, hi] = self.energy;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("E interval lo ≤ hi", format!("[{lo}, {hi}]")));
        }
        Ok(match self.grid_points {
            0 => return Err(Error::invalid("grid points ≥ 1", "0")),
            1 => vec![0.5 * (lo + hi)],
            n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionConfig {
    pub seed: u64,
    pub trials: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            seed: 1,
            trials: 1000,
            workers: 1,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct QuasiMetricConfig {
    /// Exponents to certify; defaults to `msa.rho`.
    pub rho: Option<Vec<f64>>,
    pub n_max: u32,
    /// Random tuples checked per `(ρ, n)`.
    pub samples: usize,
}

impl Default for QuasiMetricConfig {
    fn default() -> Self {
        QuasiMetricConfig {
            rho: None,
            n_max: 8,
            samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct WegnerConfig {
    /// Box radii; defaults to `geometry.L`.
    #[serde(rename = "L")]
    pub radii: Option<Vec<i64>>,
    pub energy: f64,
    /// Interval half-width ε; when absent, chosen per radius so the bound
    /// equals `target-bound`.
    pub eps: Option<f64>,
    pub target_bound: f64,
}

impl Default for WegnerConfig {
    fn default() -> Self {
        WegnerConfig {
            radii: None,
            energy: 0.0,
            eps: None,
            target_bound: 0.25,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairResonanceConfig {
    /// Use the same box twice.
    pub diagnostic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BadPairConfig {
    /// Cube radii; defaults to `geometry.l`.
    #[serde(rename = "L")]
    pub radii: Option<Vec<i64>>,
    pub kappa: f64,
}

impl Default for BadPairConfig {
    fn default() -> Self {
        BadPairConfig {
            radii: None,
            kappa: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    pub kappa: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig { kappa: 0.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct LadderConfig {
    /// Starting `log L₀`; defaults to the minimal admissible value.
    pub log_l0: Option<f64>,
    pub horizon: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            log_l0: None,
            horizon: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EigenDecayConfig {
    /// Chain radius `R`, so `N = 2R + 1` in one dimension.
    pub radius: i64,
    pub family: DecayFamily,
    pub floor: f64,
    pub min_points: usize,
    pub rho_hint: Option<f64>,
    pub edge_fraction: f64,
    pub window: Option<[f64; 2]>,
    /// Regression series exported per realisation; `-1` exports all.
    pub plot_per_seed: i64,
}

impl Default for EigenDecayConfig {
    fn default() -> Self {
        EigenDecayConfig {
            radius: 512,
            family: DecayFamily::LogPower,
            floor: DEFAULT_FLOOR,
            min_points: 8,
            rho_hint: None,
            edge_fraction: 0.25,
            window: None,
            plot_per_seed: 5,
        }
    }
}

impl EigenDecayConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            family: self.family,
            floor: self.floor,
            min_radius: 2,
            min_points: self.min_points,
            rho_hint: self.rho_hint,
        }
    }

    pub fn plot_selection(&self) -> PlotSelection {
        match self.plot_per_seed {
            n if n < 0 => PlotSelection::All,
            0 => PlotSelection::None,
            n => PlotSelection::PerSeed(n as usize),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CoverCheckConfig {
    /// Dimensions to test; defaults to `model.d`.
    pub d: Option<Vec<usize>>,
    /// Inner scales; defaults to `geometry.l`.
    pub l: Option<Vec<i64>>,
    /// Parent radius as a multiple of `l`.
    pub parent_factor: i64,
}

impl Default for CoverCheckConfig {
    fn default() -> Self {
        CoverCheckConfig {
            d: None,
            l: None,
            parent_factor: 30,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Precondition(format!("config: {e}")))
    }

    pub fn model(&self) -> Result<Model> {
        if self.model.d == 0 {
            return Err(Error::invalid("d≥1", "d = 0"));
        }
        Model::new(
            self.model.kernel.build(self.model.d)?,
            self.model.disorder.build()?,
            self.model.epsilon,
        )
    }

    pub fn weights(&self) -> Result<WeightParams> {
        let gamma = self
            .msa
            .gamma
            .or_else(|| self.model.kernel.log_power_params().map(|p| p.0))
            .unwrap_or(1.0);
        WeightParams::new(gamma, self.msa.rho, self.msa.rho_prime)
    }

    pub fn msa_params(&self) -> Result<MsaParams> {
        Ok(MsaParams::new(
            self.msa.alpha,
            self.msa.p,
            self.model.d,
            self.weights()?,
            self.msa.kappa0,
            self.msa.kappa_inf,
        )?
        .with_loss_constant(self.msa.loss_constant))
    }

    /// Builds every typed object the configuration describes.
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.msa_params()?;
        self.msa.energy_grid()?;
        if self.geometry.l < 1 || self.geometry.big_l < 1 {
            return Err(Error::invalid(
                "L≥1, l≥1",
                format!("L = {}, l = {}", self.geometry.big_l, self.geometry.l),
            ));
        }
        if self.execution.workers == 0 {
            return Err(Error::invalid("workers≥1", "workers = 0"));
        }
        Ok(())
    }

    /// Canonical JSON of the effective configuration, used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}
