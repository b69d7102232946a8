//! Experiment configuration, read from TOML with unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classic::PidGains;
use crate::error::{Error, Result};
use crate::inverse::{JacobianMode, EMULATOR_READY_MSE};
use crate::modular::{BlendMode, HybridMode, Region};
use crate::nn::DEFAULT_INIT_SCALE;
use crate::plant::{ExcitationKind, NarxShape, PlantSpec};
use crate::predictive::MpcConfig;

/// Environment variable consulted for the seed when neither the command line
/// nor the config sets one.
pub const SEED_ENV: &str = "NCB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Mimic,
    GeneralizedInverse,
    SpecializedInverse,
    Bpte,
    Mpc,
    Hdp,
    MultiModule,
    NeuroPid,
    HybridParallel,
    DisturbanceFilter,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 10] = [
        SchemeKind::Mimic,
        SchemeKind::GeneralizedInverse,
        SchemeKind::SpecializedInverse,
        SchemeKind::Bpte,
        SchemeKind::Mpc,
        SchemeKind::Hdp,
        SchemeKind::MultiModule,
        SchemeKind::NeuroPid,
        SchemeKind::HybridParallel,
        SchemeKind::DisturbanceFilter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Mimic => "mimic",
            SchemeKind::GeneralizedInverse => "generalized-inverse",
            SchemeKind::SpecializedInverse => "specialized-inverse",
            SchemeKind::Bpte => "bpte",
            SchemeKind::Mpc => "mpc",
            SchemeKind::Hdp => "hdp",
            SchemeKind::MultiModule => "multi-module",
            SchemeKind::NeuroPid => "neuro-pid",
            SchemeKind::HybridParallel => "hybrid-parallel",
            SchemeKind::DisturbanceFilter => "disturbance-filter",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            SchemeKind::Mimic => "network trained offline to reproduce a PID controller",
            SchemeKind::GeneralizedInverse => "inverse model trained offline on plant excitation data",
            SchemeKind::SpecializedInverse => "inverse controller trained online through the plant jacobian",
            SchemeKind::Bpte => "controller trained online through a frozen forward emulator",
            SchemeKind::Mpc => "receding-horizon search over a forward emulator",
            SchemeKind::Hdp => "actor trained online against a TD-learned cost critic",
            SchemeKind::MultiModule => "paired forward/inverse modules blended by responsibility",
            SchemeKind::NeuroPid => "network scheduling PID gains online",
            SchemeKind::HybridParallel => "PID and network controller in parallel",
            SchemeKind::DisturbanceFilter => "inverse controller with emulator-based disturbance correction",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{name}`")))
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    Constant,
    /// Uniform in `[-magnitude, magnitude]`, drawn from the run seed.
    White,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub magnitude: f64,
    /// First tick whose output carries the disturbance.
    #[serde(default)]
    pub start_tick: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    /// Hidden tanh layer widths; empty gives a purely linear network.
    pub hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub init_scale: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            hidden: vec![8],
            critic_hidden: vec![12],
            init_scale: DEFAULT_INIT_SCALE,
        }
    }
}

/// Offline identification of forward and inverse emulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSpec {
    /// Use the analytic plant model instead of trained networks.
    pub exact: bool,
    pub samples: usize,
    pub held_out: usize,
    pub excitation: ExcitationKind,
    pub amplitude: f64,
    pub hold_ticks: usize,
    pub epochs: usize,
    pub rate: f64,
    /// Held-out MSE a forward emulator must beat before it may be used.
    pub ready_mse: f64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            exact: false,
            samples: 2000,
            held_out: 500,
            excitation: ExcitationKind::UniformWhite,
            amplitude: 1.5,
            hold_ticks: 1,
            epochs: 60,
            rate: 0.02,
            ready_mse: EMULATOR_READY_MSE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MimicParams {
    pub epochs: usize,
    pub rate: f64,
}

impl Default for MimicParams {
    fn default() -> Self {
        Self { epochs: 300, rate: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineParams {
    pub rate: f64,
    pub jacobian: JacobianMode,
}

impl Default for OnlineParams {
    fn default() -> Self {
        Self {
            rate: 0.05,
            jacobian: JacobianMode::SignOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HdpParams {
    pub gamma: f64,
    pub rate_critic: f64,
    pub rate_actor: f64,
    /// Unlogged training passes over the schedule before the logged run.
    pub warmup_episodes: usize,
    /// Amplitude of uniform exploration noise added to the actor output.
    pub exploration: f64,
}

impl Default for HdpParams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            rate_critic: 0.1,
            rate_actor: 0.002,
            warmup_episodes: 0,
            exploration: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiModuleParams {
    pub sigma: f64,
    pub mode: BlendMode,
    /// Plant variant each module is identified on; empty means one module on
    /// the controlled plant.
    pub modules: Vec<PlantSpec>,
}

impl Default for MultiModuleParams {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            mode: BlendMode::Weighted,
            modules: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuroPidParams {
    pub rate: f64,
    pub jacobian: JacobianMode,
    /// Feed `S(k)` to the gain network alongside `r(k+1)`.
    pub use_state: bool,
}

impl Default for NeuroPidParams {
    fn default() -> Self {
        Self {
            rate: 0.05,
            jacobian: JacobianMode::Analytic,
            use_state: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridParams {
    pub mode: HybridMode,
    /// Online rate of the network in `sum_after_nn`.
    pub rate: f64,
    /// Online rate of the PID gains in `sum_after_pid`.
    pub pid_rate: f64,
    pub jacobian: JacobianMode,
    pub region: Option<Region>,
}

impl Default for HybridParams {
    fn default() -> Self {
        Self {
            mode: HybridMode::SumAfterNn,
            rate: 0.05,
            pid_rate: 0.01,
            jacobian: JacobianMode::SignOnly,
            region: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterParams {
    /// When false the base inverse controller runs alone.
    pub enabled: bool,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { enabled: true }
    }
}

fn default_pid() -> PidGains {
    PidGains::new(0.0, 0.4, 0.0)
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub scheme: SchemeKind,
    pub ticks: usize,
    /// `(tick, value)` pairs; `r(k)` is the value of the last entry with
    /// `tick <= k`, and 0 before the first.
    pub setpoints: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub estimator: NarxShape,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default = "default_pid")]
    pub pid: PidGains,
    #[serde(default)]
    pub training: TrainingSpec,
    #[serde(default, skip_serializing_if = "is_default")]
    pub mimic: MimicParams,
    #[serde(default, skip_serializing_if = "is_default")]
    pub specialized: OnlineParams,
    #[serde(default, skip_serializing_if = "is_default")]
    pub bpte: OnlineParams,
    #[serde(default, skip_serializing_if = "is_default")]
    pub mpc: MpcConfig,
    #[serde(default, skip_serializing_if = "is_default")]
    pub hdp: HdpParams,
    #[serde(default, skip_serializing_if = "is_default")]
    pub multi_module: MultiModuleParams,
    #[serde(default, skip_serializing_if = "is_default")]
    pub neuro_pid: NeuroPidParams,
    #[serde(default, skip_serializing_if = "is_default")]
    pub hybrid: HybridParams,
    #[serde(default, skip_serializing_if = "is_default")]
    pub filter: FilterParams,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a positive number, got {v}")))
    }
}

fn rate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate().map_err(config_err)?;
        let mut last = None;
        for &(tick, value) in &self.setpoints {
            if !value.is_finite() {
                return Err(Error::Config(format!("setpoint at tick {tick} is not finite")));
            }
            if last.is_some_and(|t| tick <= t) {
                return Err(Error::Config("setpoint ticks must be strictly increasing".into()));
            }
            last = Some(tick);
        }
        if let Some(d) = &self.disturbance {
            if !d.magnitude.is_finite() {
                return Err(Error::Config("disturbance magnitude must be finite".into()));
            }
        }
        if let Some(r) = &self.reference {
            crate::classic::ReferenceModel::new(r.tau).map_err(config_err)?;
        }
        positive("network.init_scale", self.network.init_scale)?;
        if self.network.hidden.contains(&0) || self.network.critic_hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if !self.pid.is_finite() {
            return Err(Error::Config("pid gains must be finite".into()));
        }
        let t = &self.training;
        if !t.exact && (t.samples == 0 || t.held_out == 0) {
            return Err(Error::Config("training.samples and training.held_out must be positive".into()));
        }
        rate("training.rate", t.rate)?;
        positive("training.ready_mse", t.ready_mse)?;
        if !(t.amplitude.is_finite() && t.amplitude >= 0.0) || t.hold_ticks == 0 {
            return Err(Error::Config("training excitation needs amplitude >= 0 and hold_ticks >= 1".into()));
        }
        rate("mimic.rate", self.mimic.rate)?;
        rate("specialized.rate", self.specialized.rate)?;
        rate("bpte.rate", self.bpte.rate)?;
        self.mpc.validate().map_err(config_err)?;
        let h = &self.hdp;
        if !(h.gamma > 0.0 && h.gamma <= 1.0) {
            return Err(Error::Config(format!("hdp.gamma must lie in (0, 1], got {}", h.gamma)));
        }
        rate("hdp.rate_critic", h.rate_critic)?;
        rate("hdp.rate_actor", h.rate_actor)?;
        rate("hdp.exploration", h.exploration)?;
        positive("multi_module.sigma", self.multi_module.sigma)?;
        for m in &self.multi_module.modules {
            m.validate().map_err(config_err)?;
        }
        rate("neuro_pid.rate", self.neuro_pid.rate)?;
        rate("hybrid.rate", self.hybrid.rate)?;
        rate("hybrid.pid_rate", self.hybrid.pid_rate)?;
        if let Some(region) = &self.hybrid.region {
            region.validate().map_err(config_err)?;
            if region.dim() != self.estimator.width() {
                return Err(Error::Config(format!(
                    "hybrid.region has {} coordinates but the state has {}",
                    region.dim(),
                    self.estimator.width()
                )));
            }
        }
        if self.scheme == SchemeKind::HybridParallel
            && self.hybrid.mode == HybridMode::RegionSwitch
            && self.hybrid.region.is_none()
        {
            return Err(Error::Config("hybrid.mode = region_switch needs hybrid.region".into()));
        }
        Ok(())
    }

    /// `--seed` beats the config, which beats `NCB_SEED`; otherwise 0.
    pub fn effective_seed(&self, cli: Option<u64>) -> Result<u64> {
        if let Some(s) = cli.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
            Err(_) => Ok(0),
        }
    }

    /// `r(k)` from the setpoint schedule.
    pub fn setpoint_at(&self, k: usize) -> f64 {
        self.setpoints
            .iter()
            .take_while(|(t, _)| *t <= k)
            .last()
            .map_or(0.0, |(_, v)| *v)
    }

    /// `r(0) ..= r(len - 1)`.
    pub fn setpoint_series(&self, len: usize) -> Vec<f64> {
        (0..len).map(|k| self.setpoint_at(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scheme = "mpc"
ticks = 10
setpoints = [[0, 0.5], [5, -0.5]]

[plant]
kind = "linear1"
a = 0.5
b = 1.0
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::Mpc);
        assert_eq!(cfg.setpoint_series(7), vec![0.5, 0.5, 0.5, 0.5, 0.5, -0.5, -0.5]);
        assert_eq!(cfg.mpc, MpcConfig::default());
    }

    #[test]
    fn schedule_before_first_entry_is_zero() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.setpoints = vec![(3, 1.0)];
        assert_eq!(cfg.setpoint_series(5), vec![0.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
        let text = format!("{MINIMAL}\n[mpc]\nhorizon = 3\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("b = 1.0", "b = 1.0\nc = 2.0");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn semantic_errors_rejected() {
        let bad = [
            MINIMAL.replace("b = 1.0", "b = 0.0"),
            MINIMAL.replace("[5, -0.5]", "[0, -0.5]"),
            format!("{MINIMAL}\n[hdp]\ngamma = 1.5\n"),
            format!("{MINIMAL}\n[mpc]\nl1 = 4\nl2 = 2\n"),
            MINIMAL.replace("\"mpc\"", "\"hybrid-parallel\"") + "\n[hybrid]\nmode = \"region_switch\"\n",
            MINIMAL.replace("\"mpc\"", "\"teleport\""),
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.hdp.gamma = 0.5;
        cfg.reference = Some(ReferenceSpec { tau: 0.3 });
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn scheme_names_roundtrip() {
        for s in SchemeKind::ALL {
            assert_eq!(SchemeKind::parse(s.name()).unwrap(), s);
        }
        assert!(SchemeKind::parse("nope").is_err());
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.seed = Some(7);
        assert_eq!(cfg.effective_seed(Some(3)).unwrap(), 3);
        assert_eq!(cfg.effective_seed(None).unwrap(), 7);
    }
}
