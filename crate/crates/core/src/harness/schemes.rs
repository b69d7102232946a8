//! Per-scheme pretraining and tick logic behind [`super::run_episode`].

use std::collections::BTreeMap;

use crate::classic::{PidGains, PidState};
use crate::error::{Error, Result};
use crate::inverse::{
    bpte_train_step, collect_forward, collect_inverse, collect_mimic, dataset_mse, specialized_step,
    train_supervised, ForwardEmulator, InverseModel,
};
use crate::modular::{
    filter_step, hybrid_step, neuro_pid_step, FilterAssembly, HybridMode, MultiModuleController, NeuroPidAssembly,
    PairedModule,
};
use crate::nn::Mlp;
use crate::plant::{ExcitationSpec, NarxEstimator, Plant, PlantSpec};
use crate::predictive::{hdp_step, mpc_plan, CriticNet};

use super::config::{ExperimentConfig, SchemeKind};

/// Loop state shared with a scheme for one tick.
pub(crate) struct Env {
    pub plant: Box<dyn Plant>,
    pub est: NarxEstimator,
    /// Setpoint signal the scheme tracks, indexed by tick (`targets[0] = r(0)`).
    pub targets: Vec<f64>,
}

pub(crate) struct Tick {
    pub u: f64,
    pub y: f64,
    pub extra: Vec<f64>,
}

pub(crate) trait Scheme {
    fn columns(&self) -> Vec<String>;

    /// Advances from tick `k` to `k + 1` under disturbance `d`.
    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick>;

    /// Fingerprints of the networks as they stand after the run.
    fn artifacts(&self, out: &mut BTreeMap<String, String>);
}

/// Pretraining diagnostics reported alongside metrics.
pub type TrainingReport = BTreeMap<String, f64>;

fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9)) ^ tag
}

fn net(cfg: &ExperimentConfig, input: usize, hidden: &[usize], output: usize, seed: u64) -> Result<Mlp> {
    Mlp::tanh_linear(input, hidden, output, seed, cfg.network.init_scale)
}

fn excitation(cfg: &ExperimentConfig, length: usize, seed: u64) -> ExcitationSpec {
    let t = &cfg.training;
    ExcitationSpec {
        kind: t.excitation,
        amplitude: t.amplitude,
        hold_ticks: t.hold_ticks,
        seed,
        length,
    }
}

fn controller_input(target: f64, state: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(1 + state.len());
    x.push(target);
    x.extend_from_slice(state);
    x
}

/// Forward emulator for `spec`, trained unless the config asks for the exact model.
pub(crate) fn identify_forward(
    cfg: &ExperimentConfig,
    spec: PlantSpec,
    seed: u64,
    label: &str,
    report: &mut TrainingReport,
) -> Result<ForwardEmulator> {
    let shape = cfg.estimator;
    if cfg.training.exact {
        return Ok(ForwardEmulator::exact(spec, shape));
    }
    let t = &cfg.training;
    let train = collect_forward(
        spec.build()?.as_mut(),
        &excitation(cfg, t.samples, sub_seed(seed, 11)),
        &mut NarxEstimator::new(shape),
    )?;
    let held = collect_forward(
        spec.build()?.as_mut(),
        &excitation(cfg, t.held_out, sub_seed(seed, 12)),
        &mut NarxEstimator::new(shape),
    )?;
    let mut mlp = net(cfg, 1 + shape.width(), &cfg.network.hidden, 1, sub_seed(seed, 13))?;
    train_supervised(&mut mlp, &train, t.epochs, t.rate, sub_seed(seed, 14))?;
    let mut emu = ForwardEmulator::network(mlp, shape)?.with_ready_threshold(t.ready_mse);
    let mse = emu.validate(&held)?;
    report.insert(format!("{label}_validation_mse"), mse);
    Ok(emu)
}

/// Inverse model for `spec`, trained on `[y(i), S(i-1)] -> u(i-1)` pairs.
pub(crate) fn identify_inverse(
    cfg: &ExperimentConfig,
    spec: PlantSpec,
    seed: u64,
    label: &str,
    report: &mut TrainingReport,
) -> Result<InverseModel> {
    if cfg.training.exact {
        return Ok(InverseModel::Exact(spec));
    }
    let shape = cfg.estimator;
    let t = &cfg.training;
    let train = collect_inverse(
        spec.build()?.as_mut(),
        &excitation(cfg, t.samples, sub_seed(seed, 21)),
        &mut NarxEstimator::new(shape),
    )?;
    let held = collect_inverse(
        spec.build()?.as_mut(),
        &excitation(cfg, t.held_out, sub_seed(seed, 22)),
        &mut NarxEstimator::new(shape),
    )?;
    let mut mlp = net(cfg, 1 + shape.width(), &cfg.network.hidden, 1, sub_seed(seed, 23))?;
    train_supervised(&mut mlp, &train, t.epochs, t.rate, sub_seed(seed, 24))?;
    report.insert(format!("{label}_validation_mse"), dataset_mse(&mlp, &held)?);
    Ok(InverseModel::Network(mlp))
}

fn step_plant(env: &mut Env, u: f64, d: f64) -> f64 {
    let y = env.plant.step(u, d);
    env.est.observe(y);
    env.est.observe_u(u);
    y
}

/// Offline-trained network (or exact inverse) acting on `[r(k+1), S(k)]`.
struct InverseScheme {
    model: InverseModel,
    shadow_pid: Option<(PidGains, PidState)>,
}

impl Scheme for InverseScheme {
    fn columns(&self) -> Vec<String> {
        match self.shadow_pid {
            Some(_) => vec!["u_pid".into()],
            None => vec![],
        }
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let state = env.est.state();
        let r_next = env.targets[k + 1];
        let u = self.model.control(r_next, &state)?;
        let mut extra = vec![];
        if let Some((gains, pid)) = &mut self.shadow_pid {
            extra.push(pid.step(gains, r_next - state[0])?);
        }
        let y = step_plant(env, u, d);
        Ok(Tick { u, y, extra })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        out.insert("controller".into(), self.model.fingerprint());
    }
}

struct SpecializedScheme {
    net: Mlp,
    rate: f64,
    jacobian: crate::inverse::JacobianMode,
}

impl Scheme for SpecializedScheme {
    fn columns(&self) -> Vec<String> {
        vec![]
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let t = specialized_step(
            &mut self.net,
            env.plant.as_mut(),
            &mut env.est,
            env.targets[k + 1],
            d,
            self.rate,
            self.jacobian,
        )?;
        Ok(Tick {
            u: t.u,
            y: t.y,
            extra: vec![],
        })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        out.insert("controller".into(), self.net.fingerprint());
    }
}

struct BpteScheme {
    net: Mlp,
    emulator: ForwardEmulator,
    rate: f64,
}

impl Scheme for BpteScheme {
    fn columns(&self) -> Vec<String> {
        vec!["y_hat".into()]
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let t = bpte_train_step(
            &mut self.net,
            &self.emulator,
            env.plant.as_mut(),
            &mut env.est,
            env.targets[k + 1],
            d,
            self.rate,
        )?;
        Ok(Tick {
            u: t.u,
            y: t.y,
            extra: vec![t.y_hat.unwrap_or(f64::NAN)],
        })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        out.insert("controller".into(), self.net.fingerprint());
        out.insert("forward_emulator".into(), self.emulator.fingerprint());
    }
}

struct MpcScheme {
    emulator: ForwardEmulator,
    cfg: crate::predictive::MpcConfig,
    u_prev: f64,
}

impl Scheme for MpcScheme {
    fn columns(&self) -> Vec<String> {
        vec!["q_mpc".into()]
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let state = env.est.state();
        let r_traj = &env.targets[k + 1..=k + self.cfg.l2];
        let plan = mpc_plan(&self.emulator, &state, r_traj, self.u_prev, &self.cfg)?;
        self.u_prev = plan.u_apply;
        let y = step_plant(env, plan.u_apply, d);
        Ok(Tick {
            u: plan.u_apply,
            y,
            extra: vec![plan.cost],
        })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        out.insert("forward_emulator".into(), self.emulator.fingerprint());
    }
}

struct HdpScheme {
    actor: Mlp,
    critic: CriticNet,
    noise: Vec<f64>,
}

impl Scheme for HdpScheme {
    fn columns(&self) -> Vec<String> {
        vec!["j_hat".into(), "delta".into()]
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let t = hdp_step(
            &mut self.actor,
            &mut self.critic,
            env.plant.as_mut(),
            &mut env.est,
            env.targets[k + 1],
            env.targets[k + 2],
            d,
            self.noise[k],
            k + 1,
        )?;
        Ok(Tick {
            u: t.u,
            y: t.y,
            extra: vec![t.j_hat, t.delta],
        })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        out.insert("actor".into(), self.actor.fingerprint());
        out.insert("critic".into(), self.critic.net.fingerprint());
    }
}

struct MultiModuleScheme {
    ctl: MultiModuleController,
}

impl Scheme for MultiModuleScheme {
    fn columns(&self) -> Vec<String> {
        let n = self.ctl.modules().len();
        (0..n)
            .map(|i| format!("lambda_{i}"))
            .chain((0..n).map(|i| format!("err_{i}")))
            .collect()
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let t = self.ctl.step(env.plant.as_mut(), &mut env.est, env.targets[k + 1], d)?;
        let mut extra = t.lambda;
        extra.extend(t.module_errors);
        Ok(Tick { u: t.u, y: t.y, extra })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        for m in self.ctl.modules() {
            out.insert(format!("{}_forward", m.id), m.forward.fingerprint());
            out.insert(format!("{}_inverse", m.id), m.inverse.fingerprint());
        }
    }
}

struct NeuroPidScheme {
    asm: NeuroPidAssembly,
    jacobian: crate::inverse::JacobianMode,
}

impl Scheme for NeuroPidScheme {
    fn columns(&self) -> Vec<String> {
        vec!["k1".into(), "k2".into(), "k3".into()]
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let t = neuro_pid_step(
            &mut self.asm,
            env.plant.as_mut(),
            &mut env.est,
            env.targets[k + 1],
            d,
            self.jacobian,
            k + 1,
        )?;
        Ok(Tick {
            u: t.u,
            y: t.y,
            extra: t.gains.as_array().to_vec(),
        })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        out.insert("gain_network".into(), self.asm.net.fingerprint());
    }
}

enum HybridNet {
    /// Trained online with the PID already in the loop.
    Online(Mlp),
    Fixed(InverseModel),
}

struct HybridScheme {
    mode: HybridMode,
    nn: HybridNet,
    gains: PidGains,
    pid: PidState,
    params: super::config::HybridParams,
}

impl Scheme for HybridScheme {
    fn columns(&self) -> Vec<String> {
        ["u_pid", "u_nn", "k1", "k2", "k3"].map(String::from).to_vec()
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let state = env.est.state();
        let r_next = env.targets[k + 1];
        let e_pid = r_next - state[0];
        let sens = self.pid.sensitivity(e_pid);
        let gains = self.gains;
        let u_pid = self.pid.step(&gains, e_pid)?;
        let (u_nn, cache) = match &self.nn {
            HybridNet::Online(net) => {
                let (out, cache) = net.forward(&controller_input(r_next, &state))?;
                (out[0], Some(cache))
            }
            HybridNet::Fixed(model) => (model.control(r_next, &state)?, None),
        };
        let u = hybrid_step(self.mode, u_pid, u_nn, self.params.region.as_ref(), &state)?;
        let jacobian = self.params.jacobian.apply(env.plant.jacobian_du(u));
        let y = step_plant(env, u, d);
        let e = r_next - y;
        match (&mut self.nn, cache) {
            (HybridNet::Online(net), Some(cache)) if jacobian != 0.0 => {
                let grads = net.backward_weights(&cache, &[-e * jacobian])?;
                net.sgd_step(&grads, self.params.rate)?;
            }
            _ => {}
        }
        if self.mode == HybridMode::SumAfterPid {
            let mut k_new = self.gains.as_array();
            for (kk, s) in k_new.iter_mut().zip(sens) {
                *kk += self.params.pid_rate * e * jacobian * s;
            }
            self.gains = PidGains::from_array(k_new);
        }
        Ok(Tick {
            u,
            y,
            extra: vec![u_pid, u_nn, gains.k1, gains.k2, gains.k3],
        })
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        let hash = match &self.nn {
            HybridNet::Online(net) => net.fingerprint(),
            HybridNet::Fixed(model) => model.fingerprint(),
        };
        out.insert("controller".into(), hash);
    }
}

struct FilterScheme {
    base: InverseModel,
    filter: Option<FilterAssembly>,
}

impl Scheme for FilterScheme {
    fn columns(&self) -> Vec<String> {
        ["u_ctl", "u_corr", "y_hat", "e_dist"].map(String::from).to_vec()
    }

    fn tick(&mut self, env: &mut Env, k: usize, d: f64) -> Result<Tick> {
        let state = env.est.state();
        let u_ctl = self.base.control(env.targets[k + 1], &state)?;
        match &mut self.filter {
            Some(asm) => {
                let t = filter_step(asm, u_ctl, env.plant.as_mut(), &mut env.est, d)?;
                Ok(Tick {
                    u: t.u_fin,
                    y: t.y,
                    extra: vec![u_ctl, t.u_corr, t.y_hat, t.e_dist],
                })
            }
            None => {
                let y = step_plant(env, u_ctl, d);
                Ok(Tick {
                    u: u_ctl,
                    y,
                    extra: vec![u_ctl, 0.0, f64::NAN, f64::NAN],
                })
            }
        }
    }

    fn artifacts(&self, out: &mut BTreeMap<String, String>) {
        out.insert("controller".into(), self.base.fingerprint());
        if let Some(asm) = &self.filter {
            out.insert("forward_emulator".into(), asm.forward.fingerprint());
        }
    }
}

fn width(cfg: &ExperimentConfig) -> usize {
    cfg.estimator.width()
}

/// Runs every offline phase the scheme needs and returns it ready to drive
/// the logged episode.
pub(crate) fn build(
    cfg: &ExperimentConfig,
    seed: u64,
    targets: &[f64],
    report: &mut TrainingReport,
) -> Result<Box<dyn Scheme>> {
    let init = sub_seed(seed, 1);
    Ok(match cfg.scheme {
        SchemeKind::Mimic => {
            let mut est = NarxEstimator::new(cfg.estimator);
            let set = collect_mimic(cfg.plant.build()?.as_mut(), &cfg.pid, &targets[1..=cfg.ticks], &mut est)?;
            let mut mlp = net(cfg, 1 + width(cfg), &cfg.network.hidden, 1, init)?;
            if !set.is_empty() {
                train_supervised(&mut mlp, &set, cfg.mimic.epochs, cfg.mimic.rate, sub_seed(seed, 2))?;
                report.insert("mimic_mse".into(), dataset_mse(&mlp, &set)?);
            }
            Box::new(InverseScheme {
                model: InverseModel::Network(mlp),
                shadow_pid: Some((cfg.pid, PidState::default())),
            })
        }
        SchemeKind::GeneralizedInverse => Box::new(InverseScheme {
            model: identify_inverse(cfg, cfg.plant, seed, "inverse", report)?,
            shadow_pid: None,
        }),
        SchemeKind::SpecializedInverse => Box::new(SpecializedScheme {
            net: net(cfg, 1 + width(cfg), &cfg.network.hidden, 1, init)?,
            rate: cfg.specialized.rate,
            jacobian: cfg.specialized.jacobian,
        }),
        SchemeKind::Bpte => {
            let emulator = identify_forward(cfg, cfg.plant, seed, "forward", report)?;
            emulator.ensure_ready()?;
            Box::new(BpteScheme {
                net: net(cfg, 1 + width(cfg), &cfg.network.hidden, 1, init)?,
                emulator,
                rate: cfg.bpte.rate,
            })
        }
        SchemeKind::Mpc => {
            let emulator = identify_forward(cfg, cfg.plant, seed, "forward", report)?;
            emulator.ensure_ready()?;
            Box::new(MpcScheme {
                emulator,
                cfg: cfg.mpc,
                u_prev: 0.0,
            })
        }
        SchemeKind::Hdp => {
            let h = &cfg.hdp;
            let mut actor = net(cfg, 1 + width(cfg), &cfg.network.hidden, 1, init)?;
            let critic_net = net(cfg, 2 + width(cfg), &cfg.network.critic_hidden, 1, sub_seed(seed, 3))?;
            let mut critic = CriticNet::new(critic_net, h.gamma, h.rate_critic, h.rate_actor)?;
            let noise = |episode: u64| {
                ExcitationSpec::uniform_white(h.exploration, cfg.ticks, sub_seed(seed, 1000 + episode)).generate()
            };
            for episode in 0..h.warmup_episodes {
                let mut plant = cfg.plant.build()?;
                let mut est = NarxEstimator::new(cfg.estimator);
                for (k, n) in noise(episode as u64 + 1)?.into_iter().enumerate() {
                    hdp_step(
                        &mut actor,
                        &mut critic,
                        plant.as_mut(),
                        &mut est,
                        targets[k + 1],
                        targets[k + 2],
                        0.0,
                        n,
                        k + 1,
                    )?;
                }
            }
            Box::new(HdpScheme {
                actor,
                critic,
                noise: noise(0)?,
            })
        }
        SchemeKind::MultiModule => {
            let p = &cfg.multi_module;
            let specs = if p.modules.is_empty() { vec![cfg.plant] } else { p.modules.clone() };
            let mut modules = Vec::with_capacity(specs.len());
            for (i, spec) in specs.into_iter().enumerate() {
                let s = sub_seed(seed, 100 + i as u64);
                let id = format!("module{i}");
                modules.push(PairedModule {
                    forward: identify_forward(cfg, spec, s, &format!("{id}_forward"), report)?,
                    inverse: identify_inverse(cfg, spec, s, &format!("{id}_inverse"), report)?,
                    id,
                });
            }
            Box::new(MultiModuleScheme {
                ctl: MultiModuleController::new(modules, p.sigma, p.mode)?,
            })
        }
        SchemeKind::NeuroPid => {
            let p = &cfg.neuro_pid;
            let input = if p.use_state { 1 + width(cfg) } else { 1 };
            let mlp = net(cfg, input, &cfg.network.hidden, 3, init)?;
            Box::new(NeuroPidScheme {
                asm: NeuroPidAssembly::new(mlp, p.rate, p.use_state)?,
                jacobian: p.jacobian,
            })
        }
        SchemeKind::HybridParallel => {
            let p = cfg.hybrid.clone();
            let nn = match p.mode {
                HybridMode::SumAfterNn => HybridNet::Online(net(cfg, 1 + width(cfg), &cfg.network.hidden, 1, init)?),
                _ => HybridNet::Fixed(identify_inverse(cfg, cfg.plant, seed, "inverse", report)?),
            };
            Box::new(HybridScheme {
                mode: p.mode,
                nn,
                gains: cfg.pid,
                pid: PidState::default(),
                params: p,
            })
        }
        SchemeKind::DisturbanceFilter => {
            let base = identify_inverse(cfg, cfg.plant, seed, "inverse", report)?;
            let filter = if cfg.filter.enabled {
                let forward = identify_forward(cfg, cfg.plant, seed, "forward", report)?;
                Some(FilterAssembly::new(forward, base.clone())?)
            } else {
                None
            };
            Box::new(FilterScheme { base, filter })
        }
    })
}

pub(crate) fn diverged_message(err: &Error) -> Option<String> {
    match err {
        Error::Diverged { tick, what } => Some(format!("tick {tick}: {what}")),
        _ => None,
    }
}
