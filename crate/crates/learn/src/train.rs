//! Rollout collection and the training loop for all three learners.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cmtg_core::agents::ScriptedAgent;
use cmtg_core::env::{Env, EnvConfig};
use cmtg_core::observe::encode;
use cmtg_core::scm::WinWeights;
use cmtg_core::{Archetype, GameState};

use crate::buffer::{prepare, Prepared, RolloutBuffer, Step};
use crate::cwm::{cwm_act, Cwm, CwmConfig, Sample};
use crate::loss::{run_epochs, GateMode, LossCoeffs, LossParts, UpdateMode, UpdateSettings};
use crate::metrics::{rollout_calibration, UpdateMetrics};
use crate::net::sparsify;
use crate::optim::{linear_schedule, Adam};
use crate::policy::{NetConfig, PolicyNet};
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainCoeffs {
    pub lr_start: f64,
    pub lr_end: f64,
    pub c_v: f64,
    pub ent_start: f64,
    pub ent_end: f64,
    pub c_f: f64,
    pub c_c: f64,
    pub c_e: f64,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub n_steps: usize,
    pub grad_norm_max: f64,
    pub delta: f64,
}

impl Default for TrainCoeffs {
    fn default() -> Self {
        TrainCoeffs {
            lr_start: 3e-4,
            lr_end: 1e-5,
            c_v: 0.5,
            ent_start: 0.05,
            ent_end: 0.005,
            c_f: 0.5,
            c_c: 0.1,
            c_e: 0.0,
            clip: 0.2,
            gamma: 0.995,
            lambda: 0.95,
            epochs: 10,
            minibatch: 256,
            n_steps: 2048,
            grad_norm_max: 0.5,
            delta: 1e-6,
        }
    }
}

impl TrainCoeffs {
    pub fn loss(&self, c_h: f64) -> LossCoeffs {
        LossCoeffs { clip: self.clip, c_v: self.c_v, c_h, c_f: self.c_f, c_c: self.c_c, c_e: self.c_e, delta: self.delta }
    }

    pub fn settings(&self, lr: f64) -> UpdateSettings {
        UpdateSettings { epochs: self.epochs, minibatch: self.minibatch, lr, grad_norm_max: self.grad_norm_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Algo {
    Ppo,
    Cgfa { gate: GateMode },
    Cwm(CwmConfig),
}

impl Algo {
    pub fn mode(&self) -> UpdateMode {
        match self {
            Algo::Cgfa { gate } => UpdateMode::Cgfa { gate: *gate },
            _ => UpdateMode::Ppo,
        }
    }
}

/// The six learner variants compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    MaskedPpo,
    Cwm,
    ScalarOnly,
    NoGate,
    NoCalibration,
    Cgfa,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::MaskedPpo, Variant::Cwm, Variant::ScalarOnly, Variant::NoGate, Variant::NoCalibration, Variant::Cgfa];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::MaskedPpo => "masked_ppo",
            Variant::Cwm => "cwm",
            Variant::ScalarOnly => "scalar_only",
            Variant::NoGate => "no_gate",
            Variant::NoCalibration => "no_calibration",
            Variant::Cgfa => "cgfa",
        }
    }

    /// Algorithm and the coefficient overrides defining the variant.
    pub fn apply(self, algo: &mut Algo, c: &mut TrainCoeffs) {
        let d = TrainCoeffs::default();
        (c.c_f, c.c_c, c.c_e) = (d.c_f, d.c_c, d.c_e);
        *algo = match self {
            Variant::MaskedPpo => Algo::Ppo,
            Variant::Cwm => Algo::Cwm(CwmConfig::default()),
            Variant::ScalarOnly => {
                (c.c_f, c.c_c, c.c_e) = (0.0, 0.0, 0.0);
                Algo::Cgfa { gate: GateMode::Fixed(0.0) }
            }
            // Constant blend at the initial gate value.
            Variant::NoGate => Algo::Cgfa { gate: GateMode::Fixed(0.5) },
            Variant::NoCalibration => {
                c.c_c = 0.0;
                Algo::Cgfa { gate: GateMode::Learned }
            }
            Variant::Cgfa => Algo::Cgfa { gate: GateMode::Learned },
        };
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| LearnError::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub net: NetConfig,
    pub env: EnvConfig,
    pub algo: Algo,
    pub coeffs: TrainCoeffs,
    pub total_steps: u64,
    pub seed: u64,
    /// Scripted games played first to fit the WinProb weights that seed
    /// the mixture logits.
    pub warmup_games: usize,
}

impl TrainConfig {
    /// Laptop profile: [64, 64] networks, 512-step rollouts, 5e4 steps,
    /// against the heuristic pool.
    pub fn desk(deck: Archetype, variant: Variant, seed: u64) -> Self {
        let mut cfg = TrainConfig {
            net: NetConfig::desk(),
            env: EnvConfig::heuristic_pool(deck),
            algo: Algo::Ppo,
            coeffs: TrainCoeffs { n_steps: 512, ..Default::default() },
            total_steps: 50_000,
            seed,
            warmup_games: 200,
        };
        variant.apply(&mut cfg.algo, &mut cfg.coeffs);
        cfg
    }

    /// Reference profile: [512, 256] networks, 2048-step rollouts, 1e6 steps.
    pub fn full(deck: Archetype, variant: Variant, seed: u64) -> Self {
        let mut cfg = TrainConfig {
            net: NetConfig::full(),
            coeffs: TrainCoeffs::default(),
            total_steps: 1_000_000,
            ..Self::desk(deck, variant, seed)
        };
        variant.apply(&mut cfg.algo, &mut cfg.coeffs);
        cfg
    }

    pub fn total_updates(&self) -> usize {
        (self.total_steps as usize).div_ceil(self.coeffs.n_steps.max(1))
    }
}

fn check_buffer(buf: &RolloutBuffer) -> Result<(), LearnError> {
    if buf.is_empty() {
        return Err(LearnError::BadBuffer("empty rollout".into()));
    }
    buf.validate()
}

/// Masked PPO update on normalised scalar advantages.
pub fn ppo_update(
    net: &mut PolicyNet,
    opt: &mut Adam,
    buf: &RolloutBuffer,
    c: &TrainCoeffs,
    lr: f64,
    c_h: f64,
    rng: &mut impl Rng,
) -> Result<(LossParts, Prepared), LearnError> {
    check_buffer(buf)?;
    let prep = prepare(buf, c.gamma, c.lambda, None)?;
    let parts = run_epochs(net, opt, buf, &prep, UpdateMode::Ppo, &c.loss(c_h), &c.settings(lr), rng)?;
    Ok((parts, prep))
}

/// Factored-advantage update: blend with the gate, normalise across the
/// rollout, then optimise the full objective.
#[allow(clippy::too_many_arguments)]
pub fn cgfa_update(
    net: &mut PolicyNet,
    opt: &mut Adam,
    buf: &RolloutBuffer,
    c: &TrainCoeffs,
    gate: GateMode,
    lr: f64,
    c_h: f64,
    rng: &mut impl Rng,
) -> Result<(LossParts, Prepared), LearnError> {
    check_buffer(buf)?;
    let w = net.mixture();
    let g_of = |t: usize| match gate {
        GateMode::Learned => buf.steps[t].g,
        GateMode::Fixed(v) => v,
    };
    let prep = prepare(buf, c.gamma, c.lambda, Some((&g_of, &w)))?;
    let mode = UpdateMode::Cgfa { gate };
    let parts = run_epochs(net, opt, buf, &prep, mode, &c.loss(c_h), &c.settings(lr), rng)?;
    Ok((parts, prep))
}

/// Seeded random streams of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Streams {
    pub act: ChaCha8Rng,
    pub shuffle: ChaCha8Rng,
    pub episode: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            act: ChaCha8Rng::seed_from_u64(seed ^ 0xac71_0000),
            shuffle: ChaCha8Rng::seed_from_u64(seed ^ 0x5b0f_f1e0),
            episode: ChaCha8Rng::seed_from_u64(seed ^ 0xe915_0de0),
        }
    }
}

pub struct Trainer {
    pub config: TrainConfig,
    pub net: PolicyNet,
    pub opt: Adam,
    pub cwm: Option<Cwm>,
    pub env: Env,
    pub streams: Streams,
    pub updates: usize,
    pub env_steps: u64,
    pub metrics: Vec<UpdateMetrics>,
    cur: Option<(Vec<(u32, f32)>, Vec<usize>)>,
    pending: Vec<Sample>,
    episodes: u64,
    wins: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self, LearnError> {
        let mut env = Env::new(config.env.clone())?;
        let mut streams = Streams::new(config.seed);
        warmup(&mut env, config.warmup_games, &mut streams.episode)?;
        let net = PolicyNet::new(config.net.clone(), &env.learner.weights, config.seed);
        let opt = Adam::new(net.n_params());
        let cwm = match config.algo {
            Algo::Cwm(c) => Some(Cwm::new(c, config.net.obs_dim, config.net.n_actions, config.seed ^ 0xc3)),
            _ => None,
        };
        Ok(Trainer {
            config,
            net,
            opt,
            cwm,
            env,
            streams,
            updates: 0,
            env_steps: 0,
            metrics: Vec::new(),
            cur: None,
            pending: Vec::new(),
            episodes: 0,
            wins: 0,
        })
    }

    fn progress(&self) -> f64 {
        let total = self.config.total_updates().max(1);
        self.updates as f64 / total as f64
    }

    fn reset_env(&mut self) -> Result<(), LearnError> {
        let seed: u64 = self.streams.episode.gen();
        let (obs, mask) = self.env.reset(seed)?;
        self.cur = Some((sparsify(&obs), mask.to_vec()));
        Ok(())
    }

    pub fn collect(&mut self) -> Result<RolloutBuffer, LearnError> {
        let mode = self.config.algo.mode();
        let explore = match &self.cwm {
            Some(c) => c.config.explore_at(self.progress()),
            None => 0.0,
        };
        let slopes = self.env.learner.weights.raw_slopes();
        let mut buf = RolloutBuffer::default();
        for _ in 0..self.config.coeffs.n_steps {
            if self.cur.is_none() {
                self.reset_env()?;
            }
            let (obs, legal) = self.cur.take().unwrap();
            let out = self.net.forward(&obs, &legal)?;
            let action = match &self.cwm {
                Some(c) => {
                    cwm_act(&out, |a| c.score(&obs, a, &slopes), c.config.lambda, explore, &mut self.streams.act)?
                }
                None => out.sample(&mut self.streams.act),
            };
            let tr = self.env.step(action)?;
            self.env_steps += 1;
            if self.cwm.is_some() {
                self.pending.push(Sample { obs: obs.clone(), action, dcv: tr.r_factor, won: false });
            }
            buf.steps.push(Step {
                logp: out.log_prob(action),
                action,
                reward: tr.reward,
                done: tr.done,
                r_factor: tr.r_factor,
                eps: tr.eps,
                v: out.v,
                vk: out.vk,
                g: mode.gate_value(&out),
                obs,
                legal,
            });
            if tr.done {
                self.episodes += 1;
                let won = tr.outcome.and_then(|o| o.winner()) == Some(self.env.agent_seat());
                self.wins += won as u64;
                if let Some(c) = self.cwm.as_mut() {
                    for mut s in self.pending.drain(..) {
                        s.won = won;
                        c.push(s);
                    }
                }
            } else {
                self.cur = Some((sparsify(&tr.obs), tr.mask.to_vec()));
            }
        }
        if let Some((obs, legal)) = &self.cur {
            let out = self.net.forward(obs, legal)?;
            buf.bootstrap_v = out.v;
            buf.bootstrap_vk = out.vk;
        }
        Ok(buf)
    }

    /// One rollout and one update.
    pub fn iterate(&mut self) -> Result<&UpdateMetrics, LearnError> {
        let (ep0, w0) = (self.episodes, self.wins);
        let buf = self.collect()?;
        let frac = self.progress();
        let c = self.config.coeffs;
        let lr = linear_schedule(c.lr_start, c.lr_end, frac);
        let c_h = linear_schedule(c.ent_start, c.ent_end, frac);
        let (loss, prep) = match self.config.algo {
            Algo::Cgfa { gate } => {
                cgfa_update(&mut self.net, &mut self.opt, &buf, &c, gate, lr, c_h, &mut self.streams.shuffle)?
            }
            _ => ppo_update(&mut self.net, &mut self.opt, &buf, &c, lr, c_h, &mut self.streams.shuffle)?,
        };
        if let Some(cwm) = self.cwm.as_mut() {
            cwm.update()?;
        }
        let mixture = self.net.mixture();
        self.metrics.push(UpdateMetrics {
            update: self.updates,
            env_steps: self.env_steps,
            episodes: self.episodes - ep0,
            wins: self.wins - w0,
            lr,
            c_h,
            loss,
            mixture,
            calibration: rollout_calibration(&buf, &prep, &mixture),
        });
        self.updates += 1;
        Ok(self.metrics.last().unwrap())
    }

    pub fn train(&mut self) -> Result<(), LearnError> {
        while self.env_steps < self.config.total_steps {
            self.iterate()?;
        }
        Ok(())
    }

    pub fn agent(&self) -> GreedyAgent {
        GreedyAgent { net: self.net.clone(), cwm: self.cwm.clone(), weights: self.env.learner.weights }
    }
}

/// Scripted games whose outcomes fit the WinProb weights before training.
fn warmup(env: &mut Env, games: usize, rng: &mut ChaCha8Rng) -> Result<(), LearnError> {
    let me = ScriptedAgent::heuristic(env.config.agent_deck);
    let mut act_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    for _ in 0..games {
        env.reset(rng.gen())?;
        while !env.is_done() {
            let a = me.act(env.state().unwrap(), &mut act_rng).map_err(cmtg_core::env::EnvError::from)?;
            env.step(a)?;
        }
    }
    Ok(())
}

/// Deterministic evaluation policy: argmax over legal actions (lowest
/// index on ties), with the world-model score added for the CWM learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyAgent {
    pub net: PolicyNet,
    pub cwm: Option<Cwm>,
    pub weights: WinWeights,
}

impl GreedyAgent {
    pub fn act(&self, state: &GameState, seat: usize) -> Result<usize, LearnError> {
        let obs = sparsify(&encode(state, seat));
        let legal = state.mask().map_err(cmtg_core::env::EnvError::from)?.to_vec();
        let out = self.net.forward(&obs, &legal)?;
        match &self.cwm {
            Some(c) => {
                let slopes = self.weights.raw_slopes();
                let mut never = ChaCha8Rng::seed_from_u64(0);
                cwm_act(&out, |a| c.score(&obs, a, &slopes), c.config.lambda, 0.0, &mut never)
            }
            None => Ok(out.argmax()),
        }
    }
}

