//! PPO with GAE, observation normalization and an optional RND bonus.

mod gae;
mod log;
pub mod nn;
mod normalize;
mod policy;
mod rnd;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gae::{gae_advantages, gae_rollout, normalize_advantages};
pub use log::{
    evaluate_final, rolling_mean, smoothing_window, EpisodeRecord, ProbeMetrics, TrainRunLog, LOG_SCHEMA_VERSION,
};
pub use normalize::{ObsNormMode, ObsNormalizer, RunningMeanStd, OBS_CLIP};
pub use policy::{DiscretePolicy, GaussianPolicy, LossCoefs, LossStats, Minibatch, Policy, Sample};
pub use rnd::{RndState, RND_LEARNING_RATE};

use crate::dsl::{evaluate_in_place, typecheck, EpisodeShapingState, EvalOptions, RewardProgram, Transition};
use crate::envs::{ActionSpace, Action, Env, EnvId};
use crate::error::{Error, Result};

/// Runs abort once a shaping program has saturated this many results.
pub const ADVISORY_STORM_LIMIT: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub entropy_coef: f64,
    pub ppo_epochs: usize,
    pub batch_size: usize,
    pub rollout_length: usize,
    pub episodes: usize,
    pub obs_norm_mode: ObsNormMode,
    /// Scale of the novelty bonus; 0 disables RND.
    pub rnd_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    /// Clamp per-step added shaping to [-1, 1].
    #[serde(default)]
    pub clamp_shaping: bool,
}

impl TrainConfig {
    /// Hyperparameters for the gridworlds.
    pub fn grid() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            entropy_coef: 0.1,
            ppo_epochs: 2,
            batch_size: 64,
            rollout_length: 512,
            episodes: 3000,
            obs_norm_mode: ObsNormMode::DivideBy10,
            rnd_coef: 0.0,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            clamp_shaping: false,
        }
    }

    /// Hyperparameters for the continuous tasks.
    pub fn continuous() -> Self {
        TrainConfig {
            entropy_coef: 0.0,
            ppo_epochs: 10,
            rollout_length: 2048,
            episodes: 1000,
            obs_norm_mode: ObsNormMode::RunningMeanStd,
            ..TrainConfig::grid()
        }
    }

    pub fn for_env(env: EnvId) -> Self {
        if env.is_grid() {
            TrainConfig::grid()
        } else {
            TrainConfig::continuous()
        }
    }

    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.episodes = episodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("gamma", self.gamma),
            ("clip_ratio", self.clip_ratio),
            ("max_grad_norm", self.max_grad_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let unit = [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let non_negative = [
            ("entropy_coef", self.entropy_coef),
            ("rnd_coef", self.rnd_coef),
            ("vf_coef", self.vf_coef),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [
            ("ppo_epochs", self.ppo_epochs),
            ("batch_size", self.batch_size),
            ("rollout_length", self.rollout_length),
            ("episodes", self.episodes),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.batch_size > self.rollout_length {
            return Err(Error::Config("batch_size exceeds rollout_length".into()));
        }
        Ok(())
    }

    fn coefs(&self) -> LossCoefs {
        LossCoefs {
            clip_ratio: self.clip_ratio,
            entropy_coef: self.entropy_coef,
            vf_coef: self.vf_coef,
            max_grad_norm: self.max_grad_norm,
        }
    }
}

struct Rollout {
    obs: Vec<f64>,
    actions: Vec<f64>,
    logp: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
}

impl Rollout {
    fn with_capacity(n: usize, obs_dim: usize, act_w: usize) -> Self {
        Rollout {
            obs: Vec::with_capacity(n * obs_dim),
            actions: Vec::with_capacity(n * act_w),
            logp: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
        }
    }

    fn len(&self) -> usize {
        self.rewards.len()
    }

    fn clear(&mut self) {
        self.obs.clear();
        self.actions.clear();
        self.logp.clear();
        self.values.clear();
        self.rewards.clear();
        self.dones.clear();
    }
}

fn ppo_update(
    policy: &mut Policy,
    buf: &Rollout,
    last_value: f64,
    cfg: &TrainConfig,
    obs_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = buf.len();
    let aw = policy.action_width();
    let mut adv = gae_rollout(&buf.rewards, &buf.values, last_value, &buf.dones, cfg.gamma, cfg.gae_lambda);
    let returns: Vec<f64> = adv.iter().zip(&buf.values).map(|(a, v)| a + v).collect();
    normalize_advantages(&mut adv);
    let coefs = cfg.coefs();
    let mut idx: Vec<usize> = (0..n).collect();
    let bs = cfg.batch_size;
    let mut mb_obs = Vec::with_capacity(bs * obs_dim);
    let mut mb_act = Vec::with_capacity(bs * aw);
    let mut mb_logp = Vec::with_capacity(bs);
    let mut mb_adv = Vec::with_capacity(bs);
    let mut mb_ret = Vec::with_capacity(bs);
    for _ in 0..cfg.ppo_epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(bs) {
            mb_obs.clear();
            mb_act.clear();
            mb_logp.clear();
            mb_adv.clear();
            mb_ret.clear();
            for &i in chunk {
                mb_obs.extend_from_slice(&buf.obs[i * obs_dim..(i + 1) * obs_dim]);
                mb_act.extend_from_slice(&buf.actions[i * aw..(i + 1) * aw]);
                mb_logp.push(buf.logp[i]);
                mb_adv.push(adv[i]);
                mb_ret.push(returns[i]);
            }
            let mb = Minibatch {
                obs: &mb_obs,
                actions: &mb_act,
                old_logp: &mb_logp,
                advantages: &mb_adv,
                returns: &mb_ret,
                size: chunk.len(),
            };
            let st = policy.update(&mb, &coefs);
            if !st.is_finite() {
                return Err(Error::TrainingAborted(format!(
                    "non-finite loss (policy {}, value {}, grad norm {})",
                    st.policy_loss, st.value_loss, st.grad_norm
                )));
            }
        }
    }
    Ok(())
}

/// Train from scratch. Deterministic in (env, program, config, seed).
pub fn train(env_id: EnvId, program: Option<&RewardProgram>, config: &TrainConfig, seed: u64) -> Result<TrainRunLog> {
    config.validate()?;
    let spec = env_id.spec();
    if let Some(p) = program {
        typecheck(p, Some(spec.kind))?;
    }
    let started = Instant::now();
    let obs_dim = spec.obs_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episode_seeds = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED);
    let mut policy = match spec.action_space {
        ActionSpace::Discrete(n) => Policy::Discrete(DiscretePolicy::new(obs_dim, n, config.learning_rate, &mut rng)),
        ActionSpace::Continuous(d) => Policy::Gaussian(GaussianPolicy::new(obs_dim, d, config.learning_rate, &mut rng)),
    };
    let mut normalizer = ObsNormalizer::new(config.obs_norm_mode, obs_dim);
    let mut rnd = (config.rnd_coef > 0.0).then(|| RndState::new(obs_dim, seed));
    let eval_opts = EvalOptions {
        clamp_shaping: config.clamp_shaping,
    };

    let mut env = Env::new(env_id);
    let mut buf = Rollout::with_capacity(config.rollout_length, obs_dim, policy.action_width());
    let mut episodes = Vec::with_capacity(config.episodes);
    let mut advisories: u64 = 0;

    let (first_obs, _) = env.reset(episode_seeds.random());
    let mut obs = Vec::with_capacity(obs_dim);
    normalizer.observe(&first_obs.to_features(), &mut obs);
    let mut next_obs = Vec::with_capacity(obs_dim);
    let mut shaping_state = EpisodeShapingState::default();
    let (mut raw_ret, mut shaped_ret, mut intr_ret) = (0.0, 0.0, 0.0);

    while episodes.len() < config.episodes {
        let sample = policy.act(&obs, &mut rng);
        let action = match &policy {
            Policy::Discrete(_) => Action::Discrete(sample.raw[0] as u8),
            Policy::Gaussian(_) => Action::Continuous(GaussianPolicy::squash(&sample.raw)),
        };
        let res = env.step(&action)?;
        let shaped = match program {
            Some(p) => {
                let t = Transition {
                    action: match action {
                        Action::Discrete(a) => Some(a),
                        Action::Continuous(_) => None,
                    },
                    raw_reward: res.raw_reward,
                    terminated: res.terminated,
                    truncated: res.truncated,
                    info: &res.info,
                };
                let out = evaluate_in_place(p, &t, &mut shaping_state, eval_opts)?;
                advisories += u64::from(out.saturations);
                if advisories > ADVISORY_STORM_LIMIT {
                    return Err(Error::TrainingAborted(format!(
                        "shaping program raised {advisories} saturation advisories"
                    )));
                }
                out.shaped_reward
            }
            None => res.raw_reward,
        };
        let next_features = res.observation.to_features();
        normalizer.observe(&next_features, &mut next_obs);
        let mut learner_reward = shaped;
        if let Some(r) = rnd.as_mut() {
            let b = r.bonus(&next_features);
            intr_ret += b;
            learner_reward += config.rnd_coef * b;
        }
        let done = res.terminated || res.truncated;
        if res.truncated && !res.terminated {
            learner_reward += config.gamma * policy.value(&next_obs);
        }
        buf.obs.extend_from_slice(&obs);
        buf.actions.extend_from_slice(&sample.raw);
        buf.logp.push(sample.logp);
        buf.values.push(sample.value);
        buf.rewards.push(learner_reward);
        buf.dones.push(done);
        raw_ret += res.raw_reward;
        shaped_ret += shaped;

        if done {
            episodes.push(EpisodeRecord {
                raw_return: raw_ret,
                shaped_return: shaped_ret,
                success: res.success && spec.has_binary_success,
                steps: res.info.step_count,
                intrinsic_return: rnd.is_some().then_some(intr_ret),
            });
            raw_ret = 0.0;
            shaped_ret = 0.0;
            intr_ret = 0.0;
            shaping_state = EpisodeShapingState::default();
            let (o, _) = env.reset(episode_seeds.random());
            normalizer.observe(&o.to_features(), &mut obs);
        } else {
            std::mem::swap(&mut obs, &mut next_obs);
        }

        if buf.len() == config.rollout_length && episodes.len() < config.episodes {
            let last_value = if done { 0.0 } else { policy.value(&obs) };
            ppo_update(&mut policy, &buf, last_value, config, obs_dim, &mut rng)?;
            buf.clear();
        }
    }

    Ok(TrainRunLog {
        env_id,
        seed,
        config: config.clone(),
        program: program.map(crate::dsl::print),
        episodes,
        advisories,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn default_blocks() {
        let g = TrainConfig::grid();
        assert_eq!(
            (g.learning_rate, g.gamma, g.gae_lambda, g.clip_ratio, g.entropy_coef),
            (3e-4, 0.99, 0.95, 0.2, 0.1)
        );
        assert_eq!((g.ppo_epochs, g.batch_size, g.rollout_length), (2, 64, 512));
        assert_eq!(g.obs_norm_mode, ObsNormMode::DivideBy10);
        let c = TrainConfig::continuous();
        assert_eq!((c.entropy_coef, c.ppo_epochs, c.batch_size, c.rollout_length), (0.0, 10, 64, 2048));
        assert_eq!(c.obs_norm_mode, ObsNormMode::RunningMeanStd);
        assert_eq!(TrainConfig::for_env(EnvId::LineRunner), c);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(TrainConfig { gamma: 1.5, ..TrainConfig::grid() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::grid() }.validate().is_err());
        assert!(TrainConfig { rnd_coef: -0.1, ..TrainConfig::grid() }.validate().is_err());
    }

    #[test]
    fn empty_program_is_identity_shaping() {
        let p = parse("(program)").unwrap();
        let cfg = TrainConfig::grid().with_episodes(5);
        let log = train(EnvId::LavaGapS5, Some(&p), &cfg, 3).unwrap();
        assert_eq!(log.episodes.len(), 5);
        for e in &log.episodes {
            assert_eq!(e.raw_return, e.shaped_return);
            assert!(e.raw_return <= 1.0);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = TrainConfig::grid().with_episodes(6);
        let a = train(EnvId::DoorKey5, None, &cfg, 17).unwrap();
        let b = train(EnvId::DoorKey5, None, &cfg, 17).unwrap();
        assert!(a.same_run(&b));
        let c = train(EnvId::DoorKey5, None, &cfg, 18).unwrap();
        assert!(!a.same_run(&c));
    }

    #[test]
    fn program_must_fit_env() {
        let p = parse("(program (rule v (when (> velocity 1)) (add 0.1)))").unwrap();
        let cfg = TrainConfig::grid().with_episodes(1);
        assert!(matches!(train(EnvId::DoorKey5, Some(&p), &cfg, 0), Err(Error::Dsl(_))));
    }

    #[test]
    fn advisory_storm_aborts() {
        let p = parse("(program (rule big (when true) (add (* 1e6 1e6))))").unwrap();
        let cfg = TrainConfig::grid().with_episodes(20);
        assert!(matches!(train(EnvId::DoorKey5, Some(&p), &cfg, 0), Err(Error::TrainingAborted(_))));
    }

    #[test]
    fn dense_runner_never_succeeds() {
        let cfg = TrainConfig::continuous().with_episodes(3);
        let log = train(EnvId::LineRunner, None, &cfg, 1).unwrap();
        assert!(log.episodes.iter().all(|e| !e.success && e.steps == 200));
    }

    #[test]
    fn rnd_records_intrinsic_return() {
        let cfg = TrainConfig {
            rnd_coef: 0.1,
            ..TrainConfig::grid().with_episodes(2)
        };
        let log = train(EnvId::LavaGapS5, None, &cfg, 4).unwrap();
        assert!(log.episodes.iter().all(|e| e.intrinsic_return.is_some_and(|v| v >= 0.0)));
    }
}
