//! Actor-critic networks and the clipped PPO objective.

use rand::Rng;
use rand_distr::StandardNormal;

use super::nn::{clip_grad_norm, Activation, Adam, BatchCache, Mlp};

const HIDDEN_GRID: usize = 128;
const HIDDEN_CONT: usize = 256;
const LOG_STD_RANGE: (f64, f64) = (-5.0, 2.0);
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Coefficients of the PPO loss.
#[derive(Debug, Clone, Copy)]
pub struct LossCoefs {
    pub clip_ratio: f64,
    pub entropy_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
}

/// A minibatch drawn from a rollout. `actions` holds a discrete index per
/// row, or the pre-squash Gaussian sample for continuous policies.
pub struct Minibatch<'a> {
    pub obs: &'a [f64],
    pub actions: &'a [f64],
    pub old_logp: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
    pub size: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

impl LossStats {
    pub fn is_finite(&self) -> bool {
        self.policy_loss.is_finite() && self.value_loss.is_finite() && self.entropy.is_finite() && self.grad_norm.is_finite()
    }
}

/// Output of one policy query.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Stored action representation (index, or pre-squash sample).
    pub raw: Vec<f64>,
    pub logp: f64,
    pub value: f64,
}

/// d(clipped surrogate)/d(log-prob) for one sample, and whether it was clipped.
#[inline]
fn surrogate_grad(logp: f64, old_logp: f64, adv: f64, clip: f64) -> (f64, f64, bool) {
    let ratio = (logp - old_logp).exp();
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
    let loss = -unclipped.min(clipped);
    let is_clipped = (ratio - 1.0).abs() > clip;
    // The gradient flows only through the unclipped branch when it is the minimum.
    let g = if unclipped <= clipped { -ratio * adv } else { 0.0 };
    (loss, g, is_clipped)
}

/// Categorical policy: shared tanh trunk with a combined logits+value head.
#[derive(Debug, Clone)]
pub struct DiscretePolicy {
    net: Mlp,
    adam: Adam,
    grad: Vec<f64>,
    cache: BatchCache,
    n_actions: usize,
}

fn log_softmax(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    for (o, z) in out.iter_mut().zip(logits) {
        *o = z - lse;
    }
}

impl DiscretePolicy {
    pub fn new<R: Rng>(obs_dim: usize, n_actions: usize, lr: f64, rng: &mut R) -> Self {
        let g = std::f64::consts::SQRT_2;
        let mut net = Mlp::new(
            &[obs_dim, HIDDEN_GRID, HIDDEN_GRID, n_actions + 1],
            Activation::Tanh,
            Activation::Identity,
            &[g, g, 1.0],
            rng,
        );
        for a in 0..n_actions {
            net.scale_output_column(a, 0.01);
        }
        let n = net.num_params();
        DiscretePolicy {
            net,
            adam: Adam::new(n, lr),
            grad: vec![0.0; n],
            cache: BatchCache::default(),
            n_actions,
        }
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.net.forward(obs)[self.n_actions]
    }

    /// Action log-probabilities and state value.
    pub fn distribution(&self, obs: &[f64]) -> (Vec<f64>, f64) {
        let out = self.net.forward(obs);
        let mut logp = vec![0.0; self.n_actions];
        log_softmax(&out[..self.n_actions], &mut logp);
        (logp, out[self.n_actions])
    }

    pub fn act<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Sample {
        let (logp, value) = self.distribution(obs);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut a = self.n_actions - 1;
        for (i, lp) in logp.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                a = i;
                break;
            }
        }
        Sample {
            raw: vec![a as f64],
            logp: logp[a],
            value,
        }
    }

    pub fn greedy(&self, obs: &[f64]) -> usize {
        let (logp, _) = self.distribution(obs);
        logp.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }

    /// Loss value and gradient of the loss w.r.t. the network output.
    pub fn loss_and_output_grad(&self, out: &[f64], mb: &Minibatch<'_>, c: &LossCoefs, dout: &mut [f64]) -> LossStats {
        let k = self.n_actions;
        let w = k + 1;
        let inv_b = 1.0 / mb.size as f64;
        let mut st = LossStats::default();
        let mut logp = vec![0.0; k];
        for i in 0..mb.size {
            let row = &out[i * w..(i + 1) * w];
            let d = &mut dout[i * w..(i + 1) * w];
            log_softmax(&row[..k], &mut logp);
            let a = mb.actions[i] as usize;
            let (loss, g_logp, clipped) = surrogate_grad(logp[a], mb.old_logp[i], mb.advantages[i], c.clip_ratio);
            let ent: f64 = -logp.iter().map(|l| l.exp() * l).sum::<f64>();
            for j in 0..k {
                let p = logp[j].exp();
                let dlogp = if j == a { 1.0 - p } else { -p };
                // d(-coef * H)/dz_j = coef * p_j * (log p_j + H)
                d[j] = inv_b * (g_logp * dlogp + c.entropy_coef * p * (logp[j] + ent));
            }
            let v = row[k];
            d[k] = inv_b * c.vf_coef * 2.0 * (v - mb.returns[i]);
            st.policy_loss += inv_b * loss;
            st.value_loss += inv_b * (v - mb.returns[i]).powi(2);
            st.entropy += inv_b * ent;
            st.approx_kl += inv_b * (mb.old_logp[i] - logp[a]);
            st.clip_fraction += inv_b * f64::from(u8::from(clipped));
        }
        st
    }

    pub fn update(&mut self, mb: &Minibatch<'_>, c: &LossCoefs) -> LossStats {
        self.net.forward_batch(mb.obs, mb.size, &mut self.cache);
        let mut dout = vec![0.0; mb.size * (self.n_actions + 1)];
        let mut st = self.loss_and_output_grad(self.cache.output(), mb, c, &mut dout);
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.net.backward_batch(&self.cache, &dout, &mut self.grad, false);
        st.grad_norm = clip_grad_norm(&mut [&mut self.grad], c.max_grad_norm);
        if st.is_finite() {
            self.adam.step(self.net.params_mut(), &self.grad);
        }
        st
    }

    /// Total loss for a minibatch, used by gradient checks.
    pub fn loss(&self, mb: &Minibatch<'_>, c: &LossCoefs) -> f64 {
        let mut cache = BatchCache::default();
        self.net.forward_batch(mb.obs, mb.size, &mut cache);
        let mut dout = vec![0.0; mb.size * (self.n_actions + 1)];
        let st = self.loss_and_output_grad(cache.output(), mb, c, &mut dout);
        st.policy_loss + c.vf_coef * st.value_loss - c.entropy_coef * st.entropy
    }

    /// Gradient of [`Self::loss`] w.r.t. all parameters (no clipping).
    pub fn loss_grad(&self, mb: &Minibatch<'_>, c: &LossCoefs) -> Vec<f64> {
        let mut cache = BatchCache::default();
        self.net.forward_batch(mb.obs, mb.size, &mut cache);
        let mut dout = vec![0.0; mb.size * (self.n_actions + 1)];
        self.loss_and_output_grad(cache.output(), mb, c, &mut dout);
        let mut grad = vec![0.0; self.net.num_params()];
        self.net.backward_batch(&cache, &dout, &mut grad, false);
        grad
    }
}

/// Tanh-squashed Gaussian actor with a separate critic.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    actor: Mlp,
    critic: Mlp,
    log_std: Vec<f64>,
    adam_actor: Adam,
    adam_critic: Adam,
    adam_log_std: Adam,
    g_actor: Vec<f64>,
    g_critic: Vec<f64>,
    g_log_std: Vec<f64>,
    cache_a: BatchCache,
    cache_c: BatchCache,
}

impl GaussianPolicy {
    pub fn new<R: Rng>(obs_dim: usize, act_dim: usize, lr: f64, rng: &mut R) -> Self {
        let g = std::f64::consts::SQRT_2;
        let actor = Mlp::new(
            &[obs_dim, HIDDEN_CONT, HIDDEN_CONT, act_dim],
            Activation::Tanh,
            Activation::Identity,
            &[g, g, 0.01],
            rng,
        );
        let critic = Mlp::new(
            &[obs_dim, HIDDEN_CONT, HIDDEN_CONT, 1],
            Activation::Tanh,
            Activation::Identity,
            &[g, g, 1.0],
            rng,
        );
        let (na, nc) = (actor.num_params(), critic.num_params());
        GaussianPolicy {
            actor,
            critic,
            log_std: vec![0.0; act_dim],
            adam_actor: Adam::new(na, lr),
            adam_critic: Adam::new(nc, lr),
            adam_log_std: Adam::new(act_dim, lr),
            g_actor: vec![0.0; na],
            g_critic: vec![0.0; nc],
            g_log_std: vec![0.0; act_dim],
            cache_a: BatchCache::default(),
            cache_c: BatchCache::default(),
        }
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    fn log_std_at(&self, j: usize) -> f64 {
        self.log_std[j].clamp(LOG_STD_RANGE.0, LOG_STD_RANGE.1)
    }

    /// Log-density of the pre-squash sample `u` under N(mu, σ²).
    fn gaussian_logp(&self, mu: &[f64], u: &[f64]) -> f64 {
        mu.iter()
            .zip(u)
            .enumerate()
            .map(|(j, (m, x))| {
                let s = self.log_std_at(j);
                let z = (x - m) / s.exp();
                -0.5 * z * z - s - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.forward(obs)[0]
    }

    /// Samples `u ~ N(mu, σ²)`; the environment receives `tanh(u)`.
    /// `logp` is the Gaussian log-density of `u`; the tanh Jacobian does not
    /// depend on parameters and cancels in the probability ratio.
    pub fn act<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Sample {
        let mu = self.actor.forward(obs);
        let u: Vec<f64> = mu
            .iter()
            .enumerate()
            .map(|(j, m)| m + self.log_std_at(j).exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Sample {
            logp: self.gaussian_logp(&mu, &u),
            raw: u,
            value: self.value(obs),
        }
    }

    pub fn squash(raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|u| u.tanh()).collect()
    }

    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        Self::squash(&self.actor.forward(obs))
    }

    fn actor_terms(&self, mu_all: &[f64], mb: &Minibatch<'_>, c: &LossCoefs, d_mu: &mut [f64], d_ls: &mut [f64]) -> LossStats {
        let k = self.act_dim();
        let inv_b = 1.0 / mb.size as f64;
        let mut st = LossStats::default();
        let ent: f64 = (0..k).map(|j| self.log_std_at(j) + 0.5 * (1.0 + LN_2PI)).sum();
        for i in 0..mb.size {
            let mu = &mu_all[i * k..(i + 1) * k];
            let u = &mb.actions[i * k..(i + 1) * k];
            let logp = self.gaussian_logp(mu, u);
            let (loss, g_logp, clipped) = surrogate_grad(logp, mb.old_logp[i], mb.advantages[i], c.clip_ratio);
            for j in 0..k {
                let s = self.log_std_at(j);
                let var = (2.0 * s).exp();
                let diff = u[j] - mu[j];
                d_mu[i * k + j] = inv_b * g_logp * diff / var;
                let clamp_open = self.log_std[j] > LOG_STD_RANGE.0 && self.log_std[j] < LOG_STD_RANGE.1;
                if clamp_open {
                    d_ls[j] += inv_b * g_logp * (diff * diff / var - 1.0);
                }
            }
            st.policy_loss += inv_b * loss;
            st.approx_kl += inv_b * (mb.old_logp[i] - logp);
            st.clip_fraction += inv_b * f64::from(u8::from(clipped));
        }
        for j in 0..k {
            let open = self.log_std[j] > LOG_STD_RANGE.0 && self.log_std[j] < LOG_STD_RANGE.1;
            if open {
                d_ls[j] -= c.entropy_coef;
            }
        }
        st.entropy = ent;
        st
    }

    pub fn update(&mut self, mb: &Minibatch<'_>, c: &LossCoefs) -> LossStats {
        let k = self.act_dim();
        self.actor.forward_batch(mb.obs, mb.size, &mut self.cache_a);
        self.critic.forward_batch(mb.obs, mb.size, &mut self.cache_c);
        let mut d_mu = vec![0.0; mb.size * k];
        self.g_log_std.iter_mut().for_each(|g| *g = 0.0);
        let mut g_ls = std::mem::take(&mut self.g_log_std);
        let mut st = self.actor_terms(self.cache_a.output(), mb, c, &mut d_mu, &mut g_ls);
        self.g_log_std = g_ls;
        let inv_b = 1.0 / mb.size as f64;
        let mut d_v = vec![0.0; mb.size];
        for (i, (v, r)) in self.cache_c.output().iter().zip(mb.returns).enumerate() {
            d_v[i] = inv_b * c.vf_coef * 2.0 * (v - r);
            st.value_loss += inv_b * (v - r).powi(2);
        }
        self.g_actor.iter_mut().for_each(|g| *g = 0.0);
        self.g_critic.iter_mut().for_each(|g| *g = 0.0);
        self.actor.backward_batch(&self.cache_a, &d_mu, &mut self.g_actor, false);
        self.critic.backward_batch(&self.cache_c, &d_v, &mut self.g_critic, false);
        st.grad_norm = clip_grad_norm(
            &mut [&mut self.g_actor, &mut self.g_critic, &mut self.g_log_std],
            c.max_grad_norm,
        );
        if st.is_finite() {
            self.adam_actor.step(self.actor.params_mut(), &self.g_actor);
            self.adam_critic.step(self.critic.params_mut(), &self.g_critic);
            self.adam_log_std.step(&mut self.log_std, &self.g_log_std);
        }
        st
    }

    pub fn loss(&self, mb: &Minibatch<'_>, c: &LossCoefs) -> f64 {
        let k = self.act_dim();
        let mut ca = BatchCache::default();
        let mut cc = BatchCache::default();
        self.actor.forward_batch(mb.obs, mb.size, &mut ca);
        self.critic.forward_batch(mb.obs, mb.size, &mut cc);
        let mut d_mu = vec![0.0; mb.size * k];
        let mut d_ls = vec![0.0; k];
        let st = self.actor_terms(ca.output(), mb, c, &mut d_mu, &mut d_ls);
        let vl: f64 = cc.output().iter().zip(mb.returns).map(|(v, r)| (v - r).powi(2)).sum::<f64>() / mb.size as f64;
        st.policy_loss + c.vf_coef * vl - c.entropy_coef * st.entropy
    }

    /// Gradient of [`Self::loss`] w.r.t. (actor, critic, log_std).
    pub fn loss_grad(&self, mb: &Minibatch<'_>, c: &LossCoefs) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.act_dim();
        let mut ca = BatchCache::default();
        let mut cc = BatchCache::default();
        self.actor.forward_batch(mb.obs, mb.size, &mut ca);
        self.critic.forward_batch(mb.obs, mb.size, &mut cc);
        let mut d_mu = vec![0.0; mb.size * k];
        let mut d_ls = vec![0.0; k];
        self.actor_terms(ca.output(), mb, c, &mut d_mu, &mut d_ls);
        let d_v: Vec<f64> = cc
            .output()
            .iter()
            .zip(mb.returns)
            .map(|(v, r)| c.vf_coef * 2.0 * (v - r) / mb.size as f64)
            .collect();
        let mut ga = vec![0.0; self.actor.num_params()];
        let mut gc = vec![0.0; self.critic.num_params()];
        self.actor.backward_batch(&ca, &d_mu, &mut ga, false);
        self.critic.backward_batch(&cc, &d_v, &mut gc, false);
        (ga, gc, d_ls)
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        &mut self.log_std
    }
}

/// Policy for either action space.
#[derive(Debug, Clone)]
pub enum Policy {
    Discrete(DiscretePolicy),
    Gaussian(GaussianPolicy),
}

impl Policy {
    pub fn act<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Sample {
        match self {
            Policy::Discrete(p) => p.act(obs, rng),
            Policy::Gaussian(p) => p.act(obs, rng),
        }
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        match self {
            Policy::Discrete(p) => p.value(obs),
            Policy::Gaussian(p) => p.value(obs),
        }
    }

    pub fn update(&mut self, mb: &Minibatch<'_>, c: &LossCoefs) -> LossStats {
        match self {
            Policy::Discrete(p) => p.update(mb, c),
            Policy::Gaussian(p) => p.update(mb, c),
        }
    }

    /// Width of one stored action row.
    pub fn action_width(&self) -> usize {
        match self {
            Policy::Discrete(_) => 1,
            Policy::Gaussian(p) => p.act_dim(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const COEFS: LossCoefs = LossCoefs {
        clip_ratio: 0.2,
        entropy_coef: 0.1,
        vf_coef: 0.5,
        max_grad_norm: 0.5,
    };

    struct Data {
        obs: Vec<f64>,
        actions: Vec<f64>,
        old_logp: Vec<f64>,
        adv: Vec<f64>,
        ret: Vec<f64>,
        size: usize,
    }

    impl Data {
        fn mb(&self) -> Minibatch<'_> {
            Minibatch {
                obs: &self.obs,
                actions: &self.actions,
                old_logp: &self.old_logp,
                advantages: &self.adv,
                returns: &self.ret,
                size: self.size,
            }
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs().max(b.abs()).max(1e-3))
    }

    #[test]
    fn discrete_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = DiscretePolicy::new(6, 4, 3e-4, &mut rng);
        // Larger output weights so the policy terms are not negligible.
        for a in 0..4 {
            p.network_mut().scale_output_column(a, 50.0);
        }
        let size = 8;
        let obs: Vec<f64> = (0..size * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut actions = Vec::new();
        let mut old_logp = Vec::new();
        for i in 0..size {
            let (lp, _) = p.distribution(&obs[i * 6..(i + 1) * 6]);
            let a = i % 4;
            actions.push(a as f64);
            // Keep ratios inside the clip range so gradients are non-zero.
            old_logp.push(lp[a] + rng.random_range(-0.05..0.05));
        }
        let d = Data {
            obs,
            actions,
            old_logp,
            adv: (0..size).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ret: (0..size).map(|_| rng.random_range(-1.0..1.0)).collect(),
            size,
        };
        let g = p.loss_grad(&d.mb(), &COEFS);
        let eps = 1e-4;
        let n = p.network().num_params();
        for t in 0..10 {
            let i = (t * 7919 + 13) % n;
            let orig = p.network().params()[i];
            p.network_mut().params_mut()[i] = orig + eps;
            let lp = p.loss(&d.mb(), &COEFS);
            p.network_mut().params_mut()[i] = orig - eps;
            let lm = p.loss(&d.mb(), &COEFS);
            p.network_mut().params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            assert!(rel_err(fd, g[i]) <= 1e-3, "param {i}: fd {fd} analytic {}", g[i]);
        }
    }

    #[test]
    fn gaussian_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut p = GaussianPolicy::new(3, 2, 3e-4, &mut rng);
        p.log_std_mut().copy_from_slice(&[-0.3, 0.2]);
        let size = 6;
        let obs: Vec<f64> = (0..size * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut actions = Vec::new();
        let mut old_logp = Vec::new();
        for i in 0..size {
            let s = p.act(&obs[i * 3..(i + 1) * 3], &mut rng);
            actions.extend_from_slice(&s.raw);
            old_logp.push(s.logp + rng.random_range(-0.05..0.05));
        }
        let d = Data {
            obs,
            actions,
            old_logp,
            adv: (0..size).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ret: (0..size).map(|_| rng.random_range(-1.0..1.0)).collect(),
            size,
        };
        let c = LossCoefs { entropy_coef: 0.05, ..COEFS };
        let (ga, gc, gl) = p.loss_grad(&d.mb(), &c);
        let eps = 1e-4;
        fn param(p: &mut GaussianPolicy, which: usize, i: usize) -> &mut f64 {
            match which {
                0 => &mut p.actor_mut().params_mut()[i],
                1 => &mut p.critic_mut().params_mut()[i],
                _ => &mut p.log_std_mut()[i],
            }
        }
        let check = |p: &mut GaussianPolicy, which: usize, i: usize, analytic: f64| {
            let orig = *param(p, which, i);
            *param(p, which, i) = orig + eps;
            let lp = p.loss(&d.mb(), &c);
            *param(p, which, i) = orig - eps;
            let lm = p.loss(&d.mb(), &c);
            *param(p, which, i) = orig;
            let fd = (lp - lm) / (2.0 * eps);
            assert!(rel_err(fd, analytic) <= 1e-3, "group {which} param {i}: fd {fd} analytic {analytic}");
        };
        let na = ga.len();
        let nc = gc.len();
        // Output-layer actor weights carry the largest policy gradients.
        for t in 0..4 {
            let i = na - 1 - t * 5;
            check(&mut p, 0, i, ga[i]);
        }
        for t in 0..4 {
            let i = (t * 4099 + 3) % nc;
            check(&mut p, 1, i, gc[i]);
        }
        for (j, &g) in gl.iter().enumerate() {
            check(&mut p, 2, j, g);
        }
    }

    #[test]
    fn surrogate_gradient_is_zero_when_clipped() {
        let (_, g, clipped) = surrogate_grad(0.5, 0.0, 1.0, 0.2);
        assert!(clipped);
        assert_eq!(g, 0.0);
        let (_, g, clipped) = surrogate_grad(0.5, 0.0, -1.0, 0.2);
        assert!(clipped);
        assert!(g > 0.0);
        let (loss, g, _) = surrogate_grad(0.0, 0.0, 2.0, 0.2);
        assert_eq!((loss, g), (-2.0, -2.0));
    }

    #[test]
    fn initial_discrete_policy_is_near_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = DiscretePolicy::new(147, 7, 3e-4, &mut rng);
        let obs: Vec<f64> = (0..147).map(|i| (i % 11) as f64 / 10.0).collect();
        let (logp, _) = p.distribution(&obs);
        for lp in logp {
            assert!((lp.exp() - 1.0 / 7.0).abs() < 0.02);
        }
    }

    #[test]
    fn discrete_update_raises_advantaged_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = DiscretePolicy::new(4, 3, 1e-2, &mut rng);
        let obs = vec![0.5, -0.2, 0.1, 0.3];
        let before = p.distribution(&obs).0[1];
        for _ in 0..20 {
            let lp = p.distribution(&obs).0[1];
            let d = Data {
                obs: obs.clone(),
                actions: vec![1.0],
                old_logp: vec![lp],
                adv: vec![1.0],
                ret: vec![0.0],
                size: 1,
            };
            p.update(&d.mb(), &LossCoefs { entropy_coef: 0.0, ..COEFS });
        }
        assert!(p.distribution(&obs).0[1] > before + 0.1);
    }
}
