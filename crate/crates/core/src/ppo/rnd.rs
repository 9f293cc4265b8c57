//! Random network distillation novelty bonus.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nn::{Activation, BatchCache, Mlp};
use super::normalize::RunningMeanStd;

const RND_LAYERS: [usize; 3] = [256, 256, 128];
const RND_OBS_CLIP: f64 = 5.0;
/// Plain gradient-descent step size for the predictor.
pub const RND_LEARNING_RATE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct RndState {
    target: Mlp,
    predictor: Mlp,
    obs_stats: RunningMeanStd,
    lr: f64,
    cache: BatchCache,
    grad: Vec<f64>,
    norm_buf: Vec<f64>,
}

impl RndState {
    pub fn new(obs_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x52_4e_44);
        let sizes = [obs_dim, RND_LAYERS[0], RND_LAYERS[1], RND_LAYERS[2]];
        let g = std::f64::consts::SQRT_2;
        let mut target = Mlp::new(&sizes, Activation::Relu, Activation::Identity, &[g, g, 1.0], &mut rng);
        target.randomize_biases(0.1, &mut rng);
        let mut predictor = Mlp::new(&sizes, Activation::Relu, Activation::Identity, &[g, g, 1.0], &mut rng);
        predictor.randomize_biases(0.1, &mut rng);
        let n = predictor.num_params();
        RndState {
            target,
            predictor,
            obs_stats: RunningMeanStd::new(obs_dim),
            lr: RND_LEARNING_RATE,
            cache: BatchCache::default(),
            grad: vec![0.0; n],
            norm_buf: Vec::new(),
        }
    }

    pub fn target_params(&self) -> &[f64] {
        self.target.params()
    }

    fn normalized(&self, obs: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(obs.len());
        self.obs_stats.normalize_into(obs, RND_OBS_CLIP, &mut out);
        out
    }

    /// Mean squared embedding error on an already-normalized batch; also
    /// leaves the output gradient in `dout` when given.
    fn batch_error(&mut self, x: &[f64], batch: usize, dout: Option<&mut Vec<f64>>) -> Vec<f64> {
        let k = RND_LAYERS[2];
        let mut tcache = BatchCache::default();
        self.target.forward_batch(x, batch, &mut tcache);
        self.predictor.forward_batch(x, batch, &mut self.cache);
        let (t, p) = (tcache.output(), self.cache.output());
        let errs: Vec<f64> = (0..batch)
            .map(|i| {
                (0..k)
                    .map(|j| (p[i * k + j] - t[i * k + j]).powi(2))
                    .sum::<f64>()
                    / k as f64
            })
            .collect();
        if let Some(d) = dout {
            d.clear();
            // Gradient of the batch-mean of per-sample MSE.
            let s = 2.0 / (k * batch) as f64;
            d.extend(p.iter().zip(t).map(|(pv, tv)| s * (pv - tv)));
        }
        errs
    }

    fn sgd_step(&mut self, dout: &[f64]) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.predictor.backward_batch(&self.cache, dout, &mut self.grad, false);
        for (w, g) in self.predictor.params_mut().iter_mut().zip(&self.grad) {
            *w -= self.lr * g;
        }
    }

    /// Novelty of `obs`, then one predictor step toward the target on it.
    pub fn bonus(&mut self, obs: &[f64]) -> f64 {
        self.obs_stats.update(obs);
        self.obs_stats.normalize_into(obs, RND_OBS_CLIP, &mut self.norm_buf);
        let x = std::mem::take(&mut self.norm_buf);
        let mut dout = Vec::new();
        let err = self.batch_error(&x, 1, Some(&mut dout))[0];
        self.sgd_step(&dout);
        self.norm_buf = x;
        err
    }

    /// Mean prediction error on a set of observations, without updating.
    pub fn loss(&mut self, obs_set: &[Vec<f64>]) -> f64 {
        let x: Vec<f64> = obs_set.iter().flat_map(|o| self.normalized(o)).collect();
        let errs = self.batch_error(&x, obs_set.len(), None);
        errs.iter().sum::<f64>() / errs.len() as f64
    }

    /// One full-batch predictor step on a set of observations.
    pub fn update_on(&mut self, obs_set: &[Vec<f64>]) {
        let x: Vec<f64> = obs_set.iter().flat_map(|o| self.normalized(o)).collect();
        let mut dout = Vec::new();
        self.batch_error(&x, obs_set.len(), Some(&mut dout));
        self.sgd_step(&dout);
    }

    /// Fold a set of observations into the normalization statistics.
    pub fn observe_all(&mut self, obs_set: &[Vec<f64>]) {
        for o in obs_set {
            self.obs_stats.update(o);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn obs(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(0.0..10.0)).collect()).collect()
    }

    #[test]
    fn repeated_observation_bonus_decreases() {
        let mut rnd = RndState::new(147, 42);
        let o = &obs(1, 1, 147)[0];
        let b: Vec<f64> = (0..100).map(|_| rnd.bonus(o)).collect();
        assert!(b.iter().all(|x| *x >= 0.0));
        for w in b[10..].windows(2) {
            assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
        }
        assert!(b[99] < b[0]);
    }

    #[test]
    fn target_is_frozen_and_runs_are_deterministic() {
        let stream = obs(2, 50, 4);
        let mut a = RndState::new(4, 7);
        let mut b = RndState::new(4, 7);
        let t0 = a.target_params().to_vec();
        let ba: Vec<f64> = stream.iter().map(|o| a.bonus(o)).collect();
        let bb: Vec<f64> = stream.iter().map(|o| b.bonus(o)).collect();
        assert_eq!(ba, bb);
        assert_eq!(a.target_params(), &t0[..]);
    }

    #[test]
    fn loss_on_fixed_set_is_monotone() {
        let set = obs(3, 32, 147);
        let mut rnd = RndState::new(147, 9);
        rnd.observe_all(&set);
        let mut prev = rnd.loss(&set);
        let mut violations = 0;
        for _ in 0..100 {
            rnd.update_on(&set);
            let l = rnd.loss(&set);
            if l > prev {
                violations += 1;
            }
            prev = l;
        }
        assert!(violations <= 5, "{violations} increases");
    }
}
