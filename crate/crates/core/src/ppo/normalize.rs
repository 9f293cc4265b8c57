use serde::{Deserialize, Serialize};

/// Streaming mean and variance (parallel Welford update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningMeanStd {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl RunningMeanStd {
    pub fn new(dim: usize) -> Self {
        RunningMeanStd {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 1e-4,
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        let n = self.count + 1.0;
        for ((m, v), &xi) in self.mean.iter_mut().zip(&mut self.var).zip(x) {
            let delta = xi - *m;
            let new_mean = *m + delta / n;
            // Combine (count, var) with a batch of one sample and zero variance.
            *v = (*v * self.count + delta * delta * self.count / n) / n;
            *m = new_mean;
        }
        self.count = n;
    }

    /// `(x - mean) / sqrt(var + eps)`, clipped to `[-clip, clip]`.
    pub fn normalize_into(&self, x: &[f64], clip: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(self.mean.iter().zip(&self.var))
                .map(|(&xi, (&m, &v))| ((xi - m) / (v + 1e-8).sqrt()).clamp(-clip, clip)),
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsNormMode {
    DivideBy10,
    RunningMeanStd,
}

pub const OBS_CLIP: f64 = 10.0;

#[derive(Debug, Clone)]
pub enum ObsNormalizer {
    DivideBy10,
    Running(RunningMeanStd),
}

impl ObsNormalizer {
    pub fn new(mode: ObsNormMode, dim: usize) -> Self {
        match mode {
            ObsNormMode::DivideBy10 => ObsNormalizer::DivideBy10,
            ObsNormMode::RunningMeanStd => ObsNormalizer::Running(RunningMeanStd::new(dim)),
        }
    }

    /// Normalize a freshly observed vector, updating running statistics first.
    pub fn observe(&mut self, x: &[f64], out: &mut Vec<f64>) {
        match self {
            ObsNormalizer::DivideBy10 => {
                out.clear();
                out.extend(x.iter().map(|v| v / 10.0));
            }
            ObsNormalizer::Running(rms) => {
                rms.update(x);
                rms.normalize_into(x, OBS_CLIP, out);
            }
        }
    }

    /// Normalize without touching statistics.
    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        match self {
            ObsNormalizer::DivideBy10 => {
                out.clear();
                out.extend(x.iter().map(|v| v / 10.0));
            }
            ObsNormalizer::Running(rms) => rms.normalize_into(x, OBS_CLIP, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_two_pass_statistics(xs in prop::collection::vec(-50.0f64..50.0, 2..200)) {
            let mut rms = RunningMeanStd::new(1);
            for x in &xs {
                rms.update(&[*x]);
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            // The tiny prior count biases the estimate by O(1e-4 * mean^2 / n).
            prop_assert!((rms.mean[0] - mean).abs() < 1e-3 * (1.0 + mean.abs()));
            prop_assert!((rms.var[0] - var).abs() < 1e-3 * (1.0 + var + mean * mean));
        }
    }

    #[test]
    fn clipping_applies() {
        let mut n = ObsNormalizer::new(ObsNormMode::RunningMeanStd, 1);
        let mut out = Vec::new();
        for _ in 0..100 {
            n.observe(&[0.0], &mut out);
        }
        n.apply(&[1e6], &mut out);
        assert_eq!(out[0], OBS_CLIP);
    }

    #[test]
    fn divide_by_ten() {
        let mut n = ObsNormalizer::new(ObsNormMode::DivideBy10, 3);
        let mut out = Vec::new();
        n.observe(&[10.0, 5.0, 0.0], &mut out);
        assert_eq!(out, vec![1.0, 0.5, 0.0]);
    }
}
