use super::Hmm;
use crate::audio::FeatureSequence;
use crate::error::{Error, Result};
use crate::math::{argmax, log_sum_exp};

impl Hmm {
    fn check_dim(&self, seq: &FeatureSequence) -> Result<()> {
        if seq.dim() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                found: seq.dim(),
            });
        }
        Ok(())
    }

    /// `T x N` table of state emission log densities.
    pub fn emission_log_probs(&self, seq: &FeatureSequence) -> Result<Vec<f64>> {
        self.check_dim(seq)?;
        let mut scratch = Vec::with_capacity(self.n_mixtures());
        let mut out = Vec::with_capacity(seq.len() * self.n_states());
        for x in seq.frames() {
            for g in self.compiled() {
                out.push(g.log_density(x, &mut scratch));
            }
        }
        Ok(out)
    }

    /// Total `log P(O | model)` by the log-domain forward recursion.
    pub fn log_likelihood(&self, seq: &FeatureSequence) -> Result<f64> {
        let n = self.n_states();
        let logb = self.emission_log_probs(seq)?;
        let mut alpha: Vec<f64> = (0..n).map(|j| self.log_pi()[j] + logb[j]).collect();
        let mut next = vec![0.0; n];
        let mut terms = vec![0.0; n];
        for t in 1..seq.len() {
            let b = &logb[t * n..(t + 1) * n];
            for j in 0..n {
                for i in 0..n {
                    terms[i] = alpha[i] + self.log_trans()[i][j];
                }
                next[j] = log_sum_exp(&terms) + b[j];
            }
            std::mem::swap(&mut alpha, &mut next);
        }
        Ok(log_sum_exp(&alpha))
    }

    /// Per-frame normalized log-likelihood, `log P(O | model) / T`.
    pub fn avg_log_likelihood(&self, seq: &FeatureSequence) -> Result<f64> {
        Ok(self.log_likelihood(seq)? / seq.len() as f64)
    }

    /// Most likely state path and its joint log probability. Ties go to the
    /// lowest state index.
    pub fn viterbi(&self, seq: &FeatureSequence) -> Result<(Vec<usize>, f64)> {
        let n = self.n_states();
        let t_len = seq.len();
        let logb = self.emission_log_probs(seq)?;
        let mut delta: Vec<f64> = (0..n).map(|j| self.log_pi()[j] + logb[j]).collect();
        let mut back = vec![0usize; t_len * n];
        let mut next = vec![0.0; n];
        let mut cand = vec![0.0; n];
        for t in 1..t_len {
            for j in 0..n {
                for i in 0..n {
                    cand[i] = delta[i] + self.log_trans()[i][j];
                }
                let best = argmax(&cand).unwrap_or(0);
                back[t * n + j] = best;
                next[j] = cand[best] + logb[t * n + j];
            }
            std::mem::swap(&mut delta, &mut next);
        }
        let mut state = argmax(&delta).unwrap_or(0);
        let score = delta[state];
        let mut path = vec![0; t_len];
        for t in (0..t_len).rev() {
            path[t] = state;
            state = back[t * n + state];
        }
        Ok((path, score))
    }
}

/// Full forward-backward pass with per-component log densities, as needed
/// by the EM statistics.
#[derive(Debug)]
pub struct ForwardBackward {
    pub n_states: usize,
    pub n_frames: usize,
    pub log_likelihood: f64,
    /// `T x N` state emission log densities.
    pub logb: Vec<f64>,
    /// `T x N x M` weighted component log densities (M = max mixtures).
    pub comps: Vec<f64>,
    pub n_mix: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ForwardBackward {
    pub fn run(model: &Hmm, seq: &FeatureSequence) -> Result<Self> {
        model.check_dim(seq)?;
        let n = model.n_states();
        let m = model.n_mixtures();
        let t_len = seq.len();
        let mut logb = Vec::with_capacity(t_len * n);
        let mut comps = vec![f64::NEG_INFINITY; t_len * n * m];
        let mut scratch = Vec::with_capacity(m);
        for (t, x) in seq.frames().enumerate() {
            for (j, g) in model.compiled().iter().enumerate() {
                logb.push(g.log_density(x, &mut scratch));
                let base = (t * n + j) * m;
                comps[base..base + scratch.len()].copy_from_slice(&scratch);
            }
        }

        let lt = model.log_trans();
        let mut terms = vec![0.0; n];
        let mut alpha = vec![0.0; t_len * n];
        for j in 0..n {
            alpha[j] = model.log_pi()[j] + logb[j];
        }
        for t in 1..t_len {
            for j in 0..n {
                for i in 0..n {
                    terms[i] = alpha[(t - 1) * n + i] + lt[i][j];
                }
                alpha[t * n + j] = log_sum_exp(&terms) + logb[t * n + j];
            }
        }
        let log_likelihood = log_sum_exp(&alpha[(t_len - 1) * n..]);

        let mut beta = vec![0.0; t_len * n];
        for t in (0..t_len.saturating_sub(1)).rev() {
            for i in 0..n {
                for j in 0..n {
                    terms[j] = lt[i][j] + logb[(t + 1) * n + j] + beta[(t + 1) * n + j];
                }
                beta[t * n + i] = log_sum_exp(&terms);
            }
        }
        Ok(Self {
            n_states: n,
            n_frames: t_len,
            log_likelihood,
            logb,
            comps,
            n_mix: m,
            alpha,
            beta,
        })
    }

    /// Posterior state occupancy `γ_t(j)`.
    #[inline]
    pub fn gamma(&self, t: usize, j: usize) -> f64 {
        let k = t * self.n_states + j;
        (self.alpha[k] + self.beta[k] - self.log_likelihood).exp()
    }
}
