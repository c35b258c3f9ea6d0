//! Hidden Markov models with diagonal-covariance Gaussian-mixture emissions.
//!
//! All probability arithmetic is done in the log domain. A trained [`Hmm`] is
//! immutable and can be shared freely between scoring threads.

mod forward;
mod io;
mod train;

pub use forward::ForwardBackward;
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use train::{kmeans, train_baum_welch, TopologyKind, TrainConfig, TrainOutcome, TrainWarning};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, LN_2PI};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Topology {
    /// Self-loops plus forward moves of at most `max_skip` states.
    LeftToRight { max_skip: usize },
    Ergodic,
    /// Arbitrary hand-specified transition structure.
    Custom,
}

impl Topology {
    pub fn allows(self, from: usize, to: usize) -> bool {
        match self {
            Topology::LeftToRight { max_skip } => to >= from && to <= from + max_skip,
            Topology::Ergodic | Topology::Custom => true,
        }
    }
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl Gmm {
    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Self {
        Self {
            weights: vec![1.0],
            means: vec![mean],
            vars: vec![var],
        }
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self, dim: usize, state: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(format!("state {state}: {m}")));
        let m = self.weights.len();
        if m == 0 || self.means.len() != m || self.vars.len() != m {
            return bad("mixture arrays disagree in length".into());
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("negative or NaN mixture weight".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return bad(format!("mixture weights sum to {total}"));
        }
        for (mean, var) in self.means.iter().zip(&self.vars) {
            if mean.len() != dim || var.len() != dim {
                return bad(format!("component dimension differs from {dim}"));
            }
            if mean.iter().any(|v| !v.is_finite()) {
                return bad("non-finite mean".into());
            }
            if var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("variance not strictly positive".into());
            }
        }
        Ok(())
    }

    /// `log Σ_m w_m N(x; μ_m, diag σ²_m)`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        CompiledGmm::new(self).log_density(x, &mut Vec::new())
    }
}

/// Per-component constants precomputed for fast density evaluation.
#[derive(Debug, Clone)]
pub(crate) struct CompiledGmm {
    /// `ln w - ½(D ln 2π + Σ ln σ²)` per component.
    offsets: Vec<f64>,
    means: Vec<Vec<f64>>,
    inv_vars: Vec<Vec<f64>>,
}

impl CompiledGmm {
    fn new(g: &Gmm) -> Self {
        let offsets = g
            .weights
            .iter()
            .zip(&g.vars)
            .map(|(&w, var)| {
                let log_det: f64 = var.iter().map(|v| v.ln()).sum();
                crate::math::ln_or_neg_inf(w) - 0.5 * (var.len() as f64 * LN_2PI + log_det)
            })
            .collect();
        Self {
            offsets,
            means: g.means.clone(),
            inv_vars: g.vars.iter().map(|v| v.iter().map(|x| 1.0 / x).collect()).collect(),
        }
    }

    /// Fills `comps` with per-component weighted log densities and returns their log-sum.
    #[inline]
    pub(crate) fn log_density(&self, x: &[f64], comps: &mut Vec<f64>) -> f64 {
        comps.clear();
        for ((off, mean), inv) in self.offsets.iter().zip(&self.means).zip(&self.inv_vars) {
            let mut q = 0.0;
            for ((xi, mi), iv) in x.iter().zip(mean).zip(inv) {
                let d = xi - mi;
                q += d * d * iv;
            }
            comps.push(off - 0.5 * q);
        }
        if comps.len() == 1 {
            comps[0]
        } else {
            log_sum_exp(comps)
        }
    }
}

/// Hidden Markov model over continuous feature vectors.
#[derive(Debug, Clone)]
pub struct Hmm {
    label: String,
    feature_dim: usize,
    topology: Topology,
    log_pi: Vec<f64>,
    log_trans: Vec<Vec<f64>>,
    states: Vec<Gmm>,
    compiled: Vec<CompiledGmm>,
}

impl PartialEq for Hmm {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.feature_dim == other.feature_dim
            && self.topology == other.topology
            && self.log_pi == other.log_pi
            && self.log_trans == other.log_trans
            && self.states == other.states
    }
}

impl Hmm {
    /// Build and validate a model from log-domain parameters.
    pub fn new(
        label: impl Into<String>,
        topology: Topology,
        log_pi: Vec<f64>,
        log_trans: Vec<Vec<f64>>,
        states: Vec<Gmm>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidModel("model has no states".into()));
        }
        let feature_dim = states[0].means.first().map_or(0, Vec::len);
        if feature_dim == 0 {
            return Err(Error::InvalidModel("feature dimension is zero".into()));
        }
        if log_pi.len() != n || log_trans.len() != n || log_trans.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(format!(
                "initial/transition shapes do not match {n} states"
            )));
        }
        check_log_simplex(&log_pi, "initial distribution")?;
        for (i, row) in log_trans.iter().enumerate() {
            check_log_simplex(row, &format!("transition row {i}"))?;
            for (j, &a) in row.iter().enumerate() {
                if !topology.allows(i, j) && a != f64::NEG_INFINITY {
                    return Err(Error::InvalidModel(format!(
                        "transition {i}->{j} is forbidden by {topology:?}"
                    )));
                }
            }
        }
        for (i, g) in states.iter().enumerate() {
            g.validate(feature_dim, i)?;
        }
        let compiled = states.iter().map(CompiledGmm::new).collect();
        Ok(Self {
            label: label.into(),
            feature_dim,
            topology,
            log_pi,
            log_trans,
            states,
            compiled,
        })
    }

    /// Convenience constructor from linear-domain probabilities.
    pub fn from_probs(
        label: impl Into<String>,
        topology: Topology,
        pi: &[f64],
        trans: &[Vec<f64>],
        states: Vec<Gmm>,
    ) -> Result<Self> {
        let ln = crate::math::ln_or_neg_inf;
        Self::new(
            label,
            topology,
            pi.iter().map(|&p| ln(p)).collect(),
            trans.iter().map(|r| r.iter().map(|&p| ln(p)).collect()).collect(),
            states,
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_mixtures(&self) -> usize {
        self.states.iter().map(Gmm::n_components).max().unwrap_or(0)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn log_pi(&self) -> &[f64] {
        &self.log_pi
    }

    pub fn log_trans(&self) -> &[Vec<f64>] {
        &self.log_trans
    }

    pub fn states(&self) -> &[Gmm] {
        &self.states
    }

    pub(crate) fn compiled(&self) -> &[CompiledGmm] {
        &self.compiled
    }
}

fn check_log_simplex(logp: &[f64], what: &str) -> Result<()> {
    if logp.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::InvalidModel(format!("{what} contains NaN or +inf")));
    }
    let total: f64 = logp.iter().map(|v| v.exp()).sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {total}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gmm1(mean: f64, var: f64) -> Gmm {
        Gmm::single(vec![mean], vec![var])
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let r = Hmm::from_probs(
            "x",
            Topology::Ergodic,
            &[0.5, 0.5],
            &[vec![0.5, 0.6], vec![0.5, 0.5]],
            vec![gmm1(0.0, 1.0), gmm1(1.0, 1.0)],
        );
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn rejects_backward_transition_in_left_to_right() {
        let r = Hmm::from_probs(
            "x",
            Topology::LeftToRight { max_skip: 1 },
            &[1.0, 0.0],
            &[vec![0.5, 0.5], vec![0.1, 0.9]],
            vec![gmm1(0.0, 1.0), gmm1(1.0, 1.0)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_zero_variance_and_bad_weights() {
        let r = Hmm::from_probs("x", Topology::Ergodic, &[1.0], &[vec![1.0]], vec![gmm1(0.0, 0.0)]);
        assert!(r.is_err());
        let g = Gmm {
            weights: vec![0.7, 0.7],
            means: vec![vec![0.0], vec![1.0]],
            vars: vec![vec![1.0], vec![1.0]],
        };
        assert!(Hmm::from_probs("x", Topology::Ergodic, &[1.0], &[vec![1.0]], vec![g]).is_err());
    }

    #[test]
    fn gaussian_density_matches_closed_form() {
        let g = Gmm::single(vec![1.0, -2.0], vec![4.0, 0.25]);
        let x = [0.0, -1.5];
        let expect = -0.5 * (2.0 * LN_2PI + 4f64.ln() + 0.25f64.ln())
            - 0.5 * ((1.0 / 4.0) + (0.25 / 0.25));
        assert!((g.log_density(&x) - expect).abs() < 1e-12);
    }
}
