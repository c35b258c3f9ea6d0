use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ForwardBackward, Gmm, Hmm, Topology};
use crate::audio::FeatureSequence;
use crate::error::{Error, Result};
use crate::math::derive_seed;
use crate::par::Parallelism;

/// Smallest variance ever allowed, whatever the data scale.
const ABS_VARIANCE_FLOOR: f64 = 1e-8;
/// Components with less posterior mass than this keep their previous parameters.
const MIN_OCCUPANCY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    LeftToRight,
    Ergodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub n_states: usize,
    pub n_mixtures: usize,
    pub topology: TopologyKind,
    /// Largest forward jump for left-to-right models.
    pub max_skip: usize,
    pub max_iters: usize,
    pub loglik_rel_tol: f64,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub variance_floor: f64,
    #[serde(default)]
    pub init_seed: u64,
    pub kmeans_restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_states: 6,
            n_mixtures: 3,
            topology: TopologyKind::LeftToRight,
            max_skip: 1,
            max_iters: 30,
            loglik_rel_tol: 1e-5,
            variance_floor: 1e-3,
            init_seed: 0,
            kmeans_restarts: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(format!("training: {m}")));
        if self.n_states == 0 || self.n_mixtures == 0 {
            return bad("n_states and n_mixtures must be >= 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if !(self.loglik_rel_tol > 0.0) {
            return bad("loglik_rel_tol must be > 0");
        }
        if !(self.variance_floor > 0.0) {
            return bad("variance_floor must be > 0");
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be >= 1");
        }
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        match self.topology {
            TopologyKind::LeftToRight => Topology::LeftToRight {
                max_skip: self.max_skip,
            },
            TopologyKind::Ergodic => Topology::Ergodic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainWarning {
    /// Training data has zero variance in some dimension; the absolute
    /// variance floor kept the densities finite.
    DegenerateInput { zero_variance_dims: usize },
    /// A state received no frames during flat-start segmentation and was
    /// seeded from the pooled data instead.
    EmptyInitialState { state: usize },
}

impl std::fmt::Display for TrainWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainWarning::DegenerateInput { zero_variance_dims } => write!(
                f,
                "degenerate input: {zero_variance_dims} feature dimension(s) have zero variance"
            ),
            TrainWarning::EmptyInitialState { state } => {
                write!(f, "state {state} got no frames in flat-start segmentation")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Hmm,
    /// Total training log-likelihood of each evaluated parameter set; the
    /// last entry belongs to the returned model.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub n_sequences: usize,
    pub n_frames: usize,
    pub warnings: Vec<TrainWarning>,
}

/// Train an HMM by EM from a flat-start initialization.
pub fn train_baum_welch(
    label: &str,
    data: &[&FeatureSequence],
    cfg: &TrainConfig,
    par: &Parallelism,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let Some(first) = data.first() else {
        return Err(Error::InsufficientData(format!("{label}: no training sequences")));
    };
    let dim = first.dim();
    if let Some(s) = data.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: s.dim(),
        });
    }
    let n_frames: usize = data.iter().map(|s| s.len()).sum();
    if n_frames < cfg.n_states * cfg.n_mixtures {
        return Err(Error::InsufficientData(format!(
            "{label}: {n_frames} frames cannot support {} states x {} mixtures",
            cfg.n_states, cfg.n_mixtures
        )));
    }

    let mut warnings = Vec::new();
    let floor = variance_floor(data, cfg.variance_floor, &mut warnings);
    let mut model = flat_start(label, data, cfg, &floor, &mut warnings)?;

    let mut stats = accumulate(&model, data, par)?;
    let mut trace = vec![stats.ll];
    let mut converged = false;
    for iteration in 1..=cfg.max_iters {
        let candidate = maximize(&model, &stats, &floor)?;
        let next = accumulate(&candidate, data, par)?;
        let (before, after) = (stats.ll, next.ll);
        if after < before - (1e-8 + 1e-12 * before.abs()) {
            return Err(Error::EmNotMonotone {
                label: label.to_string(),
                iteration,
                before,
                after,
            });
        }
        trace.push(after);
        model = candidate;
        stats = next;
        if (after - before) / before.abs().max(f64::MIN_POSITIVE) < cfg.loglik_rel_tol {
            converged = true;
            break;
        }
    }
    for w in &warnings {
        log::warn!("{label}: {w}");
    }
    Ok(TrainOutcome {
        model,
        trace,
        converged,
        n_sequences: data.len(),
        n_frames,
        warnings,
    })
}

fn variance_floor(data: &[&FeatureSequence], frac: f64, warnings: &mut Vec<TrainWarning>) -> Vec<f64> {
    let dim = data[0].dim();
    let mut count = 0.0;
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    // Welford, for stability with large cepstral offsets.
    for x in data.iter().flat_map(|s| s.frames()) {
        count += 1.0;
        for d in 0..dim {
            let delta = x[d] - mean[d];
            mean[d] += delta / count;
            m2[d] += delta * (x[d] - mean[d]);
        }
    }
    let zero_dims = m2.iter().filter(|&&v| v <= 0.0).count();
    if zero_dims > 0 {
        warnings.push(TrainWarning::DegenerateInput {
            zero_variance_dims: zero_dims,
        });
    }
    m2.iter()
        .map(|v| (frac * v / count).max(ABS_VARIANCE_FLOOR))
        .collect()
}

fn flat_start(
    label: &str,
    data: &[&FeatureSequence],
    cfg: &TrainConfig,
    floor: &[f64],
    warnings: &mut Vec<TrainWarning>,
) -> Result<Hmm> {
    let n = cfg.n_states;
    let mut segments: Vec<Vec<&[f64]>> = vec![Vec::new(); n];
    for seq in data {
        let t_len = seq.len();
        for (t, x) in seq.frames().enumerate() {
            segments[t * n / t_len].push(x);
        }
    }
    let all: Vec<&[f64]> = data.iter().flat_map(|s| s.frames()).collect();

    let mut states = Vec::with_capacity(n);
    for (j, seg) in segments.iter().enumerate() {
        let pts = if seg.is_empty() {
            warnings.push(TrainWarning::EmptyInitialState { state: j });
            &all
        } else {
            seg
        };
        let seed = derive_seed(cfg.init_seed, &format!("state{j}"));
        let km = kmeans(pts, cfg.n_mixtures, cfg.kmeans_restarts, seed);
        let state_var = moments(pts.iter().copied(), floor).1;
        let m = cfg.n_mixtures;
        let mut vars = Vec::with_capacity(m);
        for c in 0..m {
            let members = pts
                .iter()
                .zip(&km.assignment)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| *p);
            let (_, v, count) = moments_with_count(members, floor);
            vars.push(if count >= 2 { v } else { state_var.clone() });
        }
        states.push(Gmm {
            weights: vec![1.0 / m as f64; m],
            means: km.centroids,
            vars,
        });
    }

    let topo = cfg.topology();
    let mut pi = vec![0.0; n];
    match topo {
        Topology::LeftToRight { .. } => pi[0] = 1.0,
        _ => pi.iter_mut().for_each(|p| *p = 1.0 / n as f64),
    }
    let trans: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let allowed = (0..n).filter(|&j| topo.allows(i, j)).count() as f64;
            (0..n)
                .map(|j| if topo.allows(i, j) { 1.0 / allowed } else { 0.0 })
                .collect()
        })
        .collect();
    Hmm::from_probs(label, topo, &pi, &trans, states)
}

fn moments<'a>(pts: impl Iterator<Item = &'a [f64]>, floor: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, v, _) = moments_with_count(pts, floor);
    (m, v)
}

fn moments_with_count<'a>(
    pts: impl Iterator<Item = &'a [f64]>,
    floor: &[f64],
) -> (Vec<f64>, Vec<f64>, usize) {
    let dim = floor.len();
    let mut count = 0usize;
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    for x in pts {
        count += 1;
        let c = count as f64;
        for d in 0..dim {
            let delta = x[d] - mean[d];
            mean[d] += delta / c;
            m2[d] += delta * (x[d] - mean[d]);
        }
    }
    let var = m2
        .iter()
        .zip(floor)
        .map(|(v, f)| if count > 0 { (v / count as f64).max(*f) } else { *f })
        .collect();
    (mean, var, count)
}

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub sse: f64,
}

/// Seeded Lloyd's k-means with random-point initialization; the restart with
/// the lowest within-cluster sum of squares is kept, ties to the earliest.
/// With fewer points than clusters, points are reused as centroids.
pub fn kmeans(points: &[&[f64]], k: usize, restarts: usize, seed: u64) -> KMeans {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..restarts.max(1) {
        let init: Vec<Vec<f64>> = if points.len() >= k {
            sample(&mut rng, points.len(), k)
                .into_iter()
                .map(|i| points[i].to_vec())
                .collect()
        } else {
            (0..k).map(|c| points[c % points.len()].to_vec()).collect()
        };
        let run = lloyd(points, init);
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = sq_dist(x, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (a, x) in assignment.iter_mut().zip(points) {
            let c = nearest(x, &centroids).0;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, x) in assignment.iter().zip(points) {
            counts[a] += 1;
            sums[a].iter_mut().zip(x.iter()).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else if points.len() >= k {
                // Re-seed an empty cluster at the worst-fit point.
                let far = (0..points.len())
                    .map(|i| (i, sq_dist(points[i], &centroids[assignment[i]])))
                    .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b })
                    .0;
                centroids[c] = points[far].to_vec();
                assignment[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let sse = points
        .iter()
        .zip(&assignment)
        .map(|(x, &a)| sq_dist(x, &centroids[a]))
        .sum();
    KMeans {
        centroids,
        assignment,
        sse,
    }
}

/// Sufficient statistics gathered over all training sequences.
struct Stats {
    ll: f64,
    pi: Vec<f64>,
    trans: Vec<f64>,
    occ: Vec<f64>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Stats {
    fn zeros(n: usize, m: usize, d: usize) -> Self {
        Self {
            ll: 0.0,
            pi: vec![0.0; n],
            trans: vec![0.0; n * n],
            occ: vec![0.0; n * m],
            sum: vec![0.0; n * m * d],
            sumsq: vec![0.0; n * m * d],
        }
    }

    fn add(&mut self, o: &Stats) {
        self.ll += o.ll;
        let pairs = [
            (&mut self.pi, &o.pi),
            (&mut self.trans, &o.trans),
            (&mut self.occ, &o.occ),
            (&mut self.sum, &o.sum),
            (&mut self.sumsq, &o.sumsq),
        ];
        for (a, b) in pairs {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

fn accumulate(model: &Hmm, data: &[&FeatureSequence], par: &Parallelism) -> Result<Stats> {
    let per_seq = par.try_map(data, |seq| expectation(model, seq))?;
    let mut total = Stats::zeros(model.n_states(), model.n_mixtures(), model.feature_dim());
    // Ordered reduction keeps the sum bit-identical regardless of thread count.
    for s in &per_seq {
        total.add(s);
    }
    Ok(total)
}

fn expectation(model: &Hmm, seq: &FeatureSequence) -> Result<Stats> {
    let fb = ForwardBackward::run(model, seq)?;
    if !fb.log_likelihood.is_finite() {
        return Err(Error::InvalidModel(format!(
            "{}: training sequence has zero likelihood",
            model.label()
        )));
    }
    let (n, m, d) = (model.n_states(), fb.n_mix, model.feature_dim());
    let mut st = Stats::zeros(n, m, d);
    st.ll = fb.log_likelihood;
    let lt = model.log_trans();
    for t in 0..fb.n_frames {
        let x = seq.frame(t);
        for j in 0..n {
            let g = fb.gamma(t, j);
            if t == 0 {
                st.pi[j] += g;
            }
            if g == 0.0 {
                continue;
            }
            let lb = fb.logb[t * n + j];
            for c in 0..m {
                let w = g * (fb.comps[(t * n + j) * m + c] - lb).exp();
                if w == 0.0 {
                    continue;
                }
                st.occ[j * m + c] += w;
                let base = (j * m + c) * d;
                for k in 0..d {
                    st.sum[base + k] += w * x[k];
                    st.sumsq[base + k] += w * x[k] * x[k];
                }
            }
        }
        if t + 1 < fb.n_frames {
            for i in 0..n {
                let a = fb.alpha[t * n + i];
                if a == f64::NEG_INFINITY {
                    continue;
                }
                for j in 0..n {
                    if lt[i][j] == f64::NEG_INFINITY {
                        continue;
                    }
                    let k = (t + 1) * n + j;
                    st.trans[i * n + j] +=
                        (a + lt[i][j] + fb.logb[k] + fb.beta[k] - fb.log_likelihood).exp();
                }
            }
        }
    }
    Ok(st)
}

fn normalize_log(acc: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = acc.iter().sum();
    (total > 0.0).then(|| acc.iter().map(|&a| crate::math::ln_or_neg_inf(a / total)).collect())
}

fn maximize(model: &Hmm, st: &Stats, floor: &[f64]) -> Result<Hmm> {
    let (n, d) = (model.n_states(), model.feature_dim());
    let m = model.n_mixtures();
    let log_pi = normalize_log(&st.pi).unwrap_or_else(|| model.log_pi().to_vec());
    let log_trans = (0..n)
        .map(|i| {
            normalize_log(&st.trans[i * n..(i + 1) * n]).unwrap_or_else(|| model.log_trans()[i].clone())
        })
        .collect();
    let mut states = Vec::with_capacity(n);
    for (j, old) in model.states().iter().enumerate() {
        let occ = &st.occ[j * m..(j + 1) * m];
        let total: f64 = occ.iter().sum();
        if total <= MIN_OCCUPANCY {
            states.push(old.clone());
            continue;
        }
        let mut g = old.clone();
        for c in 0..m {
            g.weights[c] = occ[c] / total;
            if occ[c] <= MIN_OCCUPANCY {
                continue;
            }
            let base = (j * m + c) * d;
            for k in 0..d {
                let mean = st.sum[base + k] / occ[c];
                let var = st.sumsq[base + k] / occ[c] - mean * mean;
                g.means[c][k] = mean;
                g.vars[c][k] = var.max(floor[k]);
            }
        }
        // Renormalize away rounding so the simplex check stays tight.
        let wsum: f64 = g.weights.iter().sum();
        g.weights.iter_mut().for_each(|w| *w /= wsum);
        states.push(g);
    }
    Hmm::new(model.label(), model.topology(), log_pi, log_trans, states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::FrameMeta;
    use rand_distr::{Distribution, Normal};

    fn seq(rows: Vec<f64>, dim: usize) -> FeatureSequence {
        FeatureSequence::new(rows, dim, FrameMeta::default()).unwrap()
    }

    fn one_state(mixtures: usize) -> TrainConfig {
        TrainConfig {
            n_states: 1,
            n_mixtures: mixtures,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_gaussian_recovers_sample_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(2.0, 0.5).unwrap();
        let xs: Vec<f64> = (0..400).map(|_| normal.sample(&mut rng)).collect();
        let data = vec![seq(xs.clone(), 1)];
        let refs: Vec<&FeatureSequence> = data.iter().collect();
        let out = train_baum_welch("g", &refs, &one_state(1), &Parallelism::sequential()).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let g = &out.model.states()[0];
        let se = (var / n).sqrt();
        assert!((g.means[0][0] - mean).abs() < 3.0 * se);
        assert!((g.vars[0][0] - var).abs() < 1e-9);
        assert!(g.vars[0][0] >= 1e-3 * var);
    }

    #[test]
    fn trace_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<FeatureSequence> = (0..8)
            .map(|s| {
                let rows = (0..60 * 2)
                    .map(|i| normal.sample(&mut rng) + if i / 2 > 30 { 3.0 } else { s as f64 * 0.1 })
                    .collect();
                seq(rows, 2)
            })
            .collect();
        let refs: Vec<&FeatureSequence> = data.iter().collect();
        let cfg = TrainConfig {
            n_states: 3,
            n_mixtures: 2,
            ..TrainConfig::default()
        };
        let out = train_baum_welch("m", &refs, &cfg, &Parallelism::sequential()).unwrap();
        assert!(out.trace.len() >= 2);
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
        let final_ll: f64 = refs.iter().map(|s| out.model.log_likelihood(s).unwrap()).sum();
        assert!((final_ll - out.trace.last().unwrap()).abs() < 1e-6 * final_ll.abs());
    }

    #[test]
    fn identical_frames_train_with_warning() {
        let data = vec![seq(vec![0.5; 3 * 40], 3)];
        let refs: Vec<&FeatureSequence> = data.iter().collect();
        let out = train_baum_welch("flat", &refs, &TrainConfig::default(), &Parallelism::sequential()).unwrap();
        assert!(out
            .warnings
            .iter()
            .any(|w| matches!(w, TrainWarning::DegenerateInput { zero_variance_dims: 3 })));
        assert!(out.model.states().iter().all(|g| g.vars.iter().flatten().all(|&v| v > 0.0)));
    }

    #[test]
    fn too_little_data_is_rejected() {
        let data = vec![seq(vec![0.0, 1.0, 2.0], 1)];
        let refs: Vec<&FeatureSequence> = data.iter().collect();
        let r = train_baum_welch("x", &refs, &TrainConfig::default(), &Parallelism::sequential());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
        let r = train_baum_welch("x", &[], &TrainConfig::default(), &Parallelism::sequential());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn parallel_training_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<FeatureSequence> = (0..12)
            .map(|_| seq((0..80).map(|_| normal.sample(&mut rng)).collect(), 2))
            .collect();
        let refs: Vec<&FeatureSequence> = data.iter().collect();
        let cfg = TrainConfig {
            n_states: 2,
            n_mixtures: 2,
            ..TrainConfig::default()
        };
        let a = train_baum_welch("p", &refs, &cfg, &Parallelism::sequential()).unwrap();
        let b = train_baum_welch("p", &refs, &cfg, &Parallelism::with_jobs(4)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn kmeans_separates_obvious_clusters() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![if i % 2 == 0 { -5.0 } else { 5.0 } + (i as f64) * 0.01])
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let km = kmeans(&refs, 2, 3, 1);
        let mut c: Vec<f64> = km.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert!((c[0] + 4.86).abs() < 0.1 && (c[1] - 5.15).abs() < 0.1);
        assert_eq!(km, kmeans(&refs, 2, 3, 1));
    }
}
