//! Equal error rate and DET operating points.
//!
//! Operating points are taken at `-inf`, at every midpoint between adjacent
//! distinct scores, and at `+inf`. A trial is accepted when its score is
//! `>= threshold`.

use crate::error::{Error, Result};

/// Anything carrying a verification score and a target/non-target label.
pub trait Scored {
    fn score(&self) -> f64;
    fn is_target(&self) -> bool;
}

impl Scored for (f64, bool) {
    fn score(&self) -> f64 {
        self.0
    }

    fn is_target(&self) -> bool {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer_percent: f64,
    /// Threshold at the interpolated crossing.
    pub threshold: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// All operating points in increasing threshold order.
pub fn operating_points<T: Scored>(trials: &[T]) -> Result<Vec<OperatingPoint>> {
    let mut scored: Vec<(f64, bool)> = trials.iter().map(|t| (t.score(), t.is_target())).collect();
    if let Some(bad) = scored.iter().find(|s| !s.0.is_finite()) {
        return Err(Error::DegenerateTrialSet(format!("non-finite score {}", bad.0)));
    }
    let n_t = scored.iter().filter(|s| s.1).count();
    let n_n = scored.len() - n_t;
    if n_t == 0 || n_n == 0 {
        return Err(Error::DegenerateTrialSet(format!(
            "need targets and non-targets, got {n_t} and {n_n}"
        )));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nt, nn) = (n_t as f64, n_n as f64);
    // Below every score all trials are accepted.
    let mut rejected_t = 0usize;
    let mut rejected_n = 0usize;
    let mut points = vec![OperatingPoint {
        threshold: f64::NEG_INFINITY,
        far: 1.0,
        frr: 0.0,
    }];
    let mut i = 0;
    while i < scored.len() {
        let s = scored[i].0;
        while i < scored.len() && scored[i].0 == s {
            if scored[i].1 {
                rejected_t += 1;
            } else {
                rejected_n += 1;
            }
            i += 1;
        }
        let threshold = if i < scored.len() {
            s + (scored[i].0 - s) / 2.0
        } else {
            f64::INFINITY
        };
        points.push(OperatingPoint {
            threshold,
            far: (n_n - rejected_n) as f64 / nn,
            frr: rejected_t as f64 / nt,
        });
    }
    Ok(points)
}

/// `(FAR, FRR)` pairs from `(1, 0)` to `(0, 1)`.
pub fn det_curve<T: Scored>(trials: &[T]) -> Result<Vec<(f64, f64)>> {
    Ok(operating_points(trials)?.into_iter().map(|p| (p.far, p.frr)).collect())
}

/// EER by linear interpolation between the two operating points that
/// bracket `FAR = FRR`.
pub fn compute_eer<T: Scored>(trials: &[T]) -> Result<EerResult> {
    let points = operating_points(trials)?;
    let n_target = trials.iter().filter(|t| t.is_target()).count();
    let n_nontarget = trials.len() - n_target;
    let diff = |p: &OperatingPoint| p.far - p.frr;
    // diff falls from 1 at -inf to -1 at +inf.
    let k = points.iter().position(|p| diff(p) <= 0.0).expect("last point has FAR 0, FRR 1");
    let hi = points[k];
    let (eer, threshold) = if diff(&hi) == 0.0 {
        (hi.far, hi.threshold)
    } else {
        let lo = points[k - 1];
        let t = diff(&lo) / (diff(&lo) - diff(&hi));
        let eer = lo.far + t * (hi.far - lo.far);
        let threshold = match (lo.threshold.is_finite(), hi.threshold.is_finite()) {
            (true, true) => lo.threshold + t * (hi.threshold - lo.threshold),
            (true, false) => lo.threshold,
            (false, true) => hi.threshold,
            (false, false) => 0.0,
        };
        (eer, threshold)
    };
    Ok(EerResult {
        eer_percent: 100.0 * eer,
        threshold,
        n_target,
        n_nontarget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trials(t: &[f64], n: &[f64]) -> Vec<(f64, bool)> {
        t.iter().map(|&s| (s, true)).chain(n.iter().map(|&s| (s, false))).collect()
    }

    #[test]
    fn perfect_separation_is_zero() {
        let r = compute_eer(&trials(&[1.0, 1.0], &[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(r.eer_percent, 0.0);
        assert!(r.threshold > 0.0 && r.threshold < 1.0);
    }

    #[test]
    fn identical_distributions_are_fifty() {
        let s = [0.1, 0.5, 0.9, 1.3];
        assert!((compute_eer(&trials(&s, &s)).unwrap().eer_percent - 50.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example() {
        let r = compute_eer(&trials(&[0.9, 0.8, 0.2], &[0.7, 0.3, 0.1])).unwrap();
        assert!((r.eer_percent - 100.0 / 3.0).abs() < 1e-12);
        assert!((r.threshold - 0.5).abs() < 1e-12);
    }

    #[test]
    fn det_endpoints_and_monotonicity() {
        let d = det_curve(&trials(&[1.0], &[0.0])).unwrap();
        assert_eq!(d, vec![(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)]);
        let pts = operating_points(&trials(&[0.3, 0.3, 2.0, -1.0], &[0.3, 0.0, 5.0])).unwrap();
        for w in pts.windows(2) {
            assert!(w[0].threshold < w[1].threshold);
            assert!(w[1].far <= w[0].far && w[1].frr >= w[0].frr);
        }
    }

    #[test]
    fn degenerate_sets_are_rejected() {
        assert!(matches!(compute_eer(&trials(&[1.0], &[])), Err(Error::DegenerateTrialSet(_))));
        assert!(matches!(det_curve(&trials(&[], &[1.0])), Err(Error::DegenerateTrialSet(_))));
        assert!(compute_eer(&trials(&[f64::NAN], &[0.0])).is_err());
    }
}
