//! Stage-1 and stage-2 identification counts.

use crate::corpus::Gender;

/// Ground truth and cascade decisions for one test utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceDecision {
    pub utterance: String,
    pub gender_true: Gender,
    pub gender_decided: Gender,
    pub emotion_true: String,
    /// Decided over the emotion models of `gender_decided`.
    pub emotion_decided: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrices {
    pub emotions: Vec<String>,
    /// `[true][decided]` in `Gender::ALL` order.
    pub gender: [[usize; 2]; 2],
    /// Per true gender, `[true emotion][decided emotion]`.
    pub emotion: [Vec<Vec<usize>>; 2],
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl ConfusionMatrices {
    pub fn gender_recall(&self, g: Gender) -> f64 {
        let row = self.gender[g.index()];
        pct(row[g.index()], row.iter().sum())
    }

    /// Fraction of utterances whose gender was identified correctly, in %.
    pub fn gender_accuracy(&self) -> f64 {
        let correct = self.gender[0][0] + self.gender[1][1];
        pct(correct, self.gender.iter().flatten().sum())
    }

    /// Recall of emotion `i` among utterances of gender `g`, in %.
    pub fn emotion_recall(&self, g: Gender, i: usize) -> f64 {
        let row = &self.emotion[g.index()][i];
        pct(row[i], row.iter().sum())
    }

    /// Recall of emotion `i` over both genders, in %.
    pub fn emotion_recall_pooled(&self, i: usize) -> f64 {
        let (mut hit, mut total) = (0, 0);
        for m in &self.emotion {
            hit += m[i][i];
            total += m[i].iter().sum::<usize>();
        }
        pct(hit, total)
    }

    /// Mean of the per-emotion recalls for gender `g`, in %.
    pub fn emotion_average(&self, g: Gender) -> f64 {
        let n = self.emotions.len();
        (0..n).map(|i| self.emotion_recall(g, i)).sum::<f64>() / n as f64
    }

    /// Mean of the pooled per-emotion recalls, in %.
    pub fn emotion_average_pooled(&self) -> f64 {
        let n = self.emotions.len();
        (0..n).map(|i| self.emotion_recall_pooled(i)).sum::<f64>() / n as f64
    }
}

pub fn confusion_matrices(decisions: &[UtteranceDecision], emotions: &[String]) -> ConfusionMatrices {
    let m = emotions.len();
    let mut out = ConfusionMatrices {
        emotions: emotions.to_vec(),
        gender: [[0; 2]; 2],
        emotion: [vec![vec![0; m]; m], vec![vec![0; m]; m]],
    };
    let idx = |e: &str| emotions.iter().position(|x| x == e);
    for d in decisions {
        out.gender[d.gender_true.index()][d.gender_decided.index()] += 1;
        if let (Some(t), Some(c)) = (idx(&d.emotion_true), idx(&d.emotion_decided)) {
            out.emotion[d.gender_true.index()][t][c] += 1;
        }
    }
    out
}
