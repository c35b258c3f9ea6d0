//! Text and CSV renderings of an evaluation.

use std::fmt::Write as _;
use std::path::Path;

use super::confusion::{ConfusionMatrices, UtteranceDecision};
use super::suite::{EvalReport, Framework, TrialScore};
use crate::corpus::Gender;
use crate::error::{Error, Result};

pub const TRIAL_HEADER: [&str; 13] = [
    "utterance",
    "claimed",
    "true_speaker",
    "gender_true",
    "gender_decided",
    "emotion_true",
    "emotion_decided",
    "mode",
    "lambda",
    "target_term",
    "wrong_emotion_term",
    "wrong_gender_term",
    "accept",
];

fn identification_tables(out: &mut String, c: &ConfusionMatrices, corpus: &str) {
    let _ = writeln!(out, "Gender identification (counts, rows = true gender)");
    let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>12}", "", "male", "female", "recall %");
    for g in Gender::ALL {
        let row = c.gender[g.index()];
        let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>12.2}", g.as_str(), row[0], row[1], c.gender_recall(g));
    }
    let _ = writeln!(out, "overall accuracy: {:.2}%", c.gender_accuracy());
    let _ = writeln!(out);

    let _ = writeln!(out, "Gender-dependent emotion identification (% recall, {corpus})");
    let _ = writeln!(out, "{:<12}{:>10}{:>10}{:>10}", "emotion", "male", "female", "both");
    for (i, e) in c.emotions.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<12}{:>10.2}{:>10.2}{:>10.2}",
            e,
            c.emotion_recall(Gender::Male, i),
            c.emotion_recall(Gender::Female, i),
            c.emotion_recall_pooled(i)
        );
    }
    let _ = writeln!(
        out,
        "{:<12}{:>10.2}{:>10.2}{:>10.2}",
        "average",
        c.emotion_average(Gender::Male),
        c.emotion_average(Gender::Female),
        c.emotion_average_pooled()
    );
    let _ = writeln!(out);

    for g in Gender::ALL {
        let _ = writeln!(out, "Emotion confusion, {g} (rows = true, columns = decided)");
        let _ = write!(out, "{:<12}", "");
        for e in &c.emotions {
            let _ = write!(out, "{e:>11}");
        }
        let _ = writeln!(out);
        for (i, e) in c.emotions.iter().enumerate() {
            let _ = write!(out, "{e:<12}");
            for n in &c.emotion[g.index()][i] {
                let _ = write!(out, "{n:>11}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
    }
}

/// Human-readable report: identification tables, per-emotion EER table,
/// framework comparison and ordering checks.
pub fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Corpus: {}", report.corpus_name);
    let _ = writeln!(out);
    if let Some(c) = &report.confusion {
        identification_tables(&mut out, c, &report.corpus_name);
    }
    if report.modes.is_empty() {
        return out;
    }
    let _ = writeln!(out, "Per-emotion EER (%), per-emotion thresholds");
    let _ = write!(out, "{:<12}", "emotion");
    for m in &report.modes {
        let _ = write!(out, "{:>19}", m.mode.as_str());
    }
    let _ = writeln!(out);
    for (i, (e, _)) in report.modes[0].per_emotion.iter().enumerate() {
        let _ = write!(out, "{e:<12}");
        for m in &report.modes {
            let _ = write!(out, "{:>19.2}", m.per_emotion[i].1.eer_percent);
        }
        let _ = writeln!(out);
    }
    let _ = write!(out, "{:<12}", "average");
    for m in &report.modes {
        let _ = write!(out, "{:>19.2}", m.average_eer);
    }
    let _ = writeln!(out);
    let _ = write!(out, "{:<12}", "pooled");
    for m in &report.modes {
        let _ = write!(out, "{:>19.2}", m.pooled.eer_percent);
    }
    let _ = writeln!(out);
    let _ = writeln!(out);

    let _ = writeln!(out, "Framework comparison");
    let _ = writeln!(
        out,
        "{:<20}{:>12}{:>12}{:>10}{:>12}",
        "mode", "avg EER %", "pooled %", "targets", "non-targets"
    );
    for m in &report.modes {
        let _ = writeln!(
            out,
            "{:<20}{:>12.2}{:>12.2}{:>10}{:>12}",
            m.mode.as_str(),
            m.average_eer,
            m.pooled.eer_percent,
            m.pooled.n_target,
            m.pooled.n_nontarget
        );
    }
    if !report.ordering.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Ordering checks");
        for c in &report.ordering {
            let _ = writeln!(out, "  [{}] {}", if c.passed { "pass" } else { "FAIL" }, c.description);
        }
    }
    out
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::ManifestParse(format!("{}: {other:?}", path.display())),
    }
}

/// Tidy rows: `mode,emotion,metric,value`.
pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("mode,emotion,metric,value\n");
    if let Some(c) = &report.confusion {
        for g in Gender::ALL {
            let _ = writeln!(out, "gender_id,{g},recall_percent,{:.6}", c.gender_recall(g));
        }
        let _ = writeln!(out, "gender_id,all,accuracy_percent,{:.6}", c.gender_accuracy());
        for (i, e) in c.emotions.iter().enumerate() {
            for g in Gender::ALL {
                let _ = writeln!(out, "emotion_id_{g},{e},recall_percent,{:.6}", c.emotion_recall(g, i));
            }
            let _ = writeln!(out, "emotion_id,{e},recall_percent,{:.6}", c.emotion_recall_pooled(i));
        }
        let _ = writeln!(out, "emotion_id,average,recall_percent,{:.6}", c.emotion_average_pooled());
    }
    for m in &report.modes {
        for (e, r) in &m.per_emotion {
            let _ = writeln!(out, "{},{e},eer_percent,{:.6}", m.mode, r.eer_percent);
            let _ = writeln!(out, "{},{e},threshold,{:.6}", m.mode, r.threshold);
        }
        let _ = writeln!(out, "{},average,eer_percent,{:.6}", m.mode, m.average_eer);
        let _ = writeln!(out, "{},pooled,eer_percent,{:.6}", m.mode, m.pooled.eer_percent);
        let _ = writeln!(out, "{},pooled,threshold,{:.6}", m.mode, m.pooled.threshold);
    }
    for c in &report.ordering {
        let _ = writeln!(out, "ordering,\"{}\",passed,{}", c.description, u8::from(c.passed));
    }
    out
}

pub fn render_det(points: &[(f64, f64)]) -> String {
    let mut out = String::from("far,frr\n");
    for (far, frr) in points {
        let _ = writeln!(out, "{far:.9},{frr:.9}");
    }
    out
}

/// Write `report.txt`, `report.csv` and one `det_<mode>.csv` per framework.
pub fn write_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: String, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    write("report.txt".into(), render_text(report))?;
    write("report.csv".into(), render_csv(report))?;
    for m in &report.modes {
        write(format!("det_{}.csv", m.mode), render_det(&m.det))?;
    }
    Ok(())
}

/// Write trial records; `accept` is taken at each framework's pooled EER
/// threshold.
pub fn write_trials(path: impl AsRef<Path>, trials: &[TrialScore], report: &EvalReport) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRIAL_HEADER).map_err(|e| csv_err(path, e))?;
    for t in trials {
        let threshold = report.mode(t.mode).map_or(f64::NAN, |m| m.pooled.threshold);
        let rec = [
            t.utterance.clone(),
            t.claimed.clone(),
            t.true_speaker.clone(),
            t.gender_true.to_string(),
            t.gender_decided.map(|g| g.to_string()).unwrap_or_default(),
            t.emotion_true.clone(),
            t.emotion_decided.clone().unwrap_or_default(),
            t.mode.to_string(),
            t.lambda.to_string(),
            t.target_term.to_string(),
            t.wrong_emotion_term.to_string(),
            t.wrong_gender_term.to_string(),
            u8::from(t.lambda >= threshold).to_string(),
        ];
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<TrialScore>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_owned).collect();
    if header != TRIAL_HEADER {
        return Err(Error::ManifestParse(format!("{}: unexpected trial header {header:?}", path.display())));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::ManifestParse(format!("{}: bad number {s:?}: {e}", path.display())))
    };
    let opt = |s: &str| (!s.is_empty()).then(|| s.to_owned());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        out.push(TrialScore {
            utterance: rec[0].to_owned(),
            claimed: rec[1].to_owned(),
            true_speaker: rec[2].to_owned(),
            gender_true: rec[3].parse()?,
            gender_decided: opt(&rec[4]).map(|g| g.parse()).transpose()?,
            emotion_true: rec[5].to_owned(),
            emotion_decided: opt(&rec[6]),
            mode: rec[7].parse::<Framework>()?,
            lambda: num(&rec[8])?,
            target_term: num(&rec[9])?,
            wrong_emotion_term: num(&rec[10])?,
            wrong_gender_term: num(&rec[11])?,
        });
    }
    Ok(out)
}

/// Per-utterance stage decisions recovered from three-stage trial rows.
pub fn decisions_from_trials(trials: &[TrialScore]) -> Vec<UtteranceDecision> {
    let mut seen = std::collections::BTreeSet::new();
    trials
        .iter()
        .filter(|t| t.mode == Framework::ThreeStage && seen.insert(t.utterance.clone()))
        .filter_map(|t| {
            Some(UtteranceDecision {
                utterance: t.utterance.clone(),
                gender_true: t.gender_true,
                gender_decided: t.gender_decided?,
                emotion_true: t.emotion_true.clone(),
                emotion_decided: t.emotion_decided.clone()?,
            })
        })
        .collect()
}
