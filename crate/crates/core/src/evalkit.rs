//! ROC analysis of score tables. Members are the positive class.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::{Method, Polarity, ScoreRecord, Variant};
use crate::dumpio::Label;
use crate::error::{Error, Result};

pub const DEFAULT_FPR_CAP: f64 = 0.05;

/// One operating point. Samples whose oriented score is at most the
/// oriented `threshold` are flagged as members.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    /// In the units of the raw score; infinite for the all-negative point.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Step ROC curve from `(0, 0)` to `(1, 1)`, one point per distinct score.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
    members: usize,
    nonmembers: usize,
}

/// Maps a raw score so that lower always means member.
pub fn orient(score: f64, polarity: Polarity) -> f64 {
    match polarity {
        Polarity::LowerIsMember => score,
        Polarity::HigherIsMember => -score,
    }
}

/// Builds the ROC of `(score, label)` pairs under `polarity`. Equal scores
/// cross the threshold together.
pub fn roc_curve(scored: &[(f64, Label)], polarity: Polarity) -> Result<RocCurve> {
    if let Some((s, _)) = scored.iter().find(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidInput(format!("score {s} is not a number")));
    }
    let members = scored.iter().filter(|(_, l)| l.is_member()).count();
    let nonmembers = scored.len() - members;
    if members == 0 || nonmembers == 0 {
        return Err(Error::DegenerateLabels {
            members,
            nonmembers,
        });
    }
    let mut oriented: Vec<(f64, bool)> = scored
        .iter()
        .map(|&(s, l)| (orient(s, polarity), l.is_member()))
        .collect();
    oriented.sort_by(|a, b| a.0.total_cmp(&b.0));

    let raw = |t: f64| orient(t, polarity);
    let mut points = vec![RocPoint {
        threshold: raw(f64::NEG_INFINITY),
        fpr: 0.0,
        tpr: 0.0,
        true_positives: 0,
        false_positives: 0,
    }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < oriented.len() {
        let value = oriented[i].0;
        while i < oriented.len() && oriented[i].0 == value {
            if oriented[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: raw(value),
            fpr: fp as f64 / nonmembers as f64,
            tpr: tp as f64 / members as f64,
            true_positives: tp,
            false_positives: fp,
        });
    }
    Ok(RocCurve {
        points,
        members,
        nonmembers,
    })
}

impl RocCurve {
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn nonmembers(&self) -> usize {
        self.nonmembers
    }

    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        let twice: usize = self
            .points
            .windows(2)
            .map(|w| (w[1].false_positives - w[0].false_positives) * (w[1].true_positives + w[0].true_positives))
            .sum();
        // exact in integers until the final division
        twice as f64 / (2 * self.members * self.nonmembers) as f64
    }

    /// `max 1 - (FPR + 1 - TPR) / 2` over the curve.
    pub fn best_accuracy(&self) -> f64 {
        self.points
            .iter()
            .map(|p| 1.0 - (p.fpr + (1.0 - p.tpr)) / 2.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest TPR among points with `fpr ≤ cap`; no interpolation.
    pub fn tpr_at_fpr(&self, cap: f64) -> Result<f64> {
        if !(cap > 0.0 && cap < 1.0) {
            return Err(Error::InvalidParam(format!("FPR cap must lie in (0, 1), got {cap}")));
        }
        Ok(self
            .points
            .iter()
            .filter(|p| p.false_positives as f64 <= cap * self.nonmembers as f64)
            .map(|p| p.tpr)
            .fold(0.0, f64::max))
    }
}

/// The threshold rule: member iff the score is strictly on the member side
/// of `tau`. A score equal to `tau` is a nonmember.
pub fn classify(score: f64, tau: f64, polarity: Polarity) -> Label {
    let member = match polarity {
        Polarity::LowerIsMember => score < tau,
        Polarity::HigherIsMember => score > tau,
    };
    if member {
        Label::Member
    } else {
        Label::Nonmember
    }
}

/// Metrics of one method/variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub variant: String,
    pub polarity: Polarity,
    pub auc: f64,
    pub best_accuracy: f64,
    /// Keyed by the cap as written, e.g. `"0.05"`.
    pub tpr_at_fpr: BTreeMap<String, f64>,
    pub members: usize,
    pub nonmembers: usize,
}

impl EvalReport {
    pub fn tpr_at(&self, cap: f64) -> Option<f64> {
        self.tpr_at_fpr.get(&cap.to_string()).copied()
    }
}

/// Evaluation of one method/variant: the summary and its curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub method: Method,
    pub variant: Variant,
    pub report: EvalReport,
    pub curve: RocCurve,
}

pub fn evaluate_scores(
    method: Method,
    variant: Variant,
    scored: &[(f64, Label)],
    fpr_caps: &[f64],
) -> Result<Evaluation> {
    let polarity = method.polarity();
    let curve = roc_curve(scored, polarity)?;
    let tpr_at_fpr = fpr_caps
        .iter()
        .map(|&cap| Ok((cap.to_string(), curve.tpr_at_fpr(cap)?)))
        .collect::<Result<_>>()?;
    let report = EvalReport {
        method: method.to_string(),
        variant: variant.to_string(),
        polarity,
        auc: curve.auc(),
        best_accuracy: curve.best_accuracy(),
        tpr_at_fpr,
        members: curve.members(),
        nonmembers: curve.nonmembers(),
    };
    Ok(Evaluation {
        method,
        variant,
        report,
        curve,
    })
}

/// Groups records by method and variant, in order of first appearance.
pub fn evaluate_records(records: &[ScoreRecord], fpr_caps: &[f64]) -> Result<Vec<Evaluation>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut groups: Vec<(Method, Variant, Vec<(f64, Label)>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(m, v, _)| *m == r.method && *v == r.variant) {
            Some(g) => g.2.push((r.score, r.label)),
            None => groups.push((r.method, r.variant, vec![(r.score, r.label)])),
        }
    }
    groups
        .into_iter()
        .map(|(m, v, scored)| evaluate_scores(m, v, &scored, fpr_caps))
        .collect()
}

/// Reports as a pretty JSON array with a trailing newline.
pub fn write_report_json(path: &Path, evaluations: &[Evaluation]) -> Result<()> {
    let reports: Vec<&EvalReport> = evaluations.iter().map(|e| &e.report).collect();
    let mut text = serde_json::to_string_pretty(&reports).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<Vec<EvalReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct RocRow<'a> {
    method: &'a str,
    variant: &'a str,
    threshold: f64,
    fpr: f64,
    tpr: f64,
}

/// Every curve point as `method,variant,threshold,fpr,tpr`.
pub fn write_roc_csv(path: &Path, evaluations: &[Evaluation]) -> Result<()> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for e in evaluations {
        for p in e.curve.points() {
            w.serialize(RocRow {
                method: &e.report.method,
                variant: &e.report.variant,
                threshold: p.threshold,
                fpr: p.fpr,
                tpr: p.tpr,
            })
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
