use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::model::{viterbi, CrfModel};
use super::LabeledSequence;

/// Label treated as "outside any entity" by [`EvalScheme::TokenNonO`].
const OUTSIDE: &str = "O";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalScheme {
    /// Every token counts; precision = recall = accuracy.
    TokenAll,
    /// Only non-`O` labels form the positive class.
    TokenNonO,
}

impl fmt::Display for EvalScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalScheme::TokenAll => "token-all",
            EvalScheme::TokenNonO => "token-nonO",
        })
    }
}

impl FromStr for EvalScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token-all" => Ok(EvalScheme::TokenAll),
            "token-nonO" => Ok(EvalScheme::TokenNonO),
            _ => Err(Error::Config(format!(
                "unknown scheme `{s}` (expected token-all or token-nonO)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LabelScore {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LabelScore {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let pct = |num: u64, den: u64| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = pct(tp, tp + fp);
        let recall = pct(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        LabelScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Micro-averaged scores (percentages) plus a per-label breakdown.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub scheme: EvalScheme,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub per_label: BTreeMap<String, LabelScore>,
}

/// Scores `predicted` label sequences against `gold`.
pub fn evaluate_predictions(
    gold: &[LabeledSequence],
    predicted: &[Vec<String>],
    scheme: EvalScheme,
) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::Usage("empty test set".into()));
    }
    if gold.len() != predicted.len() {
        return Err(Error::Usage(format!(
            "{} gold sequences but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let positive = |l: &str| scheme == EvalScheme::TokenAll || l != OUTSIDE;
    let mut counts: BTreeMap<String, (u64, u64, u64)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(predicted) {
        if g.labels.len() != p.len() {
            return Err(Error::Usage(format!(
                "sequence of {} tokens has {} predicted labels",
                g.labels.len(),
                p.len()
            )));
        }
        for (gl, pl) in g.labels.iter().zip(p) {
            if gl == pl {
                if positive(gl) {
                    counts.entry(gl.clone()).or_default().0 += 1;
                }
                continue;
            }
            if positive(pl) {
                counts.entry(pl.clone()).or_default().1 += 1;
            }
            if positive(gl) {
                counts.entry(gl.clone()).or_default().2 += 1;
            }
        }
    }
    let (tp, fp, fn_) = counts
        .values()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let micro = LabelScore::from_counts(tp, fp, fn_);
    Ok(EvalReport {
        scheme,
        precision: micro.precision,
        recall: micro.recall,
        f1: micro.f1,
        tp,
        fp,
        fn_,
        per_label: counts
            .into_iter()
            .map(|(l, (tp, fp, fn_))| (l, LabelScore::from_counts(tp, fp, fn_)))
            .collect(),
    })
}

/// Tags every test sequence with `model` and scores the result. Gold
/// labels the model has never seen are counted as misses.
pub fn evaluate(model: &CrfModel, test: &[LabeledSequence], scheme: EvalScheme) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Usage("empty test set".into()));
    }
    let mut unknown = std::collections::BTreeSet::new();
    for seq in test {
        for l in &seq.labels {
            if model.label_id(l).is_none() {
                unknown.insert(l.as_str());
            }
        }
    }
    if !unknown.is_empty() {
        log::warn!(
            "gold labels unknown to the model are counted as misses: {}",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        );
    }
    let predicted = test
        .iter()
        .map(|seq| Ok(viterbi(model, &seq.tokens)?.0))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(test, &predicted, scheme)
}
