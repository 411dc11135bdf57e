use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::features::{extract_features, FeatureTemplateSet};
use super::inference::ChainPotentials;
use super::LabeledSequence;

const HEADER_PREFIX: &str = "#crf v1 ";

/// Linear-chain CRF parameters.
///
/// Weights are laid out as an emission block of `features × labels`
/// (`feature * L + label`) followed by an `L × L` transition block
/// (`F * L + prev * L + next`).
#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
    templates: FeatureTemplateSet,
    features: Vec<String>,
    feature_index: HashMap<String, usize>,
    weights: Vec<f64>,
}

fn check_field(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.contains(['\t', '\n', '\r']) {
        return Err(Error::Format(format!(
            "{kind} {s:?} is empty or contains a tab or newline"
        )));
    }
    Ok(())
}

impl CrfModel {
    pub fn new(
        labels: Vec<String>,
        templates: FeatureTemplateSet,
        features: Vec<String>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Format("a model needs at least one label".into()));
        }
        let mut label_index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            check_field("label", l)?;
            if label_index.insert(l.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate label `{l}`")));
            }
        }
        let mut feature_index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            check_field("feature", f)?;
            if feature_index.insert(f.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate feature `{f}`")));
            }
        }
        let expected = features.len() * labels.len() + labels.len() * labels.len();
        if weights.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(CrfModel {
            labels,
            label_index,
            templates,
            features,
            feature_index,
            weights,
        })
    }

    /// A model with every weight zero.
    pub fn zeros(labels: Vec<String>, templates: FeatureTemplateSet, features: Vec<String>) -> Result<Self> {
        let n = features.len() * labels.len() + labels.len() * labels.len();
        Self::new(labels, templates, features, vec![0.0; n])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn templates(&self) -> &FeatureTemplateSet {
        &self.templates
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn feature_id(&self, feature: &str) -> Option<usize> {
        self.feature_index.get(feature).copied()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::Usage(format!(
                "expected {} weights, got {}",
                self.weights.len(),
                weights.len()
            )));
        }
        self.weights = weights;
        Ok(())
    }

    pub fn emission_index(&self, feature: usize, label: usize) -> usize {
        feature * self.labels.len() + label
    }

    pub fn transition_index(&self, prev: usize, next: usize) -> usize {
        let l = self.labels.len();
        self.features.len() * l + prev * l + next
    }

    /// Known feature ids firing at each position; unseen features are
    /// dropped.
    pub fn observe<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Vec<usize>>> {
        (0..tokens.len())
            .map(|pos| {
                Ok(extract_features(tokens, pos, &self.templates)?
                    .iter()
                    .filter_map(|f| self.feature_id(f))
                    .collect())
            })
            .collect()
    }

    pub fn label_ids<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.label_id(l.as_ref())
                    .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))
            })
            .collect()
    }

    pub(crate) fn potentials_with(&self, weights: &[f64], observations: &[Vec<usize>]) -> ChainPotentials {
        let l = self.labels.len();
        let mut emissions = vec![0.0; observations.len() * l];
        for (t, feats) in observations.iter().enumerate() {
            let row = &mut emissions[t * l..(t + 1) * l];
            for &f in feats {
                for (y, e) in row.iter_mut().enumerate() {
                    *e += weights[f * l + y];
                }
            }
        }
        let start = self.features.len() * l;
        ChainPotentials {
            num_labels: l,
            emissions,
            transitions: weights[start..start + l * l].to_vec(),
        }
    }

    pub fn potentials<S: AsRef<str>>(&self, tokens: &[S]) -> Result<ChainPotentials> {
        Ok(self.potentials_with(&self.weights, &self.observe(tokens)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{HEADER_PREFIX}labels={} features={} templates={}",
            self.labels.len(),
            self.features.len(),
            self.templates
        )?;
        for label in &self.labels {
            writeln!(w, "{label}")?;
        }
        for (i, feature) in self.features.iter().enumerate() {
            writeln!(w, "{feature}\t{i}")?;
        }
        for x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let fields = line
            .trim_end_matches('\n')
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| Error::Format(format!("bad CRF header {line:?}")))?
            .to_string();
        let mut n_labels = None;
        let mut n_features = None;
        let mut templates = None;
        for field in fields.split(' ') {
            match field.split_once('=') {
                Some(("labels", v)) => n_labels = v.parse::<usize>().ok(),
                Some(("features", v)) => n_features = v.parse::<usize>().ok(),
                Some(("templates", v)) => templates = Some(v.parse::<FeatureTemplateSet>()?),
                _ => return Err(Error::Format(format!("bad header field {field:?}"))),
            }
        }
        let (n_labels, n_features, templates) = match (n_labels, n_features, templates) {
            (Some(l), Some(f), Some(t)) => (l, f, t),
            _ => return Err(Error::Format("incomplete CRF header".into())),
        };

        let mut next_line = |what: &str| -> Result<String> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Format(format!("file ends inside the {what} list")));
            }
            Ok(line.trim_end_matches('\n').to_string())
        };
        let mut labels = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            labels.push(next_line("label")?);
        }
        let mut features = Vec::with_capacity(n_features);
        for i in 0..n_features {
            let entry = next_line("feature")?;
            let (feature, index) = entry
                .rsplit_once('\t')
                .ok_or_else(|| Error::Format(format!("feature line {entry:?} lacks an index")))?;
            if index.parse::<usize>().ok() != Some(i) {
                return Err(Error::Format(format!(
                    "feature {feature:?} has index {index}, expected {i}"
                )));
            }
            features.push(feature.to_string());
        }
        let n_weights = n_features * n_labels + n_labels * n_labels;
        let mut bytes = vec![0u8; n_weights * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format("truncated weight block".into()))?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        let weights = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        Self::new(labels, templates, features, weights)
    }
}

/// Unnormalized log-score of `labels` for `tokens`.
pub fn sequence_score<S: AsRef<str>, L: AsRef<str>>(
    model: &CrfModel,
    tokens: &[S],
    labels: &[L],
) -> Result<f64> {
    if tokens.len() != labels.len() {
        return Err(Error::Usage(format!(
            "{} tokens but {} labels",
            tokens.len(),
            labels.len()
        )));
    }
    let ids = model.label_ids(labels)?;
    Ok(model.potentials(tokens)?.score(&ids))
}

fn require_tokens<S>(tokens: &[S]) -> Result<()> {
    if tokens.is_empty() {
        Err(Error::Usage("empty token sequence".into()))
    } else {
        Ok(())
    }
}

pub fn log_partition<S: AsRef<str>>(model: &CrfModel, tokens: &[S]) -> Result<f64> {
    require_tokens(tokens)?;
    Ok(model.potentials(tokens)?.log_partition())
}

/// Best labeling and its score.
pub fn viterbi<S: AsRef<str>>(model: &CrfModel, tokens: &[S]) -> Result<(Vec<String>, f64)> {
    require_tokens(tokens)?;
    let (path, score) = model.potentials(tokens)?.viterbi();
    Ok((path.into_iter().map(|y| model.labels[y].clone()).collect(), score))
}

/// Per-position label marginals, one row of `num_labels` per token.
pub fn marginals<S: AsRef<str>>(model: &CrfModel, tokens: &[S]) -> Result<Vec<Vec<f64>>> {
    require_tokens(tokens)?;
    let l = model.num_labels();
    Ok(model
        .potentials(tokens)?
        .marginals()
        .chunks(l)
        .map(<[f64]>::to_vec)
        .collect())
}

pub fn tag<S: AsRef<str>>(model: &CrfModel, tokens: &[S]) -> Result<LabeledSequence> {
    let (labels, _) = viterbi(model, tokens)?;
    Ok(LabeledSequence {
        tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> CrfModel {
        let labels = vec!["A".to_string(), "B".to_string()];
        let features = vec!["w=x".to_string(), "bias".to_string()];
        // emissions: w=x → A +2; bias → B +0.5; transitions A→B = 1.
        let weights = vec![2.0, 0.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.0];
        CrfModel::new(labels, FeatureTemplateSet::default(), features, weights).unwrap()
    }

    #[test]
    fn constructor_validates() {
        let t = FeatureTemplateSet::default();
        assert!(CrfModel::new(vec![], t.clone(), vec![], vec![]).is_err());
        assert!(CrfModel::new(vec!["A".into(), "A".into()], t.clone(), vec![], vec![0.0; 4]).is_err());
        assert!(CrfModel::new(vec!["A".into()], t.clone(), vec!["f".into()], vec![0.0; 3]).is_err());
        assert!(CrfModel::new(vec!["A".into()], t, vec!["f".into()], vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn zero_weights_score_zero() {
        let m = CrfModel::zeros(
            vec!["A".into(), "B".into(), "C".into()],
            FeatureTemplateSet::default(),
            vec!["w=x".into()],
        )
        .unwrap();
        let tokens = ["x", "y", "x"];
        for labels in [["A", "B", "C"], ["C", "C", "C"]] {
            assert_eq!(sequence_score(&m, &tokens, &labels).unwrap(), 0.0);
        }
        assert!((log_partition(&m, &tokens).unwrap() - 3.0 * 3f64.ln()).abs() < 1e-12);
        assert_eq!(viterbi(&m, &tokens).unwrap().0, ["A", "A", "A"]);
    }

    #[test]
    fn score_sums_emissions_and_transitions() {
        let m = toy_model();
        // Single position: emission only.
        assert_eq!(sequence_score(&m, &["x"], &["A"]).unwrap(), 2.0);
        assert_eq!(sequence_score(&m, &["x"], &["B"]).unwrap(), 0.5);
        // A→B transition adds 1.
        assert_eq!(sequence_score(&m, &["x", "z"], &["A", "B"]).unwrap(), 2.0 + 0.5 + 1.0);
        assert!(matches!(
            sequence_score(&m, &["x"], &["Q"]),
            Err(Error::UnknownLabel(l)) if l == "Q"
        ));
        assert!(sequence_score(&m, &["x"], &["A", "B"]).unwrap_err().is_usage());
    }

    #[test]
    fn viterbi_single_position_and_tag() {
        let m = toy_model();
        assert_eq!(viterbi(&m, &["x"]).unwrap(), (vec!["A".to_string()], 2.0));
        let tagged = tag(&m, &["x", "x", "q"]).unwrap();
        assert_eq!(tagged.tokens, ["x", "x", "q"]);
        let (_, score) = viterbi(&m, &["x", "x", "q"]).unwrap();
        assert_eq!(sequence_score(&m, &tagged.tokens, &tagged.labels).unwrap(), score);
        assert!(tag::<&str>(&m, &[]).unwrap_err().is_usage());
        assert!(log_partition::<&str>(&m, &[]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let m = toy_model();
        let mut a = Vec::new();
        m.write(&mut a).unwrap();
        let loaded = CrfModel::read(&a[..]).unwrap();
        assert_eq!(loaded, m);
        let mut b = Vec::new();
        loaded.write(&mut b).unwrap();
        assert_eq!(a, b);
        assert!(CrfModel::read(&a[..a.len() - 3]).is_err());
        let mut extra = a.clone();
        extra.push(0);
        assert!(CrfModel::read(&extra[..]).is_err());
    }
}
