use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::text::is_bengali_digit;
use crate::tokenize::is_splitting_punctuation;

/// One observation feature template. Each emits zero or more feature
/// strings for a token position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Template {
    /// Always-on feature; learns per-label priors.
    Bias,
    Word,
    LowerWord,
    Prefix(usize),
    Suffix(usize),
    HasDigit,
    IsPunctuation,
    PrevWord,
    NextWord,
    /// `BOS` at the first position, `EOS` at the last.
    Boundary,
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Template::Bias => f.write_str("bias"),
            Template::Word => f.write_str("w"),
            Template::LowerWord => f.write_str("lw"),
            Template::Prefix(n) => write!(f, "pre{n}"),
            Template::Suffix(n) => write!(f, "suf{n}"),
            Template::HasDigit => f.write_str("digit"),
            Template::IsPunctuation => f.write_str("punct"),
            Template::PrevWord => f.write_str("prev_w"),
            Template::NextWord => f.write_str("next_w"),
            Template::Boundary => f.write_str("bounds"),
        }
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let affix_len = |rest: &str| -> Result<usize> {
            match rest.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Config(format!("bad affix length in template `{s}`"))),
            }
        };
        Ok(match s {
            "bias" => Template::Bias,
            "w" => Template::Word,
            "lw" => Template::LowerWord,
            "digit" => Template::HasDigit,
            "punct" => Template::IsPunctuation,
            "prev_w" => Template::PrevWord,
            "next_w" => Template::NextWord,
            "bounds" => Template::Boundary,
            _ => {
                if let Some(rest) = s.strip_prefix("pre") {
                    Template::Prefix(affix_len(rest)?)
                } else if let Some(rest) = s.strip_prefix("suf") {
                    Template::Suffix(affix_len(rest)?)
                } else {
                    return Err(Error::Config(format!("unknown feature template `{s}`")));
                }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureTemplateSet {
    templates: Vec<Template>,
}

impl Default for FeatureTemplateSet {
    fn default() -> Self {
        use Template::*;
        FeatureTemplateSet {
            templates: vec![
                Bias,
                Word,
                LowerWord,
                Prefix(1),
                Prefix(2),
                Prefix(3),
                Suffix(1),
                Suffix(2),
                Suffix(3),
                HasDigit,
                IsPunctuation,
                PrevWord,
                NextWord,
                Boundary,
            ],
        }
    }
}

impl FeatureTemplateSet {
    pub fn new(templates: Vec<Template>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Config("empty feature template set".into()));
        }
        Ok(FeatureTemplateSet { templates })
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }
}

impl fmt::Display for FeatureTemplateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.templates.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for FeatureTemplateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureTemplateSet::new(
            s.split(',')
                .map(|t| t.trim().parse())
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

fn is_digit(c: char) -> bool {
    c.is_ascii_digit() || is_bengali_digit(c)
}

fn is_punctuation(c: char) -> bool {
    is_splitting_punctuation(c) || c.is_ascii_punctuation()
}

/// Feature strings for position `pos` of `tokens`.
pub fn extract_features<S: AsRef<str>>(
    tokens: &[S],
    pos: usize,
    templates: &FeatureTemplateSet,
) -> Result<Vec<String>> {
    if pos >= tokens.len() {
        return Err(Error::Usage(format!(
            "position {pos} out of range for {} tokens",
            tokens.len()
        )));
    }
    let word = tokens[pos].as_ref();
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::with_capacity(templates.templates.len() + 1);
    for template in &templates.templates {
        match *template {
            Template::Bias => out.push("bias".to_string()),
            Template::Word => out.push(format!("w={word}")),
            Template::LowerWord => out.push(format!("lw={}", word.to_lowercase())),
            Template::Prefix(n) if chars.len() >= n => {
                out.push(format!("pre{n}={}", chars[..n].iter().collect::<String>()))
            }
            Template::Suffix(n) if chars.len() >= n => out.push(format!(
                "suf{n}={}",
                chars[chars.len() - n..].iter().collect::<String>()
            )),
            Template::Prefix(_) | Template::Suffix(_) => {}
            Template::HasDigit => {
                if chars.iter().copied().any(is_digit) {
                    out.push("has_digit".into());
                }
            }
            Template::IsPunctuation => {
                if !chars.is_empty() && chars.iter().copied().all(is_punctuation) {
                    out.push("is_punct".into());
                }
            }
            Template::PrevWord => {
                if pos > 0 {
                    out.push(format!("prev_w={}", tokens[pos - 1].as_ref()));
                }
            }
            Template::NextWord => {
                if pos + 1 < tokens.len() {
                    out.push(format!("next_w={}", tokens[pos + 1].as_ref()));
                }
            }
            Template::Boundary => {
                if pos == 0 {
                    out.push("BOS".into());
                }
                if pos + 1 == tokens.len() {
                    out.push("EOS".into());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(tokens: &[&str], pos: usize) -> Vec<String> {
        extract_features(tokens, pos, &FeatureTemplateSet::default()).unwrap()
    }

    #[test]
    fn single_token_sentence() {
        let f = feats(&["ভাত"], 0);
        for expected in ["w=ভাত", "BOS", "EOS", "bias", "suf1=ত", "pre3=ভাত"] {
            assert!(f.contains(&expected.to_string()), "{expected} missing from {f:?}");
        }
        assert!(!f.iter().any(|x| x.starts_with("prev_w=") || x.starts_with("next_w=")));
    }

    #[test]
    fn neighbours_and_boundaries() {
        let f = feats(&["ক", "খ"], 0);
        assert!(f.contains(&"next_w=খ".to_string()));
        assert!(f.contains(&"BOS".to_string()));
        assert!(!f.contains(&"EOS".to_string()));
        assert!(!f.iter().any(|x| x.starts_with("prev_w=")));
        let f = feats(&["ক", "খ"], 1);
        assert!(f.contains(&"prev_w=ক".to_string()));
        assert!(f.contains(&"EOS".to_string()));
        // Affixes longer than the word are not emitted.
        assert!(!f.iter().any(|x| x.starts_with("pre2=")));
    }

    #[test]
    fn shape_flags() {
        assert!(feats(&["১২৩"], 0).contains(&"has_digit".to_string()));
        assert!(feats(&["a1"], 0).contains(&"has_digit".to_string()));
        assert!(!feats(&["ভাত"], 0).contains(&"has_digit".to_string()));
        assert!(feats(&["।"], 0).contains(&"is_punct".to_string()));
        assert!(!feats(&["ভাত।"], 0).contains(&"is_punct".to_string()));
        assert!(feats(&["Dhaka"], 0).contains(&"lw=dhaka".to_string()));
    }

    #[test]
    fn out_of_range_is_usage_error() {
        let err = extract_features(&["ক"], 1, &FeatureTemplateSet::default()).unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn template_set_text_round_trip() {
        let set = FeatureTemplateSet::default();
        let text = set.to_string();
        assert_eq!(text.parse::<FeatureTemplateSet>().unwrap(), set);
        assert!("w,pre0".parse::<FeatureTemplateSet>().is_err());
        assert!("w,shape".parse::<FeatureTemplateSet>().is_err());
        assert!("".parse::<FeatureTemplateSet>().is_err());
    }
}
