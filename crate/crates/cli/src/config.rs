//! `key = value` config files. Values from a file override the library
//! defaults; command-line flags override both.

use std::path::Path;
use std::str::FromStr;

use bnlp::crf::{CrfTrainConfig, FeatureTemplateSet};
use bnlp::embed::{EmbedMode, EmbedTrainConfig};
use bnlp::subword::SubwordTrainConfig;
use bnlp::{Error, Result};

/// Parses a config file into `(key, value)` pairs in file order. Keys are
/// normalized to dashed form, so `vocab_size` and `vocab-size` agree.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    parse_pairs(&text, path)
}

pub fn parse_pairs(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected `key = value`", path.display(), i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!(
                "{}:{}: empty key or value",
                path.display(),
                i + 1
            )));
        }
        out.push((key, value.to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown config key `{key}`"))
}

/// Subword settings; `seed-size` follows `vocab-size` unless set.
#[derive(Debug, Default)]
pub struct SubwordSettings {
    pub vocab_size: Option<usize>,
    pub seed_size: Option<usize>,
    pub shrink_factor: Option<f64>,
    pub max_piece_len: Option<usize>,
    pub em_iters: Option<usize>,
}

impl SubwordSettings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "vocab-size" => self.vocab_size = Some(parse(key, value)?),
            "seed-size" => self.seed_size = Some(parse(key, value)?),
            "shrink-factor" => self.shrink_factor = Some(parse(key, value)?),
            "max-piece-len" => self.max_piece_len = Some(parse(key, value)?),
            "em-iters" => self.em_iters = Some(parse(key, value)?),
            _ => return Err(unknown(key)),
        }
        Ok(())
    }

    /// Fields set in `other` win.
    pub fn overlay(&mut self, other: SubwordSettings) {
        self.vocab_size = other.vocab_size.or(self.vocab_size);
        self.seed_size = other.seed_size.or(self.seed_size);
        self.shrink_factor = other.shrink_factor.or(self.shrink_factor);
        self.max_piece_len = other.max_piece_len.or(self.max_piece_len);
        self.em_iters = other.em_iters.or(self.em_iters);
    }

    pub fn build(&self) -> Result<SubwordTrainConfig> {
        let mut cfg = match self.vocab_size {
            Some(n) => SubwordTrainConfig::with_vocab_size(n),
            None => SubwordTrainConfig::default(),
        };
        if let Some(v) = self.seed_size {
            cfg.seed_size = v;
        }
        if let Some(v) = self.shrink_factor {
            cfg.shrink_factor = v;
        }
        if let Some(v) = self.max_piece_len {
            cfg.max_piece_len = v;
        }
        if let Some(v) = self.em_iters {
            cfg.em_iters_per_round = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn set_embed(cfg: &mut EmbedTrainConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "mode" => cfg.mode = parse::<EmbedMode>(key, value)?,
        "dim" => cfg.dim = parse(key, value)?,
        "window" => cfg.window = parse(key, value)?,
        "min-count" => cfg.min_count = parse(key, value)?,
        "lr" => cfg.lr = parse(key, value)?,
        "epochs" => cfg.epochs = parse(key, value)?,
        "max-steps" => cfg.max_steps = Some(parse(key, value)?),
        "negatives" => cfg.negatives = parse(key, value)?,
        "min-n" => cfg.min_n = parse(key, value)?,
        "max-n" => cfg.max_n = parse(key, value)?,
        "buckets" => cfg.buckets = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "threads" => cfg.threads = parse(key, value)?,
        _ => return Err(unknown(key)),
    }
    Ok(())
}

pub fn set_crf(cfg: &mut CrfTrainConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "l2" => cfg.l2 = parse(key, value)?,
        "max-iters" => cfg.max_iters = parse(key, value)?,
        "history" => cfg.history = parse(key, value)?,
        "tolerance" => cfg.tolerance = parse(key, value)?,
        "templates" => cfg.templates = value.parse::<FeatureTemplateSet>()?,
        _ => return Err(unknown(key)),
    }
    Ok(())
}
