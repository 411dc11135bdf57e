mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bnlp::crf::{self, CrfModel, CrfTrainConfig, EvalReport, EvalScheme};
use bnlp::embed::{self, EmbedMode, EmbedTrainConfig, EmbeddingModel};
use bnlp::subword::{self, SubwordVocab};
use bnlp::text::corpus_stats_from_bytes;
use bnlp::{basic_tokenize, sentence_tokenize, Error, Result};

use config::SubwordSettings;

#[derive(Parser, Debug)]
#[command(name = "bnlp", version, about = "Bengali text processing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split text into tokens, sentences or subword pieces.
    Tokenize(TokenizeArgs),
    /// Train a unigram subword vocabulary.
    SubwordTrain(SubwordTrainArgs),
    /// Train skip-gram word embeddings.
    EmbedTrain(EmbedTrainArgs),
    /// Print the nearest neighbours of a word.
    EmbedQuery(EmbedQueryArgs),
    /// Train a CRF tagger from `token<TAB>label` data.
    CrfTrain(CrfTrainArgs),
    /// Tag text with a trained CRF model.
    CrfTag(CrfTagArgs),
    /// Score a CRF model on labeled data.
    CrfEval(CrfEvalArgs),
    /// Count documents, sentences and tokens of a corpus.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TokenizeMethod {
    Basic,
    Sentence,
    Subword,
}

#[derive(Args, Debug)]
struct TokenizeArgs {
    #[arg(long, value_enum, default_value = "basic")]
    method: TokenizeMethod,
    /// Subword vocabulary (required by `--method subword`).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Text to tokenize; stdin is read when absent.
    #[arg(long)]
    text: Option<String>,
}

#[derive(Args, Debug)]
struct SubwordTrainArgs {
    /// One sentence per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    seed_size: Option<usize>,
    #[arg(long)]
    shrink_factor: Option<f64>,
    #[arg(long)]
    max_piece_len: Option<usize>,
    #[arg(long)]
    em_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct EmbedTrainArgs {
    /// One sentence per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    min_n: Option<usize>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    buckets: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct EmbedQueryArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = 10)]
    topk: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Task {
    Pos,
    Ner,
}

impl Task {
    fn scheme(self) -> EvalScheme {
        match self {
            Task::Pos => EvalScheme::TokenAll,
            Task::Ner => EvalScheme::TokenNonO,
        }
    }
}

#[derive(Args, Debug)]
struct CrfTrainArgs {
    #[arg(long, value_enum)]
    task: Task,
    #[arg(long)]
    train: PathBuf,
    /// Held-out data scored after training.
    #[arg(long, conflicts_with = "split")]
    test: Option<PathBuf>,
    /// Train on this fraction of `--train` and score the rest.
    #[arg(long)]
    split: Option<f64>,
    /// Shuffle seed for `--split`.
    #[arg(long, default_value_t = 1, requires = "split")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    history: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Comma-separated feature templates.
    #[arg(long)]
    templates: Option<String>,
}

#[derive(Args, Debug)]
struct CrfTagArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, conflicts_with = "stdin")]
    text: Option<String>,
    /// Read text from stdin (the default when `--text` is absent).
    #[arg(long)]
    stdin: bool,
}

#[derive(Args, Debug)]
struct CrfEvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "token-all")]
    scheme: String,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    String::from_utf8(bytes).map_err(|e| Error::Utf8 {
        offset: e.utf8_error().valid_up_to(),
    })
}

fn read_input(text: Option<String>) -> Result<String> {
    if let Some(t) = text {
        return Ok(t);
    }
    let mut bytes = Vec::new();
    io::stdin().read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| Error::Utf8 {
        offset: e.utf8_error().valid_up_to(),
    })
}

/// `token/LABEL`, with `\` and `/` inside the token backslash-escaped.
fn tagged_pair(token: &str, label: &str) -> String {
    let mut out = String::with_capacity(token.len() + label.len() + 1);
    for c in token.chars() {
        if c == '\\' || c == '/' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('/');
    out.push_str(label);
    out
}

fn format_report(r: &EvalReport) -> String {
    format!("{:.2}\t{:.2}\t{:.2}\n", r.precision, r.recall, r.f1)
}

fn tokenize(args: TokenizeArgs) -> Result<String> {
    let vocab = match (args.method, &args.model) {
        (TokenizeMethod::Subword, Some(path)) => Some(SubwordVocab::load(path)?),
        (TokenizeMethod::Subword, None) => {
            return Err(Error::Usage("--method subword needs --model".into()))
        }
        _ => None,
    };
    let input = read_input(args.text)?;
    let mut out = String::new();
    for line in input.lines() {
        match args.method {
            TokenizeMethod::Basic => {
                out.push_str(&basic_tokenize(line).join(" "));
                out.push('\n');
            }
            TokenizeMethod::Sentence => {
                for s in sentence_tokenize(line) {
                    out.push_str(&s);
                    out.push('\n');
                }
            }
            TokenizeMethod::Subword => {
                let pieces = vocab.as_ref().expect("loaded above").encode(line);
                out.push_str(&pieces.join(" "));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn subword_train(args: SubwordTrainArgs) -> Result<String> {
    let mut settings = SubwordSettings::default();
    if let Some(path) = &args.config {
        for (k, v) in config::read_pairs(path)? {
            settings.set(&k, &v)?;
        }
    }
    settings.overlay(SubwordSettings {
        vocab_size: args.vocab_size,
        seed_size: args.seed_size,
        shrink_factor: args.shrink_factor,
        max_piece_len: args.max_piece_len,
        em_iters: args.em_iters,
    });
    let cfg = settings.build()?;
    let text = read_text(&args.input)?;
    let vocab = subword::train_unigram(text.lines(), &cfg)?;
    vocab.save(&args.out)?;
    log::info!("wrote {} pieces to {}", vocab.len(), args.out.display());
    Ok(String::new())
}

fn embed_train(args: EmbedTrainArgs) -> Result<String> {
    let mut cfg = EmbedTrainConfig::default();
    if let Some(path) = &args.config {
        for (k, v) in config::read_pairs(path)? {
            config::set_embed(&mut cfg, &k, &v)?;
        }
    }
    if let Some(mode) = &args.mode {
        cfg.mode = mode.parse::<EmbedMode>()?;
    }
    macro_rules! flag {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { cfg.$field = v; })*
        };
    }
    flag!(dim, window, min_count, lr, epochs, negatives, min_n, max_n, buckets, seed, threads);
    if args.max_steps.is_some() {
        cfg.max_steps = args.max_steps;
    }
    let text = read_text(&args.input)?;
    let corpus: Vec<Vec<String>> = text
        .lines()
        .map(basic_tokenize)
        .filter(|s| !s.is_empty())
        .collect();
    let model = embed::train_skipgram(&corpus, &cfg)?;
    model.save(&args.out)?;
    log::info!("wrote {} vectors to {}", model.vocab().len(), args.out.display());
    Ok(String::new())
}

fn embed_query(args: EmbedQueryArgs) -> Result<String> {
    let model = EmbeddingModel::load(&args.model)?;
    let mut out = String::new();
    for (word, sim) in model.most_similar(&bnlp::nfc(&args.word), args.topk)? {
        writeln!(out, "{word}\t{sim:.6}").expect("write to string");
    }
    Ok(out)
}

fn crf_train(args: CrfTrainArgs) -> Result<String> {
    let mut cfg = CrfTrainConfig::default();
    if let Some(path) = &args.config {
        for (k, v) in config::read_pairs(path)? {
            config::set_crf(&mut cfg, &k, &v)?;
        }
    }
    macro_rules! flag {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { cfg.$field = v; })*
        };
    }
    flag!(l2, max_iters, history, tolerance);
    if let Some(t) = &args.templates {
        cfg.templates = t.parse()?;
    }
    cfg.validate()?;

    let data = crf::load_tsv(&args.train)?;
    let (train, test) = match (args.split, &args.test) {
        (Some(ratio), _) => {
            let (a, b) = crf::split_train_test(&data, ratio, args.seed)?;
            (a, Some(b))
        }
        (None, Some(path)) => (data, Some(crf::load_tsv(path)?)),
        (None, None) => (data, None),
    };
    let model = crf::train_crf(&train, &cfg)?;
    let report = match &test {
        Some(test) if !test.is_empty() => Some(crf::evaluate(&model, test, args.task.scheme())?),
        _ => None,
    };
    model.save(&args.out)?;
    Ok(report.map(|r| format_report(&r)).unwrap_or_default())
}

fn crf_tag(args: CrfTagArgs) -> Result<String> {
    let model = CrfModel::load(&args.model)?;
    let input = read_input(args.text)?;
    let mut out = String::new();
    for line in input.lines() {
        let tokens = basic_tokenize(line);
        if !tokens.is_empty() {
            let tagged = crf::tag(&model, &tokens)?;
            let pairs: Vec<String> = tagged
                .tokens
                .iter()
                .zip(&tagged.labels)
                .map(|(t, l)| tagged_pair(t, l))
                .collect();
            out.push_str(&pairs.join(" "));
        }
        out.push('\n');
    }
    Ok(out)
}

fn crf_eval(args: CrfEvalArgs) -> Result<String> {
    let scheme: EvalScheme = args.scheme.parse()?;
    let model = CrfModel::load(&args.model)?;
    let test = crf::load_tsv(&args.test)?;
    Ok(format_report(&crf::evaluate(&model, &test, scheme)?))
}

fn stats(args: StatsArgs) -> Result<String> {
    let s = corpus_stats_from_bytes(&std::fs::read(&args.input)?)?;
    Ok(format!(
        "documents\t{}\nsentences\t{}\ntokens\t{}\n",
        s.documents, s.sentences, s.tokens
    ))
}

fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::Tokenize(a) => tokenize(a),
        Command::SubwordTrain(a) => subword_train(a),
        Command::EmbedTrain(a) => embed_train(a),
        Command::EmbedQuery(a) => embed_query(a),
        Command::CrfTrain(a) => crf_train(a),
        Command::CrfTag(a) => crf_tag(a),
        Command::CrfEval(a) => crf_eval(a),
        Command::Stats(a) => stats(a),
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 for
/// usage errors, 2 for data or model errors. Output is buffered so nothing
/// reaches stdout unless the command succeeds.
fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("bnlp: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(run(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_tag_separator() {
        assert_eq!(tagged_pair("ক", "NN"), "ক/NN");
        assert_eq!(tagged_pair("a/b", "X"), "a\\/b/X");
        assert_eq!(tagged_pair("a\\", "X"), "a\\\\/X");
    }

    #[test]
    fn parse_errors_are_usage() {
        assert_eq!(run(["bnlp", "no-such-command"]), 1);
        assert_eq!(run(["bnlp", "crf-eval", "--model", "m"]), 1);
    }

    #[test]
    fn report_format() {
        let gold = vec![crf::LabeledSequence::new(vec!["a".into()], vec!["X".into()]).unwrap()];
        let r = crf::evaluate_predictions(&gold, &[vec!["X".into()]], EvalScheme::TokenAll).unwrap();
        assert_eq!(format_report(&r), "100.00\t100.00\t100.00\n");
    }
}
