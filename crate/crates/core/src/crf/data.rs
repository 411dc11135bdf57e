use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::text::nfc;

use super::LabeledSequence;

/// Reads `token<TAB>label` lines. A blank line ends a sentence; a line
/// starting with `#` and holding no tab is a comment.
pub fn load_tsv(path: impl AsRef<Path>) -> Result<Vec<LabeledSequence>> {
    let path = path.as_ref();
    parse_tsv(BufReader::new(File::open(path)?), path)
}

/// As [`load_tsv`], reading from `r`; `path` only labels errors.
pub fn parse_tsv<R: BufRead>(mut r: R, path: impl AsRef<Path>) -> Result<Vec<LabeledSequence>> {
    let path = path.as_ref();
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if r.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|_| parse_err(line_no, "invalid UTF-8".into()))?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                out.push(LabeledSequence {
                    tokens: std::mem::take(&mut tokens),
                    labels: std::mem::take(&mut labels),
                });
            }
            continue;
        }
        if line.starts_with('#') && !line.contains('\t') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[..] {
            [token, label] if !token.trim().is_empty() && !label.trim().is_empty() => {
                tokens.push(nfc(token.trim()));
                labels.push(nfc(label.trim()));
            }
            [_, _] => return Err(parse_err(line_no, "empty token or label".into())),
            _ => {
                return Err(parse_err(
                    line_no,
                    format!("expected token<TAB>label, found {} field(s)", fields.len()),
                ))
            }
        }
    }
    if !tokens.is_empty() {
        out.push(LabeledSequence { tokens, labels });
    }
    Ok(out)
}

pub fn write_tsv<W: Write>(w: &mut W, data: &[LabeledSequence]) -> Result<()> {
    for seq in data {
        for (t, l) in seq.tokens.iter().zip(&seq.labels) {
            writeln!(w, "{t}\t{l}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Seeded shuffle, then the first `floor(ratio · n)` items train.
pub fn split_train_test<T: Clone>(data: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Usage(format!("split ratio {ratio} is not in (0, 1)")));
    }
    if data.len() < 2 {
        return Err(Error::Training(format!(
            "cannot split {} item(s) into train and test",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * data.len() as f64).floor() as usize;
    let pick = |ids: &[usize]| ids.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<LabeledSequence>> {
        parse_tsv(text.as_bytes(), "mem.tsv")
    }

    #[test]
    fn empty_input() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n# only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn single_token_sentence() {
        let data = parse("ক\tNN\n\n").unwrap();
        assert_eq!(data, vec![LabeledSequence::new(vec!["ক".into()], vec!["NN".into()]).unwrap()]);
    }

    #[test]
    fn sentences_and_comments() {
        let data = parse("# header\nআমি\tPRP\nভাত\tNN\n\n\nখাই\tVM\n#\tSYM").unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0].tokens, ["আমি", "ভাত"]);
        assert_eq!(data[1].tokens, ["খাই", "#"]);
        assert_eq!(data[1].labels, ["VM", "SYM"]);
    }

    #[test]
    fn normalizes_to_nfc() {
        let data = parse("\u{09C7}\u{09BE}\tX\n").unwrap();
        assert_eq!(data[0].tokens[0], "\u{09CB}");
    }

    #[test]
    fn malformed_lines_name_the_line() {
        for (text, line) in [("ক\tNN\nখ\tNN\tX\n", 2), ("ক\n", 1), ("\n\nক\t\n", 3)] {
            match parse(text).unwrap_err() {
                Error::Parse { line: l, path, .. } => {
                    assert_eq!(l, line);
                    assert_eq!(path, Path::new("mem.tsv"));
                }
                e => panic!("unexpected {e}"),
            }
        }
        let err = parse_tsv(&b"\xff\tNN\n"[..], "x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn write_then_parse() {
        let data = parse("ক\tNN\nখ\tVM\n\nগ\tJJ\n").unwrap();
        let mut buf = Vec::new();
        write_tsv(&mut buf, &data).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), data);
    }

    #[test]
    fn split_sizes() {
        let items: Vec<usize> = (0..2997).collect();
        let (train, test) = split_train_test(&items, 0.75, 1).unwrap();
        assert_eq!((train.len(), test.len()), (2247, 750));
        let (train, test) = split_train_test(&items[..4], 0.75, 1).unwrap();
        assert_eq!((train.len(), test.len()), (3, 1));
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let items: Vec<usize> = (0..100).collect();
        let a = split_train_test(&items, 0.75, 9).unwrap();
        assert_eq!(a, split_train_test(&items, 0.75, 9).unwrap());
        assert_ne!(a, split_train_test(&items, 0.75, 10).unwrap());
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
    }

    #[test]
    fn split_errors() {
        assert!(split_train_test(&[1], 0.5, 0).is_err());
        assert!(split_train_test::<u8>(&[], 0.5, 0).is_err());
        for ratio in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(split_train_test(&[1, 2, 3], ratio, 0).unwrap_err().is_usage());
        }
    }
}
