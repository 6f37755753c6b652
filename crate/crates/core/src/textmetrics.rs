//! OCR error metrics over Unicode text.
//!
//! Text is NFC-normalized on ingest. The default character unit is the
//! Unicode scalar value, so a Bengali conjunct such as `ক্ষ` counts as three
//! characters (`ক`, `্`, `ষ`). [`CharUnit::Grapheme`] counts extended
//! grapheme clusters instead, for sensitivity checks. Edit costs are uniform.
//! CER 0 means an exact match.

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("ground truth is empty{}", pair_suffix(.pair))]
    EmptyGroundTruth { pair: Option<usize> },
    #[error("corpus has no pairs")]
    EmptyCorpus,
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
}

fn pair_suffix(pair: &Option<usize>) -> String {
    pair.map(|p| format!(" (pair {p})")).unwrap_or_default()
}

/// NFC-normalized text with an opaque identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    text: String,
    pub source_id: String,
}

impl Transcript {
    pub fn new(text: &str, source_id: impl Into<String>) -> Self {
        Self {
            text: text.nfc().collect(),
            source_id: source_id.into(),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn units(&self, unit: CharUnit) -> Vec<&str> {
        match unit {
            CharUnit::ScalarValue => self
                .text
                .char_indices()
                .map(|(i, c)| &self.text[i..i + c.len_utf8()])
                .collect(),
            CharUnit::Grapheme => self.text.graphemes(true).collect(),
        }
    }

    fn words(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }
}

impl From<&str> for Transcript {
    fn from(text: &str) -> Self {
        Transcript::new(text, "")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CharUnit {
    #[default]
    ScalarValue,
    Grapheme,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Summed edit distances over summed reference lengths.
    #[default]
    Micro,
    /// Mean of per-pair rates.
    Macro,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreOptions {
    pub aggregation: Aggregation,
    pub unit: CharUnit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcrScore {
    pub cer: f64,
    pub wer: f64,
    /// Mean character-level edit distance per pair.
    pub levenshtein: f64,
    pub n_pairs: usize,
}

/// Unit-cost edit distance between two sequences, two-row DP.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

pub fn levenshtein(a: &Transcript, b: &Transcript) -> usize {
    levenshtein_in(a, b, CharUnit::ScalarValue)
}

pub fn levenshtein_in(a: &Transcript, b: &Transcript, unit: CharUnit) -> usize {
    edit_distance(&a.units(unit), &b.units(unit))
}

pub fn cer(pred: &Transcript, gt: &Transcript) -> Result<f64, TextError> {
    cer_in(pred, gt, CharUnit::ScalarValue)
}

pub fn cer_in(pred: &Transcript, gt: &Transcript, unit: CharUnit) -> Result<f64, TextError> {
    let reference = gt.units(unit);
    if reference.is_empty() {
        return Err(TextError::EmptyGroundTruth { pair: None });
    }
    Ok(edit_distance(&pred.units(unit), &reference) as f64 / reference.len() as f64)
}

/// Word-level edit distance over whitespace-delimited tokens.
pub fn wer(pred: &Transcript, gt: &Transcript) -> Result<f64, TextError> {
    let reference = gt.words();
    if reference.is_empty() {
        return Err(TextError::EmptyGroundTruth { pair: None });
    }
    Ok(edit_distance(&pred.words(), &reference) as f64 / reference.len() as f64)
}

pub fn score_corpus(pairs: &[(Transcript, Transcript)], opts: ScoreOptions) -> Result<OcrScore, TextError> {
    if pairs.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let (mut char_edits, mut char_refs, mut word_edits, mut word_refs) = (0usize, 0usize, 0usize, 0usize);
    let (mut cer_sum, mut wer_sum) = (0.0, 0.0);
    for (i, (pred, gt)) in pairs.iter().enumerate() {
        let ref_units = gt.units(opts.unit);
        let ref_words = gt.words();
        if ref_units.is_empty() || ref_words.is_empty() {
            return Err(TextError::EmptyGroundTruth { pair: Some(i) });
        }
        let ce = edit_distance(&pred.units(opts.unit), &ref_units);
        let we = edit_distance(&pred.words(), &ref_words);
        char_edits += ce;
        char_refs += ref_units.len();
        word_edits += we;
        word_refs += ref_words.len();
        cer_sum += ce as f64 / ref_units.len() as f64;
        wer_sum += we as f64 / ref_words.len() as f64;
    }
    let n = pairs.len() as f64;
    let (cer, wer) = match opts.aggregation {
        Aggregation::Micro => (
            char_edits as f64 / char_refs as f64,
            word_edits as f64 / word_refs as f64,
        ),
        Aggregation::Macro => (cer_sum / n, wer_sum / n),
    };
    Ok(OcrScore {
        cer,
        wer,
        levenshtein: char_edits as f64 / n,
        n_pairs: pairs.len(),
    })
}

/// One row of an OCR evaluation corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct OcrPair {
    pub image_id: String,
    pub prediction: Transcript,
    pub ground_truth: Transcript,
}

/// Reads `image_id<TAB>prediction<TAB>ground_truth` rows. A first row equal
/// to the column names is treated as a header. Row numbers in errors are
/// 1-based file lines.
pub fn parse_pairs_tsv(text: &str) -> Result<Vec<OcrPair>, TextError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let row = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if i == 0 && fields == ["image_id", "prediction", "ground_truth"] {
            continue;
        }
        if fields.len() != 3 {
            return Err(TextError::MalformedRow {
                row,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields[2].trim().is_empty() {
            return Err(TextError::MalformedRow {
                row,
                reason: "empty ground truth".into(),
            });
        }
        out.push(OcrPair {
            image_id: fields[0].to_string(),
            prediction: Transcript::new(fields[1], fields[0]),
            ground_truth: Transcript::new(fields[2], fields[0]),
        });
    }
    if out.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Transcript {
        Transcript::from(s)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(levenshtein(&t("plate"), &t("plate")), 0);
        assert_eq!(levenshtein(&t("kitten"), &t("sitting")), 3);
        assert_eq!(levenshtein(&t(""), &t("ঢাকা")), 4);
    }

    #[test]
    fn cer_examples() {
        assert_eq!(cer(&t("abc"), &t("abc")).unwrap(), 0.0);
        assert_eq!(cer(&t(""), &t("12345")).unwrap(), 1.0);
        // Ten scalar values, one substituted.
        let gt = t("ঢাকা ১১২৩৪");
        assert_eq!(gt.text().chars().count(), 10);
        let pred = t("ঢাকা ১১২৩৫");
        assert!((cer(&pred, &gt).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(cer(&t("x"), &t("")), Err(TextError::EmptyGroundTruth { pair: None }));
    }

    #[test]
    fn wer_examples() {
        assert_eq!(wer(&t("a b c d"), &t("a b c d")).unwrap(), 0.0);
        assert_eq!(wer(&t("a b x d"), &t("a b c d")).unwrap(), 0.25);
        assert!((wer(&t("a b c d"), &t("a b c")).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(wer(&t("a"), &t("   ")).is_err());
    }

    #[test]
    fn nfc_equivalent_inputs_score_identically() {
        // U+09CB (ো) versus its decomposition U+09C7 U+09BE.
        let composed = t("মেট্রো");
        let decomposed = t("মেট্রে\u{09BE}");
        assert_eq!(composed, decomposed);
        assert_eq!(levenshtein(&composed, &decomposed), 0);
    }

    #[test]
    fn grapheme_mode_counts_clusters() {
        let conj = t("ক্ষ");
        assert_eq!(cer_in(&t(""), &conj, CharUnit::ScalarValue).unwrap(), 1.0);
        assert_eq!(levenshtein_in(&t(""), &conj, CharUnit::ScalarValue), 3);
        assert_eq!(levenshtein_in(&t(""), &conj, CharUnit::Grapheme), 1);
    }

    #[test]
    fn corpus_micro_and_macro() {
        let pairs = vec![(t("ab"), t("ab")), (t("a"), t("abcd"))];
        let micro = score_corpus(&pairs, ScoreOptions::default()).unwrap();
        assert!((micro.cer - 3.0 / 6.0).abs() < 1e-12);
        assert_eq!(micro.levenshtein, 1.5);
        let macro_ = score_corpus(
            &pairs,
            ScoreOptions {
                aggregation: Aggregation::Macro,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((macro_.cer - 0.375).abs() < 1e-12);
        assert_eq!(score_corpus(&[], ScoreOptions::default()), Err(TextError::EmptyCorpus));
    }

    #[test]
    fn duplicated_corpus_keeps_micro_scores() {
        let pairs = vec![(t("ঢাকা মেট্রো"), t("ঢাকা মেট্রো গ")), (t("১১ ২২"), t("১১ ২৩"))];
        let doubled: Vec<_> = pairs.iter().chain(pairs.iter()).cloned().collect();
        let a = score_corpus(&pairs, ScoreOptions::default()).unwrap();
        let b = score_corpus(&doubled, ScoreOptions::default()).unwrap();
        assert_eq!((a.cer, a.wer, a.levenshtein), (b.cer, b.wer, b.levenshtein));
    }

    #[test]
    fn tsv_rows() {
        let text = "image_id\tprediction\tground_truth\na\tঢাকা\tঢাকা\nb\t\tগ\n";
        let rows = parse_pairs_tsv(text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].prediction.text(), "");
        assert_eq!(
            parse_pairs_tsv("a\tb\n"),
            Err(TextError::MalformedRow {
                row: 1,
                reason: "expected 3 tab-separated fields, found 2".into()
            })
        );
        assert_eq!(parse_pairs_tsv(""), Err(TextError::EmptyCorpus));
    }
}
