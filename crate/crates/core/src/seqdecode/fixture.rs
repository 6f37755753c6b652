//! Text fixtures that stand in for a decoder model.
//!
//! Vocabulary file: UTF-8 lines `id<TAB>token`. Ids must cover `0..n`
//! exactly once. `<s>`/`<bos>` and `</s>`/`<eos>` mark the start and end
//! tokens; `<pad>` and `<unk>` are recognized and never printed. A leading
//! `▁` in a token detokenizes to a space.
//!
//! Logit fixture: UTF-8 lines `sample<TAB>key<TAB>row`, `#` comments and
//! blank lines ignored. `row` is a whitespace-separated dense list of
//! log-probabilities (`-inf` allowed), one per vocabulary id. `key` is
//! either a comma-joined prefix of ids starting with BOS (`0,5,7`), which
//! gives the distribution after exactly that prefix, or `@k`, which gives
//! the distribution for any prefix with `k` generated tokens. Exact prefix
//! rows win over step rows. Samples decode in order of first appearance.

use std::collections::HashMap;
use std::path::Path;

use super::{beam_search, DecodeError, GenerationConfig, Hypothesis, SpecialTokens, StepProvider, TokenId};

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    special: SpecialTokens,
}

fn is_marker(token: &str) -> bool {
    matches!(token, "<s>" | "<bos>" | "</s>" | "<eos>" | "<pad>" | "<unk>")
}

impl Vocabulary {
    pub fn parse(text: &str) -> Result<Self, DecodeError> {
        let mut entries: Vec<(usize, TokenId, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                continue;
            }
            let (id, token) = line.split_once('\t').ok_or_else(|| DecodeError::Vocab {
                line: i + 1,
                reason: "expected `id<TAB>token`".into(),
            })?;
            let id = id.trim().parse::<TokenId>().map_err(|_| DecodeError::Vocab {
                line: i + 1,
                reason: format!("bad id {id:?}"),
            })?;
            entries.push((i + 1, id, token.to_string()));
        }
        let mut tokens: Vec<Option<String>> = vec![None; entries.len()];
        for (line, id, token) in entries {
            match tokens.get_mut(id as usize) {
                Some(slot @ None) => *slot = Some(token),
                Some(Some(_)) => {
                    return Err(DecodeError::Vocab {
                        line,
                        reason: format!("duplicate id {id}"),
                    })
                }
                None => {
                    return Err(DecodeError::Vocab {
                        line,
                        reason: format!("id {id} leaves a gap in 0..{}", tokens.len()),
                    })
                }
            }
        }
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.unwrap_or_default()).collect();
        let find = |names: [&str; 2]| {
            tokens
                .iter()
                .position(|t| names.contains(&t.as_str()))
                .map(|p| p as TokenId)
        };
        let bos = find(["<s>", "<bos>"]).ok_or(DecodeError::Vocab {
            line: 0,
            reason: "no BOS entry (`<s>` or `<bos>`)".into(),
        })?;
        let eos = find(["</s>", "<eos>"]).ok_or(DecodeError::Vocab {
            line: 0,
            reason: "no EOS entry (`</s>` or `<eos>`)".into(),
        })?;
        Ok(Self {
            tokens,
            special: SpecialTokens { bos, eos },
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn special(&self) -> SpecialTokens {
        self.special
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == token).map(|p| p as TokenId)
    }

    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        for &id in ids {
            let Some(token) = self.token(id) else { continue };
            if is_marker(token) {
                continue;
            }
            match token.strip_prefix('▁') {
                Some(rest) => {
                    out.push(' ');
                    out.push_str(rest);
                }
                None => out.push_str(token),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct SampleTable {
    by_prefix: HashMap<Vec<TokenId>, Vec<f64>>,
    by_step: HashMap<usize, Vec<f64>>,
}

/// Parsed logit fixture: per-sample distribution tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogitFixture {
    samples: Vec<(String, SampleTable)>,
}

fn parse_row(text: &str, line: usize) -> Result<Vec<f64>, DecodeError> {
    text.split_whitespace()
        .map(|v| match v {
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => v.parse::<f64>().map_err(|_| DecodeError::Fixture {
                line,
                reason: format!("bad log-probability {v:?}"),
            }),
        })
        .collect()
}

impl LogitFixture {
    /// Parses the fixture and checks every row and prefix against `vocab`.
    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self, DecodeError> {
        let mut samples: Vec<(String, SampleTable)> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.strip_suffix('\r').unwrap_or(raw);
            if content.trim().is_empty() || content.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = content.split('\t').collect();
            if fields.len() != 3 {
                return Err(DecodeError::Fixture {
                    line,
                    reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let row = parse_row(fields[2], line)?;
            if row.len() != vocab.len() {
                return Err(DecodeError::Fixture {
                    line,
                    reason: format!("row has {} entries but the vocabulary has {}", row.len(), vocab.len()),
                });
            }
            let slot = *index.entry(fields[0].to_string()).or_insert_with(|| {
                samples.push((fields[0].to_string(), SampleTable::default()));
                samples.len() - 1
            });
            let table = &mut samples[slot].1;
            let key = fields[1].trim();
            if let Some(step) = key.strip_prefix('@') {
                let step = step.parse::<usize>().map_err(|_| DecodeError::Fixture {
                    line,
                    reason: format!("bad step key {key:?}"),
                })?;
                table.by_step.insert(step, row);
            } else {
                let prefix = key
                    .split(',')
                    .map(|id| {
                        id.trim()
                            .parse::<TokenId>()
                            .ok()
                            .filter(|&id| (id as usize) < vocab.len())
                            .ok_or_else(|| DecodeError::Fixture {
                                line,
                                reason: format!("prefix id {id:?} is not in the vocabulary"),
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if prefix.first() != Some(&vocab.special().bos) {
                    return Err(DecodeError::Fixture {
                        line,
                        reason: "prefix must start with the BOS id".into(),
                    });
                }
                table.by_prefix.insert(prefix, row);
            }
        }
        Ok(Self { samples })
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|(id, _)| id.as_str())
    }

    /// Step provider for one sample.
    pub fn provider(&self, sample: &str) -> Option<SampleProvider<'_>> {
        self.samples
            .iter()
            .find(|(id, _)| id == sample)
            .map(|(id, table)| SampleProvider { sample: id, table })
    }
}

pub struct SampleProvider<'a> {
    sample: &'a str,
    table: &'a SampleTable,
}

impl StepProvider for SampleProvider<'_> {
    fn log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        self.table
            .by_prefix
            .get(prefix)
            .or_else(|| self.table.by_step.get(&prefix.len().saturating_sub(1)))
            .cloned()
            .ok_or_else(|| DecodeError::MissingPrefix {
                sample: self.sample.to_string(),
                prefix: prefix.to_vec(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSample {
    pub sample_id: String,
    pub transcript: String,
    pub best: Hypothesis,
}

pub fn decode_fixture_str(
    fixture_text: &str,
    vocab_text: &str,
    config: &GenerationConfig,
) -> Result<Vec<DecodedSample>, DecodeError> {
    let vocab = Vocabulary::parse(vocab_text)?;
    let fixture = LogitFixture::parse(fixture_text, &vocab)?;
    let special = vocab.special();
    fixture
        .samples
        .iter()
        .map(|(id, table)| {
            let provider = SampleProvider { sample: id, table };
            let best = beam_search(&provider, config, special)?
                .into_iter()
                .next()
                .ok_or(DecodeError::NoHypothesis)?;
            Ok(DecodedSample {
                sample_id: id.clone(),
                transcript: vocab.detokenize(best.content(special.eos)),
                best,
            })
        })
        .collect()
}

pub fn decode_fixture(
    logits_file: &Path,
    vocab_file: &Path,
    config: &GenerationConfig,
) -> Result<Vec<DecodedSample>, DecodeError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| DecodeError::Io(format!("{}: {e}", p.display())));
    decode_fixture_str(&read(logits_file)?, &read(vocab_file)?, config)
}
