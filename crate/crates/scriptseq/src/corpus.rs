//! Vocabulary construction, token/id encoding, corpus readers, and
//! (context, successor) pair generation.
//!
//! File formats:
//! - Tokenized corpus: UTF-8, one sentence per line, tokens separated by
//!   single spaces, documents separated by one blank line.
//! - Parsed corpus: TSV, one token per line with columns
//!   index, form, POS, head, deprel; blank line between sentences; a line
//!   `#doc` between documents.
//! - Vocabulary file: one token per line; 0-based line number = id - 5
//!   (the five specials are implicit).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::{extract_events, linearize_events, Event, ParsedSentence, ParsedToken};

/// Dense token id. Specials occupy 0..=4.
pub type TokenId = u32;

pub const OOV: &str = "<OOV>";
pub const BOS: &str = "<S>";
pub const EOS: &str = "</S>";
pub const NULL_TOK: &str = "<NULL>";
pub const EV: &str = "<EV>";

pub const OOV_ID: TokenId = 0;
pub const BOS_ID: TokenId = 1;
pub const EOS_ID: TokenId = 2;
pub const NULL_ID: TokenId = 3;
pub const EV_ID: TokenId = 4;

pub const SPECIALS: [&str; 5] = [OOV, BOS, EOS, NULL_TOK, EV];

/// Bijection between surface tokens and dense ids, with the five specials at
/// fixed ids 0..=4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Vocabulary containing only the specials.
    pub fn empty() -> Self {
        let tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Build from the `k` most frequent tokens of the given sentences.
    /// Frequency ties break lexicographically; special forms never count.
    pub fn from_sentences<'a, I>(sentences: I, k: usize) -> Self
    where
        I: IntoIterator<Item = &'a Vec<String>>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for sent in sentences {
            for tok in sent {
                if SPECIALS.contains(&tok.as_str()) {
                    continue;
                }
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(k);

        let mut vocab = Vocabulary::empty();
        for (tok, _) in ranked {
            vocab.push(tok);
        }
        vocab
    }

    fn push(&mut self, token: &str) {
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // specials are always present
    }

    /// Id for a token, falling back to <OOV> for unknown tokens.
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// <S> + mapped ids (unknowns to <OOV>) + </S>.
    pub fn encode_sentence<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS_ID);
        ids.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        ids.push(EOS_ID);
        ids
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.token(id).to_owned()).collect()
    }

    /// Rebuild a vocabulary from its non-special tokens in id order, as
    /// stored in vocabulary files and model files.
    pub fn from_listed_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocabulary::empty();
        for tok in tokens {
            let tok = tok.as_ref();
            if SPECIALS.contains(&tok) {
                return Err(Error::InvalidConfig(format!(
                    "special token {tok:?} listed as a regular vocabulary entry"
                )));
            }
            if vocab.contains(tok) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate vocabulary entry {tok:?}"
                )));
            }
            vocab.push(tok);
        }
        Ok(vocab)
    }

    /// All tokens after the specials, in id order.
    pub fn listed_tokens(&self) -> &[String] {
        &self.tokens[SPECIALS.len()..]
    }

    /// Non-special tokens, one per line, in id order.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut body = String::new();
        for tok in &self.tokens[SPECIALS.len()..] {
            body.push_str(tok);
            body.push('\n');
        }
        crate::fsutil::write_atomic(path, body.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vocab = Vocabulary::empty();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                return Err(Error::line(path, lineno + 1, "empty vocabulary line"));
            }
            if SPECIALS.contains(&line) {
                return Err(Error::line(
                    path,
                    lineno + 1,
                    format!("special token {line:?} may not appear in a vocabulary file"),
                ));
            }
            if vocab.contains(line) {
                return Err(Error::line(
                    path,
                    lineno + 1,
                    format!("duplicate vocabulary entry {line:?}"),
                ));
            }
            vocab.push(line);
        }
        Ok(vocab)
    }
}

/// A document: ordered sentences, optionally with their dependency parses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub sentences: Vec<Vec<String>>,
    /// Parallel to `sentences` when the document came from a parsed corpus.
    pub parses: Option<Vec<ParsedSentence>>,
}

/// A (context, successor) training or evaluation pair. In event
/// representation the token fields hold linearized event tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    /// The context sentences, oldest first (1, 3, or 5; fewer near a
    /// document start).
    pub context: Vec<Vec<String>>,
    pub successor: Vec<String>,
    /// Events of the successor sentence when a parse was available.
    pub successor_events: Vec<Event>,
}

impl SentencePair {
    /// Encoder input: each context sentence wrapped in its own <S>/</S>
    /// markers so the encoder can detect sentence boundaries.
    pub fn encode_context(&self, vocab: &Vocabulary) -> Vec<TokenId> {
        let mut ids = Vec::new();
        for sent in &self.context {
            ids.extend(vocab.encode_sentence(sent));
        }
        ids
    }

    pub fn encode_successor(&self, vocab: &Vocabulary) -> Vec<TokenId> {
        vocab.encode_sentence(&self.successor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Tokens,
    Events,
}

/// Generate (context, successor) pairs per document: every sentence with at
/// least one predecessor becomes a successor; the context is the previous
/// `n_context` sentences, front-truncated near the document start. Pairs
/// never cross document boundaries.
///
/// In event representation both sides are linearized events and pairs where
/// either side has no extracted events are skipped.
pub fn sentence_pairs(
    docs: &[Document],
    n_context: usize,
    repr: Representation,
) -> Vec<SentencePair> {
    assert!(n_context >= 1, "n_context must be at least 1");
    let mut pairs = Vec::new();
    for doc in docs {
        match repr {
            Representation::Tokens => {
                for i in 1..doc.sentences.len() {
                    let start = i.saturating_sub(n_context);
                    let successor_events = doc
                        .parses
                        .as_ref()
                        .map(|p| extract_events(&p[i]))
                        .unwrap_or_default();
                    pairs.push(SentencePair {
                        context: doc.sentences[start..i].to_vec(),
                        successor: doc.sentences[i].clone(),
                        successor_events,
                    });
                }
            }
            Representation::Events => {
                let parses = match &doc.parses {
                    Some(p) => p,
                    None => continue, // event pairs require parses
                };
                let events: Vec<Vec<Event>> =
                    parses.iter().map(extract_events).collect();
                for i in 1..doc.sentences.len() {
                    let start = i.saturating_sub(n_context);
                    let context_event_count: usize =
                        (start..i).map(|j| events[j].len()).sum();
                    if context_event_count == 0 || events[i].is_empty() {
                        continue;
                    }
                    pairs.push(SentencePair {
                        context: (start..i).map(|j| linearize_events(&events[j])).collect(),
                        successor: linearize_events(&events[i]),
                        successor_events: events[i].clone(),
                    });
                }
            }
        }
    }
    pairs
}

/// Pairs for running (or evaluating) the chained event-to-text pipeline:
/// the context is the previous sentences' linearized events, the successor
/// is the raw token text. Pairs whose context has no events are skipped
/// (the pipeline has nothing to encode); the successor keeps its text
/// either way.
pub fn chained_pairs(docs: &[Document], n_context: usize) -> Vec<SentencePair> {
    assert!(n_context >= 1, "n_context must be at least 1");
    let mut pairs = Vec::new();
    for doc in docs {
        let parses = match &doc.parses {
            Some(p) => p,
            None => continue,
        };
        let events: Vec<Vec<Event>> = parses.iter().map(extract_events).collect();
        for i in 1..doc.sentences.len() {
            let start = i.saturating_sub(n_context);
            if (start..i).map(|j| events[j].len()).sum::<usize>() == 0 {
                continue;
            }
            pairs.push(SentencePair {
                context: (start..i).map(|j| linearize_events(&events[j])).collect(),
                successor: doc.sentences[i].clone(),
                successor_events: events[i].clone(),
            });
        }
    }
    pairs
}

/// (linearized events of s, tokens of s) for every successor sentence with
/// at least one event: training data for the event-to-text expansion stage
/// of the chained system.
pub fn expansion_pairs(docs: &[Document]) -> Vec<SentencePair> {
    let mut out = Vec::new();
    for doc in docs {
        let parses = match &doc.parses {
            Some(p) => p,
            None => continue,
        };
        for i in 1..doc.sentences.len() {
            let events = extract_events(&parses[i]);
            if events.is_empty() {
                continue;
            }
            out.push(SentencePair {
                context: vec![linearize_events(&events)],
                successor: doc.sentences[i].clone(),
                successor_events: events,
            });
        }
    }
    out
}

/// Read a line-aligned sentence file (predictions, references): one
/// sentence per line, blank lines meaning empty sentences. Unlike corpus
/// files, blank lines here do NOT separate documents.
pub fn read_sentence_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|line| {
            if line.is_empty() {
                Vec::new()
            } else {
                line.split(' ').map(str::to_owned).collect()
            }
        })
        .collect())
}

/// Read a tokenized corpus: one sentence per line, blank line between
/// documents.
pub fn read_tokenized_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut current = Document::default();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.sentences.is_empty() {
                docs.push(std::mem::take(&mut current));
            }
            continue;
        }
        current
            .sentences
            .push(line.split(' ').map(str::to_owned).collect());
    }
    if !current.sentences.is_empty() {
        docs.push(current);
    }
    Ok(docs)
}

/// Render documents back to the tokenized format.
pub fn render_tokenized_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for (d, doc) in docs.iter().enumerate() {
        if d > 0 {
            out.push('\n');
        }
        for sent in &doc.sentences {
            out.push_str(&sent.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn write_tokenized_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    crate::fsutil::write_atomic(path, render_tokenized_corpus(docs).as_bytes())
}

/// Read a parsed corpus (TSV described in the module docs). Head indices are
/// validated against sentence length and the root relation.
pub fn read_parsed_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs: Vec<Document> = Vec::new();
    let mut doc_sentences: Vec<Vec<String>> = Vec::new();
    let mut doc_parses: Vec<ParsedSentence> = Vec::new();
    let mut sent = ParsedSentence::default();
    let mut sent_start_line = 0usize;

    fn flush_sentence(
        path: &Path,
        sent: &mut ParsedSentence,
        start_line: usize,
        sentences: &mut Vec<Vec<String>>,
        parses: &mut Vec<ParsedSentence>,
    ) -> Result<()> {
        if sent.tokens.is_empty() {
            return Ok(());
        }
        let full = std::mem::take(sent);
        full.validate()
            .map_err(|e| Error::line(path, start_line, e.to_string()))?;
        sentences.push(full.forms());
        parses.push(full);
        Ok(())
    }

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() || line == "#doc" {
            flush_sentence(
                path,
                &mut sent,
                sent_start_line,
                &mut doc_sentences,
                &mut doc_parses,
            )?;
            if line == "#doc" && !doc_sentences.is_empty() {
                docs.push(Document {
                    sentences: std::mem::take(&mut doc_sentences),
                    parses: Some(std::mem::take(&mut doc_parses)),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::line(
                path,
                lineno,
                format!("expected 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| Error::line(path, lineno, format!("bad token index {:?}", fields[0])))?;
        let head: usize = fields[3]
            .parse()
            .map_err(|_| Error::line(path, lineno, format!("bad head index {:?}", fields[3])))?;
        if sent.tokens.is_empty() {
            sent_start_line = lineno;
        }
        if index != sent.tokens.len() + 1 {
            return Err(Error::line(
                path,
                lineno,
                format!(
                    "token index {} out of order (expected {})",
                    index,
                    sent.tokens.len() + 1
                ),
            ));
        }
        sent.tokens.push(ParsedToken {
            form: fields[1].to_owned(),
            pos: fields[2].to_owned(),
            head,
            deprel: fields[4].to_owned(),
        });
    }
    flush_sentence(
        path,
        &mut sent,
        sent_start_line,
        &mut doc_sentences,
        &mut doc_parses,
    )?;
    if !doc_sentences.is_empty() {
        docs.push(Document {
            sentences: doc_sentences,
            parses: Some(doc_parses),
        });
    }
    Ok(docs)
}

/// Render parsed documents back to the TSV format.
pub fn render_parsed_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for (d, doc) in docs.iter().enumerate() {
        if d > 0 {
            out.push_str("#doc\n");
        }
        let parses = doc.parses.as_ref().expect("parsed document");
        for (s, parse) in parses.iter().enumerate() {
            if s > 0 {
                out.push('\n');
            }
            for (i, tok) in parse.tokens.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    i + 1,
                    tok.form,
                    tok.pos,
                    tok.head,
                    tok.deprel
                ));
            }
        }
    }
    out
}

/// Convenience wrapper: build a vocabulary straight from a tokenized corpus
/// file.
pub fn build_vocab(path: &Path, k: usize) -> Result<Vocabulary> {
    let docs = read_tokenized_corpus(path)?;
    Ok(Vocabulary::from_sentences(
        docs.iter().flat_map(|d| d.sentences.iter()),
        k,
    ))
}
