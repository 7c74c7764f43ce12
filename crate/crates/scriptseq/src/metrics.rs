//! Corpus BLEU (with and without brevity penalty), unigram precision, and
//! the event-level cloze metrics, plus the two reference baselines.
//!
//! BLEU follows the single-reference corpus conventions: clipped n-gram
//! counts aggregated corpus-wide, geometric mean of the 1..4-gram
//! precisions, no smoothing (any zero precision zeroes the score), and a
//! corpus-level brevity penalty. <S>/</S> markers are stripped before
//! counting; <OOV> is compared literally like any other token.

use std::collections::HashMap;

use crate::corpus::{BOS, EOS};
use crate::error::{Error, Result};
use crate::events::{event_exact_match, partial_credit, Event};

/// The metric bundle emitted by the evaluation commands. Percentages
/// throughout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub bleu: f64,
    pub bleu_bp: f64,
    pub unigram_precision: f64,
    pub accuracy: f64,
    pub partial_credit: f64,
    pub n_pairs: usize,
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl MetricsReport {
    /// The flat key/value document, exactly these keys.
    pub fn render(&self) -> String {
        format!(
            "bleu = {:.6}\nbleu_bp = {:.6}\nunigram_precision = {:.6}\n\
             accuracy = {:.6}\npartial_credit = {:.6}\nn_pairs = {}\n",
            self.bleu,
            self.bleu_bp,
            self.unigram_precision,
            self.accuracy,
            self.partial_credit,
            self.n_pairs
        )
    }
}

fn strip_markers<'a, S: AsRef<str>>(sentence: &'a [S]) -> Vec<&'a str> {
    sentence
        .iter()
        .map(|t| t.as_ref())
        .filter(|t| *t != BOS && *t != EOS)
        .collect()
}

/// Corpus-level modified n-gram precision: per sentence, candidate n-gram
/// counts are clipped to the reference counts, then matches and totals are
/// summed over the corpus. Returns (clipped matches, total candidate
/// n-grams).
pub fn modified_precision<S: AsRef<str>>(
    candidates: &[Vec<S>],
    references: &[Vec<S>],
    n: usize,
) -> (u64, u64) {
    assert_eq!(
        candidates.len(),
        references.len(),
        "modified_precision: {} candidates vs {} references",
        candidates.len(),
        references.len()
    );
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut matches = 0u64;
    let mut total = 0u64;
    for (cand, reference) in candidates.iter().zip(references) {
        let cand = strip_markers(cand);
        let reference = strip_markers(reference);
        if cand.len() < n {
            continue; // contributes (0, 0) at this order
        }
        let mut ref_counts: HashMap<&[&str], u64> = HashMap::new();
        if reference.len() >= n {
            for gram in reference.windows(n) {
                *ref_counts.entry(gram).or_insert(0) += 1;
            }
        }
        let mut cand_counts: HashMap<&[&str], u64> = HashMap::new();
        for gram in cand.windows(n) {
            *cand_counts.entry(gram).or_insert(0) += 1;
        }
        total += (cand.len() - n + 1) as u64;
        for (gram, count) in cand_counts {
            let clip = ref_counts.get(gram).copied().unwrap_or(0);
            matches += count.min(clip);
        }
    }
    (matches, total)
}

/// Corpus brevity penalty: 1 when the candidate corpus is at least as long
/// as the reference corpus, exp(1 - r/c) otherwise, 0 for an empty
/// candidate corpus.
pub fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len == 0 {
        return 0.0;
    }
    if candidate_len >= reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

/// Corpus BLEU over aligned single-reference corpora. Any zero n-gram
/// precision forces bleu and bleu_bp to 0 (no smoothing). The event metrics
/// of the report are left at 0.
pub fn corpus_bleu<S: AsRef<str>>(
    candidates: &[Vec<S>],
    references: &[Vec<S>],
) -> Result<MetricsReport> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("corpus_bleu needs at least one pair".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Misaligned(format!(
            "{} candidates vs {} references",
            candidates.len(),
            references.len()
        )));
    }

    let candidate_len: usize = candidates.iter().map(|s| strip_markers(s).len()).sum();
    let reference_len: usize = references.iter().map(|s| strip_markers(s).len()).sum();

    let mut log_sum = 0.0;
    let mut any_zero = false;
    let mut p1 = 0.0;
    for n in 1..=4 {
        let (matches, total) = modified_precision(candidates, references, n);
        let p = if total == 0 {
            0.0
        } else {
            matches as f64 / total as f64
        };
        if n == 1 {
            p1 = p;
        }
        if p == 0.0 {
            any_zero = true;
        } else {
            log_sum += p.ln();
        }
    }

    let geo = if any_zero { 0.0 } else { (log_sum / 4.0).exp() };
    let bp = brevity_penalty(candidate_len, reference_len);
    Ok(MetricsReport {
        bleu: bp * geo * 100.0,
        bleu_bp: geo * 100.0,
        unigram_precision: p1 * 100.0,
        accuracy: 0.0,
        partial_credit: 0.0,
        n_pairs: candidates.len(),
        candidate_len,
        reference_len,
    })
}

/// Accuracy (exact-match percentage) and partial credit (mean component
/// overlap percentage) of one top prediction per held-out event. A missing
/// prediction scores 0 on both.
pub fn cloze_scores(predicted: &[Option<Event>], gold: &[Event]) -> Result<(f64, f64)> {
    if predicted.len() != gold.len() {
        return Err(Error::Misaligned(format!(
            "{} predictions vs {} gold events",
            predicted.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::EmptyInput("cloze_scores needs at least one pair".into()));
    }
    let mut exact = 0usize;
    let mut credit = 0.0;
    for (pred, gold_ev) in predicted.iter().zip(gold) {
        if let Some(p) = pred {
            if event_exact_match(p, gold_ev) {
                exact += 1;
            }
            credit += partial_credit(p, gold_ev);
        }
    }
    let n = gold.len() as f64;
    Ok((exact as f64 / n * 100.0, credit / n * 100.0))
}

/// The identity baseline: each input sentence is its own predicted
/// successor.
pub fn identity_baseline<S: AsRef<str>>(inputs: &[Vec<S>]) -> Vec<Vec<String>> {
    inputs
        .iter()
        .map(|s| s.iter().map(|t| t.as_ref().to_owned()).collect())
        .collect()
}

pub use crate::events::most_common_event;
