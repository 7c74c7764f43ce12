//! Verb-argument events: extraction from dependency parses, linearization to
//! token sequences, the inverse parse, and the matching used for cloze scoring.
//!
//! An event is a variadic tuple (verb, subject, object, prep pairs*). Any slot
//! but the verb may be empty. Arguments are grammatical head words, kept as
//! surface forms (no lemmatization, no case folding).

use crate::corpus::{EV, NULL_TOK};
use crate::error::{Error, Result};

/// One (preposition, prepositional object) pair attached to a verb.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrepPair {
    pub prep: String,
    pub pobj: String,
}

impl PrepPair {
    pub fn new(prep: impl Into<String>, pobj: impl Into<String>) -> Self {
        PrepPair {
            prep: prep.into(),
            pobj: pobj.into(),
        }
    }
}

/// A verb with its nominal arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub verb: String,
    pub subject: Option<String>,
    pub object: Option<String>,
    /// Ordered by the prepositional object's position in the source sentence.
    pub preps: Vec<PrepPair>,
}

impl Event {
    pub fn new(
        verb: impl Into<String>,
        subject: Option<&str>,
        object: Option<&str>,
        preps: Vec<PrepPair>,
    ) -> Self {
        Event {
            verb: verb.into(),
            subject: subject.map(str::to_owned),
            object: object.map(str::to_owned),
            preps,
        }
    }

    pub fn bare(verb: impl Into<String>) -> Self {
        Event::new(verb, None, None, Vec::new())
    }

    /// Canonical key for counting under exact-match equivalence: prep pairs
    /// are a multiset, so the key sorts them.
    pub fn canonical_key(&self) -> (String, Option<String>, Option<String>, Vec<(String, String)>) {
        let mut preps: Vec<(String, String)> = self
            .preps
            .iter()
            .map(|p| (p.prep.clone(), p.pobj.clone()))
            .collect();
        preps.sort();
        (
            self.verb.clone(),
            self.subject.clone(),
            self.object.clone(),
            preps,
        )
    }
}

/// One token of a dependency-parsed sentence. `head` is 1-based; 0 is the
/// artificial root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedToken {
    pub form: String,
    pub pos: String,
    pub head: usize,
    pub deprel: String,
}

/// A dependency-parsed sentence: the input to event extraction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedSentence {
    pub tokens: Vec<ParsedToken>,
}

impl ParsedSentence {
    /// Check head indices are in range and that head 0 coincides exactly with
    /// the "root" relation.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.head > n {
                return Err(Error::InvalidConfig(format!(
                    "token {} ({:?}): head index {} beyond sentence length {}",
                    i + 1,
                    tok.form,
                    tok.head,
                    n
                )));
            }
            let is_root_rel = tok.deprel == "root";
            if is_root_rel != (tok.head == 0) {
                return Err(Error::InvalidConfig(format!(
                    "token {} ({:?}): relation {:?} with head {} (head 0 must pair with \"root\")",
                    i + 1,
                    tok.form,
                    tok.deprel,
                    tok.head
                )));
            }
        }
        Ok(())
    }

    pub fn forms(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.form.clone()).collect()
    }
}

/// Extract one candidate event per VERB token, ordered by verb position.
///
/// Subject comes from an `nsubj` dependent, object from `dobj` (falling back
/// to `nsubjpass`: the passive subject is the semantic patient). Prepositional
/// pairs come from `prep` dependents that carry a `pobj`, or from collapsed
/// `prep_X` relations on a direct nominal dependent. Verbs with no arguments
/// are still emitted.
pub fn extract_events(sent: &ParsedSentence) -> Vec<Event> {
    let n = sent.tokens.len();
    for tok in &sent.tokens {
        assert!(
            tok.head <= n,
            "extract_events: head index {} beyond sentence length {}",
            tok.head,
            n
        );
    }

    let mut events = Vec::new();
    for (vi, vtok) in sent.tokens.iter().enumerate() {
        if vtok.pos != "VERB" {
            continue;
        }
        let vhead = vi + 1; // 1-based position of this verb
        let mut subject = None;
        let mut object = None;
        let mut passive_subject = None;
        // (pobj position, pair), collected then sorted by position.
        let mut preps: Vec<(usize, PrepPair)> = Vec::new();

        for (di, dtok) in sent.tokens.iter().enumerate() {
            if dtok.head != vhead {
                continue;
            }
            match dtok.deprel.as_str() {
                "nsubj" => {
                    if subject.is_none() {
                        subject = Some(dtok.form.clone());
                    }
                }
                "dobj" => {
                    if object.is_none() {
                        object = Some(dtok.form.clone());
                    }
                }
                "nsubjpass" => {
                    if passive_subject.is_none() {
                        passive_subject = Some(dtok.form.clone());
                    }
                }
                "prep" => {
                    let phead = di + 1;
                    if let Some((pi, ptok)) = sent
                        .tokens
                        .iter()
                        .enumerate()
                        .find(|(_, t)| t.head == phead && t.deprel == "pobj")
                    {
                        preps.push((pi, PrepPair::new(dtok.form.clone(), ptok.form.clone())));
                    }
                    // A preposition with no pobj contributes nothing.
                }
                rel => {
                    if let Some(p) = rel.strip_prefix("prep_") {
                        preps.push((di, PrepPair::new(p, dtok.form.clone())));
                    }
                }
            }
        }

        if object.is_none() {
            object = passive_subject;
        }
        preps.sort_by_key(|(pos, _)| *pos);
        events.push(Event {
            verb: vtok.form.clone(),
            subject,
            object,
            preps: preps.into_iter().map(|(_, p)| p).collect(),
        });
    }
    events
}

/// Serialize events to a flat token sequence:
/// verb, subject-or-<NULL>, object-or-<NULL>, then prep pobj per pair,
/// with <EV> between events.
pub fn linearize_events(events: &[Event]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, ev) in events.iter().enumerate() {
        if i > 0 {
            out.push(EV.to_owned());
        }
        out.push(ev.verb.clone());
        out.push(ev.subject.clone().unwrap_or_else(|| NULL_TOK.to_owned()));
        out.push(ev.object.clone().unwrap_or_else(|| NULL_TOK.to_owned()));
        for p in &ev.preps {
            out.push(p.prep.clone());
            out.push(p.pobj.clone());
        }
    }
    out
}

/// Result of parsing a (possibly model-generated, possibly malformed) event
/// token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedEvents {
    pub events: Vec<Event>,
    /// False when any segment needed repair (null padding or a dropped
    /// dangling preposition).
    pub well_formed: bool,
}

/// Inverse of [`linearize_events`], total on arbitrary token sequences.
///
/// Splits on <EV>, reads verb/subject/object positionally, then (prep, pobj)
/// pairs greedily. Short segments are null-padded and a dangling trailing
/// preposition is dropped; both mark the result as malformed. Segments with
/// no tokens at all yield no event.
pub fn parse_event_tokens<S: AsRef<str>>(tokens: &[S]) -> ParsedEvents {
    let mut events = Vec::new();
    let mut well_formed = true;

    let toks: Vec<&str> = tokens.iter().map(|s| s.as_ref()).collect();
    for segment in toks.split(|t| *t == EV) {
        if segment.is_empty() {
            // An empty segment only exists in malformed streams (leading,
            // trailing, or doubled <EV>), except for the empty input.
            if !toks.is_empty() {
                well_formed = false;
            }
            continue;
        }
        let slot = |i: usize| -> Option<String> {
            match segment.get(i) {
                Some(&t) if t != NULL_TOK => Some(t.to_owned()),
                _ => None,
            }
        };
        let verb = segment[0].to_owned();
        if segment.len() < 3 {
            well_formed = false;
        }
        let subject = slot(1);
        let object = slot(2);
        let mut preps = Vec::new();
        let mut i = 3;
        while i < segment.len() {
            if i + 1 < segment.len() {
                preps.push(PrepPair::new(segment[i], segment[i + 1]));
                i += 2;
            } else {
                // Dangling preposition with no object: drop it.
                well_formed = false;
                i += 1;
            }
        }
        events.push(Event {
            verb,
            subject,
            object,
            preps,
        });
    }
    ParsedEvents {
        events,
        well_formed,
    }
}

/// Exact tuple equality: verbs, subjects, objects equal (null = null) and the
/// prep pairs equal as multisets. Case-sensitive on surface forms.
pub fn event_exact_match(a: &Event, b: &Event) -> bool {
    if a.verb != b.verb || a.subject != b.subject || a.object != b.object {
        return false;
    }
    if a.preps.len() != b.preps.len() {
        return false;
    }
    let mut bs: Vec<&PrepPair> = b.preps.iter().collect();
    for p in &a.preps {
        match bs.iter().position(|q| *q == p) {
            Some(i) => {
                bs.swap_remove(i);
            }
            None => return false,
        }
    }
    true
}

/// Fraction of event components the prediction gets right.
///
/// Slots are verb, subject, object, plus max(|gold preps|, |pred preps|)
/// prep-pair slots, so hallucinated extra pairs are penalized. Pairs are
/// aligned exact-pair first, then by preposition, then by order; an aligned
/// pair scores only if both prep and pobj match.
pub fn partial_credit(pred: &Event, gold: &Event) -> f64 {
    let mut matched = 0usize;
    if pred.verb == gold.verb {
        matched += 1;
    }
    if pred.subject == gold.subject {
        matched += 1;
    }
    if pred.object == gold.object {
        matched += 1;
    }

    let total_preps = gold.preps.len().max(pred.preps.len());
    let mut used = vec![false; pred.preps.len()];
    // A prep slot scores only when both prep and pobj match, so the matched
    // count is the multiset intersection; align exact pairs first so
    // duplicate prepositions cannot steal each other's alignment.
    for g in &gold.preps {
        if let Some(i) = (0..pred.preps.len()).find(|&i| !used[i] && pred.preps[i] == *g) {
            used[i] = true;
            matched += 1;
        }
    }
    // Pairs left over after exact matching cannot score; no further
    // alignment is needed.

    let total = 3 + total_preps;
    matched as f64 / total as f64
}

/// The modal event under exact-match equivalence; ties break to the earliest
/// first occurrence.
pub fn most_common_event(events: &[Event]) -> Result<Event> {
    if events.is_empty() {
        return Err(Error::EmptyInput(
            "most_common_event needs at least one training event".into(),
        ));
    }
    use std::collections::HashMap;
    let mut counts: HashMap<_, (usize, usize)> = HashMap::new();
    for (i, ev) in events.iter().enumerate() {
        let entry = counts.entry(ev.canonical_key()).or_insert((0, i));
        entry.0 += 1;
    }
    let (_, &(_, first)) = counts
        .iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .expect("non-empty");
    Ok(events[first].clone())
}
