//! Property tests for the serialization laws and metric bounds.

use proptest::prelude::*;

use scriptseq::corpus::{Vocabulary, BOS_ID, EOS_ID};
use scriptseq::events::{
    event_exact_match, linearize_events, parse_event_tokens, partial_credit, Event, PrepPair,
};
use scriptseq::metrics::cloze_scores;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}"
}

fn event() -> impl Strategy<Value = Event> {
    (
        word(),
        proptest::option::of(word()),
        proptest::option::of(word()),
        proptest::collection::vec((word(), word()), 0..3),
    )
        .prop_map(|(verb, subject, object, preps)| Event {
            verb,
            subject,
            object,
            preps: preps
                .into_iter()
                .map(|(prep, pobj)| PrepPair { prep, pobj })
                .collect(),
        })
}

proptest! {
    #[test]
    fn parse_inverts_linearize(events in proptest::collection::vec(event(), 0..5)) {
        let parsed = parse_event_tokens(&linearize_events(&events));
        prop_assert!(parsed.well_formed);
        prop_assert_eq!(parsed.events, events);
    }

    #[test]
    fn partial_credit_is_bounded_and_reflexive(a in event(), b in event()) {
        let score = partial_credit(&a, &b);
        prop_assert!((0.0..=1.0).contains(&score));
        prop_assert_eq!(partial_credit(&a, &a.clone()), 1.0);
    }

    #[test]
    fn exact_match_implies_full_credit(a in event()) {
        let mut b = a.clone();
        b.preps.reverse();
        prop_assert!(event_exact_match(&a, &b));
        prop_assert_eq!(partial_credit(&a, &b), 1.0);
        prop_assert_eq!(partial_credit(&b, &a), 1.0);
    }

    #[test]
    fn parse_never_panics_on_garbage(tokens in proptest::collection::vec(
        prop_oneof!["[a-z]{1,4}", Just("<EV>".to_owned()), Just("<NULL>".to_owned())],
        0..12,
    )) {
        // Model output is untrusted; the parser must stay total.
        let parsed = parse_event_tokens(&tokens);
        for ev in &parsed.events {
            prop_assert!(!ev.verb.is_empty());
        }
    }

    #[test]
    fn accuracy_never_exceeds_partial_credit(
        gold in proptest::collection::vec(event(), 1..6),
        preds in proptest::collection::vec(proptest::option::of(event()), 1..6),
    ) {
        // Align the prediction list to the gold list by truncation/padding.
        let mut preds = preds;
        preds.resize(gold.len(), None);
        let (accuracy, partial) = cloze_scores(&preds, &gold).unwrap();
        prop_assert!(accuracy <= partial + 1e-12);
        prop_assert!((0.0..=100.0).contains(&accuracy));
        prop_assert!((0.0..=100.0).contains(&partial));
    }

    #[test]
    fn encoded_sentences_are_framed(tokens in proptest::collection::vec("[a-z]{1,5}", 0..8)) {
        let vocab = Vocabulary::from_sentences(std::iter::once(&tokens), 100);
        let ids = vocab.encode_sentence(&tokens);
        prop_assert_eq!(ids.len(), tokens.len() + 2);
        prop_assert_eq!(ids[0], BOS_ID);
        prop_assert_eq!(*ids.last().unwrap(), EOS_ID);
        let decoded = vocab.decode(&ids[1..ids.len() - 1]);
        prop_assert_eq!(decoded, tokens);
    }
}
