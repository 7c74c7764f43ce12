//! Extract verb-argument events from a dependency-parsed sentence,
//! linearize them to the token scheme, and parse them back.
//!
//! ```bash
//! cargo run -p scriptseq --example extract_events
//! ```

use scriptseq::events::{
    extract_events, linearize_events, parse_event_tokens, ParsedSentence, ParsedToken,
};

fn tok(form: &str, pos: &str, head: usize, deprel: &str) -> ParsedToken {
    ParsedToken {
        form: form.into(),
        pos: pos.into(),
        head,
        deprel: deprel.into(),
    }
}

fn main() {
    // "Napoleon sent the letter to Josephine"
    let sent = ParsedSentence {
        tokens: vec![
            tok("Napoleon", "NOUN", 2, "nsubj"),
            tok("sent", "VERB", 0, "root"),
            tok("the", "DET", 4, "det"),
            tok("letter", "NOUN", 2, "dobj"),
            tok("to", "ADP", 2, "prep"),
            tok("Josephine", "NOUN", 5, "pobj"),
        ],
    };
    let events = extract_events(&sent);
    println!("sentence: {}", sent.forms().join(" "));
    for ev in &events {
        println!(
            "  event: verb={} subject={:?} object={:?} preps={:?}",
            ev.verb, ev.subject, ev.object, ev.preps
        );
    }

    let tokens = linearize_events(&events);
    println!("linearized: {}", tokens.join(" "));
    let back = parse_event_tokens(&tokens);
    println!("round trip ok: {}", back.events == events && back.well_formed);

    // A passive with a collapsed preposition: the passive subject fills the
    // object slot and prep_X contributes a pair.
    let passive = ParsedSentence {
        tokens: vec![
            tok("White", "NOUN", 3, "nsubjpass"),
            tok("was", "AUX", 3, "auxpass"),
            tok("buried", "VERB", 0, "root"),
            tok("Tombstone", "NOUN", 3, "prep_in"),
        ],
    };
    println!("passive: {:?}", extract_events(&passive));

    // Malformed model output is repaired, not rejected.
    let junk = ["sent", "Napoleon", "<NULL>", "to"].map(str::to_owned);
    let repaired = parse_event_tokens(&junk);
    println!(
        "repaired {:?} -> {:?} (well formed: {})",
        junk, repaired.events, repaired.well_formed
    );
}
