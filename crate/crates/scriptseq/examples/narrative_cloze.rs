//! Score next-event predictions with the cloze metrics, and run both
//! reference baselines.
//!
//! ```bash
//! cargo run -p scriptseq --example narrative_cloze
//! ```

use scriptseq::events::{Event, PrepPair};
use scriptseq::metrics::{cloze_scores, corpus_bleu, identity_baseline, most_common_event};

fn main() {
    let gold = vec![
        Event::new("sent", Some("Napoleon"), Some("letter"), vec![PrepPair::new("to", "Josephine")]),
        Event::new("chased", Some("dog"), Some("cat"), vec![]),
        Event::bare("rained"),
    ];
    let predictions = vec![
        // Right verb and subject, object missed, prep pair missed.
        Some(Event::new("sent", Some("Napoleon"), None, vec![])),
        // Exactly right.
        Some(Event::new("chased", Some("dog"), Some("cat"), vec![])),
        // The system produced no event for this pair.
        None,
    ];
    let (accuracy, partial) = cloze_scores(&predictions, &gold).unwrap();
    println!("accuracy {accuracy:.1}%  partial credit {partial:.1}%");

    // Most-common-event baseline: counts whole tuples, not verbs.
    let training_events = vec![
        Event::new("won", Some("sue"), Some("prize"), vec![]),
        Event::new("won", Some("bob"), Some("prize"), vec![]),
        Event::new("won", Some("bob"), Some("prize"), vec![]),
        Event::bare("slept"),
    ];
    let modal = most_common_event(&training_events).unwrap();
    println!("modal training event: {:?}", modal);
    let baseline: Vec<Option<Event>> = gold.iter().map(|_| Some(modal.clone())).collect();
    let (acc, pc) = cloze_scores(&baseline, &gold).unwrap();
    println!("most-common baseline: accuracy {acc:.1}%  partial credit {pc:.1}%");

    // Identity baseline on the text side: each input is its own successor.
    let sent = |s: &str| -> Vec<String> { s.split(' ').map(str::to_owned).collect() };
    let inputs = vec![sent("the dog barked all night"), sent("rain fell on the town")];
    let successors = vec![sent("the cat ran away fast"), sent("rain fell on the town")];
    let candidates = identity_baseline(&inputs);
    let report = corpus_bleu(&candidates, &successors).unwrap();
    println!(
        "identity baseline: BLEU {:.2}  BLEU-BP {:.2}  1G P {:.1}",
        report.bleu, report.bleu_bp, report.unigram_precision
    );
}
