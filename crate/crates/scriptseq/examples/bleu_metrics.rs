//! Corpus BLEU from first principles: clipped n-gram counts, the geometric
//! mean, and the brevity penalty, on a corpus small enough to check by eye.
//!
//! ```bash
//! cargo run -p scriptseq --example bleu_metrics
//! ```

use scriptseq::metrics::{brevity_penalty, corpus_bleu, modified_precision};

fn main() {
    let sent = |s: &str| -> Vec<String> { s.split(' ').map(str::to_owned).collect() };
    let candidates = vec![
        sent("the cat sat on the mat"),
        sent("the the the the"),
        sent("a quick fox"),
    ];
    let references = vec![
        sent("the cat sat on the mat"),
        sent("the cat sat down"),
        sent("a quick brown fox jumps"),
    ];

    for n in 1..=4 {
        let (matches, total) = modified_precision(&candidates, &references, n);
        println!("{n}-gram precision: {matches}/{total}");
    }
    // The second candidate shows clipping: four "the" against a reference
    // with one "the" counts once. The third shows the brevity penalty: the
    // candidate corpus is 13 tokens against 15 reference tokens.
    println!("brevity penalty at c=13, r=15: {:.6}", brevity_penalty(13, 15));

    let report = corpus_bleu(&candidates, &references).unwrap();
    println!("{}", report.render());

    // Without any 4-gram overlap the whole score collapses to zero: the
    // geometric mean is unsmoothed.
    let no4 = corpus_bleu(&[sent("a b c x")], &[sent("a b c y")]).unwrap();
    println!(
        "no 4-gram overlap: bleu {:.2}, unigram precision {:.2}",
        no4.bleu, no4.unigram_precision
    );
}
