//! Vary the number of previous sentences the encoder sees (1, 3, 5).
//!
//! The corpus is built so the last sentence of each document copies the
//! first, while the two middle sentences are identical across documents: a
//! one-sentence window therefore cannot tell the documents apart at the
//! final prediction, but a three-sentence window can.
//!
//! ```bash
//! cargo run --release -p scriptseq --example context_windows
//! ```

use scriptseq::corpus::{sentence_pairs, Document, Representation, Vocabulary};
use scriptseq::seqmodel::{decode_greedy, encode, SequenceKind};
use scriptseq::training::{train, TrainConfig};

fn main() {
    let w = |i: usize| format!("w{}", i % 24);
    let filler1: Vec<String> = ["f0", "f1", "f2", "f3"].map(String::from).to_vec();
    let filler2: Vec<String> = ["g0", "g1", "g2", "g3"].map(String::from).to_vec();
    let docs: Vec<Document> = (0..24)
        .map(|i| {
            let opener = vec![w(i), w(i + 5), w(i + 11), w(i + 17)];
            Document {
                sentences: vec![opener.clone(), filler1.clone(), filler2.clone(), opener],
                parses: None,
            }
        })
        .collect();
    let vocab = Vocabulary::from_sentences(docs.iter().flat_map(|d| d.sentences.iter()), 40);

    for n_context in [1usize, 3, 5] {
        let pairs = sentence_pairs(&docs, n_context, Representation::Tokens);
        let cfg = TrainConfig {
            embed_dim: 14,
            hidden_dim: 24,
            n_context,
            max_updates: 2400,
            seed: 6,
            ..TrainConfig::default()
        };
        let (model, _) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();

        // Pairs arrive in document order, three per document; the third one
        // predicts the final (copied) sentence.
        let mut exact = 0;
        for pair in pairs.iter().skip(2).step_by(3) {
            let enc = encode(&model, &pair.encode_context(&vocab));
            let out = decode_greedy(&model, &enc, 50);
            if out == pair.encode_successor(&vocab)[1..] {
                exact += 1;
            }
        }
        println!("context {n_context}: {exact}/24 final sentences decoded exactly");
    }
}
