//! Train a small text-to-text successor model end to end and score it:
//! vocabulary, training loop with the damping schedule, greedy decoding,
//! and corpus BLEU against the gold successors.
//!
//! ```bash
//! cargo run --release -p scriptseq --example train_successor
//! ```

use scriptseq::corpus::{sentence_pairs, Document, Representation, Vocabulary};
use scriptseq::metrics::corpus_bleu;
use scriptseq::seqmodel::{decode_greedy, encode, SequenceKind};
use scriptseq::training::{per_token_loss, train, TrainConfig};

fn corpus() -> Vec<Document> {
    // Each document's second sentence is a fixed function of its first, so
    // a small model can learn the mapping exactly.
    let w = |i: usize| format!("w{}", i % 30);
    (0..30)
        .map(|i| Document {
            sentences: vec![
                vec![w(i), w(i + 4), w(i + 9), w(i + 16)],
                vec![w(i + 2), w(i + 10), w(i + 17), w(i + 21)],
            ],
            parses: None,
        })
        .collect()
}

fn main() {
    let docs = corpus();
    let vocab = Vocabulary::from_sentences(docs.iter().flat_map(|d| d.sentences.iter()), 50);
    let pairs = sentence_pairs(&docs, 1, Representation::Tokens);
    println!("{} pairs over a vocabulary of {}", pairs.len(), vocab.len());

    let cfg = TrainConfig {
        embed_dim: 16,
        hidden_dim: 32,
        max_updates: 2000,
        seed: 1,
        ..TrainConfig::default()
    };
    let (model, trace) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();
    for row in trace.iter().step_by(4) {
        println!(
            "update {:>5}  window loss {:.4}  lr {:.5}",
            row.update, row.window_avg, row.lr
        );
    }
    println!("per-token loss after training: {:.4}", per_token_loss(&model, &pairs, &vocab));

    let mut decoded = Vec::new();
    let mut gold = Vec::new();
    for pair in &pairs {
        let enc = encode(&model, &pair.encode_context(&vocab));
        let out = decode_greedy(&model, &enc, 50);
        decoded.push(
            out.iter()
                .filter(|&&id| id != scriptseq::corpus::EOS_ID)
                .map(|&id| vocab.token(id).to_owned())
                .collect::<Vec<_>>(),
        );
        gold.push(pair.successor.clone());
    }
    let report = corpus_bleu(&decoded, &gold).unwrap();
    println!(
        "BLEU {:.2}  BLEU-BP {:.2}  1G P {:.2}",
        report.bleu, report.bleu_bp, report.unigram_precision
    );
    println!("sample: {:?} -> {:?}", pairs[0].context[0].join(" "), decoded[0].join(" "));
}
