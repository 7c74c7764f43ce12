//! Inspect the attention distribution over encoder states while decoding.
//!
//! ```bash
//! cargo run --release -p scriptseq --example attention_alignment
//! ```

use scriptseq::corpus::{sentence_pairs, Document, Representation, Vocabulary};
use scriptseq::seqmodel::{attention_context, encode, SequenceKind};
use scriptseq::training::{train, TrainConfig};

fn main() {
    let w = |i: usize| format!("w{}", i % 20);
    let docs: Vec<Document> = (0..20)
        .map(|i| Document {
            sentences: vec![
                vec![w(i), w(i + 3), w(i + 8), w(i + 11)],
                vec![w(i + 1), w(i + 5), w(i + 9), w(i + 13)],
            ],
            parses: None,
        })
        .collect();
    let vocab = Vocabulary::from_sentences(docs.iter().flat_map(|d| d.sentences.iter()), 40);
    let pairs = sentence_pairs(&docs, 1, Representation::Tokens);

    let cfg = TrainConfig {
        embed_dim: 12,
        hidden_dim: 20,
        attention: true,
        max_updates: 1500,
        seed: 8,
        ..TrainConfig::default()
    };
    let (model, _) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();

    let pair = &pairs[0];
    let input = pair.encode_context(&vocab);
    let enc = encode(&model, &input);
    let attn = model.params.attention.as_ref().unwrap();

    println!("encoder input: {}", pair.context[0].join(" "));
    let ctx = attention_context(attn, enc.states(), &enc.final_state().z);
    println!("query = final encoder state; weights over encoder positions:");
    for (i, (&id, weight)) in input.iter().zip(&ctx.weights).enumerate() {
        println!("  {:>2} {:<8} {:.4}", i, vocab.token(id), weight);
    }
    let sum: f64 = ctx.weights.iter().sum();
    println!("weights sum to {sum:.12}");
}
