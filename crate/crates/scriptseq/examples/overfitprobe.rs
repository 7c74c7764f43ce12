use scriptseq::corpus::{sentence_pairs, Document, Representation, Vocabulary};
use scriptseq::seqmodel::{decode_greedy, encode, SequenceKind};
use scriptseq::training::{per_token_loss, train, LossNorm, TrainConfig};

fn corpus() -> Vec<Document> {
    let w = |i: usize| format!("w{}", i % 50);
    (0..50)
        .map(|i| Document {
            sentences: vec![
                vec![w(i), w(i + 7), w(i + 13), w(i + 29)],
                vec![w(i + 1), w(i + 11), w(i + 23), w(i + 37)],
            ],
            parses: None,
        })
        .collect()
}

fn main() {
    let docs = corpus();
    let vocab = Vocabulary::from_sentences(docs.iter().flat_map(|d| d.sentences.iter()), 60);
    println!("vocab size {}", vocab.len());
    let pairs = sentence_pairs(&docs, 1, Representation::Tokens);

    for (norm, label, updates) in [
        (LossNorm::SumTokens, "sum", 3000usize),
        (LossNorm::MeanPerToken, "mean", 3000),
    ] {
        let cfg = TrainConfig {
            embed_dim: 16,
            hidden_dim: 32,
            max_updates: updates,
            seed: 42,
            loss_norm: norm,
            ..TrainConfig::default()
        };
        let t0 = std::time::Instant::now();
        match train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens) {
            Err(e) => println!("{label}: FAILED: {e}"),
            Ok((model, trace)) => {
                let ptl = per_token_loss(&model, &pairs, &vocab);
                let mut exact = 0;
                for p in &pairs {
                    let enc = encode(&model, &p.encode_context(&vocab));
                    let out = decode_greedy(&model, &enc, 100);
                    let gold = p.encode_successor(&vocab);
                    if out == gold[1..] { exact += 1; }
                }
                let first = trace.first().map(|r| r.window_avg).unwrap_or(0.0);
                let last = trace.last().map(|r| (r.window_avg, r.lr)).unwrap_or((0.0, 0.0));
                println!(
                    "{label}: {:.1}s  first-window {:.4}  last-window {:.4} lr {:.5}  per-token {:.5}  exact {}/50",
                    t0.elapsed().as_secs_f64(), first, last.0, last.1, ptl, exact
                );
            }
        }
    }
}
