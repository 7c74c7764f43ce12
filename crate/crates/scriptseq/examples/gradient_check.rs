//! Check the analytic backpropagation against central finite differences
//! on a tiny model, block by block.
//!
//! ```bash
//! cargo run --release -p scriptseq --example gradient_check
//! ```

use scriptseq::corpus::{Vocabulary, BOS_ID, EOS_ID};
use scriptseq::numerics::{finite_diff_grad, grad_rel_error};
use scriptseq::seqmodel::{backward_batch, pair_loss, SeqModel, SequenceKind};

fn main() {
    let vocab = Vocabulary::from_listed_tokens(["the", "dog", "ran", "home", "cat", "sat", "mat"])
        .unwrap();

    for attention in [false, true] {
        let model = SeqModel::new_random(vocab.clone(), SequenceKind::Tokens, 4, 8, attention, 1);
        let batch = vec![
            (vec![BOS_ID, 5, 6, 7, EOS_ID], vec![BOS_ID, 9, 10, 11, EOS_ID]),
            (vec![BOS_ID, 9, 5, EOS_ID], vec![BOS_ID, 7, EOS_ID]),
        ];

        let (grads, loss) = backward_batch(&model, &batch).unwrap();
        let analytic = grads.to_flat();
        let flat0 = model.params.to_flat();
        let mut probe = model.clone();
        let numeric = finite_diff_grad(
            |flat| {
                probe.params.copy_from_flat(flat);
                batch.iter().map(|(i, t)| pair_loss(&probe, i, t)).sum()
            },
            &flat0,
            1e-5,
        );

        println!(
            "attention {}: batch loss {loss:.4}, {} parameters",
            if attention { "on " } else { "off" },
            analytic.len()
        );
        // Worst error per parameter block.
        let mut offset = 0;
        for (name, block) in grads.blocks() {
            let worst = (offset..offset + block.len())
                .map(|i| grad_rel_error(analytic[i], numeric[i]))
                .fold(0.0, f64::max);
            println!("  {name:<18} max err {worst:.2e}");
            offset += block.len();
        }
    }
}
