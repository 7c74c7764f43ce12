//! Backpropagation through time for the encoder-decoder.
//!
//! The gradients are the exact derivative of the summed batch cross-entropy;
//! the test suite checks every block against central finite differences.

use super::{
    forward_cached, AttnStepCache, DecStepCache, Encoding, LstmParams, ParamSet, SeqModel,
    StepCache,
};
use crate::corpus::TokenId;
use crate::error::{Error, Result};

/// Gradients for the whole model on a batch of (input, target) id pairs,
/// together with the summed batch loss.
pub fn backward_batch(
    model: &SeqModel,
    batch: &[(Vec<TokenId>, Vec<TokenId>)],
) -> Result<(ParamSet, f64)> {
    assert!(!batch.is_empty(), "backward_batch: empty batch");
    let mut grads = model.params.zeros_like();
    let mut total_loss = 0.0;
    for (input_ids, target_ids) in batch {
        let enc = super::encode(model, input_ids);
        let (loss, dec_caches, _) = forward_cached(model, &enc, target_ids);
        total_loss += loss;
        backward_pair(model, &enc, &dec_caches, &mut grads);
    }
    if !total_loss.is_finite() {
        return Err(Error::NonFiniteGradient {
            block: "loss".into(),
        });
    }
    if let Some(block) = grads.first_non_finite_block() {
        return Err(Error::NonFiniteGradient { block });
    }
    Ok((grads, total_loss))
}

fn backward_pair(
    model: &SeqModel,
    enc: &Encoding,
    dec_caches: &[DecStepCache],
    grads: &mut ParamSet,
) {
    let h = model.hidden_dim;
    let n_enc = enc.caches.len();

    // Gradient accumulators on each encoder state, fed by attention and by
    // the final-state handoff.
    let mut d_enc_z = vec![vec![0.0; h]; n_enc];
    let mut d_enc_m = vec![vec![0.0; h]; n_enc];

    // Carries flowing backward through the decoder recurrence.
    let mut dz_carry = vec![0.0; h];
    let mut dm_carry = vec![0.0; h];

    for step in dec_caches.iter().rev() {
        // d loss / d logits = probs - onehot(target)
        let mut dlogits = step.probs.clone();
        dlogits[step.target as usize] -= 1.0;

        let hidden: &[f64] = match &step.attn {
            Some(a) => &a.h_tilde,
            None => &step.lstm.z,
        };
        grads.w_out.add_outer(&dlogits, hidden);
        for (b, d) in grads.b_out.iter_mut().zip(&dlogits) {
            *b += d;
        }
        let dh = model.params.w_out.transpose_vec(&dlogits);

        // Gradient on this step's LSTM output z_t, from the output path and
        // from the next step's recurrence.
        let mut dz = dz_carry;
        match &step.attn {
            None => {
                for (a, b) in dz.iter_mut().zip(&dh) {
                    *a += b;
                }
            }
            Some(attn_cache) => {
                backward_attention(
                    model,
                    attn_cache,
                    &dh,
                    &step.lstm.z,
                    enc,
                    grads,
                    &mut dz,
                    &mut d_enc_z,
                );
            }
        }

        let (dz_prev, dm_prev) = backward_lstm_step(
            &model.params.decoder,
            model.params.embedding.row(step.lstm.input as usize),
            &step.lstm,
            &dz,
            &dm_carry,
            &mut grads.decoder,
            grads.embedding.row_mut(step.lstm.input as usize),
        );
        dz_carry = dz_prev;
        dm_carry = dm_prev;
    }

    // The decoder's initial state is the encoder's final state: hand the
    // carries off.
    for (a, b) in d_enc_z[n_enc - 1].iter_mut().zip(&dz_carry) {
        *a += b;
    }
    for (a, b) in d_enc_m[n_enc - 1].iter_mut().zip(&dm_carry) {
        *a += b;
    }

    // Encoder BPTT. The initial state is the constant zero vector, so the
    // final carries are discarded.
    let mut dz_carry = vec![0.0; h];
    let mut dm_carry = vec![0.0; h];
    for (s, cache) in enc.caches.iter().enumerate().rev() {
        let mut dz = std::mem::take(&mut d_enc_z[s]);
        for (a, b) in dz.iter_mut().zip(&dz_carry) {
            *a += b;
        }
        let mut dm_in = std::mem::take(&mut d_enc_m[s]);
        for (a, b) in dm_in.iter_mut().zip(&dm_carry) {
            *a += b;
        }
        let (dz_prev, dm_prev) = backward_lstm_step(
            &model.params.encoder,
            model.params.embedding.row(cache.input as usize),
            cache,
            &dz,
            &dm_in,
            &mut grads.encoder,
            grads.embedding.row_mut(cache.input as usize),
        );
        dz_carry = dz_prev;
        dm_carry = dm_prev;
    }
}

/// Backprop through the attention read and the mixing layer. `dh` is the
/// gradient on h_tilde; contributions to the decoder state land in `dz` and
/// contributions to the encoder states in `d_enc_z`.
#[allow(clippy::too_many_arguments)]
fn backward_attention(
    model: &SeqModel,
    cache: &AttnStepCache,
    dh: &[f64],
    dec_z: &[f64],
    enc: &Encoding,
    grads: &mut ParamSet,
    dz: &mut [f64],
    d_enc_z: &mut [Vec<f64>],
) {
    let h = dec_z.len();
    let attn = model
        .params
        .attention
        .as_ref()
        .expect("attention parameters");
    let attn_grads = grads.attention.as_mut().expect("attention gradients");

    // h_tilde = tanh(W_mix [z; c])
    let dq: Vec<f64> = dh
        .iter()
        .zip(&cache.h_tilde)
        .map(|(d, t)| d * (1.0 - t * t))
        .collect();
    let mut cat = Vec::with_capacity(2 * h);
    cat.extend_from_slice(dec_z);
    cat.extend_from_slice(&cache.context);
    attn_grads.w_mix.add_outer(&dq, &cat);
    let dcat = attn.w_mix.transpose_vec(&dq);
    for (a, b) in dz.iter_mut().zip(&dcat[..h]) {
        *a += b;
    }
    let dc = &dcat[h..];

    // context = sum_i a_i z_i
    let states = enc.states();
    let mut da = vec![0.0; states.len()];
    for (i, state) in states.iter().enumerate() {
        da[i] = dc.iter().zip(&state.z).map(|(d, z)| d * z).sum();
        for (acc, d) in d_enc_z[i].iter_mut().zip(dc) {
            *acc += cache.weights[i] * d;
        }
    }

    // a = softmax(u): du_i = a_i (da_i - sum_j a_j da_j)
    let dot: f64 = cache.weights.iter().zip(&da).map(|(a, d)| a * d).sum();
    let du: Vec<f64> = cache
        .weights
        .iter()
        .zip(&da)
        .map(|(a, d)| a * (d - dot))
        .collect();

    // u_i = score . tanh(W_enc z_i + W_dec d)
    for (i, state) in states.iter().enumerate() {
        if du[i] == 0.0 {
            continue;
        }
        let r = &cache.tanhs[i];
        let mut dk = vec![0.0; r.len()];
        for k in 0..r.len() {
            attn_grads.score[k] += du[i] * r[k];
            dk[k] = du[i] * attn.score[k] * (1.0 - r[k] * r[k]);
        }
        attn_grads.w_enc.add_outer(&dk, &state.z);
        attn_grads.w_dec.add_outer(&dk, dec_z);
        for (acc, d) in d_enc_z[i].iter_mut().zip(attn.w_enc.transpose_vec(&dk)) {
            *acc += d;
        }
        for (a, b) in dz.iter_mut().zip(attn.w_dec.transpose_vec(&dk)) {
            *a += b;
        }
    }
}

/// Backprop through one LSTM step. `dz` and `dm_in` are the gradients
/// arriving on this step's z and m; returns the gradients on the previous
/// state. Parameter gradients accumulate into `g`, the input gradient into
/// the consumed token's embedding row.
fn backward_lstm_step(
    params: &LstmParams,
    x: &[f64],
    cache: &StepCache,
    dz: &[f64],
    dm_in: &[f64],
    g: &mut LstmParams,
    embedding_grad_row: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let h = params.hidden_dim();
    let mut dm = vec![0.0; h];
    let mut di = vec![0.0; h];
    let mut df = vec![0.0; h];
    let mut do_ = vec![0.0; h];
    let mut dg = vec![0.0; h];
    for k in 0..h {
        // z = o tanh(m)
        dm[k] = dm_in[k] + dz[k] * cache.o[k] * (1.0 - cache.tanh_m[k] * cache.tanh_m[k]);
        do_[k] = dz[k] * cache.tanh_m[k] * cache.o[k] * (1.0 - cache.o[k]);
        // m = f m' + i g
        di[k] = dm[k] * cache.g[k] * cache.i[k] * (1.0 - cache.i[k]);
        df[k] = dm[k] * cache.m_prev[k] * cache.f[k] * (1.0 - cache.f[k]);
        dg[k] = dm[k] * cache.i[k] * (1.0 - cache.g[k] * cache.g[k]);
    }

    g.w_xi.add_outer(&di, x);
    g.w_zi.add_outer(&di, &cache.z_prev);
    g.w_xf.add_outer(&df, x);
    g.w_zf.add_outer(&df, &cache.z_prev);
    g.w_xo.add_outer(&do_, x);
    g.w_zo.add_outer(&do_, &cache.z_prev);
    g.w_xg.add_outer(&dg, x);
    g.w_zg.add_outer(&dg, &cache.z_prev);
    for k in 0..h {
        g.b_i[k] += di[k];
        g.b_f[k] += df[k];
        g.b_o[k] += do_[k];
        g.b_g[k] += dg[k];
    }

    // Input gradient goes to the consumed token's embedding row.
    let mut dx = params.w_xi.transpose_vec(&di);
    for (a, b) in dx.iter_mut().zip(params.w_xf.transpose_vec(&df)) {
        *a += b;
    }
    for (a, b) in dx.iter_mut().zip(params.w_xo.transpose_vec(&do_)) {
        *a += b;
    }
    for (a, b) in dx.iter_mut().zip(params.w_xg.transpose_vec(&dg)) {
        *a += b;
    }
    for (a, b) in embedding_grad_row.iter_mut().zip(&dx) {
        *a += b;
    }

    // Gradients on the previous state.
    let mut dz_prev = params.w_zi.transpose_vec(&di);
    for (a, b) in dz_prev.iter_mut().zip(params.w_zf.transpose_vec(&df)) {
        *a += b;
    }
    for (a, b) in dz_prev.iter_mut().zip(params.w_zo.transpose_vec(&do_)) {
        *a += b;
    }
    for (a, b) in dz_prev.iter_mut().zip(params.w_zg.transpose_vec(&dg)) {
        *a += b;
    }
    let dm_prev: Vec<f64> = dm.iter().zip(&cache.f).map(|(d, f)| d * f).collect();
    (dz_prev, dm_prev)
}
