//! The LSTM cell, encoder-decoder composition, optional attention,
//! teacher-forced loss, greedy decoding, and parameter bookkeeping.
//!
//! One LSTM step computes
//!   i = sigma(W_xi x + W_zi z' + b_i)
//!   f = sigma(W_xf x + W_zf z' + b_f)
//!   o = sigma(W_xo x + W_zo z' + b_o)
//!   g = tanh (W_xg x + W_zg z' + b_g)
//!   m = f.m' + i.g
//!   z = o.tanh(m)
//! with z'/m' the previous state. Encoder and decoder own separate
//! parameter sets; the encoder's final (z, m) seeds the decoder.

mod backward;
mod io;

pub use backward::backward_batch;
pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};

use crate::corpus::{TokenId, Vocabulary, BOS_ID, EOS_ID};
use crate::numerics::{affine, sigmoid, softmax, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What the model's sequences mean; recorded in model files so evaluation
/// tooling can refuse a mismatched pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Tokens,
    Events,
}

impl SequenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SequenceKind::Tokens => "tokens",
            SequenceKind::Events => "events",
        }
    }
}

/// The twelve parameter blocks of one LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_xi: Matrix,
    pub w_zi: Matrix,
    pub w_xf: Matrix,
    pub w_zf: Matrix,
    pub w_xo: Matrix,
    pub w_zo: Matrix,
    pub w_xg: Matrix,
    pub w_zg: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmParams {
            w_xi: Matrix::zeros(hidden_dim, input_dim),
            w_zi: Matrix::zeros(hidden_dim, hidden_dim),
            w_xf: Matrix::zeros(hidden_dim, input_dim),
            w_zf: Matrix::zeros(hidden_dim, hidden_dim),
            w_xo: Matrix::zeros(hidden_dim, input_dim),
            w_zo: Matrix::zeros(hidden_dim, hidden_dim),
            w_xg: Matrix::zeros(hidden_dim, input_dim),
            w_zg: Matrix::zeros(hidden_dim, hidden_dim),
            b_i: vec![0.0; hidden_dim],
            b_f: vec![0.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
            b_g: vec![0.0; hidden_dim],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_i.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols()
    }

    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("w_xi", self.w_xi.data()),
            ("w_zi", self.w_zi.data()),
            ("w_xf", self.w_xf.data()),
            ("w_zf", self.w_zf.data()),
            ("w_xo", self.w_xo.data()),
            ("w_zo", self.w_zo.data()),
            ("w_xg", self.w_xg.data()),
            ("w_zg", self.w_zg.data()),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_o", &self.b_o),
            ("b_g", &self.b_g),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_xi", self.w_xi.data_mut()),
            ("w_zi", self.w_zi.data_mut()),
            ("w_xf", self.w_xf.data_mut()),
            ("w_zf", self.w_zf.data_mut()),
            ("w_xo", self.w_xo.data_mut()),
            ("w_zo", self.w_zo.data_mut()),
            ("w_xg", self.w_xg.data_mut()),
            ("w_zg", self.w_zg.data_mut()),
            ("b_i", &mut self.b_i),
            ("b_f", &mut self.b_f),
            ("b_o", &mut self.b_o),
            ("b_g", &mut self.b_g),
        ]
    }
}

/// Hidden output z and memory m of an LSTM after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub z: Vec<f64>,
    pub m: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            z: vec![0.0; hidden_dim],
            m: vec![0.0; hidden_dim],
        }
    }
}

/// Additive attention parameters: two projections, a score vector, and the
/// mixing layer that folds the context into the pre-projection hidden vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_enc: Matrix,
    pub w_dec: Matrix,
    pub score: Vec<f64>,
    pub w_mix: Matrix,
}

impl AttentionParams {
    pub fn zeros(hidden_dim: usize) -> Self {
        // attn_dim defaults to hidden_dim
        AttentionParams {
            w_enc: Matrix::zeros(hidden_dim, hidden_dim),
            w_dec: Matrix::zeros(hidden_dim, hidden_dim),
            score: vec![0.0; hidden_dim],
            w_mix: Matrix::zeros(hidden_dim, 2 * hidden_dim),
        }
    }
}

/// Every learned parameter of a model, in one place so the optimizer, the
/// serializer, and the gradient checks all walk the same fixed block order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub embedding: Matrix,
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    pub attention: Option<AttentionParams>,
}

impl ParamSet {
    pub fn zeros(vocab_size: usize, embed_dim: usize, hidden_dim: usize, attention: bool) -> Self {
        ParamSet {
            embedding: Matrix::zeros(vocab_size, embed_dim),
            encoder: LstmParams::zeros(embed_dim, hidden_dim),
            decoder: LstmParams::zeros(embed_dim, hidden_dim),
            w_out: Matrix::zeros(vocab_size, hidden_dim),
            b_out: vec![0.0; vocab_size],
            attention: attention.then(|| AttentionParams::zeros(hidden_dim)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet::zeros(
            self.embedding.rows(),
            self.embedding.cols(),
            self.encoder.hidden_dim(),
            self.attention.is_some(),
        )
    }

    /// All parameter blocks in the crate's canonical order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![("embedding".into(), self.embedding.data())];
        for (name, data) in self.encoder.blocks() {
            out.push((format!("encoder.{name}"), data));
        }
        for (name, data) in self.decoder.blocks() {
            out.push((format!("decoder.{name}"), data));
        }
        out.push(("w_out".into(), self.w_out.data()));
        out.push(("b_out".into(), &self.b_out));
        if let Some(attn) = &self.attention {
            out.push(("attention.w_enc".into(), attn.w_enc.data()));
            out.push(("attention.w_dec".into(), attn.w_dec.data()));
            out.push(("attention.score".into(), &attn.score));
            out.push(("attention.w_mix".into(), attn.w_mix.data()));
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> =
            vec![("embedding".into(), self.embedding.data_mut())];
        for (name, data) in self.encoder.blocks_mut() {
            out.push((format!("encoder.{name}"), data));
        }
        for (name, data) in self.decoder.blocks_mut() {
            out.push((format!("decoder.{name}"), data));
        }
        out.push(("w_out".into(), self.w_out.data_mut()));
        out.push(("b_out".into(), &mut self.b_out));
        if let Some(attn) = &mut self.attention {
            out.push(("attention.w_enc".into(), attn.w_enc.data_mut()));
            out.push(("attention.w_dec".into(), attn.w_dec.data_mut()));
            out.push(("attention.score".into(), &mut attn.score));
            out.push(("attention.w_mix".into(), attn.w_mix.data_mut()));
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (_, block) in self.blocks() {
            out.extend_from_slice(block);
        }
        out
    }

    pub fn copy_from_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, block) in self.blocks_mut() {
            block.copy_from_slice(&flat[offset..offset + block.len()]);
            offset += block.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter vector length mismatch");
    }

    /// Name of the first block holding a non-finite entry, if any.
    pub fn first_non_finite_block(&self) -> Option<String> {
        for (name, block) in self.blocks() {
            if block.iter().any(|v| !v.is_finite()) {
                return Some(name);
            }
        }
        None
    }
}

/// An encoder-decoder model over one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub kind: SequenceKind,
    pub vocab: Vocabulary,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub params: ParamSet,
}

impl SeqModel {
    /// Fresh model with parameters uniform in [-0.1, 0.1] from a seeded
    /// generator; forget biases start at 1.0 so early training retains
    /// memory.
    pub fn new_random(
        vocab: Vocabulary,
        kind: SequenceKind,
        embed_dim: usize,
        hidden_dim: usize,
        attention: bool,
        seed: u64,
    ) -> Self {
        let mut params = ParamSet::zeros(vocab.len(), embed_dim, hidden_dim, attention);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, block) in params.blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        for v in &mut params.encoder.b_f {
            *v = 1.0;
        }
        for v in &mut params.decoder.b_f {
            *v = 1.0;
        }
        SeqModel {
            kind,
            vocab,
            embed_dim,
            hidden_dim,
            params,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn has_attention(&self) -> bool {
        self.params.attention.is_some()
    }

    fn embedding_row(&self, id: TokenId) -> &[f64] {
        assert!(
            (id as usize) < self.vocab_size(),
            "token id {} out of vocabulary range {}",
            id,
            self.vocab_size()
        );
        self.params.embedding.row(id as usize)
    }
}

/// Gate activations and states of one LSTM step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub input: TokenId,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub m_prev: Vec<f64>,
    pub m: Vec<f64>,
    pub tanh_m: Vec<f64>,
    pub z: Vec<f64>,
}

impl StepCache {
    pub fn state(&self) -> LstmState {
        LstmState {
            z: self.z.clone(),
            m: self.m.clone(),
        }
    }
}

/// One LSTM transition.
pub fn lstm_step(params: &LstmParams, x: &[f64], prev: &LstmState) -> LstmState {
    lstm_step_cached(params, OOV_PLACEHOLDER, x, prev).state()
}

const OOV_PLACEHOLDER: TokenId = 0;

pub(crate) fn lstm_step_cached(
    params: &LstmParams,
    input: TokenId,
    x: &[f64],
    prev: &LstmState,
) -> StepCache {
    let h = params.hidden_dim();
    assert_eq!(
        x.len(),
        params.input_dim(),
        "lstm_step: input has length {}, parameters expect {}",
        x.len(),
        params.input_dim()
    );
    assert_eq!(
        prev.z.len(),
        h,
        "lstm_step: previous state has length {}, parameters expect {}",
        prev.z.len(),
        h
    );

    let mut i = affine(&params.w_xi, x, &params.b_i);
    crate::numerics::add_matvec(&mut i, &params.w_zi, &prev.z);
    let mut f = affine(&params.w_xf, x, &params.b_f);
    crate::numerics::add_matvec(&mut f, &params.w_zf, &prev.z);
    let mut o = affine(&params.w_xo, x, &params.b_o);
    crate::numerics::add_matvec(&mut o, &params.w_zo, &prev.z);
    let mut g = affine(&params.w_xg, x, &params.b_g);
    crate::numerics::add_matvec(&mut g, &params.w_zg, &prev.z);

    for v in i.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in f.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in o.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in g.iter_mut() {
        *v = v.tanh();
    }

    let mut m = vec![0.0; h];
    let mut tanh_m = vec![0.0; h];
    let mut z = vec![0.0; h];
    for k in 0..h {
        m[k] = f[k] * prev.m[k] + i[k] * g[k];
        tanh_m[k] = m[k].tanh();
        z[k] = o[k] * tanh_m[k];
    }

    StepCache {
        input,
        i,
        f,
        o,
        g,
        z_prev: prev.z.clone(),
        m_prev: prev.m.clone(),
        m,
        tanh_m,
        z,
    }
}

/// The encoder's trajectory over an input sequence.
#[derive(Debug, Clone)]
pub struct Encoding {
    states: Vec<LstmState>,
    pub(crate) caches: Vec<StepCache>,
}

impl Encoding {
    pub fn states(&self) -> &[LstmState] {
        &self.states
    }

    pub fn final_state(&self) -> &LstmState {
        self.states.last().expect("non-empty encoding")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Run the encoder over the input ids from the zero state. No output is
/// scored during encoding.
pub fn encode(model: &SeqModel, input_ids: &[TokenId]) -> Encoding {
    assert!(!input_ids.is_empty(), "encode: empty input sequence");
    let mut state = LstmState::zeros(model.hidden_dim);
    let mut caches = Vec::with_capacity(input_ids.len());
    for &id in input_ids {
        let x = model.embedding_row(id).to_vec();
        let cache = lstm_step_cached(&model.params.encoder, id, &x, &state);
        state = cache.state();
        caches.push(cache);
    }
    let states = caches.iter().map(StepCache::state).collect();
    Encoding { states, caches }
}

/// Context vector and weights produced by attending over encoder states.
#[derive(Debug, Clone)]
pub struct AttnContext {
    pub context: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Additive attention: scores u_i = score . tanh(W_enc h_i + W_dec d),
/// weights a = softmax(u), context = sum a_i h_i.
pub fn attention_context(
    attn: &AttentionParams,
    enc_states: &[LstmState],
    dec_z: &[f64],
) -> AttnContext {
    let (context, weights, _) = attention_forward(attn, enc_states, dec_z);
    AttnContext { context, weights }
}

pub(crate) fn attention_forward(
    attn: &AttentionParams,
    enc_states: &[LstmState],
    dec_z: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    assert!(!enc_states.is_empty(), "attention over empty encoder state list");
    let dec_proj = affine(&attn.w_dec, dec_z, &vec![0.0; attn.w_dec.rows()]);
    let mut scores = Vec::with_capacity(enc_states.len());
    let mut tanhs = Vec::with_capacity(enc_states.len());
    for state in enc_states {
        let mut k = affine(&attn.w_enc, &state.z, &vec![0.0; attn.w_enc.rows()]);
        for (kv, dv) in k.iter_mut().zip(&dec_proj) {
            *kv += dv;
        }
        for v in k.iter_mut() {
            *v = v.tanh();
        }
        scores.push(attn.score.iter().zip(&k).map(|(s, r)| s * r).sum::<f64>());
        tanhs.push(k);
    }
    let weights = softmax(&scores);
    let h = enc_states[0].z.len();
    let mut context = vec![0.0; h];
    for (w, state) in weights.iter().zip(enc_states) {
        for (c, zv) in context.iter_mut().zip(&state.z) {
            *c += w * zv;
        }
    }
    (context, weights, tanhs)
}

/// Attention bookkeeping for one decoder step.
#[derive(Debug, Clone)]
pub(crate) struct AttnStepCache {
    pub tanhs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
    pub h_tilde: Vec<f64>,
}

/// The pre-projection hidden vector for one decoder state: the LSTM output
/// itself, or tanh(W_mix [z; context]) when attention is on.
pub(crate) fn decoder_hidden(
    model: &SeqModel,
    enc_states: &[LstmState],
    dec_z: &[f64],
) -> (Vec<f64>, Option<AttnStepCache>) {
    match &model.params.attention {
        None => (dec_z.to_vec(), None),
        Some(attn) => {
            let (context, weights, tanhs) = attention_forward(attn, enc_states, dec_z);
            let mut cat = Vec::with_capacity(2 * dec_z.len());
            cat.extend_from_slice(dec_z);
            cat.extend_from_slice(&context);
            let mut h_tilde = affine(&attn.w_mix, &cat, &vec![0.0; attn.w_mix.rows()]);
            for v in h_tilde.iter_mut() {
                *v = v.tanh();
            }
            (
                h_tilde.clone(),
                Some(AttnStepCache {
                    tanhs,
                    weights,
                    context,
                    h_tilde,
                }),
            )
        }
    }
}

/// One scored decoder step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct DecStepCache {
    pub lstm: StepCache,
    pub attn: Option<AttnStepCache>,
    pub probs: Vec<f64>,
    pub target: TokenId,
}

pub(crate) fn forward_cached(
    model: &SeqModel,
    enc: &Encoding,
    target_ids: &[TokenId],
) -> (f64, Vec<DecStepCache>, Vec<Vec<f64>>) {
    assert!(
        target_ids.len() >= 2 && target_ids[0] == BOS_ID && *target_ids.last().unwrap() == EOS_ID,
        "decode target must start with <S> and end with </S>"
    );
    let mut state = enc.final_state().clone();
    let mut caches = Vec::with_capacity(target_ids.len() - 1);
    let mut logits_per_step = Vec::with_capacity(target_ids.len() - 1);
    let mut loss = 0.0;
    for t in 0..target_ids.len() - 1 {
        let consumed = target_ids[t];
        let target = target_ids[t + 1];
        let x = model.embedding_row(consumed).to_vec();
        let lstm = lstm_step_cached(&model.params.decoder, consumed, &x, &state);
        state = lstm.state();
        let (hidden, attn) = decoder_hidden(model, enc.states(), &lstm.z);
        let logits = affine(&model.params.w_out, &hidden, &model.params.b_out);
        let probs = softmax(&logits);
        loss += crate::numerics::cross_entropy(&probs, target as usize);
        logits_per_step.push(logits);
        caches.push(DecStepCache {
            lstm,
            attn,
            probs,
            target,
        });
    }
    (loss, caches, logits_per_step)
}

/// Teacher-forced decoding: the decoder starts from the encoder's final
/// state, consumes the gold token at each step, and is scored against the
/// next one. Returns the summed cross-entropy and the per-step logits.
pub fn decode_teacher_forced(
    model: &SeqModel,
    enc: &Encoding,
    target_ids: &[TokenId],
) -> (f64, Vec<Vec<f64>>) {
    let (loss, _, logits) = forward_cached(model, enc, target_ids);
    (loss, logits)
}

/// Summed teacher-forced loss of one (input, target) pair; the loss the
/// finite-difference oracle probes.
pub fn pair_loss(model: &SeqModel, input_ids: &[TokenId], target_ids: &[TokenId]) -> f64 {
    let enc = encode(model, input_ids);
    decode_teacher_forced(model, &enc, target_ids).0
}

/// Greedy decoding: start from <S>, feed the argmax back in, stop at </S>
/// or after `max_len` emitted tokens. The returned ids exclude <S> and
/// include </S> when it was emitted. Argmax ties break to the lowest id.
pub fn decode_greedy(model: &SeqModel, enc: &Encoding, max_len: usize) -> Vec<TokenId> {
    assert!(max_len >= 1, "decode_greedy: max_len must be at least 1");
    let mut state = enc.final_state().clone();
    let mut output = Vec::new();
    let mut prev = BOS_ID;
    for _ in 0..max_len {
        let x = model.embedding_row(prev).to_vec();
        let cache = lstm_step_cached(&model.params.decoder, prev, &x, &state);
        state = cache.state();
        let (hidden, _) = decoder_hidden(model, enc.states(), &cache.z);
        let logits = affine(&model.params.w_out, &hidden, &model.params.b_out);
        let mut best = 0usize;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        let token = best as TokenId;
        output.push(token);
        if token == EOS_ID {
            break;
        }
        prev = token;
    }
    output
}

/// Default cap on greedy decode length.
pub const DEFAULT_MAX_DECODE_LEN: usize = 100;
