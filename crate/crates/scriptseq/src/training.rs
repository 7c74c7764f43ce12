//! The batch training loop: momentum SGD over cycling corpus-order batches,
//! the windowed learning-rate damping schedule, loss tracing, checkpoints,
//! and the two-stage chained variant.

use std::collections::VecDeque;
use std::path::PathBuf;

use crate::corpus::{
    sentence_pairs, Document, Representation, SentencePair, TokenId, Vocabulary, BOS_ID, EOS_ID,
};
use crate::error::{Error, Result};
use crate::numerics::sgd_momentum_step;
use crate::seqmodel::{
    backward_batch, decode_greedy, encode, pair_loss, save_model, ParamSet, SeqModel, SequenceKind,
};

/// How the summed batch cross-entropy is normalized before the gradient step
/// and the schedule see it.
///
/// The default is the per-token mean: with the stock learning rate of 0.1
/// and momentum 0.95, the raw summed objective takes steps proportional to
/// the batch's token count and oscillates instead of converging (the
/// overfitting tests demonstrate this), while the same settings against the
/// per-token mean train cleanly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossNorm {
    /// Sum over all scored tokens in the batch.
    SumTokens,
    /// Mean per scored token.
    MeanPerToken,
}

/// Reading of "greater than any" in the damping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampQuantifier {
    /// Damp when the new window average exceeds the minimum of the history
    /// (the rule can fire during noisy-but-improving training).
    GreaterThanMin,
    /// Damp only when it exceeds every history entry.
    GreaterThanMax,
}

/// What the damping rule watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampSignal {
    /// Averages of the training-batch losses in each window.
    TrainWindow,
    /// Loss over a held-out set, re-evaluated at each window boundary.
    Validation,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub momentum: f64,
    pub lr_damp: f64,
    /// Updates per schedule window.
    pub window: usize,
    /// Completed windows the damping rule compares against.
    pub history: usize,
    pub max_updates: usize,
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attention: bool,
    pub n_context: usize,
    pub loss_norm: LossNorm,
    pub damp_quantifier: DampQuantifier,
    pub damp_signal: DampSignal,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 10,
            initial_lr: 0.1,
            momentum: 0.95,
            lr_damp: 0.99,
            window: 100,
            history: 10,
            max_updates: 300_000,
            seed: 0,
            embed_dim: 100,
            hidden_dim: 500,
            attention: false,
            n_context: 1,
            loss_norm: LossNorm::MeanPerToken,
            damp_quantifier: DampQuantifier::GreaterThanMin,
            damp_signal: DampSignal::TrainWindow,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning rate must be finite and positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if !(self.lr_damp > 0.0 && self.lr_damp <= 1.0) {
            return Err(Error::InvalidConfig("damping factor must lie in (0, 1]".into()));
        }
        if self.window == 0 || self.history == 0 {
            return Err(Error::InvalidConfig(
                "schedule window and history must be positive".into(),
            ));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("model dimensions must be positive".into()));
        }
        if self.n_context == 0 {
            return Err(Error::InvalidConfig("n_context must be at least 1".into()));
        }
        Ok(())
    }
}

/// Learning-rate schedule state: the damping rule fires when a completed
/// window's average loss fails to improve on the trailing history.
#[derive(Debug, Clone)]
pub struct ScheduleState {
    initial_lr: f64,
    damp: f64,
    quantifier: DampQuantifier,
    history_cap: usize,
    history: VecDeque<f64>,
    damp_events: u32,
}

impl ScheduleState {
    pub fn new(initial_lr: f64, damp: f64, history_cap: usize, quantifier: DampQuantifier) -> Self {
        ScheduleState {
            initial_lr,
            damp,
            quantifier,
            history_cap,
            history: VecDeque::new(),
            damp_events: 0,
        }
    }

    /// Current learning rate: initial_lr * damp^(damping events). Computing
    /// it from the event count keeps the invariant exact.
    pub fn lr(&self) -> f64 {
        self.initial_lr * self.damp.powi(self.damp_events as i32)
    }

    pub fn damp_events(&self) -> u32 {
        self.damp_events
    }
}

/// Feed one completed window average into the schedule. No damping happens
/// until the history holds `history_cap` completed windows; afterwards the
/// rate is damped whenever the new average exceeds the min (or max, per the
/// configured quantifier) of the history. Returns true when damping fired.
pub fn schedule_step(state: &mut ScheduleState, new_window_avg: f64) -> bool {
    let mut damped = false;
    if state.history.len() >= state.history_cap {
        let threshold = match state.quantifier {
            DampQuantifier::GreaterThanMin => {
                state.history.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            DampQuantifier::GreaterThanMax => state
                .history
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max),
        };
        if new_window_avg > threshold {
            state.damp_events += 1;
            damped = true;
        }
        state.history.pop_front();
    }
    state.history.push_back(new_window_avg);
    damped
}

/// One completed schedule window in the loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based index of the update that completed the window.
    pub update: usize,
    pub window_avg: f64,
    pub lr: f64,
}

/// Render the trace as TSV with a header.
pub fn render_trace(rows: &[TraceRow]) -> String {
    let mut out = String::from("update_index\twindow_avg_loss\tlr\n");
    for row in rows {
        out.push_str(&format!("{}\t{}\t{}\n", row.update, row.window_avg, row.lr));
    }
    out
}

fn encode_pairs(pairs: &[SentencePair], vocab: &Vocabulary) -> Vec<(Vec<TokenId>, Vec<TokenId>)> {
    pairs
        .iter()
        .map(|p| (p.encode_context(vocab), p.encode_successor(vocab)))
        .collect()
}

/// Train an encoder-decoder on the given pairs: batches are taken in corpus
/// order, cycling, with no shuffling, so a run is a pure function of the
/// config. Runs exactly `max_updates` updates and returns the model plus one
/// trace row per completed window.
pub fn train(
    cfg: &TrainConfig,
    pairs: &[SentencePair],
    validation: Option<&[SentencePair]>,
    vocab: &Vocabulary,
    kind: SequenceKind,
) -> Result<(SeqModel, Vec<TraceRow>)> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("training needs at least one pair".into()));
    }
    if cfg.damp_signal == DampSignal::Validation && validation.map_or(true, |v| v.is_empty()) {
        return Err(Error::InvalidConfig(
            "validation damping signal requires a non-empty validation set".into(),
        ));
    }

    let encoded = encode_pairs(pairs, vocab);
    let encoded_val = validation.map(|v| encode_pairs(v, vocab));

    let mut model = SeqModel::new_random(
        vocab.clone(),
        kind,
        cfg.embed_dim,
        cfg.hidden_dim,
        cfg.attention,
        cfg.seed,
    );
    let mut velocity = model.params.zeros_like();
    let mut schedule = ScheduleState::new(
        cfg.initial_lr,
        cfg.lr_damp,
        cfg.history,
        cfg.damp_quantifier,
    );
    let mut trace = Vec::new();
    let mut window_losses = Vec::with_capacity(cfg.window);

    for update in 0..cfg.max_updates {
        let batch: Vec<(Vec<TokenId>, Vec<TokenId>)> = (0..cfg.batch_size)
            .map(|j| encoded[(update * cfg.batch_size + j) % encoded.len()].clone())
            .collect();
        let (grads, loss_sum) = backward_batch(&model, &batch)?;
        let scored_tokens: usize = batch.iter().map(|(_, t)| t.len() - 1).sum();
        let norm = match cfg.loss_norm {
            LossNorm::SumTokens => 1.0,
            LossNorm::MeanPerToken => scored_tokens as f64,
        };
        let loss_value = loss_sum / norm;
        if !loss_value.is_finite() {
            return Err(Error::NonFiniteLoss { update });
        }

        apply_step(&mut model.params, &grads, &mut velocity, schedule.lr() / norm, cfg.momentum);
        window_losses.push(loss_value);

        if window_losses.len() == cfg.window {
            let train_avg = window_losses.iter().sum::<f64>() / cfg.window as f64;
            window_losses.clear();
            let metric = match cfg.damp_signal {
                DampSignal::TrainWindow => train_avg,
                DampSignal::Validation => {
                    validation_loss(&model, encoded_val.as_ref().unwrap(), cfg.loss_norm)
                }
            };
            schedule_step(&mut schedule, metric);
            trace.push(TraceRow {
                update: update + 1,
                window_avg: train_avg,
                lr: schedule.lr(),
            });
        }

        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, cfg.checkpoint_dir.as_ref()) {
            if every > 0 && (update + 1) % every == 0 {
                let path = dir.join(format!("checkpoint-{:08}.ssm", update + 1));
                save_model(&model, &path)?;
            }
        }
    }
    Ok((model, trace))
}

fn apply_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    velocity: &mut ParamSet,
    lr: f64,
    momentum: f64,
) {
    let g_blocks = grads.blocks();
    for (((_, p), (_, g)), (_, v)) in params
        .blocks_mut()
        .into_iter()
        .zip(g_blocks)
        .zip(velocity.blocks_mut())
    {
        sgd_momentum_step(p, g, v, lr, momentum);
    }
}

fn validation_loss(
    model: &SeqModel,
    encoded_val: &[(Vec<TokenId>, Vec<TokenId>)],
    norm: LossNorm,
) -> f64 {
    let total: f64 = encoded_val
        .iter()
        .map(|(i, t)| pair_loss(model, i, t))
        .sum();
    match norm {
        LossNorm::SumTokens => total / encoded_val.len() as f64,
        LossNorm::MeanPerToken => {
            let tokens: usize = encoded_val.iter().map(|(_, t)| t.len() - 1).sum();
            total / tokens as f64
        }
    }
}

/// Mean teacher-forced cross-entropy per scored token over a pair set.
pub fn per_token_loss(model: &SeqModel, pairs: &[SentencePair], vocab: &Vocabulary) -> f64 {
    let encoded = encode_pairs(pairs, vocab);
    let total: f64 = encoded.iter().map(|(i, t)| pair_loss(model, i, t)).sum();
    let tokens: usize = encoded.iter().map(|(_, t)| t.len() - 1).sum();
    total / tokens as f64
}

/// The two independently trained stages of the event-to-event-to-text
/// pipeline.
#[derive(Debug)]
pub struct ChainedModels {
    /// Encodes context events, decodes successor events.
    pub stage1: SeqModel,
    /// Encodes (gold or inferred) successor events, decodes successor text.
    pub stage2: SeqModel,
}

/// Train both stages of the chained system on gold data: stage 1 on
/// (context events, successor events) pairs, stage 2 on (successor events,
/// successor text) pairs. No joint training; at inference stage 1's greedy
/// output feeds stage 2's encoder.
pub fn train_chained(
    cfg: &TrainConfig,
    docs: &[Document],
    vocab: &Vocabulary,
) -> Result<(ChainedModels, Vec<TraceRow>, Vec<TraceRow>)> {
    let stage1_pairs = sentence_pairs(docs, cfg.n_context, Representation::Events);
    if stage1_pairs.is_empty() {
        return Err(Error::EmptyInput(
            "no event pairs for stage 1 (does the corpus carry parses?)".into(),
        ));
    }
    let stage2_pairs = crate::corpus::expansion_pairs(docs);
    if stage2_pairs.is_empty() {
        return Err(Error::EmptyInput("no event-to-text pairs for stage 2".into()));
    }
    let (stage1, trace1) = train(cfg, &stage1_pairs, None, vocab, SequenceKind::Events)?;
    let mut cfg2 = cfg.clone();
    cfg2.seed = cfg.seed.wrapping_add(1);
    let (stage2, trace2) = train(&cfg2, &stage2_pairs, None, vocab, SequenceKind::Tokens)?;
    Ok((ChainedModels { stage1, stage2 }, trace1, trace2))
}

/// Greedy inference through both stages: decode successor events from the
/// input, re-encode them, decode successor text.
pub fn chained_greedy(
    models: &ChainedModels,
    input_ids: &[TokenId],
    max_len: usize,
) -> Vec<TokenId> {
    let enc1 = encode(&models.stage1, input_ids);
    let mid = decode_greedy(&models.stage1, &enc1, max_len);
    let mut mid_ids = vec![BOS_ID];
    mid_ids.extend(mid.into_iter().filter(|&t| t != EOS_ID));
    mid_ids.push(EOS_ID);
    let enc2 = encode(&models.stage2, &mid_ids);
    decode_greedy(&models.stage2, &enc2, max_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn sent(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_owned).collect()
    }

    fn tiny_corpus() -> (Vec<SentencePair>, Vocabulary) {
        let raw: Vec<(&str, &str)> = vec![
            ("the dog barked loudly", "the cat ran away"),
            ("rain fell all night", "the river rose fast"),
            ("she opened the door", "cold air rushed in"),
            ("he lit the lamp", "shadows danced around"),
            ("birds sang at dawn", "the town woke slowly"),
        ];
        let pairs: Vec<SentencePair> = raw
            .iter()
            .map(|(a, b)| SentencePair {
                context: vec![sent(a)],
                successor: sent(b),
                successor_events: vec![],
            })
            .collect();
        let all: Vec<Vec<String>> = raw
            .iter()
            .flat_map(|(a, b)| [sent(a), sent(b)])
            .collect();
        let vocab = Vocabulary::from_sentences(all.iter(), 100);
        (pairs, vocab)
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 2,
            embed_dim: 6,
            hidden_dim: 10,
            max_updates: 30,
            window: 10,
            history: 2,
            seed: 3,
            loss_norm: LossNorm::MeanPerToken,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_match_the_intended_recipe() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.batch_size, 10);
        assert_eq!(cfg.initial_lr, 0.1);
        assert_eq!(cfg.momentum, 0.95);
        assert_eq!(cfg.lr_damp, 0.99);
        assert_eq!(cfg.window, 100);
        assert_eq!(cfg.history, 10);
        assert_eq!(cfg.max_updates, 300_000);
        assert_eq!(cfg.embed_dim, 100);
        assert_eq!(cfg.hidden_dim, 500);
    }

    #[test]
    fn schedule_holds_rate_through_warmup() {
        let mut s = ScheduleState::new(0.1, 0.99, 10, DampQuantifier::GreaterThanMin);
        for avg in [9.0, 1.0, 8.0, 2.0, 7.0, 3.0, 6.0, 4.0, 5.0, 5.0] {
            assert!(!schedule_step(&mut s, avg));
        }
        assert_eq!(s.lr(), 0.1);
    }

    #[test]
    fn schedule_keeps_rate_on_improvement() {
        let mut s = ScheduleState::new(0.1, 0.99, 10, DampQuantifier::GreaterThanMin);
        for _ in 0..10 {
            schedule_step(&mut s, 1.0);
        }
        assert!(!schedule_step(&mut s, 0.9));
        assert_eq!(s.lr(), 0.1);
    }

    #[test]
    fn schedule_damps_when_above_history_min() {
        let mut s = ScheduleState::new(0.1, 0.99, 10, DampQuantifier::GreaterThanMin);
        schedule_step(&mut s, 1.0);
        for _ in 0..9 {
            schedule_step(&mut s, 0.9);
        }
        assert!(schedule_step(&mut s, 0.95));
        assert!((s.lr() - 0.099).abs() < 1e-15);
    }

    #[test]
    fn max_quantifier_needs_worse_than_everything() {
        let mut s = ScheduleState::new(0.1, 0.99, 10, DampQuantifier::GreaterThanMax);
        schedule_step(&mut s, 1.0);
        for _ in 0..9 {
            schedule_step(&mut s, 0.9);
        }
        // 0.95 > min but not > max: no damping under the max reading.
        assert!(!schedule_step(&mut s, 0.95));
        assert_eq!(s.lr(), 0.1);
        assert!(schedule_step(&mut s, 1.05));
    }

    #[test]
    fn schedule_history_slides() {
        let mut s = ScheduleState::new(0.1, 0.99, 3, DampQuantifier::GreaterThanMin);
        for avg in [1.0, 0.9, 0.8] {
            schedule_step(&mut s, avg);
        }
        // History is now [1.0, 0.9, 0.8]; 0.85 > 0.8 damps and slides 1.0 out.
        assert!(schedule_step(&mut s, 0.85));
        assert_eq!(s.damp_events(), 1);
        // History [0.9, 0.8, 0.85]: 0.79 improves on the min, no damp.
        assert!(!schedule_step(&mut s, 0.79));
        assert_eq!(s.history.len(), 3);
    }

    #[test]
    fn lr_is_exactly_damp_power() {
        let mut s = ScheduleState::new(0.1, 0.99, 1, DampQuantifier::GreaterThanMin);
        schedule_step(&mut s, 1.0);
        for i in 0..7 {
            // Each window is worse than the last: every step damps.
            assert!(schedule_step(&mut s, 2.0 + 0.1 * i as f64));
        }
        assert_eq!(s.damp_events(), 7);
        assert!((s.lr() - 0.1 * 0.99f64.powi(7)).abs() < 1e-18);
    }

    #[test]
    fn zero_updates_returns_untouched_initialized_model() {
        let (pairs, vocab) = tiny_corpus();
        let mut cfg = small_cfg();
        cfg.max_updates = 0;
        let (model, trace) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();
        assert!(trace.is_empty());
        let fresh = SeqModel::new_random(
            vocab.clone(),
            SequenceKind::Tokens,
            cfg.embed_dim,
            cfg.hidden_dim,
            cfg.attention,
            cfg.seed,
        );
        assert_eq!(model, fresh);
    }

    #[test]
    fn same_seed_gives_bit_identical_traces() {
        let (pairs, vocab) = tiny_corpus();
        let cfg = small_cfg();
        let (m1, t1) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();
        let (m2, t2) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(m1, m2);
        assert_eq!(t1.len(), 3);
    }

    #[test]
    fn empty_pair_stream_is_rejected() {
        let (_, vocab) = tiny_corpus();
        let cfg = small_cfg();
        assert!(train(&cfg, &[], None, &vocab, SequenceKind::Tokens).is_err());
    }

    #[test]
    fn learning_happens_on_small_corpus() {
        let (pairs, vocab) = tiny_corpus();
        let mut cfg = small_cfg();
        cfg.max_updates = 60;
        cfg.loss_norm = LossNorm::MeanPerToken;
        let (_, trace) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();
        assert!(trace.last().unwrap().window_avg < trace.first().unwrap().window_avg);
    }

    #[test]
    fn validation_signal_requires_validation_pairs() {
        let (pairs, vocab) = tiny_corpus();
        let mut cfg = small_cfg();
        cfg.damp_signal = DampSignal::Validation;
        assert!(train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).is_err());
        let (_, trace) = train(
            &cfg,
            &pairs,
            Some(&pairs[..2]),
            &vocab,
            SequenceKind::Tokens,
        )
        .unwrap();
        assert_eq!(trace.len(), 3);
    }

    #[test]
    fn checkpoints_are_saved_and_loadable() {
        let (pairs, vocab) = tiny_corpus();
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg();
        cfg.checkpoint_every = Some(10);
        cfg.checkpoint_dir = Some(dir.path().to_owned());
        let (model, _) = train(&cfg, &pairs, None, &vocab, SequenceKind::Tokens).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            vec![
                "checkpoint-00000010.ssm",
                "checkpoint-00000020.ssm",
                "checkpoint-00000030.ssm"
            ]
        );
        // The final checkpoint is the final model.
        let last = crate::seqmodel::load_model(&dir.path().join("checkpoint-00000030.ssm")).unwrap();
        assert_eq!(last, model);
    }

    #[test]
    fn trace_renders_as_tsv() {
        let rows = vec![TraceRow {
            update: 100,
            window_avg: 2.5,
            lr: 0.1,
        }];
        let text = render_trace(&rows);
        assert_eq!(text, "update_index\twindow_avg_loss\tlr\n100\t2.5\t0.1\n");
    }
}
