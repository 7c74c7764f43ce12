//! End-to-end runs of the command surface: ingestion, training, prediction,
//! evaluation, baselines, and the failure contracts.

use std::fs;
use std::path::{Path, PathBuf};

use scriptseq::cli::{manifest_path, run};

struct Workdir {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workdir {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_owned();
        Workdir { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, content).unwrap();
        p
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// A small deterministic tokenized corpus: each document's second sentence
/// is a fixed function of the first.
fn token_corpus() -> String {
    let mut out = String::new();
    for i in 0..12 {
        let a = |k: usize| format!("w{}", k % 12);
        out.push_str(&format!("{} {} {} {}\n", a(i), a(i + 2), a(i + 5), a(i + 7)));
        out.push_str(&format!("{} {} {} {}\n", a(i + 1), a(i + 3), a(i + 6), a(i + 8)));
        out.push('\n');
    }
    out
}

/// A parsed corpus of "the <subj> <verb> the <obj>" sentences, two per
/// document.
fn parsed_corpus(docs: usize) -> String {
    let mut out = String::new();
    let sent = |s: &str, v: &str, o: &str| -> String {
        format!(
            "1\tthe\tDET\t2\tdet\n2\t{s}\tNOUN\t3\tnsubj\n3\t{v}\tVERB\t0\troot\n\
             4\tthe\tDET\t5\tdet\n5\t{o}\tNOUN\t3\tdobj\n"
        )
    };
    for i in 0..docs {
        if i > 0 {
            out.push_str("#doc\n");
        }
        out.push_str(&sent(
            &format!("actor{}", i % 4),
            &format!("verb{}", i % 3),
            &format!("thing{}", i % 5),
        ));
        out.push('\n');
        out.push_str(&sent(
            &format!("actor{}", (i + 1) % 4),
            &format!("verb{}", (i + 2) % 3),
            &format!("thing{}", (i + 3) % 5),
        ));
    }
    out
}

#[test]
fn text_pipeline_vocab_train_predict_evaluate() {
    let w = Workdir::new();
    let corpus = w.write("corpus.txt", &token_corpus());
    let vocab = w.path("vocab.txt");
    run(&[
        "build-vocab",
        "--corpus",
        &s(&corpus),
        "--k",
        "100",
        "--out",
        &s(&vocab),
    ])
    .unwrap();
    assert!(vocab.exists());

    let model = w.path("model.ssm");
    let trace = w.path("trace.tsv");
    run(&[
        "train",
        "--mode",
        "t-t",
        "--corpus",
        &s(&corpus),
        "--vocab",
        &s(&vocab),
        "--model-out",
        &s(&model),
        "--trace-out",
        &s(&trace),
        "--max-updates",
        "1200",
        "--embed-dim",
        "12",
        "--hidden-dim",
        "24",
        "--seed",
        "7",
    ])
    .unwrap();
    assert!(model.exists());
    let trace_text = w.read("trace.tsv");
    assert!(trace_text.starts_with("update_index\twindow_avg_loss\tlr\n"));
    assert_eq!(trace_text.lines().count(), 1 + 12);

    // Manifest written next to the model.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest_path(&model)).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 7);
    assert!(manifest["inputs"].as_array().unwrap().len() >= 2);

    let preds = w.path("preds.txt");
    let gold = w.path("gold.txt");
    run(&[
        "predict",
        "--mode",
        "t-t",
        "--model",
        &s(&model),
        "--pairs",
        &s(&corpus),
        "--out",
        &s(&preds),
        "--gold-out",
        &s(&gold),
    ])
    .unwrap();
    assert_eq!(w.read("preds.txt").lines().count(), 12);
    assert_eq!(w.read("gold.txt").lines().count(), 12);

    let report_path = w.path("report.txt");
    run(&[
        "evaluate-bleu",
        "--candidates",
        &s(&preds),
        "--references",
        &s(&gold),
        "--out",
        &s(&report_path),
    ])
    .unwrap();
    let report = w.read("report.txt");
    assert!(report.contains("bleu = 100.000000"), "overfit run should reproduce training targets:\n{report}");
    assert!(report.contains("n_pairs = 12"));
    assert!(manifest_path(&report_path).exists());
}

#[test]
fn bleu_of_identical_files_is_100() {
    let w = Workdir::new();
    let c = w.write("c.txt", "a b c d\ne f g h\n");
    run(&[
        "evaluate-bleu",
        "--candidates",
        &s(&c),
        "--references",
        &s(&c),
        "--out",
        &s(&w.path("r.txt")),
    ])
    .unwrap();
    assert!(w.read("r.txt").contains("bleu = 100.000000"));
}

#[test]
fn identity_baseline_writes_previous_sentences() {
    let w = Workdir::new();
    let corpus = w.write("p.txt", "a b\nc d\ne f\n\nx y\nz q\n");
    let out = w.path("cands.txt");
    let gold = w.path("gold.txt");
    run(&[
        "baseline",
        "identity",
        "--pairs",
        &s(&corpus),
        "--out",
        &s(&out),
        "--gold-out",
        &s(&gold),
    ])
    .unwrap();
    assert_eq!(w.read("cands.txt"), "a b\nc d\nx y\n");
    assert_eq!(w.read("gold.txt"), "c d\ne f\nz q\n");

    // Piped into BLEU, a pair (s, s) scores a perfect match; here the
    // corpus repeats nothing, so the score is low but the machinery runs.
    run(&[
        "evaluate-bleu",
        "--candidates",
        &s(&out),
        "--references",
        &s(&gold),
        "--out",
        &s(&w.path("r.txt")),
    ])
    .unwrap();
    assert!(w.read("r.txt").contains("bleu = "));
}

#[test]
fn event_pipeline_linearize_train_predict_cloze() {
    let w = Workdir::new();
    let parsed = w.write("train.tsv", &parsed_corpus(10));

    let lin = w.path("events.txt");
    run(&["linearize", "--parsed", &s(&parsed), "--out", &s(&lin)]).unwrap();
    let lin_text = w.read("events.txt");
    assert!(
        lin_text.starts_with("verb0 actor0 thing0\n"),
        "unexpected linearization:\n{lin_text}"
    );

    let vocab = w.path("vocab.txt");
    run(&["build-vocab", "--corpus", &s(&lin), "--k", "100", "--out", &s(&vocab)]).unwrap();

    let model = w.path("ee.ssm");
    run(&[
        "train",
        "--mode",
        "e-e",
        "--parsed",
        &s(&parsed),
        "--vocab",
        &s(&vocab),
        "--model-out",
        &s(&model),
        "--max-updates",
        "1500",
        "--embed-dim",
        "10",
        "--hidden-dim",
        "20",
        "--seed",
        "3",
    ])
    .unwrap();

    let preds = w.path("epreds.txt");
    let gold = w.path("egold.txt");
    run(&[
        "predict",
        "--mode",
        "e-e",
        "--model",
        &s(&model),
        "--pairs",
        &s(&parsed),
        "--out",
        &s(&preds),
        "--gold-out",
        &s(&gold),
    ])
    .unwrap();
    assert_eq!(w.read("epreds.txt").lines().count(), 10);

    run(&[
        "evaluate-cloze",
        "--candidates",
        &s(&preds),
        "--references",
        &s(&gold),
        "--out",
        &s(&w.path("cloze.txt")),
    ])
    .unwrap();
    let report = w.read("cloze.txt");
    assert!(report.contains("accuracy = 100.000000"), "overfit e-e run should be exact:\n{report}");
    assert!(report.contains("partial_credit = 100.000000"));
}

#[test]
fn chained_train_and_predict() {
    let w = Workdir::new();
    let parsed = w.write("train.tsv", &parsed_corpus(8));
    let lin = w.path("events.txt");
    run(&["linearize", "--parsed", &s(&parsed), "--out", &s(&lin)]).unwrap();
    // Vocabulary must cover both event tokens and surface text; the surface
    // corpus contains every event token here, so count the surface side.
    let surface = w.path("surface.txt");
    {
        let docs = scriptseq::corpus::read_parsed_corpus(&parsed).unwrap();
        scriptseq::corpus::write_tokenized_corpus(&surface, &docs).unwrap();
    }
    let vocab = w.path("vocab.txt");
    run(&["build-vocab", "--corpus", &s(&surface), "--k", "100", "--out", &s(&vocab)]).unwrap();

    let m1 = w.path("stage1.ssm");
    let m2 = w.path("stage2.ssm");
    run(&[
        "train",
        "--mode",
        "e-e-t",
        "--parsed",
        &s(&parsed),
        "--vocab",
        &s(&vocab),
        "--model-out",
        &s(&m1),
        "--model2-out",
        &s(&m2),
        "--max-updates",
        "1500",
        "--embed-dim",
        "10",
        "--hidden-dim",
        "20",
        "--seed",
        "2",
    ])
    .unwrap();

    let preds = w.path("chained.txt");
    run(&[
        "predict",
        "--mode",
        "e-e-t",
        "--model",
        &s(&m1),
        "--model2",
        &s(&m2),
        "--pairs",
        &s(&parsed),
        "--out",
        &s(&preds),
        "--gold-out",
        &s(&w.path("gold.txt")),
    ])
    .unwrap();
    assert_eq!(w.read("chained.txt").lines().count(), 8);

    run(&[
        "evaluate-bleu",
        "--candidates",
        &s(&preds),
        "--references",
        &s(&w.path("gold.txt")),
        "--out",
        &s(&w.path("r.txt")),
    ])
    .unwrap();
    assert!(w.read("r.txt").contains("bleu = 100.000000"));
}

#[test]
fn text_to_event_pipeline_via_external_parse() {
    let w = Workdir::new();
    // Generated text from some t-t system (stubbed): two predictions.
    let generated = w.write("generated.txt", "the actor1 verb2 the thing3\nno verbs here\n");
    let _ = generated;

    // The external parser's output for those two sentences: the second one
    // has no verb, so it must come back as <NOEVT>.
    let parsed_preds = w.write(
        "generated.parsed.tsv",
        "1\tthe\tDET\t2\tdet\n2\tactor1\tNOUN\t3\tnsubj\n3\tverb2\tVERB\t0\troot\n\
         4\tthe\tDET\t5\tdet\n5\tthing3\tNOUN\t3\tdobj\n\n\
         1\tno\tDET\t2\tdet\n2\tverbs\tNOUN\t0\troot\n3\there\tADV\t2\tadvmod\n",
    );
    let epreds = w.path("event-preds.txt");
    run(&[
        "predict",
        "--mode",
        "t-t-e",
        "--stage",
        "ingest",
        "--parsed-predictions",
        &s(&parsed_preds),
        "--pairs",
        &s(&parsed_preds),
        "--out",
        &s(&epreds),
    ])
    .unwrap();
    assert_eq!(
        w.read("event-preds.txt"),
        "verb2 actor1 thing3\n<NOEVT>\n"
    );

    // Gold side: first events of the successors of a parsed eval corpus.
    let eval = w.write("eval.tsv", &parsed_corpus(2));
    let gold = w.path("event-gold.txt");
    run(&[
        "extract-events",
        "--parsed",
        &s(&eval),
        "--successors-only",
        "--first-event",
        "--out",
        &s(&gold),
    ])
    .unwrap();
    let gold_lines = w.read("event-gold.txt");
    assert_eq!(gold_lines, "verb2 actor1 thing3\nverb0 actor2 thing4\n");

    run(&[
        "evaluate-cloze",
        "--candidates",
        &s(&epreds),
        "--references",
        &s(&gold),
        "--out",
        &s(&w.path("cloze.txt")),
    ])
    .unwrap();
    assert!(w.read("cloze.txt").contains("n_pairs = 2"));
}

#[test]
fn most_common_baseline_repeats_modal_event() {
    let w = Workdir::new();
    let parsed = w.write("train.tsv", &parsed_corpus(6));
    let out = w.path("mc.txt");
    run(&[
        "baseline",
        "most-common",
        "--parsed",
        &s(&parsed),
        "--pairs",
        &s(&parsed),
        "--out",
        &s(&out),
    ])
    .unwrap();
    let text = w.read("mc.txt");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| *l == lines[0]));
}

#[test]
fn grad_check_command_passes_and_fails_loudly() {
    run(&["grad-check", "--seed", "1"]).unwrap();
    run(&["grad-check", "--seed", "2", "--attention"]).unwrap();
    run(&["grad-check", "--seed", "3", "--event-level", "--attention"]).unwrap();
}

#[test]
fn config_file_supplies_defaults_but_flags_win() {
    let w = Workdir::new();
    let corpus = w.write("corpus.txt", &token_corpus());
    let vocab = w.path("vocab.txt");
    run(&["build-vocab", "--corpus", &s(&corpus), "--k", "50", "--out", &s(&vocab)]).unwrap();

    let conf = w.write(
        "run.conf",
        "max-updates = 40\nembed-dim = 8\nhidden-dim = 12\nseed = 5\n",
    );
    let m1 = w.path("m1.ssm");
    run(&[
        "train",
        "--config",
        &s(&conf),
        "--mode",
        "t-t",
        "--corpus",
        &s(&corpus),
        "--vocab",
        &s(&vocab),
        "--model-out",
        &s(&m1),
    ])
    .unwrap();

    // Same settings spelled out; flag overrides the config seed.
    let m2 = w.path("m2.ssm");
    run(&[
        "train",
        "--config",
        &s(&conf),
        "--seed",
        "5",
        "--mode",
        "t-t",
        "--corpus",
        &s(&corpus),
        "--vocab",
        &s(&vocab),
        "--model-out",
        &s(&m2),
    ])
    .unwrap();
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    let m3 = w.path("m3.ssm");
    run(&[
        "train",
        "--config",
        &s(&conf),
        "--seed",
        "6",
        "--mode",
        "t-t",
        "--corpus",
        &s(&corpus),
        "--vocab",
        &s(&vocab),
        "--model-out",
        &s(&m3),
    ])
    .unwrap();
    assert_ne!(fs::read(&m1).unwrap(), fs::read(&m3).unwrap());
}

#[test]
fn same_seed_training_is_bit_identical_through_the_cli() {
    let w = Workdir::new();
    let corpus = w.write("corpus.txt", &token_corpus());
    let vocab = w.path("vocab.txt");
    run(&["build-vocab", "--corpus", &s(&corpus), "--k", "50", "--out", &s(&vocab)]).unwrap();
    for name in ["a.ssm", "b.ssm"] {
        run(&[
            "train",
            "--mode",
            "t-t",
            "--corpus",
            &s(&corpus),
            "--vocab",
            &s(&vocab),
            "--model-out",
            &s(&w.path(name)),
            "--trace-out",
            &s(&w.path(&format!("{name}.tsv"))),
            "--max-updates",
            "120",
            "--embed-dim",
            "8",
            "--hidden-dim",
            "12",
            "--seed",
            "9",
        ])
        .unwrap();
    }
    assert_eq!(
        fs::read(w.path("a.ssm")).unwrap(),
        fs::read(w.path("b.ssm")).unwrap()
    );
    assert_eq!(w.read("a.ssm.tsv"), w.read("b.ssm.tsv"));
}

#[test]
fn failures_leave_no_partial_artifacts() {
    let w = Workdir::new();
    // Missing reference file: evaluate must fail without creating --out.
    let c = w.write("c.txt", "a b\n");
    let out = w.path("report.txt");
    let err = run(&[
        "evaluate-bleu",
        "--candidates",
        &s(&c),
        "--references",
        &s(&w.path("missing.txt")),
        "--out",
        &s(&out),
    ])
    .unwrap_err();
    assert!(err.to_string().contains("missing.txt"));
    assert!(!out.exists());

    // Unreadable vocabulary: train must fail without creating the model.
    let model = w.path("model.ssm");
    let corpus = w.write("corpus.txt", &token_corpus());
    assert!(run(&[
        "train",
        "--mode",
        "t-t",
        "--corpus",
        &s(&corpus),
        "--vocab",
        &s(&w.path("nope.txt")),
        "--model-out",
        &s(&model),
        "--max-updates",
        "5",
    ])
    .is_err());
    assert!(!model.exists());
}

#[test]
fn mode_and_model_kind_must_agree() {
    let w = Workdir::new();
    let parsed = w.write("train.tsv", &parsed_corpus(6));
    let lin = w.path("events.txt");
    run(&["linearize", "--parsed", &s(&parsed), "--out", &s(&lin)]).unwrap();
    let vocab = w.path("vocab.txt");
    run(&["build-vocab", "--corpus", &s(&lin), "--k", "50", "--out", &s(&vocab)]).unwrap();
    let model = w.path("ee.ssm");
    run(&[
        "train",
        "--mode",
        "e-e",
        "--parsed",
        &s(&parsed),
        "--vocab",
        &s(&vocab),
        "--model-out",
        &s(&model),
        "--max-updates",
        "5",
        "--embed-dim",
        "6",
        "--hidden-dim",
        "8",
    ])
    .unwrap();

    let corpus = w.write("corpus.txt", &token_corpus());
    let err = run(&[
        "predict",
        "--mode",
        "t-t",
        "--model",
        &s(&model),
        "--pairs",
        &s(&corpus),
        "--out",
        &s(&w.path("p.txt")),
    ])
    .unwrap_err();
    assert!(err.to_string().contains("decodes events"), "{err}");
}

#[test]
fn extract_events_keeps_sentence_alignment() {
    let w = Workdir::new();
    // Second sentence has no verb.
    let parsed = w.write(
        "p.tsv",
        "1\tdog\tNOUN\t2\tnsubj\n2\tran\tVERB\t0\troot\n\n\
         1\tsilence\tNOUN\t0\troot\n\
         #doc\n\
         1\tcat\tNOUN\t2\tnsubj\n2\tslept\tVERB\t0\troot\n",
    );
    let out = w.path("ev.txt");
    run(&["extract-events", "--parsed", &s(&parsed), "--out", &s(&out)]).unwrap();
    assert_eq!(
        w.read("ev.txt"),
        "ran dog <NULL>\n<NOEVT>\n\nslept cat <NULL>\n"
    );
}
