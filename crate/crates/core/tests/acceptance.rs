//! Acceptance suite: every shipped guarantee in one run, one PASS/FAIL
//! line per criterion. Later criteria reuse the model trained in the
//! learnability criterion, so everything runs inside a single test.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uncross::cparser::{cky_parse, induce_grammar, viterbi_logprob, Grammar, InduceConfig, ParseStatus};
use uncross::metrics::{bracket_scores, reorder_scores, EvalConfig, Scores};
use uncross::pointer::{
    decode, decode_traced, grad_check, DecodeMode, LossOpts, ModelConfig, PointerModel,
    TrainConfig, Vocab,
};
use uncross::reorder::{
    cca_permutation, permute_sentence, permute_tree, restore_discontinuous, Permutation,
    RelocationMask,
};
use uncross::synth::{random_sentence, random_tree};
use uncross::treebank::{
    read_corpus, write_corpus, ConstTree, Corpus, Format, Sentence, Token, TreeBuilder,
};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/synthetic")
        .join(name)
}

fn load_data(name: &str) -> Corpus {
    let path = data_file(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    read_corpus(&text, Format::Export).expect("shipped corpus parses")
}

/// Desk-scale model used by the learnability criteria.
fn desk_model_config() -> ModelConfig {
    ModelConfig {
        word_dim: 48,
        char_dim: 16,
        conv_window: 3,
        conv_filters: 24,
        enc_hidden: 48,
        enc_layers: 2,
        dec_hidden: 48,
        ptr_mlp: 64,
        lab_mlp: 32,
        ext_dim: None,
        dropout: 0.33,
    }
}

#[test]
fn acceptance_criteria() {
    let mut outcomes: Vec<Outcome> = Vec::new();

    outcomes.push(criterion_1_round_trip());
    outcomes.push(criterion_2_continuity());
    outcomes.push(criterion_3_gradients());
    outcomes.push(criterion_4_uniqueness());
    let (c5, trained) = criterion_5_learnability();
    outcomes.push(c5);
    outcomes.push(criterion_6_labeller(trained.as_ref()));
    outcomes.push(criterion_7_complexity());
    outcomes.push(criterion_8_metric_oracles());
    outcomes.push(criterion_9_cky());
    outcomes.push(criterion_10_end_to_end(trained.as_ref()));

    let mut all_ok = true;
    for (i, o) in outcomes.iter().enumerate() {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {:2} ({}): {} — {}", i + 1, o.name, status, o.detail);
        all_ok &= o.passed;
    }
    assert!(all_ok, "at least one acceptance criterion failed");
}

// 1. convert -> restore reproduces every tree node-for-node; scoring the
//    restored trees against gold gives F1 = DF1 = 100. Runs on the shipped
//    500-sentence corpus and on an arbitrary random export corpus.
fn criterion_1_round_trip() -> Outcome {
    let started = Instant::now();
    let shipped = load_data("bench500.export");
    let random = {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let corpus = uncross::synth::random_corpus(&mut rng, 200, 12, 0.6);
        // Exercise the export surface the way a user-supplied file would.
        let text = write_corpus(&corpus, Format::Export).expect("writable");
        read_corpus(&text, Format::Export).expect("round-trippable")
    };

    for (which, corpus) in [("shipped", &shipped), ("random", &random)] {
        let mut perms = Vec::new();
        let mut permuted_entries = Vec::new();
        for (id, tree) in corpus.iter() {
            let p = cca_permutation(tree);
            let cont = permute_tree(tree, &p).expect("lengths match");
            if !cont.is_continuous() {
                return fail("oracle round trip", format!("{which}: tree {id} not continuous"));
            }
            perms.push((id.to_string(), p));
            permuted_entries.push((id.to_string(), cont));
        }
        let permuted = Corpus::new(permuted_entries).expect("unique ids");
        // Through the bracket surface: what a continuous parser would see.
        let bracket = write_corpus(&permuted, Format::Bracket).expect("continuous");
        let reread = read_corpus(&bracket, Format::Bracket).expect("parses");
        let mut restored_entries = Vec::new();
        for ((_, tree), (id, perm)) in reread.iter().zip(&perms) {
            let back = restore_discontinuous(tree, perm).expect("restores");
            restored_entries.push((id.clone(), back));
        }
        let restored = Corpus::new(restored_entries).expect("unique ids");
        for ((_, orig), (id, back)) in corpus.iter().zip(restored.iter()) {
            if !orig.same_structure(back) {
                return fail(
                    "oracle round trip",
                    format!("{which}: sentence {id} differs after restore"),
                );
            }
        }
        let scores =
            bracket_scores(&restored, corpus, &EvalConfig::default()).expect("aligned");
        if scores.f1 != 100.0 || scores.disc_f1 != 100.0 {
            return fail(
                "oracle round trip",
                format!("{which}: F1 {} DF1 {}", scores.f1, scores.disc_f1),
            );
        }
    }
    let elapsed = started.elapsed();
    checked(
        "oracle round trip",
        elapsed < Duration::from_secs(5),
        format!(
            "{} + 200 sentences exact, F1 = DF1 = 100.00, {:.2}s (< 5s)",
            shipped.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// 2. The canonical arrangement removes every discontinuity.
fn criterion_2_continuity() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut discontinuous_inputs = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=14);
        let sentence = random_sentence(&mut rng, n);
        let tree = random_tree(&mut rng, &sentence, 0.7);
        if !tree.is_continuous() {
            discontinuous_inputs += 1;
        }
        let p = cca_permutation(&tree);
        let permuted = permute_tree(&tree, &p).expect("lengths match");
        if !permuted.discontinuous_nodes().is_empty() {
            return fail("continuity", "permuted tree still discontinuous".into());
        }
        let back = restore_discontinuous(&permuted, &p).expect("restores");
        if !back.same_structure(&tree) {
            return fail("continuity", "restore is not exact".into());
        }
    }
    let elapsed = started.elapsed();
    checked(
        "continuity",
        elapsed < Duration::from_secs(10),
        format!(
            "1000 random trees ({discontinuous_inputs} discontinuous) all made continuous, {:.2}s (< 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

// 3. Analytic gradients match central finite differences.
fn criterion_3_gradients() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut total = 0usize;
    for seed in [11u64, 23, 47] {
        let sentence = Sentence::from_forms(&["ab", "cd", "ef", "gh", "ij"]).unwrap();
        let vocab = Vocab::build([&sentence].into_iter());
        let cfg = ModelConfig {
            word_dim: 4,
            char_dim: 3,
            conv_window: 3,
            conv_filters: 3,
            enc_hidden: 3,
            enc_layers: 2,
            dec_hidden: 3,
            ptr_mlp: 4,
            lab_mlp: 3,
            ext_dim: None,
            dropout: 0.0,
        };
        let mut model = PointerModel::new(cfg, vocab, seed).unwrap();
        let gold = Permutation::new(vec![0, 2, 4, 1, 3]).unwrap();
        let mask = gold.relocated_mask();
        let report = grad_check(
            &mut model,
            &[(sentence, gold, mask)],
            &LossOpts::default(),
            1e-4,
        )
        .expect("dropout-free fixture");
        worst = worst.max(report.max_rel_error);
        total += report.checked;
    }
    let elapsed = started.elapsed();
    checked(
        "gradient fidelity",
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "max relative error {worst:.2e} over {total} parameters, 3 seeds, {:.1}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

// 4. Decoding always yields a bijection; the step-t support has n-t
//    entries and each masked distribution is normalized.
fn criterion_4_uniqueness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for case in 0..200u64 {
        let n = rng.gen_range(1..=50);
        let sentence = random_sentence(&mut rng, n);
        let vocab = Vocab::build([&sentence].into_iter());
        let cfg = ModelConfig {
            word_dim: 5,
            char_dim: 4,
            conv_window: 3,
            conv_filters: 4,
            enc_hidden: 5,
            enc_layers: 1,
            dec_hidden: 5,
            ptr_mlp: 6,
            lab_mlp: 4,
            ext_dim: None,
            dropout: 0.0,
        };
        let model = PointerModel::new(cfg, vocab, case).unwrap();
        let enc = model.encode(&sentence, None, None).unwrap();
        let (perm, mask, traces) = decode_traced(&model, &enc, true);

        let mut seen = vec![false; n];
        for &j in perm.map() {
            if j >= n || seen[j] {
                return fail("uniqueness", format!("case {case}: not a bijection"));
            }
            seen[j] = true;
        }
        if mask.flags().len() != n {
            return fail("uniqueness", format!("case {case}: mask length"));
        }
        if traces.len() != n.saturating_sub(1) {
            return fail(
                "uniqueness",
                format!("case {case}: {} scored steps for n = {n}", traces.len()),
            );
        }
        for (t, step) in traces.iter().enumerate() {
            if step.support.len() != n - t {
                return fail(
                    "uniqueness",
                    format!("case {case}: support {} at step {t}", step.support.len()),
                );
            }
            let total: f64 = step.probs.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return fail(
                    "uniqueness",
                    format!("case {case}: distribution sums to {total}"),
                );
            }
        }
    }
    pass(
        "uniqueness",
        "200 random models/sentences, n in 1..=50: bijections, support n-t, distributions normalized".into(),
    )
}

struct Trained {
    model: PointerModel,
    train: Corpus,
    dev: Corpus,
}

// 5. Desk-scale learnability on the shipped deterministic corpus.
fn criterion_5_learnability() -> (Outcome, Option<Trained>) {
    let started = Instant::now();
    let train_corpus = load_data("train.export");
    let dev_corpus = load_data("dev.export");
    let vocab = Vocab::build(train_corpus.iter().map(|(_, t)| t.sentence()));
    let model = PointerModel::new(desk_model_config(), vocab, 7).unwrap();
    let tcfg = TrainConfig::default(); // optimizer defaults, 50-epoch cap
    let outcome = match uncross::pointer::train(&train_corpus, &dev_corpus, &tcfg, model, None) {
        Ok(o) => o,
        Err(e) => return (fail("learnability", format!("training failed: {e}")), None),
    };
    let elapsed = started.elapsed();

    let dev_scores = score_reorder(&outcome.model, &dev_corpus, true);
    let train_scores = score_reorder(&outcome.model, &train_corpus, true);
    let epochs = outcome.history.len();
    let ok = dev_scores.uas >= 95.0
        && train_scores.uas >= 99.0
        && epochs <= 50
        && elapsed < Duration::from_secs(600);
    let detail = format!(
        "dev UAS {:.2} (>= 95), train UAS {:.2} (>= 99), {} epochs (<= 50), {:.1}s (< 600s)",
        dev_scores.uas,
        train_scores.uas,
        epochs,
        elapsed.as_secs_f64()
    );
    let trained = Trained {
        model: outcome.model,
        train: train_corpus,
        dev: dev_corpus,
    };
    (checked("learnability", ok, detail), Some(trained))
}

fn score_reorder(model: &PointerModel, corpus: &Corpus, use_labeller: bool) -> Scores {
    let gold: Vec<(Permutation, RelocationMask)> = corpus
        .iter()
        .map(|(_, t)| {
            let p = cca_permutation(t);
            let m = p.relocated_mask();
            (p, m)
        })
        .collect();
    let pred: Vec<(Permutation, RelocationMask)> = corpus
        .iter()
        .map(|(_, t)| {
            let enc = model.encode(t.sentence(), None, None).expect("encodes");
            decode(model, &enc, DecodeMode::Greedy, use_labeller)
        })
        .collect();
    reorder_scores(&pred, &gold).expect("aligned")
}

// 6. Joint pointer+labeller training does not regress relocated-token F1
//    against pointer-only training.
fn criterion_6_labeller(trained: Option<&Trained>) -> Outcome {
    let Some(trained) = trained else {
        return fail("labeller non-regression", "no trained model".into());
    };
    let vocab = Vocab::build(trained.train.iter().map(|(_, t)| t.sentence()));
    let model = PointerModel::new(desk_model_config(), vocab, 7).unwrap();
    let tcfg = TrainConfig {
        labeller_weight: 0.0,
        ..Default::default()
    };
    let pointer_only =
        match uncross::pointer::train(&trained.train, &trained.dev, &tcfg, model, None) {
            Ok(o) => o,
            Err(e) => return fail("labeller non-regression", format!("training failed: {e}")),
        };
    let joint = score_reorder(&trained.model, &trained.dev, true);
    let plain = score_reorder(&pointer_only.model, &trained.dev, false);
    let ok = joint.reloc_f1 >= plain.reloc_f1 - 1.0;
    checked(
        "labeller non-regression",
        ok,
        format!(
            "joint relocated F1 {:.2} vs pointer-only {:.2} (tolerance -1.0); joint %pred {:.2}, %gold {:.2}",
            joint.reloc_f1, plain.reloc_f1, joint.pct_relocated_pred, joint.pct_relocated_gold
        ),
    )
}

// 7. Decode wall time grows quadratically: n-1 steps, each scoring the
//    remaining candidates.
fn criterion_7_complexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let cfg = ModelConfig {
        word_dim: 8,
        char_dim: 6,
        conv_window: 3,
        conv_filters: 4,
        enc_hidden: 8,
        enc_layers: 1,
        dec_hidden: 8,
        ptr_mlp: 16,
        lab_mlp: 8,
        ext_dim: None,
        dropout: 0.0,
    };
    let sizes = [10usize, 20, 40, 80, 160];
    let mut points = Vec::new();
    for &n in &sizes {
        let sentence = random_sentence(&mut rng, n);
        let vocab = Vocab::build([&sentence].into_iter());
        let model = PointerModel::new(cfg.clone(), vocab, 7).unwrap();
        let enc = model.encode(&sentence, None, None).unwrap();
        // Calibrate repetitions so each sample is comfortably measurable.
        let probe = Instant::now();
        let _ = decode(&model, &enc, DecodeMode::Greedy, true);
        let once = probe.elapsed().as_secs_f64().max(1e-7);
        let reps = ((0.05 / once).ceil() as usize).clamp(3, 20_000);
        let mut samples = Vec::new();
        for _ in 0..5 {
            let t = Instant::now();
            for _ in 0..reps {
                let _ = decode(&model, &enc, DecodeMode::Greedy, true);
            }
            samples.push(t.elapsed().as_secs_f64() / reps as f64);
        }
        samples.sort_by(f64::total_cmp);
        points.push((n as f64, samples[2]));
    }
    // Least-squares slope in log-log space.
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    let k = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    let times: Vec<String> = points
        .iter()
        .map(|(n, t)| format!("n={n}: {:.1}us", t * 1e6))
        .collect();
    checked(
        "decode complexity",
        (1.7..=2.4).contains(&slope),
        format!("fitted exponent {slope:.2} in [1.7, 2.4]; {}", times.join(", ")),
    )
}

// ---------- criterion 8: metric oracles ----------

/// Brute-force bracket scorer, independent of the library path: explicit
/// item lists, greedy multiset matching with used-flags.
fn naive_bracket_scores(pred: &Corpus, gold: &Corpus, cfg: &EvalConfig) -> Scores {
    fn own_yield(tree: &ConstTree, id: uncross::treebank::NodeId, out: &mut Vec<usize>) {
        for child in tree.node(id).unwrap().children() {
            match *child {
                uncross::treebank::Child::Leaf(pos) => out.push(pos),
                uncross::treebank::Child::Node(c) => own_yield(tree, c, out),
            }
        }
    }
    fn sentence_items(
        tree: &ConstTree,
        punct: &[usize],
        cfg: &EvalConfig,
    ) -> Vec<(String, BTreeSet<usize>)> {
        let mut items = Vec::new();
        for id in tree.node_ids() {
            if id == tree.root() {
                continue;
            }
            let label = tree.node(id).unwrap().label().to_string();
            let label = if cfg.strip_function_suffixes {
                let mut cut = label.len();
                for (i, c) in label.char_indices() {
                    if i > 0 && (c == '-' || c == '=') {
                        cut = i;
                        break;
                    }
                }
                label[..cut].to_string()
            } else {
                label
            };
            if cfg.ignore_root_labels.contains(&label) {
                continue;
            }
            let mut positions = Vec::new();
            own_yield(tree, id, &mut positions);
            let set: BTreeSet<usize> = positions
                .into_iter()
                .filter(|p| !punct.contains(p))
                .map(|p| p - punct.iter().filter(|&&q| q < p).count())
                .collect();
            if !set.is_empty() {
                items.push((label, set));
            }
        }
        items
    }
    fn greedy_match(
        pred: &[(String, BTreeSet<usize>)],
        gold: &[(String, BTreeSet<usize>)],
    ) -> usize {
        let mut used = vec![false; gold.len()];
        let mut matched = 0;
        for p in pred {
            if let Some(i) = gold
                .iter()
                .enumerate()
                .position(|(i, g)| !used[i] && g == p)
            {
                used[i] = true;
                matched += 1;
            }
        }
        matched
    }
    let disc = |set: &BTreeSet<usize>| {
        let lo = *set.first().unwrap();
        let hi = *set.last().unwrap();
        hi - lo + 1 != set.len()
    };

    let (mut m, mut np, mut ng) = (0usize, 0usize, 0usize);
    let (mut dm, mut dnp, mut dng) = (0usize, 0usize, 0usize);
    for ((_, pt), (_, gt)) in pred.iter().zip(gold.iter()) {
        let punct: Vec<usize> = if cfg.ignore_punctuation {
            (0..gt.n())
                .filter(|&p| {
                    let tok = gt.sentence().token(p);
                    match tok.pos() {
                        Some(tag) => cfg.punctuation_tags.contains(tag),
                        None => cfg.punctuation_forms.contains(tok.form()),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let pi = sentence_items(pt, &punct, cfg);
        let gi = sentence_items(gt, &punct, cfg);
        m += greedy_match(&pi, &gi);
        np += pi.len();
        ng += gi.len();
        let pd: Vec<_> = pi.iter().filter(|(_, s)| disc(s)).cloned().collect();
        let gd: Vec<_> = gi.iter().filter(|(_, s)| disc(s)).cloned().collect();
        dm += greedy_match(&pd, &gd);
        dnp += pd.len();
        dng += gd.len();
    }
    let pct = |n: usize, d: usize| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
    let f = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let (p, r) = (pct(m, np), pct(m, ng));
    let (dp, dr) = (pct(dm, dnp), pct(dm, dng));
    Scores {
        f1: f(p, r),
        disc_f1: f(dp, dr),
        precision: p,
        recall: r,
        ..Default::default()
    }
}

fn criterion_8_metric_oracles() -> Outcome {
    // Random tree pairs: library scorer vs the brute-force scorer, exact.
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for case in 0..50 {
        let n = rng.gen_range(1..=10);
        let mut tokens = Vec::new();
        for _ in 0..n {
            // A mix of content words and bare punctuation forms so the
            // punctuation filter is exercised through the form fallback.
            if rng.gen_bool(0.2) {
                tokens.push(Token::new(*[",", ".", ";"].iter().nth(rng.gen_range(0..3)).unwrap()).unwrap());
            } else {
                tokens.push(Token::new(format!("w{}", rng.gen_range(0..6))).unwrap());
            }
        }
        let sentence = Sentence::new(tokens).unwrap();
        let gold_t = random_tree(&mut rng, &sentence, 0.5);
        let pred_t = random_tree(&mut rng, &sentence, 0.5);
        let gold = Corpus::new(vec![("1".into(), gold_t)]).unwrap();
        let pred = Corpus::new(vec![("1".into(), pred_t)]).unwrap();
        let cfg = EvalConfig::default();
        let a = bracket_scores(&pred, &gold, &cfg).expect("aligned");
        let b = naive_bracket_scores(&pred, &gold, &cfg);
        if a != b {
            return fail(
                "metric oracles",
                format!("case {case}: scorer {a:?} vs brute force {b:?}"),
            );
        }
    }

    // Hand-computed arrangement fixtures, including the zero-positive
    // conventions.
    struct Fixture {
        pred: (Vec<usize>, Vec<bool>),
        gold: (Vec<usize>, Vec<bool>),
        uas: f64,
        las: f64,
        rp: f64,
        rr: f64,
        rf: f64,
        pg: f64,
        pp: f64,
    }
    let fx = |pred, gold, uas, las, rp, rr, rf, pg, pp| Fixture {
        pred,
        gold,
        uas,
        las,
        rp,
        rr,
        rf,
        pg,
        pp,
    };
    let third = 100.0 / 3.0;
    let fixtures = vec![
        // identical identities: zero positives score 0 by convention
        fx(
            (vec![0, 1, 2, 3], vec![false; 4]),
            (vec![0, 1, 2, 3], vec![false; 4]),
            100.0, 100.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        ),
        // identical non-trivial arrangement
        fx(
            (vec![0, 2, 1, 3], vec![false, true, true, false]),
            (vec![0, 2, 1, 3], vec![false, true, true, false]),
            100.0, 100.0, 100.0, 100.0, 100.0, 50.0, 50.0,
        ),
        // identity prediction against a swap
        fx(
            (vec![0, 1, 2, 3], vec![false; 4]),
            (vec![0, 2, 1, 3], vec![false, true, true, false]),
            50.0, 50.0, 0.0, 0.0, 0.0, 50.0, 0.0,
        ),
        // spurious relocations against an identity gold
        fx(
            (vec![1, 0, 2], vec![true, true, false]),
            (vec![0, 1, 2], vec![false; 3]),
            third, third, 0.0, 0.0, 0.0, 0.0, 2.0 * third,
        ),
        // correct positions, labeller misses one flag
        fx(
            (vec![0, 2, 1, 3], vec![false, true, false, false]),
            (vec![0, 2, 1, 3], vec![false, true, true, false]),
            100.0, 75.0, 100.0, 50.0, 2.0 * 100.0 * 50.0 / 150.0, 50.0, 25.0,
        ),
        // micro-average over two sentences
        fx(
            (vec![1, 0, 0, 1, 2, 3], vec![true, true, false, false, false, false]),
            (vec![1, 0, 0, 2, 1, 3], vec![true, true, false, true, true, false]),
            // encoded below as two entries; placeholder values replaced there
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        ),
        // single token
        fx((vec![0], vec![false]), (vec![0], vec![false]), 100.0, 100.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        // reversal with partial agreement
        fx(
            (vec![2, 0, 1], vec![true, true, true]),
            (vec![2, 1, 0], vec![true, false, true]),
            third, third, 2.0 * third, 100.0, 80.0, 2.0 * third, 100.0,
        ),
        // flags all wrong despite perfect positions
        fx(
            (vec![1, 0], vec![false, false]),
            (vec![1, 0], vec![true, true]),
            100.0, 0.0, 0.0, 0.0, 0.0, 100.0, 0.0,
        ),
        // rotation partially recovered
        fx(
            (vec![4, 1, 0, 2, 3], vec![true, true, true, false, false]),
            (vec![4, 0, 1, 2, 3], vec![true, true, true, true, true]),
            60.0, 20.0, 100.0, 60.0, 75.0, 100.0, 60.0,
        ),
    ];
    for (i, f) in fixtures.iter().enumerate() {
        let (pred, gold) = if i == 5 {
            // the two-sentence fixture: [1,0] swap both right; second
            // sentence identity predicted against [0,2,1,3]
            let pred = vec![
                arrangement(vec![1, 0], vec![true, true]),
                arrangement(vec![0, 1, 2, 3], vec![false; 4]),
            ];
            let gold = vec![
                arrangement(vec![1, 0], vec![true, true]),
                arrangement(vec![0, 2, 1, 3], vec![false, true, true, false]),
            ];
            (pred, gold)
        } else {
            (
                vec![arrangement(f.pred.0.clone(), f.pred.1.clone())],
                vec![arrangement(f.gold.0.clone(), f.gold.1.clone())],
            )
        };
        let scores = reorder_scores(&pred, &gold).expect("aligned");
        let expected = if i == 5 {
            // tokens 6; hits: 2 + 2; tp 2, pp 2, gp 4
            (
                4.0 * 100.0 / 6.0,
                4.0 * 100.0 / 6.0,
                100.0,
                50.0,
                2.0 * 100.0 * 50.0 / 150.0,
                4.0 * 100.0 / 6.0,
                2.0 * 100.0 / 6.0,
            )
        } else {
            (f.uas, f.las, f.rp, f.rr, f.rf, f.pg, f.pp)
        };
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        if !(close(scores.uas, expected.0)
            && close(scores.las, expected.1)
            && close(scores.reloc_precision, expected.2)
            && close(scores.reloc_recall, expected.3)
            && close(scores.reloc_f1, expected.4)
            && close(scores.pct_relocated_gold, expected.5)
            && close(scores.pct_relocated_pred, expected.6))
        {
            return fail(
                "metric oracles",
                format!("arrangement fixture {i}: got {scores:?}, expected {expected:?}"),
            );
        }
    }
    pass(
        "metric oracles",
        "50 random tree pairs match the brute-force scorer exactly; 10 arrangement fixtures match hand-computed values".into(),
    )
}

fn arrangement(map: Vec<usize>, flags: Vec<bool>) -> (Permutation, RelocationMask) {
    (
        Permutation::new(map).expect("valid map"),
        RelocationMask::new(flags),
    )
}

// 9. Chart parser: Viterbi equals exhaustive enumeration; exact recovery
//    on an unambiguous grammar.
fn criterion_9_cky() -> Outcome {
    // Five nonterminals over a two-word lexicon; every sentence up to
    // length 6 is compared against full enumeration.
    let grammar = Grammar::from_rules(
        &[("S", 1.0)],
        &[
            ("S", "X", "Y", 0.4),
            ("S", "A", "B", 0.3),
            ("S", "X", "B", 0.3),
            ("X", "A", "A", 0.5),
            ("X", "A", "B", 0.5),
            ("Y", "B", "B", 0.6),
            ("Y", "X", "A", 0.4),
        ],
        &[
            ("A", "a", 0.7),
            ("A", "b", 0.3),
            ("B", "b", 0.6),
            ("B", "a", 0.4),
        ],
        0,
    )
    .expect("normalized");

    fn brute(g: &Grammar, forms: &[&str], i: usize, k: usize, sym: &str) -> Option<f64> {
        let mut best: Option<f64> = None;
        if k - i == 1 {
            for (lhs, word, logp) in g.lexical_rules() {
                if lhs == sym && word == forms[i] {
                    best = Some(best.map_or(logp, |b: f64| b.max(logp)));
                }
            }
        } else {
            for (lhs, left, right, logp) in g.binary_rules() {
                if lhs != sym {
                    continue;
                }
                for j in i + 1..k {
                    if let (Some(l), Some(r)) =
                        (brute(g, forms, i, j, left), brute(g, forms, j, k, right))
                    {
                        let total = l + r + logp;
                        best = Some(best.map_or(total, |b: f64| b.max(total)));
                    }
                }
            }
        }
        best
    }

    let words = ["a", "b"];
    let mut agreements = 0;
    for n in 1..=6usize {
        for mask in 0..(1usize << n) {
            let forms: Vec<&str> = (0..n).map(|i| words[(mask >> i) & 1]).collect();
            let sentence = Sentence::from_forms(&forms).unwrap();
            let viterbi = viterbi_logprob(&grammar, &sentence);
            let brute_best = brute(&grammar, &forms, 0, n, "S");
            match (viterbi, brute_best) {
                (None, None) => {}
                (Some(v), Some(b)) if (v - b).abs() < 1e-12 => agreements += 1,
                other => {
                    return fail(
                        "chart parser",
                        format!("{forms:?}: viterbi vs enumeration {other:?}"),
                    )
                }
            }
        }
    }

    // Unambiguous PCFG: induce from 100 generated trees, reparse exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut entries = Vec::new();
    for i in 0..100 {
        entries.push(((i + 1).to_string(), sample_unambiguous(&mut rng)));
    }
    let corpus = Corpus::new(entries).unwrap();
    let induced = induce_grammar(&corpus, &InduceConfig::default()).expect("continuous");
    let mut exact = 0;
    for (_, tree) in corpus.iter() {
        let (parsed, status) = cky_parse(&induced, tree.sentence());
        if status == ParseStatus::Parsed && parsed.same_structure(tree) {
            exact += 1;
        }
    }
    checked(
        "chart parser",
        exact == 100,
        format!(
            "Viterbi = enumeration on {agreements} parseable charts (n <= 6); exact recovery {exact}/100"
        ),
    )
}

/// Samples from a PCFG in which every sentence has a unique parse:
/// S -> NP VP, NP -> Det N | alice | bob, VP -> V NP.
fn sample_unambiguous(rng: &mut ChaCha8Rng) -> ConstTree {
    let mut forms: Vec<String> = Vec::new();
    let mut builder = TreeBuilder::new();
    let s = builder.node("S").unwrap();
    let mut noun_phrase = |builder: &mut TreeBuilder, forms: &mut Vec<String>, rng: &mut ChaCha8Rng| {
        let np = builder.node("NP").unwrap();
        if rng.gen_bool(0.5) {
            let det = builder.node("Det").unwrap();
            builder.child_leaf(det, forms.len());
            forms.push(if rng.gen_bool(0.5) { "the" } else { "a" }.to_string());
            let n = builder.node("N").unwrap();
            builder.child_leaf(n, forms.len());
            forms.push(if rng.gen_bool(0.5) { "cat" } else { "dog" }.to_string());
            builder.child_node(np, det);
            builder.child_node(np, n);
        } else {
            builder.child_leaf(np, forms.len());
            forms.push(if rng.gen_bool(0.5) { "alice" } else { "bob" }.to_string());
        }
        np
    };
    let subject = noun_phrase(&mut builder, &mut forms, rng);
    let vp = builder.node("VP").unwrap();
    let v = builder.node("V").unwrap();
    builder.child_leaf(v, forms.len());
    forms.push(if rng.gen_bool(0.5) { "sees" } else { "likes" }.to_string());
    let object = noun_phrase(&mut builder, &mut forms, rng);
    builder.child_node(vp, v);
    builder.child_node(vp, object);
    builder.child_node(s, subject);
    builder.child_node(s, vp);
    let sentence = Sentence::from_forms(&forms).unwrap();
    builder.build(s, sentence).unwrap()
}

// 10. The assembled reduction with every stage predicted: pointer, chart
//     parser over the rearranged sentences, exact inverse mapping.
fn criterion_10_end_to_end(trained: Option<&Trained>) -> Outcome {
    let Some(trained) = trained else {
        return fail("end-to-end reduction", "no trained model".into());
    };
    let test_corpus = load_data("test.export");

    // Grammar from the converted (gold-arranged) training treebank.
    let mut cont_entries = Vec::new();
    for (id, tree) in trained.train.iter() {
        let p = cca_permutation(tree);
        cont_entries.push((id.to_string(), permute_tree(tree, &p).expect("continuous")));
    }
    let cont_train = Corpus::new(cont_entries).unwrap();
    let grammar = induce_grammar(&cont_train, &InduceConfig::default()).expect("induces");

    let mut restored_entries = Vec::new();
    let mut fallbacks = 0;
    for (id, tree) in test_corpus.iter() {
        let enc = trained
            .model
            .encode(tree.sentence(), None, None)
            .expect("encodes");
        let (perm, _mask) = decode(&trained.model, &enc, DecodeMode::Greedy, true);
        let reordered = permute_sentence(tree.sentence(), &perm).expect("lengths match");
        let (parsed, status) = cky_parse(&grammar, &reordered);
        if status == ParseStatus::Fallback {
            fallbacks += 1;
        }
        let restored = restore_discontinuous(&parsed, &perm).expect("restores");
        restored_entries.push((id.to_string(), restored));
    }
    let restored = Corpus::new(restored_entries).unwrap();
    let scores = bracket_scores(&restored, &test_corpus, &EvalConfig::default()).expect("aligned");
    checked(
        "end-to-end reduction",
        scores.f1 >= 90.0 && scores.disc_f1 > 0.0,
        format!(
            "F1 {:.2} (>= 90), DF1 {:.2} (> 0), {} fallback parses / {}",
            scores.f1,
            scores.disc_f1,
            fallbacks,
            test_corpus.len()
        ),
    )
}

fn pass(name: &'static str, detail: String) -> Outcome {
    Outcome {
        name,
        passed: true,
        detail,
    }
}

fn fail(name: &'static str, detail: String) -> Outcome {
    Outcome {
        name,
        passed: false,
        detail,
    }
}

fn checked(name: &'static str, ok: bool, detail: String) -> Outcome {
    Outcome {
        name,
        passed: ok,
        detail,
    }
}
