//! Batch pipeline: convert, train, reorder, parse, restore, eval, bench,
//! and synth subcommands over treebank files, permutation sidecars, model
//! checkpoints, and grammar files.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::cparser::{self, Grammar, InduceConfig, ParseStatus};
use crate::metrics::{bracket_scores, reorder_scores, EvalConfig, Scores};
use crate::pointer::{
    self, DecodeMode, ExternalVectors, ModelConfig, PointerError, PointerModel, TrainConfig,
    Vocab,
};
use crate::reorder::{
    cca_permutation, permute_sentence, permute_tree, read_sidecar, restore_discontinuous,
    write_sidecar, Permutation,
};
use crate::synth::{particle_corpus, SynthConfig};
use crate::treebank::{read_corpus, write_corpus, ConstTree, Corpus, Format, Sentence};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable config, missing input paths. Exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Malformed or inconsistent data. Exit code 2.
    #[error("{0}")]
    Data(String),
    /// Non-finite numbers during training or scoring. Exit code 3.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<PointerError> for CliError {
    fn from(e: PointerError) -> Self {
        match e {
            PointerError::Numeric(msg) => CliError::Numeric(msg),
            PointerError::Config(msg) => CliError::Usage(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "uncross",
    version,
    about = "Discontinuous constituent parsing by reversible token reordering"
)]
pub struct Cli {
    /// TOML config file; explicit command-line flags win over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rearrange a discontinuous treebank into continuous trees plus a
    /// permutation sidecar holding the gold arrangements.
    Convert(ConvertArgs),
    /// Fit the pointer model on converted data, selecting by dev LAS.
    Train(TrainArgs),
    /// Predict arrangements for raw sentences with a trained model.
    Reorder(ReorderArgs),
    /// Parse reordered token lines with the internal chart parser or
    /// ingest an external parser's output.
    Parse(ParseArgs),
    /// Turn bracket trees plus a permutation sidecar back into
    /// discontinuous trees.
    Restore(RestoreArgs),
    /// Score predictions against gold.
    Eval(EvalArgs),
    /// Time the reorder -> parse -> restore path end to end.
    Bench(BenchArgs),
    /// Generate the deterministic synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Input treebank.
    #[arg(long)]
    pub input: PathBuf,
    /// Input format: export, discbracket, or bracket.
    #[arg(long, default_value = "export")]
    pub from: Format,
    /// Continuous trees with explicit indices.
    #[arg(long)]
    pub out_discbracket: Option<PathBuf>,
    /// Continuous trees in bracket format.
    #[arg(long)]
    pub out_bracket: Option<PathBuf>,
    /// Gold arrangement sidecar.
    #[arg(long)]
    pub out_sidecar: Option<PathBuf>,
    /// Reordered sentences, one token line each.
    #[arg(long)]
    pub out_tokens: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long, default_value = "export")]
    pub from: Format,
    /// Checkpoint output path.
    #[arg(long)]
    pub model_out: PathBuf,
    /// Fixed external vector sidecar.
    #[arg(long)]
    pub ext_vectors: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub labeller_weight: Option<f64>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub char_dim: Option<usize>,
    #[arg(long)]
    pub conv_filters: Option<usize>,
    #[arg(long)]
    pub enc_hidden: Option<usize>,
    #[arg(long)]
    pub enc_layers: Option<usize>,
    #[arg(long)]
    pub dec_hidden: Option<usize>,
    #[arg(long)]
    pub ptr_mlp: Option<usize>,
    #[arg(long)]
    pub lab_mlp: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReorderArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "export")]
    pub from: Format,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out_sidecar: PathBuf,
    #[arg(long)]
    pub out_tokens: Option<PathBuf>,
    /// Beam width; greedy when absent.
    #[arg(long)]
    pub beam: Option<usize>,
    /// Derive relocation flags from the permutation instead of the
    /// labeller.
    #[arg(long)]
    pub pointer_only: bool,
    #[arg(long)]
    pub ext_vectors: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Token lines to parse, one sentence per line.
    #[arg(long)]
    pub tokens: PathBuf,
    /// Existing grammar file.
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Induce a grammar from this continuous treebank (discbracket or
    /// bracket).
    #[arg(long)]
    pub induce_from: Option<PathBuf>,
    #[arg(long, default_value = "discbracket")]
    pub induce_format: Format,
    #[arg(long)]
    pub save_grammar: Option<PathBuf>,
    /// External parser output to ingest instead of parsing internally.
    #[arg(long)]
    pub bridge_in: Option<PathBuf>,
    /// Bracket trees out, aligned with the token lines.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RestoreArgs {
    /// Bracket trees over reordered sentences.
    #[arg(long)]
    pub trees: PathBuf,
    /// Arrangement sidecar written by convert or reorder.
    #[arg(long)]
    pub sidecar: PathBuf,
    #[arg(long, default_value = "export")]
    pub to: Format,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = "export")]
    pub gold_format: Format,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "export")]
    pub pred_format: Format,
    /// Predicted arrangements; enables UAS/LAS and relocation metrics
    /// (gold arrangements come from the gold trees).
    #[arg(long)]
    pub pred_sidecar: Option<PathBuf>,
    #[arg(long)]
    pub keep_punctuation: bool,
    #[arg(long)]
    pub strip_suffixes: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Gold treebank driving the benchmark.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "export")]
    pub from: Format,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub induce_from: Option<PathBuf>,
    #[arg(long, default_value = "discbracket")]
    pub induce_format: Format,
    /// Write the restored predictions and sidecar here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also score the restored trees against the input.
    #[arg(long)]
    pub eval: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub sentences: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 6)]
    pub min_len: usize,
    #[arg(long, default_value_t = 12)]
    pub max_len: usize,
}

/// Optional TOML file mirroring the command-line surface; explicit flags
/// override these values, which override the built-in defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub model: ModelSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub ignore_punctuation: Option<bool>,
    pub punctuation_tags: Option<Vec<String>>,
    pub punctuation_forms: Option<Vec<String>>,
    pub root_labels: Option<Vec<String>>,
    pub strip_function_suffixes: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub batch_size: Option<usize>,
    pub decay_rate: Option<f64>,
    pub grad_clip: Option<f64>,
    pub unk_prob: Option<f64>,
    pub unk_flat: Option<bool>,
    pub beam_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub labeller_weight: Option<f64>,
    pub masked_softmax: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub word_dim: Option<usize>,
    pub char_dim: Option<usize>,
    pub conv_window: Option<usize>,
    pub conv_filters: Option<usize>,
    pub enc_hidden: Option<usize>,
    pub enc_layers: Option<usize>,
    pub dec_hidden: Option<usize>,
    pub ptr_mlp: Option<usize>,
    pub lab_mlp: Option<usize>,
    pub dropout: Option<f64>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file_cfg = match &cli.config {
        Some(path) => {
            let text = read_text(path)?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Convert(args) => convert(args),
        Command::Train(args) => do_train(args, &file_cfg),
        Command::Reorder(args) => do_reorder(args, &file_cfg),
        Command::Parse(args) => do_parse(args, &file_cfg),
        Command::Restore(args) => do_restore(args),
        Command::Eval(args) => do_eval(args, &file_cfg),
        Command::Bench(args) => do_bench(args, &file_cfg),
        Command::Synth(args) => do_synth(args, &file_cfg),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Data(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_treebank(path: &Path, format: Format) -> Result<Corpus, CliError> {
    let text = read_text(path)?;
    read_corpus(&text, format).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn gold_pairs(corpus: &Corpus) -> Vec<(String, Permutation)> {
    corpus
        .iter()
        .map(|(id, tree)| (id.to_string(), cca_permutation(tree)))
        .collect()
}

fn convert(args: ConvertArgs) -> Result<(), CliError> {
    let corpus = read_treebank(&args.input, args.from)?;
    let perms = gold_pairs(&corpus);
    let mut permuted_entries = Vec::with_capacity(corpus.len());
    let mut token_lines = String::new();
    for ((id, tree), (_, perm)) in corpus.iter().zip(&perms) {
        let permuted = permute_tree(tree, perm)
            .map_err(|e| CliError::Data(format!("sentence {id:?}: {e}")))?;
        let forms: Vec<&str> = permuted.sentence().forms().collect();
        token_lines.push_str(&forms.join(" "));
        token_lines.push('\n');
        permuted_entries.push((id.to_string(), permuted));
    }
    let permuted = Corpus::new(permuted_entries).map_err(|e| CliError::Data(e.to_string()))?;

    if let Some(path) = &args.out_discbracket {
        let text = write_corpus(&permuted, Format::Discbracket)
            .map_err(|e| CliError::Data(e.to_string()))?;
        write_text(path, &text)?;
    }
    if let Some(path) = &args.out_bracket {
        let text = write_corpus(&permuted, Format::Bracket)
            .map_err(|e| CliError::Data(e.to_string()))?;
        write_text(path, &text)?;
    }
    if let Some(path) = &args.out_sidecar {
        write_text(path, &write_sidecar(&perms))?;
    }
    if let Some(path) = &args.out_tokens {
        write_text(path, &token_lines)?;
    }
    let relocated: usize = perms.iter().map(|(_, p)| p.relocated_mask().count()).sum();
    let tokens: usize = perms.iter().map(|(_, p)| p.n()).sum();
    println!(
        "converted {} sentences ({} tokens, {:.2}% relocated)",
        corpus.len(),
        tokens,
        100.0 * relocated as f64 / tokens.max(1) as f64
    );
    Ok(())
}

fn model_config(args: &TrainArgs, file: &FileConfig, ext_dim: Option<usize>) -> ModelConfig {
    let defaults = ModelConfig::default();
    let m = &file.model;
    ModelConfig {
        word_dim: args.word_dim.or(m.word_dim).unwrap_or(defaults.word_dim),
        char_dim: args.char_dim.or(m.char_dim).unwrap_or(defaults.char_dim),
        conv_window: m.conv_window.unwrap_or(defaults.conv_window),
        conv_filters: args
            .conv_filters
            .or(m.conv_filters)
            .unwrap_or(defaults.conv_filters),
        enc_hidden: args.enc_hidden.or(m.enc_hidden).unwrap_or(defaults.enc_hidden),
        enc_layers: args.enc_layers.or(m.enc_layers).unwrap_or(defaults.enc_layers),
        dec_hidden: args.dec_hidden.or(m.dec_hidden).unwrap_or(defaults.dec_hidden),
        ptr_mlp: args.ptr_mlp.or(m.ptr_mlp).unwrap_or(defaults.ptr_mlp),
        lab_mlp: args.lab_mlp.or(m.lab_mlp).unwrap_or(defaults.lab_mlp),
        ext_dim,
        dropout: args.dropout.or(m.dropout).unwrap_or(defaults.dropout),
    }
}

fn train_config(args: &TrainArgs, file: &FileConfig) -> TrainConfig {
    let d = TrainConfig::default();
    let t = &file.train;
    TrainConfig {
        learning_rate: args
            .learning_rate
            .or(t.learning_rate)
            .unwrap_or(d.learning_rate),
        beta1: t.beta1.unwrap_or(d.beta1),
        beta2: t.beta2.unwrap_or(d.beta2),
        eps: d.eps,
        batch_size: args.batch_size.or(t.batch_size).unwrap_or(d.batch_size),
        decay_rate: t.decay_rate.unwrap_or(d.decay_rate),
        grad_clip: t.grad_clip.unwrap_or(d.grad_clip),
        unk_prob: t.unk_prob.unwrap_or(d.unk_prob),
        unk_flat: t.unk_flat.unwrap_or(d.unk_flat),
        beam_size: t.beam_size.unwrap_or(d.beam_size),
        max_epochs: args.epochs.or(t.max_epochs).unwrap_or(d.max_epochs),
        patience: args.patience.or(t.patience).unwrap_or(d.patience),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        labeller_weight: args
            .labeller_weight
            .or(t.labeller_weight)
            .unwrap_or(d.labeller_weight),
        masked_softmax: t.masked_softmax.unwrap_or(d.masked_softmax),
    }
}

fn eval_config(args: &EvalArgs, file: &FileConfig) -> EvalConfig {
    let mut cfg = EvalConfig::default();
    let section = &file.eval;
    if let Some(v) = section.ignore_punctuation {
        cfg.ignore_punctuation = v;
    }
    if let Some(tags) = &section.punctuation_tags {
        cfg.punctuation_tags = tags.iter().cloned().collect::<HashSet<_>>();
    }
    if let Some(forms) = &section.punctuation_forms {
        cfg.punctuation_forms = forms.iter().cloned().collect::<HashSet<_>>();
    }
    if let Some(roots) = &section.root_labels {
        cfg.ignore_root_labels = roots.iter().cloned().collect::<HashSet<_>>();
    }
    if let Some(v) = section.strip_function_suffixes {
        cfg.strip_function_suffixes = v;
    }
    if args.keep_punctuation {
        cfg.ignore_punctuation = false;
    }
    if args.strip_suffixes {
        cfg.strip_function_suffixes = true;
    }
    cfg
}

fn load_ext(path: &Option<PathBuf>) -> Result<Option<ExternalVectors>, CliError> {
    match path {
        Some(p) => {
            let text = read_text(p)?;
            Ok(Some(ExternalVectors::parse(&text).map_err(CliError::from)?))
        }
        None => Ok(None),
    }
}

fn do_train(args: TrainArgs, file: &FileConfig) -> Result<(), CliError> {
    let train_corpus = read_treebank(&args.train, args.from)?;
    let dev_corpus = read_treebank(&args.dev, args.from)?;
    let ext = load_ext(&args.ext_vectors)?;
    let tcfg = train_config(&args, file);
    let mcfg = model_config(&args, file, ext.as_ref().map(|e| e.dim()));
    let vocab = Vocab::build(train_corpus.iter().map(|(_, t)| t.sentence()));
    let model = PointerModel::new(mcfg, vocab, tcfg.seed).map_err(CliError::from)?;
    println!(
        "training on {} sentences ({} parameters), dev {}",
        train_corpus.len(),
        model.params().n_scalars(),
        dev_corpus.len()
    );
    let outcome = pointer::train(&train_corpus, &dev_corpus, &tcfg, model, ext.as_ref())?;
    for s in &outcome.history {
        println!(
            "epoch {:3}  loss {:.4}  dev_uas {:.2}  dev_las {:.2}  lr {:.6}",
            s.epoch, s.train_loss, s.dev_uas, s.dev_las, s.learning_rate
        );
    }
    println!("best epoch: {}", outcome.best_epoch);
    let bytes = pointer::save(&outcome.model);
    if let Some(parent) = args.model_out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Data(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    fs::write(&args.model_out, bytes).map_err(|e| {
        CliError::Data(format!("cannot write {}: {e}", args.model_out.display()))
    })?;
    println!("saved model to {}", args.model_out.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<PointerModel, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    pointer::load(&bytes).map_err(CliError::from)
}

/// Index-chunked parallel map with deterministic output order.
fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let mut out: Vec<Vec<R>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|slice| scope.spawn(|| slice.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        out = handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect();
    });
    out.into_iter().flatten().collect()
}

fn predict_corpus(
    model: &PointerModel,
    corpus: &Corpus,
    mode: DecodeMode,
    use_labeller: bool,
    ext: Option<&ExternalVectors>,
    workers: usize,
) -> Result<Vec<(String, Permutation)>, CliError> {
    let inputs: Vec<(String, Sentence)> = corpus
        .iter()
        .map(|(id, t)| (id.to_string(), t.sentence().clone()))
        .collect();
    let results = parallel_map(&inputs, workers, |(id, sentence)| {
        let vectors = match ext {
            Some(table) => Some(table.for_sentence(id, sentence.n())?),
            None => None,
        };
        let enc = model.encode(sentence, vectors.as_deref(), None)?;
        let (perm, _mask) = pointer::decode(model, &enc, mode, use_labeller);
        Ok::<_, PointerError>((id.clone(), perm))
    });
    results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::from)
}

fn do_reorder(args: ReorderArgs, file: &FileConfig) -> Result<(), CliError> {
    let corpus = read_treebank(&args.input, args.from)?;
    let model = load_model(&args.model)?;
    let ext = load_ext(&args.ext_vectors)?;
    let mode = match args.beam {
        Some(k) => DecodeMode::Beam(k),
        None => DecodeMode::Greedy,
    };
    let workers = args.workers.or(file.workers).unwrap_or(1);
    let preds = predict_corpus(
        &model,
        &corpus,
        mode,
        !args.pointer_only,
        ext.as_ref(),
        workers,
    )?;
    write_text(&args.out_sidecar, &write_sidecar(&preds))?;
    if let Some(path) = &args.out_tokens {
        let mut lines = String::new();
        for ((_, tree), (_, perm)) in corpus.iter().zip(&preds) {
            let permuted = permute_sentence(tree.sentence(), perm)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let forms: Vec<&str> = permuted.forms().collect();
            lines.push_str(&forms.join(" "));
            lines.push('\n');
        }
        write_text(path, &lines)?;
    }
    println!("reordered {} sentences", corpus.len());
    Ok(())
}

fn read_token_lines(path: &Path) -> Result<Vec<(String, Sentence)>, CliError> {
    let text = read_text(path)?;
    let mut out: Vec<(String, Sentence)> = Vec::new();
    for (lineno0, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let forms: Vec<&str> = line.split_whitespace().collect();
        let sentence = Sentence::from_forms(&forms).map_err(|e| {
            CliError::Data(format!("{} line {}: {e}", path.display(), lineno0 + 1))
        })?;
        out.push(((out.len() + 1).to_string(), sentence));
    }
    Ok(out)
}

fn obtain_grammar(
    grammar: &Option<PathBuf>,
    induce_from: &Option<PathBuf>,
    induce_format: Format,
    save_grammar: &Option<PathBuf>,
) -> Result<Grammar, CliError> {
    let g = match (grammar, induce_from) {
        (Some(path), _) => {
            let text = read_text(path)?;
            Grammar::from_text(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        (None, Some(path)) => {
            let corpus = read_treebank(path, induce_format)?;
            cparser::induce_grammar(&corpus, &InduceConfig::default())
                .map_err(|e| CliError::Data(e.to_string()))?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "either --grammar or --induce-from is required".into(),
            ))
        }
    };
    if let Some(path) = save_grammar {
        write_text(path, &g.to_text())?;
    }
    Ok(g)
}

fn do_parse(args: ParseArgs, file: &FileConfig) -> Result<(), CliError> {
    let sentences = read_token_lines(&args.tokens)?;
    if let Some(bridge) = &args.bridge_in {
        let text = read_text(bridge)?;
        let corpus = cparser::bridge_read(&text, &sentences)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let out =
            write_corpus(&corpus, Format::Bracket).map_err(|e| CliError::Data(e.to_string()))?;
        write_text(&args.out, &out)?;
        println!("ingested {} externally parsed sentences", corpus.len());
        return Ok(());
    }
    let grammar = obtain_grammar(
        &args.grammar,
        &args.induce_from,
        args.induce_format,
        &args.save_grammar,
    )?;
    let workers = args.workers.or(file.workers).unwrap_or(1);
    let parses = parallel_map(&sentences, workers, |(_, sentence)| {
        cparser::cky_parse(&grammar, sentence)
    });
    let fallbacks = parses
        .iter()
        .filter(|(_, s)| *s == ParseStatus::Fallback)
        .count();
    let entries: Vec<(String, ConstTree)> = sentences
        .iter()
        .zip(parses)
        .map(|((id, _), (tree, _))| (id.clone(), tree))
        .collect();
    let corpus = Corpus::new(entries).map_err(|e| CliError::Data(e.to_string()))?;
    let out = write_corpus(&corpus, Format::Bracket).map_err(|e| CliError::Data(e.to_string()))?;
    write_text(&args.out, &out)?;
    println!(
        "parsed {} sentences ({} flat fallbacks)",
        corpus.len(),
        fallbacks
    );
    Ok(())
}

fn do_restore(args: RestoreArgs) -> Result<(), CliError> {
    if args.to == Format::Bracket {
        return Err(CliError::Usage(
            "restore targets export or discbracket; bracket cannot encode discontinuity".into(),
        ));
    }
    let trees = read_treebank(&args.trees, Format::Bracket)?;
    let sidecar_text = read_text(&args.sidecar)?;
    let sidecar = read_sidecar(&sidecar_text).map_err(|e| CliError::Data(e.to_string()))?;
    if trees.len() != sidecar.len() {
        return Err(CliError::Data(format!(
            "{} trees but {} sidecar lines",
            trees.len(),
            sidecar.len()
        )));
    }
    let mut entries = Vec::with_capacity(trees.len());
    for ((_, tree), (id, perm)) in trees.iter().zip(&sidecar) {
        let restored = restore_discontinuous(tree, perm)
            .map_err(|e| CliError::Data(format!("sentence {id:?}: {e}")))?;
        entries.push((id.clone(), restored));
    }
    let corpus = Corpus::new(entries).map_err(|e| CliError::Data(e.to_string()))?;
    let text = write_corpus(&corpus, args.to).map_err(|e| CliError::Data(e.to_string()))?;
    write_text(&args.out, &text)?;
    println!("restored {} sentences", corpus.len());
    Ok(())
}

fn do_eval(args: EvalArgs, file: &FileConfig) -> Result<(), CliError> {
    let gold = read_treebank(&args.gold, args.gold_format)?;
    let pred = read_treebank(&args.pred, args.pred_format)?;
    let cfg = eval_config(&args, file);
    let bracket =
        bracket_scores(&pred, &gold, &cfg).map_err(|e| CliError::Data(e.to_string()))?;
    let reorder = match &args.pred_sidecar {
        Some(path) => {
            let text = read_text(path)?;
            let sidecar = read_sidecar(&text).map_err(|e| CliError::Data(e.to_string()))?;
            let gold_arr: Vec<_> = gold
                .iter()
                .map(|(_, t)| {
                    let p = cca_permutation(t);
                    let m = p.relocated_mask();
                    (p, m)
                })
                .collect();
            let pred_arr: Vec<_> = sidecar
                .into_iter()
                .map(|(_, p)| {
                    let m = p.relocated_mask();
                    (p, m)
                })
                .collect();
            Some(reorder_scores(&pred_arr, &gold_arr).map_err(|e| CliError::Data(e.to_string()))?)
        }
        None => None,
    };
    let merged = Scores::merged(Some(&bracket), reorder.as_ref());
    print!("{}", merged.table());
    print!("{}", merged.kv_lines());
    Ok(())
}

fn do_bench(args: BenchArgs, file: &FileConfig) -> Result<(), CliError> {
    let corpus = read_treebank(&args.input, args.from)?;
    let model = load_model(&args.model)?;
    let grammar = obtain_grammar(&args.grammar, &args.induce_from, args.induce_format, &None)?;
    let workers = args.workers.or(file.workers).unwrap_or(1);
    let mode = match args.beam {
        Some(k) => DecodeMode::Beam(k),
        None => DecodeMode::Greedy,
    };
    let n = corpus.len();

    let t0 = Instant::now();
    let preds = predict_corpus(&model, &corpus, mode, true, None, workers)?;
    let reorder_time = t0.elapsed();

    let t1 = Instant::now();
    let reordered: Vec<(String, Sentence)> = corpus
        .iter()
        .zip(&preds)
        .map(|((id, tree), (_, perm))| {
            permute_sentence(tree.sentence(), perm)
                .map(|s| (id.to_string(), s))
                .map_err(|e| CliError::Data(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let parses = parallel_map(&reordered, workers, |(_, sentence)| {
        cparser::cky_parse(&grammar, sentence).0
    });
    let parse_time = t1.elapsed();

    let t2 = Instant::now();
    let mut restored_entries = Vec::with_capacity(n);
    for (((id, _), tree), (_, perm)) in reordered.iter().zip(parses).zip(&preds) {
        let restored = restore_discontinuous(&tree, perm)
            .map_err(|e| CliError::Data(format!("sentence {id:?}: {e}")))?;
        restored_entries.push((id.clone(), restored));
    }
    let restore_time = t2.elapsed();
    let total = t0.elapsed();

    let restored = Corpus::new(restored_entries).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(dir) = &args.out_dir {
        let export =
            write_corpus(&restored, Format::Export).map_err(|e| CliError::Data(e.to_string()))?;
        write_text(&dir.join("pred.export"), &export)?;
        write_text(&dir.join("pred.tsv"), &write_sidecar(&preds))?;
    }

    let secs = total.as_secs_f64();
    println!("sentences        {n}");
    println!("reorder          {:.3}s", reorder_time.as_secs_f64());
    println!("parse            {:.3}s", parse_time.as_secs_f64());
    println!("restore          {:.3}s", restore_time.as_secs_f64());
    println!("total            {:.3}s", secs);
    println!("sent/s           {:.1}", n as f64 / secs.max(1e-9));
    if args.eval {
        let scores = bracket_scores(&restored, &corpus, &EvalConfig::default())
            .map_err(|e| CliError::Data(e.to_string()))?;
        print!("{}", scores.kv_lines());
    }
    Ok(())
}

fn do_synth(args: SynthArgs, file: &FileConfig) -> Result<(), CliError> {
    if args.min_len < 4 || args.max_len < args.min_len {
        return Err(CliError::Usage(
            "sentence lengths must satisfy 4 <= min_len <= max_len".into(),
        ));
    }
    let cfg = SynthConfig {
        sentences: args.sentences,
        min_len: args.min_len,
        max_len: args.max_len,
        ..Default::default()
    };
    let corpus = particle_corpus(&cfg, args.seed.or(file.seed).unwrap_or(42));
    let text =
        write_corpus(&corpus, Format::Export).map_err(|e| CliError::Data(e.to_string()))?;
    write_text(&args.out, &text)?;
    println!(
        "wrote {} synthetic sentences to {}",
        corpus.len(),
        args.out.display()
    );
    Ok(())
}
