//! The pointer model: a character-convolution + word-embedding encoder
//! stack of bidirectional LSTMs, a one-layer LSTM decoder, and biaffine
//! scorers for positions (attention) and relocation flags.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::treebank::Sentence;

use super::layers::{apply_mask, dropout_mask, CharCnn, CharCnnCache, Lstm, LstmTrace, Mlp};
use super::tensor::{dot, glorot, GradStore, ParamId, ParamStore, Tensor};
use super::vocab::Vocab;
use super::PointerError;

/// Architecture dimensions. The defaults are the full-size configuration;
/// tests and desk-scale runs shrink them through the same fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub char_dim: usize,
    pub conv_window: usize,
    pub conv_filters: usize,
    /// Hidden size per direction of the bidirectional encoder.
    pub enc_hidden: usize,
    pub enc_layers: usize,
    pub dec_hidden: usize,
    /// Transform size of the position scorer.
    pub ptr_mlp: usize,
    /// Transform size of the relocation labeller.
    pub lab_mlp: usize,
    /// Dimension of fixed external vectors, when a sidecar is used.
    pub ext_dim: Option<usize>,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 100,
            char_dim: 100,
            conv_window: 3,
            conv_filters: 50,
            enc_hidden: 512,
            enc_layers: 3,
            dec_hidden: 512,
            ptr_mlp: 512,
            lab_mlp: 128,
            ext_dim: None,
            dropout: 0.33,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), PointerError> {
        let positive = [
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("conv_window", self.conv_window),
            ("conv_filters", self.conv_filters),
            ("enc_hidden", self.enc_hidden),
            ("enc_layers", self.enc_layers),
            ("dec_hidden", self.dec_hidden),
            ("ptr_mlp", self.ptr_mlp),
            ("lab_mlp", self.lab_mlp),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(PointerError::Config(format!("{name} must be positive")));
            }
        }
        if self.conv_window % 2 == 0 {
            return Err(PointerError::Config("conv_window must be odd".into()));
        }
        if self.ext_dim == Some(0) {
            return Err(PointerError::Config("ext_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(PointerError::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.word_dim + self.conv_filters + self.ext_dim.unwrap_or(0)
    }

    /// Encoder output size per position (both directions).
    pub fn enc_out(&self) -> usize {
        2 * self.enc_hidden
    }
}

/// One encoder hidden state per token position.
#[derive(Debug, Clone)]
pub struct EncoderStates {
    pub h: Vec<Vec<f64>>,
}

impl EncoderStates {
    pub fn n(&self) -> usize {
        self.h.len()
    }
}

/// Bilinear-plus-linear scorer over a pair of transformed vectors.
#[derive(Debug, Clone, Copy)]
pub(super) struct Biaffine {
    w: ParamId,
    u: ParamId,
    v: ParamId,
    b: ParamId,
    dim: usize,
}

impl Biaffine {
    fn register(store: &mut ParamStore, name: &str, dim: usize, rng: &mut impl Rng) -> Self {
        Biaffine {
            w: store.register(&format!("{name}.w"), glorot(dim, dim, rng)),
            u: store.register(&format!("{name}.u"), Tensor::zeros(dim, 1)),
            v: store.register(&format!("{name}.v"), Tensor::zeros(dim, 1)),
            b: store.register(&format!("{name}.b"), Tensor::zeros(1, 1)),
            dim,
        }
    }

    pub fn score(&self, params: &ParamStore, a: &[f64], bv: &[f64]) -> f64 {
        let mut wb = vec![0.0; self.dim];
        params.get(self.w).matvec(bv, &mut wb);
        dot(a, &wb)
            + dot(&params.get(self.u).data, a)
            + dot(&params.get(self.v).data, bv)
            + params.get(self.b).data[0]
    }

    pub fn backward(
        &self,
        params: &ParamStore,
        grads: &mut GradStore,
        a: &[f64],
        bv: &[f64],
        d: f64,
        da_acc: &mut [f64],
        db_acc: &mut [f64],
    ) {
        if d == 0.0 {
            return;
        }
        let scaled_a: Vec<f64> = a.iter().map(|x| x * d).collect();
        grads.get_mut(self.w).outer_acc(&scaled_a, bv);
        for (g, &x) in grads.get_mut(self.u).data.iter_mut().zip(a) {
            *g += d * x;
        }
        for (g, &x) in grads.get_mut(self.v).data.iter_mut().zip(bv) {
            *g += d * x;
        }
        grads.get_mut(self.b).data[0] += d;
        // da += d (W b + U), db += d (W^T a + V)
        let w = params.get(self.w);
        let mut wb = vec![0.0; self.dim];
        w.matvec(bv, &mut wb);
        for (acc, (&wbv, &uv)) in da_acc
            .iter_mut()
            .zip(wb.iter().zip(&params.get(self.u).data))
        {
            *acc += d * (wbv + uv);
        }
        w.matvec_t_acc(&scaled_a, db_acc);
        for (acc, &vv) in db_acc.iter_mut().zip(&params.get(self.v).data) {
            *acc += d * vv;
        }
    }
}

pub struct PointerModel {
    pub(super) cfg: ModelConfig,
    pub(super) vocab: Vocab,
    pub(super) params: ParamStore,
    pub(super) word_emb: ParamId,
    pub(super) char_cnn: CharCnn,
    pub(super) enc: Vec<(Lstm, Lstm)>,
    pub(super) dec: Lstm,
    pub(super) init_w: ParamId,
    pub(super) init_b: ParamId,
    pub(super) g1: Mlp,
    pub(super) g2: Mlp,
    pub(super) ptr: Biaffine,
    pub(super) l1: Mlp,
    pub(super) l2: Mlp,
    pub(super) lab: Biaffine,
}

impl PointerModel {
    pub fn new(cfg: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self, PointerError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let word_emb = params.register(
            "word_emb",
            glorot(vocab.n_words(), cfg.word_dim, &mut rng),
        );
        let char_cnn = CharCnn::register(
            &mut params,
            "char_cnn",
            vocab.n_chars(),
            cfg.char_dim,
            cfg.conv_window,
            cfg.conv_filters,
            &mut rng,
        );
        let mut enc = Vec::with_capacity(cfg.enc_layers);
        for layer in 0..cfg.enc_layers {
            let in_dim = if layer == 0 { cfg.input_dim() } else { cfg.enc_out() };
            let fwd = Lstm::register(
                &mut params,
                &format!("enc{layer}.fwd"),
                in_dim,
                cfg.enc_hidden,
                &mut rng,
            );
            let bwd = Lstm::register(
                &mut params,
                &format!("enc{layer}.bwd"),
                in_dim,
                cfg.enc_hidden,
                &mut rng,
            );
            enc.push((fwd, bwd));
        }
        let dec = Lstm::register(&mut params, "dec", cfg.enc_out(), cfg.dec_hidden, &mut rng);
        let init_w = params.register(
            "dec_init.w",
            glorot(cfg.dec_hidden, cfg.enc_out(), &mut rng),
        );
        let init_b = params.register("dec_init.b", Tensor::zeros(cfg.dec_hidden, 1));
        let g1 = Mlp::register(&mut params, "g1", cfg.dec_hidden, cfg.ptr_mlp, &mut rng);
        let g2 = Mlp::register(&mut params, "g2", cfg.enc_out(), cfg.ptr_mlp, &mut rng);
        let ptr = Biaffine::register(&mut params, "ptr", cfg.ptr_mlp, &mut rng);
        let l1 = Mlp::register(&mut params, "l1", cfg.dec_hidden, cfg.lab_mlp, &mut rng);
        let l2 = Mlp::register(&mut params, "l2", cfg.enc_out(), cfg.lab_mlp, &mut rng);
        let lab = Biaffine::register(&mut params, "lab", cfg.lab_mlp, &mut rng);
        let model = PointerModel {
            cfg,
            vocab,
            params,
            word_emb,
            char_cnn,
            enc,
            dec,
            init_w,
            init_b,
            g1,
            g2,
            ptr,
            l1,
            l2,
            lab,
        };
        model.audit_shapes();
        Ok(model)
    }

    /// Every registered tensor must have the shape the configuration
    /// implies; runs once per construction and after checkpoint load.
    pub(super) fn audit_shapes(&self) {
        let cfg = &self.cfg;
        let expect = |id: ParamId, rows: usize, cols: usize, what: &str| {
            let t = self.params.get(id);
            assert!(
                t.rows == rows && t.cols == cols,
                "{what}: expected {rows}x{cols}, found {}x{}",
                t.rows,
                t.cols
            );
        };
        expect(self.word_emb, self.vocab.n_words(), cfg.word_dim, "word_emb");
        expect(
            self.char_cnn.w,
            cfg.conv_window * cfg.char_dim,
            cfg.conv_filters,
            "char_cnn.w",
        );
        for (layer, (fwd, bwd)) in self.enc.iter().enumerate() {
            let in_dim = if layer == 0 { cfg.input_dim() } else { cfg.enc_out() };
            expect(fwd.wx, 4 * cfg.enc_hidden, in_dim, "enc.fwd.wx");
            expect(bwd.wx, 4 * cfg.enc_hidden, in_dim, "enc.bwd.wx");
            expect(fwd.wh, 4 * cfg.enc_hidden, cfg.enc_hidden, "enc.fwd.wh");
        }
        expect(self.dec.wx, 4 * cfg.dec_hidden, cfg.enc_out(), "dec.wx");
        expect(self.init_w, cfg.dec_hidden, cfg.enc_out(), "dec_init.w");
        expect(self.g1.w, cfg.ptr_mlp, cfg.dec_hidden, "g1.w");
        expect(self.g2.w, cfg.ptr_mlp, cfg.enc_out(), "g2.w");
        expect(self.ptr.w, cfg.ptr_mlp, cfg.ptr_mlp, "ptr.w");
        expect(self.l1.w, cfg.lab_mlp, cfg.dec_hidden, "l1.w");
        expect(self.l2.w, cfg.lab_mlp, cfg.enc_out(), "l2.w");
        expect(self.lab.w, cfg.lab_mlp, cfg.lab_mlp, "lab.w");
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// The attention scorer on raw (decoder state, encoder state) vectors.
    pub fn biaffine_score(&self, s: &[f64], h: &[f64]) -> f64 {
        let a = self.g1.forward(&self.params, s);
        let bv = self.g2.forward(&self.params, h);
        self.ptr.score(&self.params, &a, &bv)
    }

    /// The binary relocation scorer on raw state vectors.
    pub fn labeller_logit(&self, s: &[f64], h: &[f64]) -> f64 {
        let a = self.l1.forward(&self.params, s);
        let bv = self.l2.forward(&self.params, h);
        self.lab.score(&self.params, &a, &bv)
    }

    /// Encodes a sentence into one state per token. Dropout is active only
    /// when a training RNG is supplied.
    pub fn encode(
        &self,
        sentence: &Sentence,
        ext: Option<&[Vec<f64>]>,
        train_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<EncoderStates, PointerError> {
        let word_ids: Vec<usize> = sentence
            .forms()
            .map(|f| self.vocab.word_id(f))
            .collect();
        let char_ids: Vec<Vec<usize>> = sentence
            .forms()
            .map(|f| self.vocab.char_ids(f))
            .collect();
        let tape = self.forward_encoder(&word_ids, &char_ids, ext, train_rng)?;
        Ok(EncoderStates { h: tape.states })
    }

    pub(super) fn forward_encoder(
        &self,
        word_ids: &[usize],
        char_ids: &[Vec<usize>],
        ext: Option<&[Vec<f64>]>,
        mut train_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<EncTape, PointerError> {
        let cfg = &self.cfg;
        let n = word_ids.len();
        match (cfg.ext_dim, ext) {
            (None, None) => {}
            (Some(dim), Some(vs)) => {
                if vs.len() != n {
                    return Err(PointerError::ExternalVector(format!(
                        "{} vectors for {} tokens",
                        vs.len(),
                        n
                    )));
                }
                if let Some(bad) = vs.iter().position(|v| v.len() != dim) {
                    return Err(PointerError::ExternalVector(format!(
                        "token {bad}: vector has dimension {}, expected {dim}",
                        vs[bad].len()
                    )));
                }
            }
            (Some(_), None) => {
                return Err(PointerError::ExternalVector(
                    "model expects external vectors but none were given".into(),
                ))
            }
            (None, Some(_)) => {
                return Err(PointerError::ExternalVector(
                    "model takes no external vectors".into(),
                ))
            }
        }

        let dropout = if train_rng.is_some() { cfg.dropout } else { 0.0 };
        let mut char_caches = Vec::with_capacity(n);
        let mut reprs: Vec<Vec<f64>> = Vec::with_capacity(n);
        for t in 0..n {
            let cache = self.char_cnn.forward(&self.params, &char_ids[t]);
            let mut repr = Vec::with_capacity(cfg.input_dim());
            repr.extend_from_slice(&cache.out);
            repr.extend_from_slice(self.params.get(self.word_emb).row(word_ids[t]));
            if let Some(vs) = ext {
                repr.extend_from_slice(&vs[t]);
            }
            char_caches.push(cache);
            reprs.push(repr);
        }

        let mut masks: Vec<Vec<f64>> = Vec::with_capacity(cfg.enc_layers);
        let mut layer_inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.enc_layers);
        let mut traces: Vec<(LstmTrace, LstmTrace)> = Vec::with_capacity(cfg.enc_layers);
        let zeros_h = vec![0.0; cfg.enc_hidden];
        let mut current = reprs;
        for (layer, (fwd, bwd)) in self.enc.iter().enumerate() {
            let dim = if layer == 0 { cfg.input_dim() } else { cfg.enc_out() };
            let mask = match train_rng.as_deref_mut() {
                Some(rng) => dropout_mask(rng, dim, dropout),
                None => vec![1.0; dim],
            };
            for x in &mut current {
                apply_mask(x, &mask);
            }
            let xs_rev: Vec<Vec<f64>> = current.iter().rev().cloned().collect();
            let ftrace = fwd.forward(&self.params, &current, &zeros_h, &zeros_h);
            let btrace = bwd.forward(&self.params, &xs_rev, &zeros_h, &zeros_h);
            let mut out = Vec::with_capacity(n);
            for t in 0..n {
                let mut h = Vec::with_capacity(cfg.enc_out());
                h.extend_from_slice(&ftrace.steps[t].h);
                h.extend_from_slice(&btrace.steps[n - 1 - t].h);
                out.push(h);
            }
            masks.push(mask);
            layer_inputs.push(current);
            traces.push((ftrace, btrace));
            current = out;
        }

        Ok(EncTape {
            word_ids: word_ids.to_vec(),
            char_ids: char_ids.to_vec(),
            char_caches,
            layer_inputs,
            masks,
            traces,
            states: current,
        })
    }

    /// Backward through the encoder stack given gradients on the final
    /// states; accumulates parameter gradients.
    pub(super) fn backward_encoder(
        &self,
        grads: &mut GradStore,
        tape: &EncTape,
        d_states: Vec<Vec<f64>>,
    ) {
        let cfg = &self.cfg;
        let n = tape.word_ids.len();
        let hsize = cfg.enc_hidden;
        let mut d_out = d_states;
        for layer in (0..cfg.enc_layers).rev() {
            let (fwd, bwd) = &self.enc[layer];
            let (ftrace, btrace) = &tape.traces[layer];
            let xs = &tape.layer_inputs[layer];
            let dfwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[..hsize].to_vec()).collect();
            let dbwd_rev: Vec<Vec<f64>> = (0..n)
                .map(|s| d_out[n - 1 - s][hsize..].to_vec())
                .collect();
            let fback = fwd.backward(&self.params, grads, xs, ftrace, &dfwd);
            let xs_rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
            let bback = bwd.backward(&self.params, grads, &xs_rev, btrace, &dbwd_rev);
            let mut dx: Vec<Vec<f64>> = fback.dxs;
            for t in 0..n {
                for (acc, &v) in dx[t].iter_mut().zip(&bback.dxs[n - 1 - t]) {
                    *acc += v;
                }
                apply_mask(&mut dx[t], &tape.masks[layer]);
            }
            d_out = dx;
        }
        // d_out now holds gradients on the token representations.
        for t in 0..n {
            let d = &d_out[t];
            let nf = cfg.conv_filters;
            self.char_cnn.backward(
                &self.params,
                grads,
                &tape.char_ids[t],
                &tape.char_caches[t],
                &d[..nf],
            );
            let row = grads.get_mut(self.word_emb).row_mut(tape.word_ids[t]);
            for (g, &v) in row.iter_mut().zip(&d[nf..nf + cfg.word_dim]) {
                *g += v;
            }
            // External vectors are fixed; their gradient is dropped.
        }
    }

    /// Initial decoder state: the final forward and backward encoder
    /// states, projected through a tanh layer. The cell starts at zero.
    pub(super) fn decoder_init(&self, states: &[Vec<f64>]) -> DecInit {
        let cfg = &self.cfg;
        let n = states.len();
        let hsize = cfg.enc_hidden;
        let mut concat = Vec::with_capacity(cfg.enc_out());
        concat.extend_from_slice(&states[n - 1][..hsize]);
        concat.extend_from_slice(&states[0][hsize..]);
        let mut h0 = self.params.get(self.init_b).data.clone();
        self.params.get(self.init_w).matvec_acc(&concat, &mut h0);
        for v in &mut h0 {
            *v = v.tanh();
        }
        DecInit { concat, h0 }
    }

    /// Routes `dh0` through the projection; accumulates into the final
    /// states' gradients.
    pub(super) fn decoder_init_backward(
        &self,
        grads: &mut GradStore,
        init: &DecInit,
        dh0: &[f64],
        d_states: &mut [Vec<f64>],
    ) {
        let hsize = self.cfg.enc_hidden;
        let n = d_states.len();
        let dz: Vec<f64> = dh0
            .iter()
            .zip(&init.h0)
            .map(|(&d, &y)| d * (1.0 - y * y))
            .collect();
        grads.get_mut(self.init_w).outer_acc(&dz, &init.concat);
        for (g, &v) in grads.get_mut(self.init_b).data.iter_mut().zip(&dz) {
            *g += v;
        }
        let mut dconcat = vec![0.0; self.cfg.enc_out()];
        self.params.get(self.init_w).matvec_t_acc(&dz, &mut dconcat);
        for (acc, &v) in d_states[n - 1][..hsize].iter_mut().zip(&dconcat[..hsize]) {
            *acc += v;
        }
        for (acc, &v) in d_states[0][hsize..].iter_mut().zip(&dconcat[hsize..]) {
            *acc += v;
        }
    }
}

pub(super) struct DecInit {
    pub concat: Vec<f64>,
    pub h0: Vec<f64>,
}

pub(super) struct EncTape {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<Vec<usize>>,
    pub char_caches: Vec<CharCnnCache>,
    /// Inputs actually fed to each layer, after variational dropout.
    pub layer_inputs: Vec<Vec<Vec<f64>>>,
    pub masks: Vec<Vec<f64>>,
    pub traces: Vec<(LstmTrace, LstmTrace)>,
    pub states: Vec<Vec<f64>>,
}
