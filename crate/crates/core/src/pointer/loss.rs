//! Joint training loss: masked softmax cross-entropy over the gold
//! arrangement (teacher forcing, the gold prefix defines the assigned
//! set) plus per-step binary cross-entropy for the relocation labeller.

use rand_chacha::ChaCha8Rng;

use crate::reorder::{Permutation, RelocationMask};
use crate::treebank::Sentence;

use super::layers::{apply_mask, dropout_mask};
use super::model::PointerModel;
use super::tensor::{log_softmax_over, sigmoid, GradStore};
use super::PointerError;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub pointer: f64,
    pub labeller: f64,
}

impl LossBreakdown {
    /// The training objective is exactly the sum of the two parts.
    pub fn total(&self) -> f64 {
        self.pointer + self.labeller
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossOpts {
    /// Apply the uniqueness mask inside the training softmax (the gold
    /// prefix defines the excluded positions).
    pub masked: bool,
    /// Weight of the labeller term; 0 trains the pointer alone.
    pub labeller_weight: f64,
}

impl Default for LossOpts {
    fn default() -> Self {
        LossOpts {
            masked: true,
            labeller_weight: 1.0,
        }
    }
}

/// One training example; `word_ids` may carry unknown-word replacements.
pub struct TrainItem<'a> {
    pub sentence: &'a Sentence,
    pub word_ids: Vec<usize>,
    pub gold: &'a Permutation,
    pub mask: &'a RelocationMask,
    pub ext: Option<&'a [Vec<f64>]>,
}

impl<'a> TrainItem<'a> {
    pub fn new(
        model: &PointerModel,
        sentence: &'a Sentence,
        gold: &'a Permutation,
        mask: &'a RelocationMask,
    ) -> Self {
        TrainItem {
            sentence,
            word_ids: sentence.forms().map(|f| model.vocab().word_id(f)).collect(),
            gold,
            mask,
            ext: None,
        }
    }
}

/// Mean loss over the batch; gradients for every trainable tensor are
/// written into `grads` (zeroed here first). Dropout is active only when a
/// training RNG is supplied.
pub fn loss_and_grads(
    model: &PointerModel,
    items: &[TrainItem],
    opts: &LossOpts,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
    grads: &mut GradStore,
) -> Result<LossBreakdown, PointerError> {
    grads.zero();
    let mut sum = LossBreakdown::default();
    for item in items {
        let one = sentence_loss(model, item, opts, dropout_rng.as_deref_mut(), grads)?;
        sum.pointer += one.pointer;
        sum.labeller += one.labeller;
    }
    let scale = 1.0 / items.len().max(1) as f64;
    grads.scale(scale);
    let mean = LossBreakdown {
        pointer: sum.pointer * scale,
        labeller: sum.labeller * scale,
    };
    if !mean.total().is_finite() {
        return Err(PointerError::Numeric(format!(
            "non-finite loss: pointer={} labeller={}",
            mean.pointer, mean.labeller
        )));
    }
    Ok(mean)
}

fn sentence_loss(
    model: &PointerModel,
    item: &TrainItem,
    opts: &LossOpts,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
    grads: &mut GradStore,
) -> Result<LossBreakdown, PointerError> {
    let n = item.sentence.n();
    debug_assert_eq!(item.gold.n(), n);
    let char_ids: Vec<Vec<usize>> = item
        .sentence
        .forms()
        .map(|f| model.vocab().char_ids(f))
        .collect();
    let tape =
        model.forward_encoder(&item.word_ids, &char_ids, item.ext, dropout_rng.as_deref_mut())?;
    if n == 1 {
        return Ok(LossBreakdown::default());
    }
    let cfg = model.config();
    let enc_out = cfg.enc_out();

    // Decoder over the first n-1 encoder states, variational input dropout.
    let dec_mask = match dropout_rng.as_deref_mut() {
        Some(rng) => dropout_mask(rng, enc_out, cfg.dropout),
        None => vec![1.0; enc_out],
    };
    let init = model.decoder_init(&tape.states);
    let mut dec_xs: Vec<Vec<f64>> = tape.states[..n - 1].to_vec();
    for x in &mut dec_xs {
        apply_mask(x, &dec_mask);
    }
    let zeros = vec![0.0; cfg.dec_hidden];
    let dec_trace = model.dec.forward(&model.params, &dec_xs, &init.h0, &zeros);

    // Transform caches.
    let g1: Vec<Vec<f64>> = (0..n - 1)
        .map(|t| model.g1.forward(&model.params, &dec_trace.steps[t].h))
        .collect();
    let g2: Vec<Vec<f64>> = tape
        .states
        .iter()
        .map(|h| model.g2.forward(&model.params, h))
        .collect();
    let l1: Vec<Vec<f64>> = (0..n - 1)
        .map(|t| model.l1.forward(&model.params, &dec_trace.steps[t].h))
        .collect();
    let l2: Vec<Vec<f64>> = (0..n - 1)
        .map(|t| model.l2.forward(&model.params, &tape.states[t]))
        .collect();

    let mut breakdown = LossBreakdown::default();
    let mut d_g1: Vec<Vec<f64>> = vec![vec![0.0; cfg.ptr_mlp]; n - 1];
    let mut d_g2: Vec<Vec<f64>> = vec![vec![0.0; cfg.ptr_mlp]; n];
    let mut d_l1: Vec<Vec<f64>> = vec![vec![0.0; cfg.lab_mlp]; n - 1];
    let mut d_l2: Vec<Vec<f64>> = vec![vec![0.0; cfg.lab_mlp]; n - 1];

    let mut assigned = vec![false; n];
    for t in 0..n - 1 {
        let support: Vec<usize> = if opts.masked {
            (0..n).filter(|&j| !assigned[j]).collect()
        } else {
            (0..n).collect()
        };
        let logits: Vec<f64> = (0..n)
            .map(|j| {
                if support.contains(&j) {
                    model.ptr.score(&model.params, &g1[t], &g2[j])
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let lps = log_softmax_over(&logits, &support);
        let target = item.gold.map()[t];
        let target_idx = support
            .iter()
            .position(|&j| j == target)
            .expect("gold position is unassigned under teacher forcing");
        breakdown.pointer -= lps[target_idx];
        for (si, &j) in support.iter().enumerate() {
            let d = lps[si].exp() - if si == target_idx { 1.0 } else { 0.0 };
            model.ptr.backward(
                &model.params,
                grads,
                &g1[t],
                &g2[j],
                d,
                &mut d_g1[t],
                &mut d_g2[j],
            );
        }
        assigned[target] = true;

        if opts.labeller_weight > 0.0 {
            let logit = model.lab.score(&model.params, &l1[t], &l2[t]);
            let y = if item.mask.flags()[t] { 1.0 } else { 0.0 };
            // Numerically stable binary cross-entropy.
            let bce = logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p();
            breakdown.labeller += opts.labeller_weight * bce;
            let d = opts.labeller_weight * (sigmoid(logit) - y);
            model.lab.backward(
                &model.params,
                grads,
                &l1[t],
                &l2[t],
                d,
                &mut d_l1[t],
                &mut d_l2[t],
            );
        }
    }

    // Back through the transforms into decoder and encoder states.
    let mut ds: Vec<Vec<f64>> = vec![vec![0.0; cfg.dec_hidden]; n - 1];
    let mut d_states: Vec<Vec<f64>> = vec![vec![0.0; enc_out]; n];
    for t in 0..n - 1 {
        model.g1.backward(
            &model.params,
            grads,
            &dec_trace.steps[t].h,
            &g1[t],
            &d_g1[t],
            &mut ds[t],
        );
        model.l1.backward(
            &model.params,
            grads,
            &dec_trace.steps[t].h,
            &l1[t],
            &d_l1[t],
            &mut ds[t],
        );
        model.l2.backward(
            &model.params,
            grads,
            &tape.states[t],
            &l2[t],
            &d_l2[t],
            &mut d_states[t],
        );
    }
    for j in 0..n {
        model.g2.backward(
            &model.params,
            grads,
            &tape.states[j],
            &g2[j],
            &d_g2[j],
            &mut d_states[j],
        );
    }

    // Decoder BPTT; its input gradients flow back into the encoder states
    // through the dropout mask, its initial state through the projection.
    let dec_back = model.dec.backward(&model.params, grads, &dec_xs, &dec_trace, &ds);
    for t in 0..n - 1 {
        let mut dx = dec_back.dxs[t].clone();
        apply_mask(&mut dx, &dec_mask);
        for (acc, &v) in d_states[t].iter_mut().zip(&dx) {
            *acc += v;
        }
    }
    model.decoder_init_backward(grads, &init, &dec_back.dh0, &mut d_states);
    model.backward_encoder(grads, &tape, d_states);

    Ok(breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::model::ModelConfig;
    use super::super::vocab::Vocab;
    use crate::reorder::Permutation;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            word_dim: 5,
            char_dim: 4,
            conv_window: 3,
            conv_filters: 3,
            enc_hidden: 5,
            enc_layers: 2,
            dec_hidden: 5,
            ptr_mlp: 6,
            lab_mlp: 4,
            ext_dim: None,
            dropout: 0.0,
        }
    }

    #[test]
    fn zero_model_loss_matches_closed_form() {
        let sentence = Sentence::from_forms(&["a", "b", "c", "d"]).unwrap();
        let vocab = Vocab::build([&sentence].into_iter());
        let mut model = PointerModel::new(tiny_cfg(), vocab, 5).unwrap();
        for t in model.params_mut().tensors_mut() {
            t.data.fill(0.0);
        }
        let gold = Permutation::new(vec![0, 2, 1, 3]).unwrap();
        let mask = gold.relocated_mask();
        let item = TrainItem::new(&model, &sentence, &gold, &mask);
        let mut grads = GradStore::zeros_like(model.params());
        let breakdown =
            loss_and_grads(&model, &[item], &LossOpts::default(), None, &mut grads).unwrap();
        // Uniform masked distributions over supports of size 4, 3, 2.
        let expected = 4.0f64.ln() + 3.0f64.ln() + 2.0f64.ln();
        assert!((breakdown.pointer - expected).abs() < 1e-12);
        // Zero logits give ln 2 of labeller loss per scored step.
        assert!((breakdown.labeller - 3.0 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_token_sentence_has_zero_loss() {
        let sentence = Sentence::from_forms(&["a"]).unwrap();
        let vocab = Vocab::build([&sentence].into_iter());
        let model = PointerModel::new(tiny_cfg(), vocab, 5).unwrap();
        let gold = Permutation::identity(1);
        let mask = gold.relocated_mask();
        let item = TrainItem::new(&model, &sentence, &gold, &mask);
        let mut grads = GradStore::zeros_like(model.params());
        let breakdown =
            loss_and_grads(&model, &[item], &LossOpts::default(), None, &mut grads).unwrap();
        assert_eq!(breakdown.total(), 0.0);
    }

    #[test]
    fn labeller_weight_zero_disables_labeller_term() {
        let sentence = Sentence::from_forms(&["a", "b", "c"]).unwrap();
        let vocab = Vocab::build([&sentence].into_iter());
        let model = PointerModel::new(tiny_cfg(), vocab, 9).unwrap();
        let gold = Permutation::new(vec![1, 0, 2]).unwrap();
        let mask = gold.relocated_mask();
        let item = TrainItem::new(&model, &sentence, &gold, &mask);
        let opts = LossOpts {
            labeller_weight: 0.0,
            ..Default::default()
        };
        let mut grads = GradStore::zeros_like(model.params());
        let breakdown = loss_and_grads(&model, &[item], &opts, None, &mut grads).unwrap();
        assert_eq!(breakdown.labeller, 0.0);
        assert!(breakdown.pointer > 0.0);
    }

    #[test]
    fn unmasked_softmax_is_a_flagged_alternative() {
        let sentence = Sentence::from_forms(&["a", "b", "c", "d"]).unwrap();
        let vocab = Vocab::build([&sentence].into_iter());
        let mut model = PointerModel::new(tiny_cfg(), vocab, 5).unwrap();
        for t in model.params_mut().tensors_mut() {
            t.data.fill(0.0);
        }
        let gold = Permutation::identity(4);
        let mask = gold.relocated_mask();
        let item = TrainItem::new(&model, &sentence, &gold, &mask);
        let opts = LossOpts {
            masked: false,
            labeller_weight: 0.0,
        };
        let mut grads = GradStore::zeros_like(model.params());
        let breakdown = loss_and_grads(&model, &[item], &opts, None, &mut grads).unwrap();
        // Unmasked uniform distributions stay over all 4 positions.
        assert!((breakdown.pointer - 3.0 * 4.0f64.ln()).abs() < 1e-12);
    }
}
