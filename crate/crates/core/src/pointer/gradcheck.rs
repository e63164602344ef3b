//! Central-finite-difference validation of the analytic gradients, over
//! every element of every parameter tensor.

use crate::reorder::{Permutation, RelocationMask};
use crate::treebank::Sentence;

use super::loss::{loss_and_grads, LossOpts, TrainItem};
use super::model::PointerModel;
use super::tensor::GradStore;
use super::PointerError;

pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Largest raw difference over bias tensors specifically.
    pub max_bias_abs_error: f64,
    pub checked: usize,
}

/// Compares analytic gradients of the batch loss against central finite
/// differences with step `eps` for every parameter scalar. The model must
/// be configured without dropout so the loss is a deterministic function
/// of the parameters. Relative errors use a small floor so parameters with
/// vanishing gradients are compared absolutely.
pub fn grad_check(
    model: &mut PointerModel,
    examples: &[(Sentence, Permutation, RelocationMask)],
    opts: &LossOpts,
    eps: f64,
) -> Result<GradCheckReport, PointerError> {
    if model.config().dropout != 0.0 {
        return Err(PointerError::Config(
            "grad_check requires a dropout-free model".into(),
        ));
    }
    let mut grads = GradStore::zeros_like(model.params());
    {
        let items: Vec<TrainItem> = examples
            .iter()
            .map(|(s, p, m)| TrainItem::new(model, s, p, m))
            .collect();
        loss_and_grads(model, &items, opts, None, &mut grads)?;
    }

    let mut scratch = GradStore::zeros_like(model.params());
    let mut max_rel: f64 = 0.0;
    let mut max_bias_abs: f64 = 0.0;
    let mut checked = 0usize;
    let names: Vec<String> = model
        .params()
        .iter()
        .map(|(name, _)| name.to_string())
        .collect();
    for idx in 0..model.params().len() {
        let n_elems = grads.tensors()[idx].data.len();
        let is_bias = names[idx].ends_with(".b") || names[idx] == "dec_init.b";
        for k in 0..n_elems {
            let orig = model.params_mut().tensors_mut()[idx].data[k];
            model.params_mut().tensors_mut()[idx].data[k] = orig + eps;
            let up = eval_loss(model, examples, opts, &mut scratch)?;
            model.params_mut().tensors_mut()[idx].data[k] = orig - eps;
            let down = eval_loss(model, examples, opts, &mut scratch)?;
            model.params_mut().tensors_mut()[idx].data[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.tensors()[idx].data[k];
            let denom = analytic.abs().max(numeric.abs()).max(1e-3);
            max_rel = max_rel.max((analytic - numeric).abs() / denom);
            if is_bias {
                max_bias_abs = max_bias_abs.max((analytic - numeric).abs());
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        max_bias_abs_error: max_bias_abs,
        checked,
    })
}

fn eval_loss(
    model: &PointerModel,
    examples: &[(Sentence, Permutation, RelocationMask)],
    opts: &LossOpts,
    scratch: &mut GradStore,
) -> Result<f64, PointerError> {
    let items: Vec<TrainItem> = examples
        .iter()
        .map(|(s, p, m)| TrainItem::new(model, s, p, m))
        .collect();
    Ok(loss_and_grads(model, &items, opts, None, scratch)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::model::ModelConfig;
    use super::super::vocab::Vocab;

    fn fixture(seed: u64) -> (PointerModel, Vec<(Sentence, Permutation, RelocationMask)>) {
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
        let model = PointerModel::new(cfg, vocab, seed).unwrap();
        let gold = Permutation::new(vec![0, 2, 4, 1, 3]).unwrap();
        let mask = gold.relocated_mask();
        (model, vec![(sentence, gold, mask)])
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut model, examples) = fixture(17);
        let report =
            grad_check(&mut model, &examples, &LossOpts::default(), 1e-4).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max relative error {}",
            report.max_rel_error
        );
        assert!(report.checked > 100);
    }

    #[test]
    fn zero_model_bias_gradients_are_near_linear()
    {
        let (mut model, examples) = fixture(17);
        for t in model.params_mut().tensors_mut() {
            t.data.fill(0.0);
        }
        let report =
            grad_check(&mut model, &examples, &LossOpts::default(), 1e-4).unwrap();
        assert!(
            report.max_bias_abs_error < 1e-6,
            "bias error {}",
            report.max_bias_abs_error
        );
    }

    #[test]
    fn repeated_runs_are_identical() {
        let (mut model, examples) = fixture(5);
        let a = grad_check(&mut model, &examples, &LossOpts::default(), 1e-4)
            .unwrap()
            .max_rel_error;
        let b = grad_check(&mut model, &examples, &LossOpts::default(), 1e-4)
            .unwrap()
            .max_rel_error;
        assert_eq!(a, b);
    }

    #[test]
    fn dropout_models_are_rejected() {
        let sentence = Sentence::from_forms(&["a"]).unwrap();
        let vocab = Vocab::build([&sentence].into_iter());
        let cfg = ModelConfig {
            word_dim: 2,
            char_dim: 2,
            conv_window: 3,
            conv_filters: 2,
            enc_hidden: 2,
            enc_layers: 1,
            dec_hidden: 2,
            ptr_mlp: 2,
            lab_mlp: 2,
            ext_dim: None,
            dropout: 0.33,
        };
        let mut model = PointerModel::new(cfg, vocab, 1).unwrap();
        let gold = Permutation::identity(1);
        let mask = gold.relocated_mask();
        assert!(grad_check(
            &mut model,
            &[(sentence, gold, mask)],
            &LossOpts::default(),
            1e-4
        )
        .is_err());
    }
}
