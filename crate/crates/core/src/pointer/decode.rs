//! Decoding under the uniqueness constraint: n-1 scored steps, each over
//! the not-yet-assigned positions only; the last token takes the single
//! remaining position without a scoring step.

use crate::reorder::{Permutation, RelocationMask};

use super::model::{EncoderStates, PointerModel};
use super::tensor::log_softmax_over;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

/// Per-step record of the masked attention distribution (greedy decoding).
#[derive(Debug, Clone)]
pub struct StepTrace {
    /// Available positions at this step, ascending.
    pub support: Vec<usize>,
    /// Probabilities aligned with `support`.
    pub probs: Vec<f64>,
    pub chosen: usize,
}

/// Predicts the arrangement for an encoded sentence. With
/// `use_labeller = false` the relocation flags are derived from the
/// predicted map (`map[i] != i`); with the labeller, each scored step
/// contributes its binary decision and the final token's flag is derived
/// from its forced position.
pub fn decode(
    model: &PointerModel,
    enc: &EncoderStates,
    mode: DecodeMode,
    use_labeller: bool,
) -> (Permutation, RelocationMask) {
    let (perm, mask, _) = run(model, enc, mode, use_labeller, false);
    (perm, mask)
}

/// Greedy decoding with the per-step distributions exposed.
pub fn decode_traced(
    model: &PointerModel,
    enc: &EncoderStates,
    use_labeller: bool,
) -> (Permutation, RelocationMask, Vec<StepTrace>) {
    run(model, enc, DecodeMode::Greedy, use_labeller, true)
}

fn run(
    model: &PointerModel,
    enc: &EncoderStates,
    mode: DecodeMode,
    use_labeller: bool,
    traced: bool,
) -> (Permutation, RelocationMask, Vec<StepTrace>) {
    let n = enc.n();
    if n == 1 {
        let perm = Permutation::identity(1);
        let mask = perm.relocated_mask();
        return (perm, mask, Vec::new());
    }

    // The decoder consumes the encoder state of the token being placed, so
    // its states do not depend on the choices made along the way.
    let init = model.decoder_init(&enc.h);
    let zeros = vec![0.0; model.config().dec_hidden];
    let xs: Vec<Vec<f64>> = enc.h[..n - 1].to_vec();
    let dec_trace = model.dec.forward(&model.params, &xs, &init.h0, &zeros);
    let states: Vec<&Vec<f64>> = dec_trace.steps.iter().map(|s| &s.h).collect();

    let g2: Vec<Vec<f64>> = enc
        .h
        .iter()
        .map(|h| model.g2.forward(&model.params, h))
        .collect();
    let g1: Vec<Vec<f64>> = states
        .iter()
        .map(|s| model.g1.forward(&model.params, s))
        .collect();

    let labeller_flags: Vec<bool> = if use_labeller {
        (0..n - 1)
            .map(|t| model.labeller_logit(states[t], &enc.h[t]) > 0.0)
            .collect()
    } else {
        Vec::new()
    };

    let scores_at = |t: usize, j: usize| model.ptr.score(&model.params, &g1[t], &g2[j]);

    let (map, traces) = match mode {
        DecodeMode::Greedy => greedy(n, &scores_at, traced),
        DecodeMode::Beam(k) => beam(n, &scores_at, k.max(1)),
    };

    let perm = Permutation::new(map).expect("decoder always yields a bijection");
    let flags = if use_labeller {
        let mut flags: Vec<bool> = labeller_flags;
        flags.push(perm.map()[n - 1] != n - 1);
        RelocationMask::new(flags)
    } else {
        perm.relocated_mask()
    };
    (perm, flags, traces)
}

fn greedy(
    n: usize,
    score: &dyn Fn(usize, usize) -> f64,
    traced: bool,
) -> (Vec<usize>, Vec<StepTrace>) {
    let mut assigned = vec![false; n];
    let mut map = vec![0usize; n];
    let mut traces = Vec::new();
    for t in 0..n - 1 {
        let support: Vec<usize> = (0..n).filter(|&j| !assigned[j]).collect();
        let logits: Vec<f64> = support.iter().map(|&j| score(t, j)).collect();
        // Ties break toward the lowest available index.
        let mut best = 0;
        for (i, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = i;
            }
        }
        let chosen = support[best];
        if traced {
            let mut full = vec![f64::NEG_INFINITY; n];
            for (i, &j) in support.iter().enumerate() {
                full[j] = logits[i];
            }
            let lps = log_softmax_over(&full, &support);
            traces.push(StepTrace {
                support: support.clone(),
                probs: lps.iter().map(|l| l.exp()).collect(),
                chosen,
            });
        }
        assigned[chosen] = true;
        map[t] = chosen;
    }
    let last = (0..n).find(|&j| !assigned[j]).expect("one position left");
    map[n - 1] = last;
    (map, traces)
}

struct Beam {
    assigned: Vec<bool>,
    map: Vec<usize>,
    logp: f64,
}

fn beam(n: usize, score: &dyn Fn(usize, usize) -> f64, width: usize) -> (Vec<usize>, Vec<StepTrace>) {
    // Scores do not depend on the path, only the masked normalization does.
    let matrix: Vec<Vec<f64>> = (0..n - 1)
        .map(|t| (0..n).map(|j| score(t, j)).collect())
        .collect();
    let mut beams = vec![Beam {
        assigned: vec![false; n],
        map: vec![0; n],
        logp: 0.0,
    }];
    for (t, row) in matrix.iter().enumerate() {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, beam) in beams.iter().enumerate() {
            let support: Vec<usize> = (0..n).filter(|&j| !beam.assigned[j]).collect();
            let lps = log_softmax_over(row, &support);
            for (si, &j) in support.iter().enumerate() {
                candidates.push((beam.logp + lps[si], bi, j));
            }
        }
        // Stable sort: earlier beams and lower indices win ties.
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        candidates.truncate(width);
        beams = candidates
            .into_iter()
            .map(|(logp, bi, j)| {
                let mut assigned = beams[bi].assigned.clone();
                let mut map = beams[bi].map.clone();
                assigned[j] = true;
                map[t] = j;
                Beam { assigned, map, logp }
            })
            .collect();
    }
    let mut best = beams.into_iter().next().expect("at least one beam");
    let last = (0..n)
        .find(|&j| !best.assigned[j])
        .expect("one position left");
    best.map[n - 1] = last;
    (best.map, Vec::new())
}
