//! Layer primitives with explicit forward traces and backward passes:
//! LSTM cells, one-layer ELU perceptrons, and the character convolution.

use rand::Rng;

use super::tensor::{
    add_assign, elu, elu_deriv_from_out, glorot, sigmoid, GradStore, ParamId, ParamStore,
    Tensor,
};

/// One LSTM direction; gate layout in the stacked tensors is i, f, g, o.
#[derive(Debug, Clone, Copy)]
pub(super) struct Lstm {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub hidden: usize,
}

pub(super) struct LstmStep {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    pub h: Vec<f64>,
}

pub(super) struct LstmTrace {
    pub steps: Vec<LstmStep>,
    h0: Vec<f64>,
    c0: Vec<f64>,
}

pub(super) struct LstmGradIn {
    pub dxs: Vec<Vec<f64>>,
    pub dh0: Vec<f64>,
    pub dc0: Vec<f64>,
}

impl Lstm {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Lstm {
        let wx = store.register(&format!("{name}.wx"), glorot(4 * hidden, in_dim, rng));
        let wh = store.register(&format!("{name}.wh"), glorot(4 * hidden, hidden, rng));
        let mut bias = Tensor::zeros(4 * hidden, 1);
        // Forget gates start open.
        for v in &mut bias.data[hidden..2 * hidden] {
            *v = 1.0;
        }
        let b = store.register(&format!("{name}.b"), bias);
        Lstm {
            wx,
            wh,
            b,
            in_dim,
            hidden,
        }
    }

    pub fn forward(
        &self,
        params: &ParamStore,
        xs: &[Vec<f64>],
        h0: &[f64],
        c0: &[f64],
    ) -> LstmTrace {
        let hsize = self.hidden;
        let (wx, wh, b) = (params.get(self.wx), params.get(self.wh), params.get(self.b));
        let mut steps = Vec::with_capacity(xs.len());
        let mut h_prev = h0.to_vec();
        let mut c_prev = c0.to_vec();
        for x in xs {
            let mut pre = b.data.clone();
            wx.matvec_acc(x, &mut pre);
            wh.matvec_acc(&h_prev, &mut pre);
            let mut step = LstmStep {
                i: vec![0.0; hsize],
                f: vec![0.0; hsize],
                g: vec![0.0; hsize],
                o: vec![0.0; hsize],
                c: vec![0.0; hsize],
                tc: vec![0.0; hsize],
                h: vec![0.0; hsize],
            };
            for k in 0..hsize {
                step.i[k] = sigmoid(pre[k]);
                step.f[k] = sigmoid(pre[hsize + k]);
                step.g[k] = pre[2 * hsize + k].tanh();
                step.o[k] = sigmoid(pre[3 * hsize + k]);
                step.c[k] = step.f[k] * c_prev[k] + step.i[k] * step.g[k];
                step.tc[k] = step.c[k].tanh();
                step.h[k] = step.o[k] * step.tc[k];
            }
            h_prev = step.h.clone();
            c_prev = step.c.clone();
            steps.push(step);
        }
        LstmTrace {
            steps,
            h0: h0.to_vec(),
            c0: c0.to_vec(),
        }
    }

    /// Backward through the whole sequence. `dh_steps[t]` is the external
    /// gradient flowing into `h_t`; recurrent gradients are handled here.
    pub fn backward(
        &self,
        params: &ParamStore,
        grads: &mut GradStore,
        xs: &[Vec<f64>],
        trace: &LstmTrace,
        dh_steps: &[Vec<f64>],
    ) -> LstmGradIn {
        let hsize = self.hidden;
        let (wx, wh) = (params.get(self.wx), params.get(self.wh));
        let mut dxs = vec![vec![0.0; self.in_dim]; xs.len()];
        let mut dh_carry = vec![0.0; hsize];
        let mut dc_carry = vec![0.0; hsize];
        let mut dpre = vec![0.0; 4 * hsize];
        for t in (0..xs.len()).rev() {
            let step = &trace.steps[t];
            let (c_prev, h_prev): (&[f64], &[f64]) = if t == 0 {
                (&trace.c0, &trace.h0)
            } else {
                (&trace.steps[t - 1].c, &trace.steps[t - 1].h)
            };
            for k in 0..hsize {
                let dh = dh_steps[t][k] + dh_carry[k];
                let d_o = dh * step.tc[k];
                let dtc = dh * step.o[k];
                let dc = dc_carry[k] + dtc * (1.0 - step.tc[k] * step.tc[k]);
                let di = dc * step.g[k];
                let dg = dc * step.i[k];
                let df = dc * c_prev[k];
                dc_carry[k] = dc * step.f[k];
                dpre[k] = di * step.i[k] * (1.0 - step.i[k]);
                dpre[hsize + k] = df * step.f[k] * (1.0 - step.f[k]);
                dpre[2 * hsize + k] = dg * (1.0 - step.g[k] * step.g[k]);
                dpre[3 * hsize + k] = d_o * step.o[k] * (1.0 - step.o[k]);
            }
            grads.get_mut(self.wx).outer_acc(&dpre, &xs[t]);
            grads.get_mut(self.wh).outer_acc(&dpre, h_prev);
            add_assign(&mut grads.get_mut(self.b).data, &dpre);
            wx.matvec_t_acc(&dpre, &mut dxs[t]);
            dh_carry.fill(0.0);
            wh.matvec_t_acc(&dpre, &mut dh_carry);
        }
        LstmGradIn {
            dxs,
            dh0: dh_carry,
            dc0: dc_carry,
        }
    }
}

/// Single-layer perceptron with ELU activation.
#[derive(Debug, Clone, Copy)]
pub(super) struct Mlp {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Mlp {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Mlp {
        let w = store.register(&format!("{name}.w"), glorot(out_dim, in_dim, rng));
        let b = store.register(&format!("{name}.b"), Tensor::zeros(out_dim, 1));
        Mlp {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, params: &ParamStore, x: &[f64]) -> Vec<f64> {
        let mut y = params.get(self.b).data.clone();
        params.get(self.w).matvec_acc(x, &mut y);
        for v in &mut y {
            *v = elu(*v);
        }
        y
    }

    /// `y` must be the forward output for `x`; accumulates `dx` into
    /// `dx_acc`.
    pub fn backward(
        &self,
        params: &ParamStore,
        grads: &mut GradStore,
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        dx_acc: &mut [f64],
    ) {
        let dz: Vec<f64> = dy
            .iter()
            .zip(y)
            .map(|(&d, &out)| d * elu_deriv_from_out(out))
            .collect();
        grads.get_mut(self.w).outer_acc(&dz, x);
        add_assign(&mut grads.get_mut(self.b).data, &dz);
        params.get(self.w).matvec_t_acc(&dz, dx_acc);
    }
}

/// Character convolution: embed, convolve with a centered window, ELU,
/// max-pool over positions.
#[derive(Debug, Clone, Copy)]
pub(super) struct CharCnn {
    pub emb: ParamId,
    pub w: ParamId,
    pub b: ParamId,
    pub window: usize,
    pub char_dim: usize,
    pub filters: usize,
}

pub(super) struct CharCnnCache {
    /// Pooled ELU outputs, one per filter.
    pub out: Vec<f64>,
    /// Winning convolution position per filter.
    winners: Vec<usize>,
}

impl CharCnn {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        n_chars: usize,
        char_dim: usize,
        window: usize,
        filters: usize,
        rng: &mut impl Rng,
    ) -> CharCnn {
        assert!(window % 2 == 1, "window must be odd");
        let emb = store.register(&format!("{name}.emb"), glorot(n_chars, char_dim, rng));
        let w = store.register(
            &format!("{name}.w"),
            glorot(window * char_dim, filters, rng),
        );
        let b = store.register(&format!("{name}.b"), Tensor::zeros(filters, 1));
        CharCnn {
            emb,
            w,
            b,
            window,
            char_dim,
            filters,
        }
    }

    fn conv_at(
        &self,
        params: &ParamStore,
        chars: &[usize],
        pos: usize,
        filter: usize,
    ) -> f64 {
        let emb = params.get(self.emb);
        let w = params.get(self.w);
        let half = (self.window / 2) as isize;
        let mut acc = params.get(self.b).data[filter];
        for (slot, off) in (-half..=half).enumerate() {
            let p = pos as isize + off;
            if p < 0 || p as usize >= chars.len() {
                continue;
            }
            let row = emb.row(chars[p as usize]);
            for (d, &e) in row.iter().enumerate() {
                acc += w.at(slot * self.char_dim + d, filter) * e;
            }
        }
        acc
    }

    pub fn forward(&self, params: &ParamStore, chars: &[usize]) -> CharCnnCache {
        debug_assert!(!chars.is_empty());
        let mut out = vec![f64::NEG_INFINITY; self.filters];
        let mut winners = vec![0usize; self.filters];
        for pos in 0..chars.len() {
            for f in 0..self.filters {
                let a = elu(self.conv_at(params, chars, pos, f));
                if a > out[f] {
                    out[f] = a;
                    winners[f] = pos;
                }
            }
        }
        CharCnnCache { out, winners }
    }

    pub fn backward(
        &self,
        params: &ParamStore,
        grads: &mut GradStore,
        chars: &[usize],
        cache: &CharCnnCache,
        dout: &[f64],
    ) {
        let half = (self.window / 2) as isize;
        for f in 0..self.filters {
            let dz = dout[f] * elu_deriv_from_out(cache.out[f]);
            if dz == 0.0 {
                continue;
            }
            let pos = cache.winners[f];
            grads.get_mut(self.b).data[f] += dz;
            for (slot, off) in (-half..=half).enumerate() {
                let p = pos as isize + off;
                if p < 0 || p as usize >= chars.len() {
                    continue;
                }
                let cid = chars[p as usize];
                for d in 0..self.char_dim {
                    let widx = slot * self.char_dim + d;
                    let e = params.get(self.emb).at(cid, d);
                    let wv = params.get(self.w).at(widx, f);
                    grads.get_mut(self.w).data[widx * self.filters + f] += dz * e;
                    grads.get_mut(self.emb).data[cid * self.char_dim + d] += dz * wv;
                }
            }
        }
    }
}

/// Inverted-dropout mask: entries are either `0` or `1/(1-p)`.
pub(super) fn dropout_mask(rng: &mut impl Rng, len: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - p;
    (0..len)
        .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
        .collect()
}

pub(super) fn apply_mask(x: &mut [f64], mask: &[f64]) {
    for (v, m) in x.iter_mut().zip(mask) {
        *v *= m;
    }
}
