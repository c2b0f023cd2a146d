//! Batched forward and reverse passes over the flat parameter buffer.

use super::layout::{Encoding, Layout};
use super::MASK;
use crate::linalg::{gemm, Mat};
use crate::tabular::ValueId;

/// Activations of one batched forward pass.
pub(crate) struct Trace {
    pub batch: usize,
    /// Gathered embedding inputs per column (`batch × h`), empty for one-hot columns.
    pub emb_in: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub act: Vec<Vec<f64>>,
}

impl Trace {
    pub fn last(&self) -> &[f64] {
        self.act.last().expect("at least one hidden layer")
    }
}

impl Layout {
    fn slice<'a>(&self, params: &'a [f64], off: usize, len: usize) -> &'a [f64] {
        &params[off..off + len]
    }

    fn embedding_row<'a>(&self, params: &'a [f64], c: usize, id: ValueId) -> &'a [f64] {
        let h = self.h;
        if id == MASK {
            self.slice(params, self.mask_tok[c].unwrap(), h)
        } else {
            self.slice(params, self.emb[c].unwrap() + id as usize * h, h)
        }
    }

    /// Runs the hidden stack on `batch` tuples (row-major, `n` ids each, MASK allowed).
    pub fn hidden_forward(&self, params: &[f64], inputs: &[ValueId], batch: usize) -> Trace {
        let n = self.n;
        debug_assert_eq!(inputs.len(), batch * n);
        let h0 = self.hidden[0];
        let w0 = self.slice(params, self.w[0], self.din * h0);
        let b0 = self.slice(params, self.b[0], h0);

        let mut pre0 = vec![0.0; batch * h0];
        for row in pre0.chunks_exact_mut(h0) {
            row.copy_from_slice(b0);
        }
        let mut emb_in = vec![Vec::new(); n];
        for c in 0..n {
            match self.encodings[c] {
                Encoding::OneHot => {
                    let d = self.domains[c];
                    for r in 0..batch {
                        let id = inputs[r * n + c];
                        let slot = self.in_off[c] + if id == MASK { d } else { id as usize };
                        let wrow = &w0[slot * h0..(slot + 1) * h0];
                        for (p, w) in pre0[r * h0..(r + 1) * h0].iter_mut().zip(wrow) {
                            *p += w;
                        }
                    }
                }
                Encoding::Embedding { .. } => {
                    let h = self.h;
                    let mut e = vec![0.0; batch * h];
                    for r in 0..batch {
                        e[r * h..(r + 1) * h].copy_from_slice(self.embedding_row(params, c, inputs[r * n + c]));
                    }
                    let block = &w0[self.in_off[c] * h0..(self.in_off[c] + h) * h0];
                    gemm(Mat::new(&e, batch, h), Mat::new(block, h, h0), 1.0, &mut pre0, h0);
                    emb_in[c] = e;
                }
            }
        }
        let act0: Vec<f64> = pre0.iter().map(|&v| v.max(0.0)).collect();
        let mut pre = vec![pre0];
        let mut act = vec![act0];

        for l in 1..self.hidden.len() {
            let (fan_in, width) = (self.hidden[l - 1], self.hidden[l]);
            let w = self.slice(params, self.w[l], fan_in * width);
            let b = self.slice(params, self.b[l], width);
            let mut z = vec![0.0; batch * width];
            for row in z.chunks_exact_mut(width) {
                row.copy_from_slice(b);
            }
            gemm(Mat::new(&act[l - 1], batch, fan_in), Mat::new(w, fan_in, width), 1.0, &mut z, width);
            let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            if self.has_skip(l) {
                for (a, prev) in a.iter_mut().zip(&act[l - 1]) {
                    *a += prev;
                }
            }
            pre.push(z);
            act.push(a);
        }
        Trace {
            batch,
            emb_in,
            pre,
            act,
        }
    }

    /// Output head of column `c` before the reuse projection (`batch × out_width[c]`).
    fn head(&self, params: &[f64], last: &[f64], batch: usize, c: usize) -> Vec<f64> {
        let f = *self.hidden.last().unwrap();
        let width = self.out_width[c];
        let off = self.out_off[c];
        let w = self.slice(params, self.out_w, f * self.dout);
        let bias = &params[self.out_b + off..self.out_b + off + width];
        let mut z = vec![0.0; batch * width];
        for row in z.chunks_exact_mut(width) {
            row.copy_from_slice(bias);
        }
        gemm(Mat::new(last, batch, f), Mat::cols_of(w, f, self.dout, off, width), 1.0, &mut z, width);
        z
    }

    fn project(&self, params: &[f64], z: &[f64], batch: usize, c: usize) -> Vec<f64> {
        let (d, h) = (self.domains[c], self.h);
        let e = self.slice(params, self.emb[c].unwrap(), d * h);
        let mut logits = vec![0.0; batch * d];
        gemm(Mat::new(z, batch, h), Mat::new(e, d, h).t(), 0.0, &mut logits, d);
        logits
    }

    /// Unnormalized scores of column `c` (`batch × D_c`).
    pub fn column_logits(&self, params: &[f64], trace: &Trace, c: usize) -> Vec<f64> {
        let z = self.head(params, trace.last(), trace.batch, c);
        match self.encodings[c] {
            Encoding::Embedding { reuse: true } => self.project(params, &z, trace.batch, c),
            _ => z,
        }
    }

    /// Conditional distributions of column `c` (`batch × D_c`, rows sum to 1).
    pub fn column_probs(&self, params: &[f64], trace: &Trace, c: usize) -> Vec<f64> {
        let mut p = self.column_logits(params, trace, c);
        for row in p.chunks_exact_mut(self.domains[c]) {
            softmax_in_place(row);
        }
        p
    }

    /// Mean negative log-likelihood (nats) of `targets` given `inputs`, and,
    /// when `grads` is provided, its gradient accumulated into `grads`.
    pub fn nll(
        &self,
        params: &[f64],
        inputs: &[ValueId],
        targets: &[ValueId],
        batch: usize,
        grads: Option<&mut [f64]>,
    ) -> f64 {
        let n = self.n;
        let trace = self.hidden_forward(params, inputs, batch);
        let f = *self.hidden.last().unwrap();
        let scale = 1.0 / batch as f64;

        let mut loss = 0.0;
        let mut dz_all = vec![0.0; batch * self.dout];
        let mut heads = Vec::with_capacity(n);
        let mut dlogits_all = Vec::with_capacity(n);
        for c in 0..n {
            let d = self.domains[c];
            let z = self.head(params, trace.last(), batch, c);
            let mut logits = match self.encodings[c] {
                Encoding::Embedding { reuse: true } => self.project(params, &z, batch, c),
                _ => z.clone(),
            };
            for r in 0..batch {
                let row = &mut logits[r * d..(r + 1) * d];
                let t = targets[r * n + c] as usize;
                let lse = log_sum_exp(row);
                loss -= row[t] - lse;
                // d(-log softmax_t)/dlogits = softmax - onehot(t)
                for v in row.iter_mut() {
                    *v = (*v - lse).exp() * scale;
                }
                row[t] -= scale;
            }
            heads.push(z);
            dlogits_all.push(logits);
        }
        loss *= scale;

        let Some(grads) = grads else {
            return loss;
        };

        for c in 0..n {
            let (d, width, off) = (self.domains[c], self.out_width[c], self.out_off[c]);
            let dlogits = &dlogits_all[c];
            match self.encodings[c] {
                Encoding::Embedding { reuse: true } => {
                    let h = self.h;
                    let e_off = self.emb[c].unwrap();
                    let e = &params[e_off..e_off + d * h];
                    // dZ = dlogits · E ; dE += dlogitsᵀ · Z
                    gemm(Mat::new(dlogits, batch, d), Mat::new(e, d, h), 0.0, &mut dz_all[off..], self.dout);
                    gemm(
                        Mat::new(dlogits, batch, d).t(),
                        Mat::new(&heads[c], batch, h),
                        1.0,
                        &mut grads[e_off..e_off + d * h],
                        h,
                    );
                }
                _ => {
                    for r in 0..batch {
                        dz_all[r * self.dout + off..r * self.dout + off + width]
                            .copy_from_slice(&dlogits[r * width..(r + 1) * width]);
                    }
                }
            }
        }

        // Output layer.
        let out_w = self.slice(params, self.out_w, f * self.dout);
        gemm(
            Mat::new(trace.last(), batch, f).t(),
            Mat::new(&dz_all, batch, self.dout),
            1.0,
            &mut grads[self.out_w..self.out_w + f * self.dout],
            self.dout,
        );
        add_column_sums(&dz_all, self.dout, &mut grads[self.out_b..self.out_b + self.dout]);
        let mut dact = vec![0.0; batch * f];
        gemm(Mat::new(&dz_all, batch, self.dout), Mat::new(out_w, f, self.dout).t(), 0.0, &mut dact, f);

        // Hidden layers, top down.
        for l in (0..self.hidden.len()).rev() {
            let width = self.hidden[l];
            let mut dpre: Vec<f64> = dact
                .iter()
                .zip(&trace.pre[l])
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect();
            add_column_sums(&dpre, width, &mut grads[self.b[l]..self.b[l] + width]);
            if l == 0 {
                self.backward_input(params, inputs, &trace, &mut dpre, grads);
                break;
            }
            let fan_in = self.hidden[l - 1];
            let w = self.slice(params, self.w[l], fan_in * width);
            gemm(
                Mat::new(&trace.act[l - 1], batch, fan_in).t(),
                Mat::new(&dpre, batch, width),
                1.0,
                &mut grads[self.w[l]..self.w[l] + fan_in * width],
                width,
            );
            let mut dprev = if self.has_skip(l) { dact.clone() } else { vec![0.0; batch * fan_in] };
            let beta = if self.has_skip(l) { 1.0 } else { 0.0 };
            gemm(Mat::new(&dpre, batch, width), Mat::new(w, fan_in, width).t(), beta, &mut dprev, fan_in);
            dact = dprev;
        }
        loss
    }

    fn backward_input(&self, params: &[f64], inputs: &[ValueId], trace: &Trace, dpre: &mut [f64], grads: &mut [f64]) {
        let n = self.n;
        let batch = trace.batch;
        let h0 = self.hidden[0];
        let w0_off = self.w[0];
        for c in 0..n {
            match self.encodings[c] {
                Encoding::OneHot => {
                    let d = self.domains[c];
                    for r in 0..batch {
                        let id = inputs[r * n + c];
                        let slot = self.in_off[c] + if id == MASK { d } else { id as usize };
                        let g = &mut grads[w0_off + slot * h0..w0_off + (slot + 1) * h0];
                        for (g, v) in g.iter_mut().zip(&dpre[r * h0..(r + 1) * h0]) {
                            *g += v;
                        }
                    }
                }
                Encoding::Embedding { .. } => {
                    let h = self.h;
                    let block_off = w0_off + self.in_off[c] * h0;
                    gemm(
                        Mat::new(&trace.emb_in[c], batch, h).t(),
                        Mat::new(dpre, batch, h0),
                        1.0,
                        &mut grads[block_off..block_off + h * h0],
                        h0,
                    );
                    let block = &params[block_off..block_off + h * h0];
                    let mut de = vec![0.0; batch * h];
                    gemm(Mat::new(dpre, batch, h0), Mat::new(block, h, h0).t(), 0.0, &mut de, h);
                    for r in 0..batch {
                        let id = inputs[r * n + c];
                        let dst = if id == MASK {
                            self.mask_tok[c].unwrap()
                        } else {
                            self.emb[c].unwrap() + id as usize * h
                        };
                        for (g, v) in grads[dst..dst + h].iter_mut().zip(&de[r * h..(r + 1) * h]) {
                            *g += v;
                        }
                    }
                }
            }
        }
    }
}

fn add_column_sums(m: &[f64], width: usize, out: &mut [f64]) {
    for row in m.chunks_exact(width) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
