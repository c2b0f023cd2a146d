//! Parameter layout and connectivity masks.
//!
//! All parameters live in one flat `f64` buffer. Tensors are laid out in
//! declaration order, which is also the on-disk order.

use serde::{Deserialize, Serialize};

use super::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// `D + 1` indicator slots; the last slot marks MASK.
    OneHot,
    /// Row lookup into a `D × h` matrix; MASK is a learned `h`-vector.
    /// With `reuse`, the output head is `h` wide and scores are `z · Eᵀ`.
    Embedding { reuse: bool },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub offset: usize,
}

impl TensorSpec {
    /// Number of scalars in the tensor.
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub n: usize,
    pub domains: Vec<usize>,
    pub encodings: Vec<Encoding>,
    /// 1-based position of each column in the autoregressive order.
    pub degree: Vec<usize>,
    pub h: usize,
    pub in_off: Vec<usize>,
    pub din: usize,
    pub hidden: Vec<usize>,
    pub labels: Vec<usize>,
    pub out_off: Vec<usize>,
    pub out_width: Vec<usize>,
    pub dout: usize,
    pub residual: bool,
    pub tensors: Vec<TensorSpec>,
    pub emb: Vec<Option<usize>>,
    pub mask_tok: Vec<Option<usize>>,
    pub w: Vec<usize>,
    pub b: Vec<usize>,
    pub out_w: usize,
    pub out_b: usize,
    pub n_params: usize,
}

impl Layout {
    pub fn new(config: &ModelConfig, domains: &[usize], ordering: &[usize]) -> Layout {
        let n = domains.len();
        let h = config.embedding_dim;
        let mut degree = vec![0; n];
        for (pos, &c) in ordering.iter().enumerate() {
            degree[c] = pos + 1;
        }
        let encodings: Vec<Encoding> = domains
            .iter()
            .map(|&d| {
                if d > config.onehot_threshold {
                    Encoding::Embedding {
                        reuse: config.embedding_reuse,
                    }
                } else {
                    Encoding::OneHot
                }
            })
            .collect();

        let mut in_off = Vec::with_capacity(n);
        let mut out_off = Vec::with_capacity(n);
        let mut out_width = Vec::with_capacity(n);
        let (mut din, mut dout) = (0, 0);
        for (c, enc) in encodings.iter().enumerate() {
            let (iw, ow) = match enc {
                Encoding::OneHot => (domains[c] + 1, domains[c]),
                Encoding::Embedding { reuse: true } => (h, h),
                Encoding::Embedding { reuse: false } => (h, domains[c]),
            };
            in_off.push(din);
            out_off.push(dout);
            out_width.push(ow);
            din += iw;
            dout += ow;
        }

        // Hidden unit labels cycle through 1..=n-1 (just 1 for a single column).
        let max_label = n.saturating_sub(1).max(1);
        let widest = config.hidden_sizes.iter().copied().max().unwrap_or(0);
        let labels: Vec<usize> = (0..widest).map(|j| 1 + j % max_label).collect();

        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let spec = TensorSpec { name, shape, offset };
            offset += spec.numel();
            tensors.push(spec);
            tensors.len() - 1
        };
        let mut emb = vec![None; n];
        let mut mask_tok = vec![None; n];
        for (c, enc) in encodings.iter().enumerate() {
            if let Encoding::Embedding { .. } = enc {
                emb[c] = Some(push(format!("embedding.{c}"), vec![domains[c], h]));
                mask_tok[c] = Some(push(format!("mask_token.{c}"), vec![h]));
            }
        }
        let mut w = Vec::new();
        let mut b = Vec::new();
        let mut fan_in = din;
        for (l, &width) in config.hidden_sizes.iter().enumerate() {
            w.push(push(format!("hidden.{l}.weight"), vec![fan_in, width]));
            b.push(push(format!("hidden.{l}.bias"), vec![width]));
            fan_in = width;
        }
        let out_w = push("output.weight".into(), vec![fan_in, dout]);
        let out_b = push("output.bias".into(), vec![dout]);

        let resolve = |i: usize| tensors[i].offset;
        let emb = emb.into_iter().map(|o| o.map(resolve)).collect();
        let mask_tok = mask_tok.into_iter().map(|o| o.map(resolve)).collect();
        let w = w.into_iter().map(resolve).collect();
        let b = b.into_iter().map(resolve).collect();
        let (out_w, out_b) = (resolve(out_w), resolve(out_b));

        Layout {
            n,
            domains: domains.to_vec(),
            encodings,
            degree,
            h,
            in_off,
            din,
            hidden: config.hidden_sizes.clone(),
            labels,
            out_off,
            out_width,
            dout,
            residual: config.residual,
            n_params: offset,
            tensors,
            emb,
            mask_tok,
            w,
            b,
            out_w,
            out_b,
        }
    }

    /// Column owning input slot `slot`.
    fn input_column(&self, slot: usize) -> usize {
        self.in_off.partition_point(|&o| o <= slot) - 1
    }

    fn output_column(&self, slot: usize) -> usize {
        self.out_off.partition_point(|&o| o <= slot) - 1
    }

    /// Whether each parameter may be non-zero. Weight entries that would
    /// carry information from order position `≥ i` into output `i` are fixed at 0.
    pub fn free_mask(&self) -> Vec<bool> {
        let mut free = vec![true; self.n_params];
        // Input -> first hidden: unit label must be >= the input column's position.
        if let Some(&first) = self.hidden.first() {
            let off = self.w[0];
            for slot in 0..self.din {
                let deg = self.degree[self.input_column(slot)];
                for j in 0..first {
                    free[off + slot * first + j] = self.labels[j] >= deg;
                }
            }
        }
        for l in 1..self.hidden.len() {
            let (fan_in, width) = (self.hidden[l - 1], self.hidden[l]);
            let off = self.w[l];
            for i in 0..fan_in {
                for j in 0..width {
                    free[off + i * width + j] = self.labels[j] >= self.labels[i];
                }
            }
        }
        // Last hidden -> outputs: strictly below the output column's position.
        let fan_in = self.hidden.last().copied().unwrap_or(self.din);
        for i in 0..fan_in {
            let label = if self.hidden.is_empty() {
                self.degree[self.input_column(i)]
            } else {
                self.labels[i]
            };
            for s in 0..self.dout {
                let deg = self.degree[self.output_column(s)];
                free[self.out_w + i * self.dout + s] = label < deg;
            }
        }
        free
    }

    /// Whether layer `l` (≥ 1) adds its input to its output.
    pub fn has_skip(&self, l: usize) -> bool {
        self.residual && l >= 1 && self.hidden[l] == self.hidden[l - 1]
    }
}
