use crate::error::{Error, Result};
use crate::numeric::{Mat, RngStream};

/// Model dimensions; fixes the shape of every tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub d_emb: usize,
    pub d_hid: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.src_vocab < 3 || self.tgt_vocab < 3 {
            return Err(Error::Config(format!(
                "vocabularies need at least 3 symbols, got {} / {}",
                self.src_vocab, self.tgt_vocab
            )));
        }
        if self.d_emb == 0 || self.d_hid == 0 {
            return Err(Error::Config("d_emb and d_hid must be positive".into()));
        }
        Ok(())
    }
}

/// Gate weights of one GRU. Rows are stacked `[update; reset; candidate]`,
/// each block `d_hid` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    /// input weights, `3·d_hid × d_in`
    pub w: Mat,
    /// recurrent weights, `3·d_hid × d_hid`
    pub u: Mat,
    /// biases, `3·d_hid × 1`
    pub b: Mat,
}

impl GruParams {
    fn zeros(d_in: usize, d_hid: usize) -> Self {
        GruParams {
            w: Mat::zeros(3 * d_hid, d_in),
            u: Mat::zeros(3 * d_hid, d_hid),
            b: Mat::zeros(3 * d_hid, 1),
        }
    }
}

/// All learned weights of the attention encoder-decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub src_embed: Mat,
    pub tgt_embed: Mat,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    /// decoder initial state from the mean annotation, `d_hid × 2·d_hid`
    pub init_w: Mat,
    pub init_b: Mat,
    /// additive attention: `score_i = v · tanh(Q h + K c_i + b)`
    pub att_query: Mat,
    pub att_key: Mat,
    pub att_bias: Mat,
    pub att_score: Mat,
    /// decoder GRU; its input is `[E[prev]; context]`
    pub dec: GruParams,
    /// readout on `[h; context]`, `|V_tgt| × 3·d_hid`
    pub out_w: Mat,
    pub out_b: Mat,
}

pub const TENSOR_NAMES: [&str; 19] = [
    "src_embed",
    "tgt_embed",
    "enc_fwd.w",
    "enc_fwd.u",
    "enc_fwd.b",
    "enc_bwd.w",
    "enc_bwd.u",
    "enc_bwd.b",
    "init.w",
    "init.b",
    "att.query",
    "att.key",
    "att.bias",
    "att.score",
    "dec.w",
    "dec.u",
    "dec.b",
    "out.w",
    "out.b",
];

impl ModelParams {
    pub fn zeros(dims: Dims) -> Result<Self> {
        dims.validate()?;
        let Dims {
            src_vocab,
            tgt_vocab,
            d_emb: e,
            d_hid: d,
        } = dims;
        Ok(ModelParams {
            dims,
            src_embed: Mat::zeros(src_vocab, e),
            tgt_embed: Mat::zeros(tgt_vocab, e),
            enc_fwd: GruParams::zeros(e, d),
            enc_bwd: GruParams::zeros(e, d),
            init_w: Mat::zeros(d, 2 * d),
            init_b: Mat::zeros(d, 1),
            att_query: Mat::zeros(d, d),
            att_key: Mat::zeros(d, 2 * d),
            att_bias: Mat::zeros(d, 1),
            att_score: Mat::zeros(1, d),
            dec: GruParams::zeros(e + 2 * d, d),
            out_w: Mat::zeros(tgt_vocab, 3 * d),
            out_b: Mat::zeros(tgt_vocab, 1),
        })
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn init_uniform(dims: Dims, scale: f64, seed: u64) -> Result<Self> {
        let mut p = ModelParams::zeros(dims)?;
        let mut rng = RngStream::new(seed);
        for (name, t) in p.tensors_mut() {
            if is_bias(name) {
                continue;
            }
            for x in t.data_mut() {
                *x = rng.uniform_range(-scale, scale);
            }
        }
        Ok(p)
    }

    /// Every entry, biases included, uniform in `[-scale, scale]`. Used for
    /// randomized test models.
    pub fn random(dims: Dims, scale: f64, seed: u64) -> Result<Self> {
        let mut p = ModelParams::zeros(dims)?;
        let mut rng = RngStream::new(seed);
        for (_, t) in p.tensors_mut() {
            for x in t.data_mut() {
                *x = rng.uniform_range(-scale, scale);
            }
        }
        Ok(p)
    }

    /// Zeros with the same shapes.
    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.dims).expect("dims already validated")
    }

    pub fn tensors(&self) -> [(&'static str, &Mat); 19] {
        let n = TENSOR_NAMES;
        [
            (n[0], &self.src_embed),
            (n[1], &self.tgt_embed),
            (n[2], &self.enc_fwd.w),
            (n[3], &self.enc_fwd.u),
            (n[4], &self.enc_fwd.b),
            (n[5], &self.enc_bwd.w),
            (n[6], &self.enc_bwd.u),
            (n[7], &self.enc_bwd.b),
            (n[8], &self.init_w),
            (n[9], &self.init_b),
            (n[10], &self.att_query),
            (n[11], &self.att_key),
            (n[12], &self.att_bias),
            (n[13], &self.att_score),
            (n[14], &self.dec.w),
            (n[15], &self.dec.u),
            (n[16], &self.dec.b),
            (n[17], &self.out_w),
            (n[18], &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Mat); 19] {
        let n = TENSOR_NAMES;
        [
            (n[0], &mut self.src_embed),
            (n[1], &mut self.tgt_embed),
            (n[2], &mut self.enc_fwd.w),
            (n[3], &mut self.enc_fwd.u),
            (n[4], &mut self.enc_fwd.b),
            (n[5], &mut self.enc_bwd.w),
            (n[6], &mut self.enc_bwd.u),
            (n[7], &mut self.enc_bwd.b),
            (n[8], &mut self.init_w),
            (n[9], &mut self.init_b),
            (n[10], &mut self.att_query),
            (n[11], &mut self.att_key),
            (n[12], &mut self.att_bias),
            (n[13], &mut self.att_score),
            (n[14], &mut self.dec.w),
            (n[15], &mut self.dec.u),
            (n[16], &mut self.dec.b),
            (n[17], &mut self.out_w),
            (n[18], &mut self.out_b),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, k: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(b, k);
        }
    }

    /// Expected shape of every named tensor.
    pub fn expected_shapes(dims: Dims) -> Result<Vec<(&'static str, (usize, usize))>> {
        let z = ModelParams::zeros(dims)?;
        Ok(z.tensors().iter().map(|(n, t)| (*n, t.shape())).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        for ((name, t), (_, shape)) in self
            .tensors()
            .iter()
            .zip(ModelParams::expected_shapes(self.dims)?)
        {
            if t.shape() != shape {
                return Err(Error::contract(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(Error::contract(format!("tensor {name} is not finite")));
            }
        }
        Ok(())
    }
}

pub(crate) fn is_bias(name: &str) -> bool {
    name.ends_with(".b") || name.ends_with(".bias")
}
