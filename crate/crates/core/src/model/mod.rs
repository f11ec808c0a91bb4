//! The encoder: type-aware embedding fusion followed by dual-attention blocks.

pub mod codeformer;
pub mod enhancer;
pub mod ops;
mod packed;
mod params;
pub mod real;

pub use packed::{CellLayout, MsaTensor, PackedMsa};
pub use params::{slots, AttnSlots, BlockSlots, EnhancerMode, ModelConfig, ParamSet, Slots, Tensor};
pub use real::Real;

use codeformer::{block_backward, block_forward, BlockCache};
use enhancer::{enhancer_backward, enhancer_forward, EnhancerCache};

use crate::corpus::CodeMsa;
use crate::embeddings::{EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};

/// Encoder parameters together with their shape config.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub cfg: ModelConfig,
    pub slots: Slots,
    pub params: ParamSet<T>,
}

/// Activations kept for the backward pass of one MSA.
#[derive(Debug, Clone)]
pub struct EncodeCache<T> {
    enhancer: EnhancerCache<T>,
    blocks: Vec<BlockCache<T>>,
}

impl<T: Real> Model<T> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Model<T>> {
        cfg.validate()?;
        Ok(Model {
            slots: slots(&cfg),
            params: ParamSet::init(&cfg, seed),
            cfg,
        })
    }

    pub fn from_params(cfg: ModelConfig, params: ParamSet<T>) -> Result<Model<T>> {
        cfg.validate()?;
        params.check_against(&cfg)?;
        Ok(Model {
            slots: slots(&cfg),
            params,
            cfg,
        })
    }

    /// Copies pretrained token vectors into the token table.
    pub fn load_embeddings(&mut self, table: &EmbeddingTable) -> Result<()> {
        if table.dim != self.cfg.d || table.vocab.len() != self.cfg.vocab_size {
            return Err(Error::Config(format!(
                "embedding table is {}×{}, model expects {}×{}",
                table.vocab.len(),
                table.dim,
                self.cfg.vocab_size,
                self.cfg.d
            )));
        }
        let dst = self.params.get_mut(self.slots.token);
        for (x, &y) in dst.iter_mut().zip(&table.data) {
            *x = T::of(y as f64);
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            cfg: self.cfg,
            slots: self.slots.clone(),
            params: self.params.cast(),
        }
    }

    pub fn pack(&self, msa: &CodeMsa, vocab: &Vocabulary) -> Result<PackedMsa> {
        if msa.width() != self.cfg.l {
            return Err(Error::Config(format!(
                "MSA width {} differs from model length {}",
                msa.width(),
                self.cfg.l
            )));
        }
        if vocab.len() != self.cfg.vocab_size {
            return Err(Error::Config("vocabulary size differs from the model".into()));
        }
        Ok(PackedMsa::from_msa(msa, vocab))
    }

    /// Encodes one packed MSA into an `N × d` matrix of cell vectors.
    pub fn encode(&self, msa: &PackedMsa) -> (Vec<T>, EncodeCache<T>) {
        let (p, s, c) = (&self.params, &self.slots, &self.cfg);
        let (mut x, enhancer) = enhancer_forward(p, s, c, msa);
        let mut blocks = Vec::with_capacity(s.blocks.len());
        for b in &s.blocks {
            let (y, bc) = block_forward(p, b, c.heads, c.d_ff, &msa.layout, x, c.d);
            blocks.push(bc);
            x = y;
        }
        (x, EncodeCache { enhancer, blocks })
    }

    /// Accumulates parameter gradients for an upstream gradient `dy` on the encoder output.
    pub fn encode_backward(&self, msa: &PackedMsa, cache: &EncodeCache<T>, dy: Vec<T>, grads: &mut ParamSet<T>) {
        let (p, s, c) = (&self.params, &self.slots, &self.cfg);
        let mut dx = dy;
        for (b, bc) in s.blocks.iter().zip(&cache.blocks).rev() {
            dx = block_backward(p, grads, b, c.heads, c.d_ff, &msa.layout, bc, &dx, c.d);
        }
        enhancer_backward(p, grads, s, c, msa, &cache.enhancer, &dx);
    }

    /// Fused token, type and position embeddings of every valid cell.
    pub fn embed_msa(&self, msa: &CodeMsa, vocab: &Vocabulary) -> Result<MsaTensor<T>> {
        let packed = self.pack(msa, vocab)?;
        let x = enhancer::fuse(&self.params, &self.slots, self.cfg.d, &packed);
        Ok(MsaTensor::unpack(&packed.layout, &x, self.cfg.d))
    }

    /// Per-type projection of each valid cell; `types` is the R×L grid of type ids.
    pub fn type_project(&self, x: &MsaTensor<T>, types: &[usize]) -> MsaTensor<T> {
        let (layout, data) = x.pack();
        let t = packed_types(x, types);
        let h = enhancer::project(&self.params, &self.slots, self.cfg.d, &t, &data);
        MsaTensor::unpack(&layout, &h, self.cfg.d)
    }

    pub fn type_attention(&self, h: &MsaTensor<T>, types: &[usize]) -> MsaTensor<T> {
        let (layout, data) = h.pack();
        let t = packed_types(h, types);
        let (y, _) = enhancer::type_attention(&self.params, &self.slots, self.cfg.d, &layout, &t, &data);
        MsaTensor::unpack(&layout, &y, self.cfg.d)
    }

    pub fn inner_attention(&self, x: &MsaTensor<T>, block: usize) -> MsaTensor<T> {
        let (layout, data) = x.pack();
        let a = &self.slots.blocks[block].inner;
        let (y, _) = codeformer::inner_attention(&self.params, a, self.cfg.heads, &layout, &data, self.cfg.d);
        MsaTensor::unpack(&layout, &y, self.cfg.d)
    }

    pub fn inter_attention(&self, x: &MsaTensor<T>, block: usize) -> MsaTensor<T> {
        let (layout, data) = x.pack();
        let a = &self.slots.blocks[block].inter;
        let (y, _) = codeformer::inter_attention(&self.params, a, self.cfg.heads, &layout, &data, self.cfg.d);
        MsaTensor::unpack(&layout, &y, self.cfg.d)
    }

    /// All encoder blocks in order.
    pub fn codeformer_forward(&self, x: &MsaTensor<T>) -> MsaTensor<T> {
        let (layout, mut data) = x.pack();
        let c = &self.cfg;
        for b in &self.slots.blocks {
            data = block_forward(&self.params, b, c.heads, c.d_ff, &layout, data, c.d).0;
        }
        MsaTensor::unpack(&layout, &data, c.d)
    }
}

fn packed_types<T: Real>(x: &MsaTensor<T>, types: &[usize]) -> Vec<usize> {
    assert_eq!(types.len(), x.r * x.l, "type grid must be R×L");
    types.iter().zip(&x.mask).filter(|(_, &m)| m).map(|(&t, _)| t).collect()
}
