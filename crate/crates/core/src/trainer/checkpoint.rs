use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::loss::Loss;
use crate::config::Config;
use crate::corpus::hex;
use crate::embeddings::Vocabulary;
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};
use crate::model::{Model, ParamSet, Tensor};
use crate::scorer::{Measure, SimilarityConfig};

const MAGIC: &[u8; 4] = b"ACCM";
const VERSION: u32 = 1;

/// A trained model with everything needed to score pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub vocab: Vocabulary,
    /// Resolved configuration the model was trained with.
    pub config: Config,
    /// Calibrated decision threshold.
    pub tau: f64,
    /// Input digests, one `key=value` per line.
    pub provenance: String,
}

impl Checkpoint {
    pub fn similarity(&self) -> SimilarityConfig {
        SimilarityConfig {
            tau: self.tau,
            ..self.config.similarity()
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = ByteWriter::new(MAGIC, VERSION);
        for v in [c.d, c.l, c.r, c.heads, c.blocks] {
            w.u32(v as u32);
        }
        w.u32(c.loss.code());
        w.u32(c.measure.code());
        w.f64(self.tau);
        w.u8(u8::from(c.symmetrize));
        w.u32(self.vocab.len() as u32);
        for t in self.vocab.tokens() {
            w.str(t);
        }
        w.str(&self.vocab.digest());
        w.str(&c.to_text());
        w.str(&self.provenance);
        let tensors = &self.model.params.tensors;
        w.u32(tensors.len() as u32);
        for t in tensors {
            w.str(&t.name);
            w.u32(t.shape.len() as u32);
            for &s in &t.shape {
                w.u32(s as u32);
            }
            w.f32s(&t.data);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = ByteReader::new(bytes, MAGIC, VERSION)?;
        let mut header = [0usize; 5];
        for h in &mut header {
            *h = r.u32()? as usize;
        }
        let loss = Loss::from_code(r.u32()?).ok_or_else(|| Error::Format("unknown loss code".into()))?;
        let measure = Measure::from_code(r.u32()?).ok_or_else(|| Error::Format("unknown measure code".into()))?;
        let tau = r.f64()?;
        let symmetrize = r.u8()? != 0;
        let n = r.u32()? as usize;
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            tokens.push(r.str()?);
        }
        let vocab = Vocabulary::from_tokens(tokens)?;
        let digest = r.str()?;
        if digest != vocab.digest() {
            return Err(Error::Format("vocabulary digest mismatch".into()));
        }
        let config = Config::from_text(&r.str()?).map_err(|e| Error::Format(format!("embedded config: {e}")))?;
        let provenance = r.str()?;
        let c = &config;
        if header != [c.d, c.l, c.r, c.heads, c.blocks]
            || loss != c.loss
            || measure != c.measure
            || symmetrize != c.symmetrize
        {
            return Err(Error::Format("header disagrees with the embedded config".into()));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.str()?;
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32()? as usize);
            }
            let len = shape.iter().product();
            let data = r.f32s(len)?;
            tensors.push(Tensor { name, shape, data });
        }
        r.end()?;
        let model = Model::from_params(config.model(vocab.len()), ParamSet { tensors })
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(Checkpoint {
            model,
            vocab,
            config,
            tau,
            provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }

    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.to_bytes()))
    }
}
