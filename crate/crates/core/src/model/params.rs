use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::real::Real;
use crate::error::{Error, Result};
use crate::lexer::TokenType;

/// Which parts of the type-aware fusion stage run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnhancerMode {
    /// Type projection, then type-aware attention.
    #[default]
    Full,
    /// Type-aware attention directly on the fused embeddings.
    AttentionOnly,
    /// Fused embeddings only.
    Off,
}

impl EnhancerMode {
    pub fn name(self) -> &'static str {
        match self {
            EnhancerMode::Full => "full",
            EnhancerMode::AttentionOnly => "attention_only",
            EnhancerMode::Off => "off",
        }
    }
}

impl fmt::Display for EnhancerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnhancerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EnhancerMode::Full),
            "attention_only" => Ok(EnhancerMode::AttentionOnly),
            "off" => Ok(EnhancerMode::Off),
            _ => Err(Error::Config(format!(
                "unknown enhancer mode `{s}` (expected full, attention_only or off)"
            ))),
        }
    }
}

/// Shape hyperparameters of the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d: usize,
    pub l: usize,
    pub heads: usize,
    pub blocks: usize,
    pub d_ff: usize,
    pub mode: EnhancerMode,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.l == 0 || self.heads == 0 || self.d_ff == 0 {
            return Err(Error::Config("d, L, H and d_ff must be positive".into()));
        }
        if !self.d.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "head count {} does not divide d = {}",
                self.heads, self.d
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::Config("vocabulary must hold at least PAD and UNK".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttnSlots {
    pub q: usize,
    pub k: usize,
    pub v: usize,
    pub o: usize,
    pub ln_g: usize,
    pub ln_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSlots {
    pub inner: AttnSlots,
    pub inter: AttnSlots,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub ln_g: usize,
    pub ln_b: usize,
}

/// Positions of every named tensor in a [`ParamSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slots {
    pub token: usize,
    pub type_emb: usize,
    pub pos_emb: usize,
    pub proj_w: usize,
    pub proj_b: usize,
    pub attn: AttnSlots,
    pub blocks: Vec<BlockSlots>,
    pub bce_w: usize,
    pub bce_b: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Init {
    Zero,
    One,
    Const(f64),
    /// Uniform in ±1/√fan_in.
    Uniform(usize),
}

/// Ordered list of tensor names, shapes and initializers for a config.
fn spec(cfg: &ModelConfig) -> (Slots, Vec<(String, Vec<usize>, Init)>) {
    let mut list: Vec<(String, Vec<usize>, Init)> = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init: Init| {
        list.push((name, shape, init));
        list.len() - 1
    };
    let (d, nt) = (cfg.d, TokenType::COUNT);
    let token = add("embed.token".into(), vec![cfg.vocab_size, d], Init::Uniform(d));
    let type_emb = add("enhancer.type".into(), vec![nt, d], Init::Uniform(d));
    let pos_emb = add("enhancer.pos".into(), vec![cfg.l, d], Init::Uniform(d));
    let proj_w = add("enhancer.proj.w".into(), vec![nt, d, d], Init::Uniform(d));
    let proj_b = add("enhancer.proj.b".into(), vec![nt, d], Init::Zero);
    let attn = |add: &mut dyn FnMut(String, Vec<usize>, Init) -> usize, prefix: &str| AttnSlots {
        q: add(format!("{prefix}.q"), vec![d, d], Init::Uniform(d)),
        k: add(format!("{prefix}.k"), vec![d, d], Init::Uniform(d)),
        v: add(format!("{prefix}.v"), vec![d, d], Init::Uniform(d)),
        o: add(format!("{prefix}.o"), vec![d, d], Init::Uniform(d)),
        ln_g: add(format!("{prefix}.ln.g"), vec![d], Init::One),
        ln_b: add(format!("{prefix}.ln.b"), vec![d], Init::Zero),
    };
    let enh = attn(&mut add, "enhancer.attn");
    let mut blocks = Vec::new();
    for b in 0..cfg.blocks {
        let inner = attn(&mut add, &format!("block{b}.inner"));
        let inter = attn(&mut add, &format!("block{b}.inter"));
        blocks.push(BlockSlots {
            inner,
            inter,
            w1: add(format!("block{b}.ffn.w1"), vec![d, cfg.d_ff], Init::Uniform(d)),
            b1: add(format!("block{b}.ffn.b1"), vec![cfg.d_ff], Init::Zero),
            w2: add(format!("block{b}.ffn.w2"), vec![cfg.d_ff, d], Init::Uniform(cfg.d_ff)),
            b2: add(format!("block{b}.ffn.b2"), vec![d], Init::Zero),
            ln_g: add(format!("block{b}.ffn.ln.g"), vec![d], Init::One),
            ln_b: add(format!("block{b}.ffn.ln.b"), vec![d], Init::Zero),
        });
    }
    let bce_w = add("bce.w".into(), vec![1], Init::Const(4.0));
    let bce_b = add("bce.b".into(), vec![1], Init::Zero);
    let slots = Slots {
        token,
        type_emb,
        pos_emb,
        proj_w,
        proj_b,
        attn: enh,
        blocks,
        bce_w,
        bce_b,
    };
    (slots, list)
}

pub fn slots(cfg: &ModelConfig) -> Slots {
    spec(cfg).0
}

/// All trainable tensors, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> ParamSet<T> {
    /// Seeded initialization: matrices and embeddings uniform in ±1/√fan_in,
    /// biases zero, layer-norm gains one. The padding token row is zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> ParamSet<T> {
        let (slots, list) = spec(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::with_capacity(list.len());
        for (name, shape, init) in list {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zero => vec![T::zero(); n],
                Init::One => vec![T::one(); n],
                Init::Const(c) => vec![T::of(c); n],
                Init::Uniform(fan_in) => {
                    let s = 1.0 / (fan_in as f64).sqrt();
                    (0..n).map(|_| T::of(rng.random_range(-1.0..1.0) * s)).collect()
                }
            };
            tensors.push(Tensor { name, shape, data });
        }
        tensors[slots.token].data[..cfg.d].fill(T::zero());
        ParamSet { tensors }
    }

    pub fn zeros_like(&self) -> ParamSet<T> {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![T::zero(); t.data.len()],
                })
                .collect(),
        }
    }

    pub fn get(&self, i: usize) -> &[T] {
        &self.tensors[i].data
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.tensors[i].data
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &ParamSet<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x *= s;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|&x| U::of(x.f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Checks names and shapes against a config.
    pub fn check_against(&self, cfg: &ModelConfig) -> Result<()> {
        let (_, list) = spec(cfg);
        if list.len() != self.tensors.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, found {}",
                list.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape, _), t) in list.iter().zip(&self.tensors) {
            if name != &t.name || shape != &t.shape {
                return Err(Error::Format(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {:?}",
                    t.name, t.shape, shape
                )));
            }
            if t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Format(format!("tensor `{name}` has wrong length")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelConfig {
        ModelConfig {
            vocab_size: 10,
            d: 8,
            l: 12,
            heads: 2,
            blocks: 2,
            d_ff: 16,
            mode: EnhancerMode::Full,
        }
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let a = ParamSet::<f32>::init(&toy(), 5);
        assert_eq!(a, ParamSet::<f32>::init(&toy(), 5));
        assert_ne!(a, ParamSet::<f32>::init(&toy(), 6));
        a.check_against(&toy()).unwrap();
        let s = slots(&toy());
        assert!(a.get(s.token)[..8].iter().all(|&x| x == 0.0));
        assert!(a.get(s.attn.ln_g).iter().all(|&x| x == 1.0));
        assert_eq!(a.get(s.bce_w), &[4.0]);
        let bound = 1.0 / 8f32.sqrt();
        assert!(a.get(s.proj_w).iter().all(|x| x.abs() <= bound));
        assert_eq!(a.tensors[s.blocks[1].ln_b].name, "block1.ffn.ln.b");
    }

    #[test]
    fn heads_must_divide_d() {
        let mut c = toy();
        c.heads = 3;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
