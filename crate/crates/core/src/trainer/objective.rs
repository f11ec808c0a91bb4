use super::loss::{bce, margin, Loss};
use crate::error::{Error, Result};
use crate::model::{Model, PackedMsa, ParamSet, Real};
use crate::scorer::{measure_backward, measure_value, pool_backward, pool_packed, Measure};

/// What a training pair is scored and penalized with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub loss: Loss,
    pub measure: Measure,
    pub symmetrize: bool,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss<T> {
    pub loss: T,
    /// Raw measure value (a similarity for cosine).
    pub value: T,
}

/// Loss of one labeled pair; when `grads` is given, adds its gradient there.
pub fn pair_loss<T: Real>(
    model: &Model<T>,
    a: &PackedMsa,
    b: &PackedMsa,
    y: i8,
    obj: &Objective,
    mut grads: Option<&mut ParamSet<T>>,
) -> Result<PairLoss<T>> {
    let d = model.cfg.d;
    let (ya, ca) = model.encode(a);
    let (yb, cb) = model.encode(b);
    let fa = pool_packed(&a.layout, &ya, d)?;
    let fb = pool_packed(&b.layout, &yb, d)?;
    let value = measure_value(&fa, &fb, obj.measure, obj.symmetrize);
    let cosine = obj.measure == Measure::Cosine;
    let s = if cosine { T::one() - value } else { value };
    let (loss, ds) = match obj.loss {
        Loss::Margin => margin(s, y, T::of(obj.gamma)),
        Loss::Bce => {
            let (w, bias) = (
                model.params.get(model.slots.bce_w)[0],
                model.params.get(model.slots.bce_b)[0],
            );
            let out = bce(s, y, w, bias);
            if let Some(g) = grads.as_deref_mut() {
                g.get_mut(model.slots.bce_w)[0] += out.dw;
                g.get_mut(model.slots.bce_b)[0] += out.db;
            }
            (out.loss, out.ds)
        }
    };
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {:?}", loss.f64())));
    }
    if let Some(g) = grads {
        if ds != T::zero() {
            let dv = if cosine { -ds } else { ds };
            let (da, db) = measure_backward(&fa, &fb, obj.measure, obj.symmetrize, dv);
            model.encode_backward(a, &ca, pool_backward(&a.layout, &fa, &da), g);
            model.encode_backward(b, &cb, pool_backward(&b.layout, &fb, &db), g);
        }
    }
    Ok(PairLoss { loss, value })
}
