use crate::model::ParamSet;

/// Adaptive moment estimation with per-tensor freezing.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: ParamSet<f32>,
    v: ParamSet<f32>,
}

impl Adam {
    pub fn new(params: &ParamSet<f32>, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update; tensors with `frozen[i]` set are left untouched.
    pub fn step(&mut self, params: &mut ParamSet<f32>, grads: &ParamSet<f32>, frozen: &[bool]) {
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        // Folded bias correction: lr·√c2/c1 · m / (√v + eps·√c2).
        let step = (self.lr * c2.sqrt() / c1) as f32;
        let eps = (self.eps * c2.sqrt()) as f32;
        for (i, p) in params.tensors.iter_mut().enumerate() {
            if frozen.get(i).copied().unwrap_or(false) {
                continue;
            }
            let g = &grads.tensors[i].data;
            let m = &mut self.m.tensors[i].data;
            let v = &mut self.v.tensors[i].data;
            for j in 0..p.data.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                p.data[j] -= step * m[j] / (v[j].sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tensor;

    fn one(x: f32) -> ParamSet<f32> {
        ParamSet {
            tensors: vec![Tensor {
                name: "x".into(),
                shape: vec![1],
                data: vec![x],
            }],
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one(1.0);
        let mut opt = Adam::new(&p, 0.01);
        opt.step(&mut p, &one(3.0), &[false]);
        assert!((p.tensors[0].data[0] - 0.99).abs() < 1e-6);
        opt.step(&mut p, &one(3.0), &[true]);
        assert!((p.tensors[0].data[0] - 0.99).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = one(5.0);
        let mut opt = Adam::new(&p, 0.1);
        for _ in 0..500 {
            let g = one(2.0 * (p.tensors[0].data[0] - 2.0));
            opt.step(&mut p, &g, &[]);
        }
        assert!((p.tensors[0].data[0] - 2.0).abs() < 1e-2);
    }
}
