use crate::autodiff::{ParamGrads, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of every parameter that has a gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads) -> Result<()> {
        if let Some((id, _)) = grads.iter().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", store.name(id))));
        }
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (id, g) in grads.iter() {
            let i = id.index();
            let (rows, cols) = g.shape();
            let m = self.m[i].get_or_insert_with(|| Tensor::zeros(rows, cols));
            let v = self.v[i].get_or_insert_with(|| Tensor::zeros(rows, cols));
            let p = store.get_mut(id);
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "adam",
                    lhs: p.shape(),
                    rhs: g.shape(),
                });
            }
            for (((pk, &gk), mk), vk) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mk = self.beta1 * *mk + (1.0 - self.beta1) * gk;
                *vk = self.beta2 * *vk + (1.0 - self.beta2) * gk * gk;
                let mhat = *mk / c1;
                let vhat = *vk / c2;
                *pk -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::row(&[1.0, -2.0])).unwrap();
        let mut g = ParamGrads::default();
        g.insert(id, Tensor::row(&[0.3, -5.0]));
        let mut adam = Adam::new(0.01);
        adam.step(&mut s, &g).unwrap();
        let x = s.get(id).data();
        assert!((x[0] - 0.99).abs() < 1e-9);
        assert!((x[1] + 1.99).abs() < 1e-9);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::scalar(3.0)).unwrap();
        let mut adam = Adam::new(0.1);
        for _ in 0..500 {
            let x = s.get(id).item();
            let mut g = ParamGrads::default();
            g.insert(id, Tensor::scalar(2.0 * (x - 1.0)));
            adam.step(&mut s, &g).unwrap();
        }
        assert!((s.get(id).item() - 1.0).abs() < 1e-3);
    }
}
