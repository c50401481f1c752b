use rand::Rng as _;

use crate::autodiff::{Binder, Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::Result;
use crate::seed::Rng;

/// Uniform Glorot initialization for a `fan_in x fan_out` weight.
pub fn xavier(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(rows, cols, data).expect("shape matches data")
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let weight = store.add(format!("{name}.weight"), xavier(input, output, rng))?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), Tensor::zeros(1, output))?)
        } else {
            None
        };
        Ok(Linear {
            weight,
            bias,
            input,
            output,
        })
    }

    pub fn forward(&self, g: &mut Graph, b: &mut Binder, x: Var) -> Result<Var> {
        let w = b.var(g, self.weight)?;
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(id) => {
                let bias = b.var(g, id)?;
                g.add_row(y, bias)
            }
            None => Ok(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    Softplus,
    Identity,
}

pub fn activate(g: &mut Graph, x: Var, act: Activation) -> Result<Var> {
    match act {
        Activation::Relu => g.relu(x),
        Activation::LeakyRelu => g.leaky_relu(x, 0.2),
        Activation::Sigmoid => g.sigmoid(x),
        Activation::Softplus => g.softplus(x),
        Activation::Identity => Ok(x),
    }
}

/// Linear layers with ReLU between them and a configurable output activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub output: Activation,
}

impl Mlp {
    /// `dims` lists the layer widths including input and output.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        output: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect::<Result<_>>()?;
        Ok(Mlp { layers, output })
    }

    pub fn forward(&self, g: &mut Graph, b: &mut Binder, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, b, h)?;
            if i + 1 < self.layers.len() {
                h = g.relu(h)?;
            }
        }
        activate(g, h, self.output)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub count: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        count: usize,
        dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let table = store.add(format!("{name}.table"), xavier(count, dim, rng))?;
        Ok(Embedding { table, count, dim })
    }

    pub fn forward(&self, g: &mut Graph, b: &mut Binder, index: &[usize]) -> Result<Var> {
        let t = b.var(g, self.table)?;
        g.gather(t, index)
    }
}
