use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    by_name: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamRecord {
    shape: [usize; 2],
    values: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name}")));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("initial value of {name}")));
        }
        self.by_name.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
        Ok(ParamId(self.values.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    /// Total number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Checkpoint as JSON: `name -> {shape, values}`, sorted by name.
    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, ParamRecord> = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(n, t)| {
                (
                    n.as_str(),
                    ParamRecord {
                        shape: [t.rows(), t.cols()],
                        values: t.data().to_vec(),
                    },
                )
            })
            .collect();
        let mut s = serde_json::to_string(&map).expect("parameter map serializes");
        s.push('\n');
        s
    }

    /// Overwrites every parameter from a checkpoint. The checkpoint must hold
    /// exactly the same names and shapes.
    pub fn load_json(&mut self, text: &str, origin: &Path) -> Result<()> {
        let map: BTreeMap<String, ParamRecord> =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.line(), e.to_string()))?;
        for name in map.keys() {
            if !self.by_name.contains_key(name) {
                return Err(Error::parse(origin, 0, format!("unexpected parameter {name}")));
            }
        }
        for (name, &i) in &self.by_name {
            let rec = map
                .get(name)
                .ok_or_else(|| Error::MissingParameter(name.clone()))?;
            let t = &self.values[i];
            if rec.shape != [t.rows(), t.cols()] {
                return Err(Error::Shape {
                    op: "load parameter",
                    lhs: t.shape(),
                    rhs: (rec.shape[0], rec.shape[1]),
                });
            }
            let value = Tensor::new(rec.shape[0], rec.shape[1], rec.values.clone())?;
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("checkpoint value of {name}")));
            }
            self.values[i] = value;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.load_json(&text, path)
    }
}

/// Gradients keyed by parameter.
#[derive(Debug, Clone, Default)]
pub struct ParamGrads {
    grads: BTreeMap<ParamId, Tensor>,
}

impl ParamGrads {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn insert(&mut self, id: ParamId, g: Tensor) {
        self.grads.insert(id, g);
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Global L2 norm over all entries.
    pub fn norm(&self) -> f64 {
        self.grads
            .values()
            .flat_map(|t| t.data())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Lazily places parameters of one store on a graph. A frozen binder puts
/// them on as constants so no gradient flows into them.
#[derive(Debug)]
pub struct Binder<'s> {
    store: &'s ParamStore,
    vars: Vec<Option<Var>>,
    trainable: bool,
}

impl<'s> Binder<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Binder {
            store,
            vars: vec![None; store.len()],
            trainable: true,
        }
    }

    pub fn frozen(store: &'s ParamStore) -> Self {
        Binder {
            trainable: false,
            ..Binder::new(store)
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn var(&mut self, g: &mut Graph, id: ParamId) -> Result<Var> {
        if let Some(v) = self.vars[id.0] {
            return Ok(v);
        }
        let v = g.leaf(self.store.get(id).clone(), self.trainable)?;
        self.vars[id.0] = Some(v);
        Ok(v)
    }

    /// Gradients of the parameters that took part in the computation.
    pub fn collect(&self, grads: &Gradients) -> ParamGrads {
        let mut out = ParamGrads::default();
        if !self.trainable {
            return out;
        }
        for (i, v) in self.vars.iter().enumerate() {
            if let Some(g) = v.and_then(|v| grads.get(v)) {
                out.insert(ParamId(i), g.clone());
            }
        }
        out
    }
}
