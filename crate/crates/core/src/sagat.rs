//! Graph attention encoder whose attention scores see pairwise spatial
//! relations (path co-occurrence, turning angle, midpoint distance).

use serde::{Deserialize, Serialize};

use crate::autodiff::nn::{xavier, Embedding, Linear};
use crate::autodiff::{Binder, Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::partition::Subgraph;
use crate::road_network::{DIRECTION_BUCKETS, TIME_SLICES};
use crate::seed::Rng;
use crate::space_syntax::{EdgeRelations, FeatureTable, CONTINUOUS_FEATURES, RELATION_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SagatConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    /// Number of distinct road types the embedding table holds.
    pub road_types: usize,
    pub road_type_dim: usize,
    pub direction_dim: usize,
    pub time_dim: usize,
    pub leaky_slope: f64,
}

impl Default for SagatConfig {
    fn default() -> Self {
        SagatConfig {
            layers: 6,
            hidden_dim: 64,
            road_types: 8,
            road_type_dim: 4,
            direction_dim: 4,
            time_dim: 4,
            leaky_slope: 0.2,
        }
    }
}

impl SagatConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.hidden_dim,
            self.road_types,
            self.road_type_dim,
            self.direction_dim,
            self.time_dim,
        ];
        if self.layers == 0 || dims.contains(&0) {
            return Err(Error::Config(
                "encoder layers and dimensions must be positive".into(),
            ));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::Config("leaky slope must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Encoder input for one subgraph at one time slice. Messages flow along
/// `src[e] -> dst[e]`; every undirected edge appears in both directions.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub segments: Vec<usize>,
    pub continuous: Tensor,
    pub road_type: Vec<usize>,
    pub direction: Vec<usize>,
    pub time: Vec<usize>,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// Z-scored relation vector per directed edge, `E x 3`.
    pub relations: Tensor,
}

impl GraphBatch {
    pub fn build(
        features: &FeatureTable,
        relations: &EdgeRelations,
        sub: &Subgraph,
        time_slice: usize,
    ) -> Result<Self> {
        if time_slice >= TIME_SLICES {
            return Err(Error::IndexOutOfRange {
                what: "time slice",
                index: time_slice,
                size: TIME_SLICES,
            });
        }
        let n = sub.len();
        let mut cont = Vec::with_capacity(n * CONTINUOUS_FEATURES);
        let mut road_type = Vec::with_capacity(n);
        let mut direction = Vec::with_capacity(n);
        for &s in &sub.segments {
            if s >= features.num_segments() {
                return Err(Error::IndexOutOfRange {
                    what: "segment",
                    index: s,
                    size: features.num_segments(),
                });
            }
            cont.extend_from_slice(features.normalized(s));
            road_type.push(features.raw(s).road_type);
            direction.push(features.raw(s).direction);
        }
        let mut src = Vec::with_capacity(2 * sub.edges.len());
        let mut dst = Vec::with_capacity(2 * sub.edges.len());
        let mut rel = Vec::with_capacity(2 * sub.edges.len() * RELATION_FEATURES);
        for &(a, b) in &sub.edges {
            let (ga, gb) = (sub.segments[a], sub.segments[b]);
            let r = relations.normalized(ga, gb).ok_or_else(|| {
                Error::InvalidNetwork(format!("no spatial relation for segments {ga} and {gb}"))
            })?;
            for (s, d) in [(a, b), (b, a)] {
                src.push(s);
                dst.push(d);
                rel.extend_from_slice(&r);
            }
        }
        let e = src.len();
        Ok(GraphBatch {
            segments: sub.segments.clone(),
            continuous: Tensor::new(n, CONTINUOUS_FEATURES, cont)?,
            road_type,
            direction,
            time: vec![time_slice; n],
            src,
            dst,
            relations: Tensor::new(e, RELATION_FEATURES, rel)?,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.src.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SagatLayer {
    pub a: ParamId,
    pub ws: ParamId,
    pub wt: ParamId,
    pub we: ParamId,
}

#[derive(Debug, Clone)]
pub struct Sagat {
    pub config: SagatConfig,
    pub road_type: Embedding,
    pub direction: Embedding,
    pub time: Embedding,
    pub embed: Linear,
    pub layers: Vec<SagatLayer>,
}

impl Sagat {
    pub fn new(store: &mut ParamStore, config: &SagatConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let c = config;
        let road_type = Embedding::new(store, "sagat.road_type", c.road_types, c.road_type_dim, rng)?;
        let direction =
            Embedding::new(store, "sagat.direction", DIRECTION_BUCKETS, c.direction_dim, rng)?;
        let time = Embedding::new(store, "sagat.time", TIME_SLICES, c.time_dim, rng)?;
        let input = CONTINUOUS_FEATURES + c.road_type_dim + c.direction_dim + c.time_dim;
        let embed = Linear::new(store, "sagat.embed", input, c.hidden_dim, true, rng)?;
        let d = c.hidden_dim;
        let mut layers = Vec::with_capacity(c.layers);
        for l in 0..c.layers {
            let name = |p: &str| format!("sagat.layer{l}.{p}");
            layers.push(SagatLayer {
                a: store.add(name("a"), xavier(d, 1, rng))?,
                ws: store.add(name("Ws"), xavier(d, d, rng))?,
                wt: store.add(name("Wt"), xavier(d, d, rng))?,
                we: store.add(name("We"), xavier(RELATION_FEATURES, d, rng))?,
            });
        }
        Ok(Sagat {
            config: c.clone(),
            road_type,
            direction,
            time,
            embed,
            layers,
        })
    }

    /// Initial node representation: one linear map over continuous features
    /// and the three categorical embeddings.
    pub fn embed_inputs(&self, g: &mut Graph, b: &mut Binder, batch: &GraphBatch) -> Result<Var> {
        for (what, idx, size) in [
            ("road type", &batch.road_type, self.road_type.count),
            ("direction", &batch.direction, self.direction.count),
            ("time slice", &batch.time, self.time.count),
        ] {
            if let Some(&i) = idx.iter().find(|&&i| i >= size) {
                return Err(Error::IndexOutOfRange { what, index: i, size });
            }
        }
        let x = g.constant(batch.continuous.clone())?;
        let rt = self.road_type.forward(g, b, &batch.road_type)?;
        let dir = self.direction.forward(g, b, &batch.direction)?;
        let t = self.time.forward(g, b, &batch.time)?;
        let cat = g.concat(&[x, rt, dir, t])?;
        self.embed.forward(g, b, cat)
    }

    /// One attention layer; also returns the per-edge attention weights.
    pub fn layer(
        &self,
        g: &mut Graph,
        b: &mut Binder,
        l: usize,
        h: Var,
        batch: &GraphBatch,
    ) -> Result<(Var, Option<Var>)> {
        let n = g.value(h).rows();
        if batch.edge_count() == 0 {
            return Ok((h, None));
        }
        let p = self.layers[l];
        let ws = b.var(g, p.ws)?;
        let wt = b.var(g, p.wt)?;
        let we = b.var(g, p.we)?;
        let a = b.var(g, p.a)?;
        let hs = g.matmul(h, ws)?;
        let ht = g.matmul(h, wt)?;
        let si = g.gather(hs, &batch.dst)?;
        let tj = g.gather(ht, &batch.src)?;
        let rel = g.constant(batch.relations.clone())?;
        let er = g.matmul(rel, we)?;
        let sum = g.add(si, tj)?;
        let sum = g.add(sum, er)?;
        let act = g.leaky_relu(sum, self.config.leaky_slope)?;
        let score = g.matmul(act, a)?;
        let alpha = g.group_softmax(score, &batch.dst, n)?;
        let hj = g.gather(h, &batch.src)?;
        let msg = g.mul_col(hj, alpha)?;
        let agg = g.scatter_add(msg, &batch.dst, n)?;
        let agg = g.relu(agg)?;
        Ok((g.add(agg, h)?, Some(alpha)))
    }

    pub fn encode(&self, g: &mut Graph, b: &mut Binder, batch: &GraphBatch) -> Result<Var> {
        let mut h = self.embed_inputs(g, b, batch)?;
        for l in 0..self.layers.len() {
            h = self.layer(g, b, l, h, batch)?.0;
        }
        Ok(h)
    }
}
