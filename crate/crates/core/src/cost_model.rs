//! Travel-cost prediction from disentangled semantic and domain latents.
//!
//! A shared encoder produces a representation per segment; two small
//! perceptrons split it into a semantic latent (used to predict travel time
//! and speed) and a domain latent (used to tell the cities apart). Gradient
//! reversal pushes city identity out of the semantic latent and travel-cost
//! content out of the domain latent in a single backward pass.

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::nn::{Activation, Mlp};
use crate::autodiff::{stable_sigmoid, Adam, Binder, Graph, ParamId, ParamStore, Tensor, Var};
use crate::city::CityContext;
use crate::error::{Error, Result};
use crate::partition::Subgraph;
use crate::road_network::{CostLabels, TIME_SLICES};
use crate::sagat::{GraphBatch, Sagat, SagatConfig};
use crate::seed::{self, Rng};

/// Cost types predicted per segment: travel time and speed.
pub const COST_TYPES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub lambda_r: f64,
    pub lambda_d: f64,
    pub lambda_g: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Clusters per training batch.
    pub k: usize,
    /// Total clusters per city; 0 picks a size-based default.
    pub clusters: usize,
    /// Rank pairs sampled per labelled batch member.
    pub pairs_per_node: usize,
    /// Optimizer steps per epoch; 0 means one step per cluster batch and time
    /// slice, so an epoch touches every label about once.
    pub steps_per_epoch: usize,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            layers: 6,
            hidden_dim: 64,
            latent_dim: 32,
            lambda_r: 50.0,
            lambda_d: 100.0,
            lambda_g: 5.0,
            lr: 1e-5,
            epochs: 600,
            k: 3,
            clusters: 0,
            pairs_per_node: 4,
            steps_per_epoch: 0,
        }
    }
}

impl CostConfig {
    pub fn sagat(&self) -> SagatConfig {
        SagatConfig {
            layers: self.layers,
            hidden_dim: self.hidden_dim,
            ..SagatConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sagat().validate()?;
        if self.latent_dim == 0 || self.k == 0 {
            return Err(Error::Config("latent_dim and k must be positive".into()));
        }
        for (name, v) in [
            ("lambda_r", self.lambda_r),
            ("lambda_d", self.lambda_d),
            ("lambda_g", self.lambda_g),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        Ok(())
    }

    pub fn cluster_count(&self) -> Option<usize> {
        (self.clusters > 0).then_some(self.clusters)
    }
}

#[derive(Debug, Clone)]
pub struct CostModel {
    pub config: CostConfig,
    pub sagat: Sagat,
    pub semantic: Mlp,
    pub domain: Mlp,
    pub predictor: Mlp,
    pub discriminator: Mlp,
    /// Per-cost-type divisor applied to labels; stored with the checkpoint
    /// but never trained.
    pub label_scale: ParamId,
}

/// Encoder outputs for one batch.
#[derive(Debug, Clone, Copy)]
pub struct Latents {
    pub h: Var,
    pub z_s: Var,
    pub z_d: Var,
}

impl CostModel {
    pub fn new(store: &mut ParamStore, config: &CostConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (d, z) = (config.hidden_dim, config.latent_dim);
        let sagat = Sagat::new(store, &config.sagat(), rng)?;
        let semantic = Mlp::new(store, "semantic", &[d, d, z], Activation::Identity, rng)?;
        let domain = Mlp::new(store, "domain", &[d, d, z], Activation::Identity, rng)?;
        let predictor = Mlp::new(store, "predictor", &[z, d, COST_TYPES], Activation::Softplus, rng)?;
        let discriminator =
            Mlp::new(store, "discriminator", &[z, d, 1], Activation::Identity, rng)?;
        let label_scale = store.add("label_scale", Tensor::filled(1, COST_TYPES, 1.0))?;
        Ok(CostModel {
            config: config.clone(),
            sagat,
            semantic,
            domain,
            predictor,
            discriminator,
            label_scale,
        })
    }

    pub fn latents(&self, g: &mut Graph, b: &mut Binder, batch: &GraphBatch) -> Result<Latents> {
        let h = self.sagat.encode(g, b, batch)?;
        let z_s = self.semantic.forward(g, b, h)?;
        let z_d = self.domain.forward(g, b, h)?;
        Ok(Latents { h, z_s, z_d })
    }

    /// Normalized (time, speed) predictions, strictly positive.
    pub fn predict(&self, g: &mut Graph, b: &mut Binder, z: Var) -> Result<Var> {
        self.predictor.forward(g, b, z)
    }

    /// Discriminator logits; `sigmoid` of these is the source-city probability.
    pub fn discriminate_logits(&self, g: &mut Graph, b: &mut Binder, z: Var) -> Result<Var> {
        self.discriminator.forward(g, b, z)
    }

    pub fn discriminate(&self, g: &mut Graph, b: &mut Binder, z: Var) -> Result<Var> {
        let logits = self.discriminate_logits(g, b, z)?;
        g.sigmoid(logits)
    }

    pub fn label_scale(&self, store: &ParamStore) -> [f64; COST_TYPES] {
        let t = store.get(self.label_scale).data();
        [t[0], t[1]]
    }
}

/// Labelled rows of a batch: local row indices and normalized targets.
#[derive(Debug, Clone)]
pub struct BatchLabels {
    pub rows: Vec<usize>,
    pub targets: Tensor,
}

impl BatchLabels {
    pub fn collect(
        batch: &GraphBatch,
        labels: &CostLabels,
        slice: usize,
        scale: [f64; COST_TYPES],
    ) -> Self {
        let mut rows = Vec::new();
        let mut data = Vec::new();
        for (i, &s) in batch.segments.iter().enumerate() {
            if let Some(l) = labels.get(s, slice) {
                rows.push(i);
                data.push(l.travel_time_s / scale[0]);
                data.push(l.speed_mps / scale[1]);
            }
        }
        let targets = Tensor::new(rows.len(), COST_TYPES, data).expect("two values per row");
        BatchLabels { rows, targets }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Mean over samples of the squared L2 error of the cost vector.
pub fn loss_mse(g: &mut Graph, pred: Var, target: &Tensor) -> Result<Var> {
    if target.rows() == 0 {
        return Err(Error::InvalidArgument("mse over an empty batch".into()));
    }
    let y = g.constant(target.clone())?;
    let diff = g.sub(pred, y)?;
    let sq = g.square(diff)?;
    let total = g.sum(sq)?;
    g.scale(total, 1.0 / target.rows() as f64)
}

/// Pairwise ranking loss: mean over pairs and cost types of the binary cross
/// entropy between `sigmoid(pred_i - pred_j)` and the observed order. Tied
/// targets are skipped per cost type. `None` when no pair is usable.
pub fn loss_rank(
    g: &mut Graph,
    pred: Var,
    target: &Tensor,
    pairs: &[(usize, usize)],
) -> Result<Option<Var>> {
    let m = target.cols();
    let mut q = Vec::with_capacity(pairs.len() * m);
    let mut mask = Vec::with_capacity(pairs.len() * m);
    let mut valid = 0usize;
    for &(i, j) in pairs {
        for c in 0..m {
            let (yi, yj) = (target.get(i, c), target.get(j, c));
            if yi == yj {
                q.push(0.0);
                mask.push(0.0);
            } else {
                q.push(if yi > yj { 1.0 } else { 0.0 });
                mask.push(1.0);
                valid += 1;
            }
        }
    }
    if valid == 0 {
        return Ok(None);
    }
    let w = 1.0 / valid as f64;
    mask.iter_mut().for_each(|x| *x *= w);
    let (left, right): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    let pi = g.gather(pred, &left)?;
    let pj = g.gather(pred, &right)?;
    let d = g.sub(pi, pj)?;
    let q = g.constant(Tensor::new(pairs.len(), m, q)?)?;
    let mask = g.constant(Tensor::new(pairs.len(), m, mask)?)?;
    let sp = g.softplus(d)?;
    let qd = g.mul(q, d)?;
    let bce = g.sub(sp, qd)?;
    let weighted = g.mul(bce, mask)?;
    Ok(Some(g.sum(weighted)?))
}

/// Summed binary cross entropy of logits against one constant label.
fn bce_logits_sum(g: &mut Graph, logits: Var, label: f64) -> Result<Var> {
    let sp = g.softplus(logits)?;
    let total = g.sum(sp)?;
    if label == 0.0 {
        return Ok(total);
    }
    let s = g.sum(logits)?;
    let ls = g.scale(s, label)?;
    g.sub(total, ls)
}

/// Binary cross entropy averaged over source (label 1) and target (label 0)
/// logits together.
pub fn loss_dis(g: &mut Graph, source_logits: Var, target_logits: Var) -> Result<Var> {
    let n = g.value(source_logits).rows() + g.value(target_logits).rows();
    let a = bce_logits_sum(g, source_logits, 1.0)?;
    let b = bce_logits_sum(g, target_logits, 0.0)?;
    let s = g.add(a, b)?;
    g.scale(s, 1.0 / n as f64)
}

/// Binary cross entropy of probabilities `p` against labels `d`.
pub fn bce(p: &[f64], d: &[f64]) -> f64 {
    let n = p.len() as f64;
    p.iter()
        .zip(d)
        .map(|(&p, &d)| -(d * p.ln() + (1.0 - d) * (1.0 - p).ln()))
        .sum::<f64>()
        / n
}

/// Sum of squared row cosines between the two latents.
fn cos2_sum(g: &mut Graph, z_s: Var, z_d: Var) -> Result<Var> {
    let c = g.cosine_similarity(z_s, z_d)?;
    let c2 = g.square(c)?;
    g.sum(c2)
}

/// Mean squared cosine similarity between paired rows.
pub fn loss_orth(g: &mut Graph, z_s: Var, z_d: Var) -> Result<Var> {
    let n = g.value(z_s).rows();
    let s = cos2_sum(g, z_s, z_d)?;
    g.scale(s, 1.0 / n as f64)
}

/// Component losses of one step. `l_total` is the signed objective
/// `L_pred(z_s) - λd·L_dis(z_s) + λd·L_dis(z_d) - L_pred(z_d) + λg·L_og`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossReport {
    pub l_mse: f64,
    pub l_rank: f64,
    pub l_dis_s: f64,
    pub l_dis_d: f64,
    pub l_og: f64,
    pub l_total: f64,
    /// Prediction loss on the domain latent (MSE plus weighted rank).
    pub l_pred_d: f64,
}

impl LossReport {
    fn accumulate(&mut self, other: &LossReport) {
        self.l_mse += other.l_mse;
        self.l_rank += other.l_rank;
        self.l_dis_s += other.l_dis_s;
        self.l_dis_d += other.l_dis_d;
        self.l_og += other.l_og;
        self.l_total += other.l_total;
        self.l_pred_d += other.l_pred_d;
    }

    fn scaled(mut self, f: f64) -> LossReport {
        for v in [
            &mut self.l_mse,
            &mut self.l_rank,
            &mut self.l_dis_s,
            &mut self.l_dis_d,
            &mut self.l_og,
            &mut self.l_total,
            &mut self.l_pred_d,
        ] {
            *v *= f;
        }
        self
    }
}

/// Labelled source batch and unlabelled target batch for one step.
#[derive(Debug, Clone)]
pub struct StepInput {
    pub source: GraphBatch,
    pub labels: BatchLabels,
    pub pairs: Vec<(usize, usize)>,
    pub target: GraphBatch,
}

/// Builds the training objective on `g`. With `reverse` the adversarial
/// terms pass through gradient reversal, so `backward` of the returned
/// variable yields the min-max update; without it the returned variable is
/// the plain sum of all terms with positive signs.
pub fn build_objective(
    model: &CostModel,
    g: &mut Graph,
    b: &mut Binder,
    input: &StepInput,
    reverse: bool,
) -> Result<(Var, LossReport)> {
    let cfg = &model.config;
    if input.labels.is_empty() {
        return Err(Error::InvalidArgument("source batch has no labels".into()));
    }
    let src = model.latents(g, b, &input.source)?;
    let tgt = model.latents(g, b, &input.target)?;

    let flip = |g: &mut Graph, v: Var| if reverse { g.grad_reverse(v) } else { Ok(v) };

    // Prediction from the semantic latent.
    let zs_l = g.gather(src.z_s, &input.labels.rows)?;
    let pred_s = model.predict(g, b, zs_l)?;
    let mse_s = loss_mse(g, pred_s, &input.labels.targets)?;
    let rank_s = loss_rank(g, pred_s, &input.labels.targets, &input.pairs)?;
    let l_pred_s = match rank_s {
        Some(r) => {
            let wr = g.scale(r, cfg.lambda_r)?;
            g.add(mse_s, wr)?
        }
        None => mse_s,
    };

    // Domain discrimination of the semantic latent, reversed into the encoder.
    let zs_src = flip(g, src.z_s)?;
    let zs_tgt = flip(g, tgt.z_s)?;
    let ls = model.discriminate_logits(g, b, zs_src)?;
    let lt = model.discriminate_logits(g, b, zs_tgt)?;
    let dis_s = loss_dis(g, ls, lt)?;

    // Domain discrimination of the domain latent.
    let ls = model.discriminate_logits(g, b, src.z_d)?;
    let lt = model.discriminate_logits(g, b, tgt.z_d)?;
    let dis_d = loss_dis(g, ls, lt)?;

    // Cost prediction from the domain latent, reversed into the encoder.
    let zd_l = g.gather(src.z_d, &input.labels.rows)?;
    let zd_l = flip(g, zd_l)?;
    let pred_d = model.predict(g, b, zd_l)?;
    let mse_d = loss_mse(g, pred_d, &input.labels.targets)?;
    let l_pred_d = match loss_rank(g, pred_d, &input.labels.targets, &input.pairs)? {
        Some(r) => {
            let wr = g.scale(r, cfg.lambda_r)?;
            g.add(mse_d, wr)?
        }
        None => mse_d,
    };

    // Orthogonality over all batch members.
    let n = (input.source.len() + input.target.len()) as f64;
    let o1 = cos2_sum(g, src.z_s, src.z_d)?;
    let o2 = cos2_sum(g, tgt.z_s, tgt.z_d)?;
    let o = g.add(o1, o2)?;
    let og = g.scale(o, 1.0 / n)?;

    let t1 = g.scale(dis_s, cfg.lambda_d)?;
    let t2 = g.scale(dis_d, cfg.lambda_d)?;
    let t3 = g.scale(og, cfg.lambda_g)?;
    let mut total = g.add(l_pred_s, t1)?;
    total = g.add(total, t2)?;
    total = g.add(total, l_pred_d)?;
    total = g.add(total, t3)?;

    let v = |v: Var| g.value(v).item();
    let report = LossReport {
        l_mse: v(mse_s),
        l_rank: rank_s.map_or(0.0, v),
        l_dis_s: v(dis_s),
        l_dis_d: v(dis_d),
        l_og: v(og),
        l_total: v(l_pred_s) - cfg.lambda_d * v(dis_s) + cfg.lambda_d * v(dis_d) - v(l_pred_d)
            + cfg.lambda_g * v(og),
        l_pred_d: v(l_pred_d),
    };
    Ok((total, report))
}

/// One adversarial optimizer step.
pub fn train_step(
    model: &CostModel,
    store: &mut ParamStore,
    adam: &mut Adam,
    input: &StepInput,
) -> Result<LossReport> {
    let (report, grads) = {
        let mut g = Graph::new();
        let mut b = Binder::new(store);
        let (total, report) = build_objective(model, &mut g, &mut b, input, true)?;
        if !report.l_total.is_finite() {
            return Err(Error::NonFinite("training loss".into()));
        }
        let grads = g.backward(total)?;
        (report, b.collect(&grads))
    };
    adam.step(store, &grads)?;
    Ok(report)
}

/// Uniform pairs of distinct labelled rows, indexed into the label list.
pub fn sample_pairs(count: usize, labelled: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    if labelled < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..labelled);
            let mut j = rng.random_range(0..labelled - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Mean travel time and mean speed over all labels, used as label divisors.
pub fn label_means(labels: &CostLabels) -> Result<[f64; COST_TYPES]> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no cost labels".into()));
    }
    let n = labels.len() as f64;
    let (mut t, mut s) = (0.0, 0.0);
    for (_, l) in labels.iter() {
        t += l.travel_time_s;
        s += l.speed_mps;
    }
    Ok([t / n, s / n])
}

#[derive(Debug, Clone)]
pub struct TrainedCost {
    pub model: CostModel,
    pub store: ParamStore,
    pub history: Vec<LossReport>,
}

impl TrainedCost {
    pub fn initialize(config: &CostConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let model = CostModel::new(&mut store, config, &mut seed::rng(seed))?;
        Ok(TrainedCost {
            model,
            store,
            history: Vec::new(),
        })
    }

    /// Sets the label divisors to the mean time and speed of `labels`.
    pub fn fit_label_scale(&mut self, labels: &CostLabels) -> Result<()> {
        let means = label_means(labels)?;
        *self.store.get_mut(self.model.label_scale) = Tensor::row(&means);
        Ok(())
    }
}

fn steps_per_epoch(config: &CostConfig, labelled: &CityContext) -> usize {
    if config.steps_per_epoch > 0 {
        return config.steps_per_epoch;
    }
    let k = labelled.partition.cluster_count();
    k.div_ceil(config.k.min(k)) * TIME_SLICES
}

/// Adversarial training. `labelled` supplies cost labels; `other` only
/// contributes unlabelled batches for the domain terms. Labels are divided
/// by the label scale stored in `state` (see [`TrainedCost::fit_label_scale`]).
pub fn train_cost(
    state: &mut TrainedCost,
    labelled: &CityContext,
    labels: &CostLabels,
    other: &CityContext,
    epochs: usize,
    seed: u64,
    mut on_epoch: impl FnMut(usize, &LossReport),
) -> Result<()> {
    let config = state.model.config.clone();
    let scale = state.model.label_scale(&state.store);
    let mut rng = seed::rng(seed);
    let mut adam = Adam::new(config.lr);
    let k_src = config.k.min(labelled.partition.cluster_count());
    let k_tgt = config.k.min(other.partition.cluster_count());
    let steps = steps_per_epoch(&config, labelled);

    for epoch in 0..epochs {
        let mut sum = LossReport::default();
        let mut counted = 0usize;
        for _ in 0..steps {
            let slice = rng.random_range(0..TIME_SLICES);
            let sub = labelled.partition.sample_batch(&labelled.network, k_src, &mut rng)?;
            let source = GraphBatch::build(&labelled.features, &labelled.relations, &sub, slice)?;
            let batch_labels = BatchLabels::collect(&source, labels, slice, scale);
            let tsub = other.partition.sample_batch(&other.network, k_tgt, &mut rng)?;
            let target = GraphBatch::build(&other.features, &other.relations, &tsub, slice)?;
            if batch_labels.is_empty() {
                log::warn!("epoch {epoch}: batch without labels skipped");
                continue;
            }
            let pairs = sample_pairs(
                config.pairs_per_node * batch_labels.len(),
                batch_labels.len(),
                &mut rng,
            );
            let input = StepInput {
                source,
                labels: batch_labels,
                pairs,
                target,
            };
            let report = train_step(&state.model, &mut state.store, &mut adam, &input)?;
            sum.accumulate(&report);
            counted += 1;
        }
        let mean = sum.scaled(1.0 / counted.max(1) as f64);
        on_epoch(epoch, &mean);
        state.history.push(mean);
    }
    Ok(())
}

pub fn save_loss_csv(history: &[LossReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,l_mse,l_rank,l_dis_s,l_dis_d,l_og,l_total\n");
    for (e, r) in history.iter().enumerate() {
        out.push_str(&format!(
            "{e},{},{},{},{},{},{}\n",
            r.l_mse, r.l_rank, r.l_dis_s, r.l_dis_d, r.l_og, r.l_total
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Frozen-model outputs for a whole city, per time slice.
#[derive(Debug, Clone)]
pub struct CityEncoding {
    /// `costs[slice][segment]` in label units (seconds, metres per second).
    pub costs: Vec<Vec<[f64; COST_TYPES]>>,
    /// Semantic latents per slice, `N x latent_dim`.
    pub z_s: Vec<Tensor>,
    /// Domain latents per slice, `N x latent_dim`.
    pub z_d: Vec<Tensor>,
}

pub fn encode_slice(
    model: &CostModel,
    store: &ParamStore,
    city: &CityContext,
    slice: usize,
) -> Result<(Vec<[f64; COST_TYPES]>, Tensor, Tensor)> {
    let sub = Subgraph::whole(&city.network);
    let batch = GraphBatch::build(&city.features, &city.relations, &sub, slice)?;
    let mut g = Graph::new();
    let mut b = Binder::frozen(store);
    let lat = model.latents(&mut g, &mut b, &batch)?;
    let pred = model.predict(&mut g, &mut b, lat.z_s)?;
    let scale = model.label_scale(store);
    let p = g.value(pred);
    let costs = (0..p.rows())
        .map(|r| [p.get(r, 0) * scale[0], p.get(r, 1) * scale[1]])
        .collect();
    Ok((costs, g.value(lat.z_s).clone(), g.value(lat.z_d).clone()))
}

pub fn encode_city(model: &CostModel, store: &ParamStore, city: &CityContext) -> Result<CityEncoding> {
    use rayon::prelude::*;
    let parts: Vec<_> = (0..TIME_SLICES)
        .into_par_iter()
        .map(|t| encode_slice(model, store, city, t))
        .collect::<Result<_>>()?;
    let mut enc = CityEncoding {
        costs: Vec::with_capacity(TIME_SLICES),
        z_s: Vec::with_capacity(TIME_SLICES),
        z_d: Vec::with_capacity(TIME_SLICES),
    };
    for (c, zs, zd) in parts {
        enc.costs.push(c);
        enc.z_s.push(zs);
        enc.z_d.push(zd);
    }
    Ok(enc)
}

/// Accuracy of a freshly trained discriminator-shaped probe that tries to
/// tell latents of city A (`a`) from city B (`b`). Rows are shuffled and
/// split 70/30; accuracy is measured on the held-out part.
pub fn domain_probe(a: &Tensor, b: &Tensor, hidden: usize, seed: u64) -> Result<f64> {
    if a.cols() != b.cols() || a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Shape {
            op: "domain_probe",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut rng = seed::rng(seed);
    let mut rows: Vec<(Vec<f64>, f64)> = (0..a.rows())
        .map(|r| (a.row_slice(r).to_vec(), 1.0))
        .chain((0..b.rows()).map(|r| (b.row_slice(r).to_vec(), 0.0)))
        .collect();
    rows.shuffle(&mut rng);
    let split = rows.len() * 7 / 10;
    let (train, test) = rows.split_at(split);
    if test.is_empty() || train.is_empty() {
        return Err(Error::InvalidArgument("too few latents for a probe".into()));
    }
    // Standardize with training statistics so the probe sees a fixed scale.
    let width = a.cols();
    let train_rows: Vec<Vec<f64>> = train.iter().map(|(x, _)| x.clone()).collect();
    let z = crate::space_syntax::ZScore::fit(&train_rows, width);
    let to_tensor = |set: &[(Vec<f64>, f64)]| -> Result<(Tensor, Vec<f64>)> {
        let data: Vec<Vec<f64>> = set.iter().map(|(x, _)| z.apply(x)).collect();
        Ok((Tensor::from_rows(&data)?, set.iter().map(|(_, y)| *y).collect()))
    };
    let (xtr, ytr) = to_tensor(train)?;
    let (xte, yte) = to_tensor(test)?;

    let mut store = ParamStore::new();
    let probe = Mlp::new(&mut store, "probe", &[width, hidden, 1], Activation::Identity, &mut rng)?;
    let mut adam = Adam::new(1e-2);
    for _ in 0..300 {
        let grads = {
            let mut g = Graph::new();
            let mut bind = Binder::new(&store);
            let x = g.constant(xtr.clone())?;
            let logits = probe.forward(&mut g, &mut bind, x)?;
            let y = g.constant(Tensor::column(&ytr))?;
            let sp = g.softplus(logits)?;
            let yl = g.mul(y, logits)?;
            let l = g.sub(sp, yl)?;
            let loss = g.mean(l)?;
            let grads = g.backward(loss)?;
            bind.collect(&grads)
        };
        adam.step(&mut store, &grads)?;
    }
    let mut g = Graph::new();
    let mut bind = Binder::frozen(&store);
    let x = g.constant(xte)?;
    let logits = probe.forward(&mut g, &mut bind, x)?;
    let correct = g
        .value(logits)
        .data()
        .iter()
        .zip(&yte)
        .filter(|(&l, &y)| (stable_sigmoid(l) >= 0.5) == (y == 1.0))
        .count();
    Ok(correct as f64 / yte.len() as f64)
}
