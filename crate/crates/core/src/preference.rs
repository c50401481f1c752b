//! Route preference learning and trajectory generation.
//!
//! Each segment gets a positive preference cost: a positively weighted sum of
//! the predicted travel costs plus a learned hidden cost of its semantic
//! latent. Routes are preference-shortest paths. Training lowers the
//! preference of observed routes relative to the current optimal route for
//! the same origin and destination.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::nn::{Activation, Mlp};
use crate::autodiff::{stable_softplus, Adam, Binder, Graph, ParamId, ParamStore, Tensor, Var};
use crate::cost_model::{CityEncoding, COST_TYPES};
use crate::error::{Error, Result};
use crate::road_network::{DemandSet, RoadNetwork, Trajectory, TIME_SLICES};
pub use crate::routing::{path_cost, shortest_path};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferenceConfig {
    pub hidden_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PreferenceConfig {
    fn default() -> Self {
        PreferenceConfig {
            hidden_dim: 32,
            lr: 1e-2,
            epochs: 100,
            batch_size: 64,
        }
    }
}

impl PreferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "preference hidden_dim and batch_size must be positive".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("preference lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PreferenceModel {
    /// Unconstrained cost weights, `COST_TYPES x 1`; effective weights are
    /// their softplus.
    pub raw_weights: ParamId,
    pub hidden: Mlp,
}

/// Cost inputs for one slice: normalized predicted costs (`N x 2`) and
/// semantic latents (`N x latent`).
#[derive(Debug, Clone)]
pub struct SliceInputs {
    pub costs: Tensor,
    pub z_s: Tensor,
}

/// Preference inputs for all slices of one city.
#[derive(Debug, Clone)]
pub struct PreferenceInputs {
    pub slices: Vec<SliceInputs>,
}

impl PreferenceInputs {
    /// Uses predicted costs divided by `scale`, so both cost types enter the
    /// weighted sum on a comparable footing.
    pub fn from_encoding(enc: &CityEncoding, scale: [f64; COST_TYPES]) -> Result<Self> {
        let slices = enc
            .costs
            .iter()
            .zip(&enc.z_s)
            .map(|(costs, z)| {
                let data = costs
                    .iter()
                    .flat_map(|c| [c[0] / scale[0], c[1] / scale[1]])
                    .collect();
                Ok(SliceInputs {
                    costs: Tensor::new(costs.len(), COST_TYPES, data)?,
                    z_s: z.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(PreferenceInputs { slices })
    }

    pub fn num_segments(&self) -> usize {
        self.slices.first().map_or(0, |s| s.costs.rows())
    }
}

/// `softplus(x) = 1` at this value.
const UNIT_WEIGHT_RAW: f64 = 0.541_324_854_612_918_1;

impl PreferenceModel {
    pub fn new(
        store: &mut ParamStore,
        latent_dim: usize,
        config: &PreferenceConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        let raw_weights = store.add(
            "pref.raw_weights",
            Tensor::filled(COST_TYPES, 1, UNIT_WEIGHT_RAW),
        )?;
        let hidden = Mlp::new(
            store,
            "pref.hidden",
            &[latent_dim, config.hidden_dim, 1],
            Activation::Softplus,
            rng,
        )?;
        Ok(PreferenceModel {
            raw_weights,
            hidden,
        })
    }

    pub fn weights(&self, store: &ParamStore) -> [f64; COST_TYPES] {
        let raw = store.get(self.raw_weights).data();
        [stable_softplus(raw[0]), stable_softplus(raw[1])]
    }

    /// Hidden cost per row of `z_s`, `N x 1`.
    pub fn hidden_cost(&self, g: &mut Graph, b: &mut Binder, z_s: Var) -> Result<Var> {
        self.hidden.forward(g, b, z_s)
    }

    /// Preference per segment, `N x 1`.
    pub fn preference(&self, g: &mut Graph, b: &mut Binder, inputs: &SliceInputs) -> Result<Var> {
        let raw = b.var(g, self.raw_weights)?;
        let w = g.softplus(raw)?;
        let c = g.constant(inputs.costs.clone())?;
        let observable = g.matmul(c, w)?;
        let z = g.constant(inputs.z_s.clone())?;
        let hid = self.hidden_cost(g, b, z)?;
        g.add(observable, hid)
    }

    pub fn slice_preferences(&self, store: &ParamStore, inputs: &SliceInputs) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let mut b = Binder::frozen(store);
        let p = self.preference(&mut g, &mut b, inputs)?;
        Ok(g.value(p).data().to_vec())
    }

    /// Preference values for every slice, `[slice][segment]`.
    pub fn preferences(&self, store: &ParamStore, inputs: &PreferenceInputs) -> Result<Vec<Vec<f64>>> {
        inputs
            .slices
            .iter()
            .map(|s| self.slice_preferences(store, s))
            .collect()
    }
}

/// Visit-count difference between the observed and the optimal path.
fn count_difference(n: usize, observed: &[usize], optimal: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for &s in observed {
        c[s] += 1.0;
    }
    for &s in optimal {
        c[s] -= 1.0;
    }
    c
}

/// Per-trajectory optimal paths under the current preferences. Trajectories
/// whose destination is unreachable yield `None`.
fn optimal_paths(
    net: &RoadNetwork,
    prefs: &[Vec<f64>],
    batch: &[&Trajectory],
) -> Result<Vec<Option<Vec<usize>>>> {
    batch
        .par_iter()
        .map(|t| match shortest_path(net, &prefs[t.time_slice], t.origin(), t.destination()) {
            Ok(p) => Ok(Some(p)),
            Err(Error::Unreachable { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Mean over the batch of `p(observed) - p(optimal)` with the optimal paths
/// held fixed. Returns the loss variable, its value, and how many
/// trajectories contributed.
pub fn preference_loss(
    model: &PreferenceModel,
    g: &mut Graph,
    b: &mut Binder,
    net: &RoadNetwork,
    inputs: &PreferenceInputs,
    batch: &[&Trajectory],
) -> Result<Option<(Var, usize)>> {
    let mut prefs = vec![Vec::new(); TIME_SLICES];
    for t in batch {
        if prefs[t.time_slice].is_empty() {
            prefs[t.time_slice] = model.slice_preferences(b.store(), &inputs.slices[t.time_slice])?;
        }
    }
    let optimal = optimal_paths(net, &prefs, batch)?;
    let n = net.len();
    let mut diff_by_slice: Vec<Option<Vec<f64>>> = vec![None; TIME_SLICES];
    let mut used = 0usize;
    for (t, opt) in batch.iter().zip(&optimal) {
        let Some(opt) = opt else {
            log::warn!("trajectory {}: destination unreachable, skipped", t.traj_id);
            continue;
        };
        let d = count_difference(n, &t.segments, opt);
        let slot = diff_by_slice[t.time_slice].get_or_insert_with(|| vec![0.0; n]);
        slot.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        used += 1;
    }
    if used == 0 {
        return Ok(None);
    }
    let mut total: Option<Var> = None;
    for (slice, diff) in diff_by_slice.into_iter().enumerate() {
        let Some(diff) = diff else { continue };
        let p = model.preference(g, b, &inputs.slices[slice])?;
        let c = g.constant(Tensor::column(&diff))?;
        let prod = g.mul(p, c)?;
        let s = g.sum(prod)?;
        total = Some(match total {
            Some(t) => g.add(t, s)?,
            None => s,
        });
    }
    let total = total.expect("at least one slice contributed");
    Ok(Some((g.scale(total, 1.0 / used as f64)?, used)))
}

/// Loss of every optimizer step, and its mean per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceHistory {
    pub batches: Vec<f64>,
    pub epochs: Vec<f64>,
}

/// Adam on the preference loss; optimal paths are recomputed every step.
pub fn train_preference(
    model: &PreferenceModel,
    store: &mut ParamStore,
    net: &RoadNetwork,
    inputs: &PreferenceInputs,
    trajectories: &[Trajectory],
    config: &PreferenceConfig,
    epochs: usize,
    seed: u64,
) -> Result<PreferenceHistory> {
    config.validate()?;
    if inputs.num_segments() != net.len() {
        return Err(Error::InvalidArgument(format!(
            "preference inputs cover {} segments, network has {}",
            inputs.num_segments(),
            net.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut adam = Adam::new(config.lr);
    let mut order: Vec<&Trajectory> = trajectories.iter().collect();
    let mut history = PreferenceHistory::default();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut steps) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let step = {
                let mut g = Graph::new();
                let mut b = Binder::new(store);
                preference_loss(model, &mut g, &mut b, net, inputs, batch)?
                    .map(|(loss, _)| -> Result<_> {
                        let value = g.value(loss).item();
                        let grads = g.backward(loss)?;
                        Ok((value, b.collect(&grads)))
                    })
                    .transpose()?
            };
            if let Some((value, grads)) = step {
                adam.step(store, &grads)?;
                history.batches.push(value);
                sum += value;
                steps += 1;
            }
        }
        history
            .epochs
            .push(if steps == 0 { 0.0 } else { sum / steps as f64 });
    }
    Ok(history)
}

/// Generated trajectories plus the demands that could not be served.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub trajectories: Vec<Trajectory>,
    pub infeasible: Vec<(u64, String)>,
}

impl Generated {
    pub fn save_infeasible(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("od_id,status\n");
        for (id, status) in &self.infeasible {
            out.push_str(&format!("{id},{status}\n"));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// One preference-shortest path per demand. `prefs[slice][segment]`.
pub fn generate(net: &RoadNetwork, demands: &DemandSet, prefs: &[Vec<f64>]) -> Result<Generated> {
    if prefs.len() != TIME_SLICES {
        return Err(Error::InvalidArgument(format!(
            "expected preferences for {TIME_SLICES} slices, got {}",
            prefs.len()
        )));
    }
    let results: Vec<Result<Option<Vec<usize>>>> = demands
        .demands()
        .par_iter()
        .map(|d| match shortest_path(net, &prefs[d.time_slice], d.origin, d.destination) {
            Ok(p) => Ok(Some(p)),
            Err(Error::Unreachable { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut out = Generated {
        trajectories: Vec::new(),
        infeasible: Vec::new(),
    };
    for (d, r) in demands.demands().iter().zip(results) {
        match r? {
            Some(segments) => out
                .trajectories
                .push(Trajectory::new(d.od_id, d.time_slice, segments)),
            None => out.infeasible.push((d.od_id, "unreachable".to_string())),
        }
    }
    Ok(out)
}

/// Minimum-hop baseline: every segment costs the same.
pub fn generate_uniform(net: &RoadNetwork, demands: &DemandSet) -> Result<Generated> {
    let prefs = vec![vec![1.0; net.len()]; TIME_SLICES];
    generate(net, demands, &prefs)
}

/// Random-walk baseline: from the origin, repeatedly step to a uniformly
/// chosen unvisited neighbour until the destination is reached, the walk is
/// stuck, or it has `max_len` segments.
pub fn generate_random_walk(
    net: &RoadNetwork,
    demands: &DemandSet,
    max_len: usize,
    seed: u64,
) -> Generated {
    let mut rng = seed::rng(seed);
    let mut visited = vec![false; net.len()];
    let trajectories = demands
        .demands()
        .iter()
        .map(|d| {
            let mut path = vec![d.origin];
            visited[d.origin] = true;
            let mut cur = d.origin;
            while cur != d.destination && path.len() < max_len {
                let options: Vec<usize> = net
                    .neighbors(cur)
                    .iter()
                    .copied()
                    .filter(|&v| !visited[v])
                    .collect();
                if options.is_empty() {
                    break;
                }
                cur = options[rng.random_range(0..options.len())];
                visited[cur] = true;
                path.push(cur);
            }
            for &s in &path {
                visited[s] = false;
            }
            Trajectory::new(d.od_id, d.time_slice, path)
        })
        .collect();
    Generated {
        trajectories,
        infeasible: Vec::new(),
    }
}
