//! Synthetic grid cities with a planted travel-cost rule.
//!
//! Segment travel time depends only on topology (choice, connectivity) and
//! length, so a model that learns the rule in one city can apply it to
//! another. The seed also fixes a city-level style (grid rotation and block
//! spacing) that differs between cities without affecting the cost rule.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::road_network::{
    compute_cost_labels, CostLabels, DemandSet, RoadNetwork, Segment, Trajectory, TIME_SLICES,
};
use crate::routing::shortest_path;
use crate::seed;
use crate::space_syntax;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Intersection displacement as a fraction of the block spacing.
    pub jitter: f64,
    pub trips: usize,
    /// Log-scale spread of the per-trip cost perturbation.
    pub trip_noise: f64,
    /// Log-scale spread of recorded traversal times around the planted time.
    pub sample_noise: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, rows: usize, cols: usize, jitter: f64) -> Self {
        SynthConfig {
            seed,
            rows,
            cols,
            jitter,
            trips: 1500,
            trip_noise: 0.15,
            sample_noise: 0.1,
        }
    }
}

/// Ground-truth travel times of a synthetic city.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCost {
    /// Noise-free travel time per segment at slice factor 1.
    pub rule_time_s: Vec<f64>,
    /// Fixed per-segment multiplicative noise.
    pub segment_noise: Vec<f64>,
}

impl PlantedCost {
    /// Noise-free rule value.
    pub fn rule_time(&self, segment: usize, slice: usize) -> f64 {
        self.rule_time_s[segment] * slice_factor(slice)
    }

    /// Planted mean travel time including the per-segment noise.
    pub fn time(&self, segment: usize, slice: usize) -> f64 {
        self.rule_time(segment, slice) * self.segment_noise[segment]
    }

    pub fn times(&self, slice: usize) -> Vec<f64> {
        (0..self.rule_time_s.len())
            .map(|s| self.time(s, slice))
            .collect()
    }
}

/// Peak hours are slower, nights faster.
pub fn slice_factor(slice: usize) -> f64 {
    match slice {
        7..=9 | 17..=19 => 1.35,
        0..=5 => 0.85,
        _ => 1.0,
    }
}

/// Free-flow speed in m/s from the normalized choice share and degree.
pub fn planted_speed(choice_share: f64, connectivity: usize) -> f64 {
    (5.0 + 12.0 * choice_share.sqrt() - 0.5 * (connectivity as f64 - 4.0)).max(2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub network: RoadNetwork,
    pub labels: CostLabels,
    /// Raw trajectories with per-segment traversal times, before filtering.
    pub trajectories: Vec<Trajectory>,
    pub demands: DemandSet,
    pub planted: PlantedCost,
}

pub fn synth_city(seed: u64, rows: usize, cols: usize, jitter: f64) -> Result<SyntheticCity> {
    synth_city_with(&SynthConfig::new(seed, rows, cols, jitter))
}

pub fn synth_city_with(cfg: &SynthConfig) -> Result<SyntheticCity> {
    if cfg.rows < 3 || cfg.cols < 3 {
        return Err(Error::InvalidArgument(format!(
            "grid must be at least 3x3, got {}x{}",
            cfg.rows, cfg.cols
        )));
    }
    if !(0.0..0.5).contains(&cfg.jitter) {
        return Err(Error::InvalidArgument(format!(
            "jitter must lie in [0, 0.5), got {}",
            cfg.jitter
        )));
    }
    let mut rng = seed::rng(cfg.seed);
    let network = grid_network(cfg, &mut rng)?;

    let m = space_syntax::measures(&network, None);
    let max_choice = m.choice.iter().copied().max().unwrap_or(0).max(1) as f64;
    let rule_time_s: Vec<f64> = network
        .segments()
        .iter()
        .map(|s| {
            let speed = planted_speed(m.choice[s.id] as f64 / max_choice, m.connectivity[s.id]);
            s.length_m / speed
        })
        .collect();
    let segment_noise = (0..network.len())
        .map(|_| (0.05 * rng.sample::<f64, _>(StandardNormal)).exp())
        .collect();
    let planted = PlantedCost {
        rule_time_s,
        segment_noise,
    };

    let n = network.len();
    let mut trajectories = Vec::with_capacity(cfg.trips);
    for traj_id in 0..cfg.trips as u64 {
        let origin = rng.random_range(0..n);
        let mut dest = rng.random_range(0..n - 1);
        if dest >= origin {
            dest += 1;
        }
        let slice = rng.random_range(0..TIME_SLICES);
        let weights: Vec<f64> = planted
            .times(slice)
            .into_iter()
            .map(|w| w * (cfg.trip_noise * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        let segments = shortest_path(&network, &weights, origin, dest)?;
        let times = segments
            .iter()
            .map(|&s| {
                let mut dt = planted.time(s, slice)
                    * (cfg.sample_noise * rng.sample::<f64, _>(StandardNormal)).exp();
                if rng.random_bool(0.01) {
                    dt *= 5.0;
                }
                dt
            })
            .collect();
        trajectories.push(Trajectory {
            traj_id,
            time_slice: slice,
            segments,
            times: Some(times),
        });
    }

    let labels = compute_cost_labels(&network, &trajectories);
    let demands = DemandSet::from_trajectories(&network, &trajectories)?;
    Ok(SyntheticCity {
        network,
        labels,
        trajectories,
        demands,
        planted,
    })
}

fn grid_network(cfg: &SynthConfig, rng: &mut seed::Rng) -> Result<RoadNetwork> {
    let (rows, cols) = (cfg.rows, cfg.cols);
    let rotation = rng.random_range(0.0..90.0f64).to_radians();
    let spacing = rng.random_range(120.0..220.0);
    let (sin, cos) = rotation.sin_cos();

    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let dx = rng.random_range(-1.0..=1.0) * cfg.jitter * spacing;
            let dy = rng.random_range(-1.0..=1.0) * cfg.jitter * spacing;
            let x = c as f64 * spacing + dx;
            let y = r as f64 * spacing + dy;
            nodes.push([x * cos - y * sin, x * sin + y * cos]);
        }
    }
    let node = |r: usize, c: usize| r * cols + c;

    // Horizontal streets first, then vertical, both row-major.
    let mut ends = Vec::new();
    let mut arterial = Vec::new();
    for r in 0..rows {
        for c in 0..cols - 1 {
            ends.push((node(r, c), node(r, c + 1)));
            arterial.push(r % 3 == 1);
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            ends.push((node(r, c), node(r + 1, c)));
            arterial.push(c % 3 == 1);
        }
    }

    let segments = ends
        .iter()
        .zip(&arterial)
        .enumerate()
        .map(|(id, (&(a, b), &art))| {
            let [x1, y1] = nodes[a];
            let [x2, y2] = nodes[b];
            Segment {
                id,
                length_m: (x2 - x1).hypot(y2 - y1),
                road_type: usize::from(art),
                direction_deg: (x2 - x1).atan2(y2 - y1).to_degrees().rem_euclid(360.0),
                midpoint: [(x1 + x2) / 2.0, (y1 + y2) / 2.0],
                geometry: Some(vec![nodes[a], nodes[b]]),
            }
        })
        .collect();

    let mut incident = vec![Vec::new(); nodes.len()];
    for (id, &(a, b)) in ends.iter().enumerate() {
        incident[a].push(id);
        incident[b].push(id);
    }
    let mut adjacency = Vec::new();
    for segs in &incident {
        for (k, &s) in segs.iter().enumerate() {
            for &t in &segs[k + 1..] {
                adjacency.push((s.min(t), s.max(t)));
            }
        }
    }
    adjacency.sort_unstable();
    RoadNetwork::new(format!("grid-{}", cfg.seed), segments, adjacency)
}
