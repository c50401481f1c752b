use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rand::Rng as _;

use crate::road_network::RoadNetwork;
use crate::routing::BfsTree;
use crate::seed;
use crate::space_syntax::ZScore;

pub const RELATION_FEATURES: usize = 3;

/// Pairwise spatial relation between two segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialRelation {
    /// Share of sampled shortest paths that contain both segments.
    pub bet: f64,
    /// Turning angle in radians, in `[0, pi]`.
    pub angle: f64,
    /// Midpoint distance in meters.
    pub dist: f64,
}

impl SpatialRelation {
    pub fn to_array(self) -> [f64; RELATION_FEATURES] {
        [self.bet, self.angle, self.dist]
    }
}

/// Absolute bearing difference folded into `[0, pi]`.
pub fn turning_angle(bearing_a_deg: f64, bearing_b_deg: f64) -> f64 {
    // a - b and b - a differ only in sign, so taking abs first keeps this
    // exactly symmetric.
    let d = (bearing_a_deg - bearing_b_deg).abs() % 360.0;
    let folded = if d > 180.0 { 360.0 - d } else { d };
    folded.to_radians().clamp(0.0, PI)
}

fn midpoint_distance(net: &RoadNetwork, i: usize, j: usize) -> f64 {
    let [x1, y1] = net.segment(i).midpoint;
    let [x2, y2] = net.segment(j).midpoint;
    (x1 - x2).hypot(y1 - y2)
}

/// Canonical shortest paths for `count` ordered origin/destination pairs
/// drawn uniformly with replacement. Unreachable draws are dropped.
pub fn sample_canonical_paths(net: &RoadNetwork, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let n = net.len();
    if n < 2 {
        return Vec::new();
    }
    let mut rng = seed::rng(seed);
    let mut by_source: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for slot in 0..count {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        by_source.entry(a).or_default().push((slot, b));
    }
    let mut paths: Vec<(usize, Vec<usize>)> = Vec::with_capacity(count);
    for (src, targets) in by_source {
        let tree = BfsTree::new(net, src, None);
        for (slot, dst) in targets {
            if let Some(p) = tree.path_to(dst) {
                paths.push((slot, p));
            }
        }
    }
    paths.sort_by_key(|(slot, _)| *slot);
    paths.into_iter().map(|(_, p)| p).collect()
}

/// Canonical shortest paths for every ordered pair of distinct, mutually
/// reachable segments.
pub fn all_canonical_paths(net: &RoadNetwork) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for src in 0..net.len() {
        let tree = BfsTree::new(net, src, None);
        for dst in 0..net.len() {
            if dst != src {
                if let Some(p) = tree.path_to(dst) {
                    out.push(p);
                }
            }
        }
    }
    out
}

pub fn spatial_relation(
    net: &RoadNetwork,
    i: usize,
    j: usize,
    sampled_paths: &[Vec<usize>],
) -> SpatialRelation {
    let both = sampled_paths
        .iter()
        .filter(|p| p.contains(&i) && p.contains(&j))
        .count();
    let bet = if sampled_paths.is_empty() {
        0.0
    } else {
        both as f64 / sampled_paths.len() as f64
    };
    SpatialRelation {
        bet,
        angle: turning_angle(net.segment(i).direction_deg, net.segment(j).direction_deg),
        dist: midpoint_distance(net, i, j),
    }
}

/// Spatial relations for every adjacency pair, with per-city z-score
/// statistics over those pairs.
#[derive(Debug, Clone)]
pub struct EdgeRelations {
    index: HashMap<(usize, usize), usize>,
    raw: Vec<SpatialRelation>,
    stats: ZScore,
}

impl EdgeRelations {
    pub fn get(&self, i: usize, j: usize) -> Option<SpatialRelation> {
        self.index
            .get(&(i.min(j), i.max(j)))
            .map(|&k| self.raw[k])
    }

    /// Z-scored relation vector for an adjacent pair.
    pub fn normalized(&self, i: usize, j: usize) -> Option<[f64; RELATION_FEATURES]> {
        self.get(i, j).map(|r| {
            let v = self.stats.apply(&r.to_array());
            [v[0], v[1], v[2]]
        })
    }

    pub fn stats(&self) -> &ZScore {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

pub fn edge_relations(net: &RoadNetwork, sampled_paths: &[Vec<usize>]) -> EdgeRelations {
    let pairs = net.adjacency();
    let index: HashMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();

    let mut both = vec![0usize; pairs.len()];
    let mut on_path = vec![false; net.len()];
    for path in sampled_paths {
        for &s in path {
            on_path[s] = true;
        }
        for &s in path {
            for &t in net.neighbors(s) {
                if s < t && on_path[t] {
                    both[index[&(s, t)]] += 1;
                }
            }
        }
        for &s in path {
            on_path[s] = false;
        }
    }

    let total = sampled_paths.len().max(1) as f64;
    let raw: Vec<SpatialRelation> = pairs
        .iter()
        .zip(&both)
        .map(|(&(i, j), &c)| SpatialRelation {
            bet: if sampled_paths.is_empty() { 0.0 } else { c as f64 / total },
            angle: turning_angle(net.segment(i).direction_deg, net.segment(j).direction_deg),
            dist: midpoint_distance(net, i, j),
        })
        .collect();
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| r.to_array().to_vec()).collect();
    let stats = ZScore::fit(&rows, RELATION_FEATURES);
    EdgeRelations { index, raw, stats }
}
