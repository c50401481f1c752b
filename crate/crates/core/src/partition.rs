//! Balanced connected clustering of the segment graph and cluster-batch
//! sampling for training.
//!
//! Seeds are placed by a farthest-point BFS sweep, clusters grow breadth
//! first with the smallest cluster always growing next, and a refinement pass
//! moves boundary segments from larger to smaller neighbouring clusters while
//! keeping every donor cluster connected.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road_network::RoadNetwork;
use crate::routing::{BfsTree, UNREACHED};
use crate::seed::{self, Rng};

const UNASSIGNED: usize = usize::MAX;

/// Allowed relative deviation of a cluster size from `N / K`.
pub const BALANCE_TOLERANCE: f64 = 0.3;

/// Cluster count used when none is configured.
pub fn default_cluster_count(n: usize) -> usize {
    (n / 256).max(4).min(n.max(1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn from_assignment(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&c) = assignment.iter().find(|&&c| c >= k) {
            return Err(Error::IndexOutOfRange {
                what: "cluster id",
                index: c,
                size: k,
            });
        }
        Ok(Partition { assignment, k })
    }

    pub fn cluster_count(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, segment: usize) -> usize {
        self.assignment[segment]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Segments of one cluster in ascending order.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&s| self.assignment[s] == cluster)
            .collect()
    }

    /// Inclusive size bounds implied by [`BALANCE_TOLERANCE`].
    pub fn size_bounds(n: usize, k: usize) -> (usize, usize) {
        let ideal = n as f64 / k as f64;
        let lo = (ideal * (1.0 - BALANCE_TOLERANCE)).ceil() as usize;
        let hi = (ideal * (1.0 + BALANCE_TOLERANCE)).floor() as usize;
        (lo.max(1), hi.max(lo.max(1)))
    }

    /// Union of `count` distinct clusters drawn uniformly.
    pub fn sample_batch(&self, net: &RoadNetwork, count: usize, rng: &mut Rng) -> Result<Subgraph> {
        if count == 0 || count > self.k {
            return Err(Error::InvalidArgument(format!(
                "cannot sample {count} of {} clusters",
                self.k
            )));
        }
        let mut chosen = vec![false; self.k];
        for c in index::sample(rng, self.k, count) {
            chosen[c] = true;
        }
        let segments = (0..self.assignment.len())
            .filter(|&s| chosen[self.assignment[s]])
            .collect();
        Subgraph::induced(net, segments)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |e: csv::Error| Error::parse(path, 0, e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for (segment_id, &cluster_id) in self.assignment.iter().enumerate() {
            w.serialize(Row {
                segment_id,
                cluster_id,
            })
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>, net: &RoadNetwork) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let mut assignment = vec![UNASSIGNED; net.len()];
        for (line, row) in r.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::parse(path, line + 2, e.to_string()))?;
            if row.segment_id >= net.len() {
                return Err(Error::parse(
                    path,
                    line + 2,
                    format!("unknown segment {}", row.segment_id),
                ));
            }
            assignment[row.segment_id] = row.cluster_id;
        }
        if let Some(s) = assignment.iter().position(|&c| c == UNASSIGNED) {
            return Err(Error::parse(path, 0, format!("segment {s} has no cluster")));
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        Partition::from_assignment(assignment, k)
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    segment_id: usize,
    cluster_id: usize,
}

/// A set of segments with the adjacency edges internal to it. Local node
/// `i` is global segment `segments[i]`; edges use local indices with
/// `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub segments: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl Subgraph {
    /// `segments` must be distinct; their order defines the local indices.
    pub fn induced(net: &RoadNetwork, segments: Vec<usize>) -> Result<Self> {
        let mut local = vec![UNASSIGNED; net.len()];
        for (i, &s) in segments.iter().enumerate() {
            if s >= net.len() {
                return Err(Error::IndexOutOfRange {
                    what: "segment",
                    index: s,
                    size: net.len(),
                });
            }
            if local[s] != UNASSIGNED {
                return Err(Error::InvalidArgument(format!("segment {s} listed twice")));
            }
            local[s] = i;
        }
        let mut edges: Vec<(usize, usize)> = net
            .adjacency()
            .iter()
            .filter_map(|&(a, b)| {
                let (la, lb) = (local[a], local[b]);
                (la != UNASSIGNED && lb != UNASSIGNED).then(|| (la.min(lb), la.max(lb)))
            })
            .collect();
        edges.sort_unstable();
        Ok(Subgraph { segments, edges })
    }

    pub fn whole(net: &RoadNetwork) -> Self {
        Subgraph::induced(net, (0..net.len()).collect()).expect("all ids valid")
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

pub fn partition(net: &RoadNetwork, k: usize, seed: u64) -> Result<Partition> {
    let n = net.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} must lie in 1..={n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let seeds = farthest_point_seeds(net, k, &mut rng);
    let mut assignment = grow(net, &seeds);
    refine(net, &mut assignment, k);
    Partition::from_assignment(assignment, k)
}

fn farthest_point_seeds(net: &RoadNetwork, k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = net.len();
    let mut dist = vec![usize::MAX; n];
    let mut seeds = Vec::with_capacity(k);
    let mut next = rng.random_range(0..n);
    loop {
        seeds.push(next);
        dist[next] = 0;
        let tree = BfsTree::new(net, next, None);
        for v in 0..n {
            if tree.depth[v] != UNREACHED {
                dist[v] = dist[v].min(tree.depth[v]);
            }
        }
        if seeds.len() == k {
            return seeds;
        }
        // Unreached segments count as infinitely far; ties go to the lowest id.
        next = (0..n)
            .filter(|&v| dist[v] > 0)
            .max_by(|&a, &b| dist[a].cmp(&dist[b]).then(b.cmp(&a)))
            .expect("k <= n leaves a candidate");
    }
}

fn grow(net: &RoadNetwork, seeds: &[usize]) -> Vec<usize> {
    let n = net.len();
    let k = seeds.len();
    let mut assignment = vec![UNASSIGNED; n];
    let mut sizes = vec![1usize; k];
    let mut queues: Vec<VecDeque<usize>> = seeds.iter().map(|&s| VecDeque::from([s])).collect();
    for (c, &s) in seeds.iter().enumerate() {
        assignment[s] = c;
    }
    let mut active: Vec<bool> = vec![true; k];
    let mut remaining = n - k;
    while remaining > 0 {
        let Some(c) = (0..k).filter(|&c| active[c]).min_by_key(|&c| (sizes[c], c)) else {
            break;
        };
        let mut grew = false;
        while let Some(&u) = queues[c].front() {
            if let Some(&v) = net.neighbors(u).iter().find(|&&v| assignment[v] == UNASSIGNED) {
                assignment[v] = c;
                sizes[c] += 1;
                queues[c].push_back(v);
                remaining -= 1;
                grew = true;
                break;
            }
            queues[c].pop_front();
        }
        if !grew {
            active[c] = false;
        }
    }
    // Components without a seed join the currently smallest cluster.
    for s in 0..n {
        if assignment[s] != UNASSIGNED {
            continue;
        }
        let c = (0..k).min_by_key(|&c| (sizes[c], c)).expect("k >= 1");
        let tree = BfsTree::new(net, s, None);
        for &v in &tree.order {
            assignment[v] = c;
            sizes[c] += 1;
        }
    }
    assignment
}

/// True if `cluster` minus `removed` is still connected (or empty).
fn connected_without(net: &RoadNetwork, assignment: &[usize], cluster: usize, removed: usize) -> bool {
    let members: Vec<usize> = (0..assignment.len())
        .filter(|&s| assignment[s] == cluster && s != removed)
        .collect();
    let Some(&start) = members.first() else {
        return true;
    };
    let mut seen = vec![false; assignment.len()];
    seen[start] = true;
    let mut stack = vec![start];
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in net.neighbors(u) {
            if v != removed && !seen[v] && assignment[v] == cluster {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == members.len()
}

fn refine(net: &RoadNetwork, assignment: &mut [usize], k: usize) {
    let n = assignment.len();
    let (lo, hi) = Partition::size_bounds(n, k);
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    // Every move lowers the sum of squared sizes, so this terminates.
    while sizes.iter().any(|&s| s < lo || s > hi) {
        let mut moves: Vec<(usize, usize, usize)> = Vec::new();
        for v in 0..n {
            let from = assignment[v];
            for &u in net.neighbors(v) {
                let to = assignment[u];
                if to != from && sizes[from] >= sizes[to] + 2 {
                    moves.push((v, from, to));
                }
            }
        }
        moves.sort_unstable_by_key(|&(v, from, to)| {
            (std::cmp::Reverse(sizes[from] - sizes[to]), v, to)
        });
        moves.dedup();
        let Some(&(v, from, to)) = moves
            .iter()
            .find(|&&(v, from, _)| connected_without(net, assignment, from, v))
        else {
            return;
        };
        assignment[v] = to;
        sizes[from] -= 1;
        sizes[to] += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> RoadNetwork {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        RoadNetwork::from_topology(n, &edges).unwrap()
    }

    #[test]
    fn trivial_cluster_counts() {
        let net = path(7);
        let p = partition(&net, 1, 0).unwrap();
        assert!(p.assignment().iter().all(|&c| c == 0));
        let p = partition(&net, 7, 0).unwrap();
        assert_eq!(p.sizes(), vec![1; 7]);
        assert!(partition(&net, 8, 0).is_err());
        assert!(partition(&net, 0, 0).is_err());
    }

    #[test]
    fn path_splits_evenly() {
        let net = path(12);
        let p = partition(&net, 3, 5).unwrap();
        assert_eq!(p.sizes(), vec![4, 4, 4]);
    }

    #[test]
    fn batches() {
        let net = path(12);
        let p = partition(&net, 3, 5).unwrap();
        let mut rng = seed::rng(1);
        let all = p.sample_batch(&net, 3, &mut rng).unwrap();
        assert_eq!(all, Subgraph::whole(&net));
        let one = p.sample_batch(&net, 1, &mut rng).unwrap();
        assert_eq!(one.len(), 4);
        assert_eq!(one.edges.len(), 3);
        assert!(p.sample_batch(&net, 4, &mut rng).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let net = path(9);
        let p = partition(&net, 3, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("p.csv");
        p.save_csv(&f).unwrap();
        let text = std::fs::read_to_string(&f).unwrap();
        assert!(text.starts_with("segment_id,cluster_id\n"));
        assert_eq!(Partition::load_csv(&f, &net).unwrap(), p);
    }

    #[test]
    fn disconnected_input_is_fully_assigned() {
        let net = RoadNetwork::from_topology(6, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let p = partition(&net, 2, 0).unwrap();
        assert_eq!(p.sizes().iter().sum::<usize>(), 6);
    }
}
