//! Space Syntax measures on the segment graph.
//!
//! All four measures come from one canonical BFS tree per source segment:
//! total depth sums hop counts, integration squares the reachable count over
//! total depth, connectivity is the degree, and choice counts the ordered
//! pairs whose canonical shortest path passes through a segment as an
//! interior node.

mod features;
mod relations;

use rayon::prelude::*;

use crate::road_network::RoadNetwork;
use crate::routing::{BfsTree, UNREACHED};

pub use features::{
    assemble_features, FeatureRecord, FeatureTable, SegmentFeatures, ZScore, CONTINUOUS_FEATURES,
};
pub use relations::{
    all_canonical_paths, edge_relations, sample_canonical_paths, spatial_relation,
    EdgeRelations, SpatialRelation, RELATION_FEATURES,
};

/// Dense all-pairs hop counts. `None` marks pairs that are not reachable
/// (or lie beyond the radius).
#[derive(Debug, Clone, PartialEq)]
pub struct StepDepthMatrix {
    n: usize,
    data: Vec<u32>,
}

impl StepDepthMatrix {
    pub fn get(&self, from: usize, to: usize) -> Option<u32> {
        let v = self.data[from * self.n + to];
        (v != u32::MAX).then_some(v)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

pub fn step_depth_all_pairs(net: &RoadNetwork, radius: Option<usize>) -> StepDepthMatrix {
    let n = net.len();
    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|src| {
            BfsTree::new(net, src, radius)
                .depth
                .iter()
                .map(|&d| if d == UNREACHED { u32::MAX } else { d as u32 })
                .collect()
        })
        .collect();
    StepDepthMatrix {
        n,
        data: rows.concat(),
    }
}

/// Per-segment Space Syntax measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Measures {
    pub total_depth: Vec<u64>,
    /// Number of other segments reachable within the radius.
    pub reach: Vec<usize>,
    pub integration: Vec<f64>,
    pub connectivity: Vec<usize>,
    pub choice: Vec<u64>,
}

struct SourceTally {
    total_depth: Vec<u64>,
    reach: Vec<usize>,
    choice: Vec<u64>,
}

impl SourceTally {
    fn zeros(n: usize) -> Self {
        SourceTally {
            total_depth: vec![0; n],
            reach: vec![0; n],
            choice: vec![0; n],
        }
    }

    fn merge(mut self, other: SourceTally) -> Self {
        // Integer sums: the result does not depend on reduction order.
        for (a, b) in self.total_depth.iter_mut().zip(other.total_depth) {
            *a += b;
        }
        for (a, b) in self.reach.iter_mut().zip(other.reach) {
            *a += b;
        }
        for (a, b) in self.choice.iter_mut().zip(other.choice) {
            *a += b;
        }
        self
    }
}

/// Computes all four measures. `radius` bounds the hop depth considered;
/// `None` uses every reachable pair.
pub fn measures(net: &RoadNetwork, radius: Option<usize>) -> Measures {
    let n = net.len();
    let tally = (0..n)
        .into_par_iter()
        .fold(
            || SourceTally::zeros(n),
            |mut acc, src| {
                let tree = BfsTree::new(net, src, radius);
                acc.total_depth[src] = tree.order.iter().map(|&v| tree.depth[v] as u64).sum();
                acc.reach[src] = tree.order.len() - 1;

                // v is interior to the canonical path src -> k exactly when k
                // is a proper descendant of v in the tree.
                let mut subtree = vec![0u64; n];
                for &v in tree.order.iter().rev() {
                    subtree[v] += 1;
                    if v != src {
                        subtree[tree.parent[v]] += subtree[v];
                        acc.choice[v] += subtree[v] - 1;
                    }
                }
                acc
            },
        )
        .reduce(|| SourceTally::zeros(n), SourceTally::merge);

    let integration = tally
        .total_depth
        .iter()
        .zip(&tally.reach)
        .map(|(&td, &nc)| {
            if td == 0 {
                0.0
            } else {
                (nc as f64).powi(2) / td as f64
            }
        })
        .collect();

    Measures {
        total_depth: tally.total_depth,
        reach: tally.reach,
        integration,
        connectivity: (0..n).map(|i| net.degree(i)).collect(),
        choice: tally.choice,
    }
}

pub fn total_depth(net: &RoadNetwork) -> Vec<u64> {
    measures(net, None).total_depth
}

pub fn integration(net: &RoadNetwork) -> Vec<f64> {
    measures(net, None).integration
}

pub fn connectivity(net: &RoadNetwork) -> Vec<usize> {
    (0..net.len()).map(|i| net.degree(i)).collect()
}

pub fn choice(net: &RoadNetwork) -> Vec<u64> {
    measures(net, None).choice
}
