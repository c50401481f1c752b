//! Breadth-first and node-weighted shortest paths on the segment graph.
//!
//! Both searches break ties towards lower segment ids. For BFS the resulting
//! tree holds, for every reachable target, the lexicographically smallest
//! among all minimum-hop paths from the root.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::road_network::RoadNetwork;

pub const UNREACHED: usize = usize::MAX;

/// Canonical BFS tree from one root.
#[derive(Debug, Clone)]
pub struct BfsTree {
    pub root: usize,
    /// Hop distance, `UNREACHED` when not reached.
    pub depth: Vec<usize>,
    /// Parent in the canonical tree, `UNREACHED` for the root and unreached nodes.
    pub parent: Vec<usize>,
    /// Nodes in visit order, root first.
    pub order: Vec<usize>,
}

impl BfsTree {
    /// BFS scanning neighbors in ascending id order; a node's parent is its
    /// first discoverer. `radius` bounds the explored hop depth.
    pub fn new(net: &RoadNetwork, root: usize, radius: Option<usize>) -> Self {
        let n = net.len();
        let mut depth = vec![UNREACHED; n];
        let mut parent = vec![UNREACHED; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        depth[root] = 0;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            if radius.is_some_and(|r| depth[u] >= r) {
                continue;
            }
            for &v in net.neighbors(u) {
                if depth[v] == UNREACHED {
                    depth[v] = depth[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        BfsTree {
            root,
            depth,
            parent,
            order,
        }
    }

    pub fn reached(&self, v: usize) -> bool {
        self.depth[v] != UNREACHED
    }

    /// Root-to-target path, or `None` when the target was not reached.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        if !self.reached(target) {
            return None;
        }
        let mut path = vec![target];
        let mut v = target;
        while v != self.root {
            v = self.parent[v];
            path.push(v);
        }
        path.reverse();
        Some(path)
    }
}

/// Minimum-hop canonical path between two segments.
pub fn bfs_path(net: &RoadNetwork, origin: usize, dest: usize) -> Option<Vec<usize>> {
    BfsTree::new(net, origin, None).path_to(dest)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sum of node weights along a path, accumulated in path order.
pub fn path_cost(weights: &[f64], path: &[usize]) -> f64 {
    path.iter().fold(0.0, |acc, &s| acc + weights[s])
}

/// Node-weighted Dijkstra. The cost of a path is the sum of the weights of
/// every segment on it, origin and destination included. Weights must be
/// positive.
pub fn shortest_path(
    net: &RoadNetwork,
    weights: &[f64],
    origin: usize,
    dest: usize,
) -> Result<Vec<usize>> {
    let n = net.len();
    if weights.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} node weights, got {}",
            weights.len()
        )));
    }
    for s in [origin, dest] {
        if s >= n {
            return Err(Error::IndexOutOfRange {
                what: "segment",
                index: s,
                size: n,
            });
        }
    }
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w > 0.0))
    {
        return Err(Error::InvalidArgument(format!(
            "weight of segment {i} must be positive and finite, got {w}"
        )));
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![UNREACHED; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[origin] = weights[origin];
    heap.push(HeapItem {
        cost: dist[origin],
        node: origin,
    });
    while let Some(HeapItem { cost, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if node == dest {
            break;
        }
        for &v in net.neighbors(node) {
            let next = cost + weights[v];
            if !done[v] && next < dist[v] {
                dist[v] = next;
                parent[v] = node;
                heap.push(HeapItem { cost: next, node: v });
            }
        }
    }

    if !done[dest] {
        return Err(Error::Unreachable {
            from: origin,
            to: dest,
        });
    }
    let mut path = vec![dest];
    let mut v = dest;
    while v != origin {
        v = parent[v];
        path.push(v);
    }
    path.reverse();
    Ok(path)
}
