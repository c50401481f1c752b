//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use gtg_core::autodiff::{Graph, Tensor, Var};
use gtg_core::road_network::RoadNetwork;
use gtg_core::Result;
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected graph: a random spanning tree plus `extra` random edges.
pub fn random_connected(rng: &mut Rng, n: usize, extra: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

pub fn network(n: usize, edges: &[(usize, usize)]) -> RoadNetwork {
    RoadNetwork::from_topology(n, edges).expect("valid topology")
}

pub fn adjacency_matrix(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    adj
}

pub const INF: usize = usize::MAX / 4;

pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Every shortest path from `s` to `t`, as full node sequences.
pub fn all_shortest_paths(adj: &[Vec<bool>], d: &[Vec<usize>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn walk(
        adj: &[Vec<bool>],
        d: &[Vec<usize>],
        t: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let u = *path.last().unwrap();
        if u == t {
            out.push(path.clone());
            return;
        }
        for v in 0..adj.len() {
            if adj[u][v] && d[v][t] + 1 == d[u][t] {
                path.push(v);
                walk(adj, d, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if d[s][t] < INF {
        walk(adj, d, t, &mut vec![s], &mut out);
    }
    out
}

pub struct SpaceSyntaxOracle {
    pub total_depth: Vec<u64>,
    pub reach: Vec<usize>,
    pub integration: Vec<f64>,
    pub connectivity: Vec<usize>,
    pub choice: Vec<u64>,
}

/// Measures from all-pairs distances and the lexicographically smallest
/// shortest path of every ordered pair.
pub fn space_syntax_oracle(n: usize, edges: &[(usize, usize)]) -> SpaceSyntaxOracle {
    let adj = adjacency_matrix(n, edges);
    let d = floyd_warshall(n, edges);
    let mut total_depth = vec![0u64; n];
    let mut reach = vec![0usize; n];
    let mut choice = vec![0u64; n];
    for s in 0..n {
        for t in 0..n {
            if s == t || d[s][t] >= INF {
                continue;
            }
            total_depth[s] += d[s][t] as u64;
            reach[s] += 1;
            let canonical = all_shortest_paths(&adj, &d, s, t).into_iter().min().unwrap();
            for &v in &canonical[1..canonical.len() - 1] {
                choice[v] += 1;
            }
        }
    }
    let integration = (0..n)
        .map(|i| {
            if total_depth[i] == 0 {
                0.0
            } else {
                (reach[i] as f64).powi(2) / total_depth[i] as f64
            }
        })
        .collect();
    let connectivity = (0..n).map(|i| adj[i].iter().filter(|&&x| x).count()).collect();
    SpaceSyntaxOracle {
        total_depth,
        reach,
        integration,
        connectivity,
        choice,
    }
}

/// Every simple path from `origin`, as (destination, node-weight cost).
pub fn simple_path_costs(adj: &[Vec<bool>], weights: &[f64], origin: usize) -> Vec<Vec<f64>> {
    fn walk(
        adj: &[Vec<bool>],
        w: &[f64],
        path: &mut Vec<usize>,
        on: &mut [bool],
        cost: f64,
        best: &mut [Vec<f64>],
    ) {
        let u = *path.last().unwrap();
        best[u].push(cost);
        for v in 0..adj.len() {
            if adj[u][v] && !on[v] {
                on[v] = true;
                path.push(v);
                walk(adj, w, path, on, cost + w[v], best);
                path.pop();
                on[v] = false;
            }
        }
    }
    let n = adj.len();
    let mut best = vec![Vec::new(); n];
    let mut on = vec![false; n];
    on[origin] = true;
    walk(adj, weights, &mut vec![origin], &mut on, weights[origin], &mut best);
    best
}

pub fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Minimum over every monotone warping path.
pub fn dtw_brute(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    fn go(a: &[[f64; 2]], b: &[[f64; 2]], i: usize, j: usize, acc: f64) -> f64 {
        let acc = acc + euclid(a[i], b[j]);
        if i + 1 == a.len() && j + 1 == b.len() {
            return acc;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(go(a, b, i + 1, j, acc));
        }
        if j + 1 < b.len() {
            best = best.min(go(a, b, i, j + 1, acc));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(go(a, b, i + 1, j + 1, acc));
        }
        best
    }
    go(a, b, 0, 0, 0.0)
}

/// Minimum edit script length by exhaustive recursion.
pub fn edit_brute<T>(a: &[T], b: &[T], eq: &dyn Fn(&T, &T) -> bool) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let sub = edit_brute(&a[1..], &b[1..], eq) + usize::from(!eq(&a[0], &b[0]));
    let del = edit_brute(&a[1..], b, eq) + 1;
    let ins = edit_brute(a, &b[1..], eq) + 1;
    sub.min(del).min(ins)
}

pub fn hausdorff_brute(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    // Largest of all point-to-set distances, each found by sorting.
    let mut worst = 0.0f64;
    for (x, y) in [(a, b), (b, a)] {
        for &p in x {
            let mut ds: Vec<f64> = y.iter().map(|&q| euclid(p, q)).collect();
            ds.sort_by(f64::total_cmp);
            worst = worst.max(ds[0]);
        }
    }
    worst
}

pub fn random_tensor(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Central finite-difference check of the gradients of `f` with respect to
/// each input tensor.
#[derive(Debug, Default, Clone, Copy)]
pub struct FdOutcome {
    pub checked: usize,
    /// Coordinates where the one-sided differences disagree, i.e. the
    /// function is not differentiable within one step.
    pub kinked: usize,
    pub max_rel_err: f64,
}

impl FdOutcome {
    pub fn merge(&mut self, o: FdOutcome) {
        self.checked += o.checked;
        self.kinked += o.kinked;
        self.max_rel_err = self.max_rel_err.max(o.max_rel_err);
    }
}

pub const FD_STEP: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

pub fn fd_check(
    inputs: &[Tensor],
    f: &dyn Fn(&mut Graph, &[Var]) -> Result<Var>,
    tol: f64,
) -> FdOutcome {
    let eval = |xs: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone(), true).unwrap()).collect();
        let out = f(&mut g, &vars).unwrap();
        g.value(out).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone(), true).unwrap()).collect();
    let out = f(&mut g, &vars).unwrap();
    let f0 = g.value(out).item();
    let grads = g.backward(out).unwrap();

    let mut outcome = FdOutcome::default();
    for (k, x) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[k])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols()));
        for e in 0..x.len() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[e] = x.data()[e] + FD_STEP;
            let fp = eval(&xs);
            xs[k].data_mut()[e] = x.data()[e] - FD_STEP;
            let fm = eval(&xs);
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let err = rel_err(analytic.data()[e], numeric);
            outcome.checked += 1;
            let one_sided_gap = ((fp - f0) - (f0 - fm)).abs() / FD_STEP;
            if err >= tol && one_sided_gap / 2.0 >= tol * numeric.abs().max(1e-3) {
                outcome.kinked += 1;
                continue;
            }
            outcome.max_rel_err = outcome.max_rel_err.max(err);
        }
    }
    outcome
}
