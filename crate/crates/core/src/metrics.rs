//! Set-level (distribution) and pair-level (sequence distance) comparison of
//! generated and real trajectories.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::road_network::{RoadNetwork, Trajectory};

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_EDR_EPSILON: f64 = 100.0;

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn midpoints(t: &Trajectory, net: &RoadNetwork) -> Vec<Point> {
    t.segments.iter().map(|&s| net.segment(s).midpoint).collect()
}

/// Sum of segment lengths in metres.
pub fn travel_distance(t: &Trajectory, net: &RoadNetwork) -> f64 {
    t.segments.iter().map(|&s| net.segment(s).length_m).sum()
}

/// Root mean squared distance of segment midpoints from their centroid.
pub fn radius_of_gyration(t: &Trajectory, net: &RoadNetwork) -> f64 {
    let pts = midpoints(t, net);
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    (pts.iter()
        .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Visit frequency of every segment, normalized to sum to one.
pub fn loc_freq(trajs: &[Trajectory], net: &RoadNetwork) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; net.len()];
    for t in trajs {
        for &s in &t.segments {
            counts[s] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("no segment visits to count".into()));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; the last bin is closed.
    pub fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(Error::InvalidArgument("histogram needs values and bins".into()));
        }
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let n = values.len() as f64;
        Ok(Histogram {
            edges,
            masses: counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }

    /// Both value sets binned over their pooled range.
    pub fn pooled(a: &[f64], b: &[f64], bins: usize) -> Result<(Self, Self)> {
        let all = a.iter().chain(b);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((Histogram::build(a, lo, hi, bins)?, Histogram::build(b, lo, hi, bins)?))
    }
}

/// Jensen-Shannon divergence with base-2 logarithms, in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!(
            "bin mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let kl_to_mid = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .filter(|(&a, _)| a > 0.0)
            .map(|(&a, &b)| a * (2.0 * a / (a + b)).log2())
            .sum()
    };
    let v = 0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p);
    Ok(v.clamp(0.0, 1.0))
}

fn nonempty<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("sequence distance of an empty input".into()));
    }
    Ok(())
}

pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    nonempty(a, b)?;
    let directed = |x: &[Point], y: &[Point]| {
        x.iter()
            .map(|&p| y.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// Dynamic time warping with Euclidean point cost.
pub fn dtw(a: &[Point], b: &[Point]) -> Result<f64> {
    nonempty(a, b)?;
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &p in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = dist(p, b[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Unit-cost edit distance with a custom match predicate.
fn edit_distance<T>(a: &[T], b: &[T], matches: impl Fn(&T, &T) -> bool) -> usize {
    let m = b.len();
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0; m + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for j in 1..=m {
            let sub = prev[j - 1] + usize::from(!matches(x, &b[j - 1]));
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Levenshtein distance between segment-id sequences.
pub fn edt(a: &[usize], b: &[usize]) -> Result<usize> {
    nonempty(a, b)?;
    Ok(edit_distance(a, b, |x, y| x == y))
}

/// Edit distance where points within `eps` metres match, divided by the
/// longer length.
pub fn edr(a: &[Point], b: &[Point], eps: f64) -> Result<f64> {
    nonempty(a, b)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("EDR threshold must be positive".into()));
    }
    let d = edit_distance(a, b, |x, y| dist(*x, *y) <= eps);
    Ok(d as f64 / a.len().max(b.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMetrics {
    pub od_id: u64,
    pub hausdorff: f64,
    pub dtw: f64,
    pub edt: f64,
    pub edr: f64,
}

pub fn pair_metrics(
    real: &Trajectory,
    generated: &Trajectory,
    net: &RoadNetwork,
    eps: f64,
) -> Result<PairMetrics> {
    let (a, b) = (midpoints(real, net), midpoints(generated, net));
    Ok(PairMetrics {
        od_id: real.traj_id,
        hausdorff: hausdorff(&a, &b)?,
        dtw: dtw(&a, &b)?,
        edt: edt(&real.segments, &generated.segments)? as f64,
        edr: edr(&a, &b, eps)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histograms {
    pub distance: (Histogram, Histogram),
    pub radius: (Histogram, Histogram),
}

/// Evaluation summary. Micro metrics are means over od-paired trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub distance_jsd: f64,
    pub radius_jsd: f64,
    pub locfreq_jsd: f64,
    pub hausdorff: f64,
    pub dtw: f64,
    pub edt: f64,
    pub edr: f64,
    pub bins: usize,
    pub edr_epsilon: f64,
    pub pairs: usize,
    pub distance_edges: Vec<f64>,
    pub radius_edges: Vec<f64>,
    #[serde(skip)]
    pub per_pair: Vec<PairMetrics>,
    #[serde(skip)]
    pub histograms: Option<Histograms>,
}

pub fn evaluate(
    real: &[Trajectory],
    generated: &[Trajectory],
    net: &RoadNetwork,
    eps: f64,
    bins: usize,
) -> Result<MetricReport> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs both trajectory sets".into()));
    }
    for t in real.iter().chain(generated) {
        if t.segments.is_empty() {
            return Err(Error::InvalidTrajectory {
                traj_id: t.traj_id,
                reason: "empty".into(),
            });
        }
        if let Some(&s) = t.segments.iter().find(|&&s| s >= net.len()) {
            return Err(Error::InvalidTrajectory {
                traj_id: t.traj_id,
                reason: format!("unknown segment {s}"),
            });
        }
    }
    let values = |ts: &[Trajectory], f: fn(&Trajectory, &RoadNetwork) -> f64| -> Vec<f64> {
        ts.iter().map(|t| f(t, net)).collect()
    };
    let distance = Histogram::pooled(
        &values(real, travel_distance),
        &values(generated, travel_distance),
        bins,
    )?;
    let radius = Histogram::pooled(
        &values(real, radius_of_gyration),
        &values(generated, radius_of_gyration),
        bins,
    )?;
    let locfreq_jsd = jsd(&loc_freq(real, net)?, &loc_freq(generated, net)?)?;

    let by_id: BTreeMap<u64, &Trajectory> = generated.iter().map(|t| (t.traj_id, t)).collect();
    let paired: Vec<(&Trajectory, &Trajectory)> = real
        .iter()
        .filter_map(|r| by_id.get(&r.traj_id).map(|g| (r, *g)))
        .collect();
    if paired.is_empty() {
        return Err(Error::InvalidArgument(
            "no shared od_id between real and generated trajectories".into(),
        ));
    }
    let per_pair: Vec<PairMetrics> = paired
        .par_iter()
        .map(|(r, g)| pair_metrics(r, g, net, eps))
        .collect::<Result<_>>()?;
    let n = per_pair.len() as f64;
    let mean = |f: fn(&PairMetrics) -> f64| per_pair.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        distance_jsd: jsd(&distance.0.masses, &distance.1.masses)?,
        radius_jsd: jsd(&radius.0.masses, &radius.1.masses)?,
        locfreq_jsd,
        hausdorff: mean(|m| m.hausdorff),
        dtw: mean(|m| m.dtw),
        edt: mean(|m| m.edt),
        edr: mean(|m| m.edr),
        bins,
        edr_epsilon: eps,
        pairs: per_pair.len(),
        distance_edges: distance.0.edges.clone(),
        radius_edges: radius.0.edges.clone(),
        per_pair,
        histograms: Some(Histograms { distance, radius }),
    })
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn save_pairs_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("od_id,hausdorff,dtw,edt,edr\n");
        for m in &self.per_pair {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                m.od_id, m.hausdorff, m.dtw, m.edt, m.edr
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Histogram plot data: `metric,bin,lower,upper,real,generated`.
    pub fn save_histograms_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("metric,bin,lower,upper,real,generated\n");
        if let Some(h) = &self.histograms {
            for (name, (r, g)) in [("distance", &h.distance), ("radius", &h.radius)] {
                for (i, (mr, mg)) in r.masses.iter().zip(&g.masses).enumerate() {
                    out.push_str(&format!(
                        "{name},{i},{},{},{mr},{mg}\n",
                        r.edges[i],
                        r.edges[i + 1]
                    ));
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
