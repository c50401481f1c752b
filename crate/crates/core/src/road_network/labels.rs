use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road_network::{RoadNetwork, Trajectory, TIME_SLICES};

/// Observed travel cost of one segment within one hourly slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostLabel {
    pub travel_time_s: f64,
    pub speed_mps: f64,
    pub sample_count: usize,
}

/// Travel-cost labels keyed by `(segment, time_slice)`. Cells without samples
/// are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLabels {
    cells: BTreeMap<(usize, usize), CostLabel>,
}

impl CostLabels {
    pub fn get(&self, segment: usize, slice: usize) -> Option<&CostLabel> {
        self.cells.get(&(segment, slice))
    }

    pub fn insert(&mut self, segment: usize, slice: usize, label: CostLabel) {
        self.cells.insert((segment, slice), label);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &CostLabel)> {
        self.cells.iter().map(|(k, v)| (*k, v))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut labels = CostLabels::default();
        for (row, rec) in reader.deserialize::<LabelRow>().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            if !(rec.travel_time_s > 0.0 && rec.speed_mps > 0.0 && rec.sample_count >= 1) {
                return Err(Error::parse(path, row + 2, "label values must be positive"));
            }
            if rec.time_slice >= TIME_SLICES {
                return Err(Error::parse(path, row + 2, "time slice out of range"));
            }
            labels.insert(
                rec.segment_id,
                rec.time_slice,
                CostLabel {
                    travel_time_s: rec.travel_time_s,
                    speed_mps: rec.speed_mps,
                    sample_count: rec.sample_count,
                },
            );
        }
        Ok(labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for ((segment_id, time_slice), l) in self.iter() {
            writer
                .serialize(LabelRow {
                    segment_id,
                    time_slice,
                    travel_time_s: l.travel_time_s,
                    speed_mps: l.speed_mps,
                    sample_count: l.sample_count,
                })
                .map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    segment_id: usize,
    time_slice: usize,
    travel_time_s: f64,
    speed_mps: f64,
    sample_count: usize,
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

/// Mean of the samples that lie within three standard deviations of the raw
/// mean. Standard deviation is the population value of the unfiltered set.
pub fn sigma_filtered_mean(samples: &[f64]) -> Option<(f64, usize)> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let kept: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|x| (x - mean).abs() <= 3.0 * std)
        .collect();
    let kept_mean = kept.iter().sum::<f64>() / kept.len() as f64;
    Some((kept_mean, kept.len()))
}

/// Aggregates per-segment traversal times into hourly labels. Trajectories
/// without time samples are ignored.
pub fn compute_cost_labels(net: &RoadNetwork, trajs: &[Trajectory]) -> CostLabels {
    let mut samples: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for t in trajs {
        let Some(times) = &t.times else { continue };
        for (&seg, &dt) in t.segments.iter().zip(times) {
            samples.entry((seg, t.time_slice)).or_default().push(dt);
        }
    }
    let mut labels = CostLabels::default();
    for ((seg, slice), xs) in samples {
        let Some((mean, kept)) = sigma_filtered_mean(&xs) else {
            continue;
        };
        if mean <= 0.0 {
            continue;
        }
        labels.insert(
            seg,
            slice,
            CostLabel {
                travel_time_s: mean,
                speed_mps: net.segment(seg).length_m / mean,
                sample_count: kept,
            },
        );
    }
    labels
}
