use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::road_network::{RoadNetwork, TIME_SLICES};
use crate::space_syntax::Measures;

/// Continuous columns: total depth, integration, connectivity, choice, length.
pub const CONTINUOUS_FEATURES: usize = 5;

/// Per-column standardization with population statistics. Columns with zero
/// spread map to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    pub fn fit(rows: &[Vec<f64>], width: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt()).collect();
        ZScore { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }
}

/// Raw (unnormalized) features of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFeatures {
    pub total_depth: f64,
    pub integration: f64,
    pub connectivity: f64,
    pub choice: f64,
    pub length: f64,
    pub road_type: usize,
    pub direction: usize,
}

impl SegmentFeatures {
    pub fn continuous(&self) -> [f64; CONTINUOUS_FEATURES] {
        [
            self.total_depth,
            self.integration,
            self.connectivity,
            self.choice,
            self.length,
        ]
    }
}

/// One `(segment, time slice)` row of the feature table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRecord {
    pub segment_id: usize,
    pub time_slice: usize,
    pub raw: SegmentFeatures,
    pub normalized: [f64; CONTINUOUS_FEATURES],
}

/// Features for every `(segment, slice)`. Space Syntax and geometry columns
/// do not vary with the slice, so they are stored once per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    raw: Vec<SegmentFeatures>,
    normalized: Vec<[f64; CONTINUOUS_FEATURES]>,
    stats: ZScore,
}

impl FeatureTable {
    pub fn num_segments(&self) -> usize {
        self.raw.len()
    }

    pub fn raw(&self, segment: usize) -> &SegmentFeatures {
        &self.raw[segment]
    }

    pub fn normalized(&self, segment: usize) -> &[f64; CONTINUOUS_FEATURES] {
        &self.normalized[segment]
    }

    pub fn stats(&self) -> &ZScore {
        &self.stats
    }

    pub fn record(&self, segment: usize, time_slice: usize) -> FeatureRecord {
        FeatureRecord {
            segment_id: segment,
            time_slice,
            raw: self.raw[segment],
            normalized: self.normalized[segment],
        }
    }

    /// All `24 * N` records, slice-major within each segment.
    pub fn records(&self) -> impl Iterator<Item = FeatureRecord> + '_ {
        (0..self.raw.len())
            .flat_map(move |s| (0..TIME_SLICES).map(move |t| self.record(s, t)))
    }

    /// Writes raw feature values, one row per `(segment, slice)`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            segment_id: usize,
            time_slice: usize,
            total_depth: f64,
            integration: f64,
            connectivity: f64,
            choice: f64,
            length: f64,
            road_type: usize,
            direction: usize,
        }
        let path = path.as_ref();
        let csv_err = |e: csv::Error| Error::parse(path, 0, e.to_string());
        let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
        for r in self.records() {
            writer
                .serialize(Row {
                    segment_id: r.segment_id,
                    time_slice: r.time_slice,
                    total_depth: r.raw.total_depth,
                    integration: r.raw.integration,
                    connectivity: r.raw.connectivity,
                    choice: r.raw.choice,
                    length: r.raw.length,
                    road_type: r.raw.road_type,
                    direction: r.raw.direction,
                })
                .map_err(csv_err)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

/// Concatenates Space Syntax measures with basic segment attributes and
/// standardizes the continuous columns per city.
pub fn assemble_features(net: &RoadNetwork, measures: &Measures) -> FeatureTable {
    let raw: Vec<SegmentFeatures> = net
        .segments()
        .iter()
        .enumerate()
        .map(|(i, seg)| SegmentFeatures {
            total_depth: measures.total_depth[i] as f64,
            integration: measures.integration[i],
            connectivity: measures.connectivity[i] as f64,
            choice: measures.choice[i] as f64,
            length: seg.length_m,
            road_type: seg.road_type,
            direction: seg.direction(),
        })
        .collect();
    let rows: Vec<Vec<f64>> = raw.iter().map(|f| f.continuous().to_vec()).collect();
    let stats = ZScore::fit(&rows, CONTINUOUS_FEATURES);
    let normalized = rows
        .iter()
        .map(|r| {
            let v = stats.apply(r);
            std::array::from_fn(|k| v[k])
        })
        .collect();
    FeatureTable {
        raw,
        normalized,
        stats,
    }
}
