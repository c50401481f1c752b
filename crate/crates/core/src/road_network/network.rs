use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of compass buckets used for the direction feature.
pub const DIRECTION_BUCKETS: usize = 8;

/// A road segment: one node of the segment-level dual graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub length_m: f64,
    pub road_type: usize,
    /// Bearing of the segment geometry, degrees clockwise from north.
    pub direction_deg: f64,
    /// Planar midpoint in meters.
    pub midpoint: [f64; 2],
    pub geometry: Option<Vec<[f64; 2]>>,
}

impl Segment {
    /// Compass bucket of the bearing: 0 = N, 1 = NE, ..., 7 = NW.
    pub fn direction(&self) -> usize {
        direction_bucket(self.direction_deg)
    }
}

pub fn direction_bucket(bearing_deg: f64) -> usize {
    let b = bearing_deg.rem_euclid(360.0);
    (((b + 22.5) / 45.0).floor() as usize) % DIRECTION_BUCKETS
}

/// Segment graph of a city. Segments are nodes; an adjacency pair connects
/// two segments that share an endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    name: String,
    segments: Vec<Segment>,
    adjacency: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl RoadNetwork {
    /// Builds a network from dense segments (`segments[i].id == i`) and
    /// undirected adjacency pairs. Pairs are stored as `(min, max)`.
    pub fn new(
        name: impl Into<String>,
        segments: Vec<Segment>,
        adjacency: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = segments.len();
        for (i, seg) in segments.iter().enumerate() {
            if seg.id != i {
                return Err(Error::InvalidSegment {
                    id: seg.id as u64,
                    reason: format!("expected dense id {i}"),
                });
            }
            validate_segment(seg)?;
        }

        let mut seen = HashSet::with_capacity(adjacency.len());
        let mut pairs = Vec::with_capacity(adjacency.len());
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &adjacency {
            if a == b {
                return Err(Error::InvalidSegment {
                    id: a as u64,
                    reason: "self-loop in adjacency".into(),
                });
            }
            for id in [a, b] {
                if id >= n {
                    return Err(Error::InvalidSegment {
                        id: id as u64,
                        reason: "adjacency references unknown segment".into(),
                    });
                }
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::InvalidSegment {
                    id: key.0 as u64,
                    reason: format!("duplicate adjacency pair ({}, {})", key.0, key.1),
                });
            }
            pairs.push(key);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        Ok(RoadNetwork {
            name: name.into(),
            segments,
            adjacency: pairs,
            neighbors,
        })
    }

    /// Topology-only network for tests and small examples: every segment is
    /// 100 m long, type 0, bearing 0, with midpoints spaced along the x axis.
    pub fn from_topology(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let segments = (0..n)
            .map(|i| Segment {
                id: i,
                length_m: 100.0,
                road_type: 0,
                direction_deg: 0.0,
                midpoint: [i as f64 * 100.0, 0.0],
                geometry: None,
            })
            .collect();
        RoadNetwork::new("topology", segments, edges.to_vec())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: usize) -> &Segment {
        &self.segments[id]
    }

    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    /// Neighbors of `id`, ascending.
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.neighbors[id]
    }

    pub fn degree(&self, id: usize) -> usize {
        self.neighbors[id].len()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Checks that a segment sequence is connected and loop-free.
    pub fn check_path(&self, path: &[usize]) -> std::result::Result<(), String> {
        let mut seen = HashSet::with_capacity(path.len());
        for (k, &s) in path.iter().enumerate() {
            if s >= self.len() {
                return Err(format!("unknown segment {s}"));
            }
            if !seen.insert(s) {
                return Err(format!("segment {s} visited twice"));
            }
            if k > 0 && !self.is_adjacent(path[k - 1], s) {
                return Err(format!("segments {} and {s} are not adjacent", path[k - 1]));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::parse(path, line, msg),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)
            .map_err(|e| Error::parse("<network>", e.line(), e.to_string()))?;
        file.into_network()
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile::from(self);
        let mut text = serde_json::to_string_pretty(&file).expect("network serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

fn validate_segment(seg: &Segment) -> Result<()> {
    let bad = |reason: &str| {
        Err(Error::InvalidSegment {
            id: seg.id as u64,
            reason: reason.into(),
        })
    };
    if !(seg.length_m.is_finite() && seg.length_m > 0.0) {
        return bad("length_m must be positive and finite");
    }
    if !seg.direction_deg.is_finite() {
        return bad("direction_deg must be finite");
    }
    if !seg.midpoint.iter().all(|v| v.is_finite()) {
        return bad("midpoint must be finite");
    }
    if let Some(geom) = &seg.geometry {
        if geom.iter().flatten().any(|v| !v.is_finite()) {
            return bad("geometry must be finite");
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    name: String,
    segments: Vec<SegmentRecord>,
    adjacency: Vec<[u64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    id: u64,
    length_m: f64,
    road_type: usize,
    direction_deg: f64,
    midpoint: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry: Option<Vec<[f64; 2]>>,
}

impl NetworkFile {
    /// Re-indexes file ids densely in ascending order.
    fn into_network(self) -> Result<RoadNetwork> {
        let mut index = BTreeMap::new();
        for rec in &self.segments {
            if index.insert(rec.id, 0usize).is_some() {
                return Err(Error::InvalidSegment {
                    id: rec.id,
                    reason: "duplicate segment id".into(),
                });
            }
        }
        for (dense, slot) in index.values_mut().enumerate() {
            *slot = dense;
        }

        let mut records = self.segments;
        records.sort_by_key(|r| r.id);
        let mut segments = Vec::with_capacity(records.len());
        for rec in records {
            let seg = Segment {
                id: index[&rec.id],
                length_m: rec.length_m,
                road_type: rec.road_type,
                direction_deg: rec.direction_deg,
                midpoint: rec.midpoint,
                geometry: rec.geometry,
            };
            validate_segment(&seg).map_err(|_| Error::InvalidSegment {
                id: rec.id,
                reason: "non-positive length or non-finite geometry".into(),
            })?;
            segments.push(seg);
        }

        let mut adjacency = Vec::with_capacity(self.adjacency.len());
        for [a, b] in self.adjacency {
            if a == b {
                return Err(Error::InvalidSegment {
                    id: a,
                    reason: "self-loop in adjacency".into(),
                });
            }
            let lookup = |id: u64| {
                index.get(&id).copied().ok_or(Error::InvalidSegment {
                    id,
                    reason: "adjacency references unknown segment".into(),
                })
            };
            adjacency.push((lookup(a)?, lookup(b)?));
        }
        RoadNetwork::new(self.name, segments, adjacency)
    }
}

impl From<&RoadNetwork> for NetworkFile {
    fn from(net: &RoadNetwork) -> Self {
        NetworkFile {
            name: net.name.clone(),
            segments: net
                .segments
                .iter()
                .map(|s| SegmentRecord {
                    id: s.id as u64,
                    length_m: s.length_m,
                    road_type: s.road_type,
                    direction_deg: s.direction_deg,
                    midpoint: s.midpoint,
                    geometry: s.geometry.clone(),
                })
                .collect(),
            adjacency: net
                .adjacency
                .iter()
                .map(|&(a, b)| [a as u64, b as u64])
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATH3: &str = r#"{
        "name": "path3",
        "segments": [
            {"id": 0, "length_m": 100.0, "road_type": 0, "direction_deg": 90.0, "midpoint": [50.0, 0.0]},
            {"id": 1, "length_m": 100.0, "road_type": 0, "direction_deg": 90.0, "midpoint": [150.0, 0.0]},
            {"id": 2, "length_m": 100.0, "road_type": 1, "direction_deg": 90.0, "midpoint": [250.0, 0.0]}
        ],
        "adjacency": [[0, 1], [1, 2]]
    }"#;

    #[test]
    fn loads_path_fixture() {
        let net = RoadNetwork::from_json(PATH3).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(net.adjacency().len(), 2);
        assert_eq!(net.neighbors(1), &[0, 2]);
        assert_eq!(net.segment(2).road_type, 1);
    }

    #[test]
    fn self_loop_names_segment() {
        let text = PATH3.replace("[1, 2]]", "[2, 2]]");
        let err = RoadNetwork::from_json(&text).unwrap_err();
        match err {
            Error::InvalidSegment { id, .. } => assert_eq!(id, 2),
            other => panic!("unexpected error {other}"),
        }
        assert!(err_string(&text).contains("segment 2"));
    }

    fn err_string(text: &str) -> String {
        RoadNetwork::from_json(text).unwrap_err().to_string()
    }

    #[test]
    fn rejects_duplicate_pair_and_bad_length() {
        let dup = PATH3.replace("[[0, 1], [1, 2]]", "[[0, 1], [1, 0]]");
        assert!(err_string(&dup).contains("duplicate"));
        let neg = PATH3.replacen("\"length_m\": 100.0", "\"length_m\": 0.0", 1);
        assert!(err_string(&neg).contains("segment 0"));
        let unknown = PATH3.replace("[1, 2]]", "[1, 9]]");
        assert!(err_string(&unknown).contains("segment 9"));
    }

    #[test]
    fn sparse_ids_are_reindexed() {
        let text = PATH3
            .replace("\"id\": 2", "\"id\": 30")
            .replace("\"id\": 1", "\"id\": 20")
            .replace("\"id\": 0", "\"id\": 10")
            .replace("[[0, 1], [1, 2]]", "[[10, 20], [30, 20]]");
        let net = RoadNetwork::from_json(&text).unwrap();
        assert_eq!(net.adjacency(), &[(0, 1), (1, 2)]);
        assert_eq!(net.segment(2).midpoint, [250.0, 0.0]);
    }

    #[test]
    fn writer_round_trips() {
        let net = RoadNetwork::from_json(PATH3).unwrap();
        let text = net.to_json();
        let again = RoadNetwork::from_json(&text).unwrap();
        assert_eq!(net, again);
        assert_eq!(text, again.to_json());
    }

    #[test]
    fn direction_buckets() {
        assert_eq!(direction_bucket(0.0), 0);
        assert_eq!(direction_bucket(22.4), 0);
        assert_eq!(direction_bucket(22.5), 1);
        assert_eq!(direction_bucket(90.0), 2);
        assert_eq!(direction_bucket(350.0), 0);
        assert_eq!(direction_bucket(-45.0), 7);
    }

    #[test]
    fn check_path_flags_loops_and_gaps() {
        let net = RoadNetwork::from_topology(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(net.check_path(&[0, 1, 2, 3]).is_ok());
        assert!(net.check_path(&[0, 2]).is_err());
        assert!(net.check_path(&[0, 1, 0]).is_err());
    }
}
