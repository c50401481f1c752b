use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::road_network::RoadNetwork;

/// Number of hourly time slices in a day.
pub const TIME_SLICES: usize = 24;

/// Minimum number of segments a usable trajectory must have.
pub const MIN_TRAJECTORY_LEN: usize = 3;

/// A map-matched trajectory: consecutive segment ids within one hourly slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub traj_id: u64,
    pub time_slice: usize,
    pub segments: Vec<usize>,
    /// Per-segment traversal times in seconds, when the source recorded them.
    pub times: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(traj_id: u64, time_slice: usize, segments: Vec<usize>) -> Self {
        Trajectory {
            traj_id,
            time_slice,
            segments,
            times: None,
        }
    }

    pub fn origin(&self) -> usize {
        self.segments[0]
    }

    pub fn destination(&self) -> usize {
        *self.segments.last().expect("non-empty trajectory")
    }

    pub fn has_loop(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.segments.len());
        !self.segments.iter().all(|s| seen.insert(*s))
    }

    /// Checks ids, slice range, time-sample arity, adjacency and loop-freedom.
    pub fn validate(&self, net: &RoadNetwork) -> Result<()> {
        let fail = |reason: String| Error::InvalidTrajectory {
            traj_id: self.traj_id,
            reason,
        };
        if self.segments.is_empty() {
            return Err(fail("empty segment list".into()));
        }
        if self.time_slice >= TIME_SLICES {
            return Err(fail(format!("time slice {} out of range", self.time_slice)));
        }
        if let Some(times) = &self.times {
            if times.len() != self.segments.len() {
                return Err(fail("time sample count differs from segment count".into()));
            }
        }
        net.check_path(&self.segments).map_err(fail)
    }
}

/// Drops trajectories shorter than three segments or revisiting a segment.
/// Order of the survivors is preserved.
pub fn preprocess_trajectories(raw: &[Trajectory]) -> Vec<Trajectory> {
    raw.iter()
        .filter(|t| t.segments.len() >= MIN_TRAJECTORY_LEN && !t.has_loop())
        .cloned()
        .collect()
}

/// Parses the line format `traj_id, time_slice, s;s;s[, t;t;t]`.
pub fn parse_trajectories(text: &str, origin: &Path) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::parse(origin, lineno + 1, msg);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(err(format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let traj_id = fields[0]
            .parse::<u64>()
            .map_err(|e| err(format!("traj_id: {e}")))?;
        let time_slice = fields[1]
            .parse::<usize>()
            .map_err(|e| err(format!("time_slice: {e}")))?;
        let segments = fields[2]
            .split(';')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(format!("segment id: {e}")))?;
        let times = match fields.get(3) {
            Some(f) => Some(
                f.split(';')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| err(format!("travel time: {e}")))?,
            ),
            None => None,
        };
        if let Some(times) = &times {
            if times.len() != segments.len() {
                return Err(err("time sample count differs from segment count".into()));
            }
        }
        out.push(Trajectory {
            traj_id,
            time_slice,
            segments,
            times,
        });
    }
    Ok(out)
}

pub fn format_trajectories(trajs: &[Trajectory]) -> String {
    let mut out = String::new();
    for t in trajs {
        let segs = join(t.segments.iter());
        write!(out, "{},{},{}", t.traj_id, t.time_slice, segs).unwrap();
        if let Some(times) = &t.times {
            write!(out, ",{}", join(times.iter())).unwrap();
        }
        out.push('\n');
    }
    out
}

fn join<T: std::fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories(&text, path)
}

pub fn save_trajectories(path: impl AsRef<Path>, trajs: &[Trajectory]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_trajectories(trajs)).map_err(|e| Error::io(path, e))
}
