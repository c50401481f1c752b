use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road_network::labels::csv_error;
use crate::road_network::{RoadNetwork, Trajectory, TIME_SLICES};

/// Travel demand: generate one trajectory from `origin` to `destination`
/// within `time_slice`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub od_id: u64,
    pub origin: usize,
    pub destination: usize,
    pub time_slice: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemandSet {
    demands: Vec<Demand>,
}

impl DemandSet {
    /// Validates ids, slices and `origin != destination`. Reachability is
    /// checked at generation time, where failures are reported per demand.
    pub fn new(net: &RoadNetwork, demands: Vec<Demand>) -> Result<Self> {
        for d in &demands {
            let fail = |reason: String| Error::InvalidDemand {
                od_id: d.od_id,
                reason,
            };
            if d.origin == d.destination {
                return Err(fail("origin equals destination".into()));
            }
            for s in [d.origin, d.destination] {
                if s >= net.len() {
                    return Err(fail(format!("unknown segment {s}")));
                }
            }
            if d.time_slice >= TIME_SLICES {
                return Err(fail(format!("time slice {} out of range", d.time_slice)));
            }
        }
        Ok(DemandSet { demands })
    }

    /// One demand per trajectory, keyed by the trajectory id.
    pub fn from_trajectories(net: &RoadNetwork, trajs: &[Trajectory]) -> Result<Self> {
        let demands = trajs
            .iter()
            .map(|t| Demand {
                od_id: t.traj_id,
                origin: t.origin(),
                destination: t.destination(),
                time_slice: t.time_slice,
            })
            .collect();
        DemandSet::new(net, demands)
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn load(path: impl AsRef<Path>, net: &RoadNetwork) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let demands = reader
            .deserialize::<Demand>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| csv_error(path, e))?;
        DemandSet::new(net, demands)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for d in &self.demands {
            writer.serialize(d).map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}
