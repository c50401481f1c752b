use crate::error::Result;
use crate::partition::{default_cluster_count, partition, Partition};
use crate::road_network::RoadNetwork;
use crate::seed::derive_seed;
use crate::space_syntax::{
    assemble_features, edge_relations, measures, sample_canonical_paths, EdgeRelations,
    FeatureTable, Measures,
};

/// Paths sampled per segment when estimating pairwise path co-occurrence.
pub const PATHS_PER_SEGMENT: usize = 10;

/// Everything the encoder needs about one city, derived from the network
/// alone.
#[derive(Debug, Clone)]
pub struct CityContext {
    pub network: RoadNetwork,
    pub measures: Measures,
    pub features: FeatureTable,
    pub relations: EdgeRelations,
    pub partition: Partition,
}

impl CityContext {
    /// `clusters = None` uses [`default_cluster_count`].
    pub fn prepare(network: RoadNetwork, clusters: Option<usize>, seed: u64) -> Result<Self> {
        let measures = measures(&network, None);
        let features = assemble_features(&network, &measures);
        let paths = sample_canonical_paths(
            &network,
            PATHS_PER_SEGMENT * network.len(),
            derive_seed(seed, "relations"),
        );
        let relations = edge_relations(&network, &paths);
        let k = clusters.unwrap_or_else(|| default_cluster_count(network.len()));
        let partition = partition(&network, k, derive_seed(seed, "partition"))?;
        Ok(CityContext {
            network,
            measures,
            features,
            relations,
            partition,
        })
    }
}
