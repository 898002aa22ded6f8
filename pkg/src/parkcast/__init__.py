"""parkcast: estimate street-parking occupancy in city areas without sensors.

The package clusters city blocks spatially, trains per-cluster occupancy
regressors on sensor data, quantifies how similar two city areas are from
their amenity mix and typical visiting durations, and turns point
predictions into similarity-widened occupancy intervals for areas that
have no sensors at all.
"""

from parkcast.ingest import (
    AmenityStats,
    Block,
    BlockAmenityIndex,
    OccupancyRecord,
    Poi,
    haversine,
    load_amenity_stats,
    match_amenities,
    parse_geodata,
    parse_occupancy_csv,
)
from parkcast.geocluster import Cluster, ClusterPartition, kmeans, partition_city
from parkcast.aggregate import (
    AggregatedPoint,
    FeatureVector,
    aggregate_cluster,
    extract_features,
    occupancy_rate,
)
from parkcast.represent import (
    CategoryScheme,
    ClusterGaussian,
    ClusterVector,
    SupportSpec,
    build_cluster_gaussian,
    build_cluster_vector,
    categorize_amenity,
    gaussian_magnitude_feature,
    normalize,
    support_spec,
)
from parkcast.similarity import (
    SimilarityMatrix,
    cosine_similarity,
    discrete_emd,
    emd_normalized,
    gaussian_w2,
)
from parkcast.learn import (
    Dataset,
    TrainedModel,
    cross_validate,
    predict,
    rmse,
    train_decision_tree,
    train_gbt,
)
from parkcast.estimate import (
    EstimateTable,
    EstimationInterval,
    build_unmonitored_input,
    estimate_for_target,
    intersection_intervals,
    interval_cosine,
    interval_emd,
)
from parkcast.evaluate import (
    CorrelationReport,
    SyntheticCityConfig,
    TransferErrorMatrix,
    best_method_fractions,
    correlate_similarity_errors,
    generate_synthetic_city,
    pairwise_transfer,
    pearson,
    spearman,
)

__version__ = "0.1.0"
