"""Reconstruction and analysis of interfirm money-flow networks.

The package turns raw transfer logs into a weighted directed network and
examines it four ways: distribution statistics, walnut (bowtie-style)
decomposition around the strongly connected core, Helmholtz splitting of
net flows into potential-driven and circular parts, map-equation
community hierarchies, and geographic origin-destination factorization.
A seeded synthetic generator provides ground truth for all of it.
"""

from .bowtie import (
    COMPONENT_NAMES,
    BowtiePartition,
    DistanceProfile,
    classify_bowtie,
    distance_profile,
    strongly_connected_components,
    weakly_connected_components,
)
from .community import (
    CommunityReport,
    CommunityTree,
    community_report,
    detect_communities,
    flat_table,
    map_equation_value,
)
from .geonmf import (
    GeoFlowMatrix,
    GeoGrid,
    LocalizationResult,
    NmfFactorization,
    bin_transfers,
    d_sweep,
    haversine_km,
    localization,
    nmf,
    similarity_matrix,
)
from .hodge import (
    ConvergenceError,
    HodgeDecomposition,
    assemble_problem,
    decompose,
    hodge_decompose,
    potential_histograms,
    potential_vs_net,
    solve_potentials,
)
from .ingest import (
    AggregatedLink,
    FilterPolicy,
    ParseError,
    TransferRecord,
    aggregate,
    collect_node_coords,
    filter_records,
    parse_log,
    read_links,
    read_node_coords,
    write_links,
    write_node_coords,
)
from .network import (
    DuplicateLinkError,
    FlowNetwork,
    build_network,
    ccdf,
    degree_correlation,
    degree_stats,
    net_flow_per_node,
    summary,
)
from .synth import (
    CitySpec,
    GroundTruth,
    ScenarioSpec,
    blocks_scenario,
    cities_scenario,
    generate,
    walnut_scenario,
    write_records,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AggregatedLink",
    "BowtiePartition",
    "CitySpec",
    "COMPONENT_NAMES",
    "CommunityReport",
    "CommunityTree",
    "ConvergenceError",
    "DistanceProfile",
    "DuplicateLinkError",
    "FilterPolicy",
    "FlowNetwork",
    "GeoFlowMatrix",
    "GeoGrid",
    "GroundTruth",
    "HodgeDecomposition",
    "LocalizationResult",
    "NmfFactorization",
    "ParseError",
    "ScenarioSpec",
    "TransferRecord",
    "aggregate",
    "assemble_problem",
    "bin_transfers",
    "blocks_scenario",
    "build_network",
    "ccdf",
    "cities_scenario",
    "classify_bowtie",
    "collect_node_coords",
    "community_report",
    "d_sweep",
    "decompose",
    "degree_correlation",
    "degree_stats",
    "detect_communities",
    "distance_profile",
    "filter_records",
    "flat_table",
    "generate",
    "haversine_km",
    "hodge_decompose",
    "localization",
    "map_equation_value",
    "net_flow_per_node",
    "nmf",
    "parse_log",
    "potential_histograms",
    "potential_vs_net",
    "read_links",
    "read_node_coords",
    "similarity_matrix",
    "solve_potentials",
    "strongly_connected_components",
    "summary",
    "walnut_scenario",
    "weakly_connected_components",
    "write_links",
    "write_node_coords",
    "write_records",
]
