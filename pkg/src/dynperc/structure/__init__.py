from .analysis import (
    Components,
    GapResult,
    GoodGraphConstants,
    KernelDecomposition,
    PhiResult,
    StructureReport,
    components_and_giant,
    core_of,
    decoration_stats,
    far_from_core_profile,
    good_graph_check,
    isoperimetric_constant,
    iterated_log,
    kernel_decomposition,
    kernel_of,
    removal_edge_counts,
    removal_edge_counts_bruteforce,
    spectral_gap,
    structure_report,
)
from .graph import Graph

__all__ = [
    "Components", "GapResult", "GoodGraphConstants", "Graph", "KernelDecomposition",
    "PhiResult", "StructureReport", "components_and_giant", "core_of", "decoration_stats",
    "far_from_core_profile", "good_graph_check", "isoperimetric_constant", "iterated_log",
    "kernel_decomposition", "kernel_of", "removal_edge_counts",
    "removal_edge_counts_bruteforce", "spectral_gap", "structure_report",
]
