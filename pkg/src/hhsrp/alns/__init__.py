"""Adaptive large neighbourhood search with caregiver drops."""
from .insertion import INSERTIONS, insert, insert_within_limit
from .local_search import dp_local_search
from .params import AlnsParams
from .removal import REMOVALS, dummy_count, removal_gains, shaw_relatedness
from .repair import repair
from .search import IterationControl, RunReport, accept, remove_count, run, select_operator, temperature
from .swap import PheromoneState, build_crews, caregiver_swap, visibility_matrix

__all__ = [
    "AlnsParams", "INSERTIONS", "REMOVALS", "IterationControl", "PheromoneState", "RunReport",
    "accept", "build_crews", "caregiver_swap", "dp_local_search", "dummy_count", "insert",
    "insert_within_limit", "remove_count", "removal_gains", "repair", "run", "select_operator", "shaw_relatedness", "temperature",
    "visibility_matrix",
]
