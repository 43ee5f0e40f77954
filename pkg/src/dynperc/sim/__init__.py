from .environment import Environment, index_from_pairs, init_environment, pairs_from_index
from .system import (
    Censored,
    EventLog,
    Predicate,
    System,
    WalkerState,
    both_isolated,
    custom,
    environments_equal,
    make_system,
    replay,
    walker_in_giant,
    walker_isolated,
    walker_out_of_giant,
)

__all__ = [
    "Censored", "Environment", "EventLog", "Predicate", "System", "both_isolated",
    "custom", "environments_equal", "index_from_pairs", "init_environment", "pairs_from_index", "make_system", "replay",
    "WalkerState", "walker_in_giant", "walker_isolated", "walker_out_of_giant",
]
