from .chain import (
    IIIE_C,
    DegreeChainResult,
    ExcursionResult,
    IiieBounds,
    IsolationExcursionRecord,
    degree_chain_analysis,
    degree_hit0_samples,
    degree_samples,
    excursion_samples,
    iiie_mixing_bounds,
    parity_probability,
    parity_simulation,
    visit_counts,
)
from .core import (
    Estimate,
    binomial_upper,
    env_tv_lower_bound,
    env_tv_upper_bound,
    estimates_from_csv,
    estimates_to_csv,
    gillman_bound,
    isolation_bound,
    poisson_tail_bounds,
    proportion,
    tv_counts,
    tv_plugin,
    tv_plugin_null,
    tv_threshold,
)
from .mixing import first_crossing, mixing_curve, sample_full_states, sample_paths
from .stopping import (
    StoppingSample,
    default_cadence,
    giant_hit_exit_samples,
    good_start,
    goodness_persistence,
    is_good,
    isolation_samples,
    outside_giant_start,
)

__all__ = [name for name in dir() if not name.startswith("_")]
