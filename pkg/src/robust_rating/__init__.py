"""Rating aggregation that stays robust to participation bias."""

from .aggregators import (
    AggregatorSpec,
    BeaParams,
    PaaBounds,
    bea,
    bea_alpha,
    bea_objective,
    paa,
    paa_bounds,
    paa_k1,
    paa_k2,
    simple_average,
    solve_a_star,
    spectral,
)
from .dataio import (
    CurvePoint,
    RatingRecord,
    build_histogram,
    read_ratings_csv,
    remap_rating,
)
from .model import (
    AllUnobserved,
    CategoricalDistribution,
    EmpiricalDistribution,
    FullHistogram,
    InformationStructure,
    ObservedHistogram,
    ParticipationProfile,
    RatingScale,
    dist_mean,
    dist_variance,
    empirical_from_observed,
    observed_marginal,
)
from .regret import (
    ASYMPTOTIC,
    EnumerationTooLarge,
    Family,
    RegretQuery,
    WorstCaseRecord,
    adversary_search,
    asymptotic_loss,
    asymptotic_paa_regret,
    exact_loss,
    exact_regret,
    ideal_term,
    lower_bound,
    mc_regret,
    prop_worst_structures,
    two_point_pair,
)
from .sampling import RngSpec, sample_full, simulate, thin

__version__ = "0.1.0"
