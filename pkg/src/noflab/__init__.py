"""Desk-scale workbench for one-way number-on-forehead communication.

Exact and seeded-Monte-Carlo verification of gadget dispersion, lifted
upper-bound protocols, brute-force one-way lower bounds, bipartite
largeness properties and the density-increment attack on three-party
disjointness.
"""

from .core_math import (
    FieldElem,
    PrimeModulus,
    char_value,
    field_arith,
    gen_prime,
    hamming_distance,
    is_prime,
)
from .functions import (
    LiftedFn,
    Params,
    TwoPartyFn,
    cor35_params,
    disj3_eval,
    g_mod2_eval,
    gip_eval,
    gip_value_distribution,
    ind_index,
    lifted_eval,
    make_two_party,
)
from .nof import (
    NofDomain,
    Protocol,
    SeparationWitness,
    Transcript,
    Turn,
    build_eq_rand,
    build_ind_two_round,
    build_lift_upper,
    consistent_set,
    estimate_rand_error,
    min_occ_nof_exact,
    occ_two_party,
    search_one_way_protocol,
    simulate,
    slice_cylinders,
    verify_protocol,
)
from .fourier import (
    CylinderIntersection,
    char_sum_gamma,
    ci_size,
    cs_chain_check,
    disperser_check,
    prob_gip_on_ci,
    sample_ci_random,
    vanish_prob,
)
from .combinatorics import (
    BipartiteGraph,
    graph_from_protocol,
    hd_witness,
    largeness_check,
    mean_common_neighbors,
)
from .density import (
    Rectangle,
    density_value,
    disj3_attack,
    ext_size,
    extract_support,
    project_best_side,
    projection,
)

__version__ = "0.1.0"
