"""cubetest: property testing for bounded real-valued functions on the
Boolean hypercube, with exact brute-force oracles at desk scale."""

from .tables import (
    CubePoint,
    FunctionTable,
    FourierSpectrum,
    QueryOracle,
    combine,
    discretize,
    hamming_distance,
    inverse_walsh_hadamard,
    lp_distance,
    make_counting_oracle,
    meet_join_xor,
    read_table,
    walsh_hadamard,
    write_table,
)
from .influence import (
    CoordPartition,
    closest_junta,
    estimate_inf,
    influence_exact,
    influence_fourier,
    junta_projection,
    random_partition,
)
from .valuations import (
    ValuationSpec,
    ViolationWitness,
    check_additive,
    check_self_bounding,
    check_subadditive,
    check_submodular,
    check_unit_demand,
    gen,
    make_far_instance,
    random_spec,
)
from .cores import CoreSet, CoreTable, dist_core_to_set, enumerate_cores, lift_core
from .tester import (
    PatternBuckets,
    TesterConfig,
    TesterReport,
    bucket_coordinates,
    desk_config,
    lp_epsilon_map,
    paper_config,
    run_tester,
)
from .bench import ExperimentPlan, ExperimentSummary, certify, run_plan, wilson_halfwidth

__version__ = "0.1.0"
