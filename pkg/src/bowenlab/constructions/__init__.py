from .constants import Constant, ConstantLedger, comparability_K, diameter_L, pstar_poles
from .cover import (
    CoverSumReport, R3Selection, cover_alphabet, escape_cover_sum, select_R3, select_R3_details,
)
from .kotus_urbanski import (
    EscapeSchedule, KuAffineConfig, KuEscapeConfig, affine_N_t, affine_level_bound,
    build_ku_affine, build_ku_escape, escape_level_bound, xi_schedule,
)
from .mayer import (
    MayerConfig, build_mayer, mayer_N_t, mayer_branch_sum, mayer_nt_predicate, mayer_series,
    mayer_threshold,
)
