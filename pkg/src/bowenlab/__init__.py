"""Non-autonomous conformal IFS constructions for perturbed meromorphic maps."""
from .complex_core import Disk, newton_invert, sup_norm_on_disk
from .families import (
    FamilyDescriptor, PerturbationSequence, PerturbationStep, PoleRecord, derivative,
    enumerate_poles, evaluate, local_branch, mayer_dimension, rational_exp, tan_power,
    theoretical_dimension, z_cos_sqrt_z, z_sin_z,
)
from .ncifs import (
    NcifsSystem, bowen_dimension, exact_Zn, lower_pressure, product_lower_bound,
    similarity_system,
)
from .poles import borel_partial_sum, estimate_order
from .verify import SymbolicAddress, forward_orbit, moran_oracle, sample_limit_point

__version__ = "0.1.0"
