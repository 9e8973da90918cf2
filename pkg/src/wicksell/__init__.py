"""Isotonic and kernel estimators for Wicksell's problem with responses."""

__version__ = "0.1.0"

from .samples import (  # noqa: E402
    DataError,
    EmptyInputError,
    NumericError,
    Observation,
    ObservationSet,
    WicksellError,
    from_pairs,
    from_raw_triples,
)
from .naive import NaiveCurve, contribution, psi_naive, u_naive  # noqa: E402
from .lcm import (  # noqa: E402
    ConcaveMajorant,
    StepFunction,
    grid_lcm_oracle,
    isotonic_estimate,
    isotonic_psi,
    least_concave_majorant,
    majorant_value,
    sup_gap,
)
from .plummer import PlummerModel  # noqa: E402
from .smooth import KernelSpec, phi_hat, smooth_psi, smooth_psi_prime  # noqa: E402
