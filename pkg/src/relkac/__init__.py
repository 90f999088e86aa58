"""relkac: relativistic magnetic Schrodinger semigroups, two ways.

Dense lattice spectral oracles for the three quantizations of
sqrt((xi - A(x))^2 + m^2) + V(x), cross-validated against Monte Carlo
Feynman-Kac-Ito path integrals over subordinated-Brownian and jump paths.
"""

from .specfun import (
    MassDim,
    bessel_k,
    char_exponent,
    free_kernel,
    kernel_to_levy_limit,
    levy_density,
    relativistic_symbol,
    subordinator_density,
    subordinator_laplace,
)
from .fields import (
    FieldSpec,
    GaugeFunction,
    exact_line_integral,
    gauge_shift,
    line_average,
    make_field,
    make_field_spec,
    make_gauge,
    make_potential,
    midpoint_eval,
)
from .lattice import (
    Lattice,
    LatticeOperator,
    build_h0,
    build_h1,
    build_h2,
    build_h3,
    coincidence_residual,
    diamagnetic_check,
    gauge_residual,
    quadratic_form,
    sliced_product,
    spectral_floor,
    trotter_product,
)
from .paths import (
    BrownianPath,
    CadlagPath,
    RngStream,
    SubordinatorPath,
    counting_measure,
    sample_brownian,
    sample_levy_jumps,
    sample_subordinated,
    sample_subordinator,
)
from .actions import (
    ActionValue,
    action_s1_jump,
    action_s1_sliced,
    action_s2_jump,
    action_s2_sliced,
    action_s3,
)
from .estimator import (
    EstimateReport,
    MCParams,
    ProbeFunction,
    charfn_suite,
    compare_with_oracle,
    estimate,
    make_probe,
    oracle_estimate,
)
from .verify import run_suites

__version__ = "0.1.0"
