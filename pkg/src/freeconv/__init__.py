"""Numerical free additive convolution through subordination.

Submodules
----------
measures
    Probability measures, Stieltjes transforms, CDFs and the Levy distance.
subord
    Solver for the subordination system and densities of free convolutions.
diagnostics
    Smoothness and genericity checks, stability under perturbation.
limits
    Free central, Poisson and Cauchy local limit experiments.
rmt
    Monte Carlo eigenvalue counts of ``A + U B U*``.
cli
    Command-line front end writing CSV tables.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ContinuationStalled,
    FreeConvError,
    InvalidParameter,
    NoConvergence,
    NonFiniteValue,
    NonPositiveImaginaryPart,
    NotConverged,
    NotHermitian,
    ParseError,
    SingularJacobian,
    UnsupportedMeasure,
    UnsupportedOrder,
)
from .measures import (  # noqa: E402
    AffineImage,
    Atoms,
    Cauchy,
    Empirical,
    MarchenkoPastur,
    MeasureSpec,
    Semicircle,
    cdf,
    closed_form_density,
    dirac,
    eigenvalue_grid,
    levy_distance,
    quantize,
    scale,
    shift,
    stieltjes,
    stieltjes_derivative,
)
from .parsing import format_measure, parse_measure_spec  # noqa: E402
from .subord import (  # noqa: E402
    DensityProfile,
    SubordinationPoint,
    boxplus_density,
    continue_to_axis,
    semicircle_boxplus,
    self_boxplus_n,
)
