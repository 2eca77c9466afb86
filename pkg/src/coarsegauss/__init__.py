"""Gaussian mean estimation from coarse (set-valued) observations.

Core pieces: convex partition geometry, exact/MCMC truncated-Gaussian sampling,
stochastic gradients of the coarse log-likelihood, staged projected SGD with a
clustering booster, a one-pass variant for regression under market friction,
an executable identifiability test, and variance-reduction checks.
"""

from .estimator import EstimatorConfig, EstimateReport, choose_R, estimate_mean
from .friction import (
    DeadbandLadder,
    FloorFriction,
    FrictionConfig,
    FrictionInstance,
    IdentityFriction,
    estimate_friction,
    generate_friction_data,
)
from .geometry import (
    AxisBox,
    EMPTY,
    GeometryError,
    HPolytope,
    Interval,
    Partition,
    Singleton,
    WholeSpace,
    breakpoints_partition,
    common_recession_direction,
    grid_partition,
    singleton_partition,
    slab_partition,
    voronoi_partition,
    whole_space_partition,
)
from .identifiability import IdentifiabilityVerdict, Verdict, assess
from .likelihood import nll_1d, stochastic_gradient
from .sampling import SamplerPolicy, hit_and_run, make_rng, sample_truncated
from .streams import ReplayStream, SyntheticStream, record_replay, replay
from .varred import make_family, variance_ratio

__version__ = "0.1.0"
