"""Linear Hamiltonian chains with random velocity flips of the first particle.

Exact modal flows, the flip maps J, torus contraction, local covering and
steering, and simulation of the flip process with time averages compared
against the Liouville measure.
"""

from ._kernels import BACKEND
from .dynamics import (
    State,
    TorusVector,
    action_vars,
    energy,
    flip,
    g_star,
    h_distance,
    h_norm,
    inverse_jcompose,
    jcompose,
    jstep,
    propagate,
    state_on_torus,
)
from .errors import (
    BudgetExceeded,
    ConfigError,
    DifferentEnergy,
    EmptySample,
    FlipflowError,
    HorizonTooShort,
    MomentumOutsideCube,
    NegativeRadicand,
    NotInVPlus,
    NotPositiveDefinite,
    NotSymmetric,
    NumericalFailure,
    StalledProgress,
)
from .liouville import (
    ErgodicReport,
    ergodicity_report,
    invariance_check,
    ks_two_sample,
    reference_expectation,
    sample_liouville,
)
from .model import (
    AdmissibilityReport,
    SpectrumNotSimple,
    SystemSpec,
    check_admissible,
    decompose,
    harmonic_chain,
    mixing_dimension,
    random_spd,
)
from .observables import resolve as observable
from .rng import make_rng
from .steering import (
    SteerResult,
    find_flip_time,
    steer_exact_n1,
    steer_to_gstar,
    steer_to_target,
    verify_local_covering,
)
from .stochastic import (
    EventLog,
    WaitingLaw,
    embedded_chain,
    multi_trajectory,
    sample_wait,
    simulate_pdmp,
    time_average,
    time_averages,
)
from .torus import metrics, optimal_flip_momentum, psi_map, rho

__version__ = "0.1.0"
