"""Worst-case landscapes for factored low-rank matrix recovery.

The package builds measurement ensembles whose smooth objectives admit a
spurious second-order point at a prescribed condition number, verifies the
point to solver precision, evaluates the closed-form condition-number bounds
that decide when such points can exist, runs momentum-descent escape
experiments, and exports the certifying semidefinite programs.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    bounds,
    certificates,
    counterexample,
    dynamics,
    eckart_young,
    matkernel,
    objective,
    serialize,
)
from .bounds import alpha_beta, kappa_lb_closed_form, sufficient_rank, thresholds  # noqa: F401
from .counterexample import CounterexampleInstance, build, verify_spurious  # noqa: F401
from .dynamics import TrialConfig, run_trials  # noqa: F401
from .objective import QuadraticObjective  # noqa: F401
