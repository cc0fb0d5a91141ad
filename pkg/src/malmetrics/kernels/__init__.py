"""Hot inner loops, with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``MALMETRICS_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).
Both paths produce bit-identical outputs; random numbers are always drawn
by numpy outside the kernels so the choice of path never changes a stream.
"""

import os

from . import _numpy as numpy_impl

_disabled = os.environ.get("MALMETRICS_DISABLE_NUMBA", "").strip().lower() not in (
    "",
    "0",
    "false",
    "no",
)

try:
    if _disabled:
        raise ImportError("disabled by MALMETRICS_DISABLE_NUMBA")
    from . import _numba as numba_impl
except ImportError:
    numba_impl = None

USE_NUMBA = numba_impl is not None
BACKEND = "numba" if USE_NUMBA else "numpy"

_active = numba_impl if USE_NUMBA else numpy_impl

vote_counts = _active.vote_counts
z_counts = _active.z_counts
poisson_binomial_pmf = _active.poisson_binomial_pmf
leave_one_out_pmfs = _active.leave_one_out_pmfs
count_sums = _active.count_sums
bernoulli_from_truth = _active.bernoulli_from_truth
perturbed_from_truth = _active.perturbed_from_truth

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "numpy_impl",
    "numba_impl",
    "vote_counts",
    "z_counts",
    "poisson_binomial_pmf",
    "leave_one_out_pmfs",
    "count_sums",
    "bernoulli_from_truth",
    "perturbed_from_truth",
]
