"""Hot inner loops, compiled with numba when available.

Set ``CAVGRAPH_NO_NUMBA=1`` to force the pure-numpy implementations. Both
backends expose the same functions and agree to floating-point rounding.
"""

import os

from . import _numpy

BACKEND = "numpy"
_impl = _numpy

if os.environ.get("CAVGRAPH_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import _numba

        _impl = _numba
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is optional at runtime
        pass

fock_index = _impl.fock_index
occupations = _impl.occupations
collective_coo = _impl.collective_coo
rk4_propagate = _impl.rk4_propagate
loo_covariances = _impl.loo_covariances

__all__ = [
    "BACKEND",
    "fock_index",
    "occupations",
    "collective_coo",
    "rk4_propagate",
    "loo_covariances",
]
