"""Continuous-variable graph states in a cavity-coupled spin-1 ensemble array.

Subpackages are imported lazily by name; ``kernels.BACKEND`` reports whether
the numba kernels are active (set ``CAVGRAPH_NO_NUMBA=1`` to force numpy).
"""

__version__ = "0.1.0"
