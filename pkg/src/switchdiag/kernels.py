"""Backend dispatch for the hot kernels.

``LOOPS`` and ``VECTORIZED`` are always importable so callers (tests, the
benchmark) can compare them; the module-level names point at whichever the
``SWITCHDIAG_DISABLE_NUMBA`` flag selects.
"""

from types import SimpleNamespace

from . import _loops, _vectorized
from ._accel import USE_NUMBA, backend_name

_NAMES = (
    "component_labels",
    "spectral_radius",
    "row_selection_rhos",
    "jacobi_max_eigenvalue",
    "simplex",
    "simulate_batch",
)

LOOPS = SimpleNamespace(**{name: getattr(_loops, name) for name in _NAMES})
VECTORIZED = SimpleNamespace(**{name: getattr(_vectorized, name) for name in _NAMES})

active = LOOPS if USE_NUMBA else VECTORIZED

component_labels = active.component_labels
spectral_radius = active.spectral_radius
row_selection_rhos = active.row_selection_rhos
jacobi_max_eigenvalue = active.jacobi_max_eigenvalue
simplex = active.simplex
simulate_batch = active.simulate_batch

__all__ = ["LOOPS", "VECTORIZED", "USE_NUMBA", "backend_name", *_NAMES]
