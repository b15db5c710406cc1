"""Switched positive delay systems and the two-mode worked example."""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .linalg import LinalgError


class ModelKind(str, Enum):
    """Update rule of the switched system.

    persidskii: x(k+1) = A f(x(k)) + sum_m B_m f(x(k-m))
    filter:     x(k+1) = f(A x(k) + sum_m B_m x(k-m))
    network:    x(k+1) = A f(x(k)) + sum_m B_m f(x(k-m)) + u(k)
    """

    PERSIDSKII = "persidskii"
    FILTER = "filter"
    NETWORK = "network"


class InvalidSystemError(LinalgError):
    pass


@dataclass(frozen=True, eq=False)
class SwitchedDelaySystem:
    """Family of N nonnegative subsystems of dimension n with delay l.

    ``A`` has shape (N, n, n). ``B`` has shape (l, N, n, n) and ``B[m - 1, s]``
    multiplies the state delayed by m steps in mode s. A single-delay system
    keeps its blocks at ``B[l - 1]`` and zeros elsewhere.
    """

    A: np.ndarray
    B: np.ndarray
    model: ModelKind = ModelKind.PERSIDSKII
    name: str = ""
    source: str = ""

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        B = np.array(self.B, dtype=np.float64)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[0] == 0 or A.shape[1] == 0:
            raise InvalidSystemError(f"A must have shape (N, n, n), got {A.shape}")
        N, n, _ = A.shape
        if B.ndim != 4 or B.shape[1:] != (N, n, n) or B.shape[0] == 0:
            raise InvalidSystemError(f"B must have shape (l, {N}, {n}, {n}), got {B.shape}")
        for label, arr in (("A", A), ("B", B)):
            if not np.all(np.isfinite(arr)):
                raise InvalidSystemError(f"{label} has non-finite entries")
            bad = np.argwhere(arr < 0)
            if bad.size:
                idx = "][".join(str(int(i)) for i in bad[0])
                raise InvalidSystemError(f"{label}[{idx}] = {float(arr[tuple(bad[0])])!r} is negative")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "model", ModelKind(self.model))

    @classmethod
    def single_delay(cls, A, B, l=1, model=ModelKind.PERSIDSKII, **kw):
        """Build from per-mode lists ``A[s]``, ``B[s]`` acting at delay ``l``."""
        A = np.asarray(A, dtype=np.float64)
        Bs = np.asarray(B, dtype=np.float64)
        if l < 1:
            raise InvalidSystemError("delay must be a positive integer")
        full = np.zeros((l,) + Bs.shape)
        full[l - 1] = Bs
        return cls(A, full, model, **kw)

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def N(self):
        return self.A.shape[0]

    @property
    def l(self):
        return self.B.shape[0]

    @property
    def is_single_delay(self):
        return not np.any(self.B[:-1])

    @property
    def delay_blocks(self):
        """The (N, n, n) blocks acting at the maximal delay."""
        return self.B[-1]

    def with_model(self, model):
        return SwitchedDelaySystem(self.A, self.B, ModelKind(model), self.name, self.source)

    def summary(self):
        return {
            "name": self.name,
            "n": self.n,
            "N": self.N,
            "l": self.l,
            "model": self.model.value,
            "single_delay": self.is_single_delay,
        }


def paper_example(a, model=ModelKind.PERSIDSKII):
    """The two-mode, two-state, unit-delay example with free parameter ``a > 0``."""
    a = float(Fraction(a)) if isinstance(a, str) else float(a)
    A = np.array([[[0, 0], [1, 1]], [[0, 1], [0, 2]]], dtype=np.float64) / 4
    B = np.array([[[a, 1], [2, 0]], [[1, 1], [0, 0]]], dtype=np.float64) / 4
    return SwitchedDelaySystem.single_delay(
        A, B, l=1, model=model, name=f"paper-example a={a!r}", source="numerical example, two subsystems"
    )
