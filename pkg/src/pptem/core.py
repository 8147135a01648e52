"""Model abstraction shared by the schemes, experiments and checkers.

Drift and diffusion callables work on *batches* of states: ``x`` has shape
``(n, d)`` and the callables return arrays of shape ``(n, d)`` and
``(n, d, m)``.  A second argument ``t`` carries the current time; autonomous
models simply ignore it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DriftFn = Callable[[np.ndarray, float], np.ndarray]
DiffusionFn = Callable[[np.ndarray, float], np.ndarray]


class SchemeKind(str, enum.Enum):
    """The three one-step integrators."""

    EM = "em"
    TEM_NORM = "tem"
    PPTEM = "pptem"

    @classmethod
    def parse(cls, value: "str | SchemeKind") -> "SchemeKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise ValueError(
            f"unknown scheme {value!r}; expected one of {[k.value for k in cls]}"
        )


@dataclass(frozen=True)
class ModelSpec:
    """An SDE ``dX = f(X, t) dt + g(X, t) dB`` on the positive cone.

    ``alpha`` and ``beta`` are the declared growth exponents of the local
    Lipschitz modulus (polynomial growth at infinity and singular growth at
    the boundary); ``lipschitz_scale`` is the matching constant K1.  They are
    only used to build a truncation policy and by the assumption checkers.
    """

    name: str
    d: int
    m: int
    drift: DriftFn
    diffusion: DiffusionFn
    alpha: float
    beta: float
    lipschitz_scale: float = 1.0
    singular: bool = False
    time_dependent: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError(f"dimensions must be positive, got d={self.d}, m={self.m}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError(
                f"growth exponents must be positive, got alpha={self.alpha}, beta={self.beta}"
            )
        if self.lipschitz_scale <= 0:
            raise ValueError("lipschitz_scale must be positive")

    @property
    def gamma(self) -> float:
        """Clamp-rate exponent ``max(alpha, beta + 1)``."""
        return max(self.alpha, self.beta + 1.0)

    def _batch(self, x) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.shape[-1] != self.d:
            raise ValueError(f"{self.name}: expected states of dimension {self.d}, got {arr.shape[-1]}")
        return arr, single

    def f(self, x, t: float = 0.0) -> np.ndarray:
        """Drift at a single state ``(d,)`` or a batch ``(n, d)``."""
        arr, single = self._batch(x)
        with np.errstate(all="ignore"):
            out = np.asarray(self.drift(arr, t), dtype=float)
        return out[0] if single else out

    def g(self, x, t: float = 0.0) -> np.ndarray:
        """Diffusion matrix at a single state ``(d, m)`` or a batch ``(n, d, m)``."""
        arr, single = self._batch(x)
        with np.errstate(all="ignore"):
            out = np.asarray(self.diffusion(arr, t), dtype=float)
        return out[0] if single else out


def in_positive_cone(x) -> bool:
    """True iff every component is strictly positive (NaN counts as outside)."""
    arr = np.asarray(x, dtype=float)
    return bool(np.all(arr > 0))
