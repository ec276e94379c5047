"""Adaptive preconditioner states and the feasible domain.

Each scaling keeps an accumulator G_t of past gradient magnitudes; the step
preconditioner is the root A_t = G_t^(1/2), applied through its
Moore-Penrose pseudo-inverse so zero accumulator entries produce zero
direction entries.  No epsilon floor is added to A_t.

Kinds: cumulative scalar ("adagrad_norm"), cumulative per-coordinate
("adagrad_diag"), discounted per-coordinate ("rmsprop"), discounted with
momentum ("adam"), and the identity ("constant") for non-adaptive
baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Feasible set: either all of R^d or an axis-aligned box."""

    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    @classmethod
    def unconstrained(cls) -> "Domain":
        return cls()

    @classmethod
    def box(cls, lower, upper) -> "Domain":
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("box requires lower <= upper componentwise")
        return cls(lower, upper)

    @classmethod
    def centered_box(cls, center, halfwidth: float) -> "Domain":
        center = np.asarray(center, dtype=np.float64)
        return cls.box(center - halfwidth, center + halfwidth)

    @property
    def is_box(self) -> bool:
        return self.lower is not None

    @property
    def diameter(self) -> float:
        """Euclidean diameter: ||upper - lower|| for a box, inf otherwise."""
        if not self.is_box:
            return math.inf
        return float(np.linalg.norm(self.upper - self.lower))

    def project(self, x: np.ndarray) -> np.ndarray:
        """Nearest feasible point in any diagonal scaled norm.

        For diagonal (or scalar) preconditioners the scaled-norm projection
        onto a box separates per coordinate, so it is a plain clip;
        coordinates with zero preconditioner entry are clipped too, which
        picks one minimizer of the degenerate seminorm deterministically.
        """
        if not self.is_box:
            return x
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        if not self.is_box:
            return True
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


def mahalanobis_norm_sq(a_root, v: np.ndarray) -> float:
    """<v, A v> for a scalar or diagonal (vector) matrix A with entries >= 0."""
    v = np.asarray(v, dtype=np.float64)
    if np.ndim(a_root) == 0:
        return float(a_root) * float(v @ v)
    a = np.asarray(a_root, dtype=np.float64)
    return float((a * v) @ v)


class ScalingState:
    """Base accumulator; subclasses define the update rule for G_t."""

    kind: str = ""

    def __init__(self, d: int, eta: float):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.d = d
        self.eta = eta
        self.step_count = 0

    def _check_g(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.d,):
            raise ValueError(f"expected gradient of length {self.d}")
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient passed to scaling update")
        return g

    def accumulate(self, g) -> None:
        raise NotImplementedError

    def direction(self, g) -> np.ndarray:
        """Pseudo-inverse preconditioned direction A_t^+ g (A_t^+ m for adam)."""
        raise NotImplementedError

    def a_root(self):
        """The preconditioner A_t = G_t^(1/2): scalar or diagonal vector."""
        raise NotImplementedError

    def trace_root(self) -> float:
        """Tr(A_t); the scalar kind counts as a 1x1 matrix."""
        a = self.a_root()
        return float(a) if np.ndim(a) == 0 else float(np.sum(a))


class AdaGradNormScaling(ScalingState):
    kind = "adagrad_norm"

    def __init__(self, d: int, eta: float):
        super().__init__(d, eta)
        self.G = 0.0

    def accumulate(self, g) -> None:
        g = self._check_g(g)
        self.G += float(g @ g)
        self.step_count += 1

    def a_root(self) -> float:
        return math.sqrt(self.G)

    def direction(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        a = math.sqrt(self.G)
        if a == 0.0:
            return np.zeros_like(g)
        return g / a


def _diag_direction(G: np.ndarray, v: np.ndarray) -> np.ndarray:
    root = np.sqrt(G)
    out = np.zeros_like(v)
    np.divide(v, root, out=out, where=root > 0)
    return out


class AdaGradDiagScaling(ScalingState):
    kind = "adagrad_diag"

    def __init__(self, d: int, eta: float):
        super().__init__(d, eta)
        self.G = np.zeros(d)

    def accumulate(self, g) -> None:
        g = self._check_g(g)
        self.G += g * g
        self.step_count += 1

    def a_root(self) -> np.ndarray:
        return np.sqrt(self.G)

    def direction(self, g) -> np.ndarray:
        return _diag_direction(self.G, np.asarray(g, dtype=np.float64))


class RMSpropScaling(ScalingState):
    """Discounted accumulator G_t = gamma * g_t^2 + (1 - gamma) * G_{t-1}."""

    kind = "rmsprop"

    def __init__(self, d: int, eta: float, gamma: float = 0.9):
        super().__init__(d, eta)
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        self.gamma = gamma
        self.G = np.zeros(d)

    def accumulate(self, g) -> None:
        g = self._check_g(g)
        self.G = self.gamma * (g * g) + (1.0 - self.gamma) * self.G
        self.step_count += 1

    def a_root(self) -> np.ndarray:
        return np.sqrt(self.G)

    def direction(self, g) -> np.ndarray:
        return _diag_direction(self.G, np.asarray(g, dtype=np.float64))


class AdamScaling(ScalingState):
    """Discounted accumulator plus momentum, no bias-correction factors.

    m_t = beta1 * m_{t-1} + (1 - beta1) * g_t,
    G_t = beta2 * G_{t-1} + (1 - beta2) * g_t^2,
    and the step direction is A_t^+ m_t.
    """

    kind = "adam"

    def __init__(self, d: int, eta: float, beta1: float = 0.9, beta2: float = 0.999):
        super().__init__(d, eta)
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        self.beta1 = beta1
        self.beta2 = beta2
        self.G = np.zeros(d)
        self.m = np.zeros(d)

    def accumulate(self, g) -> None:
        g = self._check_g(g)
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.G = self.beta2 * self.G + (1.0 - self.beta2) * (g * g)
        self.step_count += 1

    def a_root(self) -> np.ndarray:
        return np.sqrt(self.G)

    def direction(self, g) -> np.ndarray:
        return _diag_direction(self.G, self.m)


class ConstantScaling(ScalingState):
    """Identity preconditioner, for the non-adaptive baselines."""

    kind = "constant"

    def accumulate(self, g) -> None:
        self._check_g(g)
        self.step_count += 1

    def a_root(self) -> float:
        return 1.0

    def trace_root(self) -> float:
        return float(self.d)

    def direction(self, g) -> np.ndarray:
        return np.asarray(g, dtype=np.float64)


SCALING_KINDS = {
    cls.kind: cls
    for cls in (
        AdaGradNormScaling,
        AdaGradDiagScaling,
        RMSpropScaling,
        AdamScaling,
        ConstantScaling,
    )
}


def make_scaling(
    kind: str,
    d: int,
    eta: float,
    gamma: float = 0.9,
    beta1: float = 0.9,
    beta2: float = 0.999,
) -> ScalingState:
    if kind == "rmsprop":
        return RMSpropScaling(d, eta, gamma)
    if kind == "adam":
        return AdamScaling(d, eta, beta1, beta2)
    try:
        cls = SCALING_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown scaling kind {kind!r}") from None
    return cls(d, eta)
