"""Geometry of the oriented two-edge circle graph and finitely atomic measures on it.

Angles are radians in ``[0, 2*pi)``.  The graph has vertices at ``theta = 0`` and
``theta = l``; the arc ``(0, l)`` is oriented forward (``epsilon = +1``) and the
rest of the circle backward (``epsilon = -1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

#: Atoms closer than this (circular distance, radians) are merged.
TOL_MERGE = 1e-9
#: Angles within this distance of a vertex are treated as sitting on it.
TOL_VERTEX = 1e-11
#: Number of trigonometric frequencies in the test family used by ``measure_distance``.
K_TEST = 16


def normalize_angle(theta):
    """Reduce angles to ``[0, 2*pi)``, mapping ``-0.0`` and rounding spill-over to 0."""
    out = np.mod(theta, TWO_PI)
    out = np.where(out >= TWO_PI, 0.0, out) + 0.0
    if np.ndim(out) == 0:
        return float(out)
    return out


def circular_distance(a, b):
    d = np.abs(normalize_angle(np.asarray(a) - np.asarray(b)))
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class GraphParams:
    """Parameter of the graph: the angle ``l`` of the second vertex, ``0 < l <= pi``."""

    l: float

    def __post_init__(self):
        if not (0.0 < self.l <= math.pi + 1e-15):
            raise ValueError(f"l must lie in (0, pi], got {self.l!r}")

    def epsilon(self, theta):
        """Edge orientation: +1 on the closed arc ``[0, l]``, -1 elsewhere."""
        return epsilon(theta, self)

    def vertex(self, theta: float) -> int | None:
        """0 for the vertex 1, 1 for ``e^{il}``, ``None`` for interior edge points."""
        if circular_distance(theta, 0.0) <= TOL_VERTEX:
            return 0
        if circular_distance(theta, self.l) <= TOL_VERTEX:
            return 1
        return None

    def snap(self, theta: float) -> float:
        v = self.vertex(theta)
        if v == 0:
            return 0.0
        if v == 1:
            return float(self.l)
        return normalize_angle(theta)


@dataclass(frozen=True)
class CirclePoint:
    """A point ``e^{i theta}`` of the circle, stored by its normalized angle."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    def epsilon(self, g: GraphParams) -> int:
        return int(epsilon(self.theta, g))

    def __complex__(self):
        return complex(math.cos(self.theta), math.sin(self.theta))


def _theta(z) -> float:
    return z.theta if isinstance(z, CirclePoint) else normalize_angle(float(z))


def epsilon(z, g: GraphParams):
    """Orientation of the graph at ``z``: +1 iff ``arg z`` lies in ``[0, l]``.

    Accepts a :class:`CirclePoint`, a float angle or an array of angles.
    """
    if isinstance(z, CirclePoint):
        theta = z.theta
    else:
        theta = normalize_angle(z)
    sign = np.where(theta <= g.l, 1, -1)
    if np.ndim(sign) == 0:
        return int(sign)
    return sign


class MassError(ValueError):
    """A kernel output does not carry unit mass."""


class AtomicMeasure:
    """Probability measure with finitely many atoms, kept in canonical form.

    Canonical form: zero-weight atoms dropped, atoms within ``TOL_MERGE`` of each
    other (circularly) merged, atoms sorted by angle.
    """

    __slots__ = ("thetas", "weights")

    def __init__(self, thetas: Iterable[float], weights: Iterable[float], tol: float = TOL_MERGE):
        th = normalize_angle(np.atleast_1d(np.asarray(thetas, dtype=float)))
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        if th.shape != w.shape:
            raise ValueError("thetas and weights must have the same length")
        if np.any(w < -1e-15):
            raise ValueError("negative weight")
        th, w = _canonicalize(th, np.clip(w, 0.0, None), tol)
        th.setflags(write=False)
        w.setflags(write=False)
        self.thetas = th
        self.weights = w

    @classmethod
    def dirac(cls, theta: float) -> "AtomicMeasure":
        return cls([theta], [1.0])

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "AtomicMeasure":
        if not pairs:
            raise ValueError("empty measure")
        th, w = zip(*pairs)
        return cls(th, w)

    def __len__(self):
        return len(self.thetas)

    def __iter__(self):
        return iter(zip(self.thetas.tolist(), self.weights.tolist()))

    def __repr__(self):
        body = ", ".join(f"{w:.6g}@{t:.6g}" for t, w in self)
        return f"AtomicMeasure({body})"

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support(self) -> np.ndarray:
        return self.thetas

    def integrate(self, f: Callable) -> float:
        return float(np.dot(self.weights, f(self.thetas)))

    def is_dirac_at(self, theta: float, tol: float = TOL_MERGE) -> bool:
        return len(self) == 1 and circular_distance(self.thetas[0], theta) <= tol

    def contains(self, theta: float, tol: float = TOL_MERGE) -> bool:
        return bool(np.any(circular_distance(self.thetas, theta) <= tol))


def _canonicalize(th: np.ndarray, w: np.ndarray, tol: float):
    keep = w > 0.0
    th, w = th[keep], w[keep]
    if th.size == 0:
        raise ValueError("measure has no positive mass")
    order = np.argsort(th, kind="stable")
    th, w = th[order], w[order]
    if th.size == 1:
        return th.copy(), w.copy()
    # consecutive clusters
    starts = np.concatenate([[True], np.diff(th) > tol])
    labels = np.cumsum(starts) - 1
    reps = th[starts]
    sums = np.bincount(labels, weights=w)
    # wrap-around: last cluster sits within tol of the first one across 2*pi
    if reps.size > 1 and (TWO_PI - th[-1]) + th[0] <= tol:
        sums[0] += sums[-1]
        reps, sums = reps[:-1], sums[:-1]
    return reps.copy(), sums


def _test_moments(mu: AtomicMeasure, k_test: int) -> np.ndarray:
    k = np.arange(1, k_test + 1)
    phase = np.outer(k, mu.thetas)
    cos = np.cos(phase) @ mu.weights
    sin = np.sin(phase) @ mu.weights
    out = np.empty(2 * k_test + 1)
    out[0] = mu.weights.sum()
    out[1::2] = cos
    out[2::2] = sin
    return out


def test_weights(k_test: int = K_TEST) -> np.ndarray:
    """Weights ``2^{-n}`` for the family ``1, cos t, sin t, cos 2t, ...`` (n starts at 1)."""
    return 2.0 ** -np.arange(1, 2 * k_test + 2)


def measure_moments(mu: AtomicMeasure, k_test: int = K_TEST) -> np.ndarray:
    """Integrals of the distance test family against ``mu``."""
    return _test_moments(mu, k_test)


def moment_distance(a: np.ndarray, b: np.ndarray, k_test: int = K_TEST) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return float(np.sqrt(np.sum(test_weights(k_test) * diff * diff)))


def measure_distance(mu: AtomicMeasure, nu: AtomicMeasure, k_test: int = K_TEST) -> float:
    """Truncated weighted-moment distance between two atomic measures.

    Uses ``f_1 = 1, f_{2k} = cos(k theta), f_{2k+1} = sin(k theta)`` for
    ``k = 1..k_test`` with weights ``2^{-n}``.
    """
    return moment_distance(_test_moments(mu, k_test), _test_moments(nu, k_test), k_test)


def pushforward(mu: AtomicMeasure, kernel: Callable[[float], AtomicMeasure], tol: float = 1e-9) -> AtomicMeasure:
    """Compose ``mu`` with a Markov kernel: ``sum_i w_i kernel(x_i)``."""
    thetas: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    for x, w in mu:
        out = kernel(x)
        if abs(out.mass - 1.0) > tol:
            raise MassError(f"kernel at theta={x!r} has mass {out.mass!r}")
        thetas.append(out.thetas)
        weights.append(w * out.weights)
    return AtomicMeasure(np.concatenate(thetas), np.concatenate(weights))
