"""Fourier-space heat semigroup, the drift operator ``D f = eps f'`` and Wiener-chaos terms.

Functions on the circle are trigonometric polynomials ``sum_k c_k e^{ik theta}``
with ``|k| <= K``.  The heat semigroup is diagonal, the derivative is diagonal,
and multiplication by the orientation ``eps`` is a Toeplitz convolution with its
closed-form Fourier coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circle import GraphParams, normalize_angle

K_MAX = 64


@dataclass(frozen=True, eq=False)
class FourierFunction:
    """Trigonometric polynomial with coefficients ``c[k + K]`` for ``k = -K..K``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or len(c) % 2 != 1:
            raise ValueError("need an odd number of coefficients")
        object.__setattr__(self, "coeffs", c)

    @property
    def k_max(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    @classmethod
    def zeros(cls, k_max: int = K_MAX) -> "FourierFunction":
        return cls(np.zeros(2 * k_max + 1, dtype=complex))

    @classmethod
    def constant(cls, value: float, k_max: int = K_MAX) -> "FourierFunction":
        c = np.zeros(2 * k_max + 1, dtype=complex)
        c[k_max] = value
        return cls(c)

    @classmethod
    def cos(cls, k: int = 1, k_max: int = K_MAX) -> "FourierFunction":
        c = np.zeros(2 * k_max + 1, dtype=complex)
        c[k_max + k] += 0.5
        c[k_max - k] += 0.5
        return cls(c)

    @classmethod
    def sin(cls, k: int = 1, k_max: int = K_MAX) -> "FourierFunction":
        c = np.zeros(2 * k_max + 1, dtype=complex)
        c[k_max + k] += -0.5j
        c[k_max - k] += 0.5j
        return cls(c)

    @classmethod
    def from_samples(cls, f, k_max: int = K_MAX, n: int = 4096) -> "FourierFunction":
        """Project a callable onto the modes ``|k| <= k_max`` by FFT on ``n`` points."""
        theta = 2 * math.pi * np.arange(n) / n
        fh = np.fft.fft(f(theta)) / n
        c = np.concatenate([fh[n - k_max:], fh[:k_max + 1]])
        return cls(c)

    def __call__(self, theta):
        """Real part of the synthesis at ``theta``."""
        th = np.asarray(theta, dtype=float)
        out = np.real(np.exp(1j * np.multiply.outer(th, self.modes)) @ self.coeffs)
        return float(out) if out.ndim == 0 else out

    def derivative(self, order: int = 1) -> "FourierFunction":
        return FourierFunction(self.coeffs * (1j * self.modes) ** order)

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.coeffs, np.conj(self.coeffs[::-1]), atol=tol))


def heat_apply(f: FourierFunction, t: float) -> FourierFunction:
    """Heat semigroup ``P_t``: ``c_k -> exp(-k^2 t / 2) c_k``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    k = f.modes
    return FourierFunction(f.coeffs * np.exp(-0.5 * k * k * t))


def epsilon_coefficients(l: float, k_max: int) -> np.ndarray:
    """Fourier coefficients ``e_k``, ``|k| <= k_max``, of the orientation ``eps``.

    ``e_0 = l / pi - 1`` and ``e_k = (1 - exp(-ikl)) / (i pi k)``.
    """
    k = np.arange(-k_max, k_max + 1)
    out = np.empty(len(k), dtype=complex)
    nz = k != 0
    out[nz] = (1 - np.exp(-1j * k[nz] * l)) / (1j * math.pi * k[nz])
    out[~nz] = l / math.pi - 1
    return out


@lru_cache(maxsize=32)
def _drift_matrix(l: float, k_max: int) -> np.ndarray:
    e = epsilon_coefficients(l, 2 * k_max)
    m = np.arange(-k_max, k_max + 1)
    toeplitz = e[(m[:, None] - m[None, :]) + 2 * k_max]
    mat = toeplitz * (1j * m)[None, :]
    mat.setflags(write=False)
    return mat


def drift_matrix(g: GraphParams, k_max: int = K_MAX) -> np.ndarray:
    """Matrix of ``D = eps d/dtheta`` on coefficient vectors, truncated to ``|k| <= k_max``."""
    return _drift_matrix(float(g.l), int(k_max))


def drift_apply(f: FourierFunction, g: GraphParams) -> FourierFunction:
    """``D f = eps f'`` truncated back to the modes of ``f``."""
    return FourierFunction(drift_matrix(g, f.k_max) @ f.coeffs)


@dataclass(frozen=True)
class ChaosConfig:
    """Truncation of the chaos expansion.

    Attributes
    ----------
    n_trunc : int
        Highest chaos order computed.
    stride : int
        Subgrid stride (in path steps) for the orders ``n >= 2``.
    """

    n_trunc: int = 3
    stride: int = 10

    def __post_init__(self):
        if self.n_trunc < 0:
            raise ValueError("n_trunc must be nonnegative")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")


def _phases(z: float, k_max: int) -> np.ndarray:
    return np.exp(1j * np.arange(-k_max, k_max + 1) * normalize_angle(z))


def first_chaos_integrand(f: FourierFunction, g: GraphParams, z: float, t: float,
                          s: np.ndarray) -> np.ndarray:
    """``[P_s D P_{t-s} f](z)`` at the times ``s``."""
    k = f.modes
    s = np.asarray(s, dtype=float)
    inner = f.coeffs[None, :] * np.exp(-0.5 * k * k * (t - s)[:, None])
    dv = inner @ drift_matrix(g, f.k_max).T
    outer = dv * np.exp(-0.5 * k * k * s[:, None])
    return np.real(outer @ _phases(z, f.k_max))


def ito_isometry_variance(f: FourierFunction, g: GraphParams, z: float, t: float) -> float:
    """``int_0^t [P_s D P_{t-s} f](z)^2 ds`` by adaptive quadrature."""
    from scipy.integrate import quad

    val, _ = quad(lambda s: first_chaos_integrand(f, g, z, t, np.array([s]))[0] ** 2, 0.0, t,
                  limit=200, epsabs=1e-13, epsrel=1e-10)
    return float(val)


def _increments(paths: np.ndarray, t: float, dt: float, stride: int) -> tuple[np.ndarray, float]:
    n = int(round(t / dt))
    if n % stride:
        raise ValueError("t / dt must be a multiple of the stride")
    w = np.asarray(paths)[:, : n + 1 : stride]
    return np.diff(w, axis=1), dt * stride


def chaos_terms(f: FourierFunction, g: GraphParams, z: float, t: float, paths: np.ndarray,
                dt: float, cfg: ChaosConfig = ChaosConfig()) -> np.ndarray:
    """All chaos terms ``J^0..J^N`` at ``z`` for a batch of driver paths.

    Parameters
    ----------
    paths : ndarray, shape (P, n+1)
        Driver values on the grid ``j * dt``; only ``[0, t]`` is used.

    Returns
    -------
    ndarray, shape (N + 1, P)
        Row 0 is ``P_t f(z)``; row 1 uses left-point sums on the full grid and
        rows ``n >= 2`` nested left-point sums on the subgrid of the given stride.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    n_paths = paths.shape[0]
    out = np.zeros((cfg.n_trunc + 1, n_paths))
    out[0] = heat_apply(f, t)(z)
    if cfg.n_trunc == 0:
        return out
    dw, h = _increments(paths, t, dt, 1)
    s = np.arange(dw.shape[1]) * h
    out[1] = dw @ first_chaos_integrand(f, g, z, t, s)
    if cfg.n_trunc == 1:
        return out
    out[2:] = _higher_chaos(f, g, z, t, paths, dt, cfg)
    return out


def _higher_chaos(f, g, z, t, paths, dt, cfg):
    """Orders ``2..N`` by one backward sweep on the subgrid, vectorized over paths."""
    db, h = _increments(paths, t, dt, cfg.stride)
    n_paths, m = db.shape
    k = f.modes
    dmat_t = drift_matrix(g, f.k_max).T
    step = np.exp(-0.5 * k * k * h)
    phase = _phases(z, f.k_max)
    order = cfg.n_trunc
    res = np.zeros((order - 1, n_paths), dtype=complex)
    # S[m] = sum over later subgrid points of P_{sigma_j - sigma_i} Q^{(m)}_j
    S = np.zeros((order - 1, n_paths, len(k)), dtype=complex)
    Q_next = None
    for i in range(m - 1, -1, -1):
        if Q_next is not None:
            S = (S + Q_next) * step
        sigma = i * h
        q1 = (f.coeffs * np.exp(-0.5 * k * k * (t - sigma))) @ dmat_t
        Q = np.empty((order, n_paths, len(k)), dtype=complex)
        Q[0] = q1[None, :] * db[:, i:i + 1]
        for n in range(1, order):
            Q[n] = (S[n - 1] @ dmat_t) * db[:, i:i + 1]
        evalv = phase * np.exp(-0.5 * k * k * sigma)
        res += Q[1:] @ evalv
        Q_next = Q[:-1]
    return np.real(res)


def chaos_term(f: FourierFunction, z: float, t: float, n: int, path, cfg: ChaosConfig,
               g: GraphParams) -> float:
    """Single chaos term ``J^n_t f(z)`` for one :class:`~circleflow.paths.BrownianPath`."""
    if n > cfg.n_trunc:
        raise ValueError(f"order {n} exceeds n_trunc={cfg.n_trunc}")
    sub = ChaosConfig(max(n, 0), cfg.stride)
    return float(chaos_terms(f, g, z, t, path.values[None, :], path.dt, sub)[n, 0])


class NonWienerLawError(ValueError):
    """The Wiener solution needs ``m+ = m- = delta_{1/2}``."""


def wiener_solution(real, z: float, t: float, f) -> float:
    """``K_{0,t} f(z)`` for a realization whose split laws are both ``delta_{1/2}``."""
    from .flow import kernel

    if not (real.m_plus.is_wiener and real.m_minus.is_wiener):
        raise NonWienerLawError(
            "the Wiener solution is defined only for m+ = m- = dirac:0.5 "
            "(the kernel is then measurable with respect to W)")
    return kernel(real, 0.0, t, z).integrate(f)
