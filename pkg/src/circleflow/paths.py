"""Brownian driver paths on a uniform grid, windowed extrema and stopping times.

A path stores ``W(t_j)`` at ``t_j = j * dt``.  Between grid points the path is
read as its piecewise-linear interpolant, so every stopping time below is the
exact crossing time of that interpolant.  Internally times are *fractional grid
indices* ``x`` (process time ``x * dt``); grid points are integral floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

#: Streams derived from ``(master, replicate, stream)``.
STREAM_PATH = 0
STREAM_PLUS = 1
STREAM_MINUS = 2

_CHUNK0 = 2048


def replicate_entropy(master: int, replicate: int, stream: int) -> list[int]:
    """Entropy list for an independent stream of one replicate."""
    return [int(master), int(replicate), int(stream)]


class Crossing(NamedTuple):
    """A stopping time on the interpolated path.

    ``index`` is a fractional grid index, ``side`` is +1/-1 (which barrier or
    which reflected process fired) and ``level`` is the value of ``W`` there.
    """

    index: float
    side: int
    level: float


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Uniform-grid sample of a Brownian motion started at 0.

    Attributes
    ----------
    dt : float
        Grid step in process time.
    values : ndarray
        ``W(j * dt)`` for ``j = 0..n``, read-only, ``values[0] == 0``.
    seed : object
        Seed or entropy list the path was sampled from.
    """

    dt: float
    values: np.ndarray
    seed: object = None

    @property
    def n(self) -> int:
        """Index of the last grid point."""
        return len(self.values) - 1

    @property
    def horizon(self) -> float:
        return self.n * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt

    def index_of(self, t: float) -> float:
        """Fractional grid index of process time ``t`` (snapped to a grid point when within 1e-9)."""
        x = t / self.dt
        r = round(x)
        if abs(x - r) <= 1e-9:
            x = float(r)
        if x < 0 or x > self.n:
            raise ValueError(f"time {t!r} outside [0, {self.horizon!r}]")
        return x

    def at(self, x: float) -> float:
        """Value of the interpolated path at fractional index ``x``."""
        i = math.floor(x)
        if i == x:
            return float(self.values[i])
        v = self.values
        return float(v[i] + (x - i) * (v[i + 1] - v[i]))

    def increment(self, a: float, b: float) -> float:
        """``W_{a,b} = W(b) - W(a)``."""
        return self.at(b) - self.at(a)

    # ----------------------------------------------------------------- windows
    def _window(self, a: float, b: float):
        if b < a:
            raise ValueError("window end precedes its start")
        lo = math.floor(a) + 1
        hi = math.ceil(b) - 1
        vals = [np.array([self.at(a)])]
        locs = [np.array([a])]
        if hi >= lo:
            vals.append(self.values[lo:hi + 1])
            locs.append(np.arange(lo, hi + 1, dtype=float))
        if b > a:
            vals.append(np.array([self.at(b)]))
            locs.append(np.array([b]))
        return np.concatenate(vals), np.concatenate(locs)

    def window_min(self, a: float, b: float) -> tuple[float, float]:
        """``(min, location)`` of ``W`` over ``[a, b]``; ties go to the earliest location."""
        vals, locs = self._window(a, b)
        i = int(np.argmin(vals))
        return float(vals[i]), float(locs[i])

    def window_max(self, a: float, b: float) -> tuple[float, float]:
        """``(max, location)`` of ``W`` over ``[a, b]``; ties go to the earliest location."""
        vals, locs = self._window(a, b)
        i = int(np.argmax(vals))
        return float(vals[i]), float(locs[i])

    def reflected(self, a: float, b: float) -> tuple[float, float]:
        """``(W^+_{a,b}, W^-_{a,b})``: distance of ``W(b)`` above the window min and below the max."""
        vals, _ = self._window(a, b)
        wb = vals[-1]
        return float(wb - vals.min()), float(vals.max() - wb)

    # ------------------------------------------------------------------ scans
    def _scan(self, a: float):
        """Yield ``(t_prev, v_prev, idx, vals)`` chunks of grid points after ``a``.

        ``t_prev``/``v_prev`` hold the time and value just before each entry of
        ``vals`` (the first one is ``a`` itself).
        """
        j = math.floor(a) + 1
        t0, v0 = a, self.at(a)
        size = _CHUNK0
        while j <= self.n:
            k = min(self.n + 1, j + size)
            vals = self.values[j:k]
            idx = np.arange(j, k, dtype=float)
            t_prev = np.concatenate([[t0], idx[:-1]])
            v_prev = np.concatenate([[v0], vals[:-1]])
            yield t_prev, v_prev, idx, vals
            t0, v0 = float(idx[-1]), float(vals[-1])
            j = k
            size *= 2

    @staticmethod
    def _interp(t0, v0, t1, v1, level) -> float:
        if v1 == v0:
            return float(t1)
        frac = (level - v0) / (v1 - v0)
        frac = min(max(frac, 0.0), 1.0)
        return float(min(max(t0 + frac * (t1 - t0), t0), t1))

    def range_hit(self, a: float, l: float) -> Crossing | None:
        """First ``x >= a`` where ``sup - inf`` of ``W`` over ``[a, x]`` reaches ``l``.

        ``side = +1`` when the reflected process ``W^+`` fires (new maximum),
        ``-1`` when ``W^-`` fires.
        """
        w0 = self.at(a)
        cmax, cmin = w0, w0
        for t_prev, v_prev, idx, vals in self._scan(a):
            rmax = np.maximum.accumulate(np.concatenate([[cmax], vals]))
            rmin = np.minimum.accumulate(np.concatenate([[cmin], vals]))
            hit = np.flatnonzero(rmax[1:] - rmin[1:] >= l)
            if hit.size:
                k = int(hit[0])
                pmax, pmin = rmax[k], rmin[k]
                if vals[k] > pmax:
                    side, level = 1, float(pmin + l)
                else:
                    side, level = -1, float(pmax - l)
                x = self._interp(t_prev[k], v_prev[k], idx[k], vals[k], level)
                return Crossing(x, side, level)
            cmax, cmin = float(rmax[-1]), float(rmin[-1])
        return None

    def exit_interval(self, a: float, lo: float, hi: float) -> Crossing | None:
        """First exit of ``W_{a,.}`` from the open interval ``(lo, hi)``, ``lo < 0 < hi``.

        ``side = -1`` for the lower barrier, ``+1`` for the upper one.
        """
        w0 = self.at(a)
        lo_abs, hi_abs = w0 + lo, w0 + hi
        for t_prev, v_prev, idx, vals in self._scan(a):
            hit = np.flatnonzero((vals <= lo_abs) | (vals >= hi_abs))
            if hit.size:
                k = int(hit[0])
                side = 1 if vals[k] >= hi_abs else -1
                level = hi_abs if side == 1 else lo_abs
                x = self._interp(t_prev[k], v_prev[k], idx[k], vals[k], level)
                return Crossing(x, side, float(level))
        return None

    def level_hit(self, a: float, level: float) -> Crossing | None:
        """First time ``W_{a,.}`` reaches ``level`` (``a`` itself when ``level == 0``)."""
        if level == 0:
            return Crossing(a, 0, self.at(a))
        if level > 0:
            return self.exit_interval(a, -math.inf, level)
        return self.exit_interval(a, level, math.inf)

    def drawdown_hit(self, a: float, depth: float) -> Crossing | None:
        """First time ``W^-_{a,.}`` (drop below the running max) reaches ``depth``."""
        return self._excursion_hit(a, depth, -1)

    def drawup_hit(self, a: float, height: float) -> Crossing | None:
        """First time ``W^+_{a,.}`` (rise above the running min) reaches ``height``."""
        return self._excursion_hit(a, height, 1)

    def _excursion_hit(self, a: float, size: float, sign: int) -> Crossing | None:
        if size <= 0:
            return Crossing(a, sign, self.at(a))
        c = sign * self.at(a)
        for t_prev, v_prev, idx, vals in self._scan(a):
            s = sign * vals
            run = np.minimum.accumulate(np.concatenate([[c], s]))
            hit = np.flatnonzero(s - run[1:] >= size)
            if hit.size:
                k = int(hit[0])
                level = sign * (run[k] + size)
                x = self._interp(t_prev[k], v_prev[k], idx[k], vals[k], level)
                return Crossing(x, sign, float(level))
            c = float(run[-1])
        return None


def sample_path(dt: float, horizon: float, seed) -> BrownianPath:
    """Sample ``W`` on ``[0, horizon]`` with step ``dt``.

    ``seed`` is anything ``numpy.random.default_rng`` accepts.  With the same seed
    a shorter horizon gives a prefix of a longer one.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > horizon * (1 + 1e-12):
        raise ValueError("dt exceeds the horizon")
    n = int(round(horizon / dt))
    rng = np.random.default_rng(seed)
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(rng.standard_normal(n) * math.sqrt(dt), out=values[1:])
    values.setflags(write=False)
    return BrownianPath(dt=float(dt), values=values, seed=seed)


def replicate_path(dt: float, horizon: float, master: int, replicate: int) -> BrownianPath:
    return sample_path(dt, horizon, replicate_entropy(master, replicate, STREAM_PATH))


# Process-time wrappers --------------------------------------------------------


def reflected_plus(path: BrownianPath, s: float, t: float) -> float:
    """``W^+_{s,t} = W_t - inf_{[s,t]} W`` at process times ``s <= t``."""
    return path.reflected(path.index_of(s), path.index_of(t))[0]


def reflected_minus(path: BrownianPath, s: float, t: float) -> float:
    """``W^-_{s,t} = sup_{[s,t]} W - W_t`` at process times ``s <= t``."""
    return path.reflected(path.index_of(s), path.index_of(t))[1]


def _to_time(path: BrownianPath, c: Crossing | None):
    if c is None:
        return None
    return c.index * path.dt, c.side


def rho(path: BrownianPath, s: float, l: float):
    """``(time, side)`` of the first time the range of ``W`` over ``[s, .]`` reaches ``l``, or ``None``."""
    return _to_time(path, path.range_hit(path.index_of(s), l))


def exit_barriers(theta: float, l: float) -> tuple[float, float] | None:
    """Barriers ``(lo, hi)`` for ``W_{s,.}`` that bring an edge point at ``theta`` to a vertex.

    The lower barrier leads to vertex 1, the upper one to ``e^{il}``.  Returns
    ``None`` for a vertex.
    """
    if theta == 0.0 or theta == l:
        return None
    if theta < l:
        return -theta, l - theta
    return theta - 2 * math.pi, theta - l


def tau(path: BrownianPath, s: float, theta: float, l: float):
    """``(time, vertex)`` of the first vertex hit from ``theta``, vertex 0 = 1, 1 = ``e^{il}``."""
    x = path.index_of(s)
    bars = exit_barriers(theta, l)
    if bars is None:
        return x * path.dt, (0 if theta == 0.0 else 1)
    c = path.exit_interval(x, *bars)
    if c is None:
        return None
    return c.index * path.dt, (1 if c.side == 1 else 0)


def level_hit(path: BrownianPath, s: float, a: float):
    """First process time ``>= s`` at which ``W_{s,.}`` reaches ``a``, or ``None``."""
    c = path.level_hit(path.index_of(s), a)
    return None if c is None else c.index * path.dt


def running_argmin(vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running minimum of ``vals`` and the earliest position attaining it."""
    runmin = np.minimum.accumulate(vals)
    rec = np.empty(len(vals), dtype=bool)
    rec[0] = True
    rec[1:] = vals[1:] < runmin[:-1]
    idx = np.maximum.accumulate(np.where(rec, np.arange(len(vals)), 0))
    return runmin, idx


def skorokhod_two_sided(increments: Sequence[float], upper: float) -> np.ndarray:
    """Discrete two-sided reflection into ``[0, upper]`` of a walk started at 0.

    ``X_{j+1} = min(max(X_j + dW_j, 0), upper)``.
    """
    x = 0.0
    out = np.empty(len(increments) + 1)
    out[0] = 0.0
    for j, d in enumerate(np.asarray(increments, dtype=float).tolist()):
        x = min(max(x + d, 0.0), upper)
        out[j + 1] = x
    return out
