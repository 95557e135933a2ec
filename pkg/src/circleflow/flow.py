"""Path-wise evaluation of the flow of kernels ``K`` and the flow of maps ``phi``.

On ``[a, rho_a]`` the kernel has a closed form in terms of the reflected
processes and the decorations at the window extrema; longer horizons compose
these one-interval kernels along the chain ``a, rho_a, rho_{rho_a}, ...``.

Two interfaces are provided: methods named ``*_at`` take fractional grid
indices and angles, the module-level functions take process times and
:class:`~circleflow.circle.CirclePoint` or float angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circle import (
    TOL_MERGE,
    TOL_VERTEX,
    TWO_PI,
    AtomicMeasure,
    CirclePoint,
    GraphParams,
    circular_distance,
    epsilon,
    normalize_angle,
    pushforward,
)
from .decorations import MINUS, PLUS, DecorationStore, SplitLaw, parse_law
from .paths import (
    STREAM_MINUS,
    STREAM_PLUS,
    BrownianPath,
    Crossing,
    exit_barriers,
    replicate_entropy,
    replicate_path,
    running_argmin,
)

#: Times closer than this (in grid steps) to a chain anchor are read as the anchor.
TOL_ANCHOR = 1e-9


class IntervalError(ValueError):
    """A one-interval query past the end of its interval."""


@dataclass(frozen=True)
class RhoChain:
    """Anchors ``rho^0 = s < rho^1 < ...`` (grid indices) and the side that fired at each."""

    anchors: tuple
    sides: tuple
    complete: bool

    def interval_of(self, x: float) -> int:
        """Index ``k`` with ``anchors[k] <= x < anchors[k+1]``."""
        return int(np.searchsorted(np.asarray(self.anchors), x, side="right")) - 1


def _snap_array(th: np.ndarray, l: float) -> np.ndarray:
    th = normalize_angle(th)
    th = np.where(circular_distance(th, 0.0) <= TOL_VERTEX, 0.0, th)
    return np.where(np.abs(th - l) <= TOL_VERTEX, l, th)


@dataclass(eq=False)
class FlowRealization:
    """One realization of the driver and both decoration stores.

    Parameters
    ----------
    path : BrownianPath
    dplus, dminus : DecorationStore
        Plus-side decorations (keyed by window minima) and minus-side ones
        (keyed by window maxima).
    g : GraphParams
    """

    path: BrownianPath
    dplus: DecorationStore
    dminus: DecorationStore
    g: GraphParams
    _rho: dict = field(default_factory=dict, repr=False)
    _tau: dict = field(default_factory=dict, repr=False)
    _refl: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dplus.side != PLUS or self.dminus.side != MINUS:
            raise ValueError("store sides do not match")

    @classmethod
    def build(cls, l: float, m_plus, m_minus, dt: float, horizon: float, master: int = 0,
              replicate: int = 0, path: BrownianPath | None = None) -> "FlowRealization":
        """Sample a realization for ``(master, replicate)`` with independent streams."""
        lp = parse_law(m_plus) if isinstance(m_plus, str) else m_plus
        lm = parse_law(m_minus) if isinstance(m_minus, str) else m_minus
        if path is None:
            path = replicate_path(dt, horizon, master, replicate)
        dplus = DecorationStore(PLUS, lp, replicate_entropy(master, replicate, STREAM_PLUS))
        dminus = DecorationStore(MINUS, lm, replicate_entropy(master, replicate, STREAM_MINUS))
        return cls(path, dplus, dminus, GraphParams(l))

    @property
    def l(self) -> float:
        return self.g.l

    @property
    def m_plus(self) -> SplitLaw:
        return self.dplus.law

    @property
    def m_minus(self) -> SplitLaw:
        return self.dminus.law

    def with_round(self, round: int) -> "FlowRealization":
        """Same path and ``U`` values with ``eps`` re-drawn (round 0 is the original)."""
        out = FlowRealization(self.path, self.dplus.resampled(round), self.dminus.resampled(round), self.g)
        out._rho, out._tau, out._refl = self._rho, self._tau, self._refl
        return out

    # ------------------------------------------------------------ stopping times
    def rho_at(self, a: float) -> Crossing | None:
        """First time after ``a`` the range of ``W`` reaches ``l`` (cached)."""
        try:
            return self._rho[a]
        except KeyError:
            c = self.path.range_hit(a, self.l)
            self._rho[a] = c
            return c

    def tau_at(self, a: float, theta: float) -> Crossing | None:
        """Exit of an edge point from its edge; ``side`` -1 means vertex 1, +1 means ``e^{il}``."""
        key = (a, theta)
        try:
            return self._tau[key]
        except KeyError:
            bars = exit_barriers(theta, self.l)
            c = None if bars is None else self.path.exit_interval(a, *bars)
            self._tau[key] = c
            return c

    def chain_at(self, a: float, x: float) -> RhoChain:
        """Chain anchors from ``a`` up to the last one ``<= x``, plus the next one if it exists."""
        anchors, sides = [a], [0]
        while True:
            c = self.rho_at(anchors[-1])
            if c is None:
                return RhoChain(tuple(anchors), tuple(sides), False)
            anchors.append(c.index)
            sides.append(c.side)
            if c.index > x:
                return RhoChain(tuple(anchors), tuple(sides), True)

    # ------------------------------------------------------- one interval, scalar
    def _reflected_end(self, a: float, b: float, end: Crossing | None) -> tuple[float, float, float, float]:
        """``(W^+, key^+, W^-, key^-)`` on ``[a, b]``, exact at the chain end (cached)."""
        try:
            return self._refl[(a, b)]
        except KeyError:
            out = self._reflected_uncached(a, b, end)
            self._refl[(a, b)] = out
            return out

    def _reflected_uncached(self, a, b, end):
        if end is not None and b == end.index:
            if end.side == PLUS:
                return self.l, self.path.window_min(a, b)[1], 0.0, b
            return 0.0, b, self.l, self.path.window_max(a, b)[1]
        wb = self.path.at(b)
        mn, kmin = self.path.window_min(a, b)
        mx, kmax = self.path.window_max(a, b)
        return min(max(wb - mn, 0.0), self.l), kmin, min(max(mx - wb, 0.0), self.l), kmax

    def _check_interval(self, a: float, b: float) -> Crossing | None:
        if b < a:
            raise ValueError("t precedes s")
        end = self.rho_at(a)
        if end is not None and b > end.index:
            raise IntervalError(f"t={b!r} is past rho={end.index!r}")
        return end

    def _route(self, a: float, b: float, theta: float):
        """Vertex (0 or 1) governing ``theta`` at ``b``, or the transported angle."""
        v = self.g.vertex(theta)
        if v is not None:
            return v, None
        c = self.tau_at(a, theta)
        if c is not None and c.index <= b:
            return (1 if c.side == 1 else 0), None
        eps = 1 if theta < self.l else -1
        return None, self.g.snap(theta + eps * self.path.increment(a, b))

    def kernel_one_at(self, a: float, b: float, theta: float) -> AtomicMeasure:
        """``K_{a,b}`` at ``theta`` for ``a <= b <= rho_a`` (grid indices)."""
        end = self._check_interval(a, b)
        if b == a:
            return AtomicMeasure.dirac(self.g.snap(theta))
        v, moved = self._route(a, b, theta)
        if v is None:
            return AtomicMeasure.dirac(moved)
        wp, kp, wm, km = self._reflected_end(a, b, end)
        if v == 0:
            if wp == 0.0:
                return AtomicMeasure.dirac(0.0)
            u = self.dplus.u(kp)
            return AtomicMeasure([wp, -wp], [u, 1.0 - u])
        if wm == 0.0:
            return AtomicMeasure.dirac(self.l)
        u = self.dminus.u(km)
        return AtomicMeasure([self.l + wm, self.l - wm], [u, 1.0 - u])

    def map_one_at(self, a: float, b: float, theta: float) -> float:
        """``phi_{a,b}`` at ``theta`` for ``a <= b <= rho_a`` (grid indices)."""
        end = self._check_interval(a, b)
        if b == a:
            return self.g.snap(theta)
        v, moved = self._route(a, b, theta)
        if v is None:
            return moved
        wp, kp, wm, km = self._reflected_end(a, b, end)
        if v == 0:
            if wp == 0.0:
                return 0.0
            return normalize_angle(self.dplus.eps(kp) * wp)
        if wm == 0.0:
            return self.l
        return normalize_angle(self.l + self.dminus.eps(km) * wm)

    # ------------------------------------------------------------ composition
    def _locate(self, a: float, b: float) -> tuple[RhoChain, int, float]:
        if b < a:
            raise ValueError("t precedes s")
        if b > self.path.n:
            raise ValueError("t is past the horizon")
        chain = self.chain_at(a, b)
        for x in chain.anchors:
            if abs(b - x) <= TOL_ANCHOR:
                b = x
        k = chain.interval_of(b)
        return chain, k, b

    def kernel_at(self, a: float, b: float, theta: float) -> AtomicMeasure:
        """``K_{a,b}`` at ``theta`` for any ``a <= b`` within the horizon."""
        chain, k, b = self._locate(a, b)
        mu = AtomicMeasure.dirac(theta)
        anc = chain.anchors
        for i in range(k):
            mu = pushforward(mu, lambda x, i=i: self.kernel_one_at(anc[i], anc[i + 1], x))
        return pushforward(mu, lambda x: self.kernel_one_at(anc[k], b, x))

    def map_at(self, a: float, b: float, theta: float) -> float:
        """``phi_{a,b}`` at ``theta`` for any ``a <= b`` within the horizon."""
        chain, k, b = self._locate(a, b)
        x = normalize_angle(theta)
        anc = chain.anchors
        for i in range(k):
            x = self.map_one_at(anc[i], anc[i + 1], x)
        return self.map_one_at(anc[k], b, x)

    # ---------------------------------------------------------- trajectories
    def _vertex_arrays(self, a: float, js: np.ndarray):
        """Reflected values and extremum keys on ``[a, j]`` for grid ``js`` (all ``> a`` or ``== a``)."""
        v = self.path.values
        j0 = math.floor(a) + 1
        jmax = int(js[-1])
        seq = np.concatenate([[self.path.at(a)], v[j0:jmax + 1]])
        pos = np.where(js == a, 0, js - j0 + 1).astype(int)
        runmin, imin = running_argmin(seq)
        nrunmax, imax = running_argmin(-seq)
        wj = seq[pos]
        wp = np.clip(wj - runmin[pos], 0.0, self.l)
        wm = np.clip(-nrunmax[pos] - wj, 0.0, self.l)

        def loc(i):
            return np.where(i == 0, a, j0 + i - 1.0)

        return wp, loc(imin[pos]), wm, loc(imax[pos]), wj

    def _one_interval_traj(self, a: float, js: np.ndarray, theta: float, want_map: bool):
        """Atoms ``(thetas, weights)`` of shape (len(js), 2), or the map path, on one interval."""
        wp, kp, wm, km, wj = self._vertex_arrays(a, js)
        n = len(js)
        v = self.g.vertex(theta)
        if v is None:
            c = self.tau_at(a, theta)
            t_exit = math.inf if c is None else c.index
            vexit = None if c is None else (1 if c.side == 1 else 0)
            eps = 1 if theta < self.l else -1
            moved = _snap_array(theta + eps * (wj - self.path.at(a)), self.l)
            before = js < t_exit
        else:
            vexit, moved, before = v, np.zeros(n), np.zeros(n, dtype=bool)
        th = np.zeros((n, 2))
        w = np.zeros((n, 2))
        mp = np.zeros(n)
        th[before, 0] = moved[before]
        w[before, 0] = 1.0
        mp[before] = moved[before]
        after = ~before
        if after.any():
            if vexit == 0:
                r, keys, store, base = wp, kp, self.dplus, 0.0
            else:
                r, keys, store, base = wm, km, self.dminus, self.l
            idx = np.flatnonzero(after)
            flat = idx[r[idx] == 0.0]
            th[flat, 0], w[flat, 0], mp[flat] = base, 1.0, base
            split = idx[r[idx] > 0.0]
            if split.size:
                uk, inv = np.unique(keys[split], return_inverse=True)
                draws = [store.get(float(k)) for k in uk]
                u = np.array([d[1] for d in draws])[inv]
                rs = r[split]
                th[split, 0], th[split, 1] = base + rs, base - rs
                w[split, 0], w[split, 1] = u, 1.0 - u
                if want_map:
                    e = np.array([d[0] for d in draws], dtype=float)[inv]
                    mp[split] = base + e * rs
        th = normalize_angle(th)
        mp = normalize_angle(mp)
        return (mp if want_map else (th, w))

    def _traj_plan(self, a: float, j_end: int):
        """Split grid times ``ceil(a)..j_end`` over the chain intervals."""
        chain = self.chain_at(a, j_end)
        anc = chain.anchors
        js_all = np.arange(math.ceil(a), j_end + 1, dtype=float)
        plan = []
        for k in range(len(anc)):
            lo = anc[k]
            hi = anc[k + 1] if k + 1 < len(anc) else math.inf
            sel = js_all[(js_all >= lo) & (js_all < hi)]
            if sel.size:
                plan.append((k, sel))
        return chain, plan

    def kernel_trajectory_at(self, a: float, j_end: int, theta: float,
                             funcs: Sequence[Callable]) -> tuple[np.ndarray, np.ndarray]:
        """Integrals ``K_{a,j} g(theta)`` for each ``g`` in ``funcs`` at grid ``j = ceil(a)..j_end``.

        Returns ``(js, values)`` with ``values`` of shape ``(len(funcs), len(js))``.
        """
        chain, plan = self._traj_plan(a, j_end)
        anc = chain.anchors
        js_out, cols = [], []
        mu, done = AtomicMeasure.dirac(theta), 0
        for k, js in plan:
            while done < k:
                mu = pushforward(mu, lambda x, i=done: self.kernel_one_at(anc[i], anc[i + 1], x))
                done += 1
            acc = np.zeros((len(funcs), len(js)))
            for x, wt in mu:
                th, w = self._one_interval_traj(anc[k], js, x, want_map=False)
                for fi, f in enumerate(funcs):
                    acc[fi] += wt * np.sum(w * f(th), axis=1)
            js_out.append(js)
            cols.append(acc)
        return np.concatenate(js_out), np.concatenate(cols, axis=1)

    def map_trajectory_at(self, a: float, j_end: int, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """``phi_{a,j}(theta)`` at grid ``j = ceil(a)..j_end``."""
        chain, plan = self._traj_plan(a, j_end)
        anc = chain.anchors
        out_j, out_x = [], []
        x, done = normalize_angle(theta), 0
        for k, js in plan:
            while done < k:
                x = self.map_one_at(anc[done], anc[done + 1], x)
                done += 1
            out_j.append(js)
            out_x.append(self._one_interval_traj(anc[k], js, x, want_map=True))
        return np.concatenate(out_j), np.concatenate(out_x)


# ----------------------------------------------------------- time-based API


def _theta_of(z) -> float:
    return z.theta if isinstance(z, CirclePoint) else normalize_angle(float(z))


def kernel_one_interval(real: FlowRealization, s: float, t: float, z) -> AtomicMeasure:
    """``K_{s,t}(z)`` for process times ``s <= t <= rho_s``."""
    p = real.path
    a = p.index_of(s)
    b = p.index_of(t)
    end = real.rho_at(a)
    if end is not None and abs(b - end.index) <= TOL_ANCHOR:
        b = end.index
    return real.kernel_one_at(a, b, _theta_of(z))


def map_one_interval(real: FlowRealization, s: float, t: float, z) -> CirclePoint:
    """``phi_{s,t}(z)`` for process times ``s <= t <= rho_s``."""
    p = real.path
    a = p.index_of(s)
    b = p.index_of(t)
    end = real.rho_at(a)
    if end is not None and abs(b - end.index) <= TOL_ANCHOR:
        b = end.index
    return CirclePoint(real.map_one_at(a, b, _theta_of(z)))


def kernel(real: FlowRealization, s: float, t: float, z) -> AtomicMeasure:
    """``K_{s,t}(z)`` at process times ``0 <= s <= t <= horizon``."""
    p = real.path
    return real.kernel_at(p.index_of(s), p.index_of(t), _theta_of(z))


def flow_map(real: FlowRealization, s: float, t: float, z) -> CirclePoint:
    """``phi_{s,t}(z)`` at process times ``0 <= s <= t <= horizon``."""
    p = real.path
    return CirclePoint(real.map_at(p.index_of(s), p.index_of(t), _theta_of(z)))


def rho_chain(real: FlowRealization, s: float, t: float | None = None) -> RhoChain:
    """Chain anchors from ``s`` (grid indices) up to ``t`` or the horizon."""
    p = real.path
    b = p.n if t is None else p.index_of(t)
    return real.chain_at(p.index_of(s), b)


def sde_residual(real: FlowRealization, s: float, t: float, z, f: Callable, df: Callable,
                 d2f: Callable) -> float:
    """Residual of the integrated equation with left-point Ito sums on the grid.

    ``K_{s,t}f(z) - f(z) - sum_j K_{s,t_j}(eps f')(z) dW_j - 1/2 sum_j K_{s,t_j} f''(z) dt``
    with ``s`` and ``t`` on the grid.
    """
    p = real.path
    a = p.index_of(s)
    b = p.index_of(t)
    if a != int(a) or b != int(b):
        raise ValueError("s and t must be grid times")
    theta = _theta_of(z)
    if b == a:
        return 0.0
    g = real.g

    def drift(th):
        return epsilon(th, g) * df(th)

    _, vals = real.kernel_trajectory_at(a, int(b), theta, [f, drift, d2f])
    kf, kd, k2 = vals
    dw = np.diff(p.values[int(a):int(b) + 1])
    ito = float(np.dot(kd[:-1], dw))
    lebesgue = 0.5 * float(np.sum(k2[:-1])) * p.dt
    return float(kf[-1] - f(theta) - ito - lebesgue)


def coalescing_wrapper(motions: np.ndarray, tol: float = TOL_MERGE) -> np.ndarray:
    """Make ``n`` motions on a common grid coalesce once they meet.

    ``motions`` has shape ``(n, J)`` (angles).  After the first grid time where
    two followed motions agree within ``tol``, both labels follow the lowest
    original index among them.
    """
    x = np.asarray(motions, dtype=float)
    if x.ndim != 2:
        raise ValueError("motions must be a 2-d array")
    n, J = x.shape
    rep = np.arange(n)
    out = np.empty_like(x)
    for j in range(J):
        cur = x[rep, j]
        if n > 1:
            d = circular_distance(cur[:, None], cur[None, :])
            close = (d <= tol) & (rep[:, None] != rep[None, :])
            if close.any():
                for i in range(n):
                    others = np.flatnonzero(close[i])
                    if others.size:
                        target = min(rep[i], rep[others].min())
                        group = np.isin(rep, np.concatenate([[rep[i]], rep[others]]))
                        rep[group] = target
                cur = x[rep, j]
        out[:, j] = cur
    return out


__all__ = [
    "FlowRealization",
    "IntervalError",
    "RhoChain",
    "coalescing_wrapper",
    "flow_map",
    "kernel",
    "kernel_one_interval",
    "map_one_interval",
    "rho_chain",
    "sde_residual",
]
