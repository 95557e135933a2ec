"""Splitting laws and the memoized decorations ``(eps, U)`` attached to running extrema.

Each decoration is drawn from its own generator seeded by the store's entropy
and the extremum location, so the value at a key does not depend on the order
in which keys are queried.  Re-drawing ``eps`` with ``U`` held fixed (for the
filtering identity) only changes a round counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PLUS = 1
MINUS = -1

_SIDE_CODE = {PLUS: 1, MINUS: 2}
_KEY_SCALE = 2.0 ** 24


@dataclass(frozen=True)
class SplitLaw:
    """A probability law on ``[0, 1]`` with mean one half.

    Parameters
    ----------
    kind : str
        One of ``"dirac"``, ``"coalescing"``, ``"uniform"``, ``"beta"``, ``"two-atom"``.
    param : float
        The atom position for ``dirac`` (must be 0.5), the shape ``a`` of
        ``Beta(a, a)``, or ``u`` for ``(delta_u + delta_{1-u}) / 2``.
    """

    kind: str
    param: float = float("nan")

    def __post_init__(self):
        k = self.kind
        if k == "dirac":
            if not math.isclose(self.param, 0.5, rel_tol=0, abs_tol=1e-15):
                raise ValueError(f"dirac:{self.param} has mean {self.param}, not 1/2")
        elif k == "beta":
            if not self.param > 0:
                raise ValueError("beta shape must be positive")
        elif k == "two-atom":
            if not 0.0 <= self.param <= 1.0:
                raise ValueError("two-atom position must lie in [0, 1]")
        elif k not in ("coalescing", "uniform"):
            raise ValueError(f"unknown law {k!r}")

    @property
    def spec(self) -> str:
        if self.kind in ("coalescing", "uniform"):
            return self.kind
        return f"{self.kind}:{self.param!r}"

    @property
    def mean(self) -> float:
        return 0.5

    @property
    def is_wiener(self) -> bool:
        return self.kind == "dirac"

    @property
    def has_endpoint_atoms(self) -> bool:
        """True when ``U`` can equal 0 or 1 with positive probability."""
        if self.kind == "coalescing":
            return True
        if self.kind == "two-atom":
            return self.param in (0.0, 1.0)
        return False

    def sample(self, rng: np.random.Generator) -> float:
        k = self.kind
        if k == "dirac":
            return 0.5
        if k == "coalescing":
            return float(rng.random() < 0.5)
        if k == "uniform":
            return float(rng.random())
        if k == "beta":
            return float(rng.beta(self.param, self.param))
        return self.param if rng.random() < 0.5 else 1.0 - self.param

    def cdf(self, u):
        """CDF of the law (used by KS tests); only for the continuous laws."""
        from scipy import stats

        if self.kind == "uniform":
            return stats.uniform.cdf(u)
        if self.kind == "beta":
            return stats.beta.cdf(u, self.param, self.param)
        raise ValueError(f"{self.spec} has no continuous CDF")


def parse_law(spec: str) -> SplitLaw:
    """Parse ``"dirac:0.5"``, ``"coalescing"``, ``"uniform"``, ``"beta:a"`` or ``"two-atom:u"``.

    Raises ``ValueError`` for unknown names, malformed parameters or a mean other
    than one half.
    """
    spec = spec.strip()
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name in ("coalescing", "uniform"):
        if arg:
            raise ValueError(f"{name} takes no parameter")
        return SplitLaw(name)
    if name in ("dirac", "beta", "two-atom"):
        if not arg:
            raise ValueError(f"{name} needs a parameter")
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"bad parameter in law spec {spec!r}") from None
        return SplitLaw(name, value)
    raise ValueError(f"unknown law spec {spec!r}")


def key_payload(key: float) -> int:
    """Integer form of an extremum location, robust to last-bit noise."""
    return int(round(key * _KEY_SCALE))


@dataclass
class DecorationStore:
    """Lazily drawn decorations of one side (``PLUS`` keyed by minima, ``MINUS`` by maxima).

    Attributes
    ----------
    side : int
        ``PLUS`` or ``MINUS``.
    law : SplitLaw
        Law of ``U``.
    entropy : tuple of int
        Seed material; decorations at a key use ``entropy + (side, key)``.
    round : int
        Resampling round for ``eps``; round 0 is the original draw.
    """

    side: int
    law: SplitLaw
    entropy: tuple
    round: int = 0
    _u: dict = field(default_factory=dict, repr=False)
    _eps: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.side not in (PLUS, MINUS):
            raise ValueError("side must be PLUS or MINUS")
        self.entropy = tuple(int(e) for e in self.entropy)

    def _seed(self, payload: int, *extra: int) -> list[int]:
        return [*self.entropy, _SIDE_CODE[self.side], payload, *extra]

    def get(self, key: float) -> tuple[int, float]:
        """``(eps, U)`` at ``key``, drawn on first use and cached afterwards."""
        p = key_payload(key)
        u = self._u.get(p)
        if u is None:
            u = self.law.sample(np.random.default_rng(self._seed(p)))
            self._u[p] = u
        eps = self._eps.get(p)
        if eps is None:
            v = np.random.default_rng(self._seed(p, self.round)).random()
            eps = 1 if v < u else -1
            self._eps[p] = eps
        return eps, u

    def u(self, key: float) -> float:
        return self.get(key)[1]

    def eps(self, key: float) -> int:
        return self.get(key)[0]

    def __len__(self):
        return len(self._u)

    def keys(self):
        return [p / _KEY_SCALE for p in self._u]

    def resampled(self, round: int) -> "DecorationStore":
        """Copy sharing every ``U`` with ``eps`` re-drawn independently as Bernoulli(``U``)."""
        if round == self.round:
            return self
        out = DecorationStore(self.side, self.law, self.entropy, round)
        out._u = self._u  # shared on purpose: U is fixed across rounds
        return out


def resample_epsilons(store: DecorationStore, round: int | None = None) -> DecorationStore:
    """Return a copy of ``store`` with ``U`` kept and ``eps`` freshly drawn.

    Successive calls without ``round`` advance the round counter by one.
    """
    return store.resampled(store.round + 1 if round is None else round)


def extremum_key(path, s: float, t: float, side: int) -> float:
    """Location of the window min (``PLUS``) or max (``MINUS``) of ``W`` over ``[s, t]``.

    ``s`` and ``t`` are fractional grid indices; ties go to the earliest location.
    """
    if side == PLUS:
        return path.window_min(s, t)[1]
    return path.window_max(s, t)[1]


def get_decoration(store: DecorationStore, key: float) -> tuple[int, float]:
    return store.get(key)
