"""Event detectors and Monte Carlo checks for the flow on the circle graph.

Detectors (collapse, ladder) are pure functions of the driver path.  Each
``check_*`` function runs one statistical or exact check over independent
replicates and returns a :class:`VerificationReport`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .chaos import ChaosConfig, FourierFunction, chaos_terms, ito_isometry_variance, wiener_solution
from .circle import (
    TOL_MERGE,
    TWO_PI,
    AtomicMeasure,
    GraphParams,
    circular_distance,
    measure_distance,
    measure_moments,
    moment_distance,
    pushforward,
    test_weights,
)
from .decorations import PLUS, parse_law
from .flow import FlowRealization, coalescing_wrapper, sde_residual
from .paths import BrownianPath, replicate_path, skorokhod_two_sided


#: Rounding floor for distances between measures built from identical atoms.
FLOOR_D = 1e-12

# ------------------------------------------------------------------ configs


@dataclass(frozen=True)
class CollapseEventConfig:
    """Slack ``delta`` for the drawdown in the event ``A_S`` (``l < pi`` only)."""

    l: float
    delta: float = 0.3

    def __post_init__(self):
        if self.l >= math.pi:
            raise ValueError("the A_S detector needs l < pi")
        if not (0 < self.l - self.delta and self.l + self.delta < math.pi):
            raise ValueError("delta must satisfy 0 < l - delta < l + delta < pi")


@dataclass(frozen=True)
class LadderConfig:
    """Decreasing thresholds ``alpha_1 > alpha_2 > ...`` and the ladder depth."""

    l: float
    alpha: tuple
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        a = np.asarray(self.alpha, dtype=float)
        if len(a) < self.depth:
            raise ValueError("need at least depth thresholds")
        if np.any(a <= 0) or np.any(np.diff(a) >= 0):
            raise ValueError("alpha must be positive and strictly decreasing")
        if len(a) and a[0] >= min(self.l, 2 * (math.pi - self.l)):
            raise ValueError("alpha_1 must be below min(l, 2(pi - l))")

    @classmethod
    def default(cls, l: float, depth: int, alpha1: float | None = None) -> "LadderConfig":
        """``alpha_k = alpha_1 / k`` with ``alpha_1 = 0.9 min(l, 2(pi - l))`` unless given."""
        a1 = 0.9 * min(l, 2 * (math.pi - l)) if alpha1 is None else alpha1
        return cls(l, tuple(a1 / k for k in range(1, max(depth, 1) + 1)), depth)


@dataclass
class VerificationReport:
    """Outcome of one check."""

    check: str
    replicates: int
    passed: bool
    stats: dict = field(default_factory=dict)
    failure_seeds: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.check}"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(f"{float(x):.17g}")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def collapse_probes(l: float) -> list[float]:
    """Eight probe angles spread over both edges and the vertex 1."""
    return ([l / 4, l / 2, 3 * l / 4]
            + [l + k * (TWO_PI - l) / 5 for k in range(1, 5)]
            + [0.0])


def se(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf


# ---------------------------------------------------------------- detectors


def detect_A(path: BrownianPath, S: float, l: float, delta: float) -> bool:
    """Whether ``W_{S,.}`` reaches ``2(pi - l)`` before ``W^-_{S,.}`` reaches ``delta`` (grid indices)."""
    hit = path.level_hit(S, 2 * (math.pi - l))
    if hit is None:
        return False
    dd = path.drawdown_hit(S, delta)
    return dd is None or hit.index < dd.index


@dataclass(frozen=True)
class CollapseEvent:
    """A predicted collapse time (grid index), the vertex angle and whether it fired."""

    index: float
    theta: float
    fired: bool
    window: int


def detect_collapse_sequence(real: FlowRealization, delta: float = 0.3,
                             max_events: int = 1000) -> list[CollapseEvent]:
    """Candidate collapse times on one realization, up to its horizon.

    For ``l = pi`` these are the alternating times ``S_k`` (full collapse onto
    ``-1``) and ``T_k`` (onto ``1``); all of them fire.  For ``l < pi`` there is
    one event per window ``[sigma_k, sigma_{k+1}]``; ``fired`` records ``C_k``.
    """
    path, l = real.path, real.l
    out: list[CollapseEvent] = []
    if l >= math.pi:
        x, k = 0.0, 0
        while len(out) < max_events:
            s = path.drawup_hit(x, math.pi)
            if s is None:
                break
            out.append(CollapseEvent(s.index, math.pi, True, k))
            t = path.drawdown_hit(s.index, math.pi)
            if t is None:
                break
            out.append(CollapseEvent(t.index, 0.0, True, k))
            x, k = t.index, k + 1
        return out
    CollapseEventConfig(l, delta)
    sigma, k = 0.0, 0
    while len(out) < max_events:
        r = real.rho_at(sigma)
        if r is None:
            break
        nxt = path.level_hit(r.index, 2 * (math.pi - l))
        if nxt is None:
            break
        fired = r.side == PLUS and detect_A(path, r.index, l, delta)
        out.append(CollapseEvent(nxt.index, l, fired, k))
        sigma, k = nxt.index, k + 1
    return out


@dataclass(frozen=True)
class LadderResult:
    fired: bool
    depth: int
    support: AtomicMeasure | None
    anchors: tuple
    first_failure: int | None


def ladder_events(real: FlowRealization, cfg: LadderConfig) -> tuple[int, tuple]:
    """Largest ``n <= depth`` with ``C_n`` holding, and the chain anchors used."""
    path, l = real.path, real.l
    anchors = [0.0]
    for i in range(1, cfg.depth + 1):
        r = real.rho_at(anchors[-1])
        if r is None:
            return -(i - 1) - 1, tuple(anchors)  # horizon reached: undecided
        prev = anchors[-1]
        anchors.append(r.index)
        if i == 1:
            ok = r.side == PLUS
        elif i % 2 == 0:
            hi = path.window_max(prev, r.index)[0] - path.at(prev)
            ok = r.side != PLUS and cfg.alpha[i - 1] < hi < cfg.alpha[i - 2]
        else:
            lo = path.window_min(prev, r.index)[0] - path.at(prev)
            ok = r.side == PLUS and -cfg.alpha[i - 2] < lo < -cfg.alpha[i - 1]
        if not ok:
            return i - 1, tuple(anchors)
    return cfg.depth, tuple(anchors)


def ladder_anchor_prediction(real: FlowRealization, anchors: Sequence[float], n: int) -> dict:
    """Predicted first, second (when defined) and last atoms of ``K_{0, rho^n}(1)`` on ``C_n``."""
    l, p = real.l, real.path
    if n == 0:
        return {"first": 0.0, "last": 0.0}
    if n % 2 == 0:
        w = p.at(anchors[n]) - p.at(anchors[n - 1])
        return {"first": 0.0, "second": (2 * l) % TWO_PI, "last": (-l - w) % TWO_PI}
    out = {"first": l, "last": TWO_PI - l}
    if n >= 3:
        out["second"] = 2 * l - (p.at(anchors[n]) - p.at(anchors[n - 1]))
    return out


def _check_laws_for_ladder(real: FlowRealization):
    for law in (real.m_plus, real.m_minus):
        if law.has_endpoint_atoms:
            raise ValueError(f"ladder check needs laws without atoms at 0 or 1, got {law.spec}")


def detect_ladder(real: FlowRealization, cfg: LadderConfig) -> LadderResult:
    """Whether ``C_n`` (``n = cfg.depth``) holds, and the support of ``K_{0, rho^n}(1)``."""
    _check_laws_for_ladder(real)
    reached, anchors = ladder_events(real, cfg)
    fired = reached >= cfg.depth
    support = None
    if fired:
        support = real.kernel_at(0.0, anchors[cfg.depth], 0.0)
    fail = None if fired or reached < 0 else reached + 1
    return LadderResult(fired, cfg.depth, support, anchors, fail)


def ladder_matches(real: FlowRealization, anchors, n: int, support: AtomicMeasure,
                   tol: float = TOL_MERGE) -> tuple[bool, dict]:
    """Card ``n + 1`` and the predicted anchor atoms, in ascending angle order."""
    pred = ladder_anchor_prediction(real, anchors, n)
    th = support.thetas
    info = {"card": len(th), "predicted": pred, "atoms": th.tolist()}
    if len(th) != n + 1:
        return False, info
    ok = circular_distance(th[0], pred["first"]) <= tol
    ok &= circular_distance(th[-1], pred["last"]) <= tol
    if "second" in pred:
        ok &= circular_distance(th[1], pred["second"]) <= tol
    return bool(ok), info


# --------------------------------------------------------- per-replicate checks


def reflected_representation_check(real: FlowRealization, a: int, b: int) -> float:
    """Hausdorff angular mismatch between ``supp K_{a,b}(1)`` and ``{X, 2 pi - X}``.

    ``X`` is the discrete two-sided Skorokhod reflection of ``W_{a,.}`` into
    ``[0, pi]``; ``a`` and ``b`` are grid indices.
    """
    if abs(real.l - math.pi) > 1e-15:
        raise ValueError("the reflected representation needs l = pi")
    x = skorokhod_two_sided(np.diff(real.path.values[a:b + 1]), math.pi)[-1]
    target = np.array([x, TWO_PI - x])
    atoms = real.kernel_at(float(a), float(b), 0.0).thetas
    d1 = max(float(circular_distance(t, target).min()) for t in atoms)
    if real.m_plus.has_endpoint_atoms or real.m_minus.has_endpoint_atoms:
        return d1
    d2 = max(float(circular_distance(atoms, t).min()) for t in target)
    return max(d1, d2)


def filtering_check(real: FlowRealization, a: float, b: float, theta: float, resamples: int,
                    batches: int = 20) -> dict:
    """Average ``delta_{phi_{a,b}(theta)}`` over ``eps`` re-draws and compare with ``K_{a,b}(theta)``.

    Returns the distance ``d``, its batch-means standard error ``se_d`` and a verdict
    ``d <= 3 se_d + 1e-12``.
    """
    target = real.kernel_at(a, b, theta)
    pts = np.array([real.with_round(r).map_at(a, b, theta) for r in range(1, resamples + 1)])
    k = test_weights().size // 2
    ks = np.arange(1, k + 1)
    feats = np.empty((len(pts), 2 * k + 1))
    feats[:, 0] = 1.0
    feats[:, 1::2] = np.cos(np.outer(pts, ks))
    feats[:, 2::2] = np.sin(np.outer(pts, ks))
    mean = feats.mean(0)
    d = moment_distance(mean, measure_moments(target))
    nb = min(batches, len(pts))
    bm = np.array([c.mean(0) for c in np.array_split(feats, nb)])
    se_n = bm.std(0, ddof=1) / math.sqrt(nb) if nb > 1 else np.full(2 * k + 1, np.inf)
    se_d = float(np.sqrt(np.sum(test_weights() * se_n ** 2)))
    # absolute floor: a map that is deterministic given U leaves only rounding noise
    passed = d <= 3 * se_d + FLOOR_D
    return {"distance": d, "se": se_d, "passed": bool(passed), "resamples": len(pts)}


# --------------------------------------------------------------- aggregate checks


def _build(l, m_plus, m_minus, dt, horizon, seed, rep, path=None):
    return FlowRealization.build(l, m_plus, m_minus, dt, horizon, seed, rep, path=path)


def check_mass(l=2 * math.pi / 3, m_plus="uniform", m_minus="beta:2.0", dt=1e-3, horizon=10.0,
               realizations=100, queries=100, seed=0) -> VerificationReport:
    """Every kernel output has mass ``1 +- 1e-12`` and weights in ``[0, 1]``."""
    rng = np.random.default_rng([seed, 101])
    worst, bad, count, fails = 0.0, 0, 0, []
    for rep in range(realizations):
        real = _build(l, m_plus, m_minus, dt, horizon, seed, rep)
        n = real.path.n
        for _ in range(queries):
            a, b = np.sort(rng.uniform(0, n, 2))
            mu = real.kernel_at(float(a), float(b), float(rng.uniform(0, TWO_PI)))
            err = abs(mu.mass - 1.0)
            worst = max(worst, err)
            count += 1
            if err > 1e-12 or np.any(mu.weights < 0) or np.any(mu.weights > 1):
                bad += 1
                fails.append(rep)
    return VerificationReport("mass", count, bad == 0, {"max_mass_error": worst, "violations": bad},
                              sorted(set(fails)))


def check_flow_property(l=2 * math.pi / 3, m_plus="uniform", m_minus="uniform", dt=1e-3,
                        horizon=10.0, replicates=100, seed=0, tol=1e-9) -> VerificationReport:
    """``d(K_{s,u}(z), K_{s,t} K_{t,u}(z)) <= tol`` for random ``s < t < u`` and 8 probes."""
    rng = np.random.default_rng([seed, 102])
    worst, fails = 0.0, []
    for rep in range(replicates):
        real = _build(l, m_plus, m_minus, dt, horizon, seed, rep)
        s, t, u = np.sort(rng.uniform(0, real.path.n, 3)).tolist()
        for z in collapse_probes(l):
            lhs = real.kernel_at(s, u, z)
            rhs = pushforward(real.kernel_at(s, t, z), lambda x: real.kernel_at(t, u, x))
            d = measure_distance(lhs, rhs)
            worst = max(worst, d)
            if d > tol:
                fails.append(rep)
    return VerificationReport("flow-property", replicates, not fails,
                              {"max_distance": worst, "tolerance": tol}, sorted(set(fails)))


def sde_residuals(l, m_plus, m_minus, dt, t, z, replicates, seed, horizon=None) -> np.ndarray:
    """Residuals of the integrated equation for ``f = cos`` on ``[0, t]`` over replicates."""
    out = np.empty(replicates)
    for rep in range(replicates):
        real = _build(l, m_plus, m_minus, dt, t, seed, rep)
        out[rep] = sde_residual(real, 0.0, t, z, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))
    return out


def check_sde_residual(l=math.pi / 2, m_plus="uniform", m_minus="uniform", dts=(1e-3, 1e-4),
                       t=0.5, z=0.0, replicates=1000, seed=0) -> VerificationReport:
    """RMS residual shrinks by a factor in ``[1, 2]`` per halving of ``dt``; mean residual is 0 within 3 SE."""
    rows, ok = [], True
    for dt in dts:
        r = sde_residuals(l, m_plus, m_minus, dt, t, z, replicates, seed)
        rms, mean, s = float(np.sqrt(np.mean(r * r))), float(r.mean()), se(r)
        mean_ok = abs(mean) <= 3 * s
        ok &= mean_ok
        rows.append({"dt": dt, "rms": rms, "mean": mean, "se": s, "mean_ok": bool(mean_ok)})
    factors = []
    for r0, r1 in zip(rows, rows[1:]):
        halvings = math.log2(r0["dt"] / r1["dt"])
        f = (r0["rms"] / r1["rms"]) ** (1 / halvings)
        factors.append(f)
        ok &= 1.0 <= f <= 2.0
    return VerificationReport("sde-residual", replicates, bool(ok), {"rows": rows, "halving_factors": factors})


def censored_ks(samples: np.ndarray, cdf, horizon: float) -> float:
    """KS distance on ``[0, horizon]`` for samples censored at the horizon (``inf`` = censored)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    obs = x[x <= horizon]
    if obs.size == 0:
        return float(cdf(horizon))
    f = cdf(obs)
    hi = np.arange(1, obs.size + 1) / n
    lo = np.arange(0, obs.size) / n
    d = max(np.max(hi - f), np.max(f - lo))
    return float(max(d, abs(obs.size / n - cdf(horizon))))


def hitting_cdf(l: float):
    return lambda t: 2 * (1 - stats.norm.cdf(l / np.sqrt(np.maximum(t, 1e-300))))


def hitting_samples(l=1.0, dt=1e-4, horizon=4.0, replicates=10_000, seed=0) -> np.ndarray:
    out = np.full(replicates, np.inf)
    for rep in range(replicates):
        p = replicate_path(dt, horizon, seed, rep)
        c = p.level_hit(0.0, l)
        if c is not None:
            out[rep] = c.index * dt
    return out


def check_hitting_law(l=1.0, dt=1e-4, horizon=4.0, replicates=10_000, seed=0,
                      tol=0.02) -> VerificationReport:
    """KS distance between first-passage times of ``l`` and ``2(1 - Phi(l / sqrt t))``."""
    x = hitting_samples(l, dt, horizon, replicates, seed)
    d = censored_ks(x, hitting_cdf(l), horizon)
    return VerificationReport("hitting-law", replicates, d <= tol,
                              {"ks": d, "tolerance": tol, "censored": int(np.isinf(x).sum()),
                               "horizon": horizon})


def rho_sides(l=math.pi / 2, dt=1e-4, replicates=10_000, seed=0, horizon=4.0) -> np.ndarray:
    """Side (+1/-1) firing at ``rho_0`` per replicate, extending the horizon when needed."""
    out = np.zeros(replicates, dtype=int)
    for rep in range(replicates):
        h = horizon
        while True:
            c = replicate_path(dt, h, seed, rep).range_hit(0.0, l)
            if c is not None:
                out[rep] = c.side
                break
            h *= 2
    return out


def check_rho_symmetry(l=math.pi / 2, dt=1e-4, replicates=10_000, seed=0,
                       tol=0.015) -> VerificationReport:
    sides = rho_sides(l, dt, replicates, seed)
    p = float(np.mean(sides == PLUS))
    return VerificationReport("rho-symmetry", replicates, abs(p - 0.5) <= tol,
                              {"p_plus": p, "tolerance": tol})


def u_law_samples(l=math.pi / 2, m_plus="uniform", t=0.5, dt=1e-3, n=10_000, seed=0,
                  max_replicates=10**7) -> tuple[np.ndarray, np.ndarray, int]:
    """``(U^+_{0,t}, W_t)`` on replicates with ``t < rho_0``, and the replicate count used."""
    us, ws, rep = [], [], 0
    law = parse_law(m_plus)
    while len(us) < n and rep < max_replicates:
        real = _build(l, law, "uniform", dt, t, seed, rep)
        rep += 1
        p = real.path
        if real.rho_at(0.0) is not None:
            continue
        _, key = p.window_min(0.0, float(p.n))
        us.append(real.dplus.u(key))
        ws.append(p.values[-1])
    return np.array(us), np.array(ws), rep


def check_u_law(l=math.pi / 2, m_plus="uniform", t=0.5, dt=1e-3, n=10_000, seed=0,
                tol=0.02) -> VerificationReport:
    """KS of ``U^+_{0,t}`` given ``t < rho_0`` against ``m+``, and its correlation with ``W_t``."""
    u, w, reps = u_law_samples(l, m_plus, t, dt, n, seed)
    law = parse_law(m_plus)
    ks = float(stats.kstest(u, law.cdf).statistic)
    corr = float(np.corrcoef(u, w)[0, 1])
    bound = 3 / math.sqrt(len(u))
    return VerificationReport("u-law", reps, ks <= tol and abs(corr) <= bound,
                              {"ks": ks, "tolerance": tol, "corr": corr, "corr_bound": bound,
                               "samples": len(u)})


def check_filtering(l=2 * math.pi / 3, laws=("uniform", "beta:2.0"), cases=10, resamples=10_000,
                    dt=1e-3, horizon=3.0, seed=0) -> VerificationReport:
    """Filtering identity at random ``(t, z)`` for each law.

    Each entry of ``laws`` is a spec used on both sides or a ``(m_plus, m_minus)`` pair.
    """
    rng = np.random.default_rng([seed, 107])
    rows, fails = [], []
    for li, law in enumerate(laws):
        for c in range(cases):
            rep = li * cases + c
            lp, lm = (law, law) if isinstance(law, str) else law
            real = _build(l, lp, lm, dt, horizon, seed, rep)
            b = float(rng.uniform(0.1, 1.0) * real.path.n)
            theta = float(rng.uniform(0, TWO_PI))
            res = filtering_check(real, 0.0, b, theta, resamples)
            res.update({"law": f"{lp}/{lm}", "t": b * dt, "theta": theta})
            rows.append(res)
            if not res["passed"]:
                fails.append(rep)
    return VerificationReport("filtering", len(rows), not fails, {"cases": rows}, fails)


def check_collapse(l=math.pi, m_plus="uniform", m_minus="uniform", dt=1e-3, horizon=10.0,
                   replicates=1000, seed=0, delta=0.3, max_events=4) -> VerificationReport:
    """Every detected collapse time maps all 8 probes to the predicted vertex."""
    probes = collapse_probes(l)
    windows, fired, checked, fails, fired_c0, rep_c0 = 0, 0, 0, [], 0, 0
    for rep in range(replicates):
        real = _build(l, m_plus, m_minus, dt, horizon, seed, rep)
        events = detect_collapse_sequence(real, delta, max_events=max_events if l >= math.pi else 10**6)
        if l < math.pi:
            windows += len(events)
            if events:
                rep_c0 += 1
                fired_c0 += int(events[0].fired)
        for ev in events:
            if not ev.fired:
                continue
            fired += 1
            for z in probes:
                mu = real.kernel_at(0.0, ev.index, z)
                checked += 1
                if not mu.is_dirac_at(ev.theta):
                    fails.append(rep)
                    break
    st = {"events": fired, "probe_evaluations": checked, "l": l}
    ok = not fails and fired > 0
    if l < math.pi:
        ci = stats.binomtest(fired, max(windows, 1)).proportion_ci(0.95) if windows else None
        st.update({"windows": windows, "rate_per_window": fired / max(windows, 1),
                   "ci95": [ci.low, ci.high] if ci else None,
                   "c0_fired": fired_c0, "c0_windows": rep_c0})
        ok &= ci is not None and ci.low > 0
    return VerificationReport("collapse", replicates, bool(ok), st, sorted(set(fails)))


def check_ladder(l=2 * math.pi / 3, m_plus="uniform", m_minus="uniform", depth=4, alpha1=None,
                 dt=1e-3, horizon=4.0, replicates=100_000, seed=0) -> VerificationReport:
    """On every fired ``C_n`` (``n <= depth``) the support has ``n + 1`` atoms at the predicted anchors."""
    cfg = LadderConfig.default(l, depth, alpha1)
    counts = np.zeros(depth + 1, dtype=int)
    bad, fails = np.zeros(depth + 1, dtype=int), []
    undecided = 0
    law_p, law_m = parse_law(m_plus), parse_law(m_minus)
    for rep in range(replicates):
        h = horizon
        real = _build(l, law_p, law_m, dt, h, seed, rep)
        _check_laws_for_ladder(real) if rep == 0 else None
        reached, anchors = ladder_events(real, cfg)
        while reached < 0 and h < 512:
            h *= 2
            real = _build(l, law_p, law_m, dt, h, seed, rep)
            reached, anchors = ladder_events(real, cfg)
        if reached < 0:
            undecided += 1
            reached = -reached - 1
        for n in range(reached + 1):
            counts[n] += 1
            if n == 0 and rep > 200:
                continue
            mu = real.kernel_at(0.0, anchors[n], 0.0)
            ok, _ = ladder_matches(real, anchors, n, mu)
            if not ok:
                bad[n] += 1
                fails.append(rep)
    ok = bool(bad.sum() == 0 and np.all(counts[1:] > 0))
    return VerificationReport("ladder", replicates, ok,
                              {"fired": counts.tolist(), "mismatches": bad.tolist(),
                               "p_hat": (counts / replicates).tolist(), "alpha": list(cfg.alpha),
                               "undecided": undecided}, sorted(set(fails))[:50])


def check_reflected(m_plus="uniform", m_minus="uniform", dt=1e-4, horizon=2.0, replicates=1000,
                    seed=0) -> VerificationReport:
    """Support of ``K_{s,t}(1)`` versus the two-sided reflection of ``W_{s,.}`` (``l = pi``)."""
    rng = np.random.default_rng([seed, 110])
    worst, fails = 0.0, []
    tol = 5 * math.sqrt(dt)
    for rep in range(replicates):
        real = _build(math.pi, m_plus, m_minus, dt, horizon, seed, rep)
        a, b = np.sort(rng.integers(0, real.path.n + 1, 2))
        d = reflected_representation_check(real, int(a), int(b))
        worst = max(worst, d)
        if d > tol:
            fails.append(rep)
    return VerificationReport("reflected", replicates, not fails,
                              {"max_mismatch": worst, "tolerance": tol}, fails)


def chaos_table(l=math.pi / 2, z=0.0, t=0.1, dt=1e-5, paths=1000, k_max=64, n_trunc=3, stride=10,
                seed=0, f: FourierFunction | None = None):
    """Per-order L2 errors of the truncated chaos sums against the Wiener solution."""
    f = FourierFunction.cos(1, k_max) if f is None else f
    g = GraphParams(l)
    values = np.empty((paths, int(round(t / dt)) + 1))
    truth = np.empty(paths)
    for rep in range(paths):
        p = replicate_path(dt, t, seed, rep)
        values[rep] = p.values
        real = _build(l, "dirac:0.5", "dirac:0.5", dt, t, seed, rep, path=p)
        truth[rep] = wiener_solution(real, z, t, f)
    J = chaos_terms(f, g, z, t, values, dt, ChaosConfig(n_trunc, stride))
    err2 = (truth[None, :] - np.cumsum(J, axis=0)) ** 2
    mean = err2.mean(1)
    sem = err2.std(1, ddof=1) / math.sqrt(paths)
    return mean, sem, J


def check_chaos(l=math.pi / 2, z=0.0, t=0.1, dt=1e-5, paths=1000, k_max=64, n_trunc=3, stride=10,
                iso_paths=10_000, seed=0, iso_tol=0.05) -> VerificationReport:
    """Strictly decreasing L2 errors over orders ``0..N`` and the Ito-isometry variance of ``J^1``."""
    f = FourierFunction.cos(1, k_max)
    g = GraphParams(l)
    mean, sem, _ = chaos_table(l, z, t, dt, paths, k_max, n_trunc, stride, seed, f)
    decreasing = bool(np.all(np.diff(mean) < 0))
    n = int(round(t / dt))
    rng = np.random.default_rng([seed, 111])
    integrand = None
    j1 = np.empty(iso_paths)
    from .chaos import first_chaos_integrand

    integrand = first_chaos_integrand(f, g, z, t, np.arange(n) * dt)
    batch = 1000
    for i in range(0, iso_paths, batch):
        m = min(batch, iso_paths - i)
        dw = rng.standard_normal((m, n)) * math.sqrt(dt)
        j1[i:i + m] = dw @ integrand
    var_mc = float(j1.var(ddof=1))
    var_iso = ito_isometry_variance(f, g, z, t)
    rel = abs(var_mc / var_iso - 1)
    return VerificationReport("chaos", paths, decreasing and rel <= iso_tol,
                              {"l2_error": mean.tolist(), "se": sem.tolist(), "decreasing": decreasing,
                               "var_j1": var_mc, "var_isometry": var_iso, "rel_error": rel,
                               "iso_paths": iso_paths})


def check_coalescence(l=2 * math.pi / 3, m_plus="uniform", m_minus="uniform", dt=1e-3, horizon=5.0,
                      pairs=100, queries=1000, seed=0) -> VerificationReport:
    """Map trajectories stay together after meeting, and ``phi`` selects an atom of ``K``."""
    rng = np.random.default_rng([seed, 112])
    met, split_after, fails = 0, 0, []
    for rep in range(pairs):
        real = _build(l, m_plus, m_minus, dt, horizon, seed, rep)
        a = float(rng.integers(0, real.path.n // 2))
        x, y = rng.uniform(0, TWO_PI, 2)
        _, px = real.map_trajectory_at(a, real.path.n, float(x))
        _, py = real.map_trajectory_at(a, real.path.n, float(y))
        close = circular_distance(px, py) <= TOL_MERGE
        if close.any():
            met += 1
            first = int(np.argmax(close))
            if not close[first:].all():
                split_after += 1
                fails.append(rep)
    not_in_support = 0
    per = max(1, queries // pairs)
    for q in range(queries):
        rep = pairs + q // per
        if q % per == 0:
            real = _build(l, m_plus, m_minus, dt, horizon, seed, rep)
        a, b = np.sort(rng.uniform(0, real.path.n, 2)).tolist()
        th = float(rng.uniform(0, TWO_PI))
        if not real.kernel_at(a, b, th).contains(real.map_at(a, b, th)):
            not_in_support += 1
            fails.append(rep)
    return VerificationReport("coalescence", pairs + queries, split_after == 0 and not_in_support == 0,
                              {"pairs_met": met, "split_after_meeting": split_after,
                               "selection_violations": not_in_support}, sorted(set(fails)))


__all__ = [
    "CollapseEvent",
    "CollapseEventConfig",
    "LadderConfig",
    "LadderResult",
    "VerificationReport",
    "check_chaos",
    "check_coalescence",
    "check_collapse",
    "check_filtering",
    "check_flow_property",
    "check_hitting_law",
    "check_ladder",
    "check_mass",
    "check_reflected",
    "check_rho_symmetry",
    "check_sde_residual",
    "check_u_law",
    "collapse_probes",
    "coalescing_wrapper",
    "detect_A",
    "detect_collapse_sequence",
    "detect_ladder",
    "filtering_check",
    "reflected_representation_check",
]
