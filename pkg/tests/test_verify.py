"""Event detectors and the statistical checks at reduced scale."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import stats

from circleflow.circle import TOL_MERGE
from circleflow.flow import FlowRealization
from circleflow.paths import BrownianPath, replicate_path
from circleflow.verify import (
    CollapseEventConfig,
    LadderConfig,
    VerificationReport,
    check_coalescence,
    check_flow_property,
    check_mass,
    check_u_law,
    collapse_probes,
    detect_A,
    detect_collapse_sequence,
    detect_ladder,
    filtering_check,
    ladder_events,
    ladder_matches,
    reflected_representation_check,
)

L = 2 * math.pi / 3


def fixed(values, dt=0.01):
    v = np.asarray(values, dtype=float)
    v.setflags(write=False)
    return BrownianPath(dt, v)


def build(seed, l=L, laws=("uniform", "uniform"), dt=1e-3, horizon=10.0):
    return FlowRealization.build(l, laws[0], laws[1], dt, horizon, seed, 0)


# ------------------------------------------------------------------ configs


def test_collapse_config_constraints():
    CollapseEventConfig(L, 0.3)
    with pytest.raises(ValueError):
        CollapseEventConfig(math.pi, 0.3)
    with pytest.raises(ValueError):
        CollapseEventConfig(L, 1.2)


def test_ladder_config_default():
    cfg = LadderConfig.default(L, 4)
    a1 = 0.9 * min(L, 2 * (math.pi - L))
    assert cfg.alpha == pytest.approx((a1, a1 / 2, a1 / 3, a1 / 4))


@pytest.mark.parametrize("alpha", [(0.5, 0.5), (0.5, -0.1), (3.0, 0.1)])
def test_ladder_config_rejects(alpha):
    with pytest.raises(ValueError):
        LadderConfig(L, alpha, 2)


def test_probes_cover_both_edges():
    p = np.array(collapse_probes(L))
    assert len(p) == 8
    assert np.any((p > 0) & (p < L)) and np.any(p > L) and 0.0 in p


# ---------------------------------------------------------------- detect_A


def test_detect_A_monotone_up():
    l = L
    path = fixed(np.linspace(0, 3, 301))
    assert detect_A(path, 0.0, l, 0.3)


def test_detect_A_immediate_drop():
    path = fixed(np.concatenate([[0.0, 0.1, -0.3], np.linspace(-0.3, 3.0, 100)]))
    assert not detect_A(path, 0.0, L, 0.3)


def test_detect_A_positive_probability():
    hits = sum(detect_A(replicate_path(1e-3, 20.0, 0, r), 0.0, L, 0.3) for r in range(10_000))
    ci = stats.binomtest(hits, 10_000).proportion_ci(0.95)
    assert ci.low > 0


# ------------------------------------------------------------------ collapse


def test_collapse_at_pi_first_two_events():
    found = 0
    for seed in range(20):
        r = build(seed, l=math.pi)
        ev = detect_collapse_sequence(r)
        if len(ev) < 2:
            continue
        found += 1
        assert ev[0].theta == math.pi and ev[1].theta == 0.0
        for e in ev[:2]:
            for z in collapse_probes(math.pi):
                assert r.kernel_at(0.0, e.index, z).is_dirac_at(e.theta)
    assert found > 0


def test_collapse_below_pi_fired_windows():
    # C_k is rare (a few per thousand windows); stop after a handful
    fired, seed = 0, 0
    while fired < 3 and seed < 20_000:
        r = build(seed, horizon=12.0)
        seed += 1
        for e in detect_collapse_sequence(r, 0.3):
            if e.fired:
                fired += 1
                for z in collapse_probes(L):
                    mu = r.kernel_at(0.0, e.index, z)
                    assert len(mu) == 1 and mu.is_dirac_at(L)
    assert fired > 0


def test_collapse_detector_is_pure():
    r = build(3, horizon=12.0)
    assert detect_collapse_sequence(r) == detect_collapse_sequence(r)


# -------------------------------------------------------------------- ladder


def test_ladder_depth_zero():
    r = build(0)
    res = detect_ladder(r, LadderConfig.default(L, 0))
    assert res.fired
    assert res.support.is_dirac_at(0.0)


def test_ladder_depth_one():
    for seed in range(30):
        r = build(seed)
        res = detect_ladder(r, LadderConfig.default(L, 1))
        if res.fired:
            assert len(res.support) == 2
            assert res.support.contains(L, TOL_MERGE) and res.support.contains(2 * math.pi - L, TOL_MERGE)
            return
    pytest.fail("C_1 never fired")


def test_ladder_depth_two():
    cfg = LadderConfig(L, (0.5, 0.25), 2)
    fired = 0
    for seed in range(3000):
        r = build(seed, horizon=8.0)
        n, anchors = ladder_events(r, cfg)
        if n == 2:
            fired += 1
            mu = r.kernel_at(0.0, anchors[2], 0.0)
            ok, info = ladder_matches(r, anchors, 2, mu)
            assert ok, info
    assert fired > 0


def test_ladder_rejects_coalescing_law():
    r = build(0, laws=("coalescing", "uniform"))
    with pytest.raises(ValueError):
        detect_ladder(r, LadderConfig.default(L, 2))


def test_ladder_detector_is_pure():
    r = build(4)
    cfg = LadderConfig.default(L, 3)
    assert ladder_events(r, cfg) == ladder_events(r, cfg)


# ----------------------------------------------------------------- reflected


def test_reflected_empty_interval():
    r = build(0, l=math.pi, dt=1e-4, horizon=1.0)
    assert reflected_representation_check(r, 100, 100) == 0.0
    assert r.kernel_at(100.0, 100.0, 0.0).is_dirac_at(0.0)


def test_reflected_before_range_reaches_pi():
    r = build(1, l=math.pi, dt=1e-4, horizon=2.0)
    c = r.rho_at(0.0)
    b = int((r.path.n if c is None else c.index) * 0.9)
    wp = r.path.reflected(0.0, float(b))[0]
    mu = r.kernel_at(0.0, float(b), 0.0)
    assert mu.contains(wp, 1e-12) and mu.contains(2 * math.pi - wp, 1e-12)
    assert reflected_representation_check(r, 0, b) <= 5 * math.sqrt(1e-4)


def test_reflected_random_windows():
    rng = np.random.default_rng(0)
    for seed in range(50):
        r = build(seed, l=math.pi, dt=1e-4, horizon=2.0)
        a, b = np.sort(rng.integers(0, r.path.n + 1, 2))
        assert reflected_representation_check(r, int(a), int(b)) <= 5 * math.sqrt(1e-4)


def test_reflected_rejects_l_below_pi():
    with pytest.raises(ValueError):
        reflected_representation_check(build(0), 0, 10)


# ------------------------------------------------------------ report plumbing


def test_report_json_roundtrip():
    rep = VerificationReport("x", 3, False, {"v": np.float64(0.1), "a": np.arange(2)}, [5])
    d = json.loads(rep.to_json())
    assert d["failure_seeds"] == [5] and d["stats"]["a"] == [0, 1]
    assert rep.line() == "FAIL x"


def test_flow_property_small_run():
    rep = check_flow_property(replicates=3)
    assert rep.passed and rep.failure_seeds == []


# -------------------------------------------------------------- small checks


def test_check_mass_small():
    assert check_mass(realizations=5, queries=20).passed


def test_check_u_law_small():
    rep = check_u_law(n=1000, tol=0.05)
    assert rep.stats["samples"] == 1000
    assert rep.passed


def test_check_coalescence_small():
    assert check_coalescence(pairs=10, queries=50).passed


def test_filtering_uniform_law():
    r = build(5, horizon=3.0)
    assert filtering_check(r, 0.0, 1000.0, 1.0, 1000)["passed"]
