"""The twelve acceptance criteria at their stated scales and tolerances.

Each test prints one ``PASS``/``FAIL`` line (visible even under capture) and
then asserts the verdict.
"""

from __future__ import annotations

import math

import pytest

from circleflow import verify as v

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(number, name, passed, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if passed else 'FAIL'} {name} {detail}".rstrip())
        assert passed, f"criterion {number} ({name}) failed: {detail}"

    return emit


def test_c01_mass(report):
    rep = v.check_mass(realizations=100, queries=100)
    report(1, "mass", rep.passed, f"worst_mass_error={rep.stats['max_mass_error']:.3g}")


def test_c02_flow_property(report):
    rep = v.check_flow_property(replicates=100)
    report(2, "flow-property", rep.passed, f"max_distance={rep.stats['max_distance']:.3g}")


def test_c03_sde_residual(report):
    rep = v.check_sde_residual(replicates=1000)
    rows = rep.stats["rows"]
    detail = " ".join(f"dt={r['dt']:g}:rms={r['rms']:.4g},mean={r['mean']:.3g}+-{r['se']:.2g}" for r in rows)
    detail += f" halving_factor={rep.stats['halving_factors'][0]:.3f}"
    report(3, "sde-residual", rep.passed, detail)


def test_c04_hitting_law(report):
    rep = v.check_hitting_law(l=1.0, dt=1e-4, replicates=10_000)
    report(4, "hitting-law", rep.passed, f"ks={rep.stats['ks']:.4f}")


def test_c05_rho_symmetry(report):
    rep = v.check_rho_symmetry(replicates=10_000)
    report(5, "rho-symmetry", rep.passed, f"p_plus={rep.stats['p_plus']:.4f}")


def test_c06_u_law(report):
    rep = v.check_u_law(n=10_000)
    report(6, "u-law", rep.passed, f"ks={rep.stats['ks']:.4f} corr={rep.stats['corr']:.4f}")


def test_c07_filtering(report):
    rep = v.check_filtering(cases=10, resamples=10_000)
    worst = max(c["distance"] / (3 * c["se"] + v.FLOOR_D) for c in rep.stats["cases"])
    report(7, "filtering", rep.passed, f"cases={rep.replicates} worst_ratio={worst:.3f}")


def test_c08_collapse(report):
    at_pi = v.check_collapse(l=math.pi, replicates=1000)
    below = v.check_collapse(l=2 * math.pi / 3, delta=0.3, horizon=12.0, replicates=20_000)
    detail = (f"l=pi:events={at_pi.stats['events']} "
              f"l=2pi/3:fired={below.stats['events']}/{below.stats['windows']} ci95={below.stats['ci95']}")
    report(8, "collapse", at_pi.passed and below.passed, detail)


def test_c09_ladder(report):
    rep = v.check_ladder(l=2 * math.pi / 3, depth=4, replicates=100_000)
    report(9, "ladder", rep.passed, f"fired={rep.stats['fired']} mismatches={rep.stats['mismatches']}")


def test_c10_reflected(report):
    rep = v.check_reflected(dt=1e-4, replicates=1000)
    report(10, "reflected", rep.passed, f"max_mismatch={rep.stats['max_mismatch']:.3g}")


def test_c11_chaos(report):
    rep = v.check_chaos(l=math.pi / 2, t=0.1, k_max=64, paths=1000)
    err = ", ".join(f"{e:.3g}" for e in rep.stats["l2_error"])
    report(11, "chaos", rep.passed, f"l2=[{err}] var_rel_error={rep.stats['rel_error']:.4f}")


def test_c12_coalescence(report):
    rep = v.check_coalescence(pairs=100, queries=1000)
    report(12, "coalescence", rep.passed,
            f"met={rep.stats['pairs_met']} split={rep.stats['split_after_meeting']} "
            f"off_support={rep.stats['selection_violations']}")
