"""Command-line entry point: ``circleflow simulate | verify | chaos``.

Settings come from an optional JSON file (``--config``) overridden by flags.
Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .decorations import parse_law

SCHEMA = "# circleflow-schema v1"

CHECKS = (
    "flow-property",
    "sde-residual",
    "u-law",
    "filtering",
    "collapse",
    "ladder",
    "reflected",
    "chaos",
    "hitting-law",
    "mass",
    "rho-symmetry",
    "coalescence",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """All settings of one run; ``None`` means "use the check's own default"."""

    l: float = 2 * math.pi / 3
    m_plus: str = "uniform"
    m_minus: str = "uniform"
    dt: float | None = None
    horizon: float | None = None
    replicates: int | None = None
    seed: int = 0
    checks: list = field(default_factory=lambda: ["flow-property"])
    out: str | None = None
    times: list | None = None
    k_max: int = 64
    n_trunc: int = 3
    stride: int = 10
    alpha1: float | None = None
    delta: float = 0.3
    ladder_depth: int = 4

    def validate(self) -> "RunConfig":
        if not (0 < self.l <= math.pi + 1e-15):
            raise ConfigError(f"l: must lie in (0, pi], got {self.l!r}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt: must be positive, got {self.dt!r}")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError(f"horizon: must be positive, got {self.horizon!r}")
        if self.replicates is not None and self.replicates < 1:
            raise ConfigError(f"replicates: must be at least 1, got {self.replicates!r}")
        for name in ("m_plus", "m_minus"):
            try:
                parse_law(getattr(self, name))
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from None
        if isinstance(self.checks, str):
            self.checks = [c for c in self.checks.split(",") if c]
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ConfigError(f"checks: unknown check name(s) {', '.join(unknown)}")
        if not self.checks:
            raise ConfigError("checks: empty check list")
        if "reflected" in self.checks and abs(self.l - math.pi) > 1e-12:
            raise ConfigError("checks: 'reflected' needs l = pi")
        if self.n_trunc < 0 or self.k_max < 1 or self.stride < 1:
            raise ConfigError("chaos settings: need n_trunc >= 0, k_max >= 1, stride >= 1")
        if self.ladder_depth < 0:
            raise ConfigError("ladder_depth: must be nonnegative")
        return self


def load_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
        names = {f.name for f in fields(RunConfig)}
        for key, value in data.items():
            name = key.replace("-", "_")
            if name not in names:
                raise ConfigError(f"config: unknown field {key!r}")
            cfg = replace(cfg, **{name: value})
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def fmt(x) -> str:
    """Floats with 17 significant digits."""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(rows, header, stream):
    stream.write(SCHEMA + "\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])


def _open_out(path: str | None, suffix: str = ""):
    if path is None:
        return None
    p = Path(path)
    if suffix:
        p = p.with_name(p.stem + suffix)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# ------------------------------------------------------------------ commands


def cmd_simulate(cfg: RunConfig, stdout=sys.stdout) -> int:
    """Support of ``K_{0,t}(1)`` at the sample times plus the chain anchors, per replicate."""
    from .flow import FlowRealization

    dt = cfg.dt or 1e-3
    horizon = cfg.horizon or 1.0
    times = cfg.times if cfg.times is not None else [horizon * k / 10 for k in range(11)]
    if any(t < 0 or t > horizon * (1 + 1e-12) for t in times):
        raise ConfigError("times: sample times must lie in [0, horizon]")
    rows, anchors = [], []
    for rep in range(cfg.replicates or 1):
        real = FlowRealization.build(cfg.l, cfg.m_plus, cfg.m_minus, dt, horizon, cfg.seed, rep)
        for t in times:
            mu = real.kernel_at(0.0, real.path.index_of(min(t, real.path.horizon)), 0.0)
            rows.extend((rep, float(t), th, w) for th, w in mu)
        chain = real.chain_at(0.0, real.path.n)
        for k, (a, side) in enumerate(zip(chain.anchors, chain.sides)):
            if a <= real.path.n:
                anchors.append((rep, k, a * dt, side))
    header = ["replicate", "t", "atom_theta", "weight"]
    aheader = ["replicate", "k", "t", "side"]
    out = _open_out(cfg.out)
    if out is None:
        _write_csv(rows, header, stdout)
        _write_csv(anchors, aheader, stdout)
    else:
        with open(out, "w", newline="") as fh:
            _write_csv(rows, header, fh)
        with open(_open_out(cfg.out, "_anchors.csv"), "w", newline="") as fh:
            _write_csv(anchors, aheader, fh)
    return 0


def _run_check(name: str, cfg: RunConfig):
    from . import verify as v

    common = {"seed": cfg.seed}
    laws = {"m_plus": cfg.m_plus, "m_minus": cfg.m_minus}

    def opt(**kw):
        return {k: val for k, val in kw.items() if val is not None}

    n = cfg.replicates
    if name == "flow-property":
        return v.check_flow_property(cfg.l, **laws, **opt(dt=cfg.dt, horizon=cfg.horizon, replicates=n), **common)
    if name == "sde-residual":
        dts = (cfg.dt, cfg.dt / 10) if cfg.dt else (1e-3, 1e-4)
        return v.check_sde_residual(cfg.l, **laws, dts=dts, **opt(replicates=n), **common)
    if name == "u-law":
        return v.check_u_law(cfg.l, cfg.m_plus, **opt(dt=cfg.dt, n=n), **common)
    if name == "filtering":
        return v.check_filtering(cfg.l, laws=((cfg.m_plus, cfg.m_minus),),
                                 **opt(dt=cfg.dt, horizon=cfg.horizon, resamples=n), **common)
    if name == "collapse":
        return v.check_collapse(cfg.l, **laws, delta=cfg.delta,
                                **opt(dt=cfg.dt, horizon=cfg.horizon, replicates=n), **common)
    if name == "ladder":
        return v.check_ladder(cfg.l, **laws, depth=cfg.ladder_depth, alpha1=cfg.alpha1,
                              **opt(dt=cfg.dt, horizon=cfg.horizon, replicates=n), **common)
    if name == "reflected":
        return v.check_reflected(**laws, **opt(dt=cfg.dt, horizon=cfg.horizon, replicates=n), **common)
    if name == "chaos":
        return v.check_chaos(cfg.l, k_max=cfg.k_max, n_trunc=cfg.n_trunc, stride=cfg.stride,
                             **opt(dt=cfg.dt, paths=n), **common)
    if name == "hitting-law":
        return v.check_hitting_law(cfg.l, **opt(dt=cfg.dt, horizon=cfg.horizon, replicates=n), **common)
    if name == "mass":
        return v.check_mass(cfg.l, **laws, **opt(dt=cfg.dt, horizon=cfg.horizon, realizations=n), **common)
    if name == "rho-symmetry":
        return v.check_rho_symmetry(cfg.l, **opt(dt=cfg.dt, replicates=n), **common)
    if name == "coalescence":
        return v.check_coalescence(cfg.l, **laws, **opt(dt=cfg.dt, horizon=cfg.horizon, pairs=n), **common)
    raise ConfigError(f"checks: unknown check {name!r}")


def cmd_verify(cfg: RunConfig, stdout=sys.stdout) -> int:
    """Run the named checks; JSONL detail and a CSV summary."""
    reports = [_run_check(name, cfg) for name in cfg.checks]
    rows = [(r.check, int(r.passed), r.replicates) for r in reports]
    header = ["check", "passed", "replicates"]
    out = _open_out(cfg.out)
    if out is None:
        for r in reports:
            stdout.write(r.to_json() + "\n")
        _write_csv(rows, header, stdout)
    else:
        with open(out, "w", newline="") as fh:
            _write_csv(rows, header, fh)
        with open(_open_out(cfg.out, ".jsonl"), "w") as fh:
            for r in reports:
                fh.write(r.to_json() + "\n")
    for r in reports:
        print(r.line(), file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


def cmd_chaos(cfg: RunConfig, stdout=sys.stdout) -> int:
    """Table of truncation order, L2 error against the Wiener solution and its SE."""
    from .verify import chaos_table

    if not (parse_law(cfg.m_plus).is_wiener and parse_law(cfg.m_minus).is_wiener):
        raise ConfigError("m_plus/m_minus: the chaos expansion represents the Wiener solution, "
                          "which needs m+ = m- = dirac:0.5")
    kw = {"paths": cfg.replicates} if cfg.replicates else {}
    if cfg.dt:
        kw["dt"] = cfg.dt
    t = cfg.horizon or 0.1
    mean, sem, _ = chaos_table(cfg.l, 0.0, t, k_max=cfg.k_max, n_trunc=cfg.n_trunc, stride=cfg.stride,
                               seed=cfg.seed, **kw)
    rows = [(n, float(mean[n]), float(sem[n])) for n in range(len(mean))]
    decreasing = all(b < a for a, b in zip(mean, mean[1:]))
    out = _open_out(cfg.out)
    stream = open(out, "w", newline="") if out else stdout
    try:
        _write_csv(rows, ["order", "l2_error", "se"], stream)
        stream.write(f"# verdict: {'decreasing' if decreasing else 'not-decreasing'}\n")
    finally:
        if out:
            stream.close()
    return 0 if decreasing else 1


# ------------------------------------------------------------------ parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="circleflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify", "chaos"):
        s = sub.add_parser(name)
        s.add_argument("--config")
        s.add_argument("--l", type=float)
        s.add_argument("--m-plus", dest="m_plus")
        s.add_argument("--m-minus", dest="m_minus")
        s.add_argument("--dt", type=float)
        s.add_argument("--horizon", type=float)
        s.add_argument("--replicates", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--checks")
        s.add_argument("--out")
        s.add_argument("--k-max", dest="k_max", type=int)
        s.add_argument("--n-trunc", dest="n_trunc", type=int)
        s.add_argument("--stride", type=int)
        s.add_argument("--alpha1", type=float)
        s.add_argument("--delta", type=float)
        s.add_argument("--ladder-depth", dest="ladder_depth", type=int)
        s.add_argument("--times", type=_floats, help="comma-separated sample times (simulate)")
    return p


def main(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if overrides.get("checks") is not None:
        overrides["checks"] = [c for c in overrides["checks"].split(",") if c]
    try:
        cfg = load_config(args.config, overrides)
        cmd = {"simulate": cmd_simulate, "verify": cmd_verify, "chaos": cmd_chaos}[args.command]
        return cmd(cfg, stdout)
    except ConfigError as exc:
        print(f"circleflow: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
