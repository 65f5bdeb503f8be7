"""Plain-text configuration parsing and CSV artifact files.

Configs are one ``key = value`` per line with ``#`` comments.  Parsing
collects every problem it can find (with line numbers) before failing, so a
bad file is fixed in one round.  All output files are CSV with 17
significant digits, enough to round-trip a double exactly, which is what
makes snapshot restart and the bitwise-determinism tests possible.

A snapshot is a pair of files: the named path holds grid values on the
physical half of the grid for plotting, and a ``*_coeffs`` sidecar holds
the full coefficient matrix, which is the authoritative copy that
``read_snapshot`` restores.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import CoeffField, DiskGrid, synthesize
from .dynamics import EnergyTrace, NOParams, OKParams

__all__ = [
    "ConfigError",
    "SimulationConfig",
    "parse_config",
    "format_config",
    "write_snapshot",
    "read_snapshot",
    "coeff_sidecar_path",
    "write_trace",
    "read_trace",
    "write_report",
    "read_report",
    "resolve_threads",
    "thread_limit",
    "THREADS_ENV",
]

THREADS_ENV = "DISKBLOCK_THREADS"


class ConfigError(ValueError):
    """All the problems found in one config, one message per problem."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass(frozen=True)
class SimulationConfig:
    """A fully validated run description.

    ``params`` is the model's parameter set, already range-checked, so a
    config that parses can be run without further validation.  The study
    fields (taus, benchmark_tau, T) are only consulted by the convergence
    command; norm picks the error norm there.
    """

    model: str
    n_r: int
    n_theta: int
    params: object
    initial: str
    seed: int
    ratio: int
    snapshot_times: tuple
    out_dir: str
    norm: str
    threads: int
    taus: tuple
    benchmark_tau: float
    T: float


def _parse_float(s):
    return float(s)


def _parse_int(s):
    return int(s, 10)


def _parse_float_list(s):
    parts = [p.strip() for p in s.split(",")]
    if parts == [""]:
        return ()
    return tuple(float(p) for p in parts)


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _open01(x):
    return 0.0 < x < 1.0


# key -> (parser, check, constraint text, models it applies to)
_SCHEMA = {
    "model": (str, lambda v: v in ("ok", "no"), "must be 'ok' or 'no'", "both"),
    "n_r": (_parse_int, lambda v: v > 0 and v % 2 == 1, "must be a positive odd integer", "both"),
    "n_theta": (_parse_int, lambda v: v > 0 and v % 2 == 0, "must be a positive even integer", "both"),
    "epsilon": (_parse_float, _positive, "must be > 0", "both"),
    "tau": (_parse_float, _positive, "must be > 0", "both"),
    "T_final": (_parse_float, _positive, "must be > 0", "both"),
    "stop_tol": (_parse_float, _positive, "must be > 0", "both"),
    "startup": (str, lambda v: v in ("bdf1", "ghost"), "must be 'bdf1' or 'ghost'", "both"),
    "gamma": (_parse_float, _nonneg, "must be >= 0", "ok"),
    "omega": (_parse_float, _open01, "must lie in (0, 1)", "ok"),
    "kappa": (_parse_float, _nonneg, "must be >= 0", "ok"),
    "beta": (_parse_float, _nonneg, "must be >= 0", "ok"),
    "M": (_parse_float, _positive, "must be > 0", "ok"),
    "gamma11": (_parse_float, _nonneg, "must be >= 0", "no"),
    "gamma12": (_parse_float, _nonneg, "must be >= 0", "no"),
    "gamma21": (_parse_float, _nonneg, "must be >= 0", "no"),
    "gamma22": (_parse_float, _nonneg, "must be >= 0", "no"),
    "omega1": (_parse_float, _open01, "must lie in (0, 1)", "no"),
    "omega2": (_parse_float, _open01, "must lie in (0, 1)", "no"),
    "kappa1": (_parse_float, _nonneg, "must be >= 0", "no"),
    "kappa2": (_parse_float, _nonneg, "must be >= 0", "no"),
    "beta1": (_parse_float, _nonneg, "must be >= 0", "no"),
    "beta2": (_parse_float, _nonneg, "must be >= 0", "no"),
    "M1": (_parse_float, _positive, "must be > 0", "no"),
    "M2": (_parse_float, _positive, "must be > 0", "no"),
    "initial": (str, lambda v: True, "", "both"),
    "seed": (_parse_int, _nonneg, "must be >= 0", "both"),
    "ratio": (_parse_int, _positive, "must be > 0", "both"),
    "snapshot_times": (_parse_float_list, lambda v: all(t >= 0 for t in v), "entries must be >= 0", "both"),
    "out_dir": (str, lambda v: True, "", "both"),
    "norm": (str, lambda v: v in ("linf", "l2"), "must be 'linf' or 'l2'", "both"),
    "threads": (_parse_int, _nonneg, "must be >= 0", "both"),
    "taus": (_parse_float_list, lambda v: all(t > 0 for t in v), "entries must be > 0", "both"),
    "benchmark_tau": (_parse_float, _positive, "must be > 0", "both"),
    "T": (_parse_float, _positive, "must be > 0", "both"),
}

_REQUIRED = {
    "ok": ("epsilon", "tau", "gamma", "omega", "M"),
    "no": ("epsilon", "tau", "gamma11", "gamma22", "omega1", "omega2", "M1", "M2"),
}

_INITIALS = {
    "ok": ("disk", "random_blocks", "ring_nuclei"),
    "no": ("two_disks", "semi_random_circles"),
}

_DEFAULTS = {
    "n_r": 129,
    "n_theta": 128,
    "T_final": 1.0,
    "stop_tol": 1e-5,
    "startup": "bdf1",
    "kappa": 0.0,
    "beta": 0.0,
    "gamma12": 0.0,
    "gamma21": 0.0,
    "kappa1": 0.0,
    "kappa2": 0.0,
    "beta1": 0.0,
    "beta2": 0.0,
    "seed": 0,
    "ratio": 32,
    "snapshot_times": (),
    "out_dir": ".",
    "norm": "linf",
    "threads": 0,
    "taus": (),
    "benchmark_tau": 0.0,
    "T": 0.01,
}


def _by_line(problems):
    def key(pair):
        idx, msg = pair
        if msg.startswith("line "):
            return (int(msg[5:].split(":", 1)[0]), idx)
        return (float("inf"), idx)

    return [msg for _, msg in sorted(enumerate(problems), key=key)]


def parse_config(text: str) -> SimulationConfig:
    """Parse and validate ``key = value`` text; raise ConfigError listing
    every violation found, each tagged with its line number where one
    applies."""
    problems = []
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not key:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        if key in entries:
            problems.append(f"line {lineno}: duplicate key: {key}")
            continue
        entries[key] = (val, lineno)

    for key, (_, lineno) in entries.items():
        if key not in _SCHEMA:
            problems.append(f"line {lineno}: unknown key: {key}")

    if "model" not in entries:
        problems.append("missing required key: model")
        raise ConfigError(problems)
    model_raw, model_line = entries["model"]
    if model_raw not in ("ok", "no"):
        problems.append(f"line {model_line}: model must be 'ok' or 'no'")
        raise ConfigError(problems)
    model = model_raw

    values = {"model": model}
    for key, (raw, lineno) in entries.items():
        spec = _SCHEMA.get(key)
        if spec is None or key == "model":
            continue
        parser, check, constraint, scope = spec
        if scope != "both" and scope != model:
            problems.append(f"line {lineno}: key {key} does not apply to model = {model}")
            continue
        try:
            v = parser(raw)
        except ValueError:
            kind = "an integer" if parser is _parse_int else "a number"
            if parser is _parse_float_list:
                kind = "a comma-separated list of numbers"
            problems.append(f"line {lineno}: {key} expects {kind}, got '{raw}'")
            continue
        if not check(v):
            problems.append(f"line {lineno}: {key} {constraint}")
            continue
        values[key] = v

    for key in _REQUIRED[model]:
        if key not in entries:
            problems.append(f"missing required key: {key}")

    def get(key):
        return values.get(key, _DEFAULTS.get(key))

    initial = values.get("initial", _INITIALS[model][0])
    if "initial" in values and initial not in _INITIALS[model]:
        allowed = " or ".join(repr(x) for x in _INITIALS[model])
        problems.append(
            f"line {entries['initial'][1]}: initial must be {allowed} for model = {model}"
        )

    snaps = get("snapshot_times")
    if list(snaps) != sorted(snaps):
        problems.append(
            f"line {entries['snapshot_times'][1]}: snapshot_times must be nondecreasing"
        )
    taus = get("taus")
    if list(taus) != sorted(taus, reverse=True) or len(set(taus)) != len(taus):
        problems.append(f"line {entries['taus'][1]}: taus must be strictly decreasing")
    bench = get("benchmark_tau")
    if taus and bench > 0 and bench > min(taus):
        problems.append("benchmark_tau must not exceed the smallest entry of taus")

    if "omega1" in values and "omega2" in values:
        if not values["omega1"] + values["omega2"] < 1.0:
            problems.append("omega1 + omega2 must be < 1")

    if problems:
        raise ConfigError(_by_line(problems))

    try:
        if model == "ok":
            params = OKParams(
                epsilon=get("epsilon"), gamma=get("gamma"), omega=get("omega"),
                tau=get("tau"), M=get("M"), kappa=get("kappa"), beta=get("beta"),
                T_final=get("T_final"), stop_tol=get("stop_tol"),
                startup=get("startup"),
            )
        else:
            params = NOParams(
                epsilon=get("epsilon"),
                gamma=((get("gamma11"), get("gamma12")),
                       (get("gamma21"), get("gamma22"))),
                omega1=get("omega1"), omega2=get("omega2"), tau=get("tau"),
                M1=get("M1"), M2=get("M2"), kappa1=get("kappa1"),
                kappa2=get("kappa2"), beta1=get("beta1"), beta2=get("beta2"),
                T_final=get("T_final"), stop_tol=get("stop_tol"),
                startup=get("startup"),
            )
    except ValueError as e:
        raise ConfigError(str(e).split("; ")) from None

    return SimulationConfig(
        model=model, n_r=get("n_r"), n_theta=get("n_theta"), params=params,
        initial=initial, seed=get("seed"), ratio=get("ratio"),
        snapshot_times=tuple(snaps), out_dir=get("out_dir"), norm=get("norm"),
        threads=get("threads"), taus=tuple(taus), benchmark_tau=bench, T=get("T"),
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_config(cfg: SimulationConfig) -> str:
    """Canonical text for a config; parse_config(format_config(c)) == c."""
    p = cfg.params
    lines = [
        f"model = {cfg.model}",
        f"n_r = {cfg.n_r}",
        f"n_theta = {cfg.n_theta}",
        f"epsilon = {_fmt(p.epsilon)}",
        f"tau = {_fmt(p.tau)}",
        f"T_final = {_fmt(p.T_final)}",
        f"stop_tol = {_fmt(p.stop_tol)}",
        f"startup = {p.startup}",
    ]
    if cfg.model == "ok":
        lines += [
            f"gamma = {_fmt(p.gamma)}",
            f"omega = {_fmt(p.omega)}",
            f"kappa = {_fmt(p.kappa)}",
            f"beta = {_fmt(p.beta)}",
            f"M = {_fmt(p.M)}",
        ]
    else:
        lines += [
            f"gamma11 = {_fmt(p.gamma_at(1, 1))}",
            f"gamma12 = {_fmt(p.gamma_at(1, 2))}",
            f"gamma21 = {_fmt(p.gamma_at(2, 1))}",
            f"gamma22 = {_fmt(p.gamma_at(2, 2))}",
            f"omega1 = {_fmt(p.omega1)}",
            f"omega2 = {_fmt(p.omega2)}",
            f"kappa1 = {_fmt(p.kappa1)}",
            f"kappa2 = {_fmt(p.kappa2)}",
            f"beta1 = {_fmt(p.beta1)}",
            f"beta2 = {_fmt(p.beta2)}",
            f"M1 = {_fmt(p.M1)}",
            f"M2 = {_fmt(p.M2)}",
        ]
    lines += [
        f"initial = {cfg.initial}",
        f"seed = {cfg.seed}",
        f"ratio = {cfg.ratio}",
        f"out_dir = {cfg.out_dir}",
        f"norm = {cfg.norm}",
        f"threads = {cfg.threads}",
        f"T = {_fmt(cfg.T)}",
    ]
    if cfg.snapshot_times:
        lines.append("snapshot_times = " + ", ".join(_fmt(t) for t in cfg.snapshot_times))
    if cfg.taus:
        lines.append("taus = " + ", ".join(_fmt(t) for t in cfg.taus))
    if cfg.benchmark_tau > 0:
        lines.append(f"benchmark_tau = {_fmt(cfg.benchmark_tau)}")
    return "\n".join(lines) + "\n"


def coeff_sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_coeffs" + p.suffix)


def write_snapshot(field: CoeffField, path) -> None:
    """Write grid values (physical half) and a coefficient sidecar.

    Value rows run over radial nodes outermost (descending r from 1), then
    angular nodes; the sidecar stores the full (n_r + 1) x n_theta complex
    coefficient matrix as one row per (k, l).
    """
    g = field.grid
    n_half = (g.n_r + 1) // 2
    vals = synthesize(field).values
    path = Path(path)
    with open(path, "w", newline="\n") as f:
        f.write("r,theta,value\n")
        for i in range(n_half):
            r = g.r[i]
            for j in range(g.n_theta):
                f.write(f"{_fmt(r)},{_fmt(g.theta[j])},{_fmt(vals[i, j])}\n")
    with open(coeff_sidecar_path(path), "w", newline="\n") as f:
        f.write("k,l,re,im\n")
        c = field.coeffs
        for k in range(g.n_r + 1):
            for j in range(g.n_theta):
                f.write(
                    f"{k},{g.ells[j]},{_fmt(c[k, j].real)},{_fmt(c[k, j].imag)}\n"
                )


def read_snapshot(path, grid: DiskGrid = None) -> CoeffField:
    """Rebuild the coefficient field from a snapshot's sidecar file."""
    rows = []
    with open(coeff_sidecar_path(path)) as f:
        header = f.readline().strip()
        if header != "k,l,re,im":
            raise ValueError(f"{path}: not a snapshot sidecar (header {header!r})")
        for line in f:
            k, l, re, im = line.split(",")
            rows.append((int(k), int(l), float(re), float(im)))
    n_r = max(k for k, _, _, _ in rows)
    n_theta = len({l for _, l, _, _ in rows})
    if grid is None:
        grid = DiskGrid(n_r, n_theta)
    elif (grid.n_r, grid.n_theta) != (n_r, n_theta):
        raise ValueError(
            f"snapshot is {n_r} x {n_theta}, grid is {grid.n_r} x {grid.n_theta}"
        )
    coeffs = np.zeros((n_r + 1, n_theta), dtype=complex)
    for k, l, re, im in rows:
        j = l if l >= 0 else l + n_theta
        coeffs[k, j] = complex(re, im)
    return CoeffField(grid, coeffs)


def write_trace(trace: EnergyTrace, path) -> None:
    with open(Path(path), "w", newline="\n") as f:
        f.write("step,time,E_raw,E_modified,volume\n")
        for k in range(len(trace)):
            f.write(
                f"{trace.steps[k]},{_fmt(trace.times[k])},{_fmt(trace.e_raw[k])},"
                f"{_fmt(trace.e_modified[k])},{_fmt(trace.volume[k])}\n"
            )


def read_trace(path) -> EnergyTrace:
    trace = EnergyTrace()
    with open(Path(path)) as f:
        header = f.readline().strip()
        if header != "step,time,E_raw,E_modified,volume":
            raise ValueError(f"{path}: not a trace file (header {header!r})")
        for line in f:
            step, t, e, m, v = line.split(",")
            trace.append(int(step), float(t), float(e), float(m), float(v))
    return trace


def write_report(report, path) -> None:
    """Table rows tau,error,rate plus a final benchmark row (error 0)."""
    with open(Path(path), "w", newline="\n") as f:
        f.write(f"# model = {report.model}\n")
        f.write(f"# norm = {report.norm_kind}\n")
        f.write(f"# epsilon = {_fmt(report.epsilon)}\n")
        f.write(f"# epsilon_multiplier = {_fmt(report.epsilon_multiplier)}\n")
        f.write("tau,error,rate\n")
        for tau, err, rate in report.rows:
            r = "" if rate is None else _fmt(rate)
            f.write(f"{_fmt(tau)},{_fmt(err)},{r}\n")
        f.write(f"{_fmt(report.benchmark_tau)},{_fmt(0.0)},\n")


def read_report(path):
    """Rows of (tau, error, rate-or-None), benchmark row included."""
    rows = []
    with open(Path(path)) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or line == "tau,error,rate":
                continue
            tau, err, rate = line.split(",")
            rows.append((float(tau), float(err), float(rate) if rate else None))
    return rows


def resolve_threads(config_threads: int) -> int:
    """Config value unless the environment overrides it; 0 means default."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return config_threads
    try:
        v = int(raw, 10)
    except ValueError:
        raise ConfigError([f"{THREADS_ENV} expects an integer, got '{raw}'"]) from None
    if v < 0:
        raise ConfigError([f"{THREADS_ENV} must be >= 0, got {v}"])
    return v


@contextmanager
def thread_limit(n: int):
    """Cap BLAS/LAPACK pools at n threads for the duration; n = 0 is a no-op."""
    if n <= 0:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield
