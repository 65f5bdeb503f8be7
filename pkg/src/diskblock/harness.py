"""Initial data, convergence studies, and coarsening-run drivers.

Everything here is deterministic given the seed.  Initial indicator fields
are sampled sharply at the nodes; the steppers mollify them within a few
steps, and sharp sampling keeps the constructions independently checkable
against their geometric definitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fields import (
    CoeffField,
    ValueField,
    DiskGrid,
    analyze,
    synthesize,
    dfs_extend,
    disk_integral,
    area_l2_norm,
    enforce_parity,
)
from .solver import DiskSolver, SolverError
from .potentials import DoubleWell, DEFAULT_WELL
from .dynamics import (
    OKParams,
    NOParams,
    OKState,
    NOState,
    EnergyTrace,
    bdf2_step_ok,
    bdf2_step_no,
    ok_energy,
    no_energy,
    ok_modified_energy,
    no_modified_energy,
    stopping_check,
)

__all__ = [
    "ConvergenceReport",
    "RunArtifacts",
    "initial_disk_ok",
    "initial_two_disks_no",
    "initial_random_blocks",
    "initial_semi_random_circles",
    "initial_ring_nuclei",
    "convergence_study",
    "run_coarsening",
    "bubble_count",
]


@dataclass
class ConvergenceReport:
    """Rows of (tau, error, rate); the first row's rate is None.

    epsilon_multiplier records the interface width in angular-spacing
    units (epsilon / h with h = 2 pi / n_theta), the way convergence
    tables are usually labeled.
    """

    rows: list
    benchmark_tau: float
    norm_kind: str
    epsilon: float
    epsilon_multiplier: float
    model: str

    @property
    def rates(self):
        return [r for (_, _, r) in self.rows if r is not None]


@dataclass
class RunArtifacts:
    """Everything a coarsening run leaves behind."""

    trace: EnergyTrace
    snapshot_times: list
    snapshots: list
    stop_reason: str
    final_state: object
    bubbles: object = None

    def __post_init__(self):
        times = [t for (t, _) in self.snapshots]
        if times != sorted(times):
            raise ValueError("snapshots must be sorted by time")


def _indicator(grid: DiskGrid, cx: float, cy: float, radius: float,
               smoothing: float = 0.0) -> CoeffField:
    if radius <= 0.0:
        return CoeffField.constant(grid, 0.0)

    def f(r, t):
        x = r * np.cos(t)
        y = r * np.sin(t)
        d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        if smoothing > 0.0:
            return 0.5 * (1.0 - np.tanh((d - radius) / smoothing))
        return np.where(d < radius, 1.0, 0.0)

    return enforce_parity(analyze(dfs_extend(grid, f)))


def initial_disk_ok(grid: DiskGrid, omega: float, smoothing: float = 0.0) -> CoeffField:
    """Indicator of a disk of radius sqrt(omega) + 0.1 centered at (0, 0.2).

    The jump is sampled sharply by default; smoothing > 0 replaces it with
    a tanh profile of that width.
    """
    return _indicator(grid, 0.0, 0.2, np.sqrt(omega) + 0.1, smoothing)


def initial_two_disks_no(grid: DiskGrid, omega1: float, omega2: float,
                         smoothing: float = 0.0):
    """Two disjoint indicator disks, radii sqrt(omega_i) + 0.05."""
    u1 = _indicator(grid, 0.4, -0.3, np.sqrt(omega1) + 0.05, smoothing)
    u2 = _indicator(grid, -0.4, 0.3, np.sqrt(omega2) + 0.05, smoothing)
    return u1, u2


def initial_random_blocks(grid: DiskGrid, ratio: int = 32, seed: int = 0) -> CoeffField:
    """Uniform random values, constant over coarse index blocks.

    The physical half grid minus its boundary row is tiled by blocks of
    ratio radial nodes by ratio/4 angular nodes; the boundary ring gets its
    own coarser strip of ratio angular nodes so the outermost values do not
    slice bubbles at the rim into angular shards.
    """
    n_half = (grid.n_r + 1) // 2
    if ratio % 4 != 0:
        raise ValueError("ratio must be a multiple of 4")
    if (n_half - 1) % ratio or grid.n_theta % (ratio // 4) or grid.n_theta % ratio:
        raise ValueError(
            f"grid ({grid.n_r}, {grid.n_theta}) is not divisible into "
            f"{ratio} x {ratio // 4} blocks plus a {ratio}-wide ring strip"
        )
    rng = np.random.default_rng(seed)
    interior = rng.uniform(size=((n_half - 1) // ratio, grid.n_theta // (ratio // 4)))
    ring = rng.uniform(size=grid.n_theta // ratio)
    half = np.empty((n_half, grid.n_theta))
    half[0] = np.repeat(ring, ratio)
    half[1:] = np.repeat(np.repeat(interior, ratio, axis=0), ratio // 4, axis=1)
    return enforce_parity(analyze(dfs_extend(grid, half)))


def initial_semi_random_circles(grid: DiskGrid, count_range=(6, 14), seed: int = 0,
                                smoothing: float = 0.0):
    """Unions of random circles assigned alternately to the two species.

    Circles stay inside r < 0.9 and may overlap; where species overlap, the
    first species wins, so the two indicators never exceed one combined.
    """
    rng = np.random.default_rng(seed)
    count = int(rng.integers(count_range[0], count_range[1] + 1))
    circles = []
    for k in range(count):
        radius = rng.uniform(0.08, 0.18)
        dist = rng.uniform(0.0, 0.9 - radius)
        ang = rng.uniform(0.0, 2.0 * np.pi)
        circles.append((dist * np.cos(ang), dist * np.sin(ang), radius, k % 2))

    n_half = (grid.n_r + 1) // 2
    rr = grid.r[:n_half][:, None]
    tt = grid.theta[None, :]
    x = rr * np.cos(tt)
    y = rr * np.sin(tt)
    m1 = np.zeros((n_half, grid.n_theta))
    m2 = np.zeros_like(m1)
    for cx, cy, rad, species in circles:
        d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        if smoothing > 0.0:
            hit = 0.5 * (1.0 - np.tanh((d - rad) / smoothing))
        else:
            hit = np.where(d < rad, 1.0, 0.0)
        if species == 0:
            m1 = np.maximum(m1, hit)
        else:
            m2 = np.maximum(m2, hit)
    m2 = np.minimum(m2, 1.0 - m1)
    u1 = enforce_parity(analyze(dfs_extend(grid, m1)))
    u2 = enforce_parity(analyze(dfs_extend(grid, m2)))
    return u1, u2


def initial_ring_nuclei(grid: DiskGrid, omega: float, count_outer: int = 9,
                        count_inner: int = 4, radius_outer: float = 0.66,
                        radius_inner: float = 0.3, jitter: float = 0.03,
                        seed: int = 0) -> CoeffField:
    """Volume-matched bubble nuclei on two jittered rings.

    Total indicator area is close to omega * pi (each nucleus radius is
    sqrt(omega / count) times a +/- 12 percent jitter), so the volume
    penalty exerts no net drag and the nuclei can relax into a bubble
    assembly instead of being crushed toward the mean.  Random-value
    initials need an interface too wide for a 128-mode grid to do this;
    see the coarsening demos.
    """
    rng = np.random.default_rng(seed)
    centers = []
    for k in range(count_outer):
        a = 2.0 * np.pi * k / count_outer + rng.uniform(-0.1, 0.1)
        d = radius_outer + rng.uniform(-jitter, jitter)
        centers.append((d * np.cos(a), d * np.sin(a)))
    for k in range(count_inner):
        a = 2.0 * np.pi * (k + 0.5) / count_inner + rng.uniform(-0.1, 0.1)
        d = radius_inner + rng.uniform(-jitter, jitter)
        centers.append((d * np.cos(a), d * np.sin(a)))
    count = count_outer + count_inner
    base = np.sqrt(omega / count)
    radii = base * (1.0 + rng.uniform(-0.12, 0.12, size=count))

    n_half = (grid.n_r + 1) // 2
    rr = grid.r[:n_half][:, None]
    tt = grid.theta[None, :]
    x = rr * np.cos(tt)
    y = rr * np.sin(tt)
    m = np.zeros((n_half, grid.n_theta))
    for (cx, cy), rad in zip(centers, radii):
        m = np.maximum(m, np.where(np.hypot(x - cx, y - cy) < rad, 1.0, 0.0))
    return enforce_parity(analyze(dfs_extend(grid, m)))


def _advance(model, state, params, solver, well, n_steps, coupled=True):
    for _ in range(n_steps):
        if model == "ok":
            state = bdf2_step_ok(state, params, solver, well)
        else:
            state = bdf2_step_no(state, params, solver, well, coupled=coupled)
    return state


def _state_error(model, state, bench_state, norm_kind):
    if model == "ok":
        fields = [(state.current, bench_state.current)]
    else:
        fields = [(state.u1, bench_state.u1), (state.u2, bench_state.u2)]
    errs = []
    for a, b in fields:
        d = synthesize(a - b)
        if norm_kind == "linf":
            errs.append(float(np.abs(d.values).max()))
        else:
            errs.append(area_l2_norm(d))
    return max(errs)


def convergence_study(model: str, params, taus, benchmark_tau: float,
                      grid: DiskGrid, T: float = 0.01, norm_kind: str = "linf",
                      well: DoubleWell = DEFAULT_WELL, solver: DiskSolver = None,
                      progress=None) -> ConvergenceReport:
    """Errors at time T against a small-step benchmark run, with log2 rates.

    Every tau (and benchmark_tau) must divide T to machine accuracy, so all
    runs land on the same final time.  Initial data is the model's standard
    indicator construction.
    """
    if model not in ("ok", "no"):
        raise ValueError("model must be 'ok' or 'no'")
    if sorted(taus, reverse=True) != list(taus):
        raise ValueError("taus must be given in descending order")
    if benchmark_tau > min(taus):
        raise ValueError("benchmark_tau must not exceed the smallest tau")
    for t in list(taus) + [benchmark_tau]:
        n = T / t
        if abs(n - round(n)) > 1e-8 * n:
            raise ValueError(f"tau = {t} does not divide T = {T}")

    solver = solver or DiskSolver(grid)
    if model == "ok":
        init = OKState.from_initial(initial_disk_ok(grid, params.omega))
    else:
        u1, u2 = initial_two_disks_no(grid, params.omega1, params.omega2)
        init = NOState.from_initial(u1, u2)

    def run(tau):
        p = _with_tau(params, tau)
        return _advance(model, init, p, solver, well, round(T / tau))

    bench = run(benchmark_tau)
    rows = []
    prev_err = None
    for tau in taus:
        if tau == benchmark_tau:
            err = 0.0
        else:
            err = _state_error(model, run(tau), bench, norm_kind)
        # no rate against the benchmark itself (zero error)
        if prev_err is None or prev_err == 0.0 or err == 0.0:
            rate = None
        else:
            rate = float(np.log2(prev_err / err))
        rows.append((float(tau), err, rate))
        prev_err = err
        if progress is not None:
            progress(rows[-1])
    return ConvergenceReport(rows=rows, benchmark_tau=float(benchmark_tau),
                             norm_kind=norm_kind, epsilon=params.epsilon,
                             epsilon_multiplier=params.epsilon * grid.n_theta / (2.0 * np.pi),
                             model=model)


def _with_tau(params, tau):
    from dataclasses import replace

    return replace(params, tau=tau)


def run_coarsening(model: str, params, initial, snapshot_times=(),
                   grid: DiskGrid = None, solver: DiskSolver = None,
                   well: DoubleWell = DEFAULT_WELL, coupled: bool = True,
                   progress=None) -> RunArtifacts:
    """Advance to the stopping criterion or T_final, recording as we go.

    ``initial`` is a CoeffField for the single-field model or a pair for the
    two-field model.  Energy is recorded every step; snapshots are taken at
    the requested times (nearest step).  Divergence does not raise: the run
    returns with stop_reason 'diverged' and the last finite state.
    """
    if model == "ok":
        state = OKState.from_initial(initial)
        grid = grid or initial.grid
    elif model == "no":
        state = NOState.from_initial(*initial)
        grid = grid or initial[0].grid
    else:
        raise ValueError("model must be 'ok' or 'no'")
    solver = solver or DiskSolver(grid)

    def record(st, trace):
        if model == "ok":
            e_raw, _ = ok_energy(st.current, params, solver, well)
            e_mod = ok_modified_energy(st, params, solver, well)
            vol = disk_integral(st.current)
        else:
            e_raw, _ = no_energy(st.u1, st.u2, params, solver, well)
            e_mod = no_modified_energy(st, params, solver, well)
            vol = disk_integral(st.u1)
        trace.append(st.step, st.time, e_raw, e_mod, vol)

    def grab(st):
        if model == "ok":
            return (st.time, st.current)
        return (st.time, (st.u1, st.u2))

    requested = sorted(float(t) for t in snapshot_times)
    want = list(requested)
    trace = EnergyTrace()
    snaps = []
    n_total = int(round(params.T_final / params.tau))
    stop_reason = "horizon"
    half = 0.5 * params.tau
    for k in range(n_total):
        try:
            if model == "ok":
                state = bdf2_step_ok(state, params, solver, well)
            else:
                state = bdf2_step_no(state, params, solver, well, coupled=coupled)
        except SolverError:
            stop_reason = "diverged"
            break
        record(state, trace)
        while want and state.time >= want[0] - half:
            snaps.append(grab(state))
            want.pop(0)
        if progress is not None and state.step % 1000 == 0:
            progress(state, trace)
        if stopping_check(state, params.tau, params.stop_tol):
            stop_reason = "stationary"
            break

    if model == "ok":
        bubbles = bubble_count(synthesize(state.current))
    else:
        bubbles = (bubble_count(synthesize(state.u1)),
                   bubble_count(synthesize(state.u2)))
    return RunArtifacts(trace=trace, snapshot_times=requested, snapshots=snaps,
                        stop_reason=stop_reason, final_state=state, bubbles=bubbles)


def bubble_count(u: ValueField, threshold: float = 0.5) -> int:
    """Connected components of {u > threshold} on the physical half grid.

    Components touching the rim count too (the boundary half-bubbles).  The
    grid graph is 4-connected, with the angular seam glued; there is no node
    at the origin, so a centered bubble closes up through the seam instead.
    """
    g = u.grid
    n_half = (g.n_r + 1) // 2
    mask = u.values[:n_half] > threshold
    labels, n = ndimage.label(mask)
    if n == 0:
        return 0
    # glue theta = 0 to theta = 2 pi - h: union-find over seam label pairs
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(labels[:, 0], labels[:, -1]):
        if a and b:
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return len({find(k) for k in range(1, n + 1)})
