"""Stabilized BDF2 time stepping and discrete energies for the two models.

Both models are L^2 gradient flows of a penalized free energy: interface
energy plus double-well bulk term plus a long-range repulsion through the
inverse Laplacian plus a volume penalty.  The two-field variant adds a
cross-gradient term and couples the fields through the three-phase well and
a matrix of long-range strengths.

Each step treats the Laplacian and the two stabilizer terms implicitly and
everything else explicitly with second-order extrapolation 2 U^n - U^{n-1},
so the work per step is one shifted-Helmholtz solve per field plus one
inverse-Laplacian solve per active long-range term.  The kappa stabilizer
folds into the Helmholtz shift; the beta stabilizer couples U^{n+1} through
the inverse Laplacian and is resolved by a short fixed-point iteration
(the map is a contraction whenever gamma * beta * |invlap| << 3 / (2 tau),
which holds by a wide margin for every parameter set we run).

Startup: the BDF2 stencil needs two back levels, and there are two ways to
produce the first step from a single initial field.  startup="bdf1" takes
one backward-Euler step of the full length tau and is second-order overall.
startup="ghost" substitutes U^{-1} = U^0 directly into the BDF2 formula;
that collapses to a backward-Euler step of effective length 2 tau / 3 while
the clock advances by tau, a one-time O(tau) error that drags the observed
global order toward one once tau is small enough.  The ghost variant is
kept because published convergence tables for this family of schemes (rates
sagging toward 1.6 at the smallest steps) are reproducible only with it.

Energies are evaluated in the node area measure.  The Dirichlet terms use
the identity <grad u, grad v> = <u, -lap v>, exact under the homogeneous
Neumann condition that every solve imposes; this avoids forming 1/r^2
gradient quadratures near the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import (
    CoeffField,
    ValueField,
    DiskGrid,
    analyze,
    synthesize,
    disk_integral,
    area_integral,
    area_inner,
)
from .potentials import DoubleWell, DEFAULT_WELL, w2_value, w2_partials
from .solver import DiskSolver, SolverError

__all__ = [
    "OKParams",
    "NOParams",
    "OKState",
    "NOState",
    "EnergyTrace",
    "bdf2_step_ok",
    "bdf2_step_no",
    "ok_energy",
    "no_energy",
    "ok_modified_energy",
    "no_modified_energy",
    "stability_constant_ok",
    "stability_constants_no",
    "estimate_invlap_norm",
    "stopping_check",
]

_BETA_TOL = 1e-10
_BETA_MAX_ITER = 50


@dataclass(frozen=True)
class OKParams:
    """Parameters of the single-field model."""

    epsilon: float
    gamma: float
    omega: float
    tau: float
    M: float
    kappa: float = 0.0
    beta: float = 0.0
    T_final: float = 1.0
    stop_tol: float = 1e-5
    startup: str = "bdf1"

    def __post_init__(self):
        errs = []
        if not self.epsilon > 0:
            errs.append("epsilon must be > 0")
        if not self.tau > 0:
            errs.append("tau must be > 0")
        if not self.M > 0:
            errs.append("M must be > 0")
        if self.gamma < 0 or self.kappa < 0 or self.beta < 0:
            errs.append("gamma, kappa, beta must be >= 0")
        if not 0.0 < self.omega < 1.0:
            errs.append("omega must lie in (0, 1)")
        if self.startup not in ("bdf1", "ghost"):
            errs.append("startup must be 'bdf1' or 'ghost'")
        if errs:
            raise ValueError("; ".join(errs))


@dataclass(frozen=True)
class NOParams:
    """Parameters of the two-field model; gamma is the 2x2 strength matrix."""

    epsilon: float
    gamma: tuple
    omega1: float
    omega2: float
    tau: float
    M1: float
    M2: float
    kappa1: float = 0.0
    kappa2: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    T_final: float = 1.0
    stop_tol: float = 1e-5
    startup: str = "bdf1"

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.shape != (2, 2):
            raise ValueError("gamma must be a 2x2 matrix")
        object.__setattr__(self, "gamma", ((g[0, 0], g[0, 1]), (g[1, 0], g[1, 1])))
        errs = []
        if not self.epsilon > 0:
            errs.append("epsilon must be > 0")
        if not self.tau > 0:
            errs.append("tau must be > 0")
        if not (self.M1 > 0 and self.M2 > 0):
            errs.append("M1, M2 must be > 0")
        if (g < 0).any():
            errs.append("gamma entries must be >= 0")
        if min(self.kappa1, self.kappa2, self.beta1, self.beta2) < 0:
            errs.append("kappa_i, beta_i must be >= 0")
        if not (0 < self.omega1 < 1 and 0 < self.omega2 < 1):
            errs.append("omega1, omega2 must lie in (0, 1)")
        if not self.omega1 + self.omega2 < 1:
            errs.append("omega1 + omega2 must be < 1")
        if self.startup not in ("bdf1", "ghost"):
            errs.append("startup must be 'bdf1' or 'ghost'")
        if errs:
            raise ValueError("; ".join(errs))

    def gamma_at(self, i: int, j: int) -> float:
        return self.gamma[i - 1][j - 1]


@dataclass(frozen=True)
class OKState:
    """BDF2 stencil (U^n, U^{n-1}) plus the step counter and time."""

    current: CoeffField
    previous: CoeffField
    step: int = 0
    time: float = 0.0

    @classmethod
    def from_initial(cls, u0: CoeffField) -> "OKState":
        return cls(current=u0, previous=u0, step=0, time=0.0)


@dataclass(frozen=True)
class NOState:
    """Two-field BDF2 stencil."""

    u1: CoeffField
    u1_prev: CoeffField
    u2: CoeffField
    u2_prev: CoeffField
    step: int = 0
    time: float = 0.0

    @classmethod
    def from_initial(cls, u1: CoeffField, u2: CoeffField) -> "NOState":
        return cls(u1=u1, u1_prev=u1, u2=u2, u2_prev=u2, step=0, time=0.0)


@dataclass
class EnergyTrace:
    """Per-step record of raw energy, modified energy, and phase volume."""

    steps: list = field(default_factory=list)
    times: list = field(default_factory=list)
    e_raw: list = field(default_factory=list)
    e_modified: list = field(default_factory=list)
    volume: list = field(default_factory=list)

    def append(self, step, time, e_raw, e_modified, volume):
        if self.times and time <= self.times[-1]:
            raise ValueError("trace times must be strictly increasing")
        self.steps.append(int(step))
        self.times.append(float(time))
        self.e_raw.append(float(e_raw))
        self.e_modified.append(float(e_modified))
        self.volume.append(float(volume))

    def __len__(self):
        return len(self.steps)


def _shifted(c: CoeffField, delta: float) -> CoeffField:
    """c minus the constant delta (only the (0, 0) coefficient moves)."""
    out = c.coeffs.copy()
    out[0, 0] -= delta
    return CoeffField(c.grid, out)


def _check_finite(coeffs, step):
    if not np.isfinite(coeffs).all():
        raise SolverError(f"non-finite field produced at step {step}")


def estimate_invlap_norm(solver_or_grid, tol: float = 1e-6, max_iter: int = 500) -> float:
    """Operator norm of the inverse Laplacian on zero-mean fields.

    Power iteration in the area inner product; the result is cached on the
    solver.  The continuum value is 1 / lambda_1 with lambda_1 the smallest
    nonzero Neumann Laplacian eigenvalue of the unit disk, about 0.2950.
    """
    solver = solver_or_grid
    if isinstance(solver_or_grid, DiskGrid):
        solver = DiskSolver(solver_or_grid)
    if solver._invlap_norm is not None:
        return solver._invlap_norm

    g = solver.grid
    rng = np.random.default_rng(1234)
    from .fields import dfs_extend

    n_half = (g.n_r + 1) // 2
    v = dfs_extend(g, rng.standard_normal((n_half, g.n_theta)))
    vc = analyze(v)
    vc = _shifted(vc, disk_integral(vc) / np.pi)

    lam_old = 0.0
    for _ in range(max_iter):
        w = solver.inverse_laplacian(vc)
        wv = synthesize(w)
        norm = np.sqrt(area_inner(wv, wv))
        if norm == 0.0:
            raise SolverError("power iteration collapsed to zero")
        lam = norm / np.sqrt(area_inner(synthesize(vc), synthesize(vc)))
        if abs(lam - lam_old) <= tol * lam:
            solver._invlap_norm = float(lam)
            solver._invlap_mode = CoeffField(g, w.coeffs / norm)
            return solver._invlap_norm
        lam_old = lam
        vc = CoeffField(g, w.coeffs / norm)
    raise SolverError(f"inverse-Laplacian norm estimate did not converge in {max_iter} iterations")


def stability_constant_ok(p: OKParams, solver: DiskSolver, well: DoubleWell = DEFAULT_WELL) -> float:
    """The constant C in the modified-energy theorem for the single-field model."""
    return (
        well.curvature_bound / (2.0 * p.epsilon)
        + 0.5 * p.gamma * estimate_invlap_norm(solver)
        + 0.5 * p.M * np.pi
    )


def stability_constants_no(p: NOParams, solver: DiskSolver, well: DoubleWell = DEFAULT_WELL):
    """(C_1, C_2) for the two-field modified-energy theorem."""
    nrm = estimate_invlap_norm(solver)
    base = well.curvature_bound / (2.0 * p.epsilon)
    c1 = base + 0.5 * (p.gamma_at(1, 1) + p.gamma_at(1, 2)) * nrm + 0.5 * p.M1 * np.pi
    c2 = base + 0.5 * (p.gamma_at(2, 1) + p.gamma_at(2, 2)) * nrm + 0.5 * p.M2 * np.pi
    return c1, c2


def _solve_with_beta(solver, rhs_base: np.ndarray, alpha: float, gamma_beta: float,
                     extrap: CoeffField, epsilon: float, step: int,
                     extra_r2: CoeffField = None) -> CoeffField:
    """Solve (-eps lap + shift) U + gamma beta invlap(U - extrap) = rhs_base.

    rhs_base is already divided by epsilon (the Helmholtz solver's scaling);
    extra_r2 carries any cross-diffusion term in the solver's r^2 form and
    is constant across iterations.  With gamma_beta == 0 this is a single
    solve; otherwise fixed-point iteration on the inverse-Laplacian term,
    started at the extrapolation.
    """
    g = extrap.grid
    if gamma_beta == 0.0:
        return solver.helmholtz_solve(CoeffField(g, rhs_base), alpha, extra_r2)

    u = extrap
    for _ in range(_BETA_MAX_ITER):
        corr = solver.inverse_laplacian(u - extrap)
        rhs = rhs_base - (gamma_beta / epsilon) * corr.coeffs
        u_next = solver.helmholtz_solve(CoeffField(g, rhs), alpha, extra_r2)
        inc = np.abs(u_next.coeffs - u.coeffs).max()
        u = u_next
        if inc < _BETA_TOL:
            return u
    raise SolverError(f"beta fixed-point iteration stalled at step {step}")


def _bdf_weights(step: int, startup: str, tau: float):
    """(implicit, explicit-n, explicit-n-1, extrapolation pair) for this step.

    Steps after the first always use the BDF2 stencil; the first step is a
    full backward-Euler step under "bdf1" and the ghost-padded BDF2 formula
    (which shortens the step to 2 tau / 3) under "ghost".
    """
    if step == 0 and startup == "bdf1":
        return 1.0 / tau, 1.0 / tau, 0.0, (1.0, 0.0)
    return 1.5 / tau, 2.0 / tau, 0.5 / tau, (2.0, -1.0)


def bdf2_step_ok(state: OKState, p: OKParams, solver: DiskSolver,
                 well: DoubleWell = DEFAULT_WELL) -> OKState:
    """One step of the single-field dynamics."""
    g = state.current.grid
    un, unm1 = state.current, state.previous
    c_new, c_n, c_m, (w_n, w_m) = _bdf_weights(state.step, p.startup, p.tau)
    extrap = w_n * un + w_m * unm1

    v = solver.inverse_laplacian(_shifted(extrap, p.omega))
    un_v = synthesize(un).values
    unm1_v = synthesize(unm1).values
    nonlin = analyze(ValueField(g, w_n * well.dw(un_v) + w_m * well.dw(unm1_v)))
    mass_gap = disk_integral(extrap) - p.omega * np.pi

    rhs = (
        c_n * un.coeffs
        - c_m * unm1.coeffs
        - (1.0 / p.epsilon) * nonlin.coeffs
        + (p.kappa / p.epsilon) * extrap.coeffs
        - p.gamma * v.coeffs
    )
    rhs[0, 0] -= p.M * mass_gap
    rhs /= p.epsilon

    alpha = (c_new + p.kappa / p.epsilon) / p.epsilon
    u_next = _solve_with_beta(solver, rhs, alpha, p.gamma * p.beta, extrap,
                              p.epsilon, state.step + 1)
    _check_finite(u_next.coeffs, state.step + 1)
    return OKState(current=u_next, previous=un, step=state.step + 1,
                   time=state.time + p.tau)


def bdf2_step_no(state: NOState, p: NOParams, solver: DiskSolver,
                 well: DoubleWell = DEFAULT_WELL, coupled: bool = True) -> NOState:
    """One BDF2 step of the two-field dynamics.

    The two equations are swept in order: the first field sees only time-n
    data of the second, while the second field sees the freshly computed
    first field wherever the scheme's staggered superscripts call for
    time n+1 (there the extrapolation 2 U^{n+1} - U^{n+1} collapses).

    With coupled=False the cross terms are removed and the three-phase well
    is replaced by the plain double well, a diagnostic mode in which each
    field must evolve exactly like the single-field model.
    """
    g = state.u1.grid
    u1n, u1m, u2n, u2m = state.u1, state.u1_prev, state.u2, state.u2_prev
    c_new, c_n, c_m, (w_n, w_m) = _bdf_weights(state.step, p.startup, p.tau)
    ex1 = w_n * u1n + w_m * u1m
    ex2 = w_n * u2n + w_m * u2m
    u1n_v = synthesize(u1n).values
    u1m_v = synthesize(u1m).values
    u2n_v = synthesize(u2n).values
    u2m_v = synthesize(u2m).values
    step = state.step + 1

    g11, g12 = p.gamma_at(1, 1), p.gamma_at(1, 2)
    g21, g22 = p.gamma_at(2, 1), p.gamma_at(2, 2)
    alpha1 = (c_new + p.kappa1 / p.epsilon) / p.epsilon
    alpha2 = (c_new + p.kappa2 / p.epsilon) / p.epsilon

    # field 1: everything on the right is explicit
    if coupled:
        nl_n = w2_partials(u1n_v, u2n_v, well)[0]
        nl_m = w2_partials(u1m_v, u2m_v, well)[0]
    else:
        nl_n, nl_m = well.dw(u1n_v), well.dw(u1m_v)
    nonlin1 = analyze(ValueField(g, w_n * nl_n + w_m * nl_m))
    rhs1 = (
        c_n * u1n.coeffs
        - c_m * u1m.coeffs
        - (1.0 / p.epsilon) * nonlin1.coeffs
        + (p.kappa1 / p.epsilon) * ex1.coeffs
        - g11 * solver.inverse_laplacian(_shifted(ex1, p.omega1)).coeffs
    )
    cross1 = None
    if coupled:
        # cross diffusion stays in r^2 form: the extrapolation of rough data
        # has no pointwise Laplacian, but r^2 lap of it is still polynomial
        cross1 = 0.5 * solver.laplacian_r2(ex2)
        if g12 != 0.0:
            rhs1 -= g12 * solver.inverse_laplacian(_shifted(ex2, p.omega2)).coeffs
    rhs1[0, 0] -= p.M1 * (disk_integral(ex1) - p.omega1 * np.pi)
    rhs1 /= p.epsilon
    u1_next = _solve_with_beta(solver, rhs1, alpha1, g11 * p.beta1, ex1,
                               p.epsilon, step, extra_r2=cross1)
    _check_finite(u1_next.coeffs, step)

    # field 2: staggered data, so the fresh field 1 enters without extrapolation
    u1x_v = synthesize(u1_next).values
    if coupled:
        nl_n = w2_partials(u1x_v, u2n_v, well)[1]
        nl_m = w2_partials(u1x_v, u2m_v, well)[1]
    else:
        nl_n, nl_m = well.dw(u2n_v), well.dw(u2m_v)
    nonlin2 = analyze(ValueField(g, w_n * nl_n + w_m * nl_m))
    rhs2 = (
        c_n * u2n.coeffs
        - c_m * u2m.coeffs
        - (1.0 / p.epsilon) * nonlin2.coeffs
        + (p.kappa2 / p.epsilon) * ex2.coeffs
        - g22 * solver.inverse_laplacian(_shifted(ex2, p.omega2)).coeffs
    )
    cross2 = None
    if coupled:
        cross2 = 0.5 * solver.laplacian_r2(u1_next)
        if g21 != 0.0:
            rhs2 -= g21 * solver.inverse_laplacian(_shifted(u1_next, p.omega1)).coeffs
    rhs2[0, 0] -= p.M2 * (disk_integral(ex2) - p.omega2 * np.pi)
    rhs2 /= p.epsilon
    u2_next = _solve_with_beta(solver, rhs2, alpha2, g22 * p.beta2, ex2,
                               p.epsilon, step, extra_r2=cross2)
    _check_finite(u2_next.coeffs, step)

    return NOState(u1=u1_next, u1_prev=u1n, u2=u2_next, u2_prev=u2n,
                   step=step, time=state.time + p.tau)


def _dirichlet_term(u: CoeffField, w: CoeffField, solver: DiskSolver) -> float:
    """<grad u, grad w> computed as <u, -lap w> (exact under Neumann)."""
    uv = synthesize(u)
    lap = solver.laplacian_values(w)
    return area_inner(uv, ValueField(u.grid, -lap))


def ok_energy(u: CoeffField, p: OKParams, solver: DiskSolver,
              well: DoubleWell = DEFAULT_WELL):
    """Raw discrete energy of the single-field model, with its four parts."""
    uv = synthesize(u)
    grad = 0.5 * p.epsilon * _dirichlet_term(u, u, solver)
    bulk = area_integral(ValueField(u.grid, well.w(uv.values))) / p.epsilon
    shifted = _shifted(u, p.omega)
    longrange = 0.5 * p.gamma * area_inner(
        synthesize(shifted), synthesize(solver.inverse_laplacian(shifted))
    )
    gap = disk_integral(u) - p.omega * np.pi
    penalty = 0.5 * p.M * gap * gap
    parts = {
        "gradient": grad,
        "bulk": bulk,
        "longrange": longrange,
        "penalty": penalty,
    }
    return grad + bulk + longrange + penalty, parts


def no_energy(u1: CoeffField, u2: CoeffField, p: NOParams, solver: DiskSolver,
              well: DoubleWell = DEFAULT_WELL):
    """Raw discrete energy of the two-field model, with its parts."""
    g = u1.grid
    u1v, u2v = synthesize(u1), synthesize(u2)
    grad = 0.5 * p.epsilon * (
        _dirichlet_term(u1, u1, solver)
        + _dirichlet_term(u2, u2, solver)
        + _dirichlet_term(u1, u2, solver)
    )
    bulk = area_integral(ValueField(g, w2_value(u1v.values, u2v.values, well))) / p.epsilon

    shifts = (_shifted(u1, p.omega1), _shifted(u2, p.omega2))
    inv = [synthesize(solver.inverse_laplacian(s)) for s in shifts]
    vals = [synthesize(s) for s in shifts]
    longrange = 0.0
    for i in range(2):
        for j in range(2):
            gij = p.gamma_at(i + 1, j + 1)
            if gij != 0.0:
                longrange += 0.5 * gij * area_inner(vals[i], inv[j])

    gap1 = disk_integral(u1) - p.omega1 * np.pi
    gap2 = disk_integral(u2) - p.omega2 * np.pi
    penalty = 0.5 * p.M1 * gap1 * gap1 + 0.5 * p.M2 * gap2 * gap2
    parts = {
        "gradient": grad,
        "bulk": bulk,
        "longrange": longrange,
        "penalty": penalty,
    }
    return grad + bulk + longrange + penalty, parts


def _increment_terms(curr: CoeffField, prev: CoeffField, coeff_l2: float,
                     coeff_half: float, solver: DiskSolver) -> float:
    d = curr - prev
    dv = synthesize(d)
    out = coeff_l2 * area_inner(dv, dv)
    if coeff_half != 0.0:
        out += coeff_half * area_inner(dv, synthesize(solver.inverse_laplacian(d)))
    return out


def ok_modified_energy(state: OKState, p: OKParams, solver: DiskSolver,
                       well: DoubleWell = DEFAULT_WELL) -> float:
    """Raw energy plus the non-negative increment terms the theorem tracks."""
    e_raw, _ = ok_energy(state.current, p, solver, well)
    c = stability_constant_ok(p, solver, well)
    coeff = p.kappa / (2.0 * p.epsilon) + 0.25 / p.tau + c
    return e_raw + _increment_terms(state.current, state.previous, coeff,
                                    0.5 * p.gamma * p.beta, solver)


def no_modified_energy(state: NOState, p: NOParams, solver: DiskSolver,
                       well: DoubleWell = DEFAULT_WELL) -> float:
    """Two-field analogue of ok_modified_energy."""
    e_raw, _ = no_energy(state.u1, state.u2, p, solver, well)
    c1, c2 = stability_constants_no(p, solver, well)
    out = e_raw
    out += _increment_terms(
        state.u1, state.u1_prev,
        p.kappa1 / (2.0 * p.epsilon) + 0.25 / p.tau + c1,
        0.5 * p.gamma_at(1, 1) * p.beta1, solver,
    )
    out += _increment_terms(
        state.u2, state.u2_prev,
        p.kappa2 / (2.0 * p.epsilon) + 0.25 / p.tau + c2,
        0.5 * p.gamma_at(2, 2) * p.beta2, solver,
    )
    return out


def stopping_check(state, tau: float, tol: float = 1e-5) -> bool:
    """True when the normalized step increment has dropped below tol.

    Single-field: |U^{n} - U^{n-1}|_inf / tau <= tol.  Two-field: the sum of
    both quotients.  Call on the state returned by a step, so the pair being
    compared is (U^{n+1}, U^n).
    """
    if isinstance(state, OKState):
        d = synthesize(state.current - state.previous)
        return np.abs(d.values).max() / tau <= tol
    d1 = synthesize(state.u1 - state.u1_prev)
    d2 = synthesize(state.u2 - state.u2_prev)
    q = (np.abs(d1.values).max() + np.abs(d2.values).max()) / tau
    return q <= tol
