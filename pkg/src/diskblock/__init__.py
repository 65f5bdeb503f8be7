"""Spectral solver and phase-field dynamics for block copolymers on the disk.

The layers, bottom up: ``ultraspherical`` (banded coefficient-space
operators on [-1, 1]), ``fields`` (the disk grid, transforms, quadrature),
``solver`` (shifted-Helmholtz and inverse-Laplacian solves, one bordered
system per Fourier mode), ``potentials`` (double and three-phase wells),
``dynamics`` (stabilized BDF2 steppers and discrete energies), ``harness``
(initial data, convergence studies, coarsening runs), ``files`` and ``cli``
(configs, CSV artifacts, entry points).
"""

from .fields import (
    CoeffField,
    DiskGrid,
    ValueField,
    analyze,
    area_integral,
    area_l2_norm,
    dfs_extend,
    disk_integral,
    enforce_parity,
    parity_residual,
    synthesize,
)
from .solver import DiskSolver, RankDeficiencyWarning, SolverError, solve_bvp_1d
from .potentials import DEFAULT_WELL, DoubleWell, w2_partials, w2_value
from .dynamics import (
    EnergyTrace,
    NOParams,
    NOState,
    OKParams,
    OKState,
    bdf2_step_no,
    bdf2_step_ok,
    estimate_invlap_norm,
    no_energy,
    no_modified_energy,
    ok_energy,
    ok_modified_energy,
    stability_constant_ok,
    stability_constants_no,
    stopping_check,
)
from .harness import (
    ConvergenceReport,
    RunArtifacts,
    bubble_count,
    convergence_study,
    initial_disk_ok,
    initial_random_blocks,
    initial_ring_nuclei,
    initial_semi_random_circles,
    initial_two_disks_no,
    run_coarsening,
)
from .files import (
    ConfigError,
    SimulationConfig,
    format_config,
    parse_config,
    read_report,
    read_snapshot,
    read_trace,
    write_report,
    write_snapshot,
    write_trace,
)
from .cli import cli_main

__version__ = "0.1.0"
