"""Config parsing, artifact file round trips, and thread-limit plumbing."""

import numpy as np
import pytest

from diskblock import (
    CoeffField,
    ConfigError,
    DiskGrid,
    OKParams,
    NOParams,
    analyze,
    dfs_extend,
    enforce_parity,
    format_config,
    parse_config,
    read_snapshot,
    read_trace,
    synthesize,
    write_snapshot,
    write_trace,
)
from diskblock.files import (
    THREADS_ENV,
    coeff_sidecar_path,
    read_report,
    resolve_threads,
    thread_limit,
    write_report,
)
from diskblock.dynamics import EnergyTrace
from diskblock.harness import ConvergenceReport

OK_TEXT = """\
model = ok
epsilon = 0.3
tau = 5e-4
gamma = 2500
omega = 0.15
M = 2000
"""

NO_TEXT = """\
model = no
epsilon = 0.2
tau = 5e-4
gamma11 = 500
gamma22 = 500
omega1 = 0.09
omega2 = 0.09
M1 = 1000
M2 = 1000
"""


class TestParseConfig:
    def test_minimal_single_field(self):
        cfg = parse_config(OK_TEXT)
        assert cfg.model == "ok"
        assert isinstance(cfg.params, OKParams)
        p = cfg.params
        assert (p.epsilon, p.tau, p.gamma, p.omega, p.M) == (0.3, 5e-4, 2500.0, 0.15, 2000.0)
        assert (p.kappa, p.beta) == (0.0, 0.0)
        assert (cfg.n_r, cfg.n_theta) == (129, 128)
        assert cfg.initial == "disk"
        assert cfg.norm == "linf"
        assert cfg.snapshot_times == ()
        assert cfg.seed == 0 and cfg.ratio == 32

    def test_minimal_two_field(self):
        cfg = parse_config(NO_TEXT)
        assert isinstance(cfg.params, NOParams)
        assert cfg.params.gamma == ((500.0, 0.0), (0.0, 500.0))
        assert cfg.initial == "two_disks"

    def test_comments_and_blanks_ignored(self):
        text = "# a run\n\nmodel = ok   # single field\n" + OK_TEXT.split("\n", 1)[1]
        cfg = parse_config(text)
        assert cfg.params.gamma == 2500.0

    def test_all_problems_collected_in_line_order(self):
        text = (
            "model = ok\n"
            "epsilon = -1\n"          # range
            "bogus = 3\n"             # unknown key
            "tau = abc\n"             # parse failure
            "tau = 1e-3\n"            # duplicate
            "no gamma here\n"         # not key = value
            "omega = 0.15\n"
            "M = 2000\n"
        )
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        msgs = err.value.problems
        assert msgs == [
            "line 2: epsilon must be > 0",
            "line 3: unknown key: bogus",
            "line 4: tau expects a number, got 'abc'",
            "line 5: duplicate key: tau",
            "line 6: expected 'key = value'",
            "missing required key: gamma",
        ]

    def test_missing_required_keys_reported_without_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config("model = ok\nepsilon = 0.3\n")
        msgs = err.value.problems
        assert "missing required key: tau" in msgs
        assert "missing required key: gamma" in msgs
        assert "missing required key: M" in msgs

    def test_missing_model_fails_fast(self):
        with pytest.raises(ConfigError, match="missing required key: model"):
            parse_config("epsilon = 0.3\n")

    def test_key_scoped_to_other_model(self):
        with pytest.raises(ConfigError, match="does not apply to model"):
            parse_config(OK_TEXT + "gamma11 = 4\n")

    def test_initial_must_match_model(self):
        with pytest.raises(ConfigError, match="initial must be"):
            parse_config(OK_TEXT + "initial = two_disks\n")

    def test_list_constraints(self):
        with pytest.raises(ConfigError, match="nondecreasing"):
            parse_config(OK_TEXT + "snapshot_times = 2.0, 1.0\n")
        with pytest.raises(ConfigError, match="strictly decreasing"):
            parse_config(OK_TEXT + "taus = 1e-3, 1e-3\n")
        with pytest.raises(ConfigError, match="benchmark_tau"):
            parse_config(OK_TEXT + "taus = 1e-3, 5e-4\nbenchmark_tau = 6e-4\n")

    def test_volume_fractions_must_leave_room(self):
        text = NO_TEXT.replace("omega1 = 0.09", "omega1 = 0.6").replace(
            "omega2 = 0.09", "omega2 = 0.5")
        with pytest.raises(ConfigError, match="omega1 \\+ omega2"):
            parse_config(text)

    def test_error_message_joins_problems_by_line(self):
        try:
            parse_config("model = ok\nepsilon = -1\nbogus = 3\n")
        except ConfigError as e:
            assert str(e).count("\n") >= 2
        else:
            pytest.fail("expected ConfigError")

    def test_format_parse_round_trip_single_field(self):
        cfg = parse_config(OK_TEXT + "snapshot_times = 0.5, 1.0\n"
                           "taus = 1e-3, 5e-4\nbenchmark_tau = 2.5e-4\n"
                           "norm = l2\nseed = 7\n")
        assert parse_config(format_config(cfg)) == cfg

    def test_format_parse_round_trip_two_field(self):
        cfg = parse_config(NO_TEXT + "kappa1 = 3.5\nbeta2 = 0.25\nstartup = ghost\n")
        assert parse_config(format_config(cfg)) == cfg


def scrambled_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-1.0, 2.0, size=((grid.n_r + 1) // 2, grid.n_theta))
    return enforce_parity(analyze(dfs_extend(grid, vals)))


class TestSnapshotFiles:
    def test_round_trip_is_bitwise(self, grid_small, tmp_path):
        f = scrambled_field(grid_small, seed=1)
        path = tmp_path / "snap.csv"
        write_snapshot(f, path)
        back = read_snapshot(path)
        assert np.array_equal(back.coeffs, f.coeffs)
        assert (back.grid.n_r, back.grid.n_theta) == (17, 16)

    def test_sidecar_naming(self, tmp_path):
        assert coeff_sidecar_path("out/snap.csv").name == "snap_coeffs.csv"

    def test_value_rows_cover_physical_half(self, grid_small, tmp_path):
        f = scrambled_field(grid_small, seed=2)
        path = tmp_path / "snap.csv"
        write_snapshot(f, path)
        lines = path.read_text().splitlines()
        n_half = (grid_small.n_r + 1) // 2
        assert lines[0] == "r,theta,value"
        assert len(lines) == 1 + n_half * grid_small.n_theta
        r0, t0, v0 = lines[1].split(",")
        assert float(r0) == grid_small.r[0]
        assert float(t0) == grid_small.theta[0]
        assert float(v0) == synthesize(f).values[0, 0]

    def test_grid_mismatch_rejected(self, grid_small, grid_medium, tmp_path):
        f = scrambled_field(grid_small)
        path = tmp_path / "snap.csv"
        write_snapshot(f, path)
        with pytest.raises(ValueError, match="snapshot is 17 x 16"):
            read_snapshot(path, grid=grid_medium)

    def test_reuses_given_grid(self, grid_small, tmp_path):
        f = scrambled_field(grid_small)
        path = tmp_path / "snap.csv"
        write_snapshot(f, path)
        back = read_snapshot(path, grid=grid_small)
        assert back.grid is grid_small

    def test_wrong_sidecar_header_rejected(self, tmp_path):
        path = tmp_path / "snap.csv"
        coeff_sidecar_path(path).write_text("a,b,c\n")
        with pytest.raises(ValueError, match="not a snapshot sidecar"):
            read_snapshot(path)


class TestTraceFiles:
    def test_round_trip(self, tmp_path):
        tr = EnergyTrace()
        rng = np.random.default_rng(3)
        for k in range(1, 8):
            tr.append(k, k * 1e-3, rng.uniform(), rng.uniform(), rng.uniform())
        path = tmp_path / "trace.csv"
        write_trace(tr, path)
        back = read_trace(path)
        assert back.steps == tr.steps
        assert back.times == tr.times
        assert back.e_raw == tr.e_raw
        assert back.e_modified == tr.e_modified
        assert back.volume == tr.volume

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("nope\n")
        with pytest.raises(ValueError, match="not a trace file"):
            read_trace(path)


class TestReportFiles:
    def test_round_trip_with_benchmark_row(self, tmp_path):
        rep = ConvergenceReport(
            rows=[(1e-3, 3.2e-3, None), (5e-4, 8.1e-4, 1.98)],
            benchmark_tau=1.25e-4, norm_kind="l2", epsilon=0.3,
            epsilon_multiplier=6.11, model="ok")
        path = tmp_path / "report.csv"
        write_report(rep, path)
        rows = read_report(path)
        assert rows[:2] == [(1e-3, 3.2e-3, None), (5e-4, 8.1e-4, 1.98)]
        assert rows[2] == (1.25e-4, 0.0, None)
        text = path.read_text()
        assert "# model = ok" in text and "# norm = l2" in text


class TestThreads:
    def test_config_value_without_override(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert resolve_threads(3) == 3

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "2")
        assert resolve_threads(5) == 2

    def test_bad_override_rejected(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ConfigError, match="expects an integer"):
            resolve_threads(1)
        monkeypatch.setenv(THREADS_ENV, "-2")
        with pytest.raises(ConfigError, match=">= 0"):
            resolve_threads(1)

    def test_limit_contexts(self):
        with thread_limit(0):
            pass
        with thread_limit(1):
            a = np.arange(16.0).reshape(4, 4)
            assert np.isfinite(a @ a).all()
