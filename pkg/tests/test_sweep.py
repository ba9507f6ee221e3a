import json
import math

import numpy as np
import pytest

from multilz.analysis import bowtie_strong_decoherence, lz_probability
from multilz.cli import main
from multilz.config import SweepConfig, load_sweep_config, parse_grid
from multilz.model import ModelError
from multilz.sweep import (
    CSV_HEADER,
    PointError,
    convergence_audit,
    point_trajectory,
    run_point,
    run_sweep,
)

FAST = dict(n_fock=24, t_span=40.0)


def cfg(**kw):
    return SweepConfig(**{**FAST, **kw})


class TestConfig:
    def test_grid_syntax(self):
        assert parse_grid("0.1,0.2") == (0.1, 0.2)
        assert parse_grid("0:1:3") == (0.0, 0.5, 1.0)
        lo, mid, hi = parse_grid("0.01:1:3:log")
        assert mid == pytest.approx(0.1)

    @pytest.mark.parametrize("kw", [
        {"model": "pentagon"}, {"couplings": ("c_9_9",)}, {"delta_grid": (0.0,)},
        {"g_grid": (-1.0,)}, {"readout": "wigner"}, {"model": "custom"},
        {"max_fock": 5}, {"workers": 0}, {"delta_grid": ()},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)

    def test_file_round_trip(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"model": "triangle", "delta_grid": "0.1:0.3:3", "n_fock": 30}))
        c = load_sweep_config(p)
        assert c.model == "triangle" and c.n_fock == 30 and len(c.delta_grid) == 3
        p.write_text(json.dumps({"modle": "triangle"}))
        with pytest.raises(ValueError, match="unknown"):
            load_sweep_config(p)

    def test_overrides_ignore_none(self):
        c = cfg().with_overrides(model=None, n_fock=20)
        assert c.model == "equal_slope" and c.n_fock == 20


class TestPoint:
    def test_two_level_is_lz(self):
        row = run_point(cfg(model="two_level", t_span=100.0), 0.2, 0.0, "c_0_1")
        assert row.p[0] == pytest.approx(lz_probability(0.2), abs=1e-5)
        assert row.status == "ok" and row.norm_drift < 1e-6

    def test_equal_slope_c01_independent_of_g(self):
        c = SweepConfig(model="equal_slope", max_fock=150)
        p0 = run_point(c, 0.2, 0.0, "c_0_1").p
        p2 = run_point(c, 0.2, 2.0, "c_0_1").p
        assert np.max(np.abs(p0 - p2)) < 1e-3

    def test_equal_slope_c11_levels_merge(self):
        # |P2 - P3| does not grow with g (up to 1e-3 noise)
        c = SweepConfig(model="equal_slope", max_fock=150, record_timing=False)
        gaps = []
        for g in (0.0, 1.0, 2.0, 3.0, 4.0):
            p = run_point(c, 0.3, g, "c_1_1").p
            gaps.append(abs(p[1] - p[2]))
        assert all(b <= a + 1e-3 for a, b in zip(gaps, gaps[1:]))

    def test_bow_tie_c01_strong_coupling(self):
        row = run_point(SweepConfig(model="bow_tie", max_fock=90), 0.3, 4.0, "c_0_1")
        np.testing.assert_allclose(row.p, bowtie_strong_decoherence(0.3), atol=0.02)

    def test_populations_normalized(self):
        row = run_point(cfg(model="triangle"), 0.5, 1.0, "c_1_3")
        assert abs(sum(row.populations) - 1) < 1e-6
        assert all(0 <= p <= 1 for p in row.populations)

    def test_bare_readout_close_to_eigen(self):
        a = run_point(cfg(model="bow_tie"), 0.5, 0.0, "c_1_3").p
        b = run_point(cfg(model="bow_tie", readout="bare"), 0.5, 0.0, "c_1_3").p
        assert np.max(np.abs(a - b)) < 2e-2

    def test_leakage_reported(self):
        # two Fock states cannot hold the displaced ground state at g = 3
        with pytest.raises(PointError) as info:
            run_point(cfg(model="bow_tie", n_fock=3), 0.3, 3.0, "c_0_1")
        assert info.value.row.status == "leakage"
        assert info.value.row.leakage > 1e-6

    def test_fock_extension(self):
        row = run_point(cfg(model="bow_tie", n_fock=4, max_fock=44), 0.3, 1.0, "c_0_1")
        assert row.status.startswith("ok-nfock=")
        assert row.leakage <= 1e-6

    def test_trajectory(self):
        traj = point_trajectory(cfg(model="equal_slope"), 0.3, 1.0, "c_1_3", n_samples=7)
        assert traj.shape == (7, 5)
        np.testing.assert_allclose(traj[:, 1:4].sum(1), 1, atol=1e-6)
        assert traj[0, 1] == pytest.approx(1, abs=1e-3)
        assert np.all(traj[:, -1] >= 0)


class TestSweep:
    def test_single_point_matches_run_point(self):
        c = cfg(delta_grid=(0.4,), g_grid=(1.5,), record_timing=False)
        res = run_sweep(c)
        assert len(res.rows) == 1
        assert res.rows[0] == run_point(c, 0.4, 1.5, "c_1_3")

    def test_row_order_and_grid(self):
        c = cfg(model="bow_tie", couplings=("c_0_1", "c_1_1"), delta_grid=(0.2, 0.5), g_grid=(0.0, 1.0))
        res = run_sweep(c)
        keys = [(r.coupling, r.delta, r.g_over_delta) for r in res.rows]
        assert keys == [(cp, d, g) for cp in c.couplings for d in c.delta_grid for g in c.g_grid]
        _, _, p1 = res.grid("c_0_1", 1)
        assert p1.shape == (2, 2) and not np.isnan(p1).any()

    def test_deterministic_across_workers(self, tmp_path):
        base = cfg(model="triangle", couplings=("c_3_1",), delta_grid=(0.1, 0.6), g_grid=(0.0, 2.0),
                   record_timing=False)
        a = run_sweep(base.with_overrides(workers=1, output=str(tmp_path / "a.csv")))
        b = run_sweep(base.with_overrides(workers=2, output=str(tmp_path / "b.csv")))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert a.to_csv() == b.to_csv()

    def test_csv_header(self):
        text = run_sweep(cfg(delta_grid=(0.3,), g_grid=(0.0,))).to_csv()
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines[1].split(",")) == len(CSV_HEADER)

    def test_failed_point_kept_as_row(self):
        res = run_sweep(cfg(model="bow_tie", n_fock=3, delta_grid=(0.3,), g_grid=(0.0, 3.0),
                            couplings=("c_0_1",)))
        assert [r.status for r in res.rows] == ["ok", "leakage"]
        assert len(res.failed) == 1

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            run_sweep(cfg(delta_grid=(0.3,), g_grid=(0.0,), output=str(blocker / "x.csv")))

    def test_custom_model(self, tmp_path):
        f = tmp_path / "m.json"
        f.write_text(json.dumps({
            "A": {"real": [[0, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0]], "imag": [[0] * 3] * 3},
            "B": [1, 0, -1], "C": [0, 0, 1],
        }))
        c = cfg(model="custom", custom_file=str(f), couplings=("custom_diagonal",),
                delta_grid=(0.3,), g_grid=(0.0, 1.0))
        named = run_point(cfg(model="bow_tie"), 0.3, 1.0, "c_0_1")
        res = run_sweep(c)
        np.testing.assert_allclose(res.rows[1].p, named.p, atol=1e-9)

    def test_custom_diagonal_needs_c(self, tmp_path):
        f = tmp_path / "m.json"
        f.write_text(json.dumps({"A": [[0, 0.5], [0.5, 0]], "B": [0.5, -0.5]}))
        c = cfg(model="custom", custom_file=str(f), couplings=("custom_diagonal",))
        with pytest.raises(PointError):
            run_point(c, 0.3, 1.0)


class TestAudit:
    def test_empty(self):
        assert convergence_audit(cfg(), []).max_change == 0.0

    def test_equal_slope_strong_coupling(self):
        rep = convergence_audit(SweepConfig(model="equal_slope", couplings=("c_3_1",)), [(1.0, 4.0)])
        assert rep.max_change < 1e-3

    def test_two_level_uncoupled(self):
        rep = convergence_audit(cfg(model="two_level"), [("c_0_1", 0.3, 0.0)])
        assert rep.max_change < 1e-6
        assert len(rep.lines()) == 1


class TestCLI:
    def test_oracle_lz(self, capsys):
        assert main(["oracle", "lz", "--delta-grid", "0.1,1"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "delta,p_remain"
        assert float(out[1].split(",")[1]) == pytest.approx(math.exp(-0.2 * math.pi))

    def test_oracle_gaps(self, capsys):
        assert main(["oracle", "gaps", "--alpha", "2", "--nmax", "4"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 6

    def test_sweep_to_file(self, tmp_path):
        out = tmp_path / "s.csv"
        rc = main(["sweep", "--model", "bow_tie", "--coupling", "c_0_1,c_1_1", "--delta-grid", "0.3",
                   "--g-grid", "0,1", "--nfock", "24", "--tspan", "40", "--out", str(out)])
        assert rc == 0
        assert len(out.read_text().splitlines()) == 5

    def test_flags_override_config(self, tmp_path, capsys):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"model": "triangle", "n_fock": 24, "t_span": 40.0,
                                    "delta_grid": [0.3], "g_grid": [0.0]}))
        assert main(["sweep", "--config", str(conf), "--model", "equal_slope"]) == 0
        assert capsys.readouterr().out.splitlines()[1].startswith("equal_slope,")

    def test_custom_file_settings(self, tmp_path, capsys):
        f = tmp_path / "m.json"
        f.write_text(json.dumps({"A": [[0, 0.5], [0.5, 0]], "B": [0.5, -0.5], "C": [0, 1],
                                 "omega": 1.5, "n_fock": 10}))
        assert main(["point", "--custom-file", str(f), "--delta", "0.3", "--g", "0.5",
                     "--tspan", "40"]) == 0
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert row[0] == "custom" and row[1] == "custom_diagonal" and row[-1] == "ok"

    def test_point_trajectory(self, tmp_path, capsys):
        traj = tmp_path / "t.csv"
        assert main(["point", "--model", "equal_slope", "--delta", "0.3", "--g", "1", "--nfock", "24",
                     "--tspan", "40", "--trajectory", str(traj), "--samples", "5"]) == 0
        lines = traj.read_text().splitlines()
        assert lines[0] == "t,P1,P2,P3,n_mean" and len(lines) == 6

    def test_audit(self, capsys):
        rc = main(["audit", "--model", "equal_slope", "--delta-grid", "0.3", "--g-grid", "1",
                   "--nfock", "24", "--tspan", "40"])
        assert rc == 0
        assert "max |dP|" in capsys.readouterr().out

    def test_bad_model(self, capsys):
        assert main(["sweep", "--model", "hexagon"]) == 2
        assert "unknown model" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])

    def test_model_error_is_value_error(self):
        assert issubclass(ModelError, ValueError)
