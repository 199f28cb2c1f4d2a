import json
import subprocess
import sys

import pytest

from waveguide_lab import sweep
from waveguide_lab.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, EXIT_RESOURCE, main
from waveguide_lab.errors import NumericalAbort
from waveguide_lab.sweep import ConfigError, ExperimentConfig, expand_cells, summary_path

SMOKE = """kind = "bilinear-sweep"
seed = 7
[grid]
lambda = [4]
N1 = [16]
N2 = [4]
T = [1]
"""

PAIR = """kind = "bilinear-sweep"
seed = 11
[grid]
lambda = [2, 4]
N1 = [8]
N2 = [2]
T = [0.25, 1]
draws = 2
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows_of(path):
    lines = path.read_text().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


class TestConfig:
    def test_empty_grid_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, 'kind = "bilinear-sweep"\n[grid]\n')
        assert main(["bilinear-sweep", "--config", cfg, "--out", str(tmp_path / "o.csv")]) \
            == EXIT_CONFIG
        assert "empty" in capsys.readouterr().err

    @pytest.mark.parametrize("text", [
        SMOKE.replace("N1 = [16]", "N1 = []"),
        SMOKE + "bogus = 1\n",
        SMOKE.replace("seed = 7", "seed = -1"),
        "kind = [",
        SMOKE.replace('"bilinear-sweep"', '"nonsense"'),
    ])
    def test_invalid_configs(self, tmp_path, text):
        cfg = write(tmp_path, text)
        assert main(["bilinear-sweep", "--config", cfg, "--out", str(tmp_path / "o.csv")]) \
            == EXIT_CONFIG

    def test_kind_mismatch(self, tmp_path):
        cfg = write(tmp_path, SMOKE)
        assert main(["decay", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_no_pairs(self):
        cfg = ExperimentConfig("bilinear-sweep", {"lambda": [4], "N1": [2], "N2": [4]})
        with pytest.raises(ConfigError):
            expand_cells(cfg)

    def test_grid_order(self):
        cfg = ExperimentConfig.from_dict({"kind": "bilinear-sweep",
                                          "grid": {"lambda": [2, 4], "N1": [8, 16], "N2": [2],
                                                   "draws": 2}})
        cells = expand_cells(cfg)
        assert [(c["lam"], c["N1"], c["draw"]) for c in cells][:3] == [(2, 8, 0), (2, 8, 1),
                                                                       (2, 16, 0)]


class TestRun:
    def test_smoke(self, tmp_path):
        out = tmp_path / "smoke.csv"
        assert main(["bilinear-sweep", "--config", write(tmp_path, SMOKE), "--out", str(out)]) \
            == EXIT_OK
        rows = rows_of(out)
        assert len(rows) == 1
        r = rows[0]
        assert r["status"] == "ok" and r["seconds"] == ""
        assert 0 < float(r["ratio"]) < float("inf")
        side = json.loads(summary_path(out).read_text())
        assert side["rows"] == 1 and side["failed_rows"] == 0

    def test_byte_identical_rerun(self, tmp_path):
        cfg = write(tmp_path, PAIR)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert main(["bilinear-sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        assert summary_path(a).read_bytes() == summary_path(b).read_bytes()

    def test_workers_do_not_change_output(self, tmp_path):
        cfg = write(tmp_path, PAIR)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["bilinear-sweep", "--config", cfg, "--out", str(a)]) == EXIT_OK
        assert main(["bilinear-sweep", "--config", cfg, "--out", str(b), "--workers", "2"]) \
            == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, PAIR)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["bilinear-sweep", "--config", cfg, "--out", str(a), "--seed", "11"])
        main(["bilinear-sweep", "--config", cfg, "--out", str(b), "--seed", "12"])
        assert a.read_bytes() != b.read_bytes()
        assert main(["bilinear-sweep", "--config", cfg, "--out", str(b), "--seed", "11"]) \
            == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_timings_fill_seconds(self, tmp_path):
        out = tmp_path / "t.csv"
        main(["bilinear-sweep", "--config", write(tmp_path, SMOKE), "--out", str(out),
              "--timings"])
        assert float(rows_of(out)[0]["seconds"]) >= 0

    def test_resource_refusal(self, tmp_path, capsys):
        text = SMOKE.replace("seed = 7", "seed = 7\nmax_work = 10.0")
        cfg = write(tmp_path, text)
        out = tmp_path / "never.csv"
        assert main(["bilinear-sweep", "--config", cfg, "--out", str(out)]) == EXIT_RESOURCE
        assert "estimated work" in capsys.readouterr().err
        assert not out.exists()

    def test_abort_recorded_and_exit_code(self, tmp_path, monkeypatch):
        def boom(cell, rng):
            raise NumericalAbort("sup|u| grew")
        monkeypatch.setitem(sweep._RUNNERS, "bilinear-sweep", boom)
        out = tmp_path / "abort.csv"
        assert main(["bilinear-sweep", "--config", write(tmp_path, SMOKE), "--out", str(out)]) \
            == EXIT_ABORT
        assert rows_of(out)[0]["status"].startswith("abort")

    def test_row_errors_do_not_stop_the_run(self, tmp_path):
        # on L = 4 the xi = 1/4 sites wrap before T = 1; the run still writes rows
        text = PAIR + "[geometry]\nbox_length = 4.0\n"
        out = tmp_path / "err.csv"
        assert main(["bilinear-sweep", "--config", write(tmp_path, text), "--out", str(out)]) \
            == EXIT_OK
        rows = rows_of(out)
        assert len(rows) == 4 and all(r["status"].startswith("error") for r in rows)


class TestOtherKinds:
    def test_measure(self, tmp_path):
        text = ('kind = "measure-sweep"\nseed = 1\n[grid]\nlambda = [1, 4]\nN1 = [8]\n'
                'N2 = [2]\ndraws = 200\n')
        out = tmp_path / "m.csv"
        assert main(["measure-sweep", "--config", write(tmp_path, text), "--out", str(out)]) \
            == EXIT_OK
        side = json.loads(summary_path(out).read_text())
        assert side["rows"] == 2 and side["spread_max_over_median"] >= 1

    def test_extremizer(self, tmp_path):
        text = ('kind = "extremizer"\n[grid]\ncase = "torus-1d"\nlambda = [2, 4]\n'
                'N1 = [8]\nN2 = [1]\n')
        out = tmp_path / "e.csv"
        assert main(["extremizer", "--config", write(tmp_path, text), "--out", str(out)]) \
            == EXIT_OK
        side = json.loads(summary_path(out).read_text())
        assert 0 < side["ladder_stability"] <= 1

    def test_imethod(self, tmp_path):
        text = ('kind = "imethod"\n[grid]\ns = [0.7]\nN = [1, 2, 4]\n'
                '[geometry]\nbox_length = 1.0\nhorizon = 0.05\n')
        out = tmp_path / "i.csv"
        assert main(["imethod", "--config", write(tmp_path, text), "--out", str(out)]) \
            == EXIT_OK
        assert len(rows_of(out)) == 3

    def test_decay_with_figures(self, tmp_path):
        text = ('kind = "decay"\n[grid]\nlambda = 4\nN1 = 8\nN2 = 1\nT = [10, 100, 1000]\n'
                '[geometry]\nbox_length = 32768.0\ngrid_points = 131072\n')
        out = tmp_path / "d.csv"
        assert main(["decay", "--config", write(tmp_path, text), "--out", str(out),
                     "--figures"]) == EXIT_OK
        assert (tmp_path / "d_decay.png").stat().st_size > 0
        side = json.loads(summary_path(out).read_text())
        assert side["decay_max_drift"] <= 4


def test_console_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run([sys.executable, "-m", "waveguide_lab.cli", "bilinear-sweep",
                           "--config", write(tmp_path, SMOKE), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
