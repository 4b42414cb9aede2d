import os

import pytest

from elastic_flow import geometry
from elastic_flow.cli import main

SIMULATE_CFG = """
[flow]
epsilon = 0.1
n = 64
dt = 1e-3
t_end = 0.01

[initial]
family = flattened_sine
amplitude = 0.05
"""

SWEEP_CFG = """
[flow]
epsilon = 0.1
n = 64
dt = 1e-3
t_end = 0.01

[sweep]
epsilons = 0.2, 0.1
delta = 0.0
k_max = 1

[initial]
family = flattened_sine
amplitude = 0.05
"""


@pytest.fixture
def cfg_file(tmp_path):
    def write(content, name="run.cfg"):
        path = tmp_path / name
        path.write_text(content)
        return str(path)

    return write


class TestSimulate:
    def test_writes_outputs(self, tmp_path, cfg_file, capsys):
        out = tmp_path / "out"
        code = main(
            ["simulate", "-c", cfg_file(SIMULATE_CFG), "-o", str(out), "--stride", "5"]
        )
        assert code == 0
        names = sorted(os.listdir(out))
        assert "diagnostics.csv" in names
        assert sum(n.startswith("snapshot_") for n in names) == 3  # steps 0, 5, 10

    def test_rerun_byte_identical(self, tmp_path, cfg_file):
        cfg = cfg_file(SIMULATE_CFG)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "-c", cfg, "-o", str(out_a)]) == 0
        assert main(["simulate", "-c", cfg, "-o", str(out_b)]) == 0
        for name in sorted(os.listdir(out_a)):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_sweep_config_rejected(self, tmp_path, cfg_file, capsys):
        code = main(
            ["simulate", "-c", cfg_file(SWEEP_CFG), "-o", str(tmp_path / "x")]
        )
        assert code == 2
        assert "sweep" in capsys.readouterr().err

    def test_bad_config_reports_key(self, tmp_path, cfg_file, capsys):
        code = main(
            ["simulate", "-c", cfg_file("epsilon = 2.0\n"), "-o", str(tmp_path / "x")]
        )
        assert code == 2
        assert "epsilon" in capsys.readouterr().err


class TestSweep:
    def test_writes_report_pair(self, tmp_path, cfg_file):
        out = tmp_path / "out"
        code = main(["sweep", "-c", cfg_file(SWEEP_CFG), "-o", str(out)])
        assert code == 0
        assert sorted(os.listdir(out)) == ["report.json", "report.txt"]

    def test_flow_config_rejected(self, tmp_path, cfg_file, capsys):
        code = main(["sweep", "-c", cfg_file(SIMULATE_CFG), "-o", str(tmp_path / "x")])
        assert code == 2


class TestVerify:
    def test_filtered_verify_passes_and_writes_report(self, tmp_path, capsys):
        code = main(["verify", "--filter", "gronwall", "--seed", "3", "-o", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "gronwall" in out
        assert (tmp_path / "verify_report.txt").exists()

    def test_corrupted_stencil_fails(self, capsys):
        # a biased curvature stencil puts a dt-independent offset into the
        # dissipation identity, so its Richardson slope collapses
        geometry.set_stencil_corruption(0.05)
        try:
            code = main(["verify", "--filter", "dissipation", "--seed", "3"])
        finally:
            geometry.set_stencil_corruption(0.0)
        assert code != 0

    def test_same_seed_byte_identical_reports(self, capsys):
        assert main(["verify", "--filter", "gronwall", "--seed", "11"]) == 0
        first = capsys.readouterr().out
        assert main(["verify", "--filter", "gronwall", "--seed", "11"]) == 0
        second = capsys.readouterr().out
        assert first == second
