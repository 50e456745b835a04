import csv
import json

import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from vortexlab import cli, config
from vortexlab.errors import ConfigError

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example.ini"

MINI_CONFIG = """\
[device]
w_um = 3.0
t_nm = 24.0
length_um = 400.0
xi_nm = 7.0
lambda_L_um = 4.0
f_r_GHz = 7.572
Z_r_ohm = 3000.0

[qrm]
f_r_GHz = 7.572
g_MHz = 92.5
gamma_GHz_per_mT = 20.0
B0_uT = 128.0
f_q0_GHz = 2.0
n_fock = 20

[jumps]
T_up_us = 570.0
T_down_us = 135.0
sigma_cloud = 1.0
separation_sigma = 6.0
spacing_us = 5.0
tau_m_us = 1.2
duration_s = 0.25
seed = 7

[sweep]
B_min_uT = 68.0
B_max_uT = 188.0
n_points = 9
"""


@pytest.fixture()
def mini_config(tmp_path):
    path = tmp_path / "mini.ini"
    path.write_text(MINI_CONFIG)
    return path


def read_csv(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


class TestConfig:
    def test_loads_example(self):
        cfg = config.load_config(CONFIG)
        dev = cfg.device()
        assert dev.w == pytest.approx(3e-6)
        params, trunc = cfg.qrm()
        assert params.g == pytest.approx(92.5e6)
        assert trunc.n_fock == 60
        sites = cfg.sites()
        assert len(sites) == 2
        assert sites[0].x_i == pytest.approx(985e-9)

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[device]\nw = 3.0\n")  # missing unit suffix
        with pytest.raises(ConfigError):
            config.load_config(bad)

    def test_unknown_section_rejected(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[nonsense]\nx_nm = 1.0\n")
        with pytest.raises(ConfigError):
            config.load_config(bad)

    def test_incomplete_site_rejected(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[pinning]\nsite1_x_nm = 10.0\n")
        with pytest.raises(ConfigError):
            config.load_config(bad)

    def test_seed_env_override(self, mini_config):
        cfg = config.load_config(mini_config)
        assert cfg.seed(None) == 7
        assert cfg.seed("123") == 123
        with pytest.raises(ConfigError):
            cfg.seed("not-a-number")

    def test_tunnel_model_curvature(self):
        cfg = config.load_config(CONFIG)
        model = cfg.tunnel_model()
        site = cfg.sites()[0]
        from vortexlab.constants import CONSTANTS
        expected = 4 * site.V_i * (4e-9) ** 2 / (CONSTANTS.hbar * site.sigma_i**2)
        assert model.Omega == pytest.approx(expected, rel=1e-12)


class TestScales:
    def test_writes_threshold(self, mini_config, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["scales", "-c", str(mini_config), "-o", str(out)]) == 0
        header, rows = read_csv(out / "scales.csv")
        value = float(rows[0][header.index("phi_S")])
        assert value == pytest.approx(3.57, abs=0.01)

    def test_golden_bytes(self, mini_config, tmp_path):
        # the CSV byte format (repr floats, comma, LF) is a contract
        out = tmp_path / "out"
        cli.main(["scales", "-c", str(mini_config), "-o", str(out)])
        expected = (
            "Lambda_mm,eps0_J,eps0_over_h_THz,phi_S,B_S_uT\n"
            "1.333333333333333,4.0616529378496443e-22,0.612980672691738,"
            "3.570720543222817,820.4063114082786\n")
        assert (out / "scales.csv").read_text() == expected

    def test_manifest_lists_outputs_with_hashes(self, mini_config, tmp_path):
        out = tmp_path / "out"
        cli.main(["scales", "-c", str(mini_config), "-o", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert "scales.csv" in manifest["outputs"]
        import hashlib
        digest = hashlib.sha256((out / "scales.csv").read_bytes()).hexdigest()
        assert manifest["outputs"]["scales.csv"] == digest
        assert manifest["seed"] == 7


class TestChiSweep:
    def test_chi_column_dips_at_sweet_spot(self, mini_config, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["chi", "-c", str(mini_config), "-o", str(out),
                         "--workers", "2"]) == 0
        header, rows = read_csv(out / "chi.csv")
        chi = np.array([float(r[header.index("chi_MHz")]) for r in rows])
        assert np.all(chi < 0)
        interior_min = int(np.argmin(chi))
        assert 0 < interior_min < chi.size - 1  # non-monotonic in field

    def test_empty_sweep_exits_one(self, tmp_path):
        conf = tmp_path / "c.ini"
        conf.write_text(MINI_CONFIG.replace("n_points = 9", "n_points = 0"))
        out = tmp_path / "out"
        assert cli.main(["chi", "-c", str(conf), "-o", str(out)]) == 1


class TestDeterminism:
    def test_byte_identical_outputs(self, mini_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert cli.main(["synth-jumps", "-c", str(mini_config),
                             "-o", str(out)]) == 0
        assert (out1 / "trajectory.csv").read_bytes() == \
            (out2 / "trajectory.csv").read_bytes()

    def test_seed_env_changes_output(self, mini_config, tmp_path,
                                     monkeypatch):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["synth-jumps", "-c", str(mini_config), "-o", str(out1)])
        monkeypatch.setenv("VORTEXLAB_SEED", "99")
        cli.main(["synth-jumps", "-c", str(mini_config), "-o", str(out2)])
        assert (out1 / "trajectory.csv").read_bytes() != \
            (out2 / "trajectory.csv").read_bytes()


class TestJumpsPipeline:
    def test_synth_then_analyze(self, mini_config, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["synth-jumps", "-c", str(mini_config),
                         "-o", str(out)]) == 0
        assert cli.main(["analyze-jumps", "-c", str(mini_config),
                         "-o", str(out),
                         "--data", str(out / "trajectory.csv")]) == 0
        result = json.loads((out / "jumps_analysis.json").read_text())
        assert 50 < result["T1_us"] < 200
        assert 0.1 < result["P_e"] < 0.3
        assert result["T_eff_mK"] is not None


class TestFitCommands:
    def test_fit_decay_json(self, tmp_path):
        t = np.linspace(0, 1000, 80)  # us
        v = 0.9 * np.exp(-t / 186.0) + 0.05
        data = tmp_path / "decay.csv"
        with open(data, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_us", "value"])
            w.writerows(zip(t, v))
        out = tmp_path / "out"
        assert cli.main(["fit-decay", "--data", str(data),
                         "-o", str(out)]) == 0
        result = json.loads((out / "fit_decay.json").read_text())
        assert result["params"]["T_us"] == pytest.approx(186.0, rel=1e-4)
        assert result["converged"]

    def test_fit_ramsey_csv_format(self, tmp_path):
        t = np.linspace(0, 2.0, 300)  # us
        v = np.exp(-t / 0.44) * (0.4 * np.cos(2 * np.pi * 5 * t)
                                 + 0.4 * np.cos(2 * np.pi * 7 * t)) + 0.5
        data = tmp_path / "ramsey.csv"
        with open(data, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_us", "value"])
            w.writerows(zip(t, v))
        out = tmp_path / "out"
        assert cli.main(["fit-ramsey", "--data", str(data), "-o", str(out),
                         "--format", "csv"]) == 0
        header, rows = read_csv(out / "fit_ramsey.csv")
        beat = float(rows[0][header.index("params.f_beat_MHz")])
        assert beat == pytest.approx(2.0, rel=0.02)

    def test_fit_spectrum(self, mini_config, tmp_path):
        from vortexlab import rabi
        params = rabi.QrmParams.asymmetric(7.572e9, 92.5e6, 20e12, 128e-6,
                                           2e9)
        trunc = rabi.HilbertTruncation(20)
        qubit = tmp_path / "q.csv"
        resonator = tmp_path / "r.csv"
        with open(qubit, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["B_uT", "f_GHz", "sigma_GHz"])
            for B in np.linspace(28e-6, 228e-6, 9):
                spec = rabi.solve_qrm(params, B, trunc)
                w.writerow([B * 1e6, spec.f_q_dressed / 1e9, 1e-3])
        with open(resonator, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["B_uT", "f_GHz", "sigma_GHz"])
            for B in np.linspace(-62e-6, 328e-6, 9):
                spec = rabi.solve_qrm(params, B, trunc)
                w.writerow([B * 1e6, spec.f_r_g / 1e9, 2e-4])
        out = tmp_path / "out"
        assert cli.main(["fit-spectrum", "-c", str(mini_config),
                         "--qubit", str(qubit), "--resonator", str(resonator),
                         "-o", str(out)]) == 0
        result = json.loads((out / "fit_spectrum.json").read_text())
        assert result["params"]["g_MHz"] == pytest.approx(92.5, rel=1e-3)
        assert result["params"]["B0_uT"] == pytest.approx(128.0, rel=1e-3)


class TestBatchFit:
    @staticmethod
    def _write_dataset(path: Path, B0_uT: float, phi_ratio: float):
        B = np.linspace(B0_uT - 100, B0_uT + 100, 15)
        f = np.sqrt(2.0**2 + (20.0 * (B - B0_uT) * 1e-3) ** 2)
        with open(path, "w", newline="") as fh:
            fh.write(f"# phi_over_phi_S = {phi_ratio}\n")
            w = csv.writer(fh)
            w.writerow(["B_uT", "f_GHz"])
            w.writerows(zip(B, f))

    def test_directory_of_datasets(self, tmp_path):
        data_dir = tmp_path / "sets"
        data_dir.mkdir()
        for i in range(5):
            self._write_dataset(data_dir / f"run{i}.csv", 100.0 + 10 * i,
                                0.5 + 0.1 * i)
        out = tmp_path / "out"
        assert cli.main(["batch-fit", "--data-dir", str(data_dir),
                         "-o", str(out)]) == 0
        header, rows = read_csv(out / "batch_fit.csv")
        assert len(rows) == 5
        for i, row in enumerate(rows):
            assert row[header.index("converged")] == "True"
            b0 = float(row[header.index("B0_uT")])
            assert b0 == pytest.approx(100.0 + 10 * i, rel=0.01)
            gamma = float(row[header.index("gamma_GHz_per_mT")])
            assert gamma == pytest.approx(20.0, rel=0.01)
            assert float(row[header.index("phi_over_phi_S")]) == \
                pytest.approx(0.5 + 0.1 * i)

    def test_corrupt_file_keeps_going(self, tmp_path):
        data_dir = tmp_path / "sets"
        data_dir.mkdir()
        for i in range(4):
            self._write_dataset(data_dir / f"run{i}.csv", 120.0, 1.0)
        (data_dir / "broken.csv").write_text("B_uT,f_GHz\nnot,numbers\n")
        out = tmp_path / "out"
        assert cli.main(["batch-fit", "--data-dir", str(data_dir),
                         "-o", str(out)]) == 0
        header, rows = read_csv(out / "batch_fit.csv")
        assert len(rows) == 5
        flags = [row[header.index("converged")] for row in rows]
        assert flags.count("True") == 4
        assert flags.count("False") == 1

    def test_empty_directory_exits_one(self, tmp_path):
        data_dir = tmp_path / "empty"
        data_dir.mkdir()
        out = tmp_path / "out"
        assert cli.main(["batch-fit", "--data-dir", str(data_dir),
                         "-o", str(out)]) == 1


class TestOtherSubcommands:
    def test_spectrum(self, mini_config, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["spectrum", "-c", str(mini_config),
                         "-o", str(out)]) == 0
        header, rows = read_csv(out / "spectrum.csv")
        assert header == ["B_uT", "f_q_GHz", "f_r_g_GHz", "f_r_e_GHz",
                          "chi_MHz"]
        assert len(rows) == 9

    def test_landscape(self, mini_config, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["landscape", "-c", str(mini_config), "-o", str(out),
                         "--field-ut", "400", "--points", "64"]) == 0
        header, rows = read_csv(out / "landscape.csv")
        assert header == ["x_nm", "y_nm", "V_over_eps0", "V_GHz"]
        # strip edges carry zero baseline energy
        assert float(rows[0][2]) == pytest.approx(0.0, abs=1e-9)

    def test_gamma_map(self, mini_config, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["gamma-map", "-c", str(mini_config), "-o", str(out),
                         "--n-delta", "5", "--n-xbar", "5"]) == 0
        header, rows = read_csv(out / "gamma_map.csv")
        assert len(rows) == 25

    def test_pair(self, mini_config, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["pair", "-c", str(mini_config), "-o", str(out),
                         "--x1-um", "1.5", "--y1-um", "0.0",
                         "--x2-um", "1.5", "--y2-um", "3.0"]) == 0
        result = json.loads((out / "pair.json").read_text())
        assert result["G2_over_eps0"] == pytest.approx(0.1730, abs=1e-3)

    def test_tunnel(self, tmp_path):
        conf = tmp_path / "c.ini"
        conf.write_text(MINI_CONFIG + """
[pinning]
site1_x_nm = 985.0
site1_V_GHz = 150.0
site1_sigma_nm = 8.0
site2_x_nm = 1015.0
site2_V_GHz = 150.0
site2_sigma_nm = 8.0

[tunneling]
grid_points = 256
x_min_nm = 880.0
x_max_nm = 1120.0
y_zpf_nm = 4.0
k_levels = 3
""".replace("B_min_uT = 68.0", "")
            + "")
        # narrow three-point field scan near the alignment field
        conf.write_text(conf.read_text().replace(
            "B_min_uT = 68.0", "B_min_uT = 180.0").replace(
            "B_max_uT = 188.0", "B_max_uT = 220.0").replace(
            "n_points = 9", "n_points = 3"))
        out = tmp_path / "out"
        assert cli.main(["tunnel", "-c", str(conf), "-o", str(out)]) == 0
        header, rows = read_csv(out / "tunnel.csv")
        assert header == ["B_uT", "f_q_GHz", "E0_GHz", "E1_GHz"]
        assert len(rows) == 3

    def test_fit_echo(self, tmp_path):
        t = np.linspace(0, 6.0, 60)  # us
        v = 0.5 * np.exp(-t / 1.2) + 0.05
        data = tmp_path / "echo.csv"
        with open(data, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_us", "value"])
            w.writerows(zip(t, v))
        out = tmp_path / "out"
        assert cli.main(["fit-echo", "--data", str(data), "-o", str(out)]) == 0
        result = json.loads((out / "fit_echo.json").read_text())
        assert result["params"]["T_us"] == pytest.approx(1.2, rel=1e-3)

    def test_fit_rabi(self, tmp_path):
        rows = []
        for amp_uv in (4.0, 8.0, 16.0):
            t = np.linspace(0, 2.0, 150)  # us
            v = 0.5 - 0.5 * np.cos(2 * np.pi * amp_uv * t)  # 1 MHz per uV
            rows += [[amp_uv, ti, vi] for ti, vi in zip(t, v)]
        data = tmp_path / "rabi.csv"
        with open(data, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["amplitude_uV", "t_us", "value"])
            w.writerows(rows)
        out = tmp_path / "out"
        assert cli.main(["fit-rabi", "--data", str(data), "-o", str(out)]) == 0
        result = json.loads((out / "fit_rabi.json").read_text())
        assert result["params"]["slope_MHz_per_uV"] == pytest.approx(1.0,
                                                                     rel=0.01)


class TestExitCodes:
    def test_usage_error_is_one(self):
        assert cli.main(["no-such-command"]) == 1

    def test_missing_config_is_one(self, tmp_path):
        assert cli.main(["scales", "-c", str(tmp_path / "missing.ini"),
                         "-o", str(tmp_path / "out")]) == 1

    def test_numerical_error_is_two(self, mini_config, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["analyze-jumps", "-c", str(mini_config),
                         "-o", str(out),
                         "--data", str(tmp_path / "nothing.csv")])
        assert code == 2
        report = json.loads((out / "error.json").read_text())
        assert "error" in report


def test_console_entry_point(tmp_path):
    conf = tmp_path / "c.ini"
    conf.write_text(MINI_CONFIG)
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "vortexlab.cli", "scales", "-c", str(conf),
         "-o", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (out / "scales.csv").exists()
