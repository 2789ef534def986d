import copy
import json
import subprocess
import sys

import numpy as np
import pytest

from grf_tomo import ConfigError, load_config
from grf_tomo import cli
from grf_tomo.config import from_dict, preset_path


def base_config():
    return {
        "geometry": {"radius": 10.0},
        "kernel": {"half_width": 2.5, "exponent": 3},
        "noise": {"seed": 11},
        "experiment": {
            "center": [2.7, -3.1, 0.8],
            "offsets": [[2.159, 3.075, -0.418], [2.546, -2.974, 0.983],
                        [0.0, 0.0, 0.0]],
            "detector_step": 0.05,
            "n_views": 500,
            "realizations": 64,
            "bins": 5,
        },
    }


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(autouse=True)
def quiet_smoothness_warning():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


class TestConfigValidation:
    def test_bundled_presets_load(self):
        for name in ("paper", "ci"):
            cfg = load_config(preset_path(name))
            assert cfg.n_views == 500
            assert cfg.offsets.shape == (3, 3)

    def test_malformed_json_reports_byte_offset(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"geometry": {')
        with pytest.raises(ConfigError, match="byte offset"):
            load_config(str(path))

    def test_missing_field_names_path(self):
        data = base_config()
        del data["geometry"]["radius"]
        with pytest.raises(ConfigError, match="geometry.radius"):
            from_dict(data)

    def test_nonpositive_step_rejected(self):
        data = base_config()
        data["experiment"]["detector_step"] = 0.0
        with pytest.raises(ConfigError, match="experiment.detector_step"):
            from_dict(data)

    def test_view_step_consistency(self):
        data = base_config()
        data["experiment"]["view_step"] = 2.0 * np.pi / 500 + 1e-9
        with pytest.raises(ConfigError, match="view_step"):
            from_dict(data)
        data["experiment"]["view_step"] = 2.0 * np.pi / 500
        assert from_dict(data).n_views == 500

    def test_inadmissible_offset_rejected(self):
        data = base_config()
        data["experiment"]["offsets"] = [[200.0, 0.0, 0.0]]
        data["experiment"]["detector_step"] = 1.0
        with pytest.raises(ConfigError, match="offsets"):
            from_dict(data)

    def test_bad_kernel_rejected(self):
        data = base_config()
        data["kernel"]["half_width"] = -2.0
        with pytest.raises(ConfigError, match="kernel.half_width"):
            from_dict(data)

    def test_smoothness_warning_fires(self):
        import warnings

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            from_dict(base_config())
        assert any("smoothness" in str(w.message) for w in caught)

    def test_replace_overrides(self):
        cfg = from_dict(base_config())
        other = cfg.replace(seed=99, realizations=128)
        assert other.seed == 99 and other.noise.seed == 99
        assert other.realizations == 128
        assert cfg.seed == 11


class TestCli:
    def test_predict_single_offset(self, tmp_path):
        data = base_config()
        data["experiment"]["offsets"] = [[0.0, 0.0, 0.0]]
        path = write_config(tmp_path, data)
        out = tmp_path / "out"
        assert cli.main(["predict", "--config", path, "--out", str(out)]) == 0
        payload = json.loads((out / "cov_pred.json").read_text())
        assert np.asarray(payload["matrix"]).shape == (1, 1)
        assert abs(payload["variance"] - 0.485) < 0.002
        manifest = json.loads((out / "manifest.json").read_text())
        assert "cov_pred.json" in manifest["outputs"]
        assert "cov_pred.csv" in manifest["outputs"]

    def test_simulate_outputs_and_thread_independence(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["simulate", "--config", path, "--out", str(out1),
                         "--threads", "1"]) == 0
        assert cli.main(["simulate", "--config", path, "--out", str(out2),
                         "--threads", "4"]) == 0
        names = ["stats.json", "hist1d_0.csv", "hist1d_1.csv", "hist1d_2.csv",
                 "hist2d.csv"]
        for name in names:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        stats = json.loads((out1 / "stats.json").read_text())
        assert stats["n_realizations"] == 64
        assert len(stats["sample_variance"]) == 3

    def test_predict_covariance_scan(self, tmp_path):
        data = base_config()
        data["checks"] = {"covariance_scan": {"direction": [1.0, 0.0, 0.0],
                                              "radii": [0.0, 1.0, 2.0]}}
        path = write_config(tmp_path, data)
        out = tmp_path / "scan"
        assert cli.main(["predict", "--config", path, "--out", str(out)]) == 0
        lines = (out / "cov_scan.csv").read_text().strip().splitlines()
        assert lines[0] == "radius,covariance"
        assert len(lines) == 4
        # the scan starts at the center value
        assert abs(float(lines[1].split(",")[1]) - 0.485) < 0.002

    def test_simulate_stats_include_histograms(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "h"
        assert cli.main(["simulate", "--config", path, "--out", str(out)]) == 0
        stats = json.loads((out / "stats.json").read_text())
        assert set(stats["histograms"]) == {"offset_0", "offset_1", "offset_2",
                                            "first_pair"}
        one = stats["histograms"]["offset_0"]
        assert len(one["edges"]) == len(one["observed_density"]) + 1

    def test_simulate_realizations_override(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "o"
        assert cli.main(["simulate", "--config", path, "--out", str(out),
                         "--realizations", "32"]) == 0
        stats = json.loads((out / "stats.json").read_text())
        assert stats["n_realizations"] == 32

    def test_check_outputs(self, tmp_path):
        data = base_config()
        data["checks"] = {"ellipse_samples": 500, "degeneracy_samples": 20000,
                          "hessian_resolution": 1000}
        path = write_config(tmp_path, data)
        out = tmp_path / "c"
        assert cli.main(["check", "--config", path, "--out", str(out)]) == 0
        report = json.loads((out / "checks.json").read_text())
        assert report["radon2d_root_count"] == 2
        assert report["weyl"]["slope"] <= -1.0 / 3.0 + 0.1
        assert not report["hessian_scans"][0]["degenerate"]
        assert (out / "weyl.csv").exists()

    def test_check_flags_source_plane_point(self, tmp_path):
        data = base_config()
        data["checks"] = {"ellipse_samples": 100,
                          "hessian_points": [[1.0, 1.0, 0.0]],
                          "hessian_resolution": 1000}
        path = write_config(tmp_path, data)
        out = tmp_path / "flag"
        assert cli.main(["check", "--config", path, "--out", str(out)]) == 0
        report = json.loads((out / "checks.json").read_text())
        entry = report["hessian_scans"][0]
        assert entry["degenerate"] is True
        assert "x3 = 0" in entry["message"]

    def test_malformed_config_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert cli.main(["predict", "--config", str(path),
                         "--out", str(tmp_path / "x")]) == 2

    def test_numerical_error_exits_3(self, tmp_path):
        data = base_config()
        data["prediction"] = {"panels": 1, "tolerance": 1e-300}
        path = write_config(tmp_path, data)
        assert cli.main(["predict", "--config", path,
                         "--out", str(tmp_path / "n")]) == 3

    def test_assert_mode_exit_codes(self, tmp_path):
        data = base_config()
        data["assertions"] = {"predict": {"variance": [99.0, 1e-4]}}
        path = write_config(tmp_path, data)
        out = tmp_path / "fail"
        assert cli.main(["predict", "--config", path, "--out", str(out)]) == 0
        assert cli.main(["predict", "--config", path, "--out", str(out),
                         "--assert"]) == 4

    def test_console_script_version(self):
        result = subprocess.run([sys.executable, "-m", "grf_tomo.cli", "--version"],
                                capture_output=True, text=True)
        assert result.returncode == 0
