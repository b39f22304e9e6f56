import json
from pathlib import Path

import numpy as np
import pytest

import wireldos as w
from wireldos.cli import main
from wireldos.config import config_from_dict, load_config
from wireldos.errors import ConfigError

BASE = """
[spectral]
lambda_um = 1.0

[background]
kind = "homogeneous"
eps1 = 2.0

[guide]
shape = "circle"
radius_um = 0.02

[guide.material]
kind = "constant"
eps = [-50.0, 3.85]

[mesh]
h_um = 0.004

[emitter]
orientation = "radial"
distances_nm = [30.0]

[band]
kmax_over_k0 = 3.2
"""


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_and_resolve(tmp_path):
    cfg = load_config(_write(tmp_path, BASE))
    assert cfg.sp.lambda_um == 1.0
    assert cfg.cs.radius == 0.02
    assert cfg.cs.material.eps == -50 + 3.85j
    assert cfg.distances_nm == (30.0,)
    assert cfg.resolved["guide"]["material"]["eps"] == [-50.0, 3.85]


def test_json_config_equivalent(tmp_path):
    cfg1 = load_config(_write(tmp_path, BASE))
    as_json = json.dumps({
        "spectral": {"lambda_um": 1.0},
        "background": {"kind": "homogeneous", "eps1": 2.0},
        "guide": {"shape": "circle", "radius_um": 0.02,
                  "material": {"kind": "constant", "eps": [-50.0, 3.85]}},
        "mesh": {"h_um": 0.004},
        "emitter": {"orientation": "radial", "distances_nm": [30.0]},
        "band": {"kmax_over_k0": 3.2},
    })
    cfg2 = load_config(_write(tmp_path, as_json, "run.json"))
    assert cfg1.resolved == cfg2.resolved


def test_unknown_key_rejected(tmp_path):
    bad = BASE.replace('kmax_over_k0 = 3.2', 'kmax_over_k0 = 3.2\nepss = 1.0')
    with pytest.raises(ConfigError, match="epss"):
        load_config(_write(tmp_path, bad))
    with pytest.raises(ConfigError, match="unknown section"):
        config_from_dict({"spectral": {"lambda_um": 1.0}, "bogus": {}})


def test_missing_required(tmp_path):
    with pytest.raises(ConfigError, match="spectral"):
        config_from_dict({"background": {"eps1": 1.0}})
    with pytest.raises(ConfigError, match="mesh"):
        config_from_dict({"spectral": {"lambda_um": 1.0},
                          "guide": {"shape": "circle", "radius_um": 0.02,
                                    "material": {"kind": "constant", "eps": 1.0}},
                          "emitter": {"distances_nm": [30.0]}})


def test_cli_exit_codes(tmp_path):
    assert main(["spectrum"]) == 2                       # missing --config
    bad = _write(tmp_path, BASE + "\n[run]\nbogus = 1\n")
    assert main(["spectrum", "--config", str(bad)]) == 2  # unknown key


def test_cli_spectrum_deterministic(tmp_path):
    cfg = _write(tmp_path, BASE)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out1),
                 "--workers", "1"]) == 0
    assert main(["spectrum", "--config", str(cfg), "--out", str(out2),
                 "--workers", "2"]) == 0

    def rows(p):
        return [ln for ln in (p / "spectrum.csv").read_text().splitlines()
                if not ln.startswith("#")]

    assert rows(out1) == rows(out2)   # byte-identical data rows
    header = (out1 / "spectrum.csv").read_text().splitlines()
    assert header[0].startswith("# wireldos")
    assert "lambda_um" in header[1]
    data = np.array([[float(v) for v in ln.split(",")] for ln in rows(out1)[1:]])
    kz, drho = data[:, 0], data[:, 1]
    assert kz[np.argmax(drho)] == pytest.approx(2.28, abs=0.1)


def test_cli_modes_json(tmp_path):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "modes_out"
    assert main(["modes", "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads((out / "modes.json").read_text())
    assert payload["kind"] == "bound"
    assert payload["n_eff"] == pytest.approx(2.29, abs=0.08)
    assert payload["L_spp_um"] is not None
    assert "residual_rms" in payload["fit"]
    assert payload["config"]["mesh"]["h_um"] == 0.004


def test_cli_modes_no_mode_error(tmp_path):
    empty = BASE.replace("eps = [-50.0, 3.85]", "eps = [2.0, 0.0]")
    cfg = _write(tmp_path, empty)
    out = tmp_path / "nomode"
    assert main(["modes", "--config", str(cfg), "--out", str(out)]) == 1
    payload = json.loads((out / "modes.json").read_text())
    assert payload["error"]["type"] == "NoModeError"


def test_cli_rates_zero_contrast(tmp_path):
    empty = BASE.replace("eps = [-50.0, 3.85]", "eps = [2.0, 0.0]")
    cfg = _write(tmp_path, empty)
    out = tmp_path / "rates_out"
    assert main(["rates", "--config", str(cfg), "--out", str(out)]) == 0
    lines = [ln for ln in (out / "rates.csv").read_text().splitlines()
             if not ln.startswith("#")]
    cols = lines[0].split(",")
    row = dict(zip(cols, [float(v) for v in lines[1].split(",")]))
    assert row["gamma_pl"] == 0.0
    assert row["beta"] == 0.0
    assert row["gamma_rad"] == pytest.approx(np.sqrt(2.0), rel=1e-4)


def test_cli_map(tmp_path):
    cfg_text = BASE + "\n[map]\nxmin_um = -0.03\nxmax_um = 0.03\n" \
        "ymin_um = -0.03\nymax_um = 0.03\nnx = 9\nny = 9\nkz_over_k0 = 2.29\n"
    cfg = _write(tmp_path, cfg_text)
    out = tmp_path / "map_out"
    assert main(["map", "--config", str(cfg), "--out", str(out)]) == 0
    lines = [ln for ln in (out / "map.csv").read_text().splitlines()
             if ln and not ln.startswith("#")][1:]
    vals = [ln.split(",") for ln in lines]
    masked = [int(float(v[3])) for v in vals]
    assert any(masked) and not all(masked)
    for v in vals:
        if int(float(v[3])) == 0:
            assert np.isfinite(float(v[2]))


def test_cli_lossless_flag(tmp_path):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "ll"
    assert main(["modes", "--config", str(cfg), "--out", str(out),
                 "--lossless"]) == 0
    payload = json.loads((out / "modes.json").read_text())
    assert payload["config"]["guide"]["material"]["eps"] == [-50.0, 0.0]
    # a lossless bound mode is narrower than any practical grid
    assert payload["flags"] == ["below_linewidth_resolution"] or \
        payload["Gamma_SPP_per_um"] < 0.2
