"""End-to-end: drive the simulation CLI, then render from its output
directory. Talks to the primary package only through its command line and
file formats."""

import json
import shutil
import subprocess

import pytest

from vibrofigures.cli import main

HAVE_SIM = shutil.which("vibrocontrol") is not None

pytestmark = pytest.mark.skipif(not HAVE_SIM, reason="vibrocontrol CLI not installed")


def sim_run(tmp_path, name, experiment, extra=None):
    cfg = {"experiment": experiment, "grid": {"preset": "smoke"},
           "output_dir": str(tmp_path / "runs" / name)}
    cfg.update(extra or {})
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    proc = subprocess.run(["vibrocontrol", "run", "--config", str(path)],
                          capture_output=True, text=True, timeout=1800)
    assert proc.returncode == 0, proc.stderr
    return tmp_path / "runs" / name


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("e2e")
    sim_run(tmp_path, "sweep", {
        "kind": "chirp_sweep", "engine": "twolevel",
        "parameters": {"nu_i": 0, "nu_f": 2, "n_cycles": 80,
                       "intensity_w_cm2": 1e13,
                       "a_values": [-1.7, -1.5, -1.3, -1.1, -0.9, -0.7]}})
    sim_run(tmp_path, "train", {
        "kind": "train", "engine": "twolevel",
        "parameters": {"nu_i": 0, "nu_f": 2, "n_pulses": 6,
                       "cycles_per_pulse": 10, "gap_cycles": 1.0,
                       "intensity_w_cm2": 1e13, "chirp_a": -1.21}})
    sim_run(tmp_path, "focal", {
        "kind": "focal_average", "engine": "twolevel",
        "parameters": {"transition": [0, 2], "n_cycles": 80,
                       "I_peak_w_cm2": 1e13, "n_rings": 8}})
    return tmp_path / "runs"


def test_render_from_real_run_directory(run_dir):
    rc = main([str(run_dir)])
    assert rc == 0
    out = run_dir / "figures"
    assert (out / "chirp.png").exists()
    assert (out / "fig5.png").exists()
    assert (out / "fig6.png").exists()
