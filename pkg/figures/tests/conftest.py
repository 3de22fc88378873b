import json
import subprocess
import sys

import pytest

ROBOT_CFG = {
    "family": "unicycle",
    "seed": 3,
    "dt": 2e-3,
    "t_end": 4.0,
    "unicycle": {
        "circles": 2,
        "gains": {"kp": 0.035, "kpl": 0.7, "kvl": 1.0},
        "tau0": 0.1,
        "disturbance": {"target": 0, "amplitude": 2.0, "decay": 0.2},
    },
}

HOPFIELD_CFG = {
    "family": "hopfield",
    "seed": 7,
    "dt": 1e-3,
    "t_end": 5.0,
    "hopfield": {
        "n_neurons": 8,
        "c": 10.0,
        "tau0": 0.5,
        "sampler": {"margin": 6.0, "seed": 5},
        "inputs": {"kind": "uniform", "lo": 0.0, "hi": 3.0},
        "disturbances": {"kind": "pulses", "n_targets": 5, "times": [1.0],
                         "duration": 1.0, "amplitude_lo": 0.0,
                         "amplitude_hi": 10.0},
    },
}


def run_cli(command, cfg, out_dir, extra=()):
    cfg_path = out_dir.parent / f"{out_dir.name}.json"
    cfg_path.write_text(json.dumps(cfg))
    proc = subprocess.run(
        [sys.executable, "-m", "scalenet.expcli", command, str(cfg_path),
         "--out", str(out_dir), "--quiet", *extra],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out_dir


@pytest.fixture(scope="session")
def exports(tmp_path_factory):
    """Primary-CLI outputs shared by the rendering tests."""
    root = tmp_path_factory.mktemp("exports")
    robot = run_cli("simulate", ROBOT_CFG, root / "robot")
    hop = run_cli("simulate", HOPFIELD_CFG, root / "hopfield")
    circle_cfg = dict(ROBOT_CFG, sweep={"axis": "circles", "values": [1, 2]})
    circles = run_cli("sweep", circle_cfg, root / "circles")
    tau_cfg = dict(ROBOT_CFG, sweep={"axis": "tau0", "values": [0.05, 0.1, 0.2]})
    taus = run_cli("sweep", tau_cfg, root / "taus")
    return {"robot": robot, "hopfield": hop, "circles": circles, "taus": taus}
