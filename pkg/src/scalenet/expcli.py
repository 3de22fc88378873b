"""Command-line experiment runner.

Loads a scenario config (YAML or JSON, schema-validated, unknown keys
rejected), builds the requested model family, certifies it, simulates it, and
exports traces/metrics/certificates.  Sweeps run one simulation per value of
the chosen axis and aggregate row-per-value summaries.

Exit codes: 0 success / certificate pass, 1 usage or config error,
2 certificate condition failure (certify command), 3 divergence (simulate).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import yaml
import jsonschema

from .certify import Certificate, bound_envelope, certify
from .errors import ScalenetError, ScenarioError
from .linnet import build_random_linear_network
from .netmodel import (
    DelaySpec,
    NetworkSystem,
    integrate,
    per_agent_deviation,
    write_run_metadata,
    write_trace_csv,
)
from .neuralnet import (
    CGNetwork,
    hopfield_weight_sampler,
    load_weights_csv,
    recurrent_certificate,
    solve_equilibrium,
    to_network_system,
)
from .unicycle import (
    CircleFormation,
    FormationGains,
    LeaderCircle,
    RobotParams,
    SineDecayDisturbance,
    build_circle_scenario,
    formation_certificate,
)

OUT_ENV_VAR = "SCALENET_OUT"
DOMINANCE_TOL = 1e-6

_NUM_OR_PAIR = {"oneOf": [{"type": "number"},
                          {"type": "array", "items": {"type": "number"},
                           "minItems": 2, "maxItems": 2}]}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

_UNICYCLE_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["circles", "gains", "tau0"],
    "properties": {
        "circles": {"type": "integer", "minimum": 1},
        "adjacency_mode": {"enum": ["intra_inter", "inward_only", "all_to_all"]},
        "gains": {"type": "object", "additionalProperties": False,
                  "required": ["kp", "kpl", "kvl"],
                  "properties": {"kp": _NUM_OR_PAIR, "kpl": _NUM_OR_PAIR,
                                 "kvl": _NUM_OR_PAIR}},
        "tau0": _POSITIVE,
        "alpha": _POSITIVE,
        "r0": _POSITIVE,
        "robot": {"type": "object", "additionalProperties": False,
                  "properties": {"m": _POSITIVE, "I": _POSITIVE, "l": _POSITIVE}},
        "leader": {"type": "object", "additionalProperties": False,
                   "properties": {"radius": _POSITIVE, "speed": _POSITIVE}},
        "disturbance": {"type": "object", "additionalProperties": False,
                        "required": ["target", "amplitude"],
                        "properties": {"target": {"type": "integer", "minimum": 0},
                                       "amplitude": {"type": "number"},
                                       "decay": {"type": "number", "minimum": 0}}},
    },
}

_NEURON_DISTURBANCE = {
    "oneOf": [
        {"type": "object", "additionalProperties": False,
         "required": ["kind"],
         "properties": {"kind": {"const": "pulses"},
                        "n_targets": {"type": "integer", "minimum": 0},
                        "times": {"type": "array", "items": {"type": "number"}},
                        "duration": _POSITIVE,
                        "amplitude_lo": {"type": "number"},
                        "amplitude_hi": {"type": "number"}}},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "targets", "amplitude"],
         "properties": {"kind": {"const": "sine_decay"},
                        "targets": {"type": "array",
                                    "items": {"type": "integer", "minimum": 0}},
                        "amplitude": {"type": "number"},
                        "decay": {"type": "number", "minimum": 0}}},
    ]
}

_HOPFIELD_PROPS = {
    "n_neurons": {"type": "integer", "minimum": 1},
    "c": {"oneOf": [{"type": "number"},
                    {"type": "array", "items": {"type": "number"}}]},
    "tau0": _POSITIVE,
    "weights_file": {"type": "string"},
    "sampler": {"type": "object", "additionalProperties": False,
                "required": ["margin"],
                "properties": {"margin": {"type": "number", "minimum": 0},
                               "seed": {"type": "integer"}}},
    "weights": {"type": "array"},
    "inputs": {"oneOf": [{"type": "number"},
                         {"type": "array", "items": {"type": "number"}},
                         {"type": "object", "additionalProperties": False,
                          "required": ["kind"],
                          "properties": {"kind": {"const": "uniform"},
                                         "lo": {"type": "number"},
                                         "hi": {"type": "number"}}}]},
    "disturbances": _NEURON_DISTURBANCE,
}

_HOPFIELD_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["n_neurons", "c", "tau0"],
    "properties": _HOPFIELD_PROPS,
}

_CG_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["n_neurons", "c", "tau0"],
    "properties": {**_HOPFIELD_PROPS,
                   "amplification": {"type": "object", "additionalProperties": False,
                                     "required": ["lo", "hi"],
                                     "properties": {"lo": _POSITIVE, "hi": _POSITIVE}},
                   "decay_nl_scale": {"type": "number", "minimum": 0}},
}

_GENERIC_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "n_agents": {"type": "integer", "minimum": 1},
        "state_dim": {"type": "integer", "minimum": 1},
        "tau0": {"type": "number", "minimum": 0},
        "delayed_ratio": {"type": "number", "minimum": 0},
        "disturbance_scale": {"type": "number", "minimum": 0},
        "moving_desired": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": {"enum": ["unicycle", "hopfield", "cg", "generic"]},
        "seed": {"type": "integer"},
        "dt": _POSITIVE,
        "t_end": _POSITIVE,
        "output_dir": {"type": "string"},
        "sweep": {"type": "object", "additionalProperties": False,
                  "required": ["axis", "values"],
                  "properties": {"axis": {"enum": ["circles", "tau0", "gain_scale",
                                                   "neurons"]},
                                 "values": {"type": "array", "minItems": 1,
                                            "items": {"type": "number"}}}},
        "unicycle": _UNICYCLE_SCHEMA,
        "hopfield": _HOPFIELD_SCHEMA,
        "cg": _CG_SCHEMA,
        "generic": _GENERIC_SCHEMA,
    },
}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh) if path.endswith(".json") else yaml.safe_load(fh)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ScenarioError(f"config {path} must be a mapping")
    cfg.setdefault("_config_dir", os.path.dirname(os.path.abspath(path)))
    return cfg


def validate_config(cfg: dict) -> dict:
    cfg = dict(cfg)
    config_dir = cfg.pop("_config_dir", os.getcwd())
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"config invalid at {exc.json_path}: {exc.message}") from exc
    family = cfg["family"]
    if family not in cfg:
        raise ScenarioError(f"config invalid at $.{family}: missing section for "
                            f"family {family!r}")
    hop = cfg.get("hopfield") or cfg.get("cg")
    if hop is not None and "weights_file" in hop and "sampler" in hop:
        raise ScenarioError("config invalid: give weights_file or sampler, not both")
    cfg["_config_dir"] = config_dir
    return cfg


# ---------------------------------------------------------------------------
# Family builders

@dataclass
class RunSetup:
    system: NetworkSystem
    history: Optional[Callable]
    certification: object
    d_sup: float
    initial_sup: float
    groups: Optional[list]
    group_label: str
    disturbed: list
    dt: float
    t_end: float
    seed: int
    family: str


def _common(cfg: dict):
    return float(cfg.get("dt", 1e-3)), float(cfg.get("t_end", 20.0)), int(cfg.get("seed", 0))


def _build_unicycle(cfg: dict) -> RunSetup:
    dt, t_end, seed = _common(cfg)
    u = cfg["unicycle"]
    formation = CircleFormation(n_circles=int(u["circles"]),
                                mode=u.get("adjacency_mode", "intra_inter"),
                                r0=float(u.get("r0", 2.0)))
    gains = FormationGains.diagonal(u["gains"]["kp"], u["gains"]["kpl"],
                                    u["gains"]["kvl"], alpha=u.get("alpha"))
    params = RobotParams(**u.get("robot", {}))
    leader_cfg = u.get("leader", {})
    leader = LeaderCircle(radius=float(leader_cfg.get("radius", 10.0)),
                          speed=float(leader_cfg.get("speed", 1.0)))
    delay = DelaySpec.constant(float(u["tau0"]))
    dist = None
    if "disturbance" in u:
        d = u["disturbance"]
        if d["target"] >= formation.n_robots:
            raise ScenarioError(
                f"config invalid at $.unicycle.disturbance.target: robot "
                f"{d['target']} does not exist for {formation.n_circles} circles")
        dist = SineDecayDisturbance(target=int(d["target"]),
                                    amplitude=float(d["amplitude"]),
                                    decay=float(d.get("decay", 0.2)))
    system = build_circle_scenario(formation, gains, params, delay,
                                   leader=leader, disturbance=dist)
    cert = formation_certificate(gains, formation.max_degree(), delay.tau0, params)
    return RunSetup(system=system, history=None, certification=cert,
                    d_sup=dist.sup if dist else 0.0, initial_sup=0.0,
                    groups=formation.groups(), group_label="circle",
                    disturbed=[dist.target] if dist else [], dt=dt, t_end=t_end,
                    seed=seed, family="unicycle")


def _neuron_inputs(spec, n: int, rng) -> np.ndarray:
    if spec is None:
        spec = {"kind": "uniform", "lo": 0.0, "hi": 5.0}
    if isinstance(spec, dict):
        return rng.uniform(float(spec.get("lo", 0.0)), float(spec.get("hi", 5.0)), n)
    return np.asarray(spec, dtype=float) * np.ones(n)


def _neuron_disturbance(spec, n: int, rng):
    """Returns (d(t) or None, d_sup, disturbed ids)."""
    if spec is None:
        return None, 0.0, []
    if spec["kind"] == "pulses":
        n_targets = min(int(spec.get("n_targets", n)), n)
        times = [float(v) for v in spec.get("times", [5.0, 15.0])]
        duration = float(spec.get("duration", 1.0))
        lo = float(spec.get("amplitude_lo", 0.0))
        hi = float(spec.get("amplitude_hi", 10.0))
        targets = np.sort(rng.choice(n, size=n_targets, replace=False))
        amps = rng.uniform(lo, hi, size=(len(times), n_targets))

        def d(t, _targets=targets, _amps=amps):
            out = np.zeros(n)
            for k, t0 in enumerate(times):
                if t0 <= t < t0 + duration:
                    out[_targets] += _amps[k]
            return out

        d_sup = float(np.abs(amps).max()) if amps.size else 0.0
        return d, d_sup, [int(v) for v in targets]
    targets = [int(v) for v in spec["targets"]]
    if any(v >= n for v in targets):
        raise ScenarioError("config invalid: disturbance target beyond n_neurons")
    amplitude = float(spec["amplitude"])
    decay = float(spec.get("decay", 0.2))

    def d(t):
        out = np.zeros(n)
        out[targets] = amplitude * np.sin(t) * np.exp(-decay * t)
        return out

    return d, abs(amplitude), targets


def _build_recurrent(cfg: dict, family: str) -> RunSetup:
    dt, t_end, seed = _common(cfg)
    h = cfg[family]
    rng = np.random.default_rng(seed)
    n = int(h["n_neurons"])
    if "weights_file" in h:
        path = h["weights_file"]
        if not os.path.isabs(path):
            path = os.path.join(cfg.get("_config_dir", os.getcwd()), path)
        weights = load_weights_csv(path)
        if weights.shape[0] != n:
            raise ScenarioError(
                f"weights file is {weights.shape[0]}x{weights.shape[1]} but "
                f"n_neurons = {n}")
    elif "weights" in h:
        weights = np.asarray(h["weights"], dtype=float)
    else:
        sampler = h.get("sampler", {"margin": 0.9 * np.min(np.atleast_1d(h["c"]))})
        weights = hopfield_weight_sampler(n, float(sampler["margin"]),
                                          int(sampler.get("seed", seed)))
    inputs = _neuron_inputs(h.get("inputs"), n, rng)
    d_fn, d_sup, disturbed = _neuron_disturbance(h.get("disturbances"), n, rng)
    delay = DelaySpec.constant(float(h["tau0"]))
    kwargs = {}
    if family == "cg":
        amp = h.get("amplification", {"lo": 1.0, "hi": 1.0})
        kwargs.update(amp_lo=float(amp["lo"]), amp_hi=float(amp["hi"]))
        scale = float(h.get("decay_nl_scale", 0.0))
        if scale > 0:
            from .neuralnet import TANH
            kwargs.update(decay_scale=scale, decay_shape=TANH)
    net = CGNetwork(weights_free=np.zeros((n, n)), weights_delayed=weights,
                    inputs=inputs, delay=delay, decay_lin=h["c"], **kwargs)
    eq = solve_equilibrium(net)
    cert = recurrent_certificate(net)
    net_run = dataclasses.replace(net, disturbance=d_fn)
    system = to_network_system(net_run, eq.x_star)
    return RunSetup(system=system, history=None, certification=cert,
                    d_sup=d_sup, initial_sup=0.0, groups=None,
                    group_label="neuron", disturbed=disturbed, dt=dt, t_end=t_end,
                    seed=seed, family=family)


def _build_generic(cfg: dict) -> RunSetup:
    dt, t_end, seed = _common(cfg)
    g = cfg.get("generic", {})
    bundle = build_random_linear_network(
        n_agents=int(g.get("n_agents", 5)),
        state_dim=int(g.get("state_dim", 2)),
        tau0=float(g.get("tau0", 0.5)),
        seed=seed,
        delayed_ratio=float(g.get("delayed_ratio", 0.5)),
        disturbance_scale=float(g.get("disturbance_scale", 1.0)),
        moving_desired=g.get("moving_desired"),
    )
    cert = certify(bundle.system, bundle.oracle)
    return RunSetup(system=bundle.system, history=bundle.history,
                    certification=cert, d_sup=bundle.d_sup,
                    initial_sup=bundle.initial_sup, groups=None,
                    group_label="agent",
                    disturbed=list(range(bundle.system.n_agents)),
                    dt=dt, t_end=t_end, seed=seed, family="generic")


def build_setup(cfg: dict) -> RunSetup:
    cfg = validate_config(cfg)
    family = cfg["family"]
    if family == "unicycle":
        return _build_unicycle(cfg)
    if family in ("hopfield", "cg"):
        return _build_recurrent(cfg, family)
    return _build_generic(cfg)


# ---------------------------------------------------------------------------
# Commands

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _write_json(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _certificate_payload(cert) -> dict:
    if isinstance(cert, Certificate):
        payload = cert.to_dict()
        payload["passed"] = True
        if cert.mode == "sampled":
            payload["caveat"] = ("conditions were checked on sampled state boxes, "
                                 "not proven globally")
        return payload
    return {"passed": False, "condition": cert.condition, "value": cert.value,
            "threshold": cert.threshold, "message": cert.message,
            "worst": cert.worst}


def _public_config(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def cmd_certify(cfg: dict, out_dir: str, quiet: bool = False) -> int:
    setup = build_setup(cfg)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "certificate.json")
    _write_json(path, _certificate_payload(setup.certification))
    if isinstance(setup.certification, Certificate):
        if not quiet:
            c = setup.certification
            print(f"certificate PASS: sigma_bar={c.sigma_bar:.6g} "
                  f"sigma_under={c.sigma_under:.6g} lambda_hat={c.lambda_hat:.6g} "
                  f"K={c.K:.6g} -> {path}")
        return 0
    if not quiet:
        v = setup.certification
        print(f"certificate FAIL ({v.condition}): {v.message} "
              f"[value={v.value:.6g}, threshold={v.threshold:.6g}] -> {path}")
    return 2


def _downsample(arr: np.ndarray, limit: int = 1000) -> np.ndarray:
    stride = max(1, len(arr) // limit)
    return arr[::stride]


def run_simulation(setup: RunSetup, cfg: dict, out_dir: str,
                   write_trace: bool = True) -> dict:
    system = setup.system
    trace = integrate(system, setup.history, setup.t_end, setup.dt,
                      allow_divergence=True)
    dev = per_agent_deviation(trace, system)
    i0 = trace.t0_index
    run_times = trace.times[i0:]
    run_dev = dev[i0:]
    max_series = run_dev.max(axis=1)
    cert = setup.certification
    certified = isinstance(cert, Certificate)

    metrics = {
        "family": setup.family,
        "certified": certified,
        "seed": setup.seed,
        "dt": setup.dt,
        "t_end": setup.t_end,
        "tau0": system.delay.tau0,
        "d_sup": setup.d_sup,
        "initial_sup": setup.initial_sup,
        "max_deviation": float(max_series.max()),
        "diverged_at": trace.diverged_at,
        "disturbed_agents": setup.disturbed,
        "group_label": setup.group_label,
    }
    if setup.groups is not None:
        metrics["per_group_max"] = [float(run_dev[:, g].max()) for g in setup.groups]
    else:
        metrics["per_group_max"] = [float(v) for v in run_dev.max(axis=0)]

    if certified:
        env = bound_envelope(cert, setup.initial_sup, setup.d_sup)
        env_vals = env(run_times)
        margin = env_vals - max_series
        ds_t = _downsample(run_times)
        metrics["envelope"] = {
            "initial": env.initial_sup, "rate": env.rate, "offset": env.offset,
            "samples": np.column_stack([ds_t, env(ds_t)]),
        }
        metrics["dominance"] = {"ok": bool(margin.min() >= -DOMINANCE_TOL),
                                "min_margin": float(margin.min())}
        metrics["certificate"] = cert.to_dict()
    else:
        metrics["violation"] = _certificate_payload(cert)

    ds_idx = np.arange(0, len(run_times), max(1, len(run_times) // 1000))
    metrics["deviation_series"] = {
        "times": run_times[ds_idx],
        "per_agent": run_dev[ds_idx].T,
    }

    os.makedirs(out_dir, exist_ok=True)
    public = _public_config(cfg)
    _write_json(os.path.join(out_dir, "metrics.json"), metrics)
    _write_json(os.path.join(out_dir, "certificate.json"), _certificate_payload(cert))
    if write_trace:
        write_trace_csv(trace, system, os.path.join(out_dir, "trace.csv"))
        write_run_metadata(os.path.join(out_dir, "trace.meta.json"),
                           config=public, dt=setup.dt, tau0=system.delay.tau0,
                           seed=setup.seed)
    return metrics


def cmd_simulate(cfg: dict, out_dir: str, quiet: bool = False) -> int:
    setup = build_setup(cfg)
    metrics = run_simulation(setup, cfg, out_dir)
    if not quiet:
        line = (f"simulate: max deviation {metrics['max_deviation']:.6g} "
                f"(certified={metrics['certified']}")
        if metrics.get("dominance"):
            line += f", envelope margin {metrics['dominance']['min_margin']:.3g}"
        print(line + f") -> {out_dir}")
    if metrics["diverged_at"] is not None:
        if not quiet:
            print(f"simulate: DIVERGED at t = {metrics['diverged_at']:.6g}")
        return 3
    return 0


def apply_sweep_value(cfg: dict, axis: str, value: float) -> dict:
    out = copy.deepcopy(cfg)
    out.pop("sweep", None)
    family = out["family"]
    if axis == "circles":
        if family != "unicycle":
            raise ScenarioError("circles sweep needs the unicycle family")
        out["unicycle"]["circles"] = int(value)
    elif axis == "neurons":
        if family not in ("hopfield", "cg"):
            raise ScenarioError("neurons sweep needs a recurrent family")
        out[family]["n_neurons"] = int(value)
    elif axis == "tau0":
        out[family]["tau0"] = float(value)
    elif axis == "gain_scale":
        if family != "unicycle":
            raise ScenarioError("gain_scale sweep needs the unicycle family")
        kp = np.asarray(out["unicycle"]["gains"]["kp"], dtype=float) * float(value)
        out["unicycle"]["gains"]["kp"] = kp.tolist() if kp.ndim else float(kp)
    return out


def _sweep_point(args):
    cfg, axis, value, point_dir = args
    point_cfg = apply_sweep_value(cfg, axis, value)
    setup = build_setup(point_cfg)
    metrics = run_simulation(setup, point_cfg, point_dir)
    return value, metrics


def cmd_sweep(cfg: dict, out_dir: str, jobs: int = 1, quiet: bool = False) -> int:
    cfg = validate_config(cfg)
    if "sweep" not in cfg:
        raise ScenarioError("sweep command needs a sweep section in the config")
    axis = cfg["sweep"]["axis"]
    values = cfg["sweep"]["values"]
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(cfg, axis, v, os.path.join(out_dir, f"point_{k:03d}"))
             for k, v in enumerate(values)]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    max_groups = max(len(m["per_group_max"]) for _, m in results)
    header = ["axis", "value", "certified", "lambda_hat", "envelope_bound",
              "max_deviation", "diverged_at"]
    header += [f"group_{k + 1}" for k in range(max_groups)]
    path = os.path.join(out_dir, "sweep.csv")
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for value, m in results:
            cert = m.get("certificate")
            env = m.get("envelope")
            row = [axis, f"{value:.10g}", int(m["certified"]),
                   f"{cert['lambda_hat']:.10g}" if cert else "",
                   f"{env['initial'] + env['offset']:.10g}" if env else "",
                   f"{m['max_deviation']:.10g}",
                   f"{m['diverged_at']:.10g}" if m["diverged_at"] is not None else ""]
            groups = m["per_group_max"]
            row += [f"{v:.10g}" for v in groups] + [""] * (max_groups - len(groups))
            writer.writerow(row)
    os.replace(tmp, path)
    if not quiet:
        print(f"sweep over {axis}: {len(values)} points -> {path}")
    return 0


# ---------------------------------------------------------------------------
# Entry point

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scalenet",
                                description="certify and simulate delayed networks")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("certify", "simulate", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("config", help="scenario config (.yaml or .json)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--t-end", type=float, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        for key, val in (("dt", args.dt), ("t_end", args.t_end), ("seed", args.seed)):
            if val is not None:
                cfg[key] = val
        out_dir = (args.out or cfg.get("output_dir")
                   or os.environ.get(OUT_ENV_VAR) or "runs")
        if args.command == "certify":
            return cmd_certify(cfg, out_dir, quiet=args.quiet)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, quiet=args.quiet)
        return cmd_sweep(cfg, out_dir, jobs=args.jobs, quiet=args.quiet)
    except ScalenetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
