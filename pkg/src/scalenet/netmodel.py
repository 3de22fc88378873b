"""Closed-loop delayed network models and a fixed-step trajectory integrator.

A network is a set of agents ``x_i' = f_i(x_i, t) + u_i(t) + b_i(x_i, t) d_i(t)``
coupled through delay-free terms ``h(x_i(t), x_src(t), t)`` and delayed terms
``h(x_i(t - tau(t)), x_src(t - tau(t)), t)``, all sharing one bounded delay
``tau(t) <= tau0``.  Trajectories are produced by classic fourth-order
Runge-Kutta on a fixed grid; delayed state values are fetched by cubic Hermite
interpolation of the accumulated solution (grid hits are returned exactly,
history lookups fall back to the supplied history function).  The fixed step
must not exceed the smallest delay so that every delayed lookup lands in
already-computed territory.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DivergenceError,
    HistoryUnderflowError,
    InvalidInputError,
)

Vector = np.ndarray
StateFn = Callable[[float], np.ndarray]

_GRID_SNAP = 1e-9


@dataclass
class AgentSpec:
    """One agent: intrinsic dynamics plus disturbance and output maps.

    ``output`` may be None (identity), a matrix (linear output), or a callable
    ``g(x_i)``.  ``b_bar`` is the declared bound on ``||b_i(x, t)||_2``; leave
    None to have certification estimate it by sampling.
    """

    state_dim: int
    intrinsic: Callable[[np.ndarray, float], np.ndarray]
    disturbance_gain: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    disturbance: Optional[Callable[[float], np.ndarray]] = None
    output: object = None
    output_lipschitz: Optional[float] = None
    b_bar: Optional[float] = None

    def __post_init__(self):
        if self.state_dim < 1:
            raise InvalidInputError(f"state_dim must be >= 1, got {self.state_dim}")
        if isinstance(self.output, (list, tuple, np.ndarray)):
            self.output = np.asarray(self.output, dtype=float)
            if self.output.ndim != 2 or self.output.shape[1] != self.state_dim:
                raise InvalidInputError(
                    f"output matrix shape {self.output.shape} incompatible with "
                    f"state_dim {self.state_dim}"
                )

    @property
    def output_dim(self) -> int:
        if self.output is None:
            return self.state_dim
        if isinstance(self.output, np.ndarray):
            return self.output.shape[0]
        probe = np.asarray(self.output(np.zeros(self.state_dim)), dtype=float)
        return probe.shape[0]

    def apply_output(self, x: np.ndarray) -> np.ndarray:
        if self.output is None:
            return np.asarray(x, dtype=float)
        if isinstance(self.output, np.ndarray):
            return self.output @ x
        return np.asarray(self.output(x), dtype=float)


@dataclass
class CouplingSpec:
    """Directed coupling into ``target`` from an agent or a leader.

    Both functions take ``(x_target, x_source, t)``; the delayed one receives
    the states at ``t - tau(t)`` with the current time as third argument.
    At least one of the two must be present.
    """

    target: int
    source: int
    delay_free: Optional[Callable] = None
    delayed: Optional[Callable] = None
    is_leader_edge: bool = False

    def __post_init__(self):
        if self.delay_free is None and self.delayed is None:
            raise InvalidInputError("coupling needs at least one of delay_free/delayed")


@dataclass(frozen=True)
class DelaySpec:
    """Bounded time-varying delay: 0 <= tau(t) <= tau0, no smoothness assumed."""

    tau: Callable[[float], float]
    tau0: float

    def __post_init__(self):
        if not math.isfinite(self.tau0) or self.tau0 < 0.0:
            raise InvalidInputError(f"tau0 must be finite and >= 0, got {self.tau0}")

    @classmethod
    def constant(cls, value: float) -> "DelaySpec":
        return cls(tau=lambda t, _v=float(value): _v, tau0=float(value))

    def sample_check(self, times) -> np.ndarray:
        vals = np.array([float(self.tau(t)) for t in np.atleast_1d(times)])
        if np.any(vals < -1e-12) or np.any(vals > self.tau0 + 1e-9):
            raise InvalidInputError(
                f"delay profile leaves [0, tau0={self.tau0}]: range "
                f"[{vals.min():.3g}, {vals.max():.3g}]"
            )
        return vals


@dataclass
class NetworkSystem:
    """The closed-loop object: agents, couplings, leaders, delay, desired solution.

    ``desired(t)`` returns the stacked desired state; it is evaluated with
    ``max(t, 0)`` so the pre-zero desired is frozen at its initial value.
    ``vector_rhs(t, x, x_del, t_del)``, when provided, replaces the per-edge
    assembly during integration (the per-edge specs remain authoritative for
    certification); it must implement exactly the same dynamics.
    """

    agents: list
    couplings: list
    delay: DelaySpec
    desired: StateFn
    leaders: list = field(default_factory=list)
    vector_rhs: Optional[Callable] = None
    has_delayed: Optional[bool] = None
    name: str = "network"

    def __post_init__(self):
        for c in self.couplings:
            if c.target < 0 or c.target >= len(self.agents):
                raise InvalidInputError(f"coupling target {c.target} out of range")
            limit = len(self.leaders) if c.is_leader_edge else len(self.agents)
            if c.source < 0 or c.source >= limit:
                raise InvalidInputError(f"coupling source {c.source} out of range")
        if self.vector_rhs is not None and not self.couplings and self.has_delayed is None:
            raise InvalidInputError(
                "vector_rhs without per-edge couplings needs an explicit has_delayed flag"
            )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def agent_dims(self) -> tuple:
        return tuple(a.state_dim for a in self.agents)

    @property
    def state_dim(self) -> int:
        return sum(self.agent_dims)

    @property
    def agent_slices(self) -> list:
        edges = np.concatenate([[0], np.cumsum(self.agent_dims)])
        return [slice(int(edges[i]), int(edges[i + 1])) for i in range(self.n_agents)]

    @property
    def has_delayed_couplings(self) -> bool:
        if self.has_delayed is not None:
            return self.has_delayed
        return any(c.delayed is not None for c in self.couplings)

    def desired_at(self, t: float) -> np.ndarray:
        return np.asarray(self.desired(max(float(t), 0.0)), dtype=float)

    def output_at(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [a.apply_output(x[s]) for a, s in zip(self.agents, self.agent_slices)]
        )


def assemble_rhs(system: NetworkSystem, include_disturbance: bool = True) -> Callable:
    """Build the stacked right-hand side from per-agent and per-edge callables."""
    slices = system.agent_slices
    dim = system.state_dim
    agents = list(enumerate(system.agents))
    disturbed = [
        (slices[i], a.disturbance_gain, a.disturbance)
        for i, a in agents
        if include_disturbance and a.disturbance is not None
    ]
    free_edges = []
    delayed_edges = []
    for c in system.couplings:
        tgt = slices[c.target]
        if c.is_leader_edge:
            src_fn = system.leaders[c.source]
            if c.delay_free is not None:
                free_edges.append((tgt, None, src_fn, c.delay_free))
            if c.delayed is not None:
                delayed_edges.append((tgt, None, src_fn, c.delayed))
        else:
            src = slices[c.source]
            if c.delay_free is not None:
                free_edges.append((tgt, src, None, c.delay_free))
            if c.delayed is not None:
                delayed_edges.append((tgt, src, None, c.delayed))

    def rhs(t, x, x_del, t_del):
        dx = np.zeros(dim)
        for i, a in agents:
            s = slices[i]
            dx[s] = a.intrinsic(x[s], t)
        for s, gain, d in disturbed:
            dv = np.asarray(d(t), dtype=float)
            dx[s] += dv if gain is None else gain(x[s], t) @ dv
        for tgt, src, lead, fn in free_edges:
            other = x[src] if src is not None else np.asarray(lead(t), dtype=float)
            dx[tgt] += fn(x[tgt], other, t)
        for tgt, src, lead, fn in delayed_edges:
            other = x_del[src] if src is not None else np.asarray(lead(t_del), dtype=float)
            dx[tgt] += fn(x_del[tgt], other, t)
        return dx

    return rhs


@dataclass
class Trace:
    """Dense grid trajectory, including the history segment before t = 0.

    ``derivs`` stores the right-hand side at each accepted grid point of the
    integrated region (NaN over the history segment) and powers cubic Hermite
    interpolation in ``lookup``.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    dt: float
    t0_index: int
    agent_dims: tuple
    diverged_at: Optional[float] = None

    @property
    def n_agents(self) -> int:
        return len(self.agent_dims)

    @property
    def agent_slices(self) -> list:
        edges = np.concatenate([[0], np.cumsum(self.agent_dims)])
        return [slice(int(edges[i]), int(edges[i + 1])) for i in range(self.n_agents)]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        q = (t - float(self.times[0])) / self.dt
        idx = int(round(q))
        if abs(q - idx) > 1e-6 or idx < 0 or idx >= len(self.times):
            raise InvalidInputError(f"t = {t} is not on the trace grid")
        return idx

    def lookup(self, s: float) -> np.ndarray:
        """State at an arbitrary time in [times[0], t_end].

        Grid hits (within 1e-9 of a node) return the stored value exactly.
        Off-grid times in the integrated region use cubic Hermite; the history
        segment falls back to linear interpolation.
        """
        t_lo = float(self.times[0])
        if s < t_lo - _GRID_SNAP:
            raise HistoryUnderflowError(
                f"lookup at t = {s:.6g} precedes the history segment start {t_lo:.6g}"
            )
        if s > self.t_end + _GRID_SNAP:
            raise InvalidInputError(f"lookup at t = {s:.6g} beyond trace end {self.t_end:.6g}")
        q = (min(max(s, t_lo), self.t_end) - t_lo) / self.dt
        near = int(round(q))
        if abs(q - near) * self.dt < _GRID_SNAP:
            return self.states[near]
        m = int(q)
        theta = q - m
        x0, x1 = self.states[m], self.states[m + 1]
        f0, f1 = self.derivs[m], self.derivs[m + 1]
        if np.any(np.isnan(f0)) or np.any(np.isnan(f1)):
            return (1.0 - theta) * x0 + theta * x1
        h = self.dt
        t2, t3 = theta * theta, theta * theta * theta
        return ((2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + theta) * h * f0
                + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * h * f1)


def integrate(system: NetworkSystem, history: Optional[StateFn], t_end: float,
              dt: float, allow_divergence: bool = False) -> Trace:
    """Integrate the closed loop over [0, t_end] with fixed-step RK4.

    ``history(s)`` supplies the state on [-tau0, 0]; None means constant at
    the desired initial state.  If the system has delayed couplings, the step
    must satisfy ``dt <= min_t tau(t)`` so that delayed lookups never require
    extrapolation.  A non-finite state raises DivergenceError (or, with
    ``allow_divergence``, truncates the trace and stamps ``diverged_at``).
    """
    if dt <= 0.0 or t_end <= 0.0:
        raise InvalidInputError(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    dim = system.state_dim
    tau0 = system.delay.tau0
    if history is None:
        x0 = system.desired_at(0.0).copy()
        history = lambda s: x0  # noqa: E731

    n_steps = int(math.ceil(t_end / dt - 1e-9))
    n_hist = int(math.ceil(tau0 / dt - 1e-9)) if tau0 > 0 else 0
    times = (np.arange(-n_hist, n_steps + 1)) * dt
    i0 = n_hist

    has_delay = system.has_delayed_couplings
    if has_delay:
        if tau0 <= 0.0:
            raise InvalidInputError(
                "system declares delayed couplings but tau0 == 0; fold them into "
                "delay-free couplings instead"
            )
        stage_times = np.concatenate([times[i0:], times[i0:-1] + 0.5 * dt])
        tau_samples = system.delay.sample_check(stage_times)
        if tau_samples.min() < dt - 1e-12:
            raise InvalidInputError(
                f"step dt={dt} exceeds the smallest sampled delay "
                f"{tau_samples.min():.3g}; delayed lookups would extrapolate"
            )
        tau_at = tau_samples[: n_steps + 1]
        tau_mid = tau_samples[n_steps + 1:]

    states = np.empty((len(times), dim))
    derivs = np.full((len(times), dim), np.nan)
    for k in range(i0 + 1):
        states[k] = np.asarray(history(max(float(times[k]), -tau0)), dtype=float)
        if states[k].shape != (dim,):
            raise InvalidInputError(
                f"history returned shape {states[k].shape}, expected ({dim},)"
            )

    rhs = system.vector_rhs if system.vector_rhs is not None else assemble_rhs(system)
    floor = -tau0 - _GRID_SNAP

    def lookup(s: float, accepted: int) -> np.ndarray:
        if s <= 0.0:
            if s < floor:
                raise HistoryUnderflowError(
                    f"delayed lookup at t = {s:.6g} precedes -tau0 = {-tau0:.6g}"
                )
            return np.asarray(history(max(s, -tau0)), dtype=float)
        t_acc = times[accepted]
        if s > t_acc:
            if s - t_acc > _GRID_SNAP:
                raise InvalidInputError(
                    f"delayed lookup at t = {s:.6g} beyond accepted point {t_acc:.6g}"
                )
            s = t_acc
        q = s / dt
        near = int(round(q))
        if abs(q - near) * dt < _GRID_SNAP:
            return states[i0 + near]
        m = int(q)
        theta = q - m
        x0, x1 = states[i0 + m], states[i0 + m + 1]
        f0, f1 = derivs[i0 + m], derivs[i0 + m + 1]
        h = dt
        t2, t3 = theta * theta, theta * theta * theta
        return ((2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + theta) * h * f0
                + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * h * f1)

    diverged_at = None
    last = i0 + n_steps
    for n in range(i0, last):
        t = float(times[n])
        x = states[n]
        step = n - i0
        if has_delay:
            s1 = t - tau_at[step]
            sm = t + 0.5 * dt - tau_mid[step]
            s2 = t + dt - tau_at[step + 1]
            xd1 = lookup(s1, n)
            k1 = rhs(t, x, xd1, s1)
            derivs[n] = k1
            xdm = lookup(sm, n)
            k2 = rhs(t + 0.5 * dt, x + (0.5 * dt) * k1, xdm, sm)
            k3 = rhs(t + 0.5 * dt, x + (0.5 * dt) * k2, xdm, sm)
            xd2 = lookup(s2, n)
            k4 = rhs(t + dt, x + dt * k3, xd2, s2)
        else:
            k1 = rhs(t, x, None, t)
            derivs[n] = k1
            k2 = rhs(t + 0.5 * dt, x + (0.5 * dt) * k1, None, t)
            k3 = rhs(t + 0.5 * dt, x + (0.5 * dt) * k2, None, t)
            k4 = rhs(t + dt, x + dt * k3, None, t)
        x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x_next)):
            diverged_at = float(times[n + 1])
            if not allow_divergence:
                raise DivergenceError(diverged_at)
            last = n
            times = times[: n + 1]
            states = states[: n + 1]
            derivs = derivs[: n + 1]
            break
        states[n + 1] = x_next

    if diverged_at is None:
        t_f = float(times[last])
        if has_delay:
            s_f = t_f - tau_at[last - i0]
            derivs[last] = rhs(t_f, states[last], lookup(s_f, last), s_f)
        else:
            derivs[last] = rhs(t_f, states[last], None, t_f)

    return Trace(times=times, states=states, derivs=derivs, dt=dt, t0_index=i0,
                 agent_dims=system.agent_dims, diverged_at=diverged_at)


def per_agent_deviation(trace: Trace, system: NetworkSystem) -> np.ndarray:
    """Euclidean deviation from the desired state, per time point and agent."""
    desired = np.stack([system.desired_at(t) for t in trace.times])
    diff = trace.states - desired
    cols = [np.linalg.norm(diff[:, s], axis=1) for s in trace.agent_slices]
    return np.stack(cols, axis=1)


def max_deviation(trace: Trace, system: NetworkSystem) -> np.ndarray:
    """Per-time maximum over agents of the Euclidean deviation from desired."""
    return per_agent_deviation(trace, system).max(axis=1)


def per_agent_output_deviation(trace: Trace, system: NetworkSystem) -> np.ndarray:
    """Per-time, per-agent Euclidean deviation of outputs from desired outputs."""
    cols = []
    for agent, s in zip(system.agents, trace.agent_slices):
        if isinstance(agent.output, np.ndarray):
            y = trace.states[:, s] @ agent.output.T
            yd = np.stack([agent.output @ system.desired_at(t)[s] for t in trace.times])
        elif agent.output is None:
            y = trace.states[:, s]
            yd = np.stack([system.desired_at(t)[s] for t in trace.times])
        else:
            y = np.stack([agent.apply_output(row) for row in trace.states[:, s]])
            yd = np.stack([agent.apply_output(system.desired_at(t)[s]) for t in trace.times])
        cols.append(np.linalg.norm(y - yd, axis=1))
    return np.stack(cols, axis=1)


def output_deviation(trace: Trace, system: NetworkSystem) -> np.ndarray:
    """Per-time maximum over agents of the output deviation."""
    return per_agent_output_deviation(trace, system).max(axis=1)


def desired_residual(system: NetworkSystem, times: Sequence[float],
                     mode: str = "intrinsic") -> float:
    """Max residual of the desired trajectory against the dynamics.

    mode "intrinsic": |d/dt x_d - f(x_d, t)| with finite differences; mode
    "closed_loop": |rhs(x_d, x_d_delayed)| with disturbances off (for systems
    whose couplings cancel only in the aggregate, e.g. at an equilibrium).
    """
    worst = 0.0
    if mode == "intrinsic":
        h = 1e-6
        slices = system.agent_slices
        for t in times:
            t = max(float(t), h)  # keep the difference stencil off the frozen region
            xd = system.desired_at(t)
            dxd = (system.desired_at(t + h) - system.desired_at(t - h)) / (2 * h)
            for agent, s in zip(system.agents, slices):
                res = dxd[s] - agent.intrinsic(xd[s], t)
                worst = max(worst, float(np.linalg.norm(res)))
    elif mode == "closed_loop":
        rhs = assemble_rhs(system, include_disturbance=False)
        for t in times:
            xd = system.desired_at(t)
            t_del = t - system.delay.tau(t)
            res = rhs(t, xd, system.desired_at(t_del), t_del)
            worst = max(worst, float(np.linalg.norm(res)))
    else:
        raise InvalidInputError(f"unknown residual mode {mode!r}")
    return worst


# ---------------------------------------------------------------------------
# Export helpers

def write_trace_csv(trace: Trace, system: NetworkSystem, path: str) -> None:
    """Long-format CSV: time, agent_id, state components, output components."""
    n_state = max(trace.agent_dims)
    n_out = max(a.output_dim for a in system.agents)
    header = (["time", "agent_id"]
              + [f"x{k}" for k in range(n_state)]
              + [f"y{k}" for k in range(n_out)])
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        slices = trace.agent_slices
        for row_i, t in enumerate(trace.times):
            for a_id, (agent, s) in enumerate(zip(system.agents, slices)):
                x = trace.states[row_i, s]
                y = agent.apply_output(x)
                row = [f"{t:.10g}", a_id]
                row += [f"{v:.10g}" for v in x] + [""] * (n_state - len(x))
                row += [f"{v:.10g}" for v in y] + [""] * (n_out - len(y))
                writer.writerow(row)
    os.replace(tmp, path)


def scenario_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_run_metadata(path: str, *, config: dict, dt: float, tau0: float,
                       seed, extra: Optional[dict] = None) -> None:
    meta = {"scenario_hash": scenario_hash(config), "dt": dt, "tau0": tau0, "seed": seed}
    if extra:
        meta.update(extra)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
