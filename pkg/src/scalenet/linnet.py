"""Seeded random linear network family.

Builds networks of linear agents with linear delay-free/delayed couplings
whose contraction constants are known exactly by construction, so that the
certified deviation envelope can be exercised end to end on arbitrary many
random instances.  Couplings come in two flavours: "source" terms driven by
the source agent's deviation only, and "relative" terms driven by the
difference of deviations (these exercise the first-argument derivative paths
of the condition checks).  Desired solutions are either constant or a shared
sinusoidal drift, so inter-agent offsets stay constant and delayed couplings
vanish along the desired motion at any lag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .certify import CouplingJacobian, EdgeJacobians, JacobianOracle
from .errors import InvalidInputError
from .measures import mu2, norm2, sigma_max
from .netmodel import AgentSpec, CouplingSpec, DelaySpec, NetworkSystem


@dataclass
class LinearNetworkBundle:
    """A built system plus the exact constants the construction guarantees."""

    system: NetworkSystem
    oracle: JacobianOracle
    sigma_bar: float
    sigma_under: float
    b_bar: float
    d_sup: float
    history: Callable[[float], np.ndarray]
    initial_sup: float


def _condition_values(a_mats, free_edges, delayed_edges, n_agents):
    """Exact per-agent condition values for constant Jacobians."""
    vals_ii = np.zeros(n_agents)
    vals_iii = np.zeros(n_agents)
    for i in range(n_agents):
        j_self = a_mats[i].copy()
        norm_sum = 0.0
        for (tgt, _src, kind, mat) in free_edges:
            if tgt != i:
                continue
            if kind == "relative":
                j_self -= mat
            norm_sum += norm2(mat)
        vals_ii[i] = mu2(j_self) + norm_sum
        d1_sum = None
        norm_sum = 0.0
        for (tgt, _src, kind, mat) in delayed_edges:
            if tgt != i:
                continue
            d1_sum = -mat if d1_sum is None else d1_sum - mat
            norm_sum += norm2(mat)
        vals_iii[i] = (norm2(d1_sum) if d1_sum is not None else 0.0) + norm_sum
    return vals_ii, vals_iii


def build_random_linear_network(
    n_agents: int = 5,
    state_dim: int = 2,
    tau0: float = 0.5,
    seed: int = 0,
    delayed_ratio: float = 0.5,
    disturbance_scale: float = 1.0,
    moving_desired: Optional[bool] = None,
) -> LinearNetworkBundle:
    """Random linear network with exact contraction constants.

    ``delayed_ratio`` sets sigma_under / sigma_bar; values below 1 yield a
    certified instance, values >= 1 a deliberately uncertifiable one.
    """
    if n_agents < 1 or state_dim < 1:
        raise InvalidInputError("need n_agents >= 1 and state_dim >= 1")
    if tau0 < 0:
        raise InvalidInputError(f"tau0 must be >= 0, got {tau0}")
    rng = np.random.default_rng(seed)
    n = state_dim
    if moving_desired is None:
        moving_desired = bool(rng.integers(0, 2))

    anchors = rng.uniform(-1.0, 1.0, size=(n_agents, n))
    if moving_desired:
        wave_amp = rng.uniform(-0.5, 0.5, size=n)
        wave_freq = rng.uniform(0.3, 1.2)
    else:
        wave_amp = np.zeros(n)
        wave_freq = 1.0

    def wave(t):
        return wave_amp * np.sin(wave_freq * t)

    def wave_dot(t):
        return wave_amp * wave_freq * np.cos(wave_freq * t)

    margins = rng.uniform(1.5, 3.0, size=n_agents)
    a_mats = []
    for i in range(n_agents):
        raw = rng.normal(size=(n, n)) / np.sqrt(n)
        a_mats.append(raw - (mu2(raw) + margins[i]) * np.eye(n))

    # Edge lists: (target, source, kind, matrix); kind "source" or "relative".
    free_edges = []
    delayed_edges = []
    for i in range(n_agents):
        for j in range(n_agents):
            if i == j:
                continue
            if rng.random() < 0.45:
                kind = "source" if rng.random() < 0.5 else "relative"
                free_edges.append(
                    [i, j, kind, rng.normal(size=(n, n)) * 0.3 / np.sqrt(n)])
            if rng.random() < 0.45:
                delayed_edges.append(
                    [i, j, "relative", rng.normal(size=(n, n)) * 0.3 / np.sqrt(n)])
    if not delayed_edges and tau0 > 0:
        j = int(rng.integers(0, n_agents))
        delayed_edges.append(
            [(j + 1) % n_agents, j, "relative", rng.normal(size=(n, n)) * 0.3 / np.sqrt(n)])

    # Shrink delay-free couplings until the contraction margin is comfortable.
    for _ in range(40):
        vals_ii, _ = _condition_values(a_mats, free_edges, delayed_edges, n_agents)
        sigma_bar = -float(vals_ii.max())
        if sigma_bar >= 0.5:
            break
        for e in free_edges:
            e[3] = e[3] * 0.6
    else:
        raise InvalidInputError("failed to reach a contracting delay-free loop")

    _, vals_iii = _condition_values(a_mats, free_edges, delayed_edges, n_agents)
    sigma_raw = float(vals_iii.max())
    if sigma_raw > 0.0:
        scale = delayed_ratio * sigma_bar / sigma_raw
        for e in delayed_edges:
            e[3] = e[3] * scale
    vals_ii, vals_iii = _condition_values(a_mats, free_edges, delayed_edges, n_agents)
    sigma_bar = -float(vals_ii.max())
    sigma_under = float(vals_iii.max())

    b_norms = rng.uniform(0.3, 1.0, size=n_agents)
    b_mats = []
    for i in range(n_agents):
        raw = rng.normal(size=(n, n))
        b_mats.append(raw * (b_norms[i] / sigma_max(raw)))
    b_bar = float(b_norms.max())

    d_coeff = rng.normal(size=(n_agents, 2, n)) * (0.5 * disturbance_scale)
    d_freq = rng.uniform(0.2, 3.0, size=(n_agents, 2))
    d_phase = rng.uniform(0.0, 2 * np.pi, size=(n_agents, 2))
    d_sup = float(max(
        np.linalg.norm(d_coeff[i, 0]) + np.linalg.norm(d_coeff[i, 1])
        for i in range(n_agents)))

    def desired(t, _anchors=anchors):
        return (_anchors + wave(t)).reshape(-1)

    def desired_dot(t):
        return np.tile(wave_dot(t), n_agents)

    agents = []
    for i in range(n_agents):
        def intrinsic(x, t, _a=a_mats[i], _xi=anchors[i]):
            return _a @ (x - _xi - wave(t)) + wave_dot(t)

        def gain(x, t, _b=b_mats[i]):
            return _b

        def dist(t, _c=d_coeff[i], _w=d_freq[i], _p=d_phase[i]):
            return (_c[0] * np.sin(_w[0] * t + _p[0])
                    + _c[1] * np.sin(_w[1] * t + _p[1]))

        agents.append(AgentSpec(state_dim=n, intrinsic=intrinsic,
                                disturbance_gain=gain, disturbance=dist,
                                b_bar=float(b_norms[i])))

    couplings = []
    oracle_edges = []
    zero = np.zeros((n, n))
    for tgt, src, kind, mat in free_edges:
        if kind == "source":
            def h(xi, xs, t, _g=mat, _xj=anchors[src]):
                return _g @ (xs - _xj - wave(t))
            d1 = zero
        else:
            def h(xi, xs, t, _g=mat, _off=anchors[src] - anchors[tgt]):
                return _g @ ((xs - xi) - _off)
            d1 = -mat
        couplings.append(CouplingSpec(target=tgt, source=src, delay_free=h))
        oracle_edges.append(EdgeJacobians(free=CouplingJacobian(
            d1=lambda xi, xs, t, _m=d1: _m,
            d2=lambda xi, xs, t, _m=mat: _m)))
    for tgt, src, kind, mat in delayed_edges:
        def h(xi, xs, t, _g=mat, _off=anchors[src] - anchors[tgt]):
            return _g @ ((xs - xi) - _off)
        couplings.append(CouplingSpec(target=tgt, source=src, delayed=h))
        oracle_edges.append(EdgeJacobians(delayed=CouplingJacobian(
            d1=lambda xi, xs, t, _m=-mat: _m,
            d2=lambda xi, xs, t, _m=mat: _m)))

    # Dense stacked form of the same dynamics for fast integration.
    dim = n_agents * n
    m_free = np.zeros((dim, dim))
    m_del = np.zeros((dim, dim))
    for i in range(n_agents):
        s = slice(i * n, (i + 1) * n)
        m_free[s, s] += a_mats[i]
    for tgt, src, kind, mat in free_edges:
        st, ss = slice(tgt * n, tgt * n + n), slice(src * n, src * n + n)
        m_free[st, ss] += mat
        if kind == "relative":
            m_free[st, st] -= mat
    for tgt, src, kind, mat in delayed_edges:
        st, ss = slice(tgt * n, tgt * n + n), slice(src * n, src * n + n)
        m_del[st, ss] += mat
        m_del[st, st] -= mat
    anchors_flat = anchors.reshape(-1)
    dist_fns = [a.disturbance for a in agents]
    gain_mats = b_mats

    def vector_rhs(t, x, x_del, t_del):
        dx = desired_dot(t) + m_free @ (x - anchors_flat - np.tile(wave(t), n_agents))
        if x_del is not None:
            dx += m_del @ (x_del - anchors_flat)
        for i in range(n_agents):
            s = slice(i * n, (i + 1) * n)
            dx[s] += gain_mats[i] @ dist_fns[i](t)
        return dx

    tau_wobble = rng.uniform(0.5, 1.0)
    if tau0 > 0:
        def tau_fn(t, _w=tau_wobble, _t0=tau0):
            # bounded, non-smooth profile staying within [0.55 tau0, tau0]
            return _t0 * (0.55 + 0.45 * _w * abs(np.sin(0.7 * t)))
        delay = DelaySpec(tau=tau_fn, tau0=tau0)
    else:
        delay = DelaySpec.constant(0.0)

    system = NetworkSystem(agents=agents, couplings=couplings, delay=delay,
                           desired=desired, vector_rhs=vector_rhs,
                           name=f"linear-net-{seed}")

    intr_jacs = [
        (lambda x, t, _a=a_mats[i]: _a) for i in range(n_agents)
    ]
    oracle = JacobianOracle(intrinsic=intr_jacs, edges=oracle_edges, constant=True)

    offsets = rng.uniform(-0.5, 0.5, size=(n_agents, n))
    x0 = desired(0.0) + offsets.reshape(-1)
    initial_sup = float(max(np.linalg.norm(offsets[i]) for i in range(n_agents)))

    def history(s, _x0=x0):
        return _x0

    return LinearNetworkBundle(system=system, oracle=oracle, sigma_bar=sigma_bar,
                               sigma_under=sigma_under, b_bar=b_bar, d_sup=d_sup,
                               history=history, initial_sup=initial_sup)
