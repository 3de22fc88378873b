"""Differential-drive robot formation family.

A robot is a planar unicycle with force/torque inputs and force/torque
disturbances.  Controlling the "hand" point at distance ``l`` ahead of the
axle exactly linearizes the input-output dynamics to a double integrator in
the hand coordinates ``chi = (hand position, hand velocity)``; the residual
heading dynamics is stable and does not enter the reduced loop.

On top of the reduced model the module provides the delayed formation
protocol (position consensus towards delayed neighbours plus delay-free
leader tracking), concentric-circle scenario builders, and a closed-form
certificate based on a triangular change of coordinates of the hand state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.sparse as sp

from .certify import Certificate, ViolationReport
from .errors import InvalidInputError
from .halanay import solve_rate
from .measures import mu2, norm2, sigma_max, sigma_min
from .netmodel import AgentSpec, CouplingSpec, DelaySpec, NetworkSystem

ADJACENCY_MODES = ("intra_inter", "inward_only", "all_to_all")

# Per-edge coupling closures are skipped above this edge count; the stacked
# fast path then carries the dynamics alone.
EDGE_BUILD_LIMIT = 20_000


@dataclass(frozen=True)
class RobotParams:
    """Mass (kg), moment of inertia (kg m^2), hand offset (m)."""

    m: float = 10.1
    I: float = 0.13
    l: float = 0.12

    def __post_init__(self):
        if self.m <= 0 or self.I <= 0 or self.l <= 0:
            raise InvalidInputError(f"robot parameters must be positive, got {self}")

    @property
    def b_max(self) -> float:
        """Exact sup over headings of the disturbance intensity norm.

        The intensity columns are orthogonal with norms 1/m and l/I.
        """
        return max(1.0 / self.m, self.l / self.I)


@dataclass
class UnicycleState:
    px: float
    py: float
    v: float
    theta: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.v, self.theta, self.omega], dtype=float)

    @classmethod
    def from_array(cls, x) -> "UnicycleState":
        px, py, v, theta, omega = np.asarray(x, dtype=float)
        return cls(px, py, v, theta, omega)


def unicycle_rhs(state, force, torque, d_force, d_torque, params: RobotParams) -> np.ndarray:
    """Time derivative of [px, py, v, theta, omega]."""
    px, py, v, theta, omega = np.asarray(state, dtype=float)
    return np.array([
        v * math.cos(theta),
        v * math.sin(theta),
        (force + d_force) / params.m,
        omega,
        (torque + d_torque) / params.I,
    ])


def hand_intensity(theta: float, params: RobotParams) -> np.ndarray:
    """2x2 matrix mapping (force, torque) disturbances to hand acceleration."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c / params.m, -params.l * s / params.I],
                     [s / params.m, params.l * c / params.I]])


def _drift_accel(state, params: RobotParams) -> np.ndarray:
    _, _, v, theta, omega = np.asarray(state, dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([-v * omega * s - params.l * omega ** 2 * c,
                     v * omega * c - params.l * omega ** 2 * s])


def feedback_linearize(state, nu_bar, params: RobotParams) -> tuple:
    """Force/torque realizing hand acceleration nu_bar (plus disturbances).

    The input matrix has determinant l/(m I) != 0, so it is always invertible.
    """
    theta = float(np.asarray(state, dtype=float)[3])
    rhs = np.asarray(nu_bar, dtype=float) - _drift_accel(state, params)
    u = np.linalg.solve(hand_intensity(theta, params), rhs)
    return float(u[0]), float(u[1])


def hand_transform(state, params: RobotParams) -> np.ndarray:
    """[hand x, hand y, hand vx, hand vy, theta] from the full robot state."""
    px, py, v, theta, omega = np.asarray(state, dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    lw = params.l * omega
    return np.array([px + params.l * c, py + params.l * s,
                     v * c - lw * s, v * s + lw * c, theta])


def hand_transform_inverse(chi, theta: float, params: RobotParams) -> np.ndarray:
    """Full robot state from 4-d hand state and heading (algebraic inverse)."""
    hx, hy, hvx, hvy = np.asarray(chi, dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    v = c * hvx + s * hvy
    omega = (-s * hvx + c * hvy) / params.l
    return np.array([hx - params.l * c, hy - params.l * s, v, theta, omega])


def coordinate_transform(alpha: float) -> np.ndarray:
    """Upper-triangular hand-state transform [[I, alpha I], [0, I]]."""
    t = np.eye(4)
    t[0, 2] = t[1, 3] = float(alpha)
    return t


@dataclass(frozen=True)
class FormationGains:
    """Diagonal gains of the formation protocol, stored as 2-vectors."""

    kp: np.ndarray
    kpl: np.ndarray
    kvl: np.ndarray
    alpha: Optional[float] = None

    @classmethod
    def diagonal(cls, kp, kpl, kvl, alpha=None) -> "FormationGains":
        def vec(v):
            a = np.asarray(v, dtype=float) * np.ones(2)
            if a.shape != (2,):
                raise InvalidInputError(f"gain must be scalar or 2-vector, got {v!r}")
            return a
        return cls(kp=vec(kp), kpl=vec(kpl), kvl=vec(kvl), alpha=alpha)

    @classmethod
    def reference(cls) -> "FormationGains":
        return cls.diagonal(0.035, 0.7, 1.0)


@dataclass(frozen=True)
class LeaderCircle:
    """Constant-speed circular hand reference for the virtual leader."""

    radius: float = 10.0
    speed: float = 1.0
    center: tuple = (0.0, 0.0)
    phase: float = 0.0

    def __post_init__(self):
        if self.radius <= 0 or self.speed <= 0:
            raise InvalidInputError("leader radius and speed must be positive")

    @property
    def rate(self) -> float:
        return self.speed / self.radius

    def pos(self, t: float) -> np.ndarray:
        a = self.rate * t + self.phase
        return np.array([self.center[0] + self.radius * math.cos(a),
                         self.center[1] + self.radius * math.sin(a)])

    def vel(self, t: float) -> np.ndarray:
        a = self.rate * t + self.phase
        return self.speed * np.array([-math.sin(a), math.cos(a)])

    def acc(self, t: float) -> np.ndarray:
        a = self.rate * t + self.phase
        return -self.speed * self.rate * np.array([math.cos(a), math.sin(a)])

    def chi(self, t: float) -> np.ndarray:
        return np.concatenate([self.pos(t), self.vel(t)])

    def heading(self, t: float) -> float:
        return self.rate * t + self.phase + 0.5 * math.pi


@dataclass(frozen=True)
class SineDecayDisturbance:
    """Force/torque disturbance amplitude*sin(t)*exp(-decay t) on both channels."""

    target: int = 0
    amplitude: float = 2.0
    decay: float = 0.2

    def signal(self, t: float) -> np.ndarray:
        v = self.amplitude * math.sin(t) * math.exp(-self.decay * t)
        return np.array([v, v])

    @property
    def sup(self) -> float:
        """Declared bound on the Euclidean norm of the 2-d signal."""
        return abs(self.amplitude) * math.sqrt(2.0)


@dataclass(frozen=True)
class CircleFormation:
    """Concentric-circle pattern: circle k holds 4k robots at radius k * r0."""

    n_circles: int
    mode: str = "intra_inter"
    r0: float = 2.0

    def __post_init__(self):
        if self.n_circles < 1:
            raise InvalidInputError("need at least one circle")
        if self.mode not in ADJACENCY_MODES:
            raise InvalidInputError(
                f"unknown adjacency mode {self.mode!r}; pick one of {ADJACENCY_MODES}")
        if self.r0 <= 0:
            raise InvalidInputError("circle spacing r0 must be positive")

    @property
    def n_robots(self) -> int:
        return 2 * self.n_circles * (self.n_circles + 1)

    def circle_sizes(self) -> list:
        return [4 * k for k in range(1, self.n_circles + 1)]

    def circle_of(self) -> np.ndarray:
        """1-based circle index per robot."""
        out = np.empty(self.n_robots, dtype=int)
        start = 0
        for k, size in enumerate(self.circle_sizes(), start=1):
            out[start:start + size] = k
            start += size
        return out

    def groups(self) -> list:
        """Robot ids per circle (innermost first)."""
        out = []
        start = 0
        for size in self.circle_sizes():
            out.append(list(range(start, start + size)))
            start += size
        return out

    def offsets(self) -> np.ndarray:
        """Hand-position offsets of each robot relative to the leader (N, 2)."""
        rows = []
        for k, size in enumerate(self.circle_sizes(), start=1):
            ang = 2.0 * np.pi * np.arange(size) / size
            rows.append(np.column_stack([k * self.r0 * np.cos(ang),
                                         k * self.r0 * np.sin(ang)]))
        return np.vstack(rows)

    def neighbor_sets(self) -> list:
        """Delayed-communication neighbour ids per robot, by adjacency mode."""
        groups = self.groups()
        offsets = self.offsets()
        neigh = [[] for _ in range(self.n_robots)]
        if self.mode == "all_to_all":
            for i in range(self.n_robots):
                neigh[i] = [j for j in range(self.n_robots) if j != i]
            return neigh
        for k, ring in enumerate(groups):
            size = len(ring)
            for pos, i in enumerate(ring):
                if size > 1:
                    ahead = ring[(pos + 1) % size]
                    behind = ring[(pos - 1) % size]
                    neigh[i] = [ahead] if ahead == behind else [ahead, behind]
                if k > 0:
                    inner = groups[k - 1]
                    d = np.linalg.norm(offsets[inner] - offsets[i], axis=1)
                    neigh[i].append(inner[int(np.argmin(d))])
                if k + 1 < len(groups) and self.mode == "intra_inter":
                    outer = groups[k + 1]
                    d = np.linalg.norm(offsets[outer] - offsets[i], axis=1)
                    neigh[i].append(outer[int(np.argmin(d))])
        return neigh

    def max_degree(self) -> int:
        return max(len(s) for s in self.neighbor_sets())


def formation_protocol(chi_i, chi_i_delayed, delayed_neighbors: Iterable,
                       leader_chi, leader_offset, vdot_l,
                       gains: FormationGains) -> np.ndarray:
    """Commanded hand acceleration for one robot.

    ``delayed_neighbors`` yields pairs (chi_j at t - tau, desired offset of j
    relative to i); the leader state is delay-free.  ``leader_offset`` is the
    desired hand offset of the leader relative to the robot.
    """
    if leader_chi is None:
        raise InvalidInputError("formation protocol requires the leader state")
    chi_i = np.asarray(chi_i, dtype=float)
    leader_chi = np.asarray(leader_chi, dtype=float)
    nu = np.asarray(vdot_l, dtype=float).copy()
    nu += gains.kpl * ((leader_chi[:2] - chi_i[:2]) - np.asarray(leader_offset, dtype=float))
    nu += gains.kvl * (leader_chi[2:] - chi_i[2:])
    chi_i_delayed = np.asarray(chi_i_delayed, dtype=float)
    for chi_j_d, delta_ji in delayed_neighbors:
        chi_j_d = np.asarray(chi_j_d, dtype=float)
        nu += gains.kp * ((chi_j_d[:2] - chi_i_delayed[:2]) - np.asarray(delta_ji, dtype=float))
    return nu


def build_circle_scenario(formation: CircleFormation, gains: FormationGains,
                          params: RobotParams, delay: DelaySpec,
                          leader: Optional[LeaderCircle] = None,
                          disturbance: Optional[SineDecayDisturbance] = None,
                          ) -> NetworkSystem:
    """Closed-loop hand-coordinate network for a concentric-circle formation.

    Desired motion: every robot keeps a fixed world-frame hand offset from the
    leader reference, so the whole pattern translates rigidly along the
    leader's circle and all desired velocities equal the leader's.  The
    reduced-loop disturbance intensity is evaluated along the desired heading
    profile (headings are not part of the reduced state).
    """
    if leader is None:
        leader = LeaderCircle()
    if disturbance is not None and not (0 <= disturbance.target < formation.n_robots):
        raise InvalidInputError(
            f"disturbance target {disturbance.target} outside 0..{formation.n_robots - 1}")
    n = formation.n_robots
    rel = formation.offsets()
    neigh = formation.neighbor_sets()
    degrees = np.array([len(s) for s in neigh], dtype=float)

    def desired(t, _rel=rel, _leader=leader):
        eta = _leader.pos(t)
        vel = _leader.vel(t)
        out = np.empty((n, 4))
        out[:, 0] = eta[0] + _rel[:, 0]
        out[:, 1] = eta[1] + _rel[:, 1]
        out[:, 2] = vel[0]
        out[:, 3] = vel[1]
        return out.reshape(-1)

    kp, kpl, kvl = gains.kp, gains.kpl, gains.kvl
    b_max = params.b_max

    agents = []
    for i in range(n):
        def intrinsic(x, t, _leader=leader):
            acc = _leader.acc(t)
            return np.array([x[2], x[3], acc[0], acc[1]])

        if disturbance is not None and i == disturbance.target:
            def gain_fn(x, t, _p=params, _leader=leader):
                g = np.zeros((4, 4))
                g[2:, 2:] = hand_intensity(_leader.heading(t), _p)
                return g

            def dist_fn(t, _d=disturbance):
                sig = _d.signal(t)
                return np.array([0.0, 0.0, sig[0], sig[1]])

            agents.append(AgentSpec(state_dim=4, intrinsic=intrinsic,
                                    disturbance_gain=gain_fn, disturbance=dist_fn,
                                    output=np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]),
                                    output_lipschitz=1.0, b_bar=b_max))
        else:
            agents.append(AgentSpec(state_dim=4, intrinsic=intrinsic,
                                    output=np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]),
                                    output_lipschitz=1.0, b_bar=b_max))

    couplings = []
    n_edges = int(degrees.sum()) + n
    if n_edges <= EDGE_BUILD_LIMIT:
        for i in range(n):
            def leader_fn(xi, xl, t, _kpl=kpl, _kvl=kvl, _off=-rel[i]):
                acc = np.zeros(4)
                acc[2:] = (_kpl * ((xl[:2] - xi[:2]) - _off)
                           + _kvl * (xl[2:] - xi[2:]))
                return acc
            couplings.append(CouplingSpec(target=i, source=0, delay_free=leader_fn,
                                          is_leader_edge=True))
            for j in neigh[i]:
                def neigh_fn(xi_d, xj_d, t, _kp=kp, _delta=rel[j] - rel[i]):
                    acc = np.zeros(4)
                    acc[2:] = _kp * ((xj_d[:2] - xi_d[:2]) - _delta)
                    return acc
                couplings.append(CouplingSpec(target=i, source=j, delayed=neigh_fn))

    # Stacked fast path: identical dynamics via array operations.
    all_to_all = formation.mode == "all_to_all"
    if not all_to_all:
        rows, cols = [], []
        for i in range(n):
            rows.extend([i] * len(neigh[i]))
            cols.extend(neigh[i])
        adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    target = disturbance.target if disturbance is not None else None

    def vector_rhs(t, x, x_del, t_del, _leader=leader, _dist=disturbance):
        chi = x.reshape(n, 4)
        dx = np.empty_like(chi)
        dx[:, :2] = chi[:, 2:]
        acc = _leader.acc(t)[None, :] + kvl * (_leader.vel(t)[None, :] - chi[:, 2:])
        acc += kpl * (_leader.pos(t)[None, :] + rel - chi[:, :2])
        if x_del is not None:
            zeta = x_del.reshape(n, 4)[:, :2] - rel
            agg = zeta.sum(axis=0)[None, :] - zeta if all_to_all else adj @ zeta
            acc += kp * (agg - degrees[:, None] * zeta)
        if _dist is not None:
            acc[target] += hand_intensity(_leader.heading(t), params) @ _dist.signal(t)
        dx[:, 2:] = acc
        return dx.reshape(-1)

    return NetworkSystem(agents=agents, couplings=couplings, delay=delay,
                         desired=desired, leaders=[leader.chi],
                         vector_rhs=vector_rhs, has_delayed=True,
                         name=f"circles-{formation.n_circles}-{formation.mode}")


DOUBLE_INTEGRATOR = np.block([[np.zeros((2, 2)), np.eye(2)],
                              [np.zeros((2, 2)), np.zeros((2, 2))]])


def _leader_jacobian(gains: FormationGains) -> np.ndarray:
    j = np.zeros((4, 4))
    j[2:, :2] = -np.diag(gains.kpl)
    j[2:, 2:] = -np.diag(gains.kvl)
    return j


def _delayed_jacobians(gains: FormationGains, degree: float) -> tuple:
    j1 = np.zeros((4, 4))
    j1[2:, :2] = -degree * np.diag(gains.kp)
    j2 = np.zeros((4, 4))
    j2[2:, :2] = np.diag(gains.kp)
    return j1, j2


def formation_certificate(gains: FormationGains, max_degree: int, tau0: float,
                      params: RobotParams, alpha_grid=None):
    """Closed-form certificate for the formation protocol.

    Searches the common transform parameter alpha over a logarithmic grid,
    keeping the value that maximizes the contraction margin minus the delayed
    gain; reports a violation naming the failing condition otherwise.
    """
    if max_degree < 0:
        raise InvalidInputError("max_degree must be >= 0")
    if alpha_grid is None:
        alpha_grid = np.geomspace(1e-2, 1e2, 200)
    if gains.alpha is not None:
        alpha_grid = np.array([gains.alpha])
    a_self = DOUBLE_INTEGRATOR + _leader_jacobian(gains)
    j1, j2 = _delayed_jacobians(gains, float(max_degree))
    best = None
    for alpha in np.asarray(alpha_grid, dtype=float):
        t = coordinate_transform(alpha)
        t_inv = np.linalg.inv(t)
        sb = -mu2(t @ a_self @ t_inv)
        su = norm2(t @ j1 @ t_inv) + max_degree * norm2(t @ j2 @ t_inv)
        if best is None or sb - su > best[1] - best[2]:
            best = (alpha, sb, su, t)
    alpha, sb, su, t = best
    if sb <= 0.0:
        return ViolationReport(
            condition="C2", value=-sb, threshold=0.0,
            message="transformed delay-free loop is not contracting for any "
                    "searched alpha",
            worst={"alpha": alpha})
    if su >= sb:
        return ViolationReport(
            condition="C3", value=su, threshold=sb,
            message="delayed coupling gain reaches the contraction margin at "
                    "the best searched alpha",
            worst={"alpha": alpha, "max_degree": max_degree})
    k_const = sigma_max(t) / sigma_min(t)
    lam = solve_rate(-sb, su, tau0)
    margins = [{"agent": "all", "alpha": float(alpha), "max_degree": int(max_degree),
                "condition_C2": float(sb), "condition_C3": float(sb - su)}]
    return Certificate(sigma_bar=sb, sigma_under=su, b_bar=params.b_max,
                       lambda_hat=lam, tau0=tau0, K=float(k_const),
                       mode="closed-form", margins=margins)


def full_robot_closed_loop(nu_fn: Callable[[float], np.ndarray],
                           dist_fn: Optional[Callable[[float], np.ndarray]],
                           params: RobotParams) -> Callable:
    """RHS of the full 5-state robot under the linearizing control.

    ``nu_fn(t)`` is the commanded hand acceleration, ``dist_fn(t)`` the raw
    force/torque disturbance pair.
    """
    def rhs(t, x):
        force, torque = feedback_linearize(x, nu_fn(t), params)
        d = dist_fn(t) if dist_fn is not None else (0.0, 0.0)
        return unicycle_rhs(x, force, torque, d[0], d[1], params)
    return rhs
