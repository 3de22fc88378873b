"""Verification of the scalability conditions and the resulting deviation envelope.

Three conditions are checked on a network:

  (i)   every coupling vanishes along the desired solution;
  (ii)  for each agent, the Euclidean measure of the self Jacobian (intrinsic
        plus delay-free coupling derivatives in the first argument) plus the
        spectral norms of the delay-free source derivatives is <= -sigma_bar;
  (iii) for each agent, the spectral norm of the summed delayed first-argument
        derivatives plus the norms of the delayed source derivatives is
        <= sigma_under.

With sigma_under < sigma_bar the max-over-agents deviation admits the
envelope ``initial_sup * exp(-rate t) + b_bar * d_sup / (sigma_bar -
sigma_under)`` where the rate solves ``lam - sigma_bar + sigma_under *
exp(lam * tau0) = 0``.

Conditions quantify over all states; they are discharged either exactly
(constant Jacobians, declared closed forms) or by deterministic
low-discrepancy sampling over declared state boxes, in which case the
certificate is flagged as sampled.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import InvalidInputError
from .halanay import Envelope, solve_rate
from .measures import mu2, norm2
from .netmodel import NetworkSystem

CONDITION_I_TOL = 1e-9


# ---------------------------------------------------------------------------
# Jacobian oracles

@dataclass
class CouplingJacobian:
    """Derivatives of one coupling function w.r.t. its two state arguments."""

    d1: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    d2: Optional[Callable[[np.ndarray, np.ndarray, float], np.ndarray]] = None


@dataclass
class EdgeJacobians:
    free: Optional[CouplingJacobian] = None
    delayed: Optional[CouplingJacobian] = None


def _fd_jacobian(fn, args, index, step=1e-6):
    x = np.asarray(args[index], dtype=float)
    cols = []
    for k in range(x.shape[0]):
        h = step * max(1.0, abs(x[k]))
        lo, hi = x.copy(), x.copy()
        lo[k] -= h
        hi[k] += h
        a_hi = list(args)
        a_hi[index] = hi
        a_lo = list(args)
        a_lo[index] = lo
        cols.append((np.asarray(fn(*a_hi), dtype=float)
                     - np.asarray(fn(*a_lo), dtype=float)) / (2 * h))
    return np.stack(cols, axis=1)


@dataclass
class JacobianOracle:
    """Per-agent and per-coupling partial derivatives as matrix-valued functions.

    ``intrinsic[i](x_i, t)`` is the Jacobian of agent i's intrinsic dynamics;
    ``edges`` aligns with ``system.couplings``.  ``constant=True`` declares all
    Jacobians state- and time-independent, enabling an exact single-point
    evaluation of the conditions.
    """

    intrinsic: list
    edges: list
    constant: bool = False
    tag: str = "analytic"

    @classmethod
    def finite_difference(cls, system: NetworkSystem, step: float = 1e-6,
                          constant: bool = False) -> "JacobianOracle":
        """Central-difference oracle built from the system's own callables."""
        intr = [
            (lambda x, t, _f=a.intrinsic: _fd_jacobian(_f, (x, t), 0, step))
            for a in system.agents
        ]
        edges = []
        for c in system.couplings:
            def make(fn):
                return CouplingJacobian(
                    d1=lambda xi, xs, t, _f=fn: _fd_jacobian(_f, (xi, xs, t), 0, step),
                    d2=lambda xi, xs, t, _f=fn: _fd_jacobian(_f, (xi, xs, t), 1, step),
                )
            edges.append(EdgeJacobians(
                free=make(c.delay_free) if c.delay_free is not None else None,
                delayed=make(c.delayed) if c.delayed is not None else None,
            ))
        return cls(intrinsic=intr, edges=edges, constant=constant, tag="finite-difference")


def oracle_agreement(a: JacobianOracle, b: JacobianOracle, system: NetworkSystem,
                     points) -> float:
    """Max entrywise difference between two oracles over (t, stacked x) points."""
    worst = 0.0
    slices = system.agent_slices
    for t, x in points:
        for i, s in enumerate(slices):
            worst = max(worst, float(np.max(np.abs(
                np.asarray(a.intrinsic[i](x[s], t)) - np.asarray(b.intrinsic[i](x[s], t))))))
        for c, ea, eb in zip(system.couplings, a.edges, b.edges):
            xi = x[slices[c.target]]
            xs = (np.asarray(system.leaders[c.source](t), dtype=float)
                  if c.is_leader_edge else x[slices[c.source]])
            for part in ("free", "delayed"):
                ja, jb = getattr(ea, part), getattr(eb, part)
                if ja is None or jb is None:
                    continue
                worst = max(worst, float(np.max(np.abs(
                    np.asarray(ja.d1(xi, xs, t)) - np.asarray(jb.d1(xi, xs, t))))))
                if ja.d2 is not None and jb.d2 is not None:
                    worst = max(worst, float(np.max(np.abs(
                        np.asarray(ja.d2(xi, xs, t)) - np.asarray(jb.d2(xi, xs, t))))))
    return worst


# ---------------------------------------------------------------------------
# Sample domains

@dataclass
class SampleDomain:
    """Per-agent state boxes and a time window, sampled with a seeded Sobol set."""

    boxes: list
    t_window: tuple
    n_samples: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidInputError("need at least one sample")
        if self.t_window[1] < self.t_window[0]:
            raise InvalidInputError(f"bad time window {self.t_window}")
        norm = []
        for lo, hi in self.boxes:
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            if lo.shape != hi.shape or np.any(hi <= lo):
                raise InvalidInputError("sample boxes must have hi > lo componentwise")
            norm.append((lo, hi))
        self.boxes = norm

    @classmethod
    def cube(cls, system: NetworkSystem, half_width: float, t_window=(0.0, 10.0),
             n_samples: int = 256, seed: int = 0) -> "SampleDomain":
        boxes = [(-half_width * np.ones(a.state_dim), half_width * np.ones(a.state_dim))
                 for a in system.agents]
        return cls(boxes=boxes, t_window=t_window, n_samples=n_samples, seed=seed)

    def points(self, system: NetworkSystem):
        """Yield (t, stacked state) sample points."""
        if len(self.boxes) != system.n_agents:
            raise InvalidInputError("one box per agent required")
        dim = system.state_dim + 1
        sob = qmc.Sobol(d=dim, scramble=True, seed=self.seed)
        u = sob.random(self.n_samples)
        lo = np.concatenate([b[0] for b in self.boxes] + [[self.t_window[0]]])
        hi = np.concatenate([b[1] for b in self.boxes] + [[self.t_window[1]]])
        if self.t_window[1] == self.t_window[0]:
            hi[-1] = lo[-1] + 1.0
            u[:, -1] = 0.0
        pts = lo + u * (hi - lo)
        for row in pts:
            yield float(row[-1]), row[:-1]

    def center(self, system: NetworkSystem):
        x = np.concatenate([(b[0] + b[1]) / 2.0 for b in self.boxes])
        return float(self.t_window[0]), x


# ---------------------------------------------------------------------------
# Results

@dataclass
class ConditionResult:
    name: str
    passed: bool
    value: float
    per_agent: np.ndarray
    margins: np.ndarray
    worst: Optional[dict] = None


@dataclass
class ViolationReport:
    """Structured certificate failure: which condition broke and where."""

    condition: str
    value: float
    threshold: float
    message: str
    worst: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return False


@dataclass
class Certificate:
    """Witness of the scalability conditions and the induced envelope constants."""

    sigma_bar: float
    sigma_under: float
    b_bar: float
    lambda_hat: float
    tau0: float
    K: float = 1.0
    mode: str = "closed-form"
    margins: list = field(default_factory=list)

    def __post_init__(self):
        if not (0.0 <= self.sigma_under < self.sigma_bar):
            raise InvalidInputError(
                f"need 0 <= sigma_under < sigma_bar, got "
                f"({self.sigma_under}, {self.sigma_bar})"
            )
        if self.K < 1.0 - 1e-12:
            raise InvalidInputError(f"coordinate-change constant must be >= 1, got {self.K}")

    @property
    def passed(self) -> bool:
        return True

    @property
    def gain(self) -> float:
        return self.b_bar / (self.sigma_bar - self.sigma_under)

    def to_dict(self) -> dict:
        return {
            "sigma_bar": self.sigma_bar,
            "sigma_under": self.sigma_under,
            "b_bar": self.b_bar,
            "lambda_hat": self.lambda_hat,
            "K": self.K,
            "mode": self.mode,
            "margins": self.margins,
            "tau0": self.tau0,
        }

    def to_json(self, path: str) -> None:
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(sigma_bar=d["sigma_bar"], sigma_under=d["sigma_under"],
                   b_bar=d["b_bar"], lambda_hat=d["lambda_hat"], tau0=d["tau0"],
                   K=d.get("K", 1.0), mode=d.get("mode", "closed-form"),
                   margins=d.get("margins", []))


# ---------------------------------------------------------------------------
# Condition checks

def check_condition_i(system: NetworkSystem, times=None,
                      tol: float = CONDITION_I_TOL) -> ConditionResult:
    """All couplings vanish along the desired solution (delayed arguments at t - tau)."""
    if times is None:
        times = np.linspace(0.0, 10.0, 41)
    per_agent = np.zeros(system.n_agents)
    worst = None
    slices = system.agent_slices
    for t in times:
        t = float(t)
        xd = system.desired_at(t)
        t_del = t - float(system.delay.tau(t))
        xd_del = system.desired_at(t_del)
        for c in system.couplings:
            xi = xd[slices[c.target]]
            xi_d = xd_del[slices[c.target]]
            if c.is_leader_edge:
                src = np.asarray(system.leaders[c.source](t), dtype=float)
                src_d = np.asarray(system.leaders[c.source](t_del), dtype=float)
            else:
                src = xd[slices[c.source]]
                src_d = xd_del[slices[c.source]]
            res = 0.0
            if c.delay_free is not None:
                res = max(res, float(np.linalg.norm(c.delay_free(xi, src, t))))
            if c.delayed is not None:
                res = max(res, float(np.linalg.norm(c.delayed(xi_d, src_d, t))))
            if res > per_agent[c.target]:
                per_agent[c.target] = res
                if worst is None or res > worst["residual"]:
                    worst = {"agent": c.target, "source": c.source, "t": t, "residual": res}
    value = float(per_agent.max()) if system.n_agents else 0.0
    return ConditionResult(name="i", passed=value < tol, value=value,
                           per_agent=per_agent, margins=tol - per_agent, worst=worst)


def _edge_groups(system: NetworkSystem, jac: JacobianOracle):
    """Per-agent lists of (coupling, jacobians) split by delay-free/delayed."""
    free = [[] for _ in range(system.n_agents)]
    delayed = [[] for _ in range(system.n_agents)]
    for c, e in zip(system.couplings, jac.edges):
        if e.free is not None:
            free[c.target].append((c, e.free))
        if e.delayed is not None:
            delayed[c.target].append((c, e.delayed))
    return free, delayed


def _source_state(system, slices, c, t, x):
    if c.is_leader_edge:
        return np.asarray(system.leaders[c.source](t), dtype=float)
    return x[slices[c.source]]


def check_condition_ii(system: NetworkSystem, jac: JacobianOracle,
                       domain: Optional[SampleDomain] = None) -> ConditionResult:
    """Worst-case measure of the delay-free closed loop; passes iff it is < 0.

    Returns sigma_bar = -(max over agents and samples) as ``value``.
    """
    free, _ = _edge_groups(system, jac)
    slices = system.agent_slices
    pts = _evaluation_points(system, jac, domain)
    per_agent = np.full(system.n_agents, -np.inf)
    worst = None
    for t, x in pts:
        for i in range(system.n_agents):
            xi = x[slices[i]]
            j_self = np.asarray(jac.intrinsic[i](xi, t), dtype=float)
            norm_sum = 0.0
            for c, cj in free[i]:
                xs = _source_state(system, slices, c, t, x)
                j_self = j_self + np.asarray(cj.d1(xi, xs, t), dtype=float)
                if not c.is_leader_edge:
                    norm_sum += norm2(cj.d2(xi, xs, t))
            val = mu2(j_self) + norm_sum
            if val > per_agent[i]:
                per_agent[i] = val
                if worst is None or val > worst["value"]:
                    worst = {"agent": i, "t": t, "value": val}
    sigma_bar = -float(per_agent.max())
    return ConditionResult(name="ii", passed=sigma_bar > 0.0, value=sigma_bar,
                           per_agent=per_agent,
                           margins=(-per_agent) - sigma_bar, worst=worst)


def check_condition_iii(system: NetworkSystem, jac: JacobianOracle,
                        domain: Optional[SampleDomain] = None) -> ConditionResult:
    """Worst-case gain of the delayed couplings (sigma_under as ``value``).

    First-argument derivatives are summed inside one spectral norm; source
    derivatives contribute norm-wise.
    """
    _, delayed = _edge_groups(system, jac)
    slices = system.agent_slices
    pts = _evaluation_points(system, jac, domain)
    per_agent = np.zeros(system.n_agents)
    worst = None
    for t, x in pts:
        for i in range(system.n_agents):
            if not delayed[i]:
                continue
            xi = x[slices[i]]
            d1_sum = None
            norm_sum = 0.0
            for c, cj in delayed[i]:
                xs = _source_state(system, slices, c, t, x)
                j1 = np.asarray(cj.d1(xi, xs, t), dtype=float)
                d1_sum = j1 if d1_sum is None else d1_sum + j1
                if not c.is_leader_edge:
                    norm_sum += norm2(cj.d2(xi, xs, t))
            val = (norm2(d1_sum) if d1_sum is not None else 0.0) + norm_sum
            if val > per_agent[i]:
                per_agent[i] = val
                if worst is None or val > worst["value"]:
                    worst = {"agent": i, "t": t, "value": val}
    sigma_under = float(per_agent.max()) if system.n_agents else 0.0
    return ConditionResult(name="iii", passed=math.isfinite(sigma_under),
                           value=sigma_under, per_agent=per_agent,
                           margins=sigma_under - per_agent, worst=worst)


def _evaluation_points(system, jac, domain):
    if jac.constant:
        if domain is not None:
            return [domain.center(system)]
        return [(0.0, np.zeros(system.state_dim))]
    if domain is None:
        raise InvalidInputError("non-constant Jacobians require a SampleDomain")
    return domain.points(system)


def estimate_b_bar(system: NetworkSystem, domain: Optional[SampleDomain] = None):
    """Declared disturbance intensity bound, or a sampled estimate of it.

    Returns (b_bar, exact_flag).
    """
    declared = [a.b_bar for a in system.agents]
    if all(v is not None for v in declared):
        return (max(declared) if declared else 0.0), True
    if domain is None:
        raise InvalidInputError("agents without declared b_bar require a SampleDomain")
    worst = 0.0
    slices = system.agent_slices
    for t, x in domain.points(system):
        for a, s in zip(system.agents, slices):
            if a.disturbance_gain is None:
                continue
            worst = max(worst, norm2(a.disturbance_gain(x[s], t)))
    for a in system.agents:
        if a.b_bar is not None:
            worst = max(worst, a.b_bar)
    return worst, False


def certify(system: NetworkSystem, jac: JacobianOracle,
            domain: Optional[SampleDomain] = None, times=None):
    """Run conditions (i)-(iii) and assemble a Certificate, or report a violation."""
    res_i = check_condition_i(system, times=times)
    if not res_i.passed:
        return ViolationReport(
            condition="i", value=res_i.value, threshold=CONDITION_I_TOL,
            message="couplings do not vanish along the desired solution",
            worst=res_i.worst)
    res_ii = check_condition_ii(system, jac, domain)
    if not res_ii.passed:
        return ViolationReport(
            condition="ii", value=res_ii.value, threshold=0.0,
            message="delay-free closed loop is not uniformly contracting",
            worst=res_ii.worst)
    res_iii = check_condition_iii(system, jac, domain)
    sigma_bar, sigma_under = res_ii.value, res_iii.value
    if sigma_under >= sigma_bar:
        return ViolationReport(
            condition="iii", value=sigma_under, threshold=sigma_bar,
            message="delayed coupling gain reaches the contraction margin",
            worst=res_iii.worst)
    b_bar, b_exact = estimate_b_bar(system, domain)
    mode = "closed-form" if (jac.constant and b_exact) else "sampled"
    margins = [
        {"agent": i,
         "condition_i": float(res_i.margins[i]) if system.n_agents else 0.0,
         "condition_ii": float(res_ii.margins[i]),
         "condition_iii": float(res_iii.margins[i])}
        for i in range(system.n_agents)
    ]
    lam = solve_rate(-sigma_bar, sigma_under, system.delay.tau0)
    return Certificate(sigma_bar=sigma_bar, sigma_under=sigma_under, b_bar=b_bar,
                       lambda_hat=lam, tau0=system.delay.tau0, K=1.0, mode=mode,
                       margins=margins)


def bound_envelope(cert: Certificate, initial_sup: float, d_sup: float) -> Envelope:
    """Deviation envelope induced by a certificate.

    Both the transient and the offset are scaled by the coordinate-change
    constant K (1 when no transform was involved).
    """
    if initial_sup < 0.0 or d_sup < 0.0:
        raise InvalidInputError("initial_sup and d_sup must be nonnegative")
    offset = cert.K * cert.b_bar * d_sup / (cert.sigma_bar - cert.sigma_under)
    return Envelope(initial_sup=cert.K * initial_sup, rate=cert.lambda_hat, offset=offset)
