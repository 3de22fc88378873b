"""Recurrent networks with delayed activations.

The model is ``x_i' = p_i(x_i) (-c_i(x_i) + sum_j a_ij g(x_j)
+ sum_j b_ij g_tau(x_j(t - tau(t))) + u_i + d_i(t))`` with a positive bounded
amplification ``p`` and increasing decay ``c``; with ``p = 1`` and linear
decay this is the classic continuous Hopfield model.  Certification uses
interval bounds on the declared activation-derivative ranges, so it is exact
for saturating activations such as tanh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .certify import Certificate, ViolationReport
from .errors import EquilibriumError, InvalidInputError
from .halanay import solve_rate
from .netmodel import AgentSpec, CouplingSpec, DelaySpec, NetworkSystem

EQUILIBRIUM_TOL = 1e-8


@dataclass(frozen=True)
class Activation:
    """Scalar activation applied elementwise, with a declared derivative range."""

    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    deriv_lo: float
    deriv_hi: float
    name: str

    @property
    def deriv_abs_sup(self) -> float:
        return max(abs(self.deriv_lo), abs(self.deriv_hi))


TANH = Activation(fn=np.tanh, deriv=lambda x: 1.0 / np.cosh(x) ** 2,
                  deriv_lo=0.0, deriv_hi=1.0, name="tanh")

# Bump shape in (0, 1] used to build bounded amplification profiles.
_BUMP = lambda x: 1.0 / (1.0 + np.square(x))  # noqa: E731


def check_derivative_declaration(act: Activation, lo: float = -20.0, hi: float = 20.0,
                                 n: int = 4001) -> float:
    """Max violation of the declared derivative range on a dense grid (<= 0 is clean)."""
    xs = np.linspace(lo, hi, n)
    d = act.deriv(xs)
    return float(max(act.deriv_lo - d.min(), d.max() - act.deriv_hi))


@dataclass
class CGNetwork:
    """Amplified recurrent network with delay-free and delayed weight matrices.

    Decay: ``c_i(x) = decay_lin[i] * x + decay_scale[i] * decay_shape(x)`` with
    ``decay_scale >= 0`` and a nondecreasing shape, so ``inf c_i' = decay_lin[i]
    + decay_scale[i] * shape_deriv_lo``.  Amplification: ``p(x) = amp_lo +
    (amp_hi - amp_lo) * bump(x)`` staying within (amp_lo, amp_hi].
    """

    weights_free: np.ndarray
    weights_delayed: np.ndarray
    inputs: np.ndarray
    delay: DelaySpec
    decay_lin: np.ndarray
    decay_scale: Optional[np.ndarray] = None
    decay_shape: Optional[Activation] = None
    activation: Activation = TANH
    activation_delayed: Activation = TANH
    amp_lo: float = 1.0
    amp_hi: float = 1.0
    disturbance: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        self.weights_free = np.asarray(self.weights_free, dtype=float)
        self.weights_delayed = np.asarray(self.weights_delayed, dtype=float)
        n = self.weights_free.shape[0]
        if self.weights_free.shape != (n, n) or self.weights_delayed.shape != (n, n):
            raise InvalidInputError("weight matrices must be square and same size")
        self.inputs = np.asarray(self.inputs, dtype=float) * np.ones(n)
        self.decay_lin = np.asarray(self.decay_lin, dtype=float) * np.ones(n)
        if self.decay_scale is None:
            self.decay_scale = np.zeros(n)
        else:
            self.decay_scale = np.asarray(self.decay_scale, dtype=float) * np.ones(n)
            if np.any(self.decay_scale < 0):
                raise InvalidInputError("decay_scale must be nonnegative")
            if np.any(self.decay_scale > 0) and self.decay_shape is None:
                raise InvalidInputError("nonzero decay_scale requires a decay_shape")
        if not (0.0 < self.amp_lo <= self.amp_hi):
            raise InvalidInputError(
                f"need 0 < amp_lo <= amp_hi, got ({self.amp_lo}, {self.amp_hi})")

    @property
    def n(self) -> int:
        return self.weights_free.shape[0]

    @property
    def is_hopfield(self) -> bool:
        return (self.amp_lo == self.amp_hi == 1.0
                and not np.any(self.decay_scale))

    @classmethod
    def hopfield(cls, c, weights_delayed, weights_free=None, inputs=0.0,
                 delay: Optional[DelaySpec] = None, tau0: float = 0.1,
                 activation: Activation = TANH,
                 disturbance=None) -> "CGNetwork":
        wd = np.asarray(weights_delayed, dtype=float)
        wf = np.zeros_like(wd) if weights_free is None else np.asarray(weights_free, float)
        if delay is None:
            delay = DelaySpec.constant(tau0)
        return cls(weights_free=wf, weights_delayed=wd, inputs=inputs, delay=delay,
                   decay_lin=c, activation=activation, activation_delayed=activation,
                   disturbance=disturbance)

    def amplification(self, x: np.ndarray) -> np.ndarray:
        if self.amp_lo == self.amp_hi:
            return np.full_like(np.asarray(x, dtype=float), self.amp_lo)
        return self.amp_lo + (self.amp_hi - self.amp_lo) * _BUMP(x)

    def decay(self, x: np.ndarray) -> np.ndarray:
        out = self.decay_lin * x
        if self.decay_shape is not None:
            out = out + self.decay_scale * self.decay_shape.fn(x)
        return out

    def decay_deriv(self, x: np.ndarray) -> np.ndarray:
        out = self.decay_lin * np.ones_like(np.asarray(x, dtype=float))
        if self.decay_shape is not None:
            out = out + self.decay_scale * self.decay_shape.deriv(x)
        return out

    @property
    def decay_deriv_inf(self) -> np.ndarray:
        out = self.decay_lin.copy()
        if self.decay_shape is not None:
            out = out + self.decay_scale * self.decay_shape.deriv_lo
        return out


def cg_rhs(x, x_delayed, net: CGNetwork, t: float) -> np.ndarray:
    """Exact network right-hand side; delayed weights act on the delayed state."""
    x = np.asarray(x, dtype=float)
    drive = -net.decay(x) + net.weights_free @ net.activation.fn(x) + net.inputs
    if x_delayed is not None:
        drive = drive + net.weights_delayed @ net.activation_delayed.fn(
            np.asarray(x_delayed, dtype=float))
    if net.disturbance is not None:
        drive = drive + np.asarray(net.disturbance(t), dtype=float)
    return net.amplification(x) * drive


def equilibrium_residual(net: CGNetwork, x: np.ndarray) -> float:
    """Max absolute value of the undisturbed balance equation at x."""
    r = (-net.decay(x) + net.weights_free @ net.activation.fn(x)
         + net.weights_delayed @ net.activation_delayed.fn(x) + net.inputs)
    return float(np.max(np.abs(r)))


@dataclass
class EquilibriumResult:
    x_star: np.ndarray
    residual: float
    method: str


def solve_equilibrium(net: CGNetwork, x0=None, dt: float = 1e-2,
                      t_budget: float = 2000.0, rate_tol: float = 1e-10,
                      residual_tol: float = EQUILIBRIUM_TOL) -> EquilibriumResult:
    """Find the equilibrium by relaxing the delay-collapsed dynamics.

    Integrates the undisturbed system with the delayed state tied to the
    current one (the delay is irrelevant at a fixed point) until the velocity
    stalls, then polishes with a damped fixed-point iteration on the balance
    equation.  Certified networks converge from any bounded start.
    """
    x = np.zeros(net.n) if x0 is None else np.asarray(x0, dtype=float).copy()

    def rhs(v):
        return net.amplification(v) * (
            -net.decay(v) + net.weights_free @ net.activation.fn(v)
            + net.weights_delayed @ net.activation_delayed.fn(v) + net.inputs)

    steps = int(t_budget / dt)
    check_every = 200
    converged = False
    for step in range(steps):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise EquilibriumError(np.inf, "relaxation diverged; is the network certified?")
        if step % check_every == 0 and float(np.max(np.abs(rhs(x)))) < rate_tol:
            converged = True
            break
    method = "simulate-to-convergence"

    # Fixed-point polish on c(x) = Wf g(x) + Wd g_tau(x) + u.
    can_polish = net.decay_shape is None or np.all(net.decay_deriv_inf > 0)
    if can_polish:
        method = "damped fixed point"
        for _ in range(2000):
            target = (net.weights_free @ net.activation.fn(x)
                      + net.weights_delayed @ net.activation_delayed.fn(x) + net.inputs)
            if net.decay_shape is None:
                x_new = target / net.decay_lin
            else:
                x_new = x - (net.decay(x) - target) / net.decay_deriv(x)
            x = 0.5 * x + 0.5 * x_new
            if float(np.max(np.abs(net.decay(x) - target))) < 1e-13:
                break

    residual = equilibrium_residual(net, x)
    if residual >= residual_tol:
        if not converged and not can_polish:
            raise EquilibriumError(residual, "relaxation stalled before the tolerance")
        raise EquilibriumError(residual)
    return EquilibriumResult(x_star=x, residual=residual, method=method)


def recurrent_certificate(net: CGNetwork):
    """Interval-bound certificate from the declared derivative ranges.

    Per neuron, the delay-free contraction uses the worst decay slope and the
    signed self weight; the delayed gain is the weighted row sum of the
    delayed-activation derivative bound.  Passes iff amp_hi * sigma_under <
    amp_lo * sigma_bar; the certificate carries the amplified constants, so
    its gain is amp_hi / (amp_lo * sigma_bar - amp_hi * sigma_under).
    """
    g, gt = net.activation, net.activation_delayed
    a, b = net.weights_free, net.weights_delayed
    n = net.n
    diag = np.diag(a)
    self_term = np.where(diag >= 0, diag * g.deriv_hi, diag * g.deriv_lo)
    cross = (np.abs(a).sum(axis=1) - np.abs(diag)) * g.deriv_abs_sup
    c2_vals = -net.decay_deriv_inf + self_term + cross
    sigma_bar_raw = -float(c2_vals.max())
    if sigma_bar_raw <= 0.0:
        worst = int(np.argmax(c2_vals))
        return ViolationReport(
            condition="C2", value=-sigma_bar_raw, threshold=0.0,
            message="delay-free per-neuron contraction fails",
            worst={"agent": worst, "value": float(c2_vals[worst])})
    c3_vals = np.abs(b).sum(axis=1) * gt.deriv_abs_sup
    sigma_under_raw = float(c3_vals.max())
    if net.amp_hi * sigma_under_raw >= net.amp_lo * sigma_bar_raw:
        worst = int(np.argmax(c3_vals))
        return ViolationReport(
            condition="C4", value=net.amp_hi * sigma_under_raw,
            threshold=net.amp_lo * sigma_bar_raw,
            message="amplified delayed gain reaches the amplified contraction margin",
            worst={"agent": worst, "row_gain": float(c3_vals[worst])})
    sb = net.amp_lo * sigma_bar_raw
    su = net.amp_hi * sigma_under_raw
    lam = solve_rate(-sb, su, net.delay.tau0)
    margins = [
        {"agent": i,
         "condition_C2": float(-c2_vals[i] - sigma_bar_raw),
         "condition_C3": float(sigma_under_raw - c3_vals[i])}
        for i in range(n)
    ]
    return Certificate(sigma_bar=sb, sigma_under=su, b_bar=net.amp_hi,
                       lambda_hat=lam, tau0=net.delay.tau0, K=1.0,
                       mode="closed-form", margins=margins)


def hopfield_weight_sampler(n: int, row_margin: float, seed: int) -> np.ndarray:
    """Nonnegative delayed weights with zero diagonal and row sums == row_margin."""
    if row_margin < 0:
        raise InvalidInputError(f"row_margin must be >= 0, got {row_margin}")
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.1, 1.0, size=(n, n))
    np.fill_diagonal(w, 0.0)
    if row_margin == 0.0:
        return np.zeros((n, n))
    sums = w.sum(axis=1)
    if np.any(sums == 0.0):
        raise InvalidInputError("degenerate sample; increase n")
    return w * (row_margin / sums)[:, None]


def ring_chord_weights(n: int = 6, weight: float = 15.0,
                       chords=((0, 3), (3, 0))) -> np.ndarray:
    """Ring topology (each neuron driven by its successor) plus chord edges.

    Chord pairs are (target, source); with the defaults the maximum delayed
    in-degree is 2.
    """
    if n < 3:
        raise InvalidInputError("ring needs at least 3 neurons")
    w = np.zeros((n, n))
    for i in range(n):
        w[i, (i + 1) % n] = weight
    for tgt, src in chords:
        if tgt == src:
            raise InvalidInputError("chord endpoints must differ")
        w[tgt, src] = weight
    return w


def to_network_system(net: CGNetwork, x_star: np.ndarray,
                      include_edges: Optional[bool] = None) -> NetworkSystem:
    """Wrap the network as scalar agents around its equilibrium.

    Per-edge couplings (built for constant amplification) carry the
    amplification factor so the assembled dynamics match ``cg_rhs`` exactly;
    they do not vanish at the equilibrium individually (only their balance
    does), so desired-solution checks for these systems are of the
    closed-loop kind.
    """
    x_star = np.asarray(x_star, dtype=float)
    n = net.n
    amp_constant = net.amp_lo == net.amp_hi
    if include_edges is None:
        include_edges = amp_constant and (
            np.count_nonzero(net.weights_free)
            + np.count_nonzero(net.weights_delayed)) <= 5000
    if include_edges and not amp_constant and np.any(net.weights_delayed):
        raise InvalidInputError(
            "per-edge delayed couplings cannot carry a state-dependent "
            "amplification; use the stacked path (include_edges=False)")

    agents = []
    for i in range(n):
        def intrinsic(x, t, _i=i):
            xi = float(x[0])
            p = float(net.amplification(np.array([xi]))[0])
            c = float(net.decay_lin[_i] * xi
                      + (net.decay_scale[_i] * net.decay_shape.fn(xi)
                         if net.decay_shape is not None else 0.0))
            return np.array([p * (-c + net.inputs[_i])])

        def gain(x, t):
            return net.amplification(np.asarray(x, dtype=float)).reshape(1, 1)

        dist = None
        if net.disturbance is not None:
            def dist(t, _i=i):
                return np.atleast_1d(np.asarray(net.disturbance(t), dtype=float)[_i])

        agents.append(AgentSpec(state_dim=1, intrinsic=intrinsic,
                                disturbance_gain=gain, disturbance=dist,
                                b_bar=net.amp_hi))

    couplings = []
    if include_edges:
        for i in range(n):
            for j in range(n):
                aij = net.weights_free[i, j]
                bij = net.weights_delayed[i, j]
                if aij != 0.0:
                    if i == j:
                        def h(xi, xs, t, _w=aij):
                            return net.amplification(xi) * _w * net.activation.fn(xi)
                    else:
                        def h(xi, xs, t, _w=aij):
                            return net.amplification(xi) * _w * net.activation.fn(xs)
                    couplings.append(CouplingSpec(target=i, source=j, delay_free=h))
                if bij != 0.0:
                    if i == j:
                        def h(xi, xs, t, _w=bij):
                            return (net.amplification(xi) * _w
                                    * net.activation_delayed.fn(xi))
                    else:
                        def h(xi, xs, t, _w=bij):
                            return (net.amplification(xi) * _w
                                    * net.activation_delayed.fn(xs))
                    couplings.append(CouplingSpec(target=i, source=j, delayed=h))

    def vector_rhs(t, x, x_del, t_del):
        return cg_rhs(x, x_del, net, t)

    def desired(t, _x=x_star):
        return _x

    return NetworkSystem(agents=agents, couplings=couplings, delay=net.delay,
                         desired=desired, vector_rhs=vector_rhs,
                         has_delayed=bool(np.any(net.weights_delayed)),
                         name=f"recurrent-{n}")


def save_weights_csv(weights: np.ndarray, path: str) -> None:
    np.savetxt(path, np.asarray(weights, dtype=float), delimiter=",", fmt="%.12g")


def load_weights_csv(path: str) -> np.ndarray:
    w = np.loadtxt(path, delimiter=",", ndmin=2)
    if w.shape[0] != w.shape[1]:
        raise InvalidInputError(f"weight file {path} is not square: {w.shape}")
    return w
