import csv
import json
import math

import numpy as np
import pytest

from scalenet.errors import (
    DivergenceError,
    HistoryUnderflowError,
    InvalidInputError,
)
from scalenet.linnet import build_random_linear_network
from scalenet.netmodel import (
    AgentSpec,
    CouplingSpec,
    DelaySpec,
    NetworkSystem,
    assemble_rhs,
    desired_residual,
    integrate,
    max_deviation,
    output_deviation,
    per_agent_deviation,
    write_run_metadata,
    write_trace_csv,
)


def _single_agent(intrinsic, dim=1, **kw):
    ag = AgentSpec(state_dim=dim, intrinsic=intrinsic, **kw)
    return NetworkSystem(agents=[ag], couplings=[],
                         delay=DelaySpec.constant(0.0),
                         desired=lambda t: np.zeros(dim))


def _delayed_scalar(a=0.0, b=-1.0, tau=1.0):
    ag = AgentSpec(state_dim=1, intrinsic=lambda x, t: a * x)
    cp = CouplingSpec(target=0, source=0,
                      delayed=lambda xi, xs, t: b * xs)
    return NetworkSystem(agents=[ag], couplings=[cp],
                         delay=DelaySpec.constant(tau),
                         desired=lambda t: np.zeros(1))


class TestIntegrate:
    def test_exponential_decay(self):
        sysm = _single_agent(lambda x, t: -x)
        tr = integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=1e-3)
        assert abs(tr.states[-1, 0] - math.exp(-1.0)) < 1e-8

    def test_method_of_steps_reference(self):
        # x' = -x(t-1) with unit history decays linearly: x(t) = 1 - t on [0, 1]
        sysm = _delayed_scalar()
        tr = integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=1e-3)
        assert abs(tr.states[-1, 0]) < 1e-6
        mid = tr.states[tr.t0_index + 500, 0]
        assert mid == pytest.approx(0.5, abs=1e-6)

    def test_rk4_convergence_order(self):
        sysm = _single_agent(lambda x, t: -x)
        errs = []
        for dt in (0.05, 0.025):
            tr = integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=dt)
            errs.append(abs(tr.states[-1, 0] - math.exp(-1.0)))
        assert 12.0 < errs[0] / errs[1] < 20.0

    def test_default_history_is_desired_start(self):
        ag = AgentSpec(state_dim=1, intrinsic=lambda x, t: np.zeros(1))
        sysm = NetworkSystem(agents=[ag], couplings=[],
                             delay=DelaySpec.constant(0.0),
                             desired=lambda t: np.array([2.5]))
        tr = integrate(sysm, None, t_end=0.5, dt=1e-2)
        assert np.allclose(tr.states, 2.5)

    def test_desired_invariance_under_certified_couplings(self):
        bundle = build_random_linear_network(n_agents=4, state_dim=2, tau0=0.3,
                                             seed=5, disturbance_scale=0.0)
        sysm = bundle.system
        for a in sysm.agents:
            a.disturbance = None
        sysm.vector_rhs = None  # exercise the per-edge assembly
        dt, t_end = 1e-3, 2.0
        tr = integrate(sysm, lambda s: sysm.desired_at(0.0), t_end=t_end, dt=dt)
        assert max_deviation(tr, sysm).max() < 10 * dt ** 4 * t_end

    def test_step_larger_than_delay_rejected(self):
        sysm = _delayed_scalar(tau=0.05)
        with pytest.raises(InvalidInputError):
            integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=0.1)

    def test_delayed_couplings_with_zero_tau0_rejected(self):
        sysm = _delayed_scalar(tau=0.0)
        with pytest.raises(InvalidInputError):
            integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=1e-3)

    def test_delay_leaving_bounds_rejected(self):
        ag = AgentSpec(state_dim=1, intrinsic=lambda x, t: -x)
        cp = CouplingSpec(target=0, source=0, delayed=lambda xi, xs, t: 0.1 * xs)
        sysm = NetworkSystem(agents=[ag], couplings=[cp],
                             delay=DelaySpec(tau=lambda t: 0.5 + 0.2 * t, tau0=0.5),
                             desired=lambda t: np.zeros(1))
        with pytest.raises(InvalidInputError):
            integrate(sysm, lambda s: np.array([1.0]), t_end=2.0, dt=1e-3)

    def test_history_underflow(self):
        sysm = _delayed_scalar(tau=1.0)
        tr = integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=1e-3)
        with pytest.raises(HistoryUnderflowError):
            tr.lookup(-1.5)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_raises_with_time(self):
        sysm = _single_agent(lambda x, t: x * x)
        with pytest.raises(DivergenceError) as err:
            integrate(sysm, lambda s: np.array([5.0]), t_end=5.0, dt=1e-2)
        assert 0.0 < err.value.time < 5.0

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_truncates_when_allowed(self):
        sysm = _single_agent(lambda x, t: x * x)
        tr = integrate(sysm, lambda s: np.array([5.0]), t_end=5.0, dt=1e-2,
                       allow_divergence=True)
        assert tr.diverged_at is not None
        assert np.all(np.isfinite(tr.states))
        assert tr.times[-1] < 5.0

    def test_time_varying_nonsmooth_delay(self):
        ag = AgentSpec(state_dim=1, intrinsic=lambda x, t: -2.0 * x)
        cp = CouplingSpec(target=0, source=0, delayed=lambda xi, xs, t: 0.5 * xs)
        delay = DelaySpec(tau=lambda t: 0.2 + 0.3 * abs(math.sin(3 * t)), tau0=0.5)
        sysm = NetworkSystem(agents=[ag], couplings=[cp], delay=delay,
                             desired=lambda t: np.zeros(1))
        tr = integrate(sysm, lambda s: np.array([1.0]), t_end=3.0, dt=1e-3)
        # contraction with margin 1.5 keeps the state below its history sup
        assert np.all(np.abs(tr.states) <= 1.0 + 1e-9)


class TestLookup:
    def test_grid_hit_is_exact(self):
        sysm = _delayed_scalar(tau=0.5)
        tr = integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=1e-3)
        k = tr.t0_index + 123
        assert tr.lookup(float(tr.times[k]))[0] == tr.states[k, 0]

    def test_hermite_accuracy_off_grid(self):
        sysm = _single_agent(lambda x, t: -x)
        tr = integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=1e-2)
        for s in (0.123456, 0.5017, 0.98765):
            assert abs(tr.lookup(s)[0] - math.exp(-s)) < 1e-9

    def test_history_segment_linear(self):
        sysm = _delayed_scalar(tau=1.0)
        tr = integrate(sysm, lambda s: np.array([1.0 + s]), t_end=0.5, dt=1e-2)
        assert tr.lookup(-0.505)[0] == pytest.approx(0.495, abs=1e-12)

    def test_beyond_end_rejected(self):
        sysm = _single_agent(lambda x, t: -x)
        tr = integrate(sysm, lambda s: np.array([1.0]), t_end=1.0, dt=1e-2)
        with pytest.raises(InvalidInputError):
            tr.lookup(1.5)


class TestDeviationMetrics:
    def test_max_over_agents(self):
        a1 = AgentSpec(state_dim=2, intrinsic=lambda x, t: np.zeros(2))
        a2 = AgentSpec(state_dim=2, intrinsic=lambda x, t: np.zeros(2))
        sysm = NetworkSystem(agents=[a1, a2], couplings=[],
                             delay=DelaySpec.constant(0.0),
                             desired=lambda t: np.zeros(4))
        hist = lambda s: np.array([1.0, 0.0, 0.0, 3.0])  # noqa: E731
        tr = integrate(sysm, hist, t_end=0.1, dt=0.05)
        assert max_deviation(tr, sysm)[-1] == pytest.approx(3.0)
        per = per_agent_deviation(tr, sysm)
        assert per[-1, 0] == pytest.approx(1.0)
        assert per[-1, 1] == pytest.approx(3.0)

    def test_identity_output_matches_state_metric(self):
        bundle = build_random_linear_network(n_agents=3, state_dim=2, tau0=0.3, seed=2)
        tr = integrate(bundle.system, bundle.history, t_end=1.0, dt=1e-3)
        assert np.allclose(output_deviation(tr, bundle.system),
                           max_deviation(tr, bundle.system))

    def test_lipschitz_output_scaling(self):
        dim = 2
        ag = AgentSpec(state_dim=dim, intrinsic=lambda x, t: -x,
                       output=2.0 * np.eye(dim), output_lipschitz=2.0)
        sysm = NetworkSystem(agents=[ag], couplings=[],
                             delay=DelaySpec.constant(0.0),
                             desired=lambda t: np.zeros(dim))
        tr = integrate(sysm, lambda s: np.array([1.0, -1.0]), t_end=1.0, dt=1e-2)
        assert np.allclose(output_deviation(tr, sysm),
                           2.0 * max_deviation(tr, sysm))

    def test_projection_output_below_state_metric(self):
        ag = AgentSpec(state_dim=4, intrinsic=lambda x, t: np.zeros(4),
                       output=np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]),
                       output_lipschitz=1.0)
        sysm = NetworkSystem(agents=[ag], couplings=[],
                             delay=DelaySpec.constant(0.0),
                             desired=lambda t: np.zeros(4))
        tr = integrate(sysm, lambda s: np.array([1.0, 2.0, 3.0, 4.0]),
                       t_end=0.1, dt=0.05)
        assert np.all(output_deviation(tr, sysm) <= max_deviation(tr, sysm) + 1e-12)


class TestVectorRhsConsistency:
    def test_linear_bundle_paths_agree(self):
        bundle = build_random_linear_network(n_agents=5, state_dim=3, tau0=0.4, seed=9)
        sysm = bundle.system
        rhs = assemble_rhs(sysm)
        rng = np.random.default_rng(1)
        for t in (0.0, 0.37, 2.0):
            x = sysm.desired_at(t) + rng.normal(size=sysm.state_dim)
            xd = sysm.desired_at(t - 0.2) + rng.normal(size=sysm.state_dim)
            assert np.allclose(rhs(t, x, xd, t - 0.2),
                               sysm.vector_rhs(t, x, xd, t - 0.2), atol=1e-12)

    def test_desired_residual_intrinsic(self):
        bundle = build_random_linear_network(n_agents=3, state_dim=2, tau0=0.3, seed=4)
        assert desired_residual(bundle.system, np.linspace(0, 3, 7)) < 1e-6


class TestExports:
    def test_trace_csv_layout(self, tmp_path):
        bundle = build_random_linear_network(n_agents=2, state_dim=2, tau0=0.2, seed=0)
        tr = integrate(bundle.system, bundle.history, t_end=0.1, dt=0.05)
        path = tmp_path / "trace.csv"
        write_trace_csv(tr, bundle.system, str(path))
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["time", "agent_id", "x0", "x1", "y0", "y1"]
        assert len(rows) - 1 == len(tr.times) * 2

    def test_metadata_sidecar(self, tmp_path):
        path = tmp_path / "trace.meta.json"
        write_run_metadata(str(path), config={"family": "generic"}, dt=1e-3,
                           tau0=0.5, seed=3)
        meta = json.loads(path.read_text())
        assert set(meta) == {"scenario_hash", "dt", "tau0", "seed"}
        write_run_metadata(str(path), config={"family": "generic"}, dt=1e-3,
                           tau0=0.5, seed=3)
        assert json.loads(path.read_text()) == meta
