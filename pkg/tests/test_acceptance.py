"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; every expected value is either trivially known, computed by an
independent oracle, or pinned to the published constants of the model
families.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from scalenet.certify import (
    Certificate,
    ViolationReport,
    bound_envelope,
    certify,
)
from scalenet.halanay import HalanayParams, envelope, solve_rate
from scalenet.linnet import build_random_linear_network
from scalenet.measures import (
    BlockMatrix,
    block_measure_bound,
    block_norm_bound,
    mu2,
    mu_inf,
    norm2,
)
from scalenet.netmodel import (
    DelaySpec,
    integrate,
    max_deviation,
    per_agent_deviation,
)
from scalenet.neuralnet import (
    CGNetwork,
    hopfield_weight_sampler,
    recurrent_certificate,
    ring_chord_weights,
    solve_equilibrium,
    to_network_system,
)
from scalenet.unicycle import (
    CircleFormation,
    FormationGains,
    RobotParams,
    SineDecayDisturbance,
    build_circle_scenario,
    full_robot_closed_loop,
    hand_intensity,
    hand_transform,
    formation_certificate,
)

from oracles import (
    integrate_scalar_dde,
    mu_limit,
    random_block_matrix,
    sampled_block_measure,
    sampled_block_norm,
)

PARAMS = RobotParams(m=10.1, I=0.13, l=0.12)
REF_GAINS = FormationGains.diagonal(0.035, 0.7, 1.0)
REF_DISTURBANCE = SineDecayDisturbance(target=0, amplitude=2.0, decay=0.2)


def _report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def _circle_run(n_circles, tau0, gains=REF_GAINS, mode="intra_inter",
                t_end=20.0, dt=1e-3, disturbance=REF_DISTURBANCE):
    form = CircleFormation(n_circles=n_circles, mode=mode)
    system = build_circle_scenario(form, gains, PARAMS,
                                   DelaySpec.constant(tau0),
                                   disturbance=disturbance)
    cert = formation_certificate(gains, form.max_degree(), tau0, PARAMS)
    trace = integrate(system, None, t_end=t_end, dt=dt, allow_divergence=True)
    dev = per_agent_deviation(trace, system)[trace.t0_index:]
    times = trace.times[trace.t0_index:]
    per_circle = np.array([dev[:, g].max() for g in form.groups()])
    return cert, trace, times, dev, per_circle


def test_criterion_01_measure_oracles():
    start = time.time()
    rng = np.random.default_rng(101)
    worst_gap = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 13))
        a = rng.normal(size=(d, d)) * rng.uniform(0.2, 2.0)
        gap2 = abs(mu2(a) - mu_limit(a, 2, h=1e-7))
        gap_inf = abs(mu_inf(a) - mu_limit(a, np.inf, h=1e-7))
        worst_gap = max(worst_gap, gap2, gap_inf)
        c = float(rng.uniform(-5, 5))
        eye = np.eye(d)
        assert abs(mu2(a + c * eye) - (mu2(a) + c)) <= 1e-10
        assert abs(mu_inf(a + c * eye) - (mu_inf(a) + c)) <= 1e-10
        b = rng.normal(size=(d, d))
        assert mu2(a + b) <= mu2(a) + mu2(b) + 1e-10
        assert mu_inf(a + b) <= mu_inf(a) + mu_inf(b) + 1e-10
    elapsed = time.time() - start
    _report(1, worst_gap < 1e-5 and elapsed < 5.0,
            f"finite-step gap {worst_gap:.2e}, properties exact to 1e-10, "
            f"{elapsed:.1f}s (200 matrices)")


def test_criterion_02_composite_bound_dominance():
    start = time.time()
    rng = np.random.default_rng(202)
    worst_mu = worst_norm = -np.inf
    h = 1e-6
    for k in range(100):
        rows, dims = random_block_matrix(rng, max_blocks=5, max_dim=4)
        bm = BlockMatrix.from_rows(rows)
        dense = bm.dense()
        bias = h * max(1.0, norm2(dense) ** 2)
        est_mu = sampled_block_measure(dense, dims, n_dirs=1000, h=h, seed=k)
        worst_mu = max(worst_mu, est_mu - bias - block_measure_bound(bm))
        est_nrm = sampled_block_norm(dense, dims, n_dirs=1000, seed=k)
        worst_norm = max(worst_norm, est_nrm - block_norm_bound(bm))
    elapsed = time.time() - start
    _report(2, worst_mu <= 0.0 and worst_norm <= 1e-10 and elapsed < 30.0,
            f"measure slack {worst_mu:.2e}, norm slack {worst_norm:.2e}, "
            f"{elapsed:.1f}s (100 block matrices x 1000 directions)")


def test_criterion_03_halanay():
    start = time.time()
    worst_res = 0.0
    grid = [(a, b, tau) for a in (-0.5, -2.0, -8.0, -32.0)
            for b, tau in ((0.0, 0.0), (0.2 * abs(a), 0.3),
                           (0.5 * abs(a), 1.0), (0.9 * abs(a), 0.1),
                           (0.99 * abs(a), 2.0))]
    assert len(grid) == 20
    for a, b, tau in grid:
        lam = solve_rate(a, b, tau)
        worst_res = max(worst_res, abs(lam + a + b * math.exp(lam * tau)))
    sets = [(-2.0, 1.0, 0.0, 1.0, 3.0), (-2.0, 1.0, 0.5, 0.5, 1.0),
            (-5.0, 2.0, 1.0, 0.3, 0.0), (-1.0, 0.2, 0.0, 2.0, 2.0),
            (-3.0, 2.9, 0.0, 0.2, 1.0), (-10.0, 3.0, 5.0, 0.4, 0.5),
            (-1.5, 0.0, 0.3, 1.0, 1.0), (-4.0, 1.0, 0.0, 1.5, 0.0),
            (-2.5, 2.0, 0.8, 0.7, 2.0), (-6.0, 1.0, 2.0, 1.2, 0.1)]
    worst_margin = np.inf
    for a, b, c, tau, u0 in sets:
        env = envelope(HalanayParams(a=a, b=b, c=c, tau0=tau), initial_sup=u0)
        times, u = integrate_scalar_dde(a, b, c, tau, u0, t_end=10.0, dt=1e-3)
        worst_margin = min(worst_margin, float((env(times) - np.abs(u)).min()))
    elapsed = time.time() - start
    _report(3, worst_res < 1e-10 and worst_margin >= -1e-6 and elapsed < 10.0,
            f"rate residual {worst_res:.1e} on 20-point grid, envelope margin "
            f"{worst_margin:.2e} over 10 integrated inequalities, {elapsed:.1f}s")


def test_criterion_04_certified_networks_end_to_end():
    start = time.time()
    rng = np.random.default_rng(404)
    worst_margin = np.inf
    for k in range(20):
        bundle = build_random_linear_network(
            n_agents=int(rng.integers(2, 9)),
            state_dim=int(rng.integers(1, 4)),
            tau0=float(rng.uniform(0.15, 1.0)),
            seed=1000 + k,
            delayed_ratio=float(rng.uniform(0.2, 0.8)),
        )
        cert = certify(bundle.system, bundle.oracle)
        assert isinstance(cert, Certificate), f"instance {k} failed to certify"
        trace = integrate(bundle.system, bundle.history, t_end=20.0, dt=2e-3)
        env = bound_envelope(cert, bundle.initial_sup, bundle.d_sup)
        i0 = trace.t0_index
        margin = env(trace.times[i0:]) - max_deviation(trace, bundle.system)[i0:]
        worst_margin = min(worst_margin, float(margin.min()))
    elapsed = time.time() - start
    _report(4, worst_margin >= -1e-6 and elapsed < 120.0,
            f"20 certified random networks, envelope margin {worst_margin:.2e} "
            f"over [0, 20], {elapsed:.0f}s")


def test_criterion_05_feedback_linearization():
    start = time.time()
    rng = np.random.default_rng(505)
    worst_ratio = 0.0
    for k in range(10):
        amp = rng.uniform(-0.5, 0.5, (2, 3))
        frq = rng.uniform(0.2, 2.0, 3)
        phase = rng.uniform(0, 2 * np.pi, 3)
        d_amp = rng.uniform(-0.5, 0.5, 2) if k % 2 else np.zeros(2)

        def nu(t):
            return amp @ np.sin(frq * t + phase)

        def dist(t):
            return d_amp * np.array([math.sin(1.3 * t), math.cos(0.7 * t)])

        state0 = rng.uniform(-0.5, 0.5, 5)
        chi0 = hand_transform(state0, PARAMS)[:4]
        robot = full_robot_closed_loop(nu, dist, PARAMS)

        def joint(t, z):
            full, chi = z[:5], z[5:]
            dchi = np.concatenate(
                [chi[2:], nu(t) + hand_intensity(full[3], PARAMS) @ dist(t)])
            return np.concatenate([robot(t, full), dchi])

        def rk4(dt):
            z = np.concatenate([state0, chi0])
            t = 0.0
            gap = 0.0
            for _ in range(int(round(10.0 / dt))):
                k1 = joint(t, z)
                k2 = joint(t + dt / 2, z + dt / 2 * k1)
                k3 = joint(t + dt / 2, z + dt / 2 * k2)
                k4 = joint(t + dt, z + dt * k3)
                z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += dt
                gap = max(gap, float(np.max(np.abs(
                    hand_transform(z[:5], PARAMS)[:4] - z[5:]))))
            return z, gap

        z_full, gap = rk4(1e-3)
        z_half, _ = rk4(5e-4)
        tol = float(np.max(np.abs(z_full - z_half))) / (1 - 2 ** -4)
        worst_ratio = max(worst_ratio, gap / max(10 * max(tol, 1e-10), 1e-300))
    elapsed = time.time() - start
    _report(5, worst_ratio <= 1.0 and elapsed < 60.0,
            f"10 random runs over 10s, worst gap = {worst_ratio:.2f}x the "
            f"10x-integration-tolerance budget, {elapsed:.0f}s")


def test_criterion_06_robot_certificate_reference_constants():
    start = time.time()
    cert = formation_certificate(REF_GAINS, 4, 0.1, PARAMS)
    ok = isinstance(cert, Certificate)
    scaled = formation_certificate(FormationGains.diagonal(0.035 * 20, 0.7, 1.0),
                               4, 0.1, PARAMS)
    ok = ok and isinstance(scaled, ViolationReport) and scaled.condition == "C3"
    elapsed = time.time() - start
    detail = (f"reference gains certify (sigma_bar={cert.sigma_bar:.4f}, "
              f"sigma_under={cert.sigma_under:.4f}, K={cert.K:.3f}); 20x "
              f"position gain fails C3; {elapsed:.1f}s")
    _report(6, ok and elapsed < 5.0, detail)


def test_criterion_07_scalability_across_circles():
    start = time.time()
    per_circle_overall = np.zeros(6)
    dominance = True
    for n in range(1, 7):
        cert, trace, times, dev, per_circle = _circle_run(n, tau0=0.1)
        assert isinstance(cert, Certificate)
        env = bound_envelope(cert, 0.0, REF_DISTURBANCE.sup)
        margin = env(times) - dev.max(axis=1)
        dominance = dominance and margin.min() >= -1e-6
        per_circle_overall[:n] = np.maximum(per_circle_overall[:n], per_circle)
    trend_ok = all(per_circle_overall[k + 1] <= 1.05 * per_circle_overall[k]
                   for k in range(1, 5))
    elapsed = time.time() - start
    _report(7, trend_ok and dominance and elapsed < 600.0,
            f"per-circle maxima {np.round(per_circle_overall, 4).tolist()} "
            f"non-increasing beyond circle 1 (5% slack), envelope dominance "
            f"holds, {elapsed:.0f}s")


def test_criterion_08_delay_sweep():
    start = time.time()
    taus = [0.05, 0.1, 0.2, 0.4]
    rates = []
    dominance = True
    for tau in taus:
        cert, trace, times, dev, _ = _circle_run(6, tau0=tau)
        assert isinstance(cert, Certificate)
        rates.append(cert.lambda_hat)
        env = bound_envelope(cert, 0.0, REF_DISTURBANCE.sup)
        margin = env(times) - dev.max(axis=1)
        dominance = dominance and margin.min() >= -1e-6
    decreasing = all(a > b for a, b in zip(rates, rates[1:]))
    elapsed = time.time() - start
    _report(8, dominance and decreasing and elapsed < 600.0,
            f"deviations bounded for tau in {taus}; rates "
            f"{np.round(rates, 4).tolist()} strictly decreasing, {elapsed:.0f}s")


def test_criterion_09_hopfield_60():
    start = time.time()
    rng = np.random.default_rng(909)
    n = 60
    weights = hopfield_weight_sampler(n, row_margin=9.0, seed=909)
    net = CGNetwork.hopfield(c=10.0, weights_delayed=weights,
                             inputs=rng.uniform(0.0, 5.0, n), tau0=1.0)
    cert = recurrent_certificate(net)
    assert isinstance(cert, Certificate)
    constants_ok = (abs(cert.sigma_bar - 10.0) < 1e-9
                    and abs(cert.sigma_under - 9.0) < 1e-9
                    and abs(cert.gain - 1.0) < 1e-9)
    eq = solve_equilibrium(net)

    targets = np.sort(rng.choice(n, size=55, replace=False))
    amps = rng.uniform(0.0, 10.0, size=(2, 55))

    def disturbance(t):
        out = np.zeros(n)
        if 5.0 <= t < 6.0:
            out[targets] += amps[0]
        if 15.0 <= t < 16.0:
            out[targets] += amps[1]
        return out

    system = to_network_system(dataclasses.replace(net, disturbance=disturbance),
                               eq.x_star)
    trace = integrate(system, None, t_end=25.0, dt=1e-3)
    env = bound_envelope(cert, 0.0, float(amps.max()))
    i0 = trace.t0_index
    margin = env(trace.times[i0:]) - max_deviation(trace, system)[i0:]
    elapsed = time.time() - start
    _report(9, constants_ok and margin.min() >= -1e-6 and elapsed < 120.0,
            f"sigma_bar=10, sigma_under=9, unit gain; 55 pulsed neurons stay "
            f"within the envelope (margin {margin.min():.3f}), {elapsed:.0f}s")


def test_criterion_10_small_hopfield_dichotomy():
    start = time.time()
    weights = ring_chord_weights(n=6, weight=15.0)
    fails = recurrent_certificate(CGNetwork.hopfield(c=27.0, weights_delayed=weights,
                                                 tau0=0.1))
    passes = recurrent_certificate(CGNetwork.hopfield(c=32.0, weights_delayed=weights,
                                                  tau0=0.1))
    dichotomy = isinstance(fails, ViolationReport) and isinstance(passes, Certificate)

    inputs = np.array([7.0, 1.0, 0.0, 0.0, 0.0, 0.0])

    def disturbance(t):
        out = np.zeros(6)
        out[:2] = -10.0 * math.sin(t) * math.exp(-0.2 * t)
        return out

    net = CGNetwork.hopfield(c=32.0, weights_delayed=weights, inputs=inputs,
                             tau0=0.1)
    eq = solve_equilibrium(net)
    system = to_network_system(dataclasses.replace(net, disturbance=disturbance),
                               eq.x_star)
    trace = integrate(system, None, t_end=12.0, dt=1e-3)
    env = bound_envelope(passes, 0.0, 10.0)
    i0 = trace.t0_index
    margin = env(trace.times[i0:]) - max_deviation(trace, system)[i0:]
    elapsed = time.time() - start
    _report(10, dichotomy and margin.min() >= -1e-6 and elapsed < 60.0,
            f"decay 27 fails ({fails.condition}), decay 32 certifies "
            f"(sigma_under={passes.sigma_under:.0f}); disturbed run within "
            f"envelope (margin {margin.min():.3f}), {elapsed:.0f}s")


def test_criterion_11_added_links_destabilize():
    start = time.time()
    cert_b, trace_b, _, dev_b, _ = _circle_run(14, tau0=0.1, mode="inward_only",
                                               t_end=15.0, dt=2e-3)
    assert isinstance(cert_b, Certificate)
    baseline_peak = float(dev_b.max())

    form = CircleFormation(n_circles=14, mode="all_to_all")
    no_cert = formation_certificate(REF_GAINS, form.max_degree(), 0.1, PARAMS)
    system = build_circle_scenario(form, REF_GAINS, PARAMS,
                                   DelaySpec.constant(0.1),
                                   disturbance=REF_DISTURBANCE)
    trace = integrate(system, None, t_end=30.0, dt=2e-3, allow_divergence=True)
    dev = per_agent_deviation(trace, system)[trace.t0_index:]
    peak = float(dev.max())
    ratio = peak / baseline_peak
    elapsed = time.time() - start
    _report(11, isinstance(no_cert, ViolationReport) and ratio >= 10.0
            and elapsed < 900.0,
            f"all-to-all peak {peak:.1f} vs certified-topology peak "
            f"{baseline_peak:.3f} ({ratio:.0f}x growth, no certificate "
            f"claimed), {elapsed:.0f}s")
