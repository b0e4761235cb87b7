import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdmf.queue import (
    NonErgodicChainError,
    SchedulerModel,
    augmented_snr,
    build_transition_matrix,
    evolve,
    mean_rate,
    rayleigh_model,
    poisson_pmf,
    power_iteration,
    rate_pmf_from_fading,
    simulate_schedule,
    solve_model,
    stationary,
)
from oracles import queue_transition_oracle


def _delta(n, size):
    v = np.zeros(size)
    v[n] = 1.0
    return v


def _model(**kw):
    base = dict(lam=0.5, c_pmf=_delta(1, 3), r_pmf=_delta(1, 3), q_pmf=_delta(1, 3), n_a=3, n_r=3)
    base.update(kw)
    return SchedulerModel(**base)


def test_poisson_pmf():
    assert poisson_pmf(0.0, 1.0, 4).tolist() == [1, 0, 0, 0, 0]
    a = poisson_pmf(0.5, 1.0, 6)
    assert a[0] == pytest.approx(math.exp(-0.5), abs=1e-6)
    assert a[0] == pytest.approx(0.60653, abs=1e-6)
    for i in range(1, 6):
        assert a[i] == pytest.approx(0.5**i / math.factorial(i) * math.exp(-0.5), rel=1e-12)
    assert a.sum() == pytest.approx(1.0, abs=1e-15)


def test_rate_pmf():
    pmf = rate_pmf_from_fading(1 / np.sqrt(2), 1e-12, 8)
    assert pmf[0] == pytest.approx(1.0)
    pmf = rate_pmf_from_fading(1 / np.sqrt(2), 100.0, 8)
    assert pmf.sum() == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    g = np.abs((rng.standard_normal(10**6) + 1j * rng.standard_normal(10**6)) / np.sqrt(2)) ** 2
    n = np.minimum(np.floor(np.log2(1 + g * 100.0)), 8).astype(int)
    mc = np.bincount(n, minlength=9) / n.size
    np.testing.assert_allclose(pmf, mc, atol=0.005)
    custom = rate_pmf_from_fading(1 / np.sqrt(2), 100.0, 2, thresholds=[1.0, 50.0])
    assert custom[2] == pytest.approx(math.exp(-0.5))


def test_invalid_models():
    with pytest.raises(ValueError):
        _model(f=(0.5, 0.5, 0.5, 0.0))
    with pytest.raises(ValueError):
        _model(c_pmf=np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        _model(p=(0.5, 0.6, -0.1))
    with pytest.raises(ValueError):
        _model(n_a=0)
    with pytest.raises(ValueError):
        _model(lam=-1.0)


def test_zero_arrivals_make_origin_absorbing():
    for f in [(0.25,) * 4, (1, 0, 0, 0), (0, 0, 0, 1)]:
        P = build_transition_matrix(_model(lam=0.0, f=f))
        assert P[0, 0] == 1.0


def test_mode_four_block_structure():
    m = _model(f=(0, 0, 0, 1), n_a=4, n_r=3)
    P = build_transition_matrix(m).reshape(5, 4, 5, 4)
    a = poisson_pmf(0.5, 1.0, 4)
    for mm in range(5):
        for k in range(4):
            assert np.all(P[mm, k, :, np.arange(4) != k] == 0)
            for i in range(5):
                expected = a[i - mm] if mm <= i < 4 else (a[4 - mm :].sum() if i == 4 else 0.0)
                assert P[mm, k, i, k] == pytest.approx(expected, abs=1e-15)


def test_nine_state_model_against_enumeration():
    m = SchedulerModel(
        lam=0.5, f=(1, 0, 0, 0), c_pmf=_delta(1, 2), r_pmf=_delta(1, 2), q_pmf=_delta(1, 2),
        p=(1, 0, 0), n_a=2, n_r=2,
    )
    P = build_transition_matrix(m)
    ref = queue_transition_oracle(2, 2, 0.5, m.f, m.c_pmf, m.r_pmf, m.q_pmf, m.p)
    assert P.shape == (9, 9)
    np.testing.assert_allclose(P, ref, atol=1e-12, rtol=0)


def _random_model(rng):
    n_rate = int(rng.integers(1, 6))
    pmf = lambda: rng.dirichlet(np.ones(n_rate + 1))
    return SchedulerModel(
        lam=float(rng.uniform(0, 2)),
        f=tuple(rng.dirichlet(np.ones(4))),
        c_pmf=pmf(), r_pmf=pmf(), q_pmf=pmf(),
        p=tuple(rng.dirichlet(np.ones(3))),
        n_a=int(rng.integers(1, 9)), n_r=int(rng.integers(1, 9)),
    )


def test_random_models_against_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(25):
        m = _random_model(rng)
        ref = queue_transition_oracle(m.n_a, m.n_r, m.lam * m.T, m.f, m.c_pmf, m.r_pmf, m.q_pmf, m.p)
        np.testing.assert_allclose(build_transition_matrix(m), ref, atol=1e-12, rtol=0)


def test_row_sums_for_random_models():
    rng = np.random.default_rng(2)
    for _ in range(100):
        P = build_transition_matrix(_random_model(rng))
        assert np.abs(P.sum(axis=1) - 1).max() <= 1e-12
        assert P.min() >= 0


def test_stationary_examples():
    np.testing.assert_allclose(stationary([[0.5, 0.5], [0.5, 0.5]]).pi, [0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(stationary([[0.9, 0.1], [0.2, 0.8]]).pi, [2 / 3, 1 / 3], atol=1e-14)
    for n in (2, 5):
        with pytest.raises(NonErgodicChainError):
            stationary(np.eye(n))
    with pytest.raises(ValueError):
        stationary([[0.5, 0.6], [0.5, 0.5]])


def test_stationary_is_fixed_point_and_matches_power_iteration():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = _random_model(rng)
        m.lam = max(m.lam, 0.1)
        P = build_transition_matrix(m)
        d = stationary(P, m.shape, check=True)
        assert np.abs(d.pi @ P - d.pi).max() < 1e-10
        assert d.pi.min() >= 0
        np.testing.assert_allclose(d.pi, power_iteration(P), atol=1e-10)
        grid = d.pi.reshape(m.shape)
        assert d.qa == pytest.approx(np.arange(m.n_a + 1) @ grid.sum(axis=1))


def test_mode_four_keeps_relay_queue_mean():
    m = _model(f=(0, 0, 0, 1), n_a=4, n_r=5)
    P = build_transition_matrix(m)
    pi0 = np.zeros(m.n_states)
    pi0[[0 * 6 + 2, 1 * 6 + 5, 3 * 6 + 1]] = [0.5, 0.3, 0.2]
    mean_k = lambda pi: np.arange(6) @ pi.reshape(5, 6).sum(axis=0)
    start = mean_k(pi0)
    for steps in (1, 7, 50):
        assert mean_k(evolve(P, pi0, steps)) == pytest.approx(start, abs=1e-12)


def test_queue_grows_with_arrival_rate():
    qa = [solve_model(rayleigh_model(lam=lam, n_a=40, n_r=30)).qa for lam in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert np.all(np.diff(qa) > 0)


def test_eps_augmentation_scales_mean_rate():
    rho = 100.0
    base = mean_rate(rate_pmf_from_fading(1 / np.sqrt(2), rho, 16))
    for eps in (0.1, 0.3):
        rho_s = augmented_snr(1 / np.sqrt(2), rho, 16, eps)
        assert mean_rate(rate_pmf_from_fading(1 / np.sqrt(2), rho_s, 16)) == pytest.approx((1 + eps) * base)
    with pytest.raises(ValueError):
        augmented_snr(1 / np.sqrt(2), rho, 4, 2.0)


def test_eps_grid_reduces_both_averages():
    dists = [solve_model(rayleigh_model(eps)) for eps in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)]
    assert np.all(np.diff([d.qa for d in dists]) < 0)
    assert np.all(np.diff([d.qrb for d in dists]) < 0)
    assert all(d.boundary_mass() < 1e-6 for d in dists)


def test_simulation_edge_cases():
    rng = np.random.default_rng(4)
    assert simulate_schedule(_model(lam=0.0), 1000, 10, rng) == (0.0, 0.0)
    with pytest.raises(ValueError):
        simulate_schedule(_model(), 100, 100, rng)
    # Mode II only with unit drain: five packets gone after five slots
    m = _model(lam=0.0, f=(0, 1, 0, 0), n_r=8)
    qa, qrb = simulate_schedule(m, 5, 4, rng, initial=(0, 5))
    assert qrb == 0
    qa, qrb = simulate_schedule(m, 5, 3, rng, initial=(0, 5))
    assert qrb == pytest.approx(0.5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_small_model_simulation_tracks_chain(seed):
    rng = np.random.default_rng(seed)
    m = _random_model(rng)
    d = solve_model(m)
    qa, qrb = simulate_schedule(m, 200_000, 2_000, rng)
    assert qa == pytest.approx(d.qa, abs=0.05 * max(d.qa, 1.0))
    assert qrb == pytest.approx(d.qrb, abs=0.05 * max(d.qrb, 1.0))
