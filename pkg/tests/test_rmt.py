import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greencancel.rmt import (DomainError, FlowState, ModelParams, OutOfModelWarning,
                             ParameterError, convergence_experiment, edge_samples, edge_shift,
                             flow_matrix, flow_observable, green_eval, im_m, kappa4_bernoulli,
                             make_rng, m_sc, pairwise_trace_check, rows_csv, sample_er,
                             sample_goe_hat, sandwich_check, smoothed_count,
                             smoothed_count_exact, ward_residual)


def er(N, exponent, seed=0, stream=0):
    return sample_er(ModelParams.from_q(N, N ** exponent, seed), stream)


def s0_grid():
    E = np.linspace(-5, 5, 10)
    eta = np.geomspace(1e-3, 3, 10)
    return [complex(e, h) for e in E for h in eta]


# ---------------------------------------------------------------- sampling

def test_er_symmetric_and_seeded():
    p = ModelParams(4, 0.5, seed=9)
    a, b = sample_er(p), sample_er(p)
    assert np.array_equal(a, b)
    assert np.array_equal(a, a.T)
    assert not np.array_equal(a, sample_er(p, stream=1))


def test_er_entry_moments():
    N = 1000
    H = er(N, 0.3, seed=2)
    x = H[np.triu_indices(N)]
    n = x.size
    assert abs(x.mean()) < 5 * x.std() / math.sqrt(n)
    v = x.var()
    se_v = math.sqrt(np.mean((x ** 2 - v) ** 2) / n)
    assert abs(v - 1 / N) < 5 * se_v


def test_er_rejects_bad_p():
    with pytest.raises(ParameterError):
        sample_er(ModelParams(10, 1.0))
    with pytest.raises(ParameterError):
        sample_er(ModelParams(10, 0.0))


def test_out_of_model_warning():
    with pytest.warns(OutOfModelWarning):
        ModelParams(1000, 0.5).check()


def test_goe_variance():
    G = sample_goe_hat(600, seed=1)
    assert np.array_equal(G, G.T)
    assert abs(G.var() * 600 - 1) < 0.02


def test_kappa4_limits():
    assert kappa4_bernoulli(Fraction(1, 2)) == Fraction(-1, 6)
    assert abs(kappa4_bernoulli(1e-9) - 1 / 6) < 1e-8
    with pytest.raises(ParameterError):
        kappa4_bernoulli(1)


def test_kappa4_symbolic_oracle():
    # c4 of a centered Bernoulli, divided by q^4 (1-p)^2, matched to 3! kappa4 / (N q^2)
    for p in (Fraction(1, 7), Fraction(1, 3), Fraction(2, 5)):
        c4 = p * (1 - p) * (1 - 6 * p + 6 * p * p)
        N = 100
        q2 = p * N
        assert c4 / (q2 ** 2 * (1 - p) ** 2) == 6 * kappa4_bernoulli(p) / (N * q2)


def test_kappa4_monte_carlo():
    N = 500
    params = ModelParams.from_q(N, N ** 0.3)
    rng = make_rng(5, 0)
    a = (rng.random(10 ** 7) < params.p).astype(float)
    h = (a - params.p) / (params.q * math.sqrt(1 - params.p))
    m2, m4 = np.mean(h ** 2), np.mean(h ** 4)
    c4 = m4 - 3 * m2 ** 2
    infl = (h ** 4 - m4) - 6 * m2 * (h ** 2 - m2)
    se = infl.std() / math.sqrt(h.size)
    assert abs(c4 - 6 * params.kappa4 / (N * params.q ** 2)) < 5 * se


# ---------------------------------------------------------------- edge shift

def test_edge_shift_trivial_cases():
    N = 50
    H = np.full((N, N), 1 / math.sqrt(N))
    chi, L = edge_shift(H, 3.0, 0.0)
    assert abs(chi) < 1e-14 and abs(L - 2) < 1e-14


@pytest.mark.parametrize("exponent, count", [(0.45, 1000), (0.3, 200)])
def test_chi_band(exponent, count):
    N = 1000
    params = ModelParams.from_q(N, N ** exponent, seed=4)
    band = 10 / (params.q * math.sqrt(N))
    inside = [abs(edge_shift(sample_er(params, s), params.q, params.kappa4)[0]) < band
              for s in range(count)]
    assert np.mean(inside) >= 0.99


# ---------------------------------------------------------------- m_sc and resolvents

def test_msc_closed_form():
    assert abs(m_sc(2j) - (math.sqrt(2) - 1) * 1j) < 1e-14
    z = 1e6j
    assert abs(m_sc(z) * -z - 1) < 1e-10
    with pytest.raises(DomainError):
        m_sc(1.0)


def test_msc_residual_on_s0():
    for z in s0_grid():
        m = m_sc(z)
        assert abs(1 + z * m + m * m) < 1e-12
        assert m.imag > 0


def test_green_of_zero_matrix():
    z = 0.3 + 0.7j
    ge = green_eval(np.zeros((5, 5)), z)
    assert np.allclose(ge.G, -np.eye(5) / z)
    assert abs(ge.m + 1 / z) < 1e-15
    with pytest.raises(DomainError):
        green_eval(np.zeros((2, 2)), 1.0)


def test_ward_identity_and_positivity():
    H = er(500, 0.45, seed=3)
    for E in (-2.5, 0.0, 1.9, 2.05):
        ge = green_eval(H, complex(E, 1e-2))
        assert ge.m.imag > 0
        assert ward_residual(ge) < 1e-8


def test_local_law_band():
    N = 2000
    params = ModelParams.from_q(N, N ** 0.45, seed=6)
    z = complex(1, N ** -0.5)
    ok = []
    for s in range(20):
        ge = green_eval(sample_er(params, s), z, params.q)
        ok.append(np.max(np.abs(ge.G - np.eye(N) * m_sc(z))) <= 10 * ge.psi)
    assert np.mean(ok) >= 0.95


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 1.0), st.floats(1.01, 10))
def test_eta_im_m_monotone(E, eta, factor):
    eigs = np.linalg.eigvalsh(sample_goe_hat(60, seed=8))
    assert eta * im_m(eigs, E, eta) <= factor * eta * im_m(eigs, E, factor * eta) + 1e-15


# ---------------------------------------------------------------- flow

@pytest.fixture(scope="module")
def pair():
    N = 120
    return sample_goe_hat(N, seed=1), er(N, 0.4, seed=2)


def test_flow_endpoints(pair):
    W, H = pair
    s = FlowState(W, H, 0.0, 5.0, 0.1)
    assert np.array_equal(s.Ht, W)
    assert s.chi == 0 and s.L == 2
    assert np.max(np.abs(flow_matrix(W, H, 60.0) - H)) < 1e-12


def test_flow_observable_two_routes(pair):
    W, H = pair
    s = FlowState(W, H, 0.7, 120 ** 0.4, 0.1)
    assert flow_observable(s, 0.3, 0.3, 0.01) == (0.0, 0.0)
    quad, exact = flow_observable(s, -0.4, 0.2, 0.01)
    assert abs(quad - exact) < 1e-7 * max(1, abs(exact))
    with pytest.raises(ParameterError):
        flow_observable(s, 0.2, -0.4, 0.01)


def test_pairwise_trace_identity(pair):
    W, H = pair
    lhs, rhs = pairwise_trace_check(flow_matrix(W, H, 0.5), 3, 7, 1.6, 2.2, 0.02)
    assert abs(lhs - rhs) < 1e-8 * max(1, abs(rhs))


# ---------------------------------------------------------------- counting

def test_smoothed_count_limits():
    eigs = np.linalg.eigvalsh(sample_goe_hat(200, seed=2))
    # Lorentzian tail of the spectrum far below the window
    eta, top = 1e-3, eigs.max()
    tail = 200 * eta / math.pi * (1 / (10.0 - top) - 1 / (12.0 - top))
    assert smoothed_count(eigs, 10.0, 12.0, eta) <= tail * 1.0001
    full = smoothed_count(eigs, -3.0, 3.0, 1e-2)
    assert abs(full - 200) < 2
    with pytest.raises(ParameterError):
        smoothed_count(eigs, 1.0, 0.5, 1e-2)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2.5, 2.0), st.floats(0.05, 1.0), st.floats(1e-3, 0.1))
def test_smoothed_count_quadrature_matches_closed_form(E, width, eta):
    eigs = np.linalg.eigvalsh(sample_goe_hat(80, seed=3))
    a = smoothed_count(eigs, E, E + width, eta)
    b = smoothed_count_exact(eigs, E, E + width, eta)
    assert abs(a - b) < 1e-7


def test_sandwich_routes_agree():
    params = ModelParams.from_q(300, 300 ** 0.4, seed=1)
    H = sample_er(params, 0)
    eigs = np.linalg.eigvalsh(H)
    _, Lhat = edge_shift(H, params.q, params.kappa4)
    ok1, d1 = sandwich_check(eigs, Lhat, params.q)
    ok2, d2 = sandwich_check(eigs, Lhat, params.q, exact=True)
    assert ok1 == ok2
    for (r, lo, n, hi), (_, lo2, _, hi2) in zip(d1, d2):
        assert abs(lo - lo2) < 1e-6 and abs(hi - hi2) < 1e-6 and lo <= hi + 1e-9


# ---------------------------------------------------------------- experiment harness

def test_experiment_refuses_small_m():
    with pytest.raises(ParameterError):
        convergence_experiment({"settings": [{"N": 50, "p": 0.2, "M": 99, "r0": -4}]})


def test_samples_independent_of_job_count():
    params = ModelParams(60, 0.2, seed=3)
    assert np.array_equal(edge_samples(params, 8, jobs=1), edge_samples(params, 8, jobs=3))


def test_experiment_is_deterministic():
    cfg = {"settings": [{"N": 40, "p": 0.3, "M": 100, "r0": -4, "seed": 2}]}
    r1, s1 = convergence_experiment(cfg)
    r2, s2 = convergence_experiment(cfg)
    assert rows_csv(r1) == rows_csv(r2)
    assert np.array_equal(s1[0], s2[0])
    assert rows_csv(r1).splitlines()[0] == "N,p,q,M,seed,r0,ks,ks_stderr,shift"
