import math

import numpy as np
import pytest

import ddjump as dj
import ddjump.engine as engine
from ddjump.errors import DomainError
from ddjump.simulate import _scalar_rates_fn


def pure_death():
    return dj.parse_model("[dimension]\n1\n[jumps]\n-1 : x1\n")


# ---------------------------------------------------------------------------
# simulate_path / sample_at
# ---------------------------------------------------------------------------


def test_time_zero_identity(sir):
    opts = dj.SimOptions(N=100, seed=0, horizon=1.0, record=(0.0,))
    tr = dj.simulate_path(sir, opts, np.array([50, 100]))
    assert tr.recorded[0].tolist() == [50, 100]
    dist = dj.sample_at(sir, opts, np.array([50, 100]), 0.0, reps=3)
    assert dist.as_dict() == {(50, 100): 1.0}


def test_sample_at_single_rep_is_point_mass(sir):
    opts = dj.SimOptions(N=50, seed=4, horizon=2.0, record=(1.0,))
    dist = dj.sample_at(sir, opts, np.array([25, 50]), 1.0, reps=1)
    assert len(dist) == 1
    assert dist.mass.tolist() == [1.0]


def test_pure_death_mean_matches_exponential_decay():
    # linear death process: E X(t) = X(0) e^{-t}, exactly
    m = pure_death()
    N = 50
    reps = 20_000
    opts = dj.SimOptions(N=N, seed=9, horizon=1.5, record=(1.0,))
    rec = dj.sample_states(m, opts, np.array([N]), (1.0,), reps)
    vals = rec[:, 0, 0] / N
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - math.exp(-1.0)) <= 3.0 * se


def test_scalar_and_batched_engines_agree_bitwise(sir):
    opts = dj.SimOptions(N=80, seed=123, horizon=4.0, record=(0.0, 0.7, 1.9, 3.7))
    X0 = np.array([40, 80])
    rec = dj.sample_states(sir, opts, X0, opts.record, reps=6)
    for r in range(6):
        tr = dj.simulate_path(sir, opts, X0, replicate=r)
        assert np.array_equal(tr.recorded, rec[r])


def test_determinism_independent_of_chunk_and_workers(sir):
    X0 = np.array([30, 60])
    kw = dict(mode=engine.RECORDS, record_times=(0.5, 1.5))
    a = engine.run_paths(sir, 60, X0, 7, 97, chunk=13, workers=1, **kw)
    b = engine.run_paths(sir, 60, X0, 7, 97, chunk=50, workers=2, **kw)
    assert np.array_equal(a["records"], b["records"])


def test_restricted_path_stays_in_ball(sir, cert05):
    N = 100
    delta = cert05.delta0 / 2
    opts = dj.SimOptions(
        N=N, seed=1, horizon=3.0, restriction=(cert05, delta), record=(0.5, 1.5, 2.5)
    )
    X0 = np.round(N * cert05.c).astype(np.int64)
    tr = dj.simulate_path(sir, opts, X0)
    for X in tr.recorded:
        assert cert05.m_norm(X - N * cert05.c) <= N * delta + 1e-9
    for X in tr.states:
        assert cert05.m_norm(X - N * cert05.c) <= N * delta + 1e-9


def test_restriction_delta_validated(cert05):
    with pytest.raises(ValueError):
        dj.SimOptions(N=10, seed=0, horizon=1.0, restriction=(cert05, cert05.delta0 * 2))


def test_start_outside_restriction_rejected(sir, cert05):
    opts = dj.SimOptions(N=100, seed=0, horizon=1.0, restriction=(cert05, cert05.delta0))
    with pytest.raises(DomainError):
        dj.simulate_path(sir, opts, np.array([100, 100]))


def test_absorbing_state_held_and_flagged():
    m = pure_death()
    opts = dj.SimOptions(N=5, seed=3, horizon=50.0, record=(40.0,))
    tr = dj.simulate_path(m, opts, np.array([5]))
    assert tr.absorbed
    assert tr.recorded[0][0] == 0
    assert tr.states[-1][0] == 0


def test_record_semantics_right_continuous(sir):
    # recorded value is the cadlag state: the pre-jump state holds until the
    # next event time
    opts = dj.SimOptions(N=40, seed=5, horizon=3.0, record=(0.3, 1.1, 2.2))
    tr = dj.simulate_path(sir, opts, np.array([20, 40]))
    for rec_t, rec_x in zip(tr.record_times, tr.recorded):
        k = int(np.searchsorted(tr.times, rec_t, side="right")) - 1
        assert np.array_equal(tr.states[k], rec_x)


# ---------------------------------------------------------------------------
# coupling
# ---------------------------------------------------------------------------


def test_coupled_equal_starts_coalesce_immediately(sir, cert05):
    opts = dj.SimOptions(N=100, seed=2, horizon=2.0, record=(0.0, 0.5, 1.0))
    X0 = np.round(100 * cert05.c).astype(np.int64)
    tr = dj.simulate_coupled(sir, cert05, opts, X0, X0, k2=5.0)
    assert tr.coalesce_time == 0.0
    assert np.all(tr.H == 0.0)


def test_coalescence_is_absorbing(sir, cert05):
    N = 60
    Nc = N * cert05.c
    U0 = np.round(Nc).astype(np.int64) + np.array([2, 0])
    V0 = np.round(Nc).astype(np.int64) - np.array([2, 0])
    opts = dj.SimOptions(N=N, seed=8, horizon=30.0, record=tuple(np.linspace(0, 30, 61)))
    tr = dj.simulate_coupled(sir, cert05, opts, U0, V0, k2=5.0)
    if math.isfinite(tr.coalesce_time):
        after = np.array(opts.record) >= tr.coalesce_time
        assert np.all(tr.H[after] == 0.0)


def test_coupled_marginal_is_free_chain(sir, cert05):
    # with the partner ignored, the U leg has the law of the free chain:
    # TV between the two empirical laws within 3x the bootstrap null scale
    N, reps, t = 60, 400, 1.0
    Nc = N * cert05.c
    U0 = np.round(Nc).astype(np.int64) + np.array([3, -2])
    V0 = np.round(Nc).astype(np.int64) - np.array([3, 2])
    opts = dj.SimOptions(N=N, seed=31, horizon=1.5, record=(t,))
    legs = np.zeros((reps, 2), dtype=np.int64)
    for r in range(reps):
        tr = dj.simulate_coupled(
            sir, cert05, opts, U0, V0, k2=5.0, replicate=r, trace_states=True,
            run_past_coalescence=True,
        )
        legs[r] = tr.U[0]
    free_opts = dj.SimOptions(N=N, seed=77, horizon=1.5, record=(t,))
    free = dj.sample_states(sir, free_opts, U0, (t,), reps)[:, 0, :]
    p = dj.LatticeDistribution.from_points(legs)
    q = dj.LatticeDistribution.from_points(free)
    tv_obs = dj.tv_distance(p, q)
    # bootstrap null: TV between two resamples of the pooled empirical law
    pooled = dj.LatticeDistribution.from_points(np.vstack([legs, free]))
    rng = np.random.default_rng(5)
    null = []
    for _ in range(200):
        a = rng.multinomial(reps, pooled.mass) / reps
        b = rng.multinomial(reps, pooled.mass) / reps
        null.append(0.5 * np.abs(a - b).sum())
    assert tv_obs <= 3.0 * float(np.mean(null))


def test_contractive_generator_identity_and_negativity(sir, cert05):
    # grouping the coupling events per jump reproduces the generator formula,
    # and the drift is <= -rho H on sampled pairs above the scan threshold
    N = 400
    k2 = dj.estimate_K2(sir, cert05, N, samples=2000, seed=6)
    rng = np.random.default_rng(12)
    Nc = N * cert05.c
    L = np.linalg.cholesky(cert05.M)
    LinvT = np.linalg.inv(L).T
    rates = _scalar_rates_fn(sir)
    checked = 0
    for _ in range(400):
        r1, r2 = cert05.delta0 * np.sqrt(rng.random(2))
        th = rng.normal(size=(2, 2))
        th /= np.linalg.norm(th, axis=1, keepdims=True)
        U = np.round(Nc + N * r1 * (LinvT @ th[0])).astype(np.int64)
        V = np.round(Nc + N * r2 * (LinvT @ th[1])).astype(np.int64)
        H = cert05.m_norm(U - V)
        if H < k2 or cert05.m_norm(U / N - cert05.c) > cert05.delta0:
            continue
        if cert05.m_norm(V / N - cert05.c) > cert05.delta0:
            continue
        ru = np.array(rates(*(U / N)))
        rv = np.array(rates(*(V / N)))
        w = (U - V).astype(float)
        # route 1: per-jump split into joint + unilateral events
        total = 0.0
        for J, a, b in zip(sir.jump_array, ru, rv):
            joint = min(a, b)
            total += N * joint * 0.0
            if a > b:
                total += N * (a - b) * (cert05.m_norm(w + J) - H)
            elif b > a:
                total += N * (b - a) * (cert05.m_norm(w - J) - H)
        # route 2: the two-sum generator formula
        total2 = 0.0
        for J, a, b in zip(sir.jump_array, ru, rv):
            if a >= b:
                total2 += (cert05.m_norm(w + J) - H) * N * (a - b)
            else:
                total2 += (cert05.m_norm(w - J) - H) * N * (b - a)
        assert total == pytest.approx(total2, rel=1e-12, abs=1e-12)
        assert total <= -cert05.rho * H
        checked += 1
    assert checked >= 20


def test_coupled_trace_dump_fields(sir, cert05):
    opts = dj.SimOptions(N=50, seed=1, horizon=2.0, record=(0.0, 1.0, 2.0))
    Nc = np.round(50 * cert05.c).astype(np.int64)
    tr = dj.simulate_coupled(
        sir, cert05, opts, Nc + [4, 0], Nc - [4, 0], k2=5.0, trace_states=True
    )
    assert tr.U.shape == (3, 2)
    assert tr.V.shape == (3, 2)
    assert tr.K3 == max(5.0, 8 * cert05.JstarM)


# ---------------------------------------------------------------------------
# martingale deviation
# ---------------------------------------------------------------------------


def test_martingale_zero_for_deterministic_model():
    m = dj.parse_model("[dimension]\n1\n[jumps]\n1 : 0\n")
    opts = dj.SimOptions(N=20, seed=0, horizon=2.0)
    rep = dj.martingale_deviation(
        m, opts, np.array([20]), T=1.0, reps=50, z_grid=(0.01, 0.1)
    )
    assert np.all(rep.tail == 0.0)
    np.testing.assert_allclose(rep.mean_final, 0.0, atol=1e-15)


def test_martingale_mean_zero(sir):
    opts = dj.SimOptions(N=100, seed=13, horizon=3.0)
    rep = dj.martingale_deviation(
        sir, opts, np.array([100, 100]), T=2.0, reps=4000, z_grid=(0.05, 0.1, 0.2)
    )
    assert np.all(np.abs(rep.mean_final) <= 3.0 * rep.se_final + 1e-12)


def test_martingale_tail_below_bound(sir):
    opts = dj.SimOptions(N=100, seed=14, horizon=3.0)
    z_grid = np.geomspace(0.02, 2.0, 8)
    rep = dj.martingale_deviation(sir, opts, np.array([100, 100]), T=2.0, reps=3000, z_grid=z_grid)
    assert rep.violations == 0
    assert np.all(rep.tail[:-1] >= rep.tail[1:])  # tail nonincreasing in z


# ---------------------------------------------------------------------------
# exit probability
# ---------------------------------------------------------------------------


def test_exit_probability_zero_horizon(sir, cert05):
    rep = dj.exit_probability(
        sir, cert05, N=50, delta_prime=0.3, delta=0.6, T=0.0, reps=100, seed=0
    )
    assert rep.estimate == 0.0
    assert rep.bound == 0.0


def test_exit_probability_tiny_start_large_ball(sir, cert05):
    rep = dj.exit_probability(
        sir, cert05, N=200, delta_prime=0.05, delta=0.7, T=0.05, reps=200, seed=1
    )
    assert rep.estimate == 0.0


def test_exit_probability_decreasing_in_N(sir, cert05):
    est = []
    for N in (50, 100, 200):
        rep = dj.exit_probability(
            sir, cert05, N=N, delta_prime=0.35, delta=0.7, T=1.0, reps=400, seed=2
        )
        est.append(rep.estimate)
        assert not rep.certified  # delta above the certified radius is flagged
    assert est[0] > est[1] > est[2]


def test_exit_report_eps_prime_case_split(sir, cert05):
    # delta' >= delta/(3 - 2/e) uses (delta - delta')/(2 c1)
    r1 = dj.exit_probability(sir, cert05, 50, 0.5, 0.7, T=0.0, reps=1, seed=0)
    assert r1.eps_prime == pytest.approx((0.7 - 0.5) / (2 * cert05.c1))
    # small delta' switches to the fixed fraction of delta
    r2 = dj.exit_probability(sir, cert05, 50, 0.05, 0.7, T=0.0, reps=1, seed=0)
    expect = 0.7 * (1 - math.exp(-1)) / ((3 - 2 * math.exp(-1)) * cert05.c1)
    assert r2.eps_prime == pytest.approx(expect)


def test_zeta_bound_shape():
    z = np.array([0.5, 1.0, 2.0])
    b = dj.zeta_bound(z, N=100, T=2.0, d=2, Rstar=5.0, Jstar=math.sqrt(2.0))
    assert np.all(np.diff(b) < 0)
    assert np.all(b > 0)
