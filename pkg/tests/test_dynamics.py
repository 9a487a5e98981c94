import numpy as np
import pytest
import scipy.linalg as sl

from disordered_chain.chain import ChainState, hopping_matrix, sample_disorder, sample_gibbs
from disordered_chain.config import ModelParams
from disordered_chain.dynamics import EXCHANGE, FLIP, poisson_events, simulate, step_deterministic, time_rescale


def test_cayley_step_is_orthogonal_and_second_order():
    p = ModelParams(n=12)
    m = sample_disorder(p, 0)
    s = sample_gibbs(p, 0)
    exact = sl.expm(hopping_matrix(m) * 0.1) @ s.omega
    errs = []
    for k in (10, 20):
        w = s
        for _ in range(k):
            w = step_deterministic(w, m, 0.1 / k)
        assert w.energy() == pytest.approx(s.energy(), rel=1e-13)
        errs.append(np.abs(w.omega - exact).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_large_cayley_step_uses_pivoted_solve():
    p = ModelParams(n=8)
    m = sample_disorder(p, 0)
    s = sample_gibbs(p, 0)
    w = step_deterministic(s, hopping_matrix(m), 5.0)
    assert w.energy() == pytest.approx(s.energy(), rel=1e-12)
    assert w.time == 5.0
    with pytest.raises(ValueError):
        step_deterministic(s, m, -1.0)


def test_noiseless_flow_matches_matrix_exponential():
    p = ModelParams(gamma=0.0, lam=0.0, n=10)
    m = sample_disorder(p, 1)
    s = sample_gibbs(p, 1)
    tr = simulate(p, m, s, 1.0, 0, dt_max=1e-3)
    exact = sl.expm(hopping_matrix(m)) @ s.omega
    assert np.abs(tr.omega[-1] - exact).max() < 1e-5
    assert tr.n_flips == 0 and tr.n_exchanges == 0


def test_trajectory_conserves_energy_and_balances_locally():
    p = ModelParams(n=32)
    m = sample_disorder(p, 2)
    tr = simulate(p, m, sample_gibbs(p, 2), 5.0, 2)
    e = tr.energy()
    assert np.abs(e - e[0]).max() / e[0] < 1e-12
    assert tr.conservation_residual() < 1e-9
    assert tr.n_flips > 0 and tr.n_exchanges > 0


def test_same_seed_same_trajectory():
    p = ModelParams(n=16)
    m = sample_disorder(p, 3)
    s = sample_gibbs(p, 3)
    a = simulate(p, m, s, 2.0, 9)
    b = simulate(p, m, s, 2.0, 9)
    c = simulate(p, m, s, 2.0, 9, replica=1)
    assert np.array_equal(a.omega, b.omega) and np.array_equal(a.j_mart, b.j_mart)
    assert not np.array_equal(a.omega, c.omega)


def test_poisson_clock_rates():
    p = ModelParams(gamma=1.0, lam=3.0, n=50)
    times, kinds, sites = poisson_events(p, 100.0, 0)
    expected = p.total_rate * 100.0
    assert abs(times.size - expected) < 5 * np.sqrt(expected)
    assert np.mean(kinds == FLIP) == pytest.approx(0.25, abs=0.01)
    assert np.all(np.diff(times) > 0) and times[-1] <= 100.0
    assert sites.min() >= 0 and sites.max() < 50
    assert set(np.unique(kinds)) <= {FLIP, EXCHANGE}


def test_observation_grid_and_errors():
    p = ModelParams(n=8)
    m = sample_disorder(p, 0)
    s = sample_gibbs(p, 0)
    tr = simulate(p, m, s, 1.0, 0, obs_grid=[0.0, 0.5])
    assert list(tr.times) == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        simulate(p, m, s, 0.0, 0)
    with pytest.raises(ValueError):
        simulate(p, m, s, 1.0, 0, obs_grid=[0.5, 0.2])
    with pytest.raises(ValueError):
        simulate(p.replace(n=9), m, s, 1.0, 0)


def test_trajectory_csv_and_rescale():
    p = ModelParams(n=4)
    m = sample_disorder(p, 0)
    tr = simulate(p, m, sample_gibbs(p, 0), 1.0, 0, obs_grid=[0.0])
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x,omega,J_drift,J_mart" and len(lines) == 1 + 2 * 4
    assert float(lines[1].split(",")[2]) == tr.omega[0, 0]
    back = time_rescale(time_rescale(tr, 4), 4, inverse=True)
    assert np.allclose(back.times, tr.times) and back.time_scale == 1.0
    with pytest.raises(ValueError):
        time_rescale(tr, 0)


def test_start_from_state_clock():
    p = ModelParams(n=6)
    m = sample_disorder(p, 0)
    s = ChainState(sample_gibbs(p, 0).omega, 2.5)
    tr = simulate(p, m, s, 1.0, 0)
    assert tr.times[0] == 2.5 and tr.times[-1] == pytest.approx(3.5)
