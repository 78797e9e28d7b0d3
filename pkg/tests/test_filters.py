import math

import numpy as np
import pytest

from bdbridge.counting import NEG_INF
from bdbridge.errors import DataFormatError
from bdbridge.filters import (
    Observations,
    bootstrap_filter,
    failure_domain_scan,
    igbs_filter_loglik,
    igbs_filter_step,
    initial_state,
    run_filter,
)
from bdbridge.likelihood import estimate_pij_b
from bdbridge.models import SIRParams, sir_as_bd
from bdbridge.sampler import RngStream

SHIGELLA = SIRParams(n0=199, beta=0.0016, gamma=0.2607)


def make_obs(times, sus):
    return Observations(np.array(times, float), np.array(sus))


def test_observation_validation():
    with pytest.raises(DataFormatError):
        make_obs([0, 1, 1], [5, 4, 3])           # times not increasing
    with pytest.raises(DataFormatError):
        make_obs([0, 1, 2], [5, 6, 3])           # susceptibles increase
    with pytest.raises(DataFormatError):
        make_obs([0, 1], [3, -1])
    obs = make_obs([0.0, 1.5, 4.0], [9, 9, 7])
    assert obs.steps == 2
    assert obs.drops.tolist() == [0, 2]


def test_filter_state_invariants():
    state = initial_state(3)
    assert state.p_alive == 1.0
    assert state.posterior.tolist() == [0, 0, 0, 1]
    with pytest.raises(ValueError):
        initial_state(0)


def test_absorbed_step_is_zero_one():
    dead = initial_state(1)
    dead.posterior[:] = [1.0, 0.0]
    state, ll = igbs_filter_step(dead, SHIGELLA, 198, 198, 1.0, 100, RngStream(1))
    assert ll == 0.0 and state.p_alive == 0.0
    state, ll = igbs_filter_step(dead, SHIGELLA, 198, 196, 1.0, 100, RngStream(1))
    assert ll == NEG_INF


def test_one_step_constant_count_hand_value():
    # From one infectious case, an unchanged susceptible count means either no
    # event or a single removal; both terms integrate in closed form.
    total_rate = SHIGELLA.beta * 198 * 1 + SHIGELLA.gamma
    exact = math.exp(-total_rate) + SHIGELLA.gamma * (1 - math.exp(-total_rate)) / total_rate
    state, ll = igbs_filter_step(initial_state(1), SHIGELLA, 198, 198, 1.0,
                                 60_000, RngStream(5))
    assert math.exp(ll) == pytest.approx(exact, rel=0.01)
    assert state.posterior.sum() == pytest.approx(1.0, abs=1e-12)


def test_one_step_matches_bridge_expectation():
    # The step's conditional probability equals the sum over end states of the
    # fixed-up-jump transition probabilities, estimated independently.
    params = SIRParams(n0=199, beta=0.002, gamma=0.3)
    s_prev, s_next, i0 = 198, 196, 2
    drop = s_prev - s_next
    _, ll = igbs_filter_step(initial_state(i0), params, s_prev, s_next, 1.0,
                             120_000, RngStream(9))
    model = sir_as_bd(params, s0=s_prev)
    total, var = 0.0, 0.0
    for j in range(0, i0 + drop + 1):
        est = estimate_pij_b(model, i0, j, 1.0, drop, 120_000, RngStream(200 + j))
        total += est.value
        var += est.std_error ** 2
    assert abs(math.exp(ll) - total) <= 3.0 * math.sqrt(var) + 0.01 * total


def test_posterior_support_bound():
    obs = make_obs(range(6), [198, 198, 196, 195, 195, 192])
    state = initial_state(1)
    for k in range(1, len(obs)):
        state, _ = igbs_filter_step(
            state, SHIGELLA, int(obs.susceptibles[k - 1]), int(obs.susceptibles[k]),
            1.0, 4_000, RngStream(70 + k),
        )
        assert state.posterior.sum() == pytest.approx(1.0, abs=1e-12)
        assert len(state.posterior) == 1 + 1 + (198 - obs.susceptibles[k])


def test_loglik_constant_series_no_transmission():
    # With no transmission and constant counts the record is certain once the
    # single case recovers; the log-likelihood stays near 0 and always finite.
    obs = make_obs(range(8), [50] * 8)
    params = SIRParams(n0=51, beta=0.0, gamma=0.8)
    ll = igbs_filter_loglik(params, obs, 1, 4_000, RngStream(3))
    assert math.isfinite(ll)
    assert abs(ll) < 0.05


def test_loglik_impossible_drop():
    obs = make_obs([0, 1], [50, 48])
    params = SIRParams(n0=51, beta=0.0, gamma=0.8)
    assert igbs_filter_loglik(params, obs, 1, 2_000, RngStream(3)) == NEG_INF


def test_filter_deterministic():
    obs = make_obs(range(5), [198, 198, 197, 195, 195])
    a = igbs_filter_loglik(SHIGELLA, obs, 1, 3_000, RngStream(11))
    b = igbs_filter_loglik(SHIGELLA, obs, 1, 3_000, RngStream(11))
    assert a == b


def test_filter_time_rescaling_invariance():
    # Doubling all times while halving both rates leaves every conditional
    # probability unchanged.
    obs1 = make_obs(range(5), [198, 198, 197, 195, 195])
    obs2 = make_obs([0, 2, 4, 6, 8], [198, 198, 197, 195, 195])
    half = SIRParams(n0=199, beta=SHIGELLA.beta / 2, gamma=SHIGELLA.gamma / 2)
    a = igbs_filter_loglik(SHIGELLA, obs1, 1, 5_000, RngStream(13))
    b = igbs_filter_loglik(half, obs2, 1, 5_000, RngStream(13))
    assert a == pytest.approx(b, abs=1e-9)


def test_run_filter_trace():
    obs = make_obs(range(4), [198, 197, 197, 196])
    trace = []
    ll, final = run_filter(SHIGELLA, obs, 1, 2_000, RngStream(17), trace=trace)
    assert len(trace) == 3
    assert ll == pytest.approx(sum(e["cond_loglik"] for e in trace))
    assert final.posterior.sum() == pytest.approx(1.0, abs=1e-12)


def test_bootstrap_frozen_model():
    obs = make_obs(range(5), [60] * 5)
    params = SIRParams(n0=61, beta=0.0, gamma=0.0)
    res = bootstrap_filter(params, obs, 2_000, 0.001, RngStream(19))
    assert res.loglik == 0.0
    assert not res.failed
    assert np.all(res.survival == 1.0)


def test_bootstrap_matches_igbs_filter():
    obs = make_obs(range(8), [198, 198, 197, 197, 196, 195, 195, 194])
    boot = bootstrap_filter(SHIGELLA, obs, 60_000, 0.001, RngStream(23))
    igbs = igbs_filter_loglik(SHIGELLA, obs, 1, 20_000, RngStream(29))
    assert not boot.failed
    assert abs(boot.loglik - igbs) < 0.35


def test_bootstrap_all_dead_weights():
    obs = make_obs([0, 1], [50, 45])
    params = SIRParams(n0=51, beta=1e-7, gamma=5.0)
    res = bootstrap_filter(params, obs, 500, 0.001, RngStream(31))
    assert res.loglik == NEG_INF and res.failed


def test_failure_scan_threshold_monotone():
    obs = make_obs(range(6), [198, 198, 196, 194, 193, 192])
    scan = failure_domain_scan(obs, [0.001, 0.004], [0.15, 0.5], 3_000,
                               (0.001, 0.0001), RngStream(37))
    assert scan.survival_min.shape == (2, 2)
    # failure at the tighter threshold implies failure at the looser one
    assert np.all(scan.failed[1] <= scan.failed[0])
