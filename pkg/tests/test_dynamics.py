import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sirkn import seeding
from sirkn.distributions import ROLE_RECOVERY, ROLE_WEIGHT, parse_dist
from sirkn.dynamics import (INFECTION, MODE_DIRECT, MODE_THINNING, RECOVERY,
                            EpidemicState, SimParams, gillespie_run, next_event,
                            trajectory_rows)
from sirkn.environment import Environment
from sirkn.errors import DeadState, ParamViolation
from sirkn.experiment import chi_square_two_sample, wilson_interval

XI1 = parse_dist("constant:1", ROLE_RECOVERY)
RHO1 = parse_dist("constant:1", ROLE_WEIGHT)


def final_size_distribution_symmetric(n: int, lam: float) -> dict:
    """Exact law of the final size for xi = rho = 1 by recursion over (s, i).

    From (s, i) the next event is an infection with probability
    s*(lam/n) / (s*(lam/n) + 1) (the infective count cancels), independent
    of history; absorption at i = 0 leaves r = n - s ever-infected vertices.
    """
    out = {}

    def recurse(s, i, prob):
        if i == 0:
            out[n - s] = out.get(n - s, 0.0) + prob
            return
        if s == 0:
            out[n] = out.get(n, 0.0) + prob
            return
        p_inf = s * (lam / n) / (s * (lam / n) + 1.0)
        recurse(s - 1, i + 1, prob * p_inf)
        recurse(s, i - 1, prob * (1.0 - p_inf))

    recurse(n - 1, 1, 1.0)
    return out


def test_oracle_is_a_distribution():
    dist = final_size_distribution_symmetric(3, 2.0)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    # hand-checked values for n=3, lam=2: P(1)=3/7, P(2)=36/175, P(3)=64/175
    assert dist[1] == pytest.approx(3.0 / 7.0, rel=1e-12)
    assert dist[2] == pytest.approx(36.0 / 175.0, rel=1e-12)
    assert dist[3] == pytest.approx(64.0 / 175.0, rel=1e-12)


def test_lambda_zero_single_recovery():
    env = Environment(100, 5, XI1, RHO1)
    res = gillespie_run(env, SimParams(lam=0.0, run_seed=1))
    assert res.r_infinity == 1
    assert res.events_executed == 1
    assert not res.truncated


def test_n1_instant_absorption():
    env = Environment(1, 5, XI1, RHO1)
    res = gillespie_run(env, SimParams(lam=2.0, run_seed=3))
    assert res.r_infinity == 1
    assert res.events_executed == 1


def test_two_vertex_race_probability():
    # P(r = 2) = (lam/n) / ((lam/n) + 1) = 1/2 at lam = 2, n = 2
    env = Environment(2, 17, XI1, RHO1)
    reps = 20_000
    hits = sum(gillespie_run(env, SimParams(lam=2.0, run_seed=r)).r_infinity == 2
               for r in range(reps))
    lo, hi = wilson_interval(hits, reps, 0.99)
    assert lo <= 0.5 <= hi


def test_three_vertex_distribution_matches_enumeration():
    env = Environment(3, 8, XI1, RHO1)
    reps = 100_000
    samples = np.fromiter(
        (gillespie_run(env, SimParams(lam=2.0, run_seed=r)).r_infinity
         for r in range(reps)), dtype=np.int64, count=reps)
    dist = final_size_distribution_symmetric(3, 2.0)
    observed = np.array([(samples == k).sum() for k in (1, 2, 3)], dtype=float)
    expected = np.array([dist[k] * reps for k in (1, 2, 3)])
    stat = float(((observed - expected) ** 2 / expected).sum())
    from scipy.stats import chi2
    assert chi2.sf(stat, 2) > 0.01


def test_final_state_absorbed_and_r_equals_removed():
    env = Environment(60, 4, parse_dist("two_point:1:0.5:2", ROLE_RECOVERY),
                      parse_dist("uniform:0:1", ROLE_WEIGHT))
    res = gillespie_run(env, SimParams(lam=4.0, run_seed=2, record_trajectory=True))
    assert not res.truncated
    rows = trajectory_rows(res, 60)
    # absorbing state: no infectives left, removed count equals r_infinity
    assert rows[-1][4] == 0
    assert rows[-1][5] == res.r_infinity
    times = [row[0] for row in rows]
    assert all(t2 > t1 for t1, t2 in zip(times, times[1:]))


def test_monotone_removal_and_unit_steps():
    env = Environment(50, 12, XI1, RHO1)
    res = gillespie_run(env, SimParams(lam=3.0, run_seed=9, record_trajectory=True))
    r_prev, i_prev = 0, 1
    for _, kind, _vertex in res.trajectory:
        if kind == RECOVERY:
            r_prev += 1
            i_prev -= 1
        else:
            i_prev += 1
        assert i_prev >= 0 and r_prev >= 0
    assert r_prev == res.r_infinity


def test_seed_determinism_bit_identical():
    env = Environment(40, 3, parse_dist("two_point:1:0.25:3", ROLE_RECOVERY),
                      parse_dist("uniform:0.2:0.9", ROLE_WEIGHT))
    p = SimParams(lam=2.5, run_seed=77, record_trajectory=True)
    a = gillespie_run(env, p)
    b = gillespie_run(env, p)
    assert a.r_infinity == b.r_infinity
    assert a.extinction_time == b.extinction_time
    assert a.trajectory == b.trajectory


def test_event_cap_flags_truncated():
    env = Environment(200, 6, XI1, RHO1)
    res = gillespie_run(env, SimParams(lam=5.0, run_seed=1, max_events=3))
    assert res.truncated
    assert res.events_executed == 3
    assert res.r_infinity >= 1  # lower bound on ever-infected


def test_next_event_forced_recovery():
    env = Environment(1, 2, XI1, RHO1)
    state = EpidemicState(env, lam=2.0)
    rng = seeding.stream(1)
    dt, (kind, vertex) = next_event(state, rng)
    assert kind == RECOVERY and vertex == 0 and dt > 0


def test_next_event_dead_state():
    env = Environment(2, 2, XI1, RHO1)
    state = EpidemicState(env, lam=2.0)
    state.apply(RECOVERY, 0)
    with pytest.raises(DeadState):
        next_event(state, seeding.stream(1))


def test_next_event_two_vertex_infection_probability():
    env = Environment(2, 17, XI1, RHO1)
    state = EpidemicState(env, lam=2.0)
    rng = seeding.stream(99)
    reps = 20_000
    hits = sum(next_event(state, rng)[1][0] == INFECTION for _ in range(reps))
    lo, hi = wilson_interval(hits, reps, 0.99)
    assert lo <= 0.5 <= hi


def test_next_event_three_vertex_frequencies_match_rates():
    xi = parse_dist("two_point:1:0.5:2", ROLE_RECOVERY)
    rho = parse_dist("uniform:0.1:1", ROLE_WEIGHT)
    env = Environment(3, 23, xi, rho)
    lam = 1.7
    state = EpidemicState(env, lam=lam)
    # exact per-event probabilities from the environment itself
    rec_rate = env.xi_at(0)
    w1, w2 = env.rho_at(1, 0), env.rho_at(2, 0)
    total = rec_rate + (lam / 3) * (w1 + w2)
    probs = {(RECOVERY, 0): rec_rate / total,
             (INFECTION, 1): (lam / 3) * w1 / total,
             (INFECTION, 2): (lam / 3) * w2 / total}
    rng = seeding.stream(5)
    reps = 100_000
    counts = {k: 0 for k in probs}
    for _ in range(reps):
        _, ev = next_event(state, rng)
        counts[ev] += 1
    for ev, p in probs.items():
        se = np.sqrt(p * (1 - p) / reps)
        assert abs(counts[ev] / reps - p) < 3 * se, ev


@pytest.mark.parametrize("mode", [MODE_DIRECT, MODE_THINNING])
def test_rate_consistency_along_trajectory(mode):
    xi = parse_dist("shifted:uniform:0:1:+1", ROLE_RECOVERY)
    rho = parse_dist("uniform:0:1", ROLE_WEIGHT)
    env = Environment(200, 31, xi, rho)
    state = EpidemicState(env, lam=2.0, mode=mode)
    rng = seeding.stream(314)
    for step in range(160):
        if state.i_count == 0:
            break
        dt, (kind, vertex) = next_event(state, rng)
        state.apply(kind, vertex)
        if step % 20 == 0:
            rec, pressure = state.recompute_totals()
            assert state.total_recovery_rate == pytest.approx(rec, rel=1e-9, abs=1e-12)
            if mode == MODE_DIRECT:
                assert state.total_pressure == pytest.approx(pressure, rel=1e-9,
                                                             abs=1e-9)
            # labels partition the vertex set
            counts = np.bincount(state.labels, minlength=3)
            assert counts[0] == state.s_count
            assert counts[1] == state.i_count
            assert counts.sum() == state.n


def test_thinning_matches_direct_distribution():
    xi = parse_dist("two_point:1:0.5:2", ROLE_RECOVERY)
    rho = parse_dist("uniform:0:1", ROLE_WEIGHT)
    env_seed = 55
    reps = 10_000
    samples = {}
    for mode in (MODE_DIRECT, MODE_THINNING):
        vals = np.empty(reps, dtype=np.int64)
        for r in range(reps):
            env = Environment(10, seeding.derive_key(env_seed, r), xi, rho)
            vals[r] = gillespie_run(
                env, SimParams(lam=3.0, run_seed=r, mode=mode)).r_infinity
        samples[mode] = vals
    _, _, p = chi_square_two_sample(samples[MODE_DIRECT], samples[MODE_THINNING])
    assert p > 0.01


def test_invalid_params_rejected():
    env = Environment(5, 0, XI1, RHO1)
    with pytest.raises(ParamViolation):
        gillespie_run(env, SimParams(lam=-1.0, run_seed=0))
    with pytest.raises(ParamViolation):
        gillespie_run(env, SimParams(lam=1.0, run_seed=0, max_events=0))
    with pytest.raises(ParamViolation):
        EpidemicState(env, lam=1.0, mode="bogus")


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 40),
       st.integers(min_value=1, max_value=40),
       st.floats(min_value=0.0, max_value=6.0))
def test_run_invariants_property(seed, n, lam):
    env = Environment(n, seed, XI1, parse_dist("uniform:0:1", ROLE_WEIGHT))
    res = gillespie_run(env, SimParams(lam=lam, run_seed=seed ^ 1))
    assert 1 <= res.r_infinity <= n
    assert res.extinction_time > 0
    assert res.events_executed == 2 * res.r_infinity - 1  # r recoveries + r-1 infections
