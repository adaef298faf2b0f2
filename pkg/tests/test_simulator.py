import numpy as np
import pytest

from gfnadapt.simulator import (
    DEFAULT_TRUTH_KEY,
    ContextDataset,
    generate_contexts,
    simulate,
    synthesize_observations,
)
from gfnadapt.simulator import _inhibition
from gfnadapt.space import decode_state

# Baseline-parameter trajectory for context 1 (contexts_seed=7), frozen from
# an independent straight-line reimplementation of the daily recurrence.
GOLDEN_CONTEXT1 = [
    0.0,
    0.006224889083315,
    0.02670535567251,
    0.05501319843248,
    0.07885975640947,
    0.0996843502612,
    0.1173656156021,
    0.1321785335589,
    0.1463535527822,
    0.1580196778149,
    0.1685993046042,
    0.1799951033697,
]


def test_golden_baseline_trajectory(space):
    ctx = generate_contexts(7)[0]
    traj = simulate(decode_state(space, ()), ctx)
    assert traj == pytest.approx(GOLDEN_CONTEXT1, rel=1e-11, abs=1e-13)


def test_zero_light_means_zero_yield(space):
    ctx = generate_contexts(7)[0]
    dark = ContextDataset(
        context_id=1,
        days=ctx.days,
        t_day=ctx.t_day,
        t_24=ctx.t_24,
        light=np.full(ctx.days, 1e-300),
        co2=ctx.co2,
        obs_times=ctx.obs_times,
        obs_values=ctx.obs_values,
    )
    traj = simulate(decode_state(space, ()), dark)
    assert np.allclose(traj, 0.0, atol=1e-12)


def test_trajectory_non_decreasing(space, obs_contexts):
    rng = np.random.default_rng(3)
    radices = space.slot_radices
    for _ in range(20):
        key = tuple(int(rng.integers(r)) for r in radices)
        for ctx in obs_contexts:
            traj = simulate(decode_state(space, key), ctx)
            assert np.all(traj >= 0)
            assert np.all(np.diff(traj) >= 0)


def test_missing_parameter_rejected(space):
    ctx = generate_contexts(7)[0]
    params = decode_state(space, ())
    del params["P_max"]
    with pytest.raises(ValueError, match="P_max"):
        simulate(params, ctx)


def test_obs_times_biweekly():
    for ctx in generate_contexts(0, days=180):
        assert ctx.obs_times.tolist() == list(range(14, 169, 14))


def test_contexts_deterministic():
    a = generate_contexts(42)
    b = generate_contexts(42)
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.t_day, cb.t_day)
        assert np.array_equal(ca.light, cb.light)
        assert np.array_equal(ca.co2, cb.co2)


def test_regimes_pairwise_distinct():
    contexts = generate_contexts(11)
    stats = [(c.t_24.mean(), c.co2.mean()) for c in contexts]
    for i in range(len(stats)):
        for j in range(i + 1, len(stats)):
            t_diff = abs(stats[i][0] - stats[j][0])
            c_diff = abs(stats[i][1] - stats[j][1])
            assert t_diff > 0.5 or c_diff > 50.0


def test_noise_free_observations_match_truth(space):
    contexts = generate_contexts(7)
    truth = decode_state(space, DEFAULT_TRUTH_KEY)
    obs = synthesize_observations(contexts, truth, 0.0, seed=1)
    for ctx in obs:
        assert np.array_equal(ctx.obs_values, simulate(truth, ctx))


def test_noisy_observations_keep_invariants(space):
    contexts = generate_contexts(7)
    truth = decode_state(space, DEFAULT_TRUTH_KEY)
    obs = synthesize_observations(contexts, truth, 0.2, seed=5)
    for ctx in obs:
        assert np.all(ctx.obs_values >= 0)
        assert np.all(np.diff(ctx.obs_values) >= 0)


def test_inhibition_bounded_and_peaks_at_optimum():
    grid = np.linspace(-20, 60, 1601)
    for t_opt, t_width, s in [(22.0, 8.0, 0.6), (16.0, 4.0, 1.5), (28.0, 14.0, 0.2)]:
        vals = np.array([_inhibition(t, t_opt, t_width, s) for t in grid])
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        assert abs(grid[np.argmax(vals)] - t_opt) <= grid[1] - grid[0] + 1e-9


def test_pmax_monotone_response(space, obs_contexts):
    base = decode_state(space, ())
    for ctx in obs_contexts:
        prev = None
        for p_max in np.linspace(0.005, 0.04, 6):
            params = dict(base, P_max=float(p_max))
            final = simulate(params, ctx)[-1]
            if prev is not None:
                assert final >= prev - 1e-15
            prev = final


def test_simulate_pure(space, obs_contexts):
    params = decode_state(space, (1, 1, 1, 1, 1))
    a = simulate(params, obs_contexts[0])
    b = simulate(params, obs_contexts[0])
    assert np.array_equal(a, b)


def test_context_json_roundtrip(tmp_path, obs_contexts):
    from gfnadapt.simulator import contexts_from_json, contexts_to_json

    path = tmp_path / "contexts.json"
    contexts_to_json(obs_contexts, path)
    loaded = contexts_from_json(path)
    for a, b in zip(obs_contexts, loaded):
        assert a.context_id == b.context_id
        assert np.array_equal(a.obs_values, b.obs_values)
        assert np.array_equal(a.t_24, b.t_24)
