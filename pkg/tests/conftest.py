import numpy as np
import pytest

from gfnadapt.rewards import RewardConfig, TerminalScorer
from gfnadapt.simulator import (
    DEFAULT_TRUTH_KEY,
    builtin_space,
    generate_contexts,
    synthesize_observations,
)
from gfnadapt.space import ActionSpec, GroupSpec, ParameterSpec, build_space, decode_state


def make_tiny_space(cycles=1, step_fraction=0.3):
    """Two groups with action counts (2, 3): six one-cycle terminals."""
    params = [
        ParameterSpec("a", 0.0, 10.0, 5.0, group=1),
        ParameterSpec("b", 0.0, 10.0, 5.0, group=2),
    ]
    groups = [
        GroupSpec(1, "g1", (ActionSpec("none", {}), ActionSpec("up", {"a": 1}))),
        GroupSpec(
            2,
            "g2",
            (
                ActionSpec("none", {}),
                ActionSpec("up", {"b": 1}),
                ActionSpec("down", {"b": -1}),
            ),
        ),
    ]
    return build_space(groups, params, cycles, step_fraction)


def make_mini_sim_space():
    """Built-in crop parameters with only the first two action groups kept:
    15 terminals, cheap to enumerate, still drives the real simulator."""
    import dataclasses

    sp = builtin_space()
    return dataclasses.replace(sp, groups=sp.groups[:2])


class StubScorer:
    """Fixed synthetic rewards per terminal key, no simulator behind it."""

    def __init__(self, rewards: dict):
        self.rewards = rewards
        self.unique_scored = 0
        self.sim_evals = 0
        self._seen = set()

    def score(self, key):
        if key not in self._seen:
            self._seen.add(key)
            self.unique_scored += 1

        class Rec:
            pass

        rec = Rec()
        rec.reward = self.rewards[key]
        rec.aggregate = -float(np.log(self.rewards[key]))
        return rec


@pytest.fixture(scope="session")
def space():
    return builtin_space()


@pytest.fixture(scope="session")
def tiny_space():
    return make_tiny_space()


@pytest.fixture(scope="session")
def obs_contexts(space):
    contexts = generate_contexts(7, days=180)
    truth = decode_state(space, DEFAULT_TRUTH_KEY)
    return synthesize_observations(contexts, truth, 0.03, seed=8)


@pytest.fixture(scope="session")
def fitted_scorer(space, obs_contexts):
    scorer = TerminalScorer(space, obs_contexts, RewardConfig())
    scorer.fit_on_enumeration()
    return scorer


@pytest.fixture(scope="session")
def full_landscape(space, fitted_scorer):
    from gfnadapt.landscape import build_landscape

    return build_landscape(space, fitted_scorer)
