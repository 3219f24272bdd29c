"""Small hand-checkable games shared by the solver tests."""
import shutil
import tempfile

import numpy as np

from games.samg import AdversaryPolicy, SamgModel


def single_state_game(gamma=0.9):
    """One agent choosing between a paying and a non-paying action forever."""
    return SamgModel(
        states=['s'],
        actions=[['a1', 'a2']],
        transition=np.ones((1, 2, 1)),
        reward=[[1.0, 0.0]],
        perturbation_sets=[[(0,)]],
        gamma=gamma,
        initial_dist=[1.0],
    )


def matching_game(gamma=0.9):
    """Two agents paid 1 whenever their actions match; a single state and no perturbation."""
    return SamgModel(
        states=['s'],
        actions=[['a1', 'a2'], ['a1', 'a2']],
        transition=np.ones((1, 2, 2, 1)),
        reward=np.eye(2)[None],
        perturbation_sets=[[(0,)], [(0,)]],
        gamma=gamma,
        initial_dist=[1.0],
    )


def constant_reward(model, value):
    return model.with_reward(np.full(model.reward.shape, float(value)))


def random_adversary(model, rng):
    """Random adversary tables supported on the admissible sets."""
    tables = []
    for i in range(model.n_agents):
        table = np.zeros((model.n_states, model.n_states))
        for s, members in enumerate(model.perturbation_sets[i]):
            table[s, list(members)] = rng.dirichlet(np.ones(len(members)))
        tables.append(table)
    return AdversaryPolicy(tuple(tables))


def scratch_dir(test):
    """Temporary directory removed when `test` finishes."""
    path = tempfile.mkdtemp()
    test.addCleanup(shutil.rmtree, path, ignore_errors=True)
    return path
