"""
Seeded random test instances.
"""
import numpy as np

from .exceptions import SamgError
from .samg import SamgModel


def random_game(seed, n_agents, n_states, n_actions, perturb_size, gamma=0.9):
    """
    Random model that is a deterministic function of its arguments.

    Transition rows are normalised uniform draws, rewards are uniform in
    [-1, 1], and each admissible set holds the true state plus
    perturb_size - 1 distinct other states.
    """
    if min(n_agents, n_states, n_actions, perturb_size) < 1:
        raise SamgError('all counts must be at least 1')
    if perturb_size > n_states:
        raise SamgError(f'perturb_size {perturb_size} exceeds the number of states {n_states}')

    rng = np.random.default_rng(seed)
    shape = (n_states, *([n_actions] * n_agents))
    raw = rng.uniform(size=(*shape, n_states)) + 1e-3
    transition = raw / raw.sum(axis=-1, keepdims=True)
    reward = rng.uniform(-1.0, 1.0, size=shape)

    perturbation_sets = []
    for _ in range(n_agents):
        per_state = []
        for s in range(n_states):
            others = [t for t in range(n_states) if t != s]
            extra = rng.choice(others, size=perturb_size - 1, replace=False) if perturb_size > 1 else []
            per_state.append((s, *(int(t) for t in extra)))
        perturbation_sets.append(per_state)

    return SamgModel(
        states=[f's{k + 1}' for k in range(n_states)],
        actions=[[f'a{k + 1}' for k in range(n_actions)] for _ in range(n_agents)],
        transition=transition,
        reward=reward,
        perturbation_sets=perturbation_sets,
        gamma=gamma,
        initial_dist=np.full(n_states, 1.0 / n_states),
    )
