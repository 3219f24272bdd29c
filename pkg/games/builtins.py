"""
Built-in two-agent two-state coordination games and their named policies.

In "fig4" agents are paid at s1 for matching actions and at s2 for differing
ones; matching at s1 moves to s2, differing at s2 stays there, and the other
combinations lead back. "fig5" swaps the two transitions out of s1.
"""
import numpy as np

from .exceptions import UnknownGameError
from .samg import AgentPolicy, SamgModel

STATES = ('s1', 's2')
ACTIONS = (('a1', 'a2'), ('a1', 'a2'))
GAMMA = 0.99


def _coordination_game(same_at_s1_target, differ_at_s1_target):
    transition = np.zeros((2, 2, 2, 2))
    reward = np.zeros((2, 2, 2))
    for a1 in range(2):
        for a2 in range(2):
            same = a1 == a2
            transition[0, a1, a2, same_at_s1_target if same else differ_at_s1_target] = 1.0
            transition[1, a1, a2, 0 if same else 1] = 1.0
            reward[0, a1, a2] = 1.0 if same else 0.0
            reward[1, a1, a2] = 0.0 if same else 1.0
    everywhere = ((0, 1), (0, 1))
    return SamgModel(
        states=STATES,
        actions=ACTIONS,
        transition=transition,
        reward=reward,
        perturbation_sets=(everywhere, everywhere),
        gamma=GAMMA,
        initial_dist=np.full(2, 0.5),
    )


BUILTIN_GAMES = {
    'fig4': lambda: _coordination_game(same_at_s1_target=1, differ_at_s1_target=0),
    'fig5': lambda: _coordination_game(same_at_s1_target=0, differ_at_s1_target=1),
}

# Deterministic choices[agent][perceived state] for the named policies.
NAMED_POLICIES = {
    'coordination': ((0, 0), (0, 1)),
    'always_differ': ((0, 0), (1, 1)),
    'always_same': ((0, 0), (0, 0)),
    'anti_coordination': ((0, 0), (1, 0)),
}


def builtin_game(name):
    try:
        factory = BUILTIN_GAMES[name]
    except KeyError:
        raise UnknownGameError(name, tuple(BUILTIN_GAMES)) from None
    return factory()


def builtin_policy(name, model):
    """
    Named policies for two-agent two-state two-action models.

    "stochastic" is uniform everywhere; the rest are deterministic.
    """
    if model.n_agents != 2 or model.n_states != 2 or model.action_counts != (2, 2):
        raise UnknownGameError(name, ())
    if name == 'stochastic':
        return AgentPolicy.uniform(model)
    try:
        choices = NAMED_POLICIES[name]
    except KeyError:
        raise UnknownGameError(name, ('stochastic', *NAMED_POLICIES)) from None
    return AgentPolicy.deterministic(model, choices)
