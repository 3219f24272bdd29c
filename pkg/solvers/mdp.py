"""
Exact solvers for finite discounted MDPs with state-dependent action sets.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from games.samg import ValueTable

from .utils import lowest_argmax

logger = logging.getLogger(__name__)

METHODS = ('value_iteration', 'policy_iteration')


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """rewards[s] has shape (K_s,), transitions[s] has shape (K_s, S); the agent maximises."""
    states: tuple
    rewards: tuple
    transitions: tuple
    gamma: float

    @property
    def n_states(self):
        return len(self.states)

    @cached_property
    def action_counts(self):
        return tuple(len(r) for r in self.rewards)

    @cached_property
    def padded(self):
        """(S, K_max) rewards padded with -inf and (S, K_max, S) transitions padded with zeros."""
        width = max(self.action_counts)
        rewards = np.full((self.n_states, width), -np.inf)
        transitions = np.zeros((self.n_states, width, self.n_states))
        for s, (r, p) in enumerate(zip(self.rewards, self.transitions)):
            rewards[s, :len(r)] = r
            transitions[s, :len(r)] = p
        return rewards, transitions

    def backup(self, values):
        rewards, transitions = self.padded
        return rewards + self.gamma * transitions @ values

    def evaluate_actions(self, actions):
        """Exact value of the deterministic stationary policy choosing actions[s]."""
        rows = np.arange(self.n_states)
        rewards, transitions = self.padded
        kernel = transitions[rows, actions]
        reward = rewards[rows, actions]
        return np.linalg.solve(np.eye(self.n_states) - self.gamma * kernel, reward)


@dataclass(frozen=True)
class MdpSolution:
    values: ValueTable
    greedy: tuple
    iterations: int
    residual: float

    def __iter__(self):
        return iter((self.values, self.greedy))


def stopping_threshold(tol, gamma):
    return tol * (1.0 - gamma) / (2.0 * gamma)


def solve_mdp(mdp, tol, method='value_iteration', initial=None, max_iterations=None):
    """
    Optimal values and a greedy action per state.

    Value iteration runs synchronized sweeps until the max-norm change drops
    to tol * (1 - gamma) / (2 * gamma). Policy iteration evaluates each
    policy exactly and only switches actions on strict improvement. Greedy
    actions prefer the lowest index among near-ties.
    """
    if tol <= 0:
        raise ValueError('tol must be positive')
    if method not in METHODS:
        raise ValueError(f'unknown method "{method}"; expected one of {METHODS}')

    values = np.zeros(mdp.n_states) if initial is None else np.array(initial, dtype=float)

    if method == 'value_iteration':
        threshold = stopping_threshold(tol, mdp.gamma)
        iterations = 0
        while True:
            updated = mdp.backup(values).max(axis=1)
            iterations += 1
            residual = float(np.max(np.abs(updated - values)))
            values = updated
            if residual <= threshold:
                break
            if max_iterations is not None and iterations >= max_iterations:
                logger.warning(f'Value iteration stopped at the cap of {max_iterations} sweeps')
                break
    else:
        actions = lowest_argmax(mdp.backup(values), axis=1)
        iterations = 0
        while True:
            values = mdp.evaluate_actions(actions)
            iterations += 1
            q = mdp.backup(values)
            current = q[np.arange(mdp.n_states), actions]
            improved = q.max(axis=1) > current + 1e-12 * (1.0 + np.abs(current))
            if not np.any(improved):
                break
            actions = np.where(improved, np.argmax(q, axis=1), actions)
        residual = float(np.max(np.abs(q.max(axis=1) - values)))

    greedy = tuple(int(a) for a in lowest_argmax(mdp.backup(values), axis=1))
    return MdpSolution(
        values=ValueTable(mdp.states, values),
        greedy=greedy,
        iterations=iterations,
        residual=residual,
    )
