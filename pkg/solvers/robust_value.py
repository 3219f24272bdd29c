"""
Robust state values of one agent against its own adversary, with the other
agents and adversaries held fixed.

At state s the stage payoff of agent i for perceived state rho and action a is

    g(rho, a) = sum_{a^-i} prod_{j != i} w_j(s, a_j) [r(s, a) + gamma * E v(s')]

and the stage maximin value is min_rho max_a g(rho, a): the adversary's
payoff is linear in its mixed choice and each perceived state's row of the
agent's strategy only affects its own term.
"""
import logging
from dataclasses import dataclass

import numpy as np

from games import conf
from games.samg import ValueTable

from .evaluation import _tables
from .mdp import FiniteMdp, solve_mdp, stopping_threshold
from .utils import effective_distributions, lowest_argmax, lowest_argmin, marginal_payoff, q_values

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StagePayoff:
    """g[k, a] for perceived state members[k] and action a."""
    state: int
    members: tuple
    g: np.ndarray


@dataclass(frozen=True)
class StageSolution:
    value: float
    members: tuple
    agent_rows: np.ndarray
    adversary_dist: np.ndarray

    def __iter__(self):
        return iter((self.value, self.agent_rows, self.adversary_dist))


@dataclass(frozen=True)
class RobustSolution:
    """
    values: the robust value table. agent_rows[s, rho] is agent i's greedy
    stage action distribution at true state s when shown rho (zero rows for
    rho outside P^i_s); adversary_rows[s] is adversary i's greedy choice.
    """
    values: ValueTable
    agent_rows: np.ndarray
    adversary_rows: np.ndarray
    iterations: int

    def __iter__(self):
        return iter((self.values, self.agent_rows, self.adversary_rows))


def _others(model, pi, chi):
    return effective_distributions(_tables(pi), _tables(chi))


def marginal_stage_payoffs(model, agent, values, distributions):
    """(S, |A^i|) payoff of each own action with everyone else marginalised out."""
    return marginal_payoff(q_values(model, values), distributions, agent)


def stage_payoff(model, agent, state, values, pi, chi):
    payoff = marginal_stage_payoffs(model, agent, _values(values), _others(model, pi, chi))[state]
    members = model.perturbation_sets[agent][state]
    return StagePayoff(state=state, members=members, g=np.tile(payoff, (len(members), 1)))


def solve_stage(payoff, n_actions):
    best = lowest_argmax(payoff.g, axis=1)
    row_values = payoff.g[np.arange(len(payoff.members)), best]
    shown = int(lowest_argmin(row_values))
    agent_rows = np.zeros((len(payoff.members), n_actions))
    agent_rows[np.arange(len(payoff.members)), best] = 1.0
    adversary = np.zeros(len(payoff.members))
    adversary[shown] = 1.0
    return StageSolution(
        value=float(row_values.min()),
        members=payoff.members,
        agent_rows=agent_rows,
        adversary_dist=adversary,
    )


def stage_maximin(model, agent, state, values, pi, chi):
    """
    max over agent stage strategies of min over adversary stage strategies at
    `state`, via min_rho max_a g(rho, a). Only the other agents' and
    adversaries' entries of pi and chi are used.
    """
    return solve_stage(stage_payoff(model, agent, state, values, pi, chi), model.action_counts[agent])


def _values(values):
    return values.values if isinstance(values, ValueTable) else np.asarray(values, dtype=float)


def _operator(model, agent, values, distributions):
    payoff = marginal_stage_payoffs(model, agent, values, distributions)
    result = np.empty(model.n_states)
    for s in range(model.n_states):
        members = model.perturbation_sets[agent][s]
        g = np.broadcast_to(payoff[s], (len(members), payoff.shape[1]))
        result[s] = g.max(axis=1).min()
    return result


def robust_operator(model, agent, values, pi, chi):
    """One synchronized sweep of the robust value operator."""
    return ValueTable(model.states, _operator(model, agent, _values(values), _others(model, pi, chi)))


def marginal_mdp(model, agent, distributions):
    """Agent i's MDP with every other agent's action distribution folded in."""
    rewards = marginal_payoff(model.reward, distributions, agent)
    kernels = [
        marginal_payoff(model.transition[..., t], distributions, agent) for t in range(model.n_states)
    ]
    transitions = np.stack(kernels, axis=-1)
    return FiniteMdp(
        states=model.states,
        rewards=tuple(rewards),
        transitions=tuple(transitions),
        gamma=model.gamma,
    )


def robust_fixed_point_from_distributions(model, agent, distributions, tol, initial=None,
                                          method='value_iteration'):
    """Robust values from precomputed effective distributions; returns (values, iterations)."""
    if method == 'policy_iteration':
        # The robust operator is the optimality operator of the marginal MDP.
        solution = solve_mdp(marginal_mdp(model, agent, distributions), tol, method=method, initial=initial)
        return solution.values.values, solution.iterations

    values = np.zeros(model.n_states) if initial is None else np.array(initial, dtype=float)
    threshold = stopping_threshold(tol, model.gamma)
    iterations = 0
    while True:
        updated = _operator(model, agent, values, distributions)
        iterations += 1
        change = float(np.max(np.abs(updated - values)))
        values = updated
        if change <= threshold:
            return values, iterations


def robust_fixed_point(model, agent, pi, chi, tol=None, initial=None, method='value_iteration'):
    """
    Fixed point of the robust operator for `agent`, iterated from `initial`
    (zeros by default), with the greedy stage strategies at convergence.
    """
    tol = conf.default_tol() if tol is None else tol
    distributions = _others(model, pi, chi)
    values, iterations = robust_fixed_point_from_distributions(
        model, agent, distributions, tol, initial=initial, method=method
    )
    logger.debug(f'Robust values for agent {agent + 1} by {method} after {iterations} iterations')

    n_actions = model.action_counts[agent]
    agent_rows = np.zeros((model.n_states, model.n_states, n_actions))
    adversary_rows = np.zeros((model.n_states, model.n_states))
    payoff = marginal_stage_payoffs(model, agent, values, distributions)
    for s in range(model.n_states):
        members = model.perturbation_sets[agent][s]
        stage = solve_stage(
            StagePayoff(s, members, np.tile(payoff[s], (len(members), 1))), n_actions
        )
        agent_rows[s, list(members)] = stage.agent_rows
        adversary_rows[s, list(members)] = stage.adversary_dist
    return RobustSolution(
        values=ValueTable(model.states, values),
        agent_rows=agent_rows,
        adversary_rows=adversary_rows,
        iterations=iterations,
    )
