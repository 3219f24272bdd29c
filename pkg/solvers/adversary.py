"""
Worst-case values and optimal adversaries for a fixed agent policy.

With the agents fixed, the adversaries jointly face an MDP whose actions at
s are the joint perturbations in P^1_s x ... x P^n_s, whose reward is the
negated expected agent reward and whose transitions average the game's
transitions over the induced joint action distribution.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from games import conf
from games.exceptions import SizeGuardError
from games.samg import AdversaryPolicy, AgentPolicy, ValueTable

from .evaluation import _tables, evaluate
from .mdp import FiniteMdp, solve_mdp
from .utils import chunked, thread_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdversaryMdp(FiniteMdp):
    """FiniteMdp whose action k at state s is the joint perturbation actions_per_state[s][k]."""
    actions_per_state: tuple = ()


@dataclass(frozen=True)
class WorstCase:
    values: ValueTable
    adversary: AdversaryPolicy

    def __iter__(self):
        return iter((self.values, self.adversary))


def joint_perturbations(model, state):
    """Joint perturbations at `state` in lexicographic order of per-agent member indices."""
    return list(itertools.product(*(model.perturbation_sets[i][state] for i in range(model.n_agents))))


def build_adversary_mdp(model, pi):
    pi_tables = _tables(pi)
    AgentPolicy(pi_tables).check_shape(model)
    limit = conf.enumeration_guard()
    rewards, transitions, actions = [], [], []
    for s in range(model.n_states):
        count = model.perturbation_count(s)
        if count > limit:
            raise SizeGuardError(f'joint perturbations at state {model.states[s]}', count, limit)
        if count * model.n_joint_actions > conf.joint_guard():
            raise SizeGuardError(
                f'joint perturbations x joint actions at state {model.states[s]}',
                count * model.n_joint_actions,
                conf.joint_guard(),
            )
        members = np.array(joint_perturbations(model, s), dtype=int).reshape(count, model.n_agents)
        # weights[k, a] = prod_i pi_i(a_i | rho_i) for joint perturbation k
        weights = np.asarray(pi_tables[0])[members[:, 0]]
        for i in range(1, model.n_agents):
            rows = np.asarray(pi_tables[i])[members[:, i]]
            weights = (weights[:, :, None] * rows[:, None, :]).reshape(count, -1)
        rewards.append(-weights @ model.flat_reward[s])
        transitions.append(weights @ model.flat_transition[s])
        actions.append(tuple(tuple(int(r) for r in row) for row in members))
    return AdversaryMdp(
        states=model.states,
        rewards=tuple(rewards),
        transitions=tuple(transitions),
        gamma=model.gamma,
        actions_per_state=tuple(actions),
    )


def adversary_from_choices(model, mdp, greedy):
    """Factor the greedy joint perturbation per agent into a deterministic AdversaryPolicy."""
    choices = [[mdp.actions_per_state[s][greedy[s]][i] for s in range(model.n_states)]
               for i in range(model.n_agents)]
    return AdversaryPolicy.deterministic(model, choices)


def optimal_adversary(model, pi, tol=None, method='value_iteration', initial=None):
    """
    Worst-case values V_bar_pi = -V_hat* and a deterministic optimal adversary.

    `initial` warm-starts the adversary MDP solve with agent-side values.
    """
    tol = conf.default_tol() if tol is None else tol
    mdp = build_adversary_mdp(model, pi)
    warm = None if initial is None else -np.asarray(initial, dtype=float)
    solution = solve_mdp(mdp, tol, method=method, initial=warm)
    logger.debug(f'Adversary MDP solved by {method} in {solution.iterations} iterations')
    return WorstCase(
        values=ValueTable(model.states, -solution.values.values),
        adversary=adversary_from_choices(model, mdp, solution.greedy),
    )


@dataclass(frozen=True)
class AdversaryEnumeration:
    minima: ValueTable
    witness: AdversaryPolicy
    simultaneous: bool
    count: int


def deterministic_adversary_choices(model):
    """All deterministic adversaries as per-agent state->shown-state tuples, lexicographic in (agent, state)."""
    slots = [model.perturbation_sets[i][s] for i in range(model.n_agents) for s in range(model.n_states)]
    total = int(np.prod([len(members) for members in slots]))
    limit = conf.enumeration_guard()
    if total > limit:
        raise SizeGuardError('deterministic adversary policies', total, limit)
    for flat in itertools.product(*slots):
        yield [flat[i * model.n_states:(i + 1) * model.n_states] for i in range(model.n_agents)]


def enumerate_deterministic_adversaries(model, pi):
    """
    Evaluate every deterministic adversary; report the pointwise minima and
    the first adversary attaining them at every state, if any does.
    """
    choices = list(deterministic_adversary_choices(model))

    def evaluate_chunk(chunk):
        return [evaluate(model, pi, AdversaryPolicy.deterministic(model, c)).values for c in chunk]

    values = np.array([v for part in thread_map(evaluate_chunk, chunked(choices, 256)) for v in part])
    minima = values.min(axis=0)
    attains = np.all(values <= minima + 1e-9 * (1.0 + np.abs(minima)), axis=1)
    simultaneous = bool(np.any(attains))
    index = int(np.argmax(attains)) if simultaneous else int(np.argmin(values.sum(axis=1)))
    if not simultaneous:
        logger.info('No single deterministic adversary attains every pointwise minimum')
    return AdversaryEnumeration(
        minima=ValueTable(model.states, minima),
        witness=AdversaryPolicy.deterministic(model, choices[index]),
        simultaneous=simultaneous,
        count=len(choices),
    )
