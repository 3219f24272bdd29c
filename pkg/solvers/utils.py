"""
Shared tensor helpers for the solvers.

Joint quantities factor through per-agent effective action distributions
w_i(s, a) = sum_rho chi_i(rho | s) pi_i(a | rho), so sums over joint
perturbations and joint actions are done agent by agent.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from games import conf
from games.exceptions import SizeGuardError

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-10


def check_joint_guard(model):
    """Reject models whose per-state joint perturbation x joint action count exceeds the guard."""
    limit = conf.joint_guard()
    for s in range(model.n_states):
        size = model.perturbation_count(s) * model.n_joint_actions
        if size > limit:
            logger.warning(f'Joint size guard hit at state {model.states[s]}: {size}')
            raise SizeGuardError(f'joint perturbations x joint actions at state {model.states[s]}', size, limit)


def effective_distributions(pi_tables, chi_tables):
    """Per-agent (S, |A^i|) action distributions at each true state."""
    return [np.asarray(chi) @ np.asarray(pi) for pi, chi in zip(pi_tables, chi_tables)]


def joint_weights(distributions):
    """Outer product of per-agent rows: shape (S, A1, ..., An)."""
    weights = distributions[0]
    for w in distributions[1:]:
        weights = weights[..., None] * w.reshape(w.shape[0], *([1] * (weights.ndim - 1)), w.shape[1])
    return weights


def induced_chain(model, distributions):
    """State-to-state kernel and expected stage reward under fixed action distributions."""
    weights = joint_weights(distributions).reshape(model.n_states, -1)
    kernel = np.einsum('sa,sat->st', weights, model.flat_transition)
    reward = np.einsum('sa,sa->s', weights, model.flat_reward)
    return kernel, reward


def q_values(model, values):
    """r(s, a) + gamma * sum_s' p(s' | s, a) v(s'), shape (S, A1, ..., An)."""
    return model.reward + model.gamma * model.transition @ np.asarray(values, dtype=float)


def marginal_payoff(q, distributions, agent):
    """
    Contract every agent axis except `agent` of q (S, A1, ..., An) with the
    other agents' distributions; returns (S, |A^agent|).
    """
    result = q
    # Contract from the last agent backwards so axis numbers stay valid.
    for j in reversed(range(len(distributions))):
        if j == agent:
            continue
        w = distributions[j]
        axis = j + 1
        result = np.moveaxis(result, axis, -1)
        result = np.einsum('s...a,sa->s...', result, w)
    return result


def stage_marginal_payoff(q_state, rows, agent):
    """marginal_payoff for a single state: q_state (A1, ..., An), rows[j] (|A^j|,)."""
    result = q_state
    for j in reversed(range(len(rows))):
        if j == agent:
            continue
        result = np.tensordot(result, rows[j], axes=([j], [0]))
    return result


def lowest_argmax(values, axis=-1, tolerance=TIE_TOLERANCE):
    """Index of the first entry within `tolerance` (relative to scale) of the maximum."""
    values = np.asarray(values, dtype=float)
    best = values.max(axis=axis, keepdims=True)
    slack = tolerance * (1.0 + np.abs(best))
    return np.argmax(values >= best - slack, axis=axis)


def lowest_argmin(values, axis=-1, tolerance=TIE_TOLERANCE):
    return lowest_argmax(-np.asarray(values, dtype=float), axis=axis, tolerance=tolerance)


def thread_map(function, items):
    """Ordered map over items, using up to SAMG_THREADS worker threads."""
    items = list(items)
    workers = min(conf.max_workers(), len(items))
    if workers <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, items))


def chunked(sequence, size):
    for start in range(0, len(sequence), size):
        yield sequence[start:start + size]
