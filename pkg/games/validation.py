"""
Invariant checks for models and policies. Violations are returned as data.
"""
import itertools

import numpy as np

from .samg import PROBABILITY_TOLERANCE


def _joint_label(model, joint):
    return ' '.join(model.actions[i][a] for i, a in enumerate(joint))


def validate_model(model):
    """Return the list of broken model invariants; empty when the model is valid."""
    violations = []

    if not 0.0 < model.gamma < 1.0:
        violations.append(f'gamma out of range: {model.gamma!r} not in (0, 1)')
    if model.n_states == 0:
        violations.append('states: at least one state is required')
    for i, acts in enumerate(model.actions):
        if not acts:
            violations.append(f'actions: agent {i + 1} has no actions')

    if not np.all(np.isfinite(model.reward)):
        violations.append('reward: non-finite entries')

    for s, state in enumerate(model.states):
        for joint in itertools.product(*(range(k) for k in model.action_counts)):
            row = model.transition[(s, *joint)]
            label = f'transition row ({state}, {_joint_label(model, joint)})'
            if np.any(row < 0):
                violations.append(f'{label} has negative entries')
            total = float(row.sum())
            if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                violations.append(f'{label} sums to {total:.17g}, not 1')

    init = model.initial_dist
    if np.any(init < 0):
        violations.append('initial_dist has negative entries')
    if abs(float(init.sum()) - 1.0) > PROBABILITY_TOLERANCE:
        violations.append(f'initial_dist sums to {float(init.sum()):.17g}, not 1')

    for i, per_state in enumerate(model.perturbation_sets):
        for s, members in enumerate(per_state):
            state = model.states[s] if s < model.n_states else str(s)
            name = f'P^{i + 1}_{{{state}}}'
            if not members:
                violations.append(f'{name} is empty')
                continue
            unknown = [m for m in members if not 0 <= m < model.n_states]
            if unknown:
                violations.append(f'{name} contains unknown state indices {unknown}')
            repeated = sorted({m for m in members if members.count(m) > 1})
            for m in repeated:
                label = model.states[m] if 0 <= m < model.n_states else str(m)
                violations.append(f'{name} has a duplicate entry {label}')
            if s not in members:
                violations.append(f'true state {state} not in {name}')

    return violations


def policy_violations(model, policy):
    violations = []
    if policy.n_agents != model.n_agents:
        return [f'agent policy covers {policy.n_agents} agents, model has {model.n_agents}']
    for i, (table, k) in enumerate(zip(policy.tables, model.action_counts)):
        if table.shape != (model.n_states, k):
            violations.append(f'agent policy {i + 1} has shape {table.shape}, expected {(model.n_states, k)}')
            continue
        for rho, row in enumerate(table):
            label = f'pi^{i + 1}(.|{model.states[rho]})'
            if np.any(row < 0) or np.any(row > 1):
                violations.append(f'{label} has entries outside [0, 1]')
            if abs(float(row.sum()) - 1.0) > PROBABILITY_TOLERANCE:
                violations.append(f'{label} sums to {float(row.sum()):.17g}, not 1')
    return violations


def adversary_violations(model, policy):
    violations = []
    if policy.n_agents != model.n_agents:
        return [f'adversary policy covers {policy.n_agents} agents, model has {model.n_agents}']
    for i, table in enumerate(policy.tables):
        if table.shape != (model.n_states, model.n_states):
            violations.append(f'adversary policy {i + 1} has shape {table.shape}')
            continue
        for s, row in enumerate(table):
            label = f'chi^{i + 1}(.|{model.states[s]})'
            if np.any(row < 0):
                violations.append(f'{label} has negative entries')
            if abs(float(row.sum()) - 1.0) > PROBABILITY_TOLERANCE:
                violations.append(f'{label} sums to {float(row.sum()):.17g}, not 1')
            outside = [model.states[r] for r in np.flatnonzero(row) if r not in model.perturbation_sets[i][s]]
            if outside:
                violations.append(f'{label} puts mass outside P^{i + 1}_{{{model.states[s]}}}: {outside}')
    return violations
