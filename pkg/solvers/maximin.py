"""
Robust agent policy search: maximise F(pi) = min_chi J(pi, chi).

Two solvers share the exact gradient of J: simultaneous projected gradient
descent ascent on (pi, chi), and projected supergradient ascent on F using
an exactly solved optimal adversary at every iterate. Deterministic policy
enumeration serves as an oracle.
"""
import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from games import conf
from games.exceptions import SizeGuardError
from games.samg import AdversaryPolicy, AgentPolicy

from .adversary import optimal_adversary
from .evaluation import _tables, evaluate, expected_value, policy_chain, solve_values
from .utils import chunked, effective_distributions, marginal_payoff, q_values, thread_map

logger = logging.getLogger(__name__)

INNER_METHOD = 'policy_iteration'


def objective(model, pi, chi):
    """J(pi, chi) = sum_s0 Pr(s0) V_{pi,chi}(s0)."""
    return expected_value(model, evaluate(model, pi, chi))


def worst_case_objective(model, pi, tol=None, method='value_iteration'):
    """F(pi) from the worst-case values of the optimal adversary."""
    return expected_value(model, optimal_adversary(model, pi, tol, method=method).values)


@dataclass(frozen=True)
class ObjectiveGradients:
    """d_pi[i][rho, a] = dJ/dpi^i(a | rho); d_chi[i][s, rho] = dJ/dchi^i(rho | s)."""
    d_pi: tuple
    d_chi: tuple
    value: float


def objective_gradients(model, pi, chi):
    """
    Exact partial derivatives of J with the policy tables treated as free
    variables. With d the discounted occupancy and Q = r + gamma P V,
    dJ/dw_i(s, a) = d(s) * G_i(s, a) where G_i marginalises Q over the other
    agents, and w_i = chi_i @ pi_i carries it to both tables.
    """
    pi_tables = [np.asarray(t, dtype=float) for t in _tables(pi)]
    chi_tables = [np.asarray(t, dtype=float) for t in _tables(chi)]
    kernel, reward = policy_chain(model, pi_tables, chi_tables)
    values = solve_values(model, kernel, reward)
    mass = np.linalg.solve((np.eye(model.n_states) - model.gamma * kernel).T, model.initial_dist)
    q = q_values(model, values)
    distributions = effective_distributions(pi_tables, chi_tables)

    d_pi, d_chi = [], []
    for i in range(model.n_agents):
        payoff = marginal_payoff(q, distributions, i)
        d_pi.append((chi_tables[i] * mass[:, None]).T @ payoff)
        d_chi.append(mass[:, None] * (payoff @ pi_tables[i].T))
    return ObjectiveGradients(tuple(d_pi), tuple(d_chi), float(model.initial_dist @ values))


def project_simplex(vector):
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(vector, dtype=float)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    index = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - cumulative / index > 0)[0][-1]
    theta = cumulative[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_rows(table):
    return np.array([project_simplex(row) for row in np.asarray(table, dtype=float)])


def project_adversary(model, agent, table):
    """Project each row onto the simplex over P^i_s; coordinates outside stay zero."""
    table = np.asarray(table, dtype=float)
    projected = np.zeros_like(table)
    for s, members in enumerate(model.perturbation_sets[agent]):
        members = list(members)
        projected[s, members] = project_simplex(table[s, members])
    return projected


@dataclass
class SolveReport:
    solver: str
    iterations: int
    objective_trace: list
    final_objective: float
    agent_policy: AgentPolicy
    adversary_policy: AdversaryPolicy
    residuals: list = field(default_factory=list)
    seed: int = 0
    wall_time: float = 0.0
    best_iteration: int = 0
    restart: int = 0


def gda_solve(model, pi0, chi0, eta_pi=0.05, eta_chi=0.05, iters=10_000, seed=0, tol=None):
    """
    Simultaneous projected gradient ascent on pi and descent on chi. The
    trace holds J at the initial point and after every update; the report's
    final objective is F of the last agent policy.
    """
    if eta_pi <= 0 or eta_chi < 0:
        raise ValueError('step sizes must be positive')
    started = time.monotonic()
    pi = [np.array(t, dtype=float) for t in _tables(pi0)]
    chi = [np.array(t, dtype=float) for t in _tables(chi0)]
    trace, residuals = [], []

    for _ in range(iters):
        grads = objective_gradients(model, pi, chi)
        trace.append(grads.value)
        new_pi = [project_rows(p + eta_pi * g) for p, g in zip(pi, grads.d_pi)]
        new_chi = [project_adversary(model, i, c - eta_chi * g) for i, (c, g) in enumerate(zip(chi, grads.d_chi))]
        residuals.append(max(
            max(float(np.max(np.abs(a - b))) for a, b in zip(new_pi, pi)),
            max(float(np.max(np.abs(a - b))) for a, b in zip(new_chi, chi)),
        ))
        pi, chi = new_pi, new_chi
    trace.append(objective(model, pi, chi))

    agent_policy = AgentPolicy(tuple(pi))
    final = worst_case_objective(model, agent_policy, tol, method=INNER_METHOD)
    elapsed = time.monotonic() - started
    logger.info(f'GDA finished {iters} iterations in {elapsed:.2f}s, F={final:.6f}')
    return SolveReport(
        solver='gda',
        iterations=iters,
        objective_trace=trace,
        final_objective=final,
        agent_policy=agent_policy,
        adversary_policy=AdversaryPolicy(tuple(chi)),
        residuals=residuals,
        seed=seed,
        wall_time=elapsed,
        best_iteration=iters,
    )


STEP_RULES = ('normalized', 'raw')


def tangent_direction(d_pi):
    """
    Supergradient rows with their mean removed, scaled to unit norm over all
    agents. A direction at rounding level relative to the gradient is zero.
    """
    tangent = [g - g.mean(axis=1, keepdims=True) for g in d_pi]
    norm = float(np.sqrt(sum(float(np.sum(t * t)) for t in tangent)))
    scale = max(float(np.max(np.abs(g))) for g in d_pi)
    if norm <= 1e-10 * (1.0 + scale):
        return [np.zeros_like(t) for t in tangent]
    return [t / norm for t in tangent]


def subgradient_solve(model, pi0, eta=0.05, iters=10_000, tol=None, seed=0, method=INNER_METHOD,
                      step_rule='normalized', momentum=0.9):
    """
    Projected supergradient ascent on F: at each iterate solve for an optimal
    adversary, then step along grad_pi J(pi, chi*). The trace holds F at every
    iterate; the best iterate is returned.

    With step_rule="normalized" the k-th step has length eta / sqrt(k + 1)
    along an exponential average (weight `momentum`) of unit-norm tangent
    supergradients, so eta is a distance on the simplex whatever the reward
    scale and the zigzag across kinks of F averages out. step_rule="raw"
    takes the literal constant step pi + eta * grad.
    """
    if eta <= 0:
        raise ValueError('step size must be positive')
    if step_rule not in STEP_RULES:
        raise ValueError(f'unknown step rule "{step_rule}"; expected one of {STEP_RULES}')
    if not 0 <= momentum < 1:
        raise ValueError('momentum must lie in [0, 1)')
    started = time.monotonic()
    pi = [np.array(t, dtype=float) for t in _tables(pi0)]
    velocity = [np.zeros_like(p) for p in pi]
    trace, residuals = [], []
    best = None
    warm = None

    for k in range(iters + 1):
        worst = optimal_adversary(model, pi, tol, method=method, initial=warm)
        warm = worst.values.values
        grads = objective_gradients(model, pi, worst.adversary)
        trace.append(grads.value)
        if best is None or grads.value > best[0]:
            best = (grads.value, k, AgentPolicy(tuple(pi)), worst.adversary)
        if k == iters:
            break
        if step_rule == 'raw':
            steps = [eta * g for g in grads.d_pi]
        else:
            velocity = [momentum * v + (1.0 - momentum) * u
                        for v, u in zip(velocity, tangent_direction(grads.d_pi))]
            steps = [eta / np.sqrt(k + 1.0) * v for v in velocity]
        new_pi = [project_rows(p + step) for p, step in zip(pi, steps)]
        residuals.append(max(float(np.max(np.abs(a - b))) for a, b in zip(new_pi, pi)))
        pi = new_pi

    elapsed = time.monotonic() - started
    logger.info(f'Subgradient ascent finished {iters} iterations in {elapsed:.2f}s, best F={best[0]:.6f}')
    return SolveReport(
        solver='subgradient',
        iterations=iters,
        objective_trace=trace,
        final_objective=best[0],
        agent_policy=best[2],
        adversary_policy=best[3],
        residuals=residuals,
        seed=seed,
        wall_time=elapsed,
        best_iteration=best[1],
    )


def random_policy(model, rng):
    return AgentPolicy(tuple(rng.dirichlet(np.ones(k), size=model.n_states) for k in model.action_counts))


def solve_with_restarts(solver, model, pi0, restarts=1, seed=0, **kwargs):
    """
    Run `solver` from pi0 and from restarts - 1 seeded random policies
    concurrently; the report with the highest final objective wins (ties go
    to the lowest restart index).
    """
    starts = [pi0] + [random_policy(model, np.random.default_rng([seed, r])) for r in range(1, restarts)]

    def run(item):
        index, start = item
        report = solver(model, start, seed=seed, **kwargs)
        report.restart = index
        return report

    reports = thread_map(run, list(enumerate(starts)))
    return max(reports, key=lambda r: (r.final_objective, -r.restart))


@dataclass(frozen=True)
class PolicyEnumeration:
    best_value: float
    witness: AgentPolicy
    values: tuple
    count: int


def deterministic_policy_choices(model):
    """Deterministic joint policies as choices[i][rho], lexicographic in (agent, perceived state)."""
    slots = [range(k) for k in model.action_counts for _ in range(model.n_states)]
    total = int(np.prod([len(r) for r in slots]))
    limit = conf.enumeration_guard()
    if total > limit:
        raise SizeGuardError('deterministic agent policies', total, limit)
    for flat in itertools.product(*slots):
        yield [flat[i * model.n_states:(i + 1) * model.n_states] for i in range(model.n_agents)]


def enumerate_deterministic_policies(model, tol=None):
    """F for every deterministic policy; the first policy within 1e-9 of the best is the witness."""
    choices = list(deterministic_policy_choices(model))

    def score(chunk):
        return [
            worst_case_objective(model, AgentPolicy.deterministic(model, c), tol, method=INNER_METHOD)
            for c in chunk
        ]

    values = [v for part in thread_map(score, chunked(choices, 64)) for v in part]
    best_value = max(values)
    index = next(k for k, v in enumerate(values) if v >= best_value - 1e-9 * (1.0 + abs(best_value)))
    logger.info(f'Enumerated {len(choices)} deterministic policies, best F={best_value:.6f}')
    return PolicyEnumeration(
        best_value=best_value,
        witness=AgentPolicy.deterministic(model, choices[index]),
        values=tuple(values),
        count=len(choices),
    )


def classify_values(values, classes, tolerance=1e-4):
    """Index of the first reference value vector within `tolerance`, or None."""
    for k, reference in enumerate(classes):
        if np.all(np.abs(np.asarray(values) - np.asarray(reference)) <= tolerance):
            return k
    return None

