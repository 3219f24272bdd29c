"""
Stage games, stage exploitability, robust Nash verification and grid scans.

The stage game at true state s has 2n players. Agent i picks a tuple b with
one action per admissible perceived state in P^i_s; adversary i picks a
perceived state from P^i_s. Agent i's utility is its expected one-step
reward plus discounted continuation under its robust value table v^{i*};
adversary i receives the negative of agent i's term.

Players are indexed 0..n-1 for agents and n..2n-1 for adversaries.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from games import conf
from games.exceptions import SizeGuardError
from games.samg import AdversaryPolicy, AgentPolicy, ValueTable

from .evaluation import _tables
from .robust_value import marginal_payoff, robust_fixed_point, robust_fixed_point_from_distributions
from .utils import effective_distributions, lowest_argmax, q_values, stage_marginal_payoff

logger = logging.getLogger(__name__)

DEFAULT_VERIFY_EPS = 1e-6
DEFAULT_SCAN_EPS = 1e-3


@dataclass(frozen=True, eq=False)
class StageGame:
    """
    agent_actions[i] lists agent i's stage actions as index tuples aligned
    with adversary_actions[i] (the members of P^i_s). q_tensors[i] holds
    r(s, .) + gamma * E v^{i*}(s') over joint actions.
    """
    model: object
    state: int
    agent_actions: tuple
    adversary_actions: tuple
    robust_values: tuple
    q_tensors: tuple

    @property
    def n_agents(self):
        return self.model.n_agents

    @property
    def n_players(self):
        return 2 * self.model.n_agents

    def action_count(self, player):
        n = self.n_agents
        return len(self.agent_actions[player]) if player < n else len(self.adversary_actions[player - n])

    def action_label(self, player, index):
        n, m = self.n_agents, self.model
        if player < n:
            return '(' + ','.join(m.actions[player][a] for a in self.agent_actions[player][index]) + ')'
        return m.states[self.adversary_actions[player - n][index]]


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    strategies: tuple

    def __post_init__(self):
        object.__setattr__(self, 'strategies', tuple(np.asarray(s, dtype=float) for s in self.strategies))

    def __getitem__(self, player):
        return self.strategies[player]

    def with_strategy(self, player, strategy):
        strategies = list(self.strategies)
        strategies[player] = np.asarray(strategy, dtype=float)
        return StrategyProfile(tuple(strategies))


def _check_stage_guard(model, state):
    limit = conf.stage_action_guard()
    for i in range(model.n_agents):
        size = model.action_counts[i] ** len(model.perturbation_sets[i][state])
        if size > limit:
            raise SizeGuardError(f'stage actions of agent {i + 1} at state {model.states[state]}', size, limit)


def robust_value_tables(model, pi, chi, tol=None, method='value_iteration'):
    return tuple(robust_fixed_point(model, i, pi, chi, tol, method=method).values for i in range(model.n_agents))


def build_stage_game(model, state, profile_context, tol=None, robust_values=None, method='value_iteration'):
    """
    Stage game at `state`. profile_context is the (pi, chi) pair whose other
    agents' and adversaries' policies define each agent's robust values;
    precomputed robust_values may be supplied instead.
    """
    _check_stage_guard(model, state)
    pi, chi = profile_context
    if robust_values is None:
        robust_values = robust_value_tables(model, pi, chi, tol, method)
    agent_actions = tuple(
        tuple(itertools.product(range(model.action_counts[i]), repeat=len(model.perturbation_sets[i][state])))
        for i in range(model.n_agents)
    )
    q_tensors = tuple(q_values(model, v.values)[state] for v in robust_values)
    return StageGame(
        model=model,
        state=state,
        agent_actions=agent_actions,
        adversary_actions=tuple(model.perturbation_sets[i][state] for i in range(model.n_agents)),
        robust_values=tuple(robust_values),
        q_tensors=q_tensors,
    )


def behavioral_rows(game, agent, strategy):
    """pi^i(a | rho_k) = sum over stage actions b with b_k = a of sigma(b); shape (|P^i_s|, |A^i|)."""
    actions = np.asarray(game.agent_actions[agent], dtype=int)
    n_actions = game.model.action_counts[agent]
    strategy = np.asarray(strategy, dtype=float)
    return np.stack([np.bincount(actions[:, k], weights=strategy, minlength=n_actions)
                     for k in range(actions.shape[1])])


def effective_rows(game, profile):
    """Each agent's action distribution at the stage state after its adversary's perturbation."""
    n = game.n_agents
    return [profile[n + i] @ behavioral_rows(game, i, profile[i]) for i in range(n)]


def agent_term(game, agent, profile):
    """Agent `agent`'s expected stage payoff f^i under the profile."""
    rows = effective_rows(game, profile)
    return float(stage_marginal_payoff(game.q_tensors[agent], rows, agent) @ rows[agent])


def utility(game, player, profile):
    n = game.n_agents
    term = agent_term(game, player % n, profile)
    return term if player < n else -term


def pure_utilities(game, player, profile):
    """Utility of each of the player's pure stage actions, others held at the profile."""
    n = game.n_agents
    agent = player % n
    rows = effective_rows(game, profile)
    payoff = stage_marginal_payoff(game.q_tensors[agent], rows, agent)
    if player < n:
        actions = np.asarray(game.agent_actions[agent], dtype=int)
        return payoff[actions] @ profile[n + agent]
    return -(behavioral_rows(game, agent, profile[agent]) @ payoff)


def stage_best_response(game, player, profile):
    """(value, lowest-index pure best response) for `player`; its own strategy is ignored."""
    values = pure_utilities(game, player, profile)
    best = int(lowest_argmax(values))
    return float(values.max()), best


def stage_exploitability(game, profile):
    return [stage_best_response(game, p, profile)[0] - utility(game, p, profile) for p in range(game.n_players)]


def embed_profile(game, pi, chi):
    """Agents' product mixed strategies over action tuples, and adversaries' rows at the stage state."""
    pi_tables, chi_tables = _tables(pi), _tables(chi)
    strategies = []
    for i in range(game.n_agents):
        members = game.adversary_actions[i]
        actions = np.asarray(game.agent_actions[i], dtype=int)
        probs = np.ones(len(actions))
        for k, rho in enumerate(members):
            probs = probs * np.asarray(pi_tables[i])[rho, actions[:, k]]
        strategies.append(probs)
    for i in range(game.n_agents):
        strategies.append(np.asarray(chi_tables[i])[game.state, list(game.adversary_actions[i])])
    return StrategyProfile(tuple(strategies))


@dataclass(frozen=True)
class StateVerdict:
    state: str
    gaps: tuple
    max_gap: float
    satisfied: bool


@dataclass(frozen=True)
class NashVerdict:
    """Stage-wise equilibrium at every state is sufficient, not necessary, for a robust total Nash equilibrium."""
    states: tuple
    epsilon: float
    satisfied: bool

    @property
    def max_gap(self):
        return max(v.max_gap for v in self.states)

    def failing_states(self):
        return [v.state for v in self.states if not v.satisfied]


def robust_nash_verify(model, pi, chi, eps=DEFAULT_VERIFY_EPS, tol=None, method='value_iteration'):
    robust_values = robust_value_tables(model, pi, chi, tol, method)
    verdicts = []
    for s in range(model.n_states):
        game = build_stage_game(model, s, (pi, chi), robust_values=robust_values)
        gaps = tuple(float(g) for g in stage_exploitability(game, embed_profile(game, pi, chi)))
        worst = max(gaps)
        verdicts.append(StateVerdict(model.states[s], gaps, worst, worst <= eps))
    satisfied = all(v.satisfied for v in verdicts)
    logger.info(f'Stage-wise verification: {"SATISFIED" if satisfied else "FAILED"} at eps={eps}')
    return NashVerdict(states=tuple(verdicts), epsilon=eps, satisfied=satisfied)


def simplex_grid(dimension, resolution):
    """Points of the simplex whose coordinates are multiples of 1 / (resolution - 1), lexicographic."""
    if resolution < 2:
        raise ValueError('grid resolution must be at least 2')
    steps = resolution - 1
    points = []
    for head in itertools.product(range(steps + 1), repeat=dimension - 1):
        rest = steps - sum(head)
        if rest >= 0:
            points.append((*head, rest))
    return np.array(points, dtype=float) / steps


@dataclass(frozen=True)
class ScanResult:
    min_gap: float
    agent_policy: AgentPolicy
    adversary_policy: AdversaryPolicy
    state_minima: ValueTable
    resolution: int
    profiles: int
    epsilon: float

    @property
    def label(self):
        return f'evidence at resolution {self.resolution}'

    @property
    def equilibrium_found(self):
        return self.min_gap <= self.epsilon


def _agent_options(model, agent, resolution):
    """Policy tables (P, S, |A|) over the grid and adversary tables (X, S, S)."""
    points = simplex_grid(model.action_counts[agent], resolution)
    policies = np.array([points[list(choice)]
                         for choice in itertools.product(range(len(points)), repeat=model.n_states)])
    per_state = []
    for s, members in enumerate(model.perturbation_sets[agent]):
        rows = []
        for rho in members:
            row = np.zeros(model.n_states)
            row[rho] = 1.0
            rows.append(row)
        if len(members) > 1:
            row = np.zeros(model.n_states)
            row[list(members)] = 1.0 / len(members)
            rows.append(row)
        per_state.append(rows)
    adversaries = np.array([np.stack(choice) for choice in itertools.product(*per_state)])
    return policies, adversaries


def nonexistence_scan(model, grid_resolution, eps=DEFAULT_SCAN_EPS, tol=None):
    """
    Minimum over a grid of profiles of the largest stage exploitability over
    all states, with the lexicographically first minimising profile.

    Agent i's options pair a grid policy with an adversary that at each state
    either shows one admissible state or mixes uniformly over P^i_s. Robust
    values are cached per configuration of the other agents.
    """
    tol = conf.default_tol() if tol is None else tol
    n, S = model.n_agents, model.n_states
    options = [_agent_options(model, i, grid_resolution) for i in range(n)]
    counts = [len(p) * len(x) for p, x in options]
    total = int(np.prod(counts))
    limit = conf.joint_guard()
    if total > limit:
        raise SizeGuardError('grid profiles', total, limit)
    logger.info(f'Scanning {total} grid profiles at resolution {grid_resolution}')

    # w[i][k] = effective (S, |A^i|) distribution for agent i's option k (policy-major order)
    effective = []
    for policies, adversaries in options:
        effective.append(np.einsum('xsr,pra->pxsa', adversaries, policies).reshape(-1, S, policies.shape[2]))

    per_state = [np.zeros(counts) for _ in range(S)]
    for i in range(n):
        policies, adversaries = options[i]
        others = [j for j in range(n) if j != i]
        other_counts = [counts[j] for j in others]
        combos = list(itertools.product(*(range(c) for c in other_counts)))
        payoffs = np.empty((len(combos), S, model.action_counts[i]))
        for row, combo in enumerate(combos):
            distributions = [None] * n
            for j, k in zip(others, combo):
                distributions[j] = effective[j][k]
            values, _ = robust_fixed_point_from_distributions(
                model, i, distributions, tol, method='policy_iteration'
            )
            payoffs[row] = marginal_payoff(q_values(model, values), distributions, i)

        best = payoffs.max(axis=2)
        n_policies = len(policies)
        policy_of = np.repeat(np.arange(n_policies), len(adversaries))
        for s in range(S):
            members = list(model.perturbation_sets[i][s])
            # f[k, l] = agent i's stage payoff for own option k against others' combination l
            f = effective[i][:, s, :] @ payoffs[:, s, :].T
            shown = np.einsum('pra,la->plr', policies[:, members, :], payoffs[:, s, :]).min(axis=2)
            gap = np.maximum(best[None, :, s] - f, f - shown[policy_of])
            gap = gap.reshape(counts[i], *other_counts)
            per_state[s] = np.maximum(per_state[s], np.moveaxis(gap, 0, i))

    overall = per_state[0]
    for s in range(1, S):
        overall = np.maximum(overall, per_state[s])
    flat = int(np.argmin(overall))
    index = np.unravel_index(flat, counts)

    pi_tables, chi_tables = [], []
    for i, k in enumerate(index):
        policies, adversaries = options[i]
        p, x = divmod(int(k), len(adversaries))
        pi_tables.append(policies[p])
        chi_tables.append(adversaries[x])
    return ScanResult(
        min_gap=float(overall.flat[flat]),
        agent_policy=AgentPolicy(tuple(pi_tables)),
        adversary_policy=AdversaryPolicy(tuple(chi_tables)),
        state_minima=ValueTable(model.states, [float(g.min()) for g in per_state]),
        resolution=grid_resolution,
        profiles=total,
        epsilon=eps,
    )
