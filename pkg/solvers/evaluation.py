"""
Exact and Monte-Carlo evaluation of a fixed agent/adversary policy pair.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from games import conf
from games.exceptions import DimensionMismatchError
from games.samg import AdversaryPolicy, AgentPolicy, OccupancyTable, QTable, SamgModel, ValueTable

from .utils import chunked, check_joint_guard, effective_distributions, induced_chain, q_values, thread_map

logger = logging.getLogger(__name__)

EVALUATION_TOLERANCE = 1e-10


def _tables(policy):
    return policy.tables if isinstance(policy, (AgentPolicy, AdversaryPolicy)) else tuple(policy)


def policy_chain(model, pi, chi):
    """Induced (S, S) kernel and (S,) expected reward; policies may be unconstrained tables."""
    pi_tables, chi_tables = _tables(pi), _tables(chi)
    AgentPolicy(pi_tables).check_shape(model)
    AdversaryPolicy(chi_tables).check_shape(model)
    return induced_chain(model, effective_distributions(pi_tables, chi_tables))


def solve_values(model, kernel, reward):
    """Solve (I - gamma P) V = r directly, or by capped fixed-point iteration on large models."""
    n = model.n_states
    if n <= conf.direct_solve_limit():
        return np.linalg.solve(np.eye(n) - model.gamma * kernel, reward)

    bound = max(float(np.max(np.abs(reward))), 1e-300)
    cap = math.ceil(math.log(EVALUATION_TOLERANCE * (1 - model.gamma) / bound) / math.log(model.gamma))
    values = np.zeros(n)
    for _ in range(max(cap, 1)):
        updated = reward + model.gamma * kernel @ values
        done = np.max(np.abs(updated - values)) <= EVALUATION_TOLERANCE
        values = updated
        if done:
            break
    return values


def evaluate(model, pi, chi):
    """V_{pi,chi}: the unique solution of the policy Bellman equation."""
    check_joint_guard(model)
    kernel, reward = policy_chain(model, pi, chi)
    return ValueTable(model.states, solve_values(model, kernel, reward))


def expected_value(model, values):
    values = values.values if isinstance(values, ValueTable) else np.asarray(values, dtype=float)
    if values.shape != (model.n_states,):
        raise DimensionMismatchError('value table does not match the model states')
    return float(model.initial_dist @ values)


def occupancy(model, pi, chi):
    """d(s) = sum_{s0} Pr(s0) sum_t gamma^t Pr(s_t = s), from the transposed flow equations."""
    check_joint_guard(model)
    kernel, _ = policy_chain(model, pi, chi)
    mass = np.linalg.solve((np.eye(model.n_states) - model.gamma * kernel).T, model.initial_dist)
    return OccupancyTable(model.states, mass)


def occupancy_weighted_return(model, pi, chi):
    """J(pi, chi) expanded as sum_s d(s) * expected stage reward at s."""
    _, reward = policy_chain(model, pi, chi)
    return float(occupancy(model, pi, chi).values @ reward)


def q_from_v(model, values):
    values = values.values if isinstance(values, ValueTable) else np.asarray(values, dtype=float)
    return QTable(model.states, model.actions, q_values(model, values))


def relabel_markov_game(model, mapping):
    """
    The Markov game seen by the agents when every adversary applies the same
    deterministic bijection `mapping` (state index -> shown state index).

    State u of the relabeled game stands for the true state mapping^-1(u), so
    V_{pi,chi}(s) equals the relabeled game's value at mapping[s] under pi
    with no perturbation.
    """
    mapping = np.asarray(mapping, dtype=int)
    if sorted(mapping.tolist()) != list(range(model.n_states)):
        raise ValueError('mapping must be a bijection on the states')
    inverse = np.argsort(mapping)
    transition = model.transition[inverse][..., inverse]
    return SamgModel(
        states=model.states,
        actions=model.actions,
        transition=transition,
        reward=model.reward[inverse],
        perturbation_sets=tuple(tuple((u,) for u in range(model.n_states)) for _ in range(model.n_agents)),
        gamma=model.gamma,
        initial_dist=model.initial_dist[inverse],
    )


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    std_error: float
    truncation_bound: float
    episodes: int
    horizon: int

    def __iter__(self):
        return iter((self.mean, self.std_error))


def _cumulative(rows):
    """Cumulative rows plus, per row, the index of the last positive entry."""
    rows = np.asarray(rows, dtype=float)
    positive = rows > 0
    last = rows.shape[-1] - 1 - np.argmax(positive[..., ::-1], axis=-1)
    return np.cumsum(rows, axis=-1), last


def _sample(cumulative, last, uniforms):
    index = np.sum(cumulative <= uniforms[:, None], axis=-1)
    return np.minimum(index, last)


def episode_stream(seed, episode):
    """Counter-based generator: the same (seed, episode) always yields the same draws."""
    key = (int(seed) % (1 << 64)) << 64 | int(episode)
    return np.random.Generator(np.random.Philox(key=key))


class _Sampler:

    def __init__(self, model, pi, chi):
        self.model = model
        self.n = model.n_agents
        self.init = _cumulative(model.initial_dist[None, :])
        self.chi = [_cumulative(t) for t in _tables(chi)]
        self.pi = [_cumulative(t) for t in _tables(pi)]
        self.transition = _cumulative(model.flat_transition)
        self.width = 2 * self.n + 1

    def blocks(self, streams, horizon, chunk):
        """
        Per-step uniforms as (batch, steps, width) arrays of at most `chunk`
        steps each. Every stream is read in order, so an episode sees the
        same draws whatever the chunk size.
        """
        for first in range(0, horizon, chunk):
            steps = min(chunk, horizon - first)
            yield np.stack([g.random(steps * self.width) for g in streams]).reshape(len(streams), steps, self.width)

    def returns(self, seed, episodes, horizon, chunk=None):
        m = self.model
        chunk = chunk or conf.setting('SAMG_SIM_STEP_CHUNK', 64)
        streams = [episode_stream(seed, e) for e in episodes]
        batch = len(streams)
        zeros = np.zeros(batch, dtype=int)
        cum, last = self.init
        state = _sample(cum[zeros], last[zeros], np.array([g.random() for g in streams]))
        total = np.zeros(batch)
        discount = 1.0
        for steps in self.blocks(streams, horizon, chunk):
            for block in steps.transpose(1, 0, 2):
                state, reward = self.step(state, block)
                total += discount * reward
                discount *= m.gamma
        return total

    def step(self, state, block):
        m = self.model
        actions = []
        for i in range(self.n):
            cum, last = self.chi[i]
            perceived = _sample(cum[state], last[state], block[:, i])
            cum, last = self.pi[i]
            actions.append(_sample(cum[perceived], last[perceived], block[:, self.n + i]))
        joint = np.ravel_multi_index(actions, m.action_counts)
        cum, last = self.transition
        following = _sample(cum[state, joint], last[state, joint], block[:, 2 * self.n])
        return following, m.flat_reward[state, joint]


def simulate_episode(model, pi, chi, horizon, seed, episode):
    """Discounted return of a single episode, reproducible in isolation."""
    return float(_Sampler(model, pi, chi).returns(seed, [episode], horizon)[0])


def simulate(model, pi, chi, episodes, horizon, seed, batch_size=None):
    """
    Monte-Carlo estimate of J(pi, chi) truncated at `horizon`.

    Episodes are simulated in vectorised batches spread over worker threads;
    each episode draws from its own stream, so results do not depend on
    batching or scheduling.
    """
    if horizon < 1 or episodes < 1:
        raise ValueError('horizon and episodes must be at least 1')
    AgentPolicy(_tables(pi)).check_shape(model)
    AdversaryPolicy(_tables(chi)).check_shape(model)
    sampler = _Sampler(model, pi, chi)
    size = batch_size or conf.setting('SAMG_SIM_BATCH', 512)
    batches = list(chunked(range(episodes), size))
    logger.info(f'Simulating {episodes} episodes of horizon {horizon} in {len(batches)} batches')
    returns = np.concatenate(thread_map(lambda b: sampler.returns(seed, b, horizon), batches))

    std_error = float(returns.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return SimulationResult(
        mean=float(returns.mean()),
        std_error=std_error,
        truncation_bound=model.gamma ** horizon * model.value_bound,
        episodes=episodes,
        horizon=horizon,
    )
