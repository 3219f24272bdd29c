"""
Core value types: the finite state-adversarial Markov game, agent and
adversary policies, and per-state result tables.

All arrays are copied on construction and marked read-only, so instances can
be shared freely between threads.
"""
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .exceptions import DimensionMismatchError

PROBABILITY_TOLERANCE = 1e-12


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def normalize_rows(array):
    """
    Divide each last-axis row by its sum when the sum is off by more than
    floating-point noise. Rows already summing to 1 up to rounding are left
    bit-for-bit untouched so serialized probabilities reparse exactly.
    """
    array = np.array(array, dtype=float, copy=True)
    sums = array.sum(axis=-1, keepdims=True)
    noise = 4 * array.shape[-1] * np.finfo(float).eps
    drift = np.abs(sums - 1.0) > noise
    if np.any(drift):
        array = np.where(drift & (sums > 0), array / np.where(sums > 0, sums, 1.0), array)
    return array


@dataclass(frozen=True, eq=False)
class SamgModel:
    """
    A finite game with shared reward where adversary i picks the state that
    agent i perceives from the admissible set perturbation_sets[i][s].

    transition has shape (S, A1, ..., An, S) and reward (S, A1, ..., An).
    States, actions and perturbation members are referred to by index; the
    identifier tuples give their names in declaration order.
    """
    states: tuple
    actions: tuple
    transition: np.ndarray
    reward: np.ndarray
    perturbation_sets: tuple
    gamma: float
    initial_dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(str(s) for s in self.states))
        object.__setattr__(self, 'actions', tuple(tuple(str(a) for a in acts) for acts in self.actions))
        object.__setattr__(self, 'transition', _frozen(self.transition))
        object.__setattr__(self, 'reward', _frozen(self.reward))
        object.__setattr__(self, 'initial_dist', _frozen(self.initial_dist))
        object.__setattr__(self, 'gamma', float(self.gamma))
        object.__setattr__(
            self,
            'perturbation_sets',
            tuple(tuple(tuple(sorted(int(r) for r in members)) for members in per_state)
                  for per_state in self.perturbation_sets),
        )
        shape = (self.n_states, *self.action_counts)
        if self.reward.shape != shape:
            raise DimensionMismatchError(f'reward has shape {self.reward.shape}, expected {shape}')
        if self.transition.shape != (*shape, self.n_states):
            raise DimensionMismatchError(
                f'transition has shape {self.transition.shape}, expected {(*shape, self.n_states)}'
            )
        if self.initial_dist.shape != (self.n_states,):
            raise DimensionMismatchError('initial_dist must have one entry per state')
        if len(self.perturbation_sets) != self.n_agents or any(
            len(per_state) != self.n_states for per_state in self.perturbation_sets
        ):
            raise DimensionMismatchError('perturbation_sets must be indexed [agent][state]')

    def __eq__(self, other):
        if not isinstance(other, SamgModel):
            return NotImplemented
        return (
            self.states == other.states
            and self.actions == other.actions
            and self.perturbation_sets == other.perturbation_sets
            and self.gamma == other.gamma
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.initial_dist, other.initial_dist)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f'SamgModel(agents={self.n_agents}, states={list(self.states)}, '
            f'actions={[list(a) for a in self.actions]}, gamma={self.gamma})'
        )

    @property
    def n_agents(self):
        return len(self.actions)

    @property
    def n_states(self):
        return len(self.states)

    @property
    def action_counts(self):
        return tuple(len(a) for a in self.actions)

    @property
    def n_joint_actions(self):
        return int(np.prod(self.action_counts))

    @cached_property
    def r_max(self):
        return float(np.max(np.abs(self.reward))) if self.reward.size else 0.0

    @property
    def value_bound(self):
        return self.r_max / (1.0 - self.gamma)

    @cached_property
    def flat_transition(self):
        """Transition reshaped to (S, joint actions, S) in row-major joint order."""
        return self.transition.reshape(self.n_states, self.n_joint_actions, self.n_states)

    @cached_property
    def flat_reward(self):
        return self.reward.reshape(self.n_states, self.n_joint_actions)

    def state_index(self, name):
        try:
            return self.states.index(name)
        except ValueError:
            raise KeyError(f'unknown state "{name}"') from None

    def action_index(self, agent, name):
        try:
            return self.actions[agent].index(name)
        except ValueError:
            raise KeyError(f'unknown action "{name}" for agent {agent + 1}') from None

    def perturbation_count(self, state):
        """Number of joint perturbations at `state`."""
        return int(np.prod([len(self.perturbation_sets[i][state]) for i in range(self.n_agents)]))

    def with_initial(self, initial):
        """Copy with a new initial distribution; a state name gives a point mass."""
        if isinstance(initial, str):
            dist = np.zeros(self.n_states)
            dist[self.state_index(initial)] = 1.0
        else:
            dist = np.asarray(initial, dtype=float)
        return replace(self, initial_dist=dist)

    def with_perturbation_sets(self, perturbation_sets):
        return replace(self, perturbation_sets=perturbation_sets)

    def with_degenerate_perturbations(self):
        """Copy where every adversary can only show the true state."""
        sets = tuple(tuple((s,) for s in range(self.n_states)) for _ in range(self.n_agents))
        return replace(self, perturbation_sets=sets)

    def with_reward(self, reward):
        return replace(self, reward=reward)


def _check_policy_shape(tables, shapes, what):
    if len(tables) != len(shapes):
        raise DimensionMismatchError(f'{what} has {len(tables)} agents, model has {len(shapes)}')
    for i, (table, shape) in enumerate(zip(tables, shapes)):
        if table.shape != shape:
            raise DimensionMismatchError(
                f'{what} table for agent {i + 1} has shape {table.shape}, expected {shape}'
            )


@dataclass(frozen=True, eq=False)
class AgentPolicy:
    """
    tables[i][rho, a] = probability that agent i plays a when it perceives rho.

    The constructor only freezes the arrays; `from_tables` checks that rows
    are distributions. Solvers also accept unconstrained tables, which the
    gradient code relies on.
    """
    tables: tuple

    def __post_init__(self):
        object.__setattr__(self, 'tables', tuple(_frozen(t) for t in self.tables))

    def __eq__(self, other):
        if not isinstance(other, AgentPolicy):
            return NotImplemented
        return len(self.tables) == len(other.tables) and all(
            np.array_equal(a, b) for a, b in zip(self.tables, other.tables)
        )

    __hash__ = None

    def __getitem__(self, agent):
        return self.tables[agent]

    @property
    def n_agents(self):
        return len(self.tables)

    @classmethod
    def from_tables(cls, model, tables):
        from .validation import policy_violations
        from .exceptions import ModelValidationError

        policy = cls(tuple(normalize_rows(t) if _near_distribution(t) else np.asarray(t, dtype=float)
                           for t in tables))
        violations = policy_violations(model, policy)
        if violations:
            raise ModelValidationError(violations)
        return policy

    @classmethod
    def uniform(cls, model):
        return cls(tuple(np.full((model.n_states, k), 1.0 / k) for k in model.action_counts))

    @classmethod
    def deterministic(cls, model, choices):
        """choices[i][rho] is the action index agent i plays at perceived state rho."""
        tables = []
        for i, k in enumerate(model.action_counts):
            table = np.zeros((model.n_states, k))
            table[np.arange(model.n_states), np.asarray(choices[i], dtype=int)] = 1.0
            tables.append(table)
        return cls(tuple(tables))

    def check_shape(self, model):
        _check_policy_shape(self.tables, [(model.n_states, k) for k in model.action_counts], 'agent policy')
        return self

    def with_agent(self, agent, table):
        tables = list(self.tables)
        tables[agent] = table
        return AgentPolicy(tuple(tables))

    def mixed_with(self, other, weight):
        """Per-agent convex combination (1 - weight) * self + weight * other."""
        return AgentPolicy(tuple((1 - weight) * a + weight * b for a, b in zip(self.tables, other.tables)))

    def is_deterministic(self):
        return all(np.all((t == 0) | (t == 1)) for t in self.tables)


@dataclass(frozen=True, eq=False)
class AdversaryPolicy:
    """tables[i][s, rho] = probability adversary i shows rho when the true state is s."""
    tables: tuple

    def __post_init__(self):
        object.__setattr__(self, 'tables', tuple(_frozen(t) for t in self.tables))

    def __eq__(self, other):
        if not isinstance(other, AdversaryPolicy):
            return NotImplemented
        return len(self.tables) == len(other.tables) and all(
            np.array_equal(a, b) for a, b in zip(self.tables, other.tables)
        )

    __hash__ = None

    def __getitem__(self, agent):
        return self.tables[agent]

    @property
    def n_agents(self):
        return len(self.tables)

    @classmethod
    def from_tables(cls, model, tables):
        from .validation import adversary_violations
        from .exceptions import ModelValidationError

        policy = cls(tuple(normalize_rows(t) if _near_distribution(t) else np.asarray(t, dtype=float)
                           for t in tables))
        violations = adversary_violations(model, policy)
        if violations:
            raise ModelValidationError(violations)
        return policy

    @classmethod
    def identity(cls, model):
        return cls(tuple(np.eye(model.n_states) for _ in range(model.n_agents)))

    @classmethod
    def uniform(cls, model):
        tables = []
        for i in range(model.n_agents):
            table = np.zeros((model.n_states, model.n_states))
            for s, members in enumerate(model.perturbation_sets[i]):
                table[s, list(members)] = 1.0 / len(members)
            tables.append(table)
        return cls(tuple(tables))

    @classmethod
    def deterministic(cls, model, choices):
        """choices[i][s] is the state index adversary i shows at true state s."""
        tables = []
        for i in range(model.n_agents):
            table = np.zeros((model.n_states, model.n_states))
            table[np.arange(model.n_states), np.asarray(choices[i], dtype=int)] = 1.0
            tables.append(table)
        return cls(tuple(tables))

    def check_shape(self, model):
        _check_policy_shape(self.tables, [(model.n_states, model.n_states)] * model.n_agents, 'adversary policy')
        return self

    def with_agent(self, agent, table):
        tables = list(self.tables)
        tables[agent] = table
        return AdversaryPolicy(tuple(tables))


def _near_distribution(table):
    table = np.asarray(table, dtype=float)
    return table.ndim == 2 and np.all(np.abs(table.sum(axis=1) - 1.0) <= PROBABILITY_TOLERANCE)


@dataclass(frozen=True, eq=False)
class ValueTable:
    """A real value per state, indexable by state name or index."""
    states: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(self.states))
        object.__setattr__(self, 'values', _frozen(self.values))

    def __getitem__(self, key):
        if isinstance(key, str):
            key = self.states.index(key)
        return float(self.values[key])

    def __iter__(self):
        return iter(self.values.tolist())

    def __len__(self):
        return len(self.states)

    def __eq__(self, other):
        if not isinstance(other, ValueTable):
            return NotImplemented
        return self.states == other.states and np.array_equal(self.values, other.values)

    __hash__ = None

    def __repr__(self):
        body = ', '.join(f'{s}={v:.6f}' for s, v in zip(self.states, self.values))
        return f'{type(self).__name__}({body})'

    def as_dict(self):
        return dict(zip(self.states, self.values.tolist()))


class OccupancyTable(ValueTable):
    """Discounted visitation mass per state, aggregated over the initial distribution."""

    @property
    def total(self):
        return float(self.values.sum())


@dataclass(frozen=True, eq=False)
class QTable:
    """Q(s, a) for every state and joint action; values has shape (S, A1, ..., An)."""
    states: tuple
    actions: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen(self.values))

    def __getitem__(self, key):
        state, joint = key
        if isinstance(state, str):
            state = self.states.index(state)
        joint = tuple(
            self.actions[i].index(a) if isinstance(a, str) else int(a) for i, a in enumerate(joint)
        )
        return float(self.values[(state, *joint)])
