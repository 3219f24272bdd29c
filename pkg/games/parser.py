"""
Reader and writer for the line-oriented model and policy file formats.

Model files:

    samg 1
    agents 2
    states s1 s2
    actions 1 a1 a2
    gamma 0.99
    transition s1 a1 a1 s2 1.0
    reward s1 a1 a1 1.0
    perturb 1 s1 s1 s2
    init s1 0.5

Policy files:

    policy agent 1 s1 a1 1.0
    adversary 1 s1 s2 1.0

`#` starts a comment, tokens are separated by whitespace. Probabilities are
written with 17 significant digits so files reparse bit-for-bit.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ModelSyntaxError, ModelValidationError
from .samg import AdversaryPolicy, AgentPolicy, SamgModel, normalize_rows
from .validation import validate_model

logger = logging.getLogger(__name__)

FORMAT_VERSION = '1'
MODEL_DIRECTIVES = ('samg', 'agents', 'states', 'actions', 'gamma', 'transition', 'reward', 'perturb', 'init')


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


def tokenize(text):
    """Yield (line number, tokens) for every non-empty line, comments removed."""
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split('#', 1)[0]
        tokens = []
        column = 0
        for piece in content.split():
            column = content.index(piece, column)
            tokens.append(Token(piece, number, column + 1))
            column += len(piece)
        if tokens:
            yield number, tokens


def format_number(value):
    return format(float(value), '.17g')


def _number(token):
    try:
        value = float(token.text)
    except ValueError:
        raise ModelSyntaxError(f'expected a number, got "{token.text}"', token.line, token.column) from None
    if not np.isfinite(value):
        raise ModelSyntaxError(f'non-finite number "{token.text}"', token.line, token.column)
    return value


def _integer(token):
    try:
        return int(token.text)
    except ValueError:
        raise ModelSyntaxError(f'expected an integer, got "{token.text}"', token.line, token.column) from None


def _arity(tokens, count, usage):
    if len(tokens) != count:
        head = tokens[0]
        raise ModelSyntaxError(f'{head.text} expects: {usage}', head.line, head.column)


class _Lookup:
    """Name-to-index resolution that records unknown identifiers as violations."""

    def __init__(self, names, kind):
        self.index = {name: k for k, name in enumerate(names)}
        self.kind = kind

    def __call__(self, token, violations):
        try:
            return self.index[token.text]
        except KeyError:
            violations.append(f'line {token.line}: unknown {self.kind} "{token.text}"')
            return None


def parse_model(text):
    """Parse model-file text into a validated SamgModel."""
    groups = {name: [] for name in MODEL_DIRECTIVES}
    for _, tokens in tokenize(text):
        head = tokens[0]
        if head.text not in groups:
            raise ModelSyntaxError(f'unknown directive "{head.text}"', head.line, head.column)
        groups[head.text].append(tokens)

    singles = {}
    for name in ('samg', 'agents', 'states', 'gamma'):
        lines = groups[name]
        if not lines:
            raise ModelSyntaxError(f'missing "{name}" directive', 1, 1)
        if len(lines) > 1:
            head = lines[1][0]
            raise ModelSyntaxError(f'duplicate "{name}" directive', head.line, head.column)
        singles[name] = lines[0]

    version = singles['samg']
    _arity(version, 2, 'samg <version>')
    if version[1].text != FORMAT_VERSION:
        raise ModelSyntaxError(f'unsupported format version "{version[1].text}"', version[1].line, version[1].column)

    _arity(singles['agents'], 2, 'agents <count>')
    n_agents = _integer(singles['agents'][1])
    if n_agents < 1:
        token = singles['agents'][1]
        raise ModelSyntaxError('agent count must be at least 1', token.line, token.column)

    state_tokens = singles['states'][1:]
    if not state_tokens:
        head = singles['states'][0]
        raise ModelSyntaxError('states expects at least one identifier', head.line, head.column)
    states = [t.text for t in state_tokens]
    _unique(state_tokens, 'state')

    _arity(singles['gamma'], 2, 'gamma <value>')
    gamma = _number(singles['gamma'][1])

    actions = [None] * n_agents
    for tokens in groups['actions']:
        if len(tokens) < 3:
            raise ModelSyntaxError('actions expects: actions <agent> <ids...>', tokens[0].line, tokens[0].column)
        agent = _integer(tokens[1])
        if not 1 <= agent <= n_agents:
            raise ModelSyntaxError(f'agent index {agent} out of range 1..{n_agents}', tokens[1].line, tokens[1].column)
        if actions[agent - 1] is not None:
            raise ModelSyntaxError(f'duplicate actions for agent {agent}', tokens[0].line, tokens[0].column)
        _unique(tokens[2:], 'action')
        actions[agent - 1] = [t.text for t in tokens[2:]]
    missing = [str(i + 1) for i, acts in enumerate(actions) if acts is None]
    if missing:
        raise ModelSyntaxError(f'no actions declared for agent(s) {", ".join(missing)}', 1, 1)

    violations = []
    state_of = _Lookup(states, 'state')
    action_of = [_Lookup(acts, f'action of agent {i + 1}') for i, acts in enumerate(actions)]
    shape = (len(states), *(len(a) for a in actions))
    transition = np.zeros((*shape, len(states)))
    reward = np.zeros(shape)
    seen = set()

    def joint_of(tokens):
        indices = [state_of(tokens[0], violations)]
        indices += [action_of[i](tok, violations) for i, tok in enumerate(tokens[1:1 + n_agents])]
        return None if None in indices else tuple(indices)

    for tokens in groups['transition']:
        _arity(tokens, n_agents + 4, 'transition <s> <a^1>...<a^n> <s\'> <prob>')
        key = joint_of(tokens[1:2 + n_agents])
        target = state_of(tokens[2 + n_agents], violations)
        prob = _number(tokens[-1])
        if key is None or target is None:
            continue
        if ('transition', key, target) in seen:
            violations.append(f'line {tokens[0].line}: duplicate transition entry')
        seen.add(('transition', key, target))
        transition[(*key, target)] = prob

    for tokens in groups['reward']:
        _arity(tokens, n_agents + 3, 'reward <s> <a^1>...<a^n> <value>')
        key = joint_of(tokens[1:2 + n_agents])
        value = _number(tokens[-1])
        if key is None:
            continue
        if ('reward', key) in seen:
            violations.append(f'line {tokens[0].line}: duplicate reward entry')
        seen.add(('reward', key))
        reward[key] = value

    perturbation_sets = [[(s,) for s in range(len(states))] for _ in range(n_agents)]
    declared = set()
    for tokens in groups['perturb']:
        if len(tokens) < 4:
            raise ModelSyntaxError('perturb expects: perturb <agent> <s> <members...>', tokens[0].line, tokens[0].column)
        agent = _integer(tokens[1])
        if not 1 <= agent <= n_agents:
            raise ModelSyntaxError(f'agent index {agent} out of range 1..{n_agents}', tokens[1].line, tokens[1].column)
        state = state_of(tokens[2], violations)
        members = [state_of(t, violations) for t in tokens[3:]]
        if state is None or None in members:
            continue
        if (agent, state) in declared:
            violations.append(f'line {tokens[0].line}: duplicate perturb entry for agent {agent} at {states[state]}')
        declared.add((agent, state))
        for member in sorted({m for m in members if members.count(m) > 1}):
            violations.append(
                f'line {tokens[0].line}: duplicate perturb entry {states[member]} for agent {agent} at {states[state]}'
            )
        perturbation_sets[agent - 1][state] = tuple(dict.fromkeys(members))

    if groups['init']:
        initial = np.zeros(len(states))
        for tokens in groups['init']:
            _arity(tokens, 3, 'init <s> <prob>')
            state = state_of(tokens[1], violations)
            prob = _number(tokens[2])
            if state is None:
                continue
            if ('init', state) in seen:
                violations.append(f'line {tokens[0].line}: duplicate init entry for {states[state]}')
            seen.add(('init', state))
            initial[state] = prob
    else:
        initial = np.full(len(states), 1.0 / len(states))

    if violations:
        raise ModelValidationError(violations)

    model = SamgModel(
        states=states,
        actions=actions,
        transition=transition,
        reward=reward,
        perturbation_sets=perturbation_sets,
        gamma=gamma,
        initial_dist=initial,
    )
    violations = validate_model(model)
    if violations:
        raise ModelValidationError(violations)

    # Rows passed the 1e-12 check; rescale any that drift beyond rounding noise.
    model = SamgModel(
        states=model.states,
        actions=model.actions,
        transition=normalize_rows(model.transition),
        reward=model.reward,
        perturbation_sets=model.perturbation_sets,
        gamma=model.gamma,
        initial_dist=normalize_rows(model.initial_dist),
    )
    logger.debug(f'Parsed model with {model.n_states} states and {model.n_agents} agents')
    return model


def _unique(tokens, kind):
    seen = set()
    for token in tokens:
        if token.text in seen:
            raise ModelSyntaxError(f'duplicate {kind} identifier "{token.text}"', token.line, token.column)
        seen.add(token.text)


def serialize_model(model):
    """Write a model in the file format; parse_model(serialize_model(m)) == m."""
    lines = [
        f'samg {FORMAT_VERSION}',
        f'agents {model.n_agents}',
        'states ' + ' '.join(model.states),
    ]
    for i, acts in enumerate(model.actions, start=1):
        lines.append(f'actions {i} ' + ' '.join(acts))
    lines.append(f'gamma {format_number(model.gamma)}')

    for index in np.ndindex(model.transition.shape):
        prob = model.transition[index]
        if prob != 0:
            s, *joint, target = index
            names = ' '.join(model.actions[i][a] for i, a in enumerate(joint))
            lines.append(f'transition {model.states[s]} {names} {model.states[target]} {format_number(prob)}')

    for index in np.ndindex(model.reward.shape):
        value = model.reward[index]
        if value != 0:
            s, *joint = index
            names = ' '.join(model.actions[i][a] for i, a in enumerate(joint))
            lines.append(f'reward {model.states[s]} {names} {format_number(value)}')

    for i, per_state in enumerate(model.perturbation_sets, start=1):
        for s, members in enumerate(per_state):
            lines.append(f'perturb {i} {model.states[s]} ' + ' '.join(model.states[m] for m in members))

    for s, prob in enumerate(model.initial_dist):
        if prob != 0:
            lines.append(f'init {model.states[s]} {format_number(prob)}')
    return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class PolicyFile:
    agent_policy: AgentPolicy
    adversary_policy: AdversaryPolicy
    has_agent_rows: bool
    has_adversary_rows: bool


def parse_policy(text, model, agent_default='uniform'):
    """
    Read agent and adversary rows from policy-file text.

    Agent rows (i, rho) that never appear default to `agent_default`
    ("uniform", or "error" to reject incomplete files); adversary rows that
    never appear default to showing the true state.
    """
    agent_tables = [np.zeros((model.n_states, k)) for k in model.action_counts]
    agent_rows = [set() for _ in range(model.n_agents)]
    adversary_tables = [np.zeros((model.n_states, model.n_states)) for _ in range(model.n_agents)]
    adversary_rows = [set() for _ in range(model.n_agents)]
    violations = []
    state_of = _Lookup(model.states, 'state')

    def agent_index(token):
        agent = _integer(token)
        if not 1 <= agent <= model.n_agents:
            raise ModelSyntaxError(f'agent index {agent} out of range 1..{model.n_agents}', token.line, token.column)
        return agent - 1

    for _, tokens in tokenize(text):
        head = tokens[0]
        if head.text == 'policy':
            _arity(tokens, 6, 'policy agent <i> <rho> <action> <prob>')
            if tokens[1].text != 'agent':
                raise ModelSyntaxError(f'expected "agent", got "{tokens[1].text}"', tokens[1].line, tokens[1].column)
            i = agent_index(tokens[2])
            rho = state_of(tokens[3], violations)
            action = _Lookup(model.actions[i], f'action of agent {i + 1}')(tokens[4], violations)
            prob = _number(tokens[5])
            if rho is None or action is None:
                continue
            agent_tables[i][rho, action] = prob
            agent_rows[i].add(rho)
        elif head.text == 'adversary':
            _arity(tokens, 5, 'adversary <i> <s> <rho> <prob>')
            i = agent_index(tokens[1])
            s = state_of(tokens[2], violations)
            rho = state_of(tokens[3], violations)
            prob = _number(tokens[4])
            if s is None or rho is None:
                continue
            adversary_tables[i][s, rho] = prob
            adversary_rows[i].add(s)
        else:
            raise ModelSyntaxError(f'unknown directive "{head.text}"', head.line, head.column)

    for i in range(model.n_agents):
        for rho in range(model.n_states):
            if rho not in agent_rows[i]:
                if agent_default == 'error':
                    violations.append(f'missing policy rows for agent {i + 1} at {model.states[rho]}')
                agent_tables[i][rho] = 1.0 / model.action_counts[i]
            if rho not in adversary_rows[i]:
                adversary_tables[i][rho, rho] = 1.0
    if violations:
        raise ModelValidationError(violations)

    return PolicyFile(
        agent_policy=AgentPolicy.from_tables(model, agent_tables),
        adversary_policy=AdversaryPolicy.from_tables(model, adversary_tables),
        has_agent_rows=any(agent_rows),
        has_adversary_rows=any(adversary_rows),
    )


def serialize_policy(model, agent_policy=None, adversary_policy=None):
    lines = []
    if agent_policy is not None:
        for i, table in enumerate(agent_policy.tables):
            for rho, a in np.ndindex(table.shape):
                if table[rho, a] != 0:
                    lines.append(
                        f'policy agent {i + 1} {model.states[rho]} {model.actions[i][a]} {format_number(table[rho, a])}'
                    )
    if adversary_policy is not None:
        for i, table in enumerate(adversary_policy.tables):
            for s, rho in np.ndindex(table.shape):
                if table[s, rho] != 0:
                    lines.append(f'adversary {i + 1} {model.states[s]} {model.states[rho]} {format_number(table[s, rho])}')
    return '\n'.join(lines) + '\n'
