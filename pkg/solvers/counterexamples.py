"""
Verification suite for the built-in two-state games: totally optimal robust
policies and robust total Nash equilibria need not exist.
"""
import logging
from dataclasses import dataclass

import numpy as np

from games.builtins import builtin_game, builtin_policy
from games.samg import AdversaryPolicy, AgentPolicy

from .adversary import optimal_adversary
from .equilibrium import robust_nash_verify
from .evaluation import evaluate, relabel_markov_game
from .maximin import classify_values, deterministic_policy_choices

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    expected: str
    observed: str


def _close(observed, expected):
    return bool(np.all(np.abs(np.asarray(observed, dtype=float) - np.asarray(expected, dtype=float)) <= TOLERANCE))


def _pair(values):
    return '(' + ', '.join(f'{v:.6f}' for v in values) + ')'


def check_coordination_collapse(model):
    policy = builtin_policy('coordination', model)
    nominal = evaluate(model, policy, AdversaryPolicy.identity(model)).values
    worst = optimal_adversary(model, policy).values.values
    return CheckResult(
        'fig4 coordination policy collapses from 100 to 0 under the optimal adversary',
        _close(nominal, [100, 100]) and _close(worst, [0, 0]),
        'V = (100, 100), V_bar = (0, 0)',
        f'V = {_pair(nominal)}, V_bar = {_pair(worst)}',
    )


def check_stochastic_floor(model):
    worst = optimal_adversary(model, builtin_policy('stochastic', model)).values.values
    return CheckResult(
        'fig4 stochastic policy keeps worst-case value 50',
        _close(worst, [50, 50]),
        'V_bar = (50, 50)',
        f'V_bar = {_pair(worst)}',
    )


def check_deterministic_classes(model):
    g = model.gamma
    same = evaluate(model, builtin_policy('always_same', model), AdversaryPolicy.identity(model)).values
    differ = optimal_adversary(model, builtin_policy('always_differ', model)).values.values
    expected_same = [1 / (1 - g**2), g / (1 - g**2)]
    return CheckResult(
        'fig4 deterministic value classes',
        _close(same, expected_same) and _close(differ, [0, 100]),
        f'always same V = {_pair(expected_same)}, always differ V_bar = (0, 100)',
        f'always same V = {_pair(same)}, always differ V_bar = {_pair(differ)}',
    )


def check_no_dominating_policy(model):
    stochastic = optimal_adversary(model, builtin_policy('stochastic', model)).values.values
    differ = optimal_adversary(model, builtin_policy('always_differ', model)).values.values
    passed = (
        _close(stochastic, [50, 50])
        and _close(differ, [0, 100])
        and stochastic[0] > differ[0]
        and differ[1] > stochastic[1]
    )
    return CheckResult(
        'fig4 trade-off: stochastic wins at s1, always differ wins at s2',
        passed,
        'V_bar stochastic = (50, 50), V_bar always differ = (0, 100)',
        f'V_bar stochastic = {_pair(stochastic)}, V_bar always differ = {_pair(differ)}',
    )


def check_stage_conflict(model):
    identity = AdversaryPolicy.identity(model)
    same = robust_nash_verify(model, builtin_policy('always_same', model), identity)
    differ = robust_nash_verify(model, builtin_policy('always_differ', model), identity)
    passed = same.failing_states() == ['s2'] and differ.failing_states() == ['s1']
    return CheckResult(
        'fig5 stage-wise requirements conflict across states',
        passed,
        'same at both states fails only at s2, differ at both states fails only at s1',
        f'same fails at {same.failing_states()}, differ fails at {differ.failing_states()}',
    )


def check_all_deterministic_classes(model):
    g = model.gamma
    classes = ([0, 0], [0, 100], [1 / (1 - g**2), g / (1 - g**2)])
    unmatched = []
    for choices in deterministic_policy_choices(model):
        worst = optimal_adversary(model, AgentPolicy.deterministic(model, choices)).values.values
        if classify_values(worst, classes, TOLERANCE) is None:
            unmatched.append(f'{choices}: {_pair(worst)}')
    return CheckResult(
        'fig4 all 16 deterministic policies fall into three worst-case classes',
        not unmatched,
        'every V_bar in {(0, 0), (0, 100), (50.251256, 49.748744)}',
        'all matched' if not unmatched else '; '.join(unmatched),
    )


def check_no_deterministic_dominates_stochastic(model):
    stochastic = optimal_adversary(model, builtin_policy('stochastic', model)).values.values
    dominating = []
    for choices in deterministic_policy_choices(model):
        worst = optimal_adversary(model, AgentPolicy.deterministic(model, choices)).values.values
        if np.all(worst >= stochastic - TOLERANCE):
            dominating.append(f'{choices}: {_pair(worst)}')
    return CheckResult(
        'fig4 no deterministic policy dominates the stochastic policy',
        not dominating,
        'none',
        'none' if not dominating else '; '.join(dominating),
    )


def check_mixing_trade_off(model):
    differ = builtin_policy('always_differ', model)
    table = np.array(differ[1])
    table[0] = [0.1, 0.9]
    mixed = differ.with_agent(1, table)
    worst = optimal_adversary(model, mixed).values.values
    return CheckResult(
        'fig4 mixing always differ towards matching at one perceived state costs value at s2',
        worst[1] < 100 - TOLERANCE,
        'V_bar(s2) < 100',
        f'V_bar = {_pair(worst)}',
    )


def check_markov_game_reduction(model):
    swap = [1, 0]
    policy = builtin_policy('coordination', model)
    adversary = AdversaryPolicy.deterministic(model, [swap] * model.n_agents)
    direct = evaluate(model, policy, adversary).values
    relabeled = relabel_markov_game(model, swap)
    reduced = evaluate(relabeled, policy, AdversaryPolicy.identity(relabeled)).values[swap]
    return CheckResult(
        'fig4 swap perturbation equals the relabeled Markov game',
        bool(np.max(np.abs(direct - reduced)) <= 1e-10),
        _pair(direct),
        _pair(reduced),
    )


def counterexample_suite():
    fig4, fig5 = builtin_game('fig4'), builtin_game('fig5')
    checks = [
        (check_coordination_collapse, fig4),
        (check_stochastic_floor, fig4),
        (check_deterministic_classes, fig4),
        (check_no_dominating_policy, fig4),
        (check_stage_conflict, fig5),
        (check_all_deterministic_classes, fig4),
        (check_no_deterministic_dominates_stochastic, fig4),
        (check_mixing_trade_off, fig4),
        (check_markov_game_reduction, fig4),
    ]
    results = []
    for check, model in checks:
        result = check(model)
        logger.info(f'{"PASS" if result.passed else "FAIL"}: {result.name}')
        results.append(result)
    return results
