import itertools

import numpy as np
from django.test import SimpleTestCase, override_settings

from games.builtins import builtin_game, builtin_policy
from games.exceptions import SizeGuardError
from games.generators import random_game
from games.samg import AdversaryPolicy, AgentPolicy
from solvers.equilibrium import (
    behavioral_rows,
    build_stage_game,
    embed_profile,
    nonexistence_scan,
    pure_utilities,
    robust_nash_verify,
    simplex_grid,
    stage_best_response,
    stage_exploitability,
    StrategyProfile,
    utility,
)

from .helpers import constant_reward, matching_game


def uniform_context(model):
    return AgentPolicy.uniform(model), AdversaryPolicy.uniform(model)


def pure_profile(game, choices):
    strategies = []
    for player, choice in enumerate(choices):
        strategy = np.zeros(game.action_count(player))
        strategy[choice] = 1.0
        strategies.append(strategy)
    return StrategyProfile(tuple(strategies))


class StageGameTests(SimpleTestCase):

    def setUp(self):
        self.model = builtin_game('fig4')
        self.game = build_stage_game(self.model, 0, uniform_context(self.model))

    def test_action_sets(self):
        self.assertEqual(self.game.n_players, 4)
        self.assertEqual([self.game.action_count(p) for p in range(4)], [4, 4, 2, 2])
        self.assertEqual(self.game.agent_actions[0], ((0, 0), (0, 1), (1, 0), (1, 1)))
        self.assertEqual(self.game.action_label(0, 1), '(a1,a2)')
        self.assertEqual(self.game.action_label(3, 1), 's2')

    def test_degenerate_sets(self):
        model = self.model.with_degenerate_perturbations()
        game = build_stage_game(model, 1, uniform_context(model))
        self.assertEqual([game.action_count(p) for p in range(4)], [2, 2, 1, 1])

    def test_marginalisation(self):
        rows = behavioral_rows(self.game, 0, [0.0, 1.0, 0.0, 0.0])
        np.testing.assert_array_equal(rows, [[1.0, 0.0], [0.0, 1.0]])
        rows = behavioral_rows(self.game, 1, [0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(rows, [[0.3, 0.7], [0.4, 0.6]])

    def test_embedding_recovers_policy_rows(self):
        pi = AgentPolicy(([[0.2, 0.8], [0.6, 0.4]], [[1.0, 0.0], [0.5, 0.5]]))
        chi = AdversaryPolicy(([[0.3, 0.7], [0.0, 1.0]], [[1.0, 0.0], [0.5, 0.5]]))
        profile = embed_profile(self.game, pi, chi)
        for i in range(2):
            np.testing.assert_allclose(behavioral_rows(self.game, i, profile[i]), pi[i])
            self.assertAlmostEqual(profile[i].sum(), 1.0)
        np.testing.assert_allclose(profile[2], [0.3, 0.7])
        np.testing.assert_allclose(profile[3], [1.0, 0.0])

    def test_adversary_utility_is_negated_agent_term(self):
        profile = embed_profile(self.game, *uniform_context(self.model))
        for i in range(2):
            self.assertEqual(utility(self.game, i + 2, profile), -utility(self.game, i, profile))

    def test_linear_in_own_strategy(self):
        rng = np.random.default_rng(0)
        profile = StrategyProfile(tuple(rng.dirichlet(np.ones(self.game.action_count(p))) for p in range(4)))
        for player in range(4):
            a, b = rng.dirichlet(np.ones(self.game.action_count(player)), size=2)
            mixed = utility(self.game, player, profile.with_strategy(player, 0.3 * a + 0.7 * b))
            expected = (0.3 * utility(self.game, player, profile.with_strategy(player, a))
                        + 0.7 * utility(self.game, player, profile.with_strategy(player, b)))
            self.assertAlmostEqual(mixed, expected, places=10)
            pure = pure_utilities(self.game, player, profile)
            self.assertAlmostEqual(utility(self.game, player, profile), float(pure @ profile[player]), places=10)

    def test_best_response_matches_exhaustive_search(self):
        profile = embed_profile(self.game, *uniform_context(self.model))
        for player in range(4):
            values = []
            for k in range(self.game.action_count(player)):
                pure = np.zeros(self.game.action_count(player))
                pure[k] = 1.0
                values.append(utility(self.game, player, profile.with_strategy(player, pure)))
            value, index = stage_best_response(self.game, player, profile)
            self.assertAlmostEqual(value, max(values), places=10)
            self.assertEqual(index, int(np.argmax(np.isclose(values, max(values), rtol=0, atol=1e-9))))

    def test_exploitability_is_nonnegative(self):
        rng = np.random.default_rng(1)
        profile = StrategyProfile(tuple(rng.dirichlet(np.ones(self.game.action_count(p))) for p in range(4)))
        self.assertTrue(all(gap >= -1e-12 for gap in stage_exploitability(self.game, profile)))

    def test_constant_utility(self):
        model = constant_reward(self.model, 1.0)
        game = build_stage_game(model, 1, uniform_context(model))
        rng = np.random.default_rng(2)
        profile = StrategyProfile(tuple(rng.dirichlet(np.ones(game.action_count(p))) for p in range(4)))
        np.testing.assert_allclose(stage_exploitability(game, profile), np.zeros(4), atol=1e-9)
        self.assertAlmostEqual(utility(game, 0, profile), 100.0, places=6)

    def test_ignoring_perception_leaves_the_adversary_nothing(self):
        game = build_stage_game(self.model, 0, (builtin_policy('always_same', self.model), AdversaryPolicy.uniform(self.model)))
        profile = pure_profile(game, [0, 0, 0, 0]).with_strategy(2, [0.5, 0.5]).with_strategy(3, [0.5, 0.5])
        gaps = stage_exploitability(game, profile)
        self.assertAlmostEqual(gaps[2], 0.0, places=10)
        self.assertAlmostEqual(gaps[3], 0.0, places=10)

    def test_mutual_best_responses_have_no_gap(self):
        model = matching_game()
        game = build_stage_game(model, 0, (AgentPolicy.deterministic(model, [[0], [0]]), AdversaryPolicy.identity(model)))
        equilibria = []
        for choices in itertools.product(range(2), range(2), range(1), range(1)):
            profile = pure_profile(game, choices)
            if max(stage_exploitability(game, profile)) <= 1e-9:
                equilibria.append(choices[:2])
        self.assertEqual(equilibria, [(0, 0), (1, 1)])

    @override_settings(SAMG_STAGE_ACTION_GUARD=3)
    def test_guard(self):
        with self.assertRaises(SizeGuardError):
            build_stage_game(self.model, 0, uniform_context(self.model))


class VerifyTests(SimpleTestCase):

    def setUp(self):
        self.model = builtin_game('fig5')
        self.identity = AdversaryPolicy.identity(self.model)

    def test_same_everywhere_fails_at_s2(self):
        verdict = robust_nash_verify(self.model, builtin_policy('always_same', self.model), self.identity)
        self.assertFalse(verdict.satisfied)
        self.assertEqual(verdict.failing_states(), ['s2'])
        self.assertAlmostEqual(verdict.max_gap, 1.0, places=6)

    def test_differ_everywhere_fails_at_s1(self):
        verdict = robust_nash_verify(self.model, builtin_policy('always_differ', self.model), self.identity)
        self.assertEqual(verdict.failing_states(), ['s1'])

    def test_no_truthful_deterministic_profile_passes(self):
        for choices in itertools.product(itertools.product(range(2), repeat=2), repeat=2):
            verdict = robust_nash_verify(self.model, AgentPolicy.deterministic(self.model, choices), self.identity)
            self.assertGreaterEqual(verdict.max_gap, 0.5, msg=str(choices))

    def test_uniform_mixing_ties_every_action(self):
        verdict = robust_nash_verify(self.model, AgentPolicy.uniform(self.model), self.identity)
        self.assertTrue(verdict.satisfied)
        self.assertLessEqual(verdict.max_gap, 1e-9)

    def test_matching_game_equilibrium(self):
        model = matching_game()
        verdict = robust_nash_verify(model, AgentPolicy.deterministic(model, [[1], [1]]), AdversaryPolicy.identity(model))
        self.assertTrue(verdict.satisfied)
        mismatch = robust_nash_verify(model, AgentPolicy.deterministic(model, [[0], [1]]), AdversaryPolicy.identity(model))
        self.assertFalse(mismatch.satisfied)

    def test_gap_per_player(self):
        verdict = robust_nash_verify(self.model, builtin_policy('always_same', self.model), self.identity)
        self.assertEqual(len(verdict.states[0].gaps), 4)
        self.assertEqual(verdict.states[1].state, 's2')


class SimplexGridTests(SimpleTestCase):

    def test_two_actions(self):
        np.testing.assert_array_equal(simplex_grid(2, 3), [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]])

    def test_point_count(self):
        self.assertEqual(len(simplex_grid(3, 11)), 66)
        np.testing.assert_allclose(simplex_grid(3, 11).sum(axis=1), 1.0)

    def test_rejects_coarse_resolution(self):
        with self.assertRaises(ValueError):
            simplex_grid(2, 1)


class ScanTests(SimpleTestCase):

    def test_matching_game_has_an_equilibrium(self):
        result = nonexistence_scan(matching_game(), 11)
        self.assertLessEqual(result.min_gap, 1e-6)
        self.assertTrue(result.equilibrium_found)
        self.assertEqual(result.profiles, 121)
        verdict = robust_nash_verify(matching_game(), result.agent_policy, result.adversary_policy)
        self.assertTrue(verdict.satisfied)

    def test_constant_reward(self):
        result = nonexistence_scan(constant_reward(builtin_game('fig4'), 1.0), 2)
        self.assertLessEqual(result.min_gap, 1e-9)
        np.testing.assert_allclose(result.state_minima.values, 0.0, atol=1e-9)

    def test_truthful_fig4_has_an_equilibrium(self):
        model = builtin_game('fig4').with_initial('s2').with_degenerate_perturbations()
        result = nonexistence_scan(model, 2)
        self.assertLessEqual(result.min_gap, 1e-9)
        self.assertEqual(result.profiles, 16)

    def test_fig5_witness_verifies(self):
        model = builtin_game('fig5')
        result = nonexistence_scan(model, 2)
        self.assertEqual(result.profiles, 36**2)
        self.assertEqual(result.label, 'evidence at resolution 2')
        self.assertLessEqual(result.min_gap, 1e-9)
        verdict = robust_nash_verify(model, result.agent_policy, result.adversary_policy, eps=1e-6)
        self.assertTrue(verdict.satisfied)
        self.assertAlmostEqual(verdict.max_gap, result.min_gap, places=6)

    def test_fig5_resolution_eleven(self):
        model = builtin_game('fig5')
        result = nonexistence_scan(model, 11)
        self.assertEqual(result.profiles, (121 * 9) ** 2)
        self.assertLessEqual(result.min_gap, 1e-9)

    def test_scan_gaps_match_verification(self):
        model = random_game(2, 2, 2, 2, 2)
        result = nonexistence_scan(model, 3)
        verdict = robust_nash_verify(model, result.agent_policy, result.adversary_policy)
        self.assertAlmostEqual(verdict.max_gap, result.min_gap, places=6)

    def test_every_state_has_a_stage_equilibrium(self):
        models = [builtin_game('fig4'), builtin_game('fig5'), matching_game()]
        models += [random_game(seed, 1, 3, 2, 2) for seed in range(3)]
        for model in models:
            result = nonexistence_scan(model, 2)
            self.assertTrue(np.all(result.state_minima.values <= 1e-9), msg=repr(result.state_minima))
            self.assertTrue(np.all(result.state_minima.values <= result.min_gap + 1e-12))

    @override_settings(SAMG_JOINT_GUARD=100)
    def test_guard(self):
        with self.assertRaises(SizeGuardError):
            nonexistence_scan(builtin_game('fig5'), 2)
