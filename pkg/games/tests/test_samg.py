from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from games.builtins import builtin_game, builtin_policy
from games.exceptions import DimensionMismatchError, ModelValidationError, SamgError, UnknownGameError
from games.generators import random_game
from games.samg import AdversaryPolicy, AgentPolicy, OccupancyTable, QTable, ValueTable
from games.validation import adversary_violations, validate_model


class BuiltinGameTests(SimpleTestCase):

    def test_fig4_rewards_and_transitions(self):
        model = builtin_game('fig4')
        self.assertEqual(model.states, ('s1', 's2'))
        self.assertEqual(model.gamma, 0.99)
        self.assertEqual(model.reward[0, 0, 0], 1.0)
        self.assertEqual(model.reward[0, 0, 1], 0.0)
        self.assertEqual(model.reward[1, 0, 1], 1.0)
        self.assertEqual(model.transition[0, 0, 0, 1], 1.0)
        self.assertEqual(model.transition[0, 0, 1, 0], 1.0)
        self.assertEqual(model.transition[1, 1, 1, 0], 1.0)
        self.assertEqual(model.transition[1, 1, 0, 1], 1.0)
        self.assertEqual(model.perturbation_sets, (((0, 1), (0, 1)), ((0, 1), (0, 1))))

    def test_fig5_changes_only_the_rows_out_of_s1(self):
        fig4, fig5 = builtin_game('fig4'), builtin_game('fig5')
        self.assertEqual(fig5.transition[0, 0, 0, 0], 1.0)
        self.assertEqual(fig5.transition[0, 0, 1, 1], 1.0)
        np.testing.assert_array_equal(fig4.transition[1], fig5.transition[1])
        np.testing.assert_array_equal(fig4.reward, fig5.reward)
        self.assertEqual(fig4.perturbation_sets, fig5.perturbation_sets)
        self.assertNotEqual(fig4, fig5)

    def test_builtins_are_valid(self):
        for name in ('fig4', 'fig5'):
            self.assertEqual(validate_model(builtin_game(name)), [])

    def test_unknown_name(self):
        with self.assertRaisesMessage(UnknownGameError, 'unknown builtin game or policy "fig6"'):
            builtin_game('fig6')

    def test_named_policies(self):
        model = builtin_game('fig4')
        coordination = builtin_policy('coordination', model)
        np.testing.assert_array_equal(coordination[0], [[1, 0], [1, 0]])
        np.testing.assert_array_equal(coordination[1], [[1, 0], [0, 1]])
        self.assertTrue(coordination.is_deterministic())
        self.assertEqual(builtin_policy('stochastic', model), AgentPolicy.uniform(model))
        with self.assertRaises(UnknownGameError):
            builtin_policy('tit_for_tat', model)


class RandomGameTests(SimpleTestCase):

    def test_deterministic_in_seed(self):
        self.assertEqual(random_game(1, 2, 3, 2, 2), random_game(1, 2, 3, 2, 2))
        self.assertNotEqual(random_game(1, 2, 3, 2, 2), random_game(2, 2, 3, 2, 2))

    def test_generated_models_are_valid(self):
        for seed in range(5):
            self.assertEqual(validate_model(random_game(seed, 2, 3, 2, 2)), [])

    def test_admissible_sets(self):
        model = random_game(4, 3, 4, 2, 3)
        for per_state in model.perturbation_sets:
            for s, members in enumerate(per_state):
                self.assertIn(s, members)
                self.assertEqual(len(members), 3)

    def test_singleton_sets(self):
        model = random_game(1, 2, 3, 2, 1)
        self.assertEqual(model.perturbation_sets, (((0,), (1,), (2,)),) * 2)

    def test_infeasible_perturb_size(self):
        with self.assertRaises(SamgError):
            random_game(1, 2, 3, 2, 4)


class ValidationTests(SimpleTestCase):

    def setUp(self):
        self.model = builtin_game('fig4')

    def test_gamma_out_of_range(self):
        violations = validate_model(replace(self.model, gamma=1.0))
        self.assertEqual(len(violations), 1)
        self.assertTrue(violations[0].startswith('gamma out of range'))

    def test_true_state_missing(self):
        sets = (((1,), (0, 1)), ((0, 1), (0, 1)))
        violations = validate_model(self.model.with_perturbation_sets(sets))
        self.assertEqual(violations, ['true state s1 not in P^1_{s1}'])

    def test_repeated_perturbation_member(self):
        sets = (((0, 1, 1), (0, 1)), ((0, 1), (0, 1)))
        model = self.model.with_perturbation_sets(sets)
        self.assertEqual(model.perturbation_sets[0][0], (0, 1, 1))
        self.assertEqual(validate_model(model), ['P^1_{s1} has a duplicate entry s2'])

    def test_initial_distribution(self):
        violations = validate_model(self.model.with_initial([0.7, 0.7]))
        self.assertEqual(len(violations), 1)
        self.assertIn('initial_dist sums to', violations[0])

    def test_adversary_support(self):
        model = self.model.with_degenerate_perturbations()
        violations = adversary_violations(model, AdversaryPolicy.uniform(self.model))
        self.assertEqual(len(violations), 4)


class PolicyTests(SimpleTestCase):

    def setUp(self):
        self.model = builtin_game('fig4')

    def test_from_tables_rejects_bad_rows(self):
        with self.assertRaises(ModelValidationError) as caught:
            AgentPolicy.from_tables(self.model, [[[0.5, 0.6], [1, 0]], [[1, 0], [1, 0]]])
        self.assertEqual(len(caught.exception.violations), 1)
        self.assertTrue(caught.exception.violations[0].startswith('pi^1(.|s1) sums to 1.1'))

    def test_shape_mismatch(self):
        policy = AgentPolicy((np.ones((2, 3)) / 3, np.ones((2, 2)) / 2))
        with self.assertRaises(DimensionMismatchError):
            policy.check_shape(self.model)

    def test_model_shape_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            self.model.with_reward(np.zeros((2, 2)))

    def test_adversary_constructors(self):
        np.testing.assert_array_equal(AdversaryPolicy.uniform(self.model)[0], np.full((2, 2), 0.5))
        swap = AdversaryPolicy.deterministic(self.model, [[1, 0], [1, 0]])
        np.testing.assert_array_equal(swap[1], [[0, 1], [1, 0]])

    def test_mixing(self):
        same = builtin_policy('always_same', self.model)
        differ = builtin_policy('always_differ', self.model)
        mixed = differ.mixed_with(same, 0.25)
        np.testing.assert_allclose(mixed[1], [[0.25, 0.75], [0.25, 0.75]])
        self.assertFalse(mixed.is_deterministic())

    def test_tables_are_read_only(self):
        policy = AgentPolicy.uniform(self.model)
        with self.assertRaises(ValueError):
            policy[0][0, 0] = 1.0

    def test_with_initial_point_mass(self):
        np.testing.assert_array_equal(self.model.with_initial('s2').initial_dist, [0.0, 1.0])


class TableTests(SimpleTestCase):

    def test_value_table_lookup(self):
        table = ValueTable(('s1', 's2'), [1.5, -2.0])
        self.assertEqual(table['s2'], -2.0)
        self.assertEqual(table[0], 1.5)
        self.assertEqual(table.as_dict(), {'s1': 1.5, 's2': -2.0})
        self.assertEqual(repr(table), 'ValueTable(s1=1.500000, s2=-2.000000)')

    def test_occupancy_total(self):
        self.assertAlmostEqual(OccupancyTable(('a', 'b'), [40.0, 60.0]).total, 100.0)

    def test_q_table_by_name(self):
        values = np.arange(8.0).reshape(2, 2, 2)
        table = QTable(('s1', 's2'), (('a1', 'a2'), ('b1', 'b2')), values)
        self.assertEqual(table['s2', ('a1', 'b2')], 5.0)
        self.assertEqual(table[0, (1, 1)], 3.0)
