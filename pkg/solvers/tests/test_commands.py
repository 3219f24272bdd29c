import csv
import io
import os
from contextlib import redirect_stderr, redirect_stdout
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from games.builtins import builtin_game
from games.parser import serialize_model
from solvers.cli import run
from solvers.models import SolveRun

from .helpers import scratch_dir

INVALID_MODEL = """\
samg 1
agents 1
states only
actions 1 stay
gamma 0.5
transition only stay only 0.9
"""


def read_report(path):
    with open(path, encoding='utf-8') as handle:
        return dict(line.split(' = ', 1) for line in handle.read().splitlines())


class SamgCommandTests(SimpleTestCase):

    def setUp(self):
        self.directory = scratch_dir(self)
        self.out = os.path.join(self.directory, 'report.txt')

    def samg(self, *args):
        stdout = io.StringIO()
        call_command('samg', *args, stdout=stdout, stderr=io.StringIO())
        return stdout.getvalue()

    def write(self, name, text):
        path = os.path.join(self.directory, name)
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(text)
        return path

    def test_eval(self):
        output = self.samg('eval', '--builtin', 'fig4', '--policy', 'builtin:coordination', '--out', self.out)
        self.assertIn('J = 100.000000', output)
        report = read_report(self.out)
        self.assertAlmostEqual(float(report['eval.J']), 100.0, places=6)
        self.assertAlmostEqual(float(report['eval.occupancy.s1']), 0.5, places=6)

    def test_eval_reads_model_and_policy_files(self):
        model = self.write('fig4.samg', serialize_model(builtin_game('fig4')))
        policy = self.write('differ.policy', 'policy agent 1 s1 a1 1\npolicy agent 1 s2 a1 1\n'
                                             'policy agent 2 s1 a2 1\npolicy agent 2 s2 a2 1\n')
        self.samg('eval', '--model', model, '--policy', policy, '--out', self.out)
        report = read_report(self.out)
        self.assertAlmostEqual(float(report['eval.V.s2']), 100.0, places=6)

    def test_worst_case(self):
        self.samg('worst-case', '--builtin', 'fig4', '--policy', 'builtin:always_differ', '--out', self.out)
        report = read_report(self.out)
        self.assertAlmostEqual(float(report['worst_case.V.s1']), 0.0, places=6)
        self.assertAlmostEqual(float(report['worst_case.V.s2']), 100.0, places=6)
        self.assertAlmostEqual(float(report['worst_case.F']), 50.0, places=6)
        self.assertIn('worst_case.adversary.chi.2.s2.s1', report)

    def test_robust_value_for_one_agent(self):
        self.samg('robust-value', '--builtin', 'fig5', '--agent', '2', '--out', self.out)
        report = read_report(self.out)
        self.assertIn('robust_value.agent2.V.s1', report)
        self.assertNotIn('robust_value.agent1.V.s1', report)

    def test_robust_value_rejects_missing_agent(self):
        with self.assertRaises(CommandError) as caught:
            self.samg('robust-value', '--builtin', 'fig5', '--agent', '3')
        self.assertEqual(caught.exception.returncode, 2)

    def test_nash_verify(self):
        output = self.samg('nash-verify', '--builtin', 'fig5', '--policy', 'builtin:always_same', '--out', self.out)
        self.assertIn('NOT SATISFIED', output)
        report = read_report(self.out)
        self.assertEqual(report['nash_verify.satisfied'], 'false')
        self.assertEqual(report['nash_verify.satisfied.s1'], 'true')
        self.assertEqual(report['nash_verify.eps'], '9.9999999999999995e-07')

    def test_scan(self):
        self.samg('scan', '--builtin', 'fig4', '--grid', '2', '--out', self.out)
        report = read_report(self.out)
        self.assertEqual(report['scan.profiles'], '1296')
        self.assertEqual(report['scan.resolution'], '2')

    def test_subgrad_writes_a_trace(self):
        trace = os.path.join(self.directory, 'trace.csv')
        self.samg('subgrad', '--builtin', 'fig4', '--init', 's2', '--policy', 'builtin:always_differ',
                  '--iters', '3', '--trace', trace, '--out', self.out)
        with open(trace, newline='', encoding='utf-8') as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ['iter', 'objective', 'residual'])
        self.assertEqual(len(rows), 5)
        self.assertAlmostEqual(float(read_report(self.out)['subgrad.F']), 100.0, places=6)

    def test_gda_with_restarts(self):
        self.samg('gda', '--builtin', 'fig4', '--iters', '2', '--restarts', '2', '--seed', '4', '--out', self.out)
        report = read_report(self.out)
        self.assertIn(report['gda.restart'], ('0', '1'))
        self.assertEqual(report['gda.seed'], '4')
        self.assertEqual(report['gda.iterations'], '2')

    def test_enumerate_policies(self):
        self.samg('enumerate', '--builtin', 'fig4', '--init', 's2', '--out', self.out)
        report = read_report(self.out)
        self.assertEqual(report['enumerate.count'], '16')
        self.assertAlmostEqual(float(report['enumerate.F']), 100.0, places=6)
        self.assertEqual(report['enumerate.witness.pi.2.s1.a2'], '1')

    def test_enumerate_adversaries(self):
        self.samg('enumerate', '--builtin', 'fig4', '--policy', 'builtin:always_differ', '--out', self.out)
        report = read_report(self.out)
        self.assertEqual(report['enumerate.count'], '16')
        self.assertEqual(report['enumerate.simultaneous'], 'true')

    def test_simulate(self):
        self.samg('simulate', '--builtin', 'fig4', '--init', 's1', '--policy', 'builtin:always_same',
                  '--episodes', '20', '--horizon', '3000', '--out', self.out)
        report = read_report(self.out)
        self.assertAlmostEqual(float(report['simulate.mean']), float(report['simulate.exact']), places=6)
        self.assertEqual(report['simulate.episodes'], '20')

    def test_counterexamples(self):
        output = self.samg('counterexamples', '--out', self.out)
        self.assertIn('All 9 checks passed', output)
        report = read_report(self.out)
        self.assertEqual(report['counterexamples.failed'], '0')
        self.assertEqual(report['counterexamples.check9.passed'], 'true')

    def test_unknown_builtin(self):
        with self.assertRaises(CommandError) as caught:
            self.samg('eval', '--builtin', 'fig9')
        self.assertEqual(caught.exception.returncode, 2)

    def test_invalid_model(self):
        with self.assertRaises(CommandError) as caught:
            self.samg('eval', '--model', self.write('bad.samg', INVALID_MODEL))
        self.assertEqual(caught.exception.returncode, 1)

    def test_negative_tolerance(self):
        with self.assertRaises(CommandError) as caught:
            self.samg('worst-case', '--builtin', 'fig4', '--tol', '-1')
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn('--tol', str(caught.exception))

    def test_model_source_required(self):
        with self.assertRaises(CommandError) as caught:
            self.samg('eval')
        self.assertEqual(caught.exception.returncode, 2)


class ExitStatusTests(SimpleTestCase):

    def setUp(self):
        self.directory = scratch_dir(self)

    def run_samg(self, *argv):
        stderr = io.StringIO()
        with redirect_stdout(io.StringIO()), redirect_stderr(stderr):
            code = run(list(argv))
        return code, stderr.getvalue()

    def test_success(self):
        self.assertEqual(self.run_samg('worst-case', '--builtin', 'fig4')[0], 0)

    def test_missing_model_file(self):
        code, stderr = self.run_samg('eval', '--model', os.path.join(self.directory, 'missing.samg'))
        self.assertEqual(code, 2)
        self.assertIn('missing.samg', stderr)

    def test_unknown_flag(self):
        self.assertEqual(self.run_samg('eval', '--builtin', 'fig4', '--bogus')[0], 2)

    def test_unknown_command(self):
        self.assertEqual(self.run_samg('solve', '--builtin', 'fig4')[0], 2)

    def test_invalid_model(self):
        path = os.path.join(self.directory, 'bad.samg')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(INVALID_MODEL)
        code, stderr = self.run_samg('eval', '--model', path)
        self.assertEqual(code, 1)
        self.assertIn('sums to 0.9', stderr)


class RecordTests(TestCase):

    def test_record_stores_the_report(self):
        call_command('samg', 'worst-case', '--builtin', 'fig4', '--policy', 'builtin:always_differ',
                     '--record', stdout=io.StringIO())
        run = SolveRun.objects.get()
        self.assertEqual(run.status, 'success')
        self.assertEqual(run.exit_code, 0)
        self.assertEqual(run.model_source, 'fig4')
        self.assertEqual(run.argv, ['--builtin', 'fig4', '--policy', 'builtin:always_differ'])
        self.assertAlmostEqual(float(run.report_entries()['worst_case.F']), 50.0, places=6)

    def test_record_failure(self):
        with self.assertRaises(CommandError):
            call_command('samg', 'robust-value', '--builtin', 'fig4', '--agent', '5', '--record',
                         stdout=io.StringIO())
        run = SolveRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertEqual(run.exit_code, 2)
        self.assertIn('--agent 5', run.error)

    @mock.patch('solvers.tasks.run_samg_command.delay')
    def test_background_queues_the_run(self, delay):
        out = io.StringIO()
        call_command('samg', 'worst-case', '--builtin', 'fig4', '--policy', 'builtin:always_differ',
                     '--background', stdout=out)
        run = SolveRun.objects.get()
        self.assertEqual(run.status, 'pending')
        self.assertEqual(run.argv, ['--builtin', 'fig4', '--policy', 'builtin:always_differ'])
        self.assertEqual(run.report, '')
        delay.assert_called_once_with(run.pk)
        self.assertIn(f'Queued as run {run.pk}', out.getvalue())
