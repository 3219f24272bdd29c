"""
Management command to evaluate, solve and verify state-adversarial Markov games.
Usage: python manage.py samg <command> [--model PATH | --builtin NAME] [options]
The `samg` launcher at the project root maps `samg <command> ...` onto this command.
"""
import logging
import time
from dataclasses import dataclass, fields

from django.core.management.base import BaseCommand, CommandError

from games import conf
from games.builtins import builtin_game, builtin_policy
from games.exceptions import ModelSyntaxError, ModelValidationError, SamgError
from games.parser import parse_model, parse_policy, serialize_policy
from games.samg import AdversaryPolicy, AgentPolicy
from solvers import maximin
from solvers.adversary import enumerate_deterministic_adversaries, optimal_adversary
from solvers.counterexamples import counterexample_suite
from solvers.equilibrium import nonexistence_scan, robust_nash_verify
from solvers.evaluation import evaluate, expected_value, occupancy, simulate
from solvers.models import SolveRun
from solvers.reports import Report, format_table, human_number, write_trace
from solvers.robust_value import robust_fixed_point

logger = logging.getLogger(__name__)

COMMANDS = (
    'eval', 'worst-case', 'robust-value', 'nash-verify', 'scan',
    'gda', 'subgrad', 'enumerate', 'simulate', 'counterexamples',
)
VALIDATION_FAILURE = 1
USAGE_ERROR = 2


@dataclass(frozen=True)
class RunConfig:
    """Validated options for one invocation."""
    command: str
    model_path: str = None
    builtin: str = None
    policy_path: str = None
    adversary_path: str = None
    init: str = None
    tol: float = 1e-8
    eps: float = None
    eta: float = 0.05
    eta_adversary: float = None
    iters: int = 10_000
    seed: int = 0
    episodes: int = 10_000
    horizon: int = 2000
    grid: int = 11
    agent: int = None
    restarts: int = 1
    out: str = None
    trace: str = None
    record: bool = False
    background: bool = False

    FLAGS = {
        'model_path': '--model', 'builtin': '--builtin', 'policy_path': '--policy',
        'adversary_path': '--adversary', 'init': '--init', 'tol': '--tol', 'eps': '--eps',
        'eta': '--eta', 'eta_adversary': '--eta-adversary', 'iters': '--iters', 'seed': '--seed',
        'episodes': '--episodes', 'horizon': '--horizon', 'grid': '--grid', 'agent': '--agent',
        'restarts': '--restarts', 'out': '--out', 'trace': '--trace',
    }

    @classmethod
    def from_options(cls, options):
        values = {f.name: options.get(f.name) for f in fields(cls) if options.get(f.name) is not None}
        config = cls(**values)
        config.check()
        return config

    def check(self):
        positive = ('tol', 'eta', 'episodes', 'horizon', 'restarts')
        for name in positive:
            if getattr(self, name) <= 0:
                raise CommandError(f'{self.FLAGS[name]} must be positive', returncode=USAGE_ERROR)
        for name in ('eps', 'eta_adversary'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise CommandError(f'{self.FLAGS[name]} must not be negative', returncode=USAGE_ERROR)
        if self.iters < 0 or self.seed < 0:
            flag = '--iters' if self.iters < 0 else '--seed'
            raise CommandError(f'{flag} must not be negative', returncode=USAGE_ERROR)
        if self.grid < 2:
            raise CommandError('--grid must be at least 2', returncode=USAGE_ERROR)
        if self.agent is not None and self.agent < 1:
            raise CommandError('--agent is 1-based', returncode=USAGE_ERROR)
        if self.command != 'counterexamples' and not (self.model_path or self.builtin):
            raise CommandError('one of --model or --builtin is required', returncode=USAGE_ERROR)

    @property
    def model_source(self):
        return self.builtin or self.model_path or ''

    def to_argv(self):
        argv = []
        for name, flag in self.FLAGS.items():
            value = getattr(self, name)
            if value is not None and value != getattr(RunConfig, name, None):
                argv += [flag, str(value)]
        return argv


class Command(BaseCommand):
    help = 'Evaluate, solve and verify finite state-adversarial Markov games'
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('command', choices=COMMANDS, help='What to run')
        source = parser.add_mutually_exclusive_group()
        source.add_argument('--model', dest='model_path', metavar='PATH', help='Model file')
        source.add_argument('--builtin', metavar='NAME', help='Builtin game: fig4 or fig5')
        parser.add_argument('--policy', dest='policy_path', metavar='PATH',
                            help='Agent policy file, or builtin:NAME (default: uniform)')
        parser.add_argument('--adversary', dest='adversary_path', metavar='PATH',
                            help='Adversary policy file (default: no perturbation)')
        parser.add_argument('--init', metavar='STATE', help='Start every episode in STATE')
        parser.add_argument('--tol', type=float, default=conf.setting('SAMG_DEFAULT_TOL', 1e-8))
        parser.add_argument('--eps', type=float, default=None,
                            help='Equilibrium tolerance (default 1e-6 for nash-verify, 1e-3 for scan)')
        parser.add_argument('--eta', type=float, default=conf.setting('SAMG_DEFAULT_ETA', 0.05))
        parser.add_argument('--eta-adversary', type=float, default=None,
                            help='Adversary step size for gda (default: --eta)')
        parser.add_argument('--iters', type=int, default=conf.setting('SAMG_DEFAULT_ITERS', 10_000))
        parser.add_argument('--seed', type=int, default=conf.setting('SAMG_DEFAULT_SEED', 0))
        parser.add_argument('--episodes', type=int, default=conf.setting('SAMG_DEFAULT_EPISODES', 10_000))
        parser.add_argument('--horizon', type=int, default=conf.setting('SAMG_DEFAULT_HORIZON', 2000))
        parser.add_argument('--grid', type=int, default=conf.setting('SAMG_DEFAULT_GRID', 11))
        parser.add_argument('--agent', type=int, default=None, help='1-based agent for robust-value')
        parser.add_argument('--restarts', type=int, default=1, help='Concurrent restarts for gda/subgrad')
        parser.add_argument('--out', metavar='PATH', help='Write the key = value report here')
        parser.add_argument('--trace', metavar='PATH', help='Write the iteration trace CSV here')
        parser.add_argument('--record', action='store_true', help='Store the run in the database')
        parser.add_argument('--background', action='store_true',
                            help='Store the run and queue it for a Celery worker instead of solving here')

    def handle(self, *args, **options):
        config = RunConfig.from_options(options)
        if config.background:
            self.enqueue(config)
            return
        run = None
        if config.record:
            run = SolveRun.objects.create(
                command=config.command,
                argv=config.to_argv(),
                model_source=config.model_source,
                seed=config.seed,
                status='running',
            )
        started = time.monotonic()
        try:
            report = self.dispatch(config)
        except CommandError as e:
            if run:
                run.mark_finished(e.returncode, error=str(e), wall_time=time.monotonic() - started)
            raise
        text = report.render()
        if config.out:
            try:
                report.write(config.out)
            except OSError as e:
                raise CommandError(f'cannot write report to "{config.out}": {e.strerror}', returncode=USAGE_ERROR)
        if run:
            run.mark_finished(0, report=text, wall_time=time.monotonic() - started)
            self.stdout.write(f'Recorded as run {run.pk}')

    def enqueue(self, config):
        from solvers.tasks import run_samg_command

        run = SolveRun.objects.create(
            command=config.command,
            argv=config.to_argv(),
            model_source=config.model_source,
            seed=config.seed,
        )
        run_samg_command.delay(run.pk)
        logger.info(f'Queued solver run {run.pk}: {config.command}')
        self.stdout.write(f'Queued as run {run.pk}')

    def dispatch(self, config):
        handler = getattr(self, 'handle_' + config.command.replace('-', '_'))
        if config.command == 'counterexamples':
            return handler(config)
        model = self.load_model(config)
        try:
            return handler(config, model)
        except (ModelSyntaxError, ModelValidationError) as e:
            self.report_violations(e)
            raise CommandError('invalid policy file', returncode=VALIDATION_FAILURE)
        except SamgError as e:
            raise CommandError(str(e), returncode=VALIDATION_FAILURE)
        except ValueError as e:
            raise CommandError(str(e), returncode=USAGE_ERROR)

    # Loading

    def report_violations(self, error):
        for violation in getattr(error, 'violations', [str(error)]):
            self.stderr.write(f'  - {violation}')

    def read(self, path, what):
        try:
            with open(path, encoding='utf-8') as handle:
                return handle.read()
        except OSError as e:
            raise CommandError(f'cannot read {what} file "{path}": {e.strerror}', returncode=USAGE_ERROR)

    def load_model(self, config):
        try:
            if config.builtin:
                model = builtin_game(config.builtin)
            else:
                model = parse_model(self.read(config.model_path, 'model'))
            if config.init:
                model = model.with_initial(config.init)
        except (ModelSyntaxError, ModelValidationError) as e:
            self.report_violations(e)
            raise CommandError(f'invalid model "{config.model_source}"', returncode=VALIDATION_FAILURE)
        except (SamgError, KeyError) as e:
            raise CommandError(str(e), returncode=USAGE_ERROR)
        return model

    def load_agent_policy(self, config, model):
        if not config.policy_path:
            return AgentPolicy.uniform(model)
        if config.policy_path.startswith('builtin:'):
            return builtin_policy(config.policy_path.split(':', 1)[1], model)
        return parse_policy(self.read(config.policy_path, 'policy'), model).agent_policy

    def load_adversary(self, config, model):
        if not config.adversary_path:
            return AdversaryPolicy.identity(model)
        return parse_policy(self.read(config.adversary_path, 'adversary'), model).adversary_policy

    # Output helpers

    def table(self, title, table):
        self.stdout.write(format_table(table, title))

    def policy_lines(self, model, agent_policy=None, adversary_policy=None):
        for line in serialize_policy(model, agent_policy, adversary_policy).splitlines():
            self.stdout.write(f'  {line}')

    def add_policy(self, report, key, model, agent_policy=None, adversary_policy=None):
        if agent_policy is not None:
            for i, table in enumerate(agent_policy.tables, start=1):
                for rho, row in enumerate(table):
                    for a, prob in enumerate(row):
                        report.add(f'{key}.pi.{i}.{model.states[rho]}.{model.actions[i - 1][a]}', float(prob))
        if adversary_policy is not None:
            for i, table in enumerate(adversary_policy.tables, start=1):
                for s, row in enumerate(table):
                    for rho, prob in enumerate(row):
                        if rho in model.perturbation_sets[i - 1][s]:
                            report.add(f'{key}.chi.{i}.{model.states[s]}.{model.states[rho]}', float(prob))

    # Commands

    def handle_eval(self, config, model):
        pi, chi = self.load_agent_policy(config, model), self.load_adversary(config, model)
        values = evaluate(model, pi, chi)
        mass = occupancy(model, pi, chi)
        value = expected_value(model, values)
        self.table('State values V:', values)
        self.table('Discounted occupancy d:', mass)
        self.stdout.write(f'J = {human_number(value)}')
        return Report('eval').add_table('V', values).add_table('occupancy', mass).add('J', value)

    def handle_worst_case(self, config, model):
        pi = self.load_agent_policy(config, model)
        values, adversary = optimal_adversary(model, pi, config.tol)
        value = expected_value(model, values)
        self.table('Worst-case values V_bar:', values)
        self.stdout.write(f'F = {human_number(value)}')
        self.stdout.write('Optimal adversary:')
        self.policy_lines(model, adversary_policy=adversary)
        report = Report('worst_case').add_table('V', values).add('F', value)
        self.add_policy(report, 'adversary', model, adversary_policy=adversary)
        return report

    def handle_robust_value(self, config, model):
        pi, chi = self.load_agent_policy(config, model), self.load_adversary(config, model)
        if config.agent is not None and config.agent > model.n_agents:
            raise CommandError(f'--agent {config.agent} exceeds the {model.n_agents} agents', returncode=USAGE_ERROR)
        agents = [config.agent - 1] if config.agent else range(model.n_agents)
        report = Report('robust_value')
        for i in agents:
            solution = robust_fixed_point(model, i, pi, chi, config.tol)
            self.table(f'Robust values for agent {i + 1} ({solution.iterations} sweeps):', solution.values)
            report.add_table(f'agent{i + 1}.V', solution.values).add(f'agent{i + 1}.iterations', solution.iterations)
        return report

    def handle_nash_verify(self, config, model):
        pi, chi = self.load_agent_policy(config, model), self.load_adversary(config, model)
        eps = config.eps if config.eps is not None else conf.setting('SAMG_DEFAULT_EPS', 1e-6)
        verdict = robust_nash_verify(model, pi, chi, eps, config.tol)
        report = Report('nash_verify').add('eps', eps)
        n = model.n_agents
        for state in verdict.states:
            labels = [f'agent{i + 1}' for i in range(n)] + [f'adversary{i + 1}' for i in range(n)]
            gaps = '  '.join(f'{label}={gap:.6f}' for label, gap in zip(labels, state.gaps))
            mark = 'ok' if state.satisfied else 'FAIL'
            self.stdout.write(f'  {state.state}: max gap {state.max_gap:.6f} [{mark}]  {gaps}')
            for label, gap in zip(labels, state.gaps):
                report.add(f'gap.{state.state}.{label}', gap)
            report.add(f'satisfied.{state.state}', state.satisfied)
        outcome = 'SATISFIED' if verdict.satisfied else 'NOT SATISFIED'
        self.stdout.write(f'Stage-wise equilibrium at every state (sufficient condition): {outcome}')
        return report.add('satisfied', verdict.satisfied)

    def handle_scan(self, config, model):
        eps = config.eps if config.eps is not None else conf.setting('SAMG_SCAN_EPS', 1e-3)
        result = nonexistence_scan(model, config.grid, eps, config.tol)
        self.stdout.write(f'Grid profiles scanned: {result.profiles} ({result.label})')
        self.stdout.write(f'Minimum max-state gap: {result.min_gap:.6f}')
        self.table('Minimum gap at each single state:', result.state_minima)
        self.stdout.write('Witness profile:')
        self.policy_lines(model, result.agent_policy, result.adversary_policy)
        report = Report('scan').add('resolution', result.resolution).add('profiles', result.profiles)
        report.add('min_gap', result.min_gap).add('equilibrium_found', result.equilibrium_found)
        report.add_table('state_min_gap', result.state_minima)
        self.add_policy(report, 'witness', model, result.agent_policy, result.adversary_policy)
        return report

    def solve_report(self, config, model, solve_report, namespace):
        self.stdout.write(
            f'{solve_report.solver}: {solve_report.iterations} iterations, '
            f'best iteration {solve_report.best_iteration}, restart {solve_report.restart}'
        )
        self.stdout.write(f'F = {human_number(solve_report.final_objective)}')
        self.stdout.write('Agent policy:')
        self.policy_lines(model, solve_report.agent_policy)
        if config.trace:
            try:
                write_trace(config.trace, solve_report)
            except OSError as e:
                raise CommandError(f'cannot write trace to "{config.trace}": {e.strerror}', returncode=USAGE_ERROR)
        report = Report(namespace).add('iterations', solve_report.iterations)
        report.add('F', solve_report.final_objective).add('objective.final', solve_report.objective_trace[-1])
        report.add('best_iteration', solve_report.best_iteration).add('restart', solve_report.restart)
        report.add('seed', solve_report.seed)
        self.add_policy(report, 'policy', model, solve_report.agent_policy, solve_report.adversary_policy)
        return report

    def handle_gda(self, config, model):
        pi, chi = self.load_agent_policy(config, model), self.load_adversary(config, model)
        eta_chi = config.eta_adversary if config.eta_adversary is not None else config.eta
        result = maximin.solve_with_restarts(
            maximin.gda_solve, model, pi, restarts=config.restarts, seed=config.seed,
            chi0=chi, eta_pi=config.eta, eta_chi=eta_chi, iters=config.iters, tol=config.tol,
        )
        return self.solve_report(config, model, result, 'gda')

    def handle_subgrad(self, config, model):
        pi = self.load_agent_policy(config, model)
        result = maximin.solve_with_restarts(
            maximin.subgradient_solve, model, pi, restarts=config.restarts, seed=config.seed,
            eta=config.eta, iters=config.iters, tol=config.tol,
        )
        return self.solve_report(config, model, result, 'subgrad')

    def handle_enumerate(self, config, model):
        if config.policy_path:
            pi = self.load_agent_policy(config, model)
            result = enumerate_deterministic_adversaries(model, pi)
            self.stdout.write(f'Deterministic adversaries evaluated: {result.count}')
            self.table('Pointwise minimum values:', result.minima)
            label = 'attains every minimum' if result.simultaneous else 'no single adversary attains every minimum'
            self.stdout.write(f'Witness ({label}):')
            self.policy_lines(model, adversary_policy=result.witness)
            report = Report('enumerate').add('count', result.count).add_table('V_min', result.minima)
            report.add('simultaneous', result.simultaneous)
            self.add_policy(report, 'witness', model, adversary_policy=result.witness)
            return report

        result = maximin.enumerate_deterministic_policies(model, config.tol)
        self.stdout.write(f'Deterministic policies evaluated: {result.count}')
        self.stdout.write(f'Best F = {human_number(result.best_value)}')
        self.stdout.write('Witness:')
        self.policy_lines(model, result.witness)
        report = Report('enumerate').add('count', result.count).add('F', result.best_value)
        self.add_policy(report, 'witness', model, result.witness)
        return report

    def handle_simulate(self, config, model):
        pi, chi = self.load_agent_policy(config, model), self.load_adversary(config, model)
        result = simulate(model, pi, chi, config.episodes, config.horizon, config.seed)
        exact = expected_value(model, evaluate(model, pi, chi))
        self.stdout.write(f'Mean return   {human_number(result.mean)}')
        self.stdout.write(f'Std error     {human_number(result.std_error)}')
        self.stdout.write(f'Truncation    {human_number(result.truncation_bound)}')
        self.stdout.write(f'Exact J       {human_number(exact)}')
        report = Report('simulate').add('mean', result.mean).add('std_error', result.std_error)
        report.add('truncation_bound', result.truncation_bound).add('exact', exact)
        return report.add('episodes', result.episodes).add('horizon', result.horizon).add('seed', config.seed)

    def handle_counterexamples(self, config):
        results = counterexample_suite()
        report = Report('counterexamples')
        for k, result in enumerate(results, start=1):
            mark = self.style.SUCCESS('PASS') if result.passed else self.style.ERROR('FAIL')
            self.stdout.write(f'{mark} [{k}] {result.name}')
            self.stdout.write(f'       expected {result.expected}')
            self.stdout.write(f'       observed {result.observed}')
            report.add(f'check{k}.passed', result.passed)
        failed = sum(not r.passed for r in results)
        report.add('failed', failed)
        if failed:
            if config.out:
                report.write(config.out)
            raise CommandError(f'{failed} of {len(results)} checks failed', returncode=VALIDATION_FAILURE)
        self.stdout.write(self.style.SUCCESS(f'All {len(results)} checks passed'))
        return report
