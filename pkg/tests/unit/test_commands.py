"""Unit tests for subcommand dispatch and exit codes."""

import io
import unittest
import sys
import os
import tempfile
from types import SimpleNamespace
from unittest.mock import Mock, patch

import numpy as np
import yaml

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from trimode.cli import build_parser
from trimode.commands import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, CommandRunner, occupation_code
from trimode.config import Config
from trimode.circuit import CircuitParams
from trimode.errors import BasisTruncationError
from trimode.fitting import BootstrapSummary, FitResult
from trimode.export import read_csv_body, read_metadata
from trimode.resonator import ChiProfile, DispersiveReport
from trimode.validation import FAIL, PASS, SKIP, Verdict


LIGHT = CircuitParams(c12=20.0, c13=40.0, c23=40.0, c01=4.0, c02=4.0, c03=4.0,
                      ej1=15.0, ej2=15.0, ej3_sum=15.0)

LIGHT_CONFIG = {
    'circuit': {'c12': 20.0, 'c13': 40.0, 'c23': 40.0, 'c0': 4.0,
                'ej1': 15.0, 'ej2': 15.0, 'ej3_sum': 15.0},
    'basis': {'n_max': 4, 'n_levels': 8},
    'effective': {'cutoff': 4},
}


class TestOccupationCode(unittest.TestCase):
    """Test cases for branch codes."""

    def test_code(self):
        """Test that occupations render as digit strings."""
        self.assertEqual(occupation_code((0, 1, 0)), '010')
        self.assertEqual(occupation_code((2, 0, 1)), '201')


class TestCommandRunner(unittest.TestCase):
    """Test cases for the CommandRunner exit codes."""

    def setUp(self):
        """Set up test fixtures."""
        self.runner = CommandRunner(Config())
        self.stderr = patch('sys.stderr', new_callable=io.StringIO)
        self.err = self.stderr.start()

    def tearDown(self):
        """Clean up test fixtures."""
        self.stderr.stop()

    def args(self, *argv):
        return build_parser().parse_args(list(argv))

    def test_unknown_command(self):
        """Test that an unknown command is an input error."""
        args = SimpleNamespace(command='plot')
        self.assertEqual(self.runner.run(args), EXIT_INPUT)
        self.assertIn('unknown command', self.err.getvalue())

    def test_bad_grid_is_input_error(self):
        """Test that a malformed --grid exits with 1."""
        self.assertEqual(self.runner.run(self.args('spectrum', '--grid', '0:0.5')), EXIT_INPUT)
        self.assertIn('START:STOP:COUNT', self.err.getvalue())

    @patch.object(CommandRunner, 'cmd_spectrum')
    def test_numerical_error_exit_code(self, mock_handler):
        """Test that a numerical failure exits with 2."""
        mock_handler.side_effect = BasisTruncationError('increase n_max above 3')
        self.assertEqual(self.runner.run(self.args('spectrum')), EXIT_NUMERICAL)
        self.assertIn('increase n_max', self.err.getvalue())

    @patch.object(CommandRunner, 'cmd_spectrum')
    def test_missing_file_is_input_error(self, mock_handler):
        """Test that a missing input file exits with 1."""
        mock_handler.side_effect = FileNotFoundError('observations.csv')
        self.assertEqual(self.runner.run(self.args('spectrum')), EXIT_INPUT)

    @patch.object(CommandRunner, 'cmd_decoherence')
    def test_handler_receives_run_config(self, mock_handler):
        """Test that command-line overrides reach the handler's run configuration."""
        mock_handler.return_value = EXIT_OK
        code = self.runner.run(self.args('decoherence', '--seed', '5', '--nmax', '6', '--out', 'results'))

        self.assertEqual(code, EXIT_OK)
        run, args = mock_handler.call_args[0]
        self.assertEqual(run.seed, 5)
        self.assertEqual(run.basis.n_max, 6)
        self.assertEqual(run.output_dir, 'results')
        self.assertEqual(args.command, 'decoherence')

    @patch('trimode.commands.build_run_config')
    def test_chi_without_resonator(self, mock_build):
        """Test that chi needs a resonator section."""
        mock_build.return_value = Mock(resonator=None)
        self.assertEqual(self.runner.run(self.args('chi')), EXIT_INPUT)
        self.assertIn('resonator', self.err.getvalue())

    @patch('trimode.commands.run_validation')
    def test_validate_exit_codes(self, mock_validation):
        """Test that validate exits 2 only when a check fails."""
        with patch('sys.stdout', new_callable=io.StringIO) as out:
            mock_validation.return_value = [Verdict('a', PASS), Verdict('b', SKIP, 'no resonator')]
            self.assertEqual(self.runner.run(self.args('validate')), EXIT_OK)
            mock_validation.return_value = [Verdict('a', PASS), Verdict('b', FAIL, 'too large')]
            self.assertEqual(self.runner.run(self.args('validate')), EXIT_NUMERICAL)

        self.assertIn('SKIP b: no resonator', out.getvalue())
        self.assertIn('FAIL b: too large', out.getvalue())
        self.assertIn('1 of 2 checks passed or skipped', out.getvalue())

    @patch('trimode.commands.fit_parameters')
    def test_fit_input_error(self, mock_fit):
        """Test that an unreadable observation file exits with 1 before fitting."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, 'obs.csv')
            with open(path, 'w') as f:
                f.write('kind,flux,label,value,weight\nfrequency,0.0,A,not-a-number,1\n')
            self.assertEqual(self.runner.run(self.args('fit', path)), EXIT_INPUT)
        mock_fit.assert_not_called()


class TestSpectrumCommand(unittest.TestCase):
    """Test cases for the spectrum command end to end."""

    def setUp(self):
        """Set up a light-device configuration in a temporary directory."""
        self.temp_dir = tempfile.TemporaryDirectory()
        config_path = os.path.join(self.temp_dir.name, 'trimode.yml')
        with open(config_path, 'w') as f:
            yaml.dump(LIGHT_CONFIG, f)
        self.runner = CommandRunner(Config(config_path))
        self.out = os.path.join(self.temp_dir.name, 'out')

    def tearDown(self):
        """Clean up test fixtures."""
        self.temp_dir.cleanup()

    def test_spectrum_csv(self):
        """Test that spectrum writes all three variants with metadata."""
        args = build_parser().parse_args(['spectrum', '--out', self.out, '--grid', '0:0.1:2'])
        with patch('sys.stdout', new_callable=io.StringIO):
            code = self.runner.run(args)

        self.assertEqual(code, EXIT_OK)
        path = os.path.join(self.out, 'spectrum.csv')
        metadata = read_metadata(path)
        self.assertEqual(metadata['command'], 'spectrum')
        self.assertEqual(len(metadata['config_hash']), 64)

        rows = read_csv_body(path)
        self.assertEqual({row['variant'] for row in rows}, {'exact', 'effective_coupled', 'effective_bare'})
        self.assertEqual({row['flux'] for row in rows}, {'0', '0.1'})
        exact_at_zero = [row for row in rows if row['variant'] == 'exact' and row['flux'] == '0']
        self.assertEqual(len(exact_at_zero), 7)
        self.assertIn('010', {row['branch'] for row in exact_at_zero})


class TestReportCommands(unittest.TestCase):
    """Test cases for the chi and fit outputs with the computations patched out."""

    def setUp(self):
        """Set up a runner writing into a temporary directory."""
        self.temp_dir = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.temp_dir.name, 'out')
        self.runner = CommandRunner(Config())
        self.stdout = patch('sys.stdout', new_callable=io.StringIO)
        self.stdout.start()

    def tearDown(self):
        """Clean up test fixtures."""
        self.stdout.stop()
        self.temp_dir.cleanup()

    def fake_fit(self, bootstrap=None):
        return FitResult(
            params=LIGHT, resonator=None, free=('c12', 'ej1'),
            predictions=np.array([4.7, -110.0]), residuals=np.array([0.01, -2.0]),
            cost=0.25, converged=True, iterations=42, message='simplex converged',
            verification_cost=0.3, bootstrap=bootstrap,
        )

    def observation_file(self):
        path = os.path.join(self.temp_dir.name, 'obs.csv')
        with open(path, 'w') as f:
            f.write('kind,flux,label,value,weight\nfrequency,0.0,A,4.71,\nself_kerr,0.0,A,-112,\n')
        return path

    @patch('trimode.commands.chi_flux_profile')
    def test_chi_csv(self, mock_profile):
        """Test the chi columns for modes A and B."""
        report = DispersiveReport(
            chi_total={'A': -0.01, 'B': -0.7}, chi_direct={'A': 0.0, 'B': -0.6},
            chi_indirect={'A': -0.01, 'B': -0.1}, g={'A': 1.0, 'B': 20.0},
            delta={'A': -2.0, 'B': -3.0}, chi_general={'A': -0.011, 'B': -0.71},
        )
        mock_profile.return_value = ChiProfile(np.array([0.0, 0.25]), [report, report])

        code = self.runner.run(build_parser().parse_args(['chi', '--out', self.out, '--grid', '0:0.25:2']))

        self.assertEqual(code, EXIT_OK)
        rows = read_csv_body(os.path.join(self.out, 'chi.csv'))
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[1]['flux'], '0.25')
        self.assertEqual(rows[0]['chi_B_total'], '-0.7')
        self.assertEqual(rows[0]['chi_A_indirect'], '-0.01')
        self.assertEqual(rows[0]['chi_B_general'], '-0.71')
        self.assertEqual(rows[0]['g_B'], '20')

    @patch('trimode.commands.decoherence_budget')
    @patch('trimode.commands.dispersive_report')
    @patch('trimode.commands.flux_sweep')
    def test_decoherence_writes_budget_and_purcell_curve(self, mock_sweep, mock_report, mock_budget):
        """Test that the budget and the Purcell curve over the default detuning grid are written."""
        mock_sweep.return_value = SimpleNamespace(flux=np.array([0.0, 0.5]), solutions=[Mock(), Mock()])
        mock_report.return_value = DispersiveReport(
            chi_total={}, chi_direct={}, chi_indirect={}, g={'A': 0.0, 'B': 20.0}, delta={},
        )
        mock_budget.return_value = [{'flux': 0.0, 'branch': 'B', 't2_limit_n0': 12.5}]

        code = self.runner.run(build_parser().parse_args(['decoherence', '--out', self.out, '--grid', '0:0.5:2']))

        self.assertEqual(code, EXIT_OK)
        budget = read_csv_body(os.path.join(self.out, 'decoherence.csv'))
        self.assertEqual(budget, [{'flux': '0', 'branch': 'B', 't2_limit_n0': '12.5'}])
        path = os.path.join(self.out, 'purcell.csv')
        self.assertEqual(read_metadata(path)['command'], 'decoherence')
        curve = read_csv_body(path)
        self.assertEqual(len(curve), 2 * 2 * 12)
        row = next(r for r in curve if r['branch'] == 'B' and r['delta_GHz'] == '-2' and r['flux'] == '0.5')
        self.assertAlmostEqual(float(row['t1_purcell']), (2000.0 / 20.0) ** 2 / (2 * np.pi * 1.32), places=4)
        self.assertEqual({r['t1_purcell'] for r in curve if r['branch'] == 'A'}, {'unbounded'})

    @patch('trimode.commands.bootstrap_uncertainty')
    @patch('trimode.commands.fit_parameters')
    def test_fit_report(self, mock_fit, mock_bootstrap):
        """Test the fit report without bootstrap."""
        mock_fit.return_value = self.fake_fit()

        code = self.runner.run(build_parser().parse_args(['fit', self.observation_file(), '--out', self.out]))

        self.assertEqual(code, EXIT_OK)
        mock_bootstrap.assert_not_called()
        path = os.path.join(self.out, 'fit_report.yaml')
        self.assertEqual(read_metadata(path)['command'], 'fit')
        with open(path) as f:
            report = yaml.safe_load(f)
        self.assertTrue(report['converged'])
        self.assertEqual(report['iterations'], 42)
        self.assertEqual(report['free_parameters'], {'c12': 20.0, 'ej1': 15.0})
        self.assertEqual(report['observations'][1]['label'], 'A')
        self.assertEqual(report['observations'][1]['residual'], -2.0)
        self.assertNotIn('bootstrap', report)
        self.assertFalse(os.path.exists(os.path.join(self.out, 'bootstrap_samples.csv')))

    @patch('trimode.commands.bootstrap_uncertainty')
    @patch('trimode.commands.fit_parameters')
    def test_fit_with_bootstrap(self, mock_fit, mock_bootstrap):
        """Test that --bootstrap runs the resampling and writes the samples."""
        summary = BootstrapSummary(
            names=('c12', 'ej1'), samples=np.array([[20.1, 15.2], [19.9, 14.8]]),
            mean=np.array([20.0, 15.0]), std=np.array([0.1, 0.2]), requested=2, failures=0,
        )
        fit = self.fake_fit(bootstrap=summary)
        mock_fit.return_value = fit

        args = build_parser().parse_args(['fit', self.observation_file(), '--out', self.out,
                                          '--bootstrap', '2', '--seed', '9'])
        self.assertEqual(self.runner.run(args), EXIT_OK)

        self.assertEqual(mock_bootstrap.call_args.kwargs['n_samples'], 2)
        self.assertEqual(mock_bootstrap.call_args.kwargs['seed'], 9)
        samples = read_csv_body(os.path.join(self.out, 'bootstrap_samples.csv'))
        self.assertEqual(samples[1], {'sample': '1', 'c12': '19.9', 'ej1': '14.8'})
        with open(os.path.join(self.out, 'fit_report.yaml')) as f:
            report = yaml.safe_load(f)
        self.assertEqual(report['bootstrap']['parameters']['ej1'], {'mean': 15.0, 'std': 0.2})


def linear_forward(params, res, observations, cfg=None):
    """Stand-in for the eigensolver over (c12, ej1)."""
    return np.array([params.ej1 / 3.0, params.c12 / 10.0, -5.0 * params.c12])


class TestFitReproducibility(unittest.TestCase):
    """Test cases for repeated fit runs with a fixed seed."""

    def setUp(self):
        """Set up a two-parameter fit configuration and observations."""
        self.temp_dir = tempfile.TemporaryDirectory()
        config = dict(LIGHT_CONFIG, fit={'free': ['c12', 'ej1']})
        config_path = os.path.join(self.temp_dir.name, 'trimode.yml')
        with open(config_path, 'w') as f:
            yaml.dump(config, f)
        self.runner = CommandRunner(Config(config_path))
        self.out = os.path.join(self.temp_dir.name, 'out')
        self.observations = os.path.join(self.temp_dir.name, 'obs.csv')
        with open(self.observations, 'w') as f:
            f.write('kind,flux,label,value,weight\n'
                    'frequency,0.0,A,4.02,\nfrequency,0.0,B,1.98,\nself_kerr,0.0,A,-101,\n')

    def tearDown(self):
        """Clean up test fixtures."""
        self.temp_dir.cleanup()

    def run_fit(self):
        args = build_parser().parse_args(['fit', self.observations, '--out', self.out,
                                          '--bootstrap', '4', '--seed', '11'])
        with patch('sys.stdout', new_callable=io.StringIO):
            self.assertEqual(self.runner.run(args), EXIT_OK)
        outputs = {}
        for name in ('fit_report.yaml', 'bootstrap_samples.csv'):
            with open(os.path.join(self.out, name), 'rb') as f:
                outputs[name] = f.read()
        return outputs

    @patch('trimode.fitting.simulate_observables', side_effect=linear_forward)
    def test_same_seed_gives_identical_files(self, mock_simulate):
        """Test that two fit runs with the same seed write byte-identical outputs."""
        first = self.run_fit()
        second = self.run_fit()
        self.assertEqual(first, second)
        self.assertEqual(len(read_csv_body(os.path.join(self.out, 'bootstrap_samples.csv'))), 4)


if __name__ == '__main__':
    unittest.main()
