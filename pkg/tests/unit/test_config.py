"""Unit tests for the Config module."""

import unittest
import tempfile
import os
import json
from pathlib import Path
import yaml
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from trimode.config import Config, ConfigSection, FluxGrid, build_run_config, config_hash
from trimode.errors import ConfigError, InputError


LIGHT_CIRCUIT = {
    'c12': 20.0, 'c13': 40.0, 'c23': 40.0, 'c0': 4.0,
    'ej1': 15.0, 'ej2': 15.0, 'ej3_sum': 15.0,
}


class TestConfig(unittest.TestCase):
    """Test cases for the Config class."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Clean up test fixtures."""
        self.temp_dir.cleanup()

    def write_yaml(self, data, name='trimode.yml'):
        path = os.path.join(self.temp_dir.name, name)
        with open(path, 'w') as f:
            yaml.dump(data, f)
        return path

    def test_default_config_initialization(self):
        """Test that Config initializes with the reference device."""
        config = Config()

        self.assertEqual(config.get('circuit.c12'), 25.75)
        self.assertEqual(config.get('circuit.squid_asym'), 0.25)
        self.assertEqual(config.get('resonator.omega_r'), 6.990)
        self.assertEqual(config.get('basis.n_max'), 7)
        self.assertFalse(config.get('debug'))

    def test_config_file_path(self):
        """Test that config uses ~/.trimode.conf by default."""
        config = Config()
        self.assertEqual(config.config_path, str(Path.home() / '.trimode.conf'))

    def test_missing_explicit_path(self):
        """Test that an explicit config path that does not exist raises."""
        with self.assertRaises(FileNotFoundError):
            Config(config_path=os.path.join(self.temp_dir.name, 'absent.yml'))

    def test_yaml_config_file(self):
        """Test loading configuration from a YAML file."""
        path = self.write_yaml({'basis': {'n_max': 5}, 'grid': {'count': 3}, 'debug': True})

        config = Config(config_path=path)

        self.assertEqual(config.get('basis.n_max'), 5)
        self.assertEqual(config.get('basis.n_levels'), 12)
        self.assertEqual(config.get('grid.count'), 3)
        self.assertTrue(config.get('debug'))

    def test_json_config_file(self):
        """Test loading JSON format config."""
        path = os.path.join(self.temp_dir.name, 'trimode.conf')
        with open(path, 'w') as f:
            json.dump({'noise': {'a_phi': 2.0}}, f)

        config = Config(config_path=path)
        self.assertEqual(config.get('noise.a_phi'), 2.0)
        self.assertEqual(config.get('noise.n_initial'), 0.005)

    def test_empty_file_keeps_defaults(self):
        """Test that an empty config file leaves the defaults in place."""
        path = os.path.join(self.temp_dir.name, 'empty.yml')
        Path(path).touch()

        config = Config(config_path=path)
        self.assertEqual(config.get('circuit.ej3_sum'), 29.0)

    def test_circuit_section_replaces_default_device(self):
        """Test that a circuit section with the c0 shorthand replaces the default device."""
        path = self.write_yaml({'circuit': dict(LIGHT_CIRCUIT)})

        config = Config(config_path=path)

        self.assertEqual(config.get('circuit.c01'), 4.0)
        self.assertEqual(config.get('circuit.c03'), 4.0)
        self.assertEqual(config.get('circuit.squid_asym'), 0.0)
        self.assertNotIn('c0', config.get('circuit'))

    def test_circuit_file_reference(self):
        """Test that a string circuit entry loads a file next to the config file."""
        self.write_yaml(dict(LIGHT_CIRCUIT), name='device.yml')
        path = self.write_yaml({'circuit': 'device.yml'})

        config = Config(config_path=path)

        self.assertEqual(config.get('circuit.c12'), 20.0)
        self.assertEqual(config.get('circuit.c02'), 4.0)

    def test_missing_circuit_file(self):
        """Test that a circuit reference to a missing file raises."""
        path = self.write_yaml({'circuit': 'absent.yml'})
        with self.assertRaises(FileNotFoundError):
            Config(config_path=path)

    def test_invalid_yaml(self):
        """Test that unparseable files raise ConfigError."""
        path = os.path.join(self.temp_dir.name, 'bad.yml')
        with open(path, 'w') as f:
            f.write('invalid: yaml: content: [')
        with self.assertRaises(ConfigError):
            Config(config_path=path)

    def test_non_mapping_file(self):
        """Test that a top-level list is refused."""
        path = os.path.join(self.temp_dir.name, 'list.yml')
        with open(path, 'w') as f:
            f.write('- one\n- two\n')
        with self.assertRaises(ConfigError):
            Config(config_path=path)

    def test_count_below_minimum_is_clamped(self):
        """Test that too-small counts are clamped with a warning."""
        path = self.write_yaml({'basis': {'n_max': 1}, 'workers': 0})

        with self.assertLogs('trimode.config', level='WARNING') as logs:
            config = Config(config_path=path)

        self.assertEqual(config.get('basis.n_max'), 3)
        self.assertEqual(config.get('workers'), 1)
        self.assertEqual(len(logs.records), 2)

    def test_non_integer_count(self):
        """Test that fractional and boolean counts raise ConfigError."""
        for value in (2.5, True, 'many'):
            path = self.write_yaml({'grid': {'count': value}})
            with self.assertRaises(ConfigError):
                Config(config_path=path)

    def test_invalid_circuit_values(self):
        """Test that bad capacitances and SQUID asymmetry are refused."""
        bad_capacitance = dict(LIGHT_CIRCUIT, c12=-1.0)
        with self.assertRaises(ConfigError):
            Config(config_path=self.write_yaml({'circuit': bad_capacitance}))
        bad_asym = dict(LIGHT_CIRCUIT, squid_asym=1.0)
        with self.assertRaises(ConfigError):
            Config(config_path=self.write_yaml({'circuit': bad_asym}))

    def test_partial_circuit_section(self):
        """Test that a circuit section without all capacitances is refused."""
        with self.assertRaises(ConfigError):
            Config(config_path=self.write_yaml({'circuit': {'c12': 20.0}}))

    def test_invalid_grid(self):
        """Test that grid ends outside [0, 1] or out of order are refused."""
        with self.assertRaises(ConfigError):
            Config(config_path=self.write_yaml({'grid': {'start': 0.4, 'stop': 0.2}}))
        with self.assertRaises(ConfigError):
            Config(config_path=self.write_yaml({'grid': {'stop': 1.5}}))

    def test_get_method(self):
        """Test the get method with dot notation."""
        config = Config()

        self.assertEqual(config.get('effective.cutoff'), 5)
        self.assertEqual(config.get('non.existing.key', 'default'), 'default')
        self.assertIsNone(config.get('non.existing.key'))

    def test_attribute_access(self):
        """Test attribute-style access to configuration."""
        config = Config()

        self.assertIsInstance(config.basis, ConfigSection)
        self.assertEqual(config.basis.n_max, 7)
        self.assertEqual(config.seed, 0)
        with self.assertRaises(AttributeError):
            _ = config.non_existing_attribute

    def test_config_section(self):
        """Test the ConfigSection class."""
        section = ConfigSection({'key1': 'value1', 'nested': {'key2': 'value2'}})

        self.assertEqual(section.get('key1'), 'value1')
        self.assertEqual(section.get('non_existing', 'default'), 'default')
        self.assertEqual(section.key1, 'value1')
        self.assertIsInstance(section.nested, ConfigSection)
        self.assertEqual(section.nested.key2, 'value2')
        self.assertEqual(section['key1'], 'value1')
        self.assertIn('key1', section)
        self.assertNotIn('non_existing', section)
        with self.assertRaises(AttributeError):
            _ = section.non_existing

    def test_to_dict_is_a_copy(self):
        """Test that to_dict cannot mutate the configuration."""
        config = Config()
        data = config.to_dict()
        data['basis']['n_max'] = 99
        self.assertEqual(config.get('basis.n_max'), 7)


class TestConfigHash(unittest.TestCase):
    """Test cases for the configuration hash."""

    def test_hash_ignores_key_order(self):
        """Test that reordering keys keeps the hash."""
        first = {'a': 1, 'b': {'c': [1, 2], 'd': 0.5}}
        second = {'b': {'d': 0.5, 'c': [1, 2]}, 'a': 1}
        self.assertEqual(config_hash(first), config_hash(second))
        self.assertEqual(len(config_hash(first)), 64)

    def test_hash_tracks_values(self):
        """Test that a changed value changes the hash."""
        self.assertNotEqual(config_hash({'seed': 0}), config_hash({'seed': 1}))


class TestFluxGrid(unittest.TestCase):
    """Test cases for flux grids."""

    def test_parse(self):
        """Test START:STOP:COUNT parsing and the points it yields."""
        grid = FluxGrid.parse('0:0.5:11')
        self.assertEqual(grid, FluxGrid(0.0, 0.5, 11))
        points = grid.points()
        self.assertEqual(len(points), 11)
        self.assertAlmostEqual(points[1], 0.05)
        self.assertEqual(points[-1], 0.5)

    def test_parse_errors(self):
        """Test that malformed and out-of-range grids raise InputError."""
        for text in ('0:0.5', 'a:b:c', '0.5:0.1:3', '0:0.5:1', '0:1.5:3'):
            with self.assertRaises(InputError):
                FluxGrid.parse(text)


class TestBuildRunConfig(unittest.TestCase):
    """Test cases for resolving a RunConfig."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Clean up test fixtures."""
        self.temp_dir.cleanup()

    def config_with(self, data):
        path = os.path.join(self.temp_dir.name, 'trimode.yml')
        with open(path, 'w') as f:
            yaml.dump(data, f)
        return Config(config_path=path)

    def test_defaults(self):
        """Test the run configuration of the default device."""
        run = build_run_config(Config())

        self.assertEqual(run.circuit.squid_asym, 0.25)
        self.assertEqual(run.resonator.omega_r, 6.990)
        self.assertEqual(run.resonator.coupling_row, (2.0e-5, 1.0e-5, 4.5e-5))
        self.assertEqual(run.grid, FluxGrid(0.0, 0.5, 11))
        self.assertEqual(run.basis.n_max, 7)
        self.assertEqual(run.noise.a_phi, 1.69)
        self.assertEqual(run.photon_numbers, (0.0, 0.01, 0.1, 1.0))
        self.assertEqual(len(run.purcell_detunings), 12)
        self.assertNotIn(0.0, run.purcell_detunings)
        self.assertEqual(run.output_dir, 'trimode-out')
        self.assertEqual(run.bootstrap, 0)

    def test_overrides(self):
        """Test that explicit arguments win over the configuration."""
        run = build_run_config(Config(), out='results', seed=7, grid='0.1:0.2:3', n_max=5, bootstrap=4)

        self.assertEqual(run.output_dir, 'results')
        self.assertEqual(run.seed, 7)
        self.assertEqual(run.grid, FluxGrid(0.1, 0.2, 3))
        self.assertEqual(run.basis.n_max, 5)
        self.assertEqual(run.bootstrap, 4)
        self.assertEqual(run.resolved['seed'], 7)

    def test_overrides_change_hash(self):
        """Test that the hash follows the resolved configuration."""
        config = Config()
        self.assertEqual(build_run_config(config).config_hash, build_run_config(config).config_hash)
        self.assertNotEqual(build_run_config(config).config_hash,
                            build_run_config(config, seed=3).config_hash)

    def test_negative_bootstrap(self):
        """Test that a negative bootstrap count raises InputError."""
        with self.assertRaises(InputError):
            build_run_config(Config(), bootstrap=-1)

    def test_resonator_from_capacitances(self):
        """Test a resonator given by coupling capacitances instead of a coupling row."""
        config = self.config_with({'resonator': {'coupling_capacitances': [0.0, 0.0, 5.0], 'c_r': 400.0}})
        self.assertNotIn('coupling_row', config.get('resonator'))

        row = build_run_config(config).resonator.coupling_row
        self.assertGreater(row[2], row[0])
        self.assertGreater(row[0], 0.0)

    def test_resonator_missing_key(self):
        """Test that a capacitance resonator without c_r raises ConfigError."""
        config = self.config_with({'resonator': {'coupling_capacitances': [0.0, 0.0, 5.0]}})
        with self.assertRaises(ConfigError):
            build_run_config(config)

    def test_fit_settings(self):
        """Test fit bounds and free parameters from the configuration."""
        config = self.config_with({'fit': {'free': ['c12', 'ej1'], 'bounds': {'c12': [20, 30]},
                                           'coarse_n_max': 4}})
        fit = build_run_config(config).fit

        self.assertEqual(fit.free, ('c12', 'ej1'))
        self.assertEqual(fit.bounds, {'c12': (20.0, 30.0)})
        self.assertEqual(fit.coarse.n_max, 4)

    def test_inverted_fit_bounds(self):
        """Test that fit bounds with low above high raise ConfigError."""
        config = self.config_with({'fit': {'bounds': {'c12': [30, 20]}}})
        with self.assertRaises(ConfigError):
            build_run_config(config)

    def test_negative_photon_numbers(self):
        """Test that negative photon numbers raise ConfigError."""
        config = self.config_with({'decoherence': {'photon_numbers': [0.0, -1.0]}})
        with self.assertRaises(ConfigError):
            build_run_config(config)

    def test_zero_purcell_detuning(self):
        """Test that a zero detuning in the Purcell grid raises ConfigError."""
        config = self.config_with({'decoherence': {'purcell_detunings': [-1.0, 0.0]}})
        with self.assertRaises(ConfigError):
            build_run_config(config)

    def test_empty_purcell_grid(self):
        """Test that an empty detuning grid switches the Purcell curve off."""
        config = self.config_with({'decoherence': {'purcell_detunings': []}})
        self.assertEqual(build_run_config(config).purcell_detunings, ())


if __name__ == '__main__':
    unittest.main()
