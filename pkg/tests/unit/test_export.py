"""Unit tests for CSV and YAML outputs."""

import unittest
import sys
import os
import tempfile
from unittest.mock import patch

import numpy as np
import yaml

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from trimode.decoherence import UNBOUNDED
from trimode.export import (
    atomic_write_text,
    format_value,
    read_csv_body,
    read_metadata,
    render_csv,
    write_csv,
    write_yaml,
)


METADATA = {'trimode_version': '0.1.0', 'config_hash': 'abc123', 'command': 'decoherence'}


class TestFormatValue(unittest.TestCase):
    """Test cases for cell formatting."""

    def test_numbers(self):
        """Test integers, floats and their numpy counterparts."""
        self.assertEqual(format_value(3), '3')
        self.assertEqual(format_value(np.int64(3)), '3')
        self.assertEqual(format_value(0.0), '0')
        self.assertEqual(format_value(1.0 / 3.0), '0.3333333333')
        self.assertEqual(format_value(np.float64(2.5e-7)), '2.5e-07')
        self.assertEqual(format_value(float('nan')), 'nan')

    def test_markers_and_flags(self):
        """Test the unbounded marker and booleans."""
        self.assertEqual(format_value(UNBOUNDED), 'unbounded')
        self.assertEqual(format_value(True), 'true')
        self.assertEqual(format_value(np.bool_(False)), 'false')
        self.assertEqual(format_value('010'), '010')


class TestCSV(unittest.TestCase):
    """Test cases for CSV rendering and writing."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Clean up test fixtures."""
        self.temp_dir.cleanup()

    def test_render_with_metadata(self):
        """Test that metadata lines precede a single header line."""
        text = render_csv([{'flux': 0.0, 'branch': 'A', 't1_purcell': UNBOUNDED}], metadata=METADATA)
        lines = text.splitlines()
        self.assertEqual(lines[0], '# trimode_version: 0.1.0')
        self.assertEqual(lines[2], '# command: decoherence')
        self.assertEqual(lines[3], 'flux,branch,t1_purcell')
        self.assertEqual(lines[4], '0,A,unbounded')

    def test_inferred_columns_keep_first_seen_order(self):
        """Test that columns are collected across rows in first-seen order."""
        text = render_csv([{'a': 1}, {'b': 2, 'a': 3}])
        self.assertEqual(text.splitlines(), ['a,b', '1,', '3,2'])

    def test_explicit_columns(self):
        """Test that explicit columns select and order the cells."""
        text = render_csv([{'a': 1, 'b': 2}], columns=['b', 'a'])
        self.assertEqual(text.splitlines(), ['b,a', '2,1'])

    def test_write_and_read_back(self):
        """Test writing into a new directory and reading body and metadata back."""
        path = os.path.join(self.temp_dir.name, 'nested', 'chi.csv')
        rows = [{'flux': 0.1, 'chi_B_total': -0.25}, {'flux': 0.2, 'chi_B_total': -0.3}]

        self.assertEqual(write_csv(path, rows, metadata=METADATA), path)

        self.assertEqual(read_metadata(path), METADATA)
        body = read_csv_body(path)
        self.assertEqual(body[1], {'flux': '0.2', 'chi_B_total': '-0.3'})
        self.assertEqual(os.listdir(os.path.dirname(path)), ['chi.csv'])

    def test_failed_write_keeps_previous_file(self):
        """Test that an interrupted write leaves the old file and no temporary file."""
        path = os.path.join(self.temp_dir.name, 'spectrum.csv')
        atomic_write_text(path, 'old\n')

        with patch('trimode.export.os.replace', side_effect=OSError('disk full')):
            with self.assertRaises(OSError):
                atomic_write_text(path, 'new\n')

        with open(path) as f:
            self.assertEqual(f.read(), 'old\n')
        self.assertEqual(os.listdir(self.temp_dir.name), ['spectrum.csv'])


class TestYAML(unittest.TestCase):
    """Test cases for YAML reports."""

    def test_report_with_numpy_values(self):
        """Test that numpy values and markers become plain YAML."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, 'fit_report.yaml')
            write_yaml(path, {
                'cost': np.float64(0.5),
                'iterations': np.int64(12),
                'converged': np.bool_(True),
                'row': np.array([1.0, 2.0]),
                'limits': {'A': UNBOUNDED},
                'pairs': (1, 2),
            }, metadata={'command': 'fit'})

            self.assertEqual(read_metadata(path), {'command': 'fit'})
            with open(path) as f:
                report = yaml.safe_load(f)

        self.assertEqual(report, {
            'cost': 0.5, 'iterations': 12, 'converged': True, 'row': [1.0, 2.0],
            'limits': {'A': 'unbounded'}, 'pairs': [1, 2],
        })


if __name__ == '__main__':
    unittest.main()
