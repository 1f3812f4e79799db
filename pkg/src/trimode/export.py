"""Machine-readable command outputs.

Every CSV starts with a block of `# key: value` metadata lines (version,
config hash, command) followed by a single header line. Files are written to
a temporary sibling and renamed into place.
"""

import csv
import io
import logging
import math
import os
import tempfile
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import yaml

from .decoherence import Unbounded, render_limit

_logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Stable text form: floats with 10 significant digits, UNBOUNDED as 'unbounded'."""
    if isinstance(value, Unbounded):
        return render_limit(value)
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if value == 0.0:
            return '0'
        return f'{value:.10g}'
    return str(value)


def atomic_write_text(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.' + os.path.basename(path) + '.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None,
               metadata: Optional[Mapping[str, Any]] = None) -> str:
    if columns is None:
        columns = _columns(rows)
    buffer = io.StringIO()
    for key, value in (metadata or {}).items():
        buffer.write(f'# {key}: {value}\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(column, '')) for column in columns])
    return buffer.getvalue()


def _columns(rows: Iterable[Mapping[str, Any]]) -> List[str]:
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def write_csv(path: str, rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None,
              metadata: Optional[Mapping[str, Any]] = None) -> str:
    atomic_write_text(path, render_csv(rows, columns, metadata))
    _logger.info("wrote %d rows to %s", len(rows), path)
    return path


def read_csv_body(path: str) -> List[Dict[str, str]]:
    """Rows of a file written by write_csv, metadata lines skipped."""
    with open(path, newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))


def read_metadata(path: str) -> Dict[str, str]:
    metadata = {}
    with open(path) as f:
        for line in f:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].partition(':')
            metadata[key.strip()] = value.strip()
    return metadata


def _plain(value: Any) -> Any:
    if isinstance(value, Unbounded):
        return str(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_yaml(path: str, data: Mapping[str, Any], metadata: Optional[Mapping[str, Any]] = None) -> str:
    header = ''.join(f'# {key}: {value}\n' for key, value in (metadata or {}).items())
    atomic_write_text(path, header + yaml.safe_dump(_plain(data), sort_keys=False))
    _logger.info("wrote %s", path)
    return path
