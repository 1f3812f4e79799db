"""Configuration management for trimode."""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import yaml

from .charge_basis import ChargeBasisConfig
from .circuit import CircuitParams, load_circuit_params
from .decoherence import NoiseEnvironment
from .errors import ConfigError, InputError
from .fitting import DEFAULT_FREE, FitSettings
from .resonator import ResonatorParams

_logger = logging.getLogger(__name__)


class Config:
    """Manages trimode configuration from config files and environment variables.

    Environment variables take precedence over config file settings.
    Environment variable format: TRIMODE_<SECTION>_<KEY>
    Example: TRIMODE_BASIS_N_MAX, TRIMODE_NOISE_A_PHI
    """

    DEFAULT_CONFIG = {
        'circuit': {
            'c12': 25.75, 'c13': 27.0, 'c23': 27.0,
            'c01': 5.0, 'c02': 5.0, 'c03': 5.0,
            'ej1': 14.5, 'ej2': 14.5, 'ej3_sum': 29.0,
            'squid_asym': 0.25,
            'offset_charges': [0.0, 0.0, 0.0],
        },
        'resonator': {
            'omega_r': 6.990,
            'kappa': 1.32,
            'z_r': 50.0,
            'coupling_row': [2.0e-5, 1.0e-5, 4.5e-5],
        },
        'noise': {
            'a_phi': 1.69,
            'n_initial': 0.005,
            'gamma1': None,
        },
        'basis': {
            'n_max': 7,
            'n_levels': 12,
        },
        'effective': {
            'cutoff': 5,
        },
        'grid': {
            'start': 0.0,
            'stop': 0.5,
            'count': 11,
        },
        'decoherence': {
            'photon_numbers': [0.0, 0.01, 0.1, 1.0],
            'purcell_detunings': [-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        },
        'fit': {
            'free': list(DEFAULT_FREE),
            'bounds': {},
            'max_iterations': 2000,
            'coarse_n_max': 5,
            'verify_n_max': 7,
            'bootstrap': 0,
        },
        'output': {
            'directory': 'trimode-out',
        },
        'seed': 0,
        'workers': 1,
        'debug': False,
    }

    ENV_VAR_MAP = {
        'TRIMODE_RESONATOR_OMEGA_R': 'resonator.omega_r',
        'TRIMODE_RESONATOR_KAPPA': 'resonator.kappa',
        'TRIMODE_RESONATOR_Z_R': 'resonator.z_r',
        'TRIMODE_NOISE_A_PHI': 'noise.a_phi',
        'TRIMODE_NOISE_N_INITIAL': 'noise.n_initial',
        'TRIMODE_NOISE_GAMMA1': 'noise.gamma1',
        'TRIMODE_BASIS_N_MAX': 'basis.n_max',
        'TRIMODE_BASIS_N_LEVELS': 'basis.n_levels',
        'TRIMODE_EFFECTIVE_CUTOFF': 'effective.cutoff',
        'TRIMODE_GRID_START': 'grid.start',
        'TRIMODE_GRID_STOP': 'grid.stop',
        'TRIMODE_GRID_COUNT': 'grid.count',
        'TRIMODE_FIT_MAX_ITERATIONS': 'fit.max_iterations',
        'TRIMODE_FIT_BOOTSTRAP': 'fit.bootstrap',
        'TRIMODE_OUTPUT_DIRECTORY': 'output.directory',
        'TRIMODE_SEED': 'seed',
        'TRIMODE_WORKERS': 'workers',
        'TRIMODE_DEBUG': 'debug',
    }

    # key -> minimum legal value; smaller values are clamped with a warning
    COUNT_MINIMA = {
        'basis.n_max': 3,
        'basis.n_levels': 1,
        'effective.cutoff': 2,
        'grid.count': 2,
        'fit.max_iterations': 1,
        'fit.coarse_n_max': 3,
        'fit.verify_n_max': 3,
        'fit.bootstrap': 0,
        'workers': 1,
    }

    def __init__(self, config_path: Optional[str] = None):
        """Initialize configuration.

        Configuration precedence (highest to lowest):
        1. Environment variables (TRIMODE_*)
        2. Config file (~/.trimode.conf or specified path)
        3. Default values

        An explicit config_path that does not exist raises FileNotFoundError;
        a missing default file is silently skipped.
        """
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        self.config_path = config_path or str(Path.home() / '.trimode.conf')

        if os.path.exists(self.config_path):
            self._load_config()
        elif config_path is not None:
            raise FileNotFoundError(f"config file not found: {config_path}")

        self._load_env_vars()
        self._validate_config()

    def _load_config(self):
        """Load configuration from YAML or JSON file."""
        with open(self.config_path, 'r') as f:
            content = f.read()
        try:
            loaded_config = json.loads(content) if content.strip() else {}
        except json.JSONDecodeError:
            try:
                loaded_config = yaml.safe_load(content) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{self.config_path}: not valid JSON or YAML: {exc}")
        if not isinstance(loaded_config, dict):
            raise ConfigError(f"{self.config_path}: top level must be a mapping")

        circuit = loaded_config.get('circuit')
        if isinstance(circuit, str):
            loaded_config['circuit'] = self._circuit_file(circuit)
        elif isinstance(circuit, dict) and 'c0' in circuit:
            c0 = circuit.pop('c0')
            for key in ('c01', 'c02', 'c03'):
                circuit.setdefault(key, c0)
        if 'circuit' in loaded_config:
            # a circuit section in the file replaces the default device
            self.config['circuit'] = {'squid_asym': 0.0, 'offset_charges': [0.0, 0.0, 0.0]}
        resonator = loaded_config.get('resonator')
        if isinstance(resonator, dict) and 'coupling_capacitances' in resonator:
            self.config['resonator'].pop('coupling_row', None)

        self._deep_merge(self.config, loaded_config)
        _logger.debug("loaded configuration from %s", self.config_path)

    def _circuit_file(self, path: str) -> Dict[str, Any]:
        """A string `circuit:` entry names a circuit file relative to the config file."""
        resolved = Path(path)
        if not resolved.is_absolute():
            resolved = Path(self.config_path).parent / resolved
        if not resolved.exists():
            raise FileNotFoundError(f"circuit file not found: {resolved}")
        return load_circuit_params(str(resolved)).to_dict()

    def _load_env_vars(self):
        """Load configuration from environment variables.

        Environment variables override config file settings.
        """
        for env_var, config_path in self.ENV_VAR_MAP.items():
            value = os.environ.get(env_var)
            if value is None:
                continue
            keys = config_path.split('.')

            if value.lower() in ('true', 'false'):
                value = value.lower() == 'true'
            elif value.lower() in ('none', 'null', ''):
                value = None
            else:
                try:
                    value = int(value)
                except ValueError:
                    try:
                        value = float(value)
                    except ValueError:
                        pass

            target = self.config
            for key in keys[:-1]:
                target = target.setdefault(key, {})
            target[keys[-1]] = value

    def _validate_config(self):
        """Validate and sanitize configuration values."""
        for key, minimum in self.COUNT_MINIMA.items():
            value = self.get(key)
            if value is None:
                continue
            try:
                number = int(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be an integer, got {value!r}")
            if isinstance(value, bool) or number != value:
                raise ConfigError(f"{key} must be an integer, got {value!r}")
            if number < minimum:
                _logger.warning("%s=%d is below the minimum %d; using %d", key, number, minimum, minimum)
                number = minimum
            self._set(key, number)

        for key in ('c12', 'c13', 'c23', 'c01', 'c02', 'c03'):
            value = self.get(f'circuit.{key}')
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"circuit.{key} must be a positive capacitance, got {value!r}")
        asym = self.get('circuit.squid_asym', 0.0)
        if not isinstance(asym, (int, float)) or not 0.0 <= asym < 1.0:
            raise ConfigError(f"circuit.squid_asym must lie in [0, 1), got {asym!r}")

        grid = self.config.get('grid', {})
        for key in ('start', 'stop'):
            value = grid.get(key)
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ConfigError(f"grid.{key} must lie in [0, 1], got {value!r}")
        if grid['start'] > grid['stop']:
            raise ConfigError("grid.start must not exceed grid.stop")

        if isinstance(self.get('debug'), str):
            self._set('debug', self.get('debug').lower() in ('1', 'true', 'yes'))

    def _set(self, key: str, value: Any):
        keys = key.split('.')
        target = self.config
        for k in keys[:-1]:
            target = target.setdefault(k, {})
        target[keys[-1]] = value

    def _deep_merge(self, base: Dict, override: Dict):
        """Deep merge override dict into base dict."""
        for key, value in override.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._deep_merge(base[key], value)
            else:
                base[key] = value

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value by dotted path."""
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def __getattr__(self, name: str) -> Any:
        """Allow attribute-style access to config."""
        if name != 'config' and name in self.config:
            value = self.config[name]
            if isinstance(value, dict):
                return ConfigSection(value)
            return value
        raise AttributeError(f"Configuration has no attribute '{name}'")


class ConfigSection:
    """Wrapper for nested configuration sections."""

    def __init__(self, data: Dict):
        self._data = data if isinstance(data, dict) else {}

    def get(self, key: str, default: Any = None) -> Any:
        return self._data.get(key, default)

    def __getattr__(self, name: str) -> Any:
        if name != '_data' and name in self._data:
            value = self._data[name]
            if isinstance(value, dict):
                return ConfigSection(value)
            return value
        raise AttributeError(f"Configuration section has no attribute '{name}'")

    def __getitem__(self, key: str) -> Any:
        return self._data[key]

    def __contains__(self, key: str) -> bool:
        return key in self._data


def config_hash(config: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON dump (sorted keys) of a resolved configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


@dataclass(frozen=True)
class FluxGrid:
    """Evenly spaced flux points, both ends included (phi_0 units)."""

    start: float
    stop: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 2:
            raise InputError(f"flux grid needs at least two points, got {self.count!r}")
        if not (0.0 <= self.start <= self.stop <= 1.0):
            raise InputError(f"flux grid [{self.start}, {self.stop}] must be ordered within [0, 1]")

    @classmethod
    def parse(cls, text: str) -> 'FluxGrid':
        """Parse `START:STOP:COUNT`."""
        parts = text.split(':')
        if len(parts) != 3:
            raise InputError(f"grid must look like START:STOP:COUNT, got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise InputError(f"grid must look like START:STOP:COUNT, got {text!r}")

    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, resolved from Config and command-line overrides."""

    circuit: CircuitParams
    resonator: Optional[ResonatorParams]
    grid: FluxGrid
    basis: ChargeBasisConfig
    noise: NoiseEnvironment
    output_dir: str
    seed: int = 0
    workers: int = 1
    cutoff: int = 5
    photon_numbers: Tuple[float, ...] = (0.0,)
    purcell_detunings: Tuple[float, ...] = ()
    fit: FitSettings = field(default_factory=FitSettings)
    bootstrap: int = 0
    debug: bool = False
    config_path: Optional[str] = None
    resolved: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved)


def _resonator_from(section: Dict[str, Any], circuit: CircuitParams) -> Optional[ResonatorParams]:
    if not section:
        return None
    try:
        if 'coupling_capacitances' in section:
            return ResonatorParams.from_capacitances(
                circuit, section['coupling_capacitances'], float(section['c_r']),
                omega_r=float(section['omega_r']), kappa=float(section['kappa']),
                z_r=float(section.get('z_r', 50.0)),
            )
        return ResonatorParams(
            omega_r=float(section['omega_r']), kappa=float(section['kappa']),
            coupling_row=tuple(section['coupling_row']), z_r=float(section.get('z_r', 50.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"resonator section is missing {exc}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"resonator section is invalid: {exc}")


def _fit_settings(section: Dict[str, Any]) -> FitSettings:
    bounds = {}
    for name, pair in (section.get('bounds') or {}).items():
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"fit.bounds.{name} must be a [low, high] pair")
        low, high = float(pair[0]), float(pair[1])
        if low > high:
            raise ConfigError(f"fit.bounds.{name}: low exceeds high")
        bounds[name] = (low, high)
    return FitSettings(
        free=tuple(section.get('free') or DEFAULT_FREE),
        bounds=bounds,
        max_iterations=int(section.get('max_iterations', 2000)),
        coarse_n_max=int(section.get('coarse_n_max', 5)),
        verify_n_max=int(section.get('verify_n_max', 7)),
    )


def build_run_config(config: Config, out: Optional[str] = None, seed: Optional[int] = None,
                     grid: Optional[str] = None, n_max: Optional[int] = None,
                     bootstrap: Optional[int] = None) -> RunConfig:
    """Resolve a RunConfig; explicit arguments override the configuration."""
    resolved = config.to_dict()
    if out is not None:
        resolved['output']['directory'] = out
    if seed is not None:
        resolved['seed'] = int(seed)
    if grid is not None:
        parsed = FluxGrid.parse(grid)
        resolved['grid'] = {'start': parsed.start, 'stop': parsed.stop, 'count': parsed.count}
    if n_max is not None:
        resolved['basis']['n_max'] = int(n_max)
    if bootstrap is not None:
        if bootstrap < 0:
            raise InputError("--bootstrap must be non-negative")
        resolved['fit']['bootstrap'] = int(bootstrap)

    try:
        circuit = CircuitParams.from_dict(resolved['circuit'])
    except TypeError as exc:
        raise ConfigError(f"circuit section is invalid: {exc}")
    noise_section = resolved.get('noise') or {}
    noise = NoiseEnvironment(
        a_phi=float(noise_section.get('a_phi', 1.69)),
        n_initial=float(noise_section.get('n_initial', 0.005)),
        gamma1=None if noise_section.get('gamma1') is None else float(noise_section['gamma1']),
    )
    basis = ChargeBasisConfig(int(resolved['basis']['n_max']), int(resolved['basis']['n_levels']))
    photon_numbers: Sequence[float] = resolved.get('decoherence', {}).get('photon_numbers') or [0.0]
    if any(float(n) < 0 for n in photon_numbers):
        raise ConfigError("decoherence.photon_numbers must be non-negative")
    detunings = resolved.get('decoherence', {}).get('purcell_detunings') or []
    if any(float(d) == 0 for d in detunings):
        raise ConfigError("decoherence.purcell_detunings must be non-zero")

    return RunConfig(
        circuit=circuit,
        resonator=_resonator_from(resolved.get('resonator') or {}, circuit),
        grid=FluxGrid(float(resolved['grid']['start']), float(resolved['grid']['stop']),
                      int(resolved['grid']['count'])),
        basis=basis,
        noise=noise,
        output_dir=str(resolved['output']['directory']),
        seed=int(resolved.get('seed', 0)),
        workers=int(resolved.get('workers', 1)),
        cutoff=int(resolved['effective']['cutoff']),
        photon_numbers=tuple(float(n) for n in photon_numbers),
        purcell_detunings=tuple(float(d) for d in detunings),
        fit=_fit_settings(resolved.get('fit') or {}),
        bootstrap=int(resolved['fit'].get('bootstrap', 0)),
        debug=bool(resolved.get('debug', False)),
        config_path=config.config_path,
        resolved=resolved,
    )

