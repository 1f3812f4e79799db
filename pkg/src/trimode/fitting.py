"""Least-squares extraction of circuit parameters from measured observables.

The forward model is an exact charge-basis eigensolve, so the optimizer is a
derivative-free Nelder-Mead simplex on scaled parameters with bound clamping.
Uncertainties come from residual bootstrapping: synthetic data sets
y* = y_hat + r* with r* drawn per observation kind from the fit residuals.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from tqdm import tqdm

from .charge_basis import ChargeBasisConfig, flux_sweep, mode_spectrum_from_levels, single_excitation
from .circuit import CircuitParams
from .errors import (
    BootstrapError,
    FluxPointError,
    InputError,
    ObservationError,
    ObservationFormatError,
    TrimodeError,
)
from .normal_modes import MODES, parse_pair
from .resonator import ResonatorParams, dispersive_shifts_general, linear_couplings

_logger = logging.getLogger(__name__)

FREQUENCY = 'frequency'
DISPERSIVE_SHIFT = 'dispersive_shift'
SELF_KERR = 'self_kerr'
CROSS_KERR = 'cross_kerr'

KIND_ALIASES = {
    'frequency': FREQUENCY,
    'transition-frequency': FREQUENCY,
    'transition_frequency': FREQUENCY,
    'dispersive_shift': DISPERSIVE_SHIFT,
    'dispersive-shift': DISPERSIVE_SHIFT,
    'chi': DISPERSIVE_SHIFT,
    'self_kerr': SELF_KERR,
    'self-kerr': SELF_KERR,
    'cross_kerr': CROSS_KERR,
    'cross-kerr': CROSS_KERR,
}

# 1/sigma^2 with sigma = 10 MHz (frequencies in GHz), 20 kHz (chi in MHz), 5 MHz (Kerr in MHz)
DEFAULT_WEIGHTS = {
    FREQUENCY: 1.0 / 0.01 ** 2,
    DISPERSIVE_SHIFT: 1.0 / 0.02 ** 2,
    SELF_KERR: 1.0 / 5.0 ** 2,
    CROSS_KERR: 1.0 / 5.0 ** 2,
}

DEFAULT_FREE = ('c12', 'c13', 'c23', 'c0', 'ej1', 'ej2', 'ej3_sum', 'squid_asym')
CIRCUIT_FIELDS = ('c12', 'c13', 'c23', 'c01', 'c02', 'c03', 'ej1', 'ej2', 'ej3_sum', 'squid_asym')
COUPLING_FIELDS = ('coupling_r1', 'coupling_r2', 'coupling_r3')
PENALTY = 1e12
BOOTSTRAP_FAILURE_LIMIT = 0.2


@dataclass(frozen=True)
class Observation:
    kind: str
    flux: float
    label: object
    value: float
    weight: float

    @property
    def label_text(self) -> str:
        if self.kind == FREQUENCY:
            return ''.join(str(n) for n in self.label)
        if self.kind == CROSS_KERR:
            return ''.join(self.label)
        return str(self.label)


def _parse_label(kind: str, text: str):
    text = text.strip()
    if kind == FREQUENCY:
        if text.upper() in MODES:
            return single_excitation(text.upper())
        digits = [ch for ch in text if ch.isdigit()]
        if len(digits) != 3:
            raise ValueError(f"frequency label {text!r} is neither a mode nor an occupation")
        return tuple(int(d) for d in digits)
    if kind == CROSS_KERR:
        return parse_pair(text)
    if text.upper() not in MODES:
        raise ValueError(f"label {text!r} is not a mode (A, B or C)")
    return text.upper()


def make_observation(kind: str, flux: float, label: str, value: float,
                     weight: Optional[float] = None) -> Observation:
    canonical = KIND_ALIASES.get(kind.strip().lower())
    if canonical is None:
        raise ValueError(f"unknown observation kind {kind!r}")
    flux, value = float(flux), float(value)
    weight = DEFAULT_WEIGHTS[canonical] if weight is None else float(weight)
    if not (math.isfinite(flux) and math.isfinite(value)):
        raise ValueError("flux and value must be finite")
    if not 0.0 <= flux <= 1.0:
        raise ValueError(f"flux {flux} outside [0, 1]")
    if not (math.isfinite(weight) and weight > 0):
        raise ValueError(f"weight must be positive, got {weight}")
    return Observation(canonical, flux, _parse_label(canonical, label), value, weight)


class ObservationSet:
    """Ordered observation records."""

    COLUMNS = ('kind', 'flux', 'label', 'value', 'weight')

    def __init__(self, observations: Sequence[Observation]):
        self.observations = list(observations)

    def __len__(self):
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    def __getitem__(self, index):
        return self.observations[index]

    @property
    def values(self) -> np.ndarray:
        return np.array([o.value for o in self.observations])

    @property
    def weights(self) -> np.ndarray:
        return np.array([o.weight for o in self.observations])

    @property
    def kinds(self) -> List[str]:
        return [o.kind for o in self.observations]

    def with_values(self, values: Sequence[float]) -> 'ObservationSet':
        return ObservationSet([replace(o, value=float(v)) for o, v in zip(self.observations, values)])

    def check_identifiable(self, n_free: int):
        if len(self) < n_free:
            raise InputError(f"{len(self)} observations cannot constrain {n_free} free parameters")

    @classmethod
    def from_csv(cls, path: str) -> 'ObservationSet':
        """Read `kind,flux,label,value,weight`; empty weight takes the kind default.

        Lines starting with '#' are comments. Row numbers in errors count file lines.
        """
        observations = []
        with open(path, newline='') as f:
            lines = [(n, line) for n, line in enumerate(f, start=1)
                     if line.strip() and not line.lstrip().startswith('#')]
        if not lines:
            raise ObservationFormatError(1, "observation file is empty")
        reader = csv.reader([line for _, line in lines])
        header = [h.strip().lower() for h in next(reader)]
        missing = [c for c in cls.COLUMNS[:4] if c not in header]
        if missing:
            raise ObservationFormatError(lines[0][0], f"missing columns: {', '.join(missing)}")
        for (row_number, _), row in zip(lines[1:], reader):
            record = dict(zip(header, (cell.strip() for cell in row)))
            try:
                if len(row) < 4:
                    raise ValueError("expected at least kind, flux, label, value")
                weight = record.get('weight') or None
                observations.append(make_observation(
                    record['kind'], record['flux'], record['label'], record['value'], weight))
            except (ValueError, KeyError) as exc:
                raise ObservationFormatError(row_number, str(exc))
        if not observations:
            raise ObservationFormatError(lines[0][0], "no observation rows")
        return cls(observations)

    def to_rows(self) -> List[Dict[str, object]]:
        return [{'kind': o.kind, 'flux': o.flux, 'label': o.label_text, 'value': o.value, 'weight': o.weight}
                for o in self.observations]


def simulate_observables(params: CircuitParams, res: Optional[ResonatorParams], observations: ObservationSet,
                         cfg: Optional[ChargeBasisConfig] = None) -> np.ndarray:
    """One prediction per observation, in the observation's own units and order."""
    cfg = cfg or ChargeBasisConfig()
    fluxes = sorted({o.flux for o in observations})
    first_index = {}
    for idx, o in enumerate(observations):
        first_index.setdefault(o.flux, idx)

    try:
        sweep = flux_sweep(params, fluxes, cfg)
    except FluxPointError as exc:
        raise ObservationError(first_index.get(exc.flux, 0), exc.cause) from exc

    solutions = dict(zip(fluxes, sweep.solutions))
    derived = {}

    def shifts_at(flux):
        if flux not in derived:
            if res is None:
                raise InputError("dispersive-shift observations need resonator parameters")
            sol = solutions[flux]
            general = dispersive_shifts_general(sol, linear_couplings(sol, res), res)
            derived[flux] = general.chi
        return derived[flux]

    predictions = np.empty(len(observations))
    for idx, o in enumerate(observations):
        sol = solutions[o.flux]
        try:
            if o.kind == FREQUENCY:
                predictions[idx] = sol.energy(o.label)
            elif o.kind == DISPERSIVE_SHIFT:
                sol.index_of(single_excitation(o.label), allow_hybridized=False)
                chi = shifts_at(o.flux)
                if o.label not in chi:
                    raise InputError(f"no dispersive shift for mode {o.label}")
                predictions[idx] = chi[o.label]
            elif o.kind == SELF_KERR:
                spectrum = mode_spectrum_from_levels(sol)
                predictions[idx] = spectrum.self_kerr[o.label] * 1e3
            else:
                spectrum = mode_spectrum_from_levels(sol)
                predictions[idx] = spectrum.cross_kerr[o.label] * 1e3
        except KeyError as exc:
            raise ObservationError(idx, InputError(f"level needed for {o.kind} {o.label_text} not computed: {exc}"))
        except TrimodeError as exc:
            raise ObservationError(idx, exc) from exc
    return predictions


@dataclass(frozen=True)
class FitSettings:
    free: Tuple[str, ...] = DEFAULT_FREE
    bounds: Mapping[str, Tuple[float, float]] = field(default_factory=dict)
    max_iterations: int = 2000
    coarse_n_max: int = 5
    verify_n_max: int = 7
    n_levels: int = 12
    stagnation_window: int = 20
    stagnation_tolerance: float = 1e-10
    simplex_step: float = 0.05
    restart: bool = True

    @property
    def coarse(self) -> ChargeBasisConfig:
        return ChargeBasisConfig(self.coarse_n_max, self.n_levels)

    @property
    def verify(self) -> ChargeBasisConfig:
        return ChargeBasisConfig(self.verify_n_max, self.n_levels)


class BootstrapSummary(NamedTuple):
    names: Tuple[str, ...]
    samples: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    requested: int
    failures: int

    def as_dict(self) -> Dict[str, Dict[str, float]]:
        return {name: {'mean': float(self.mean[k]), 'std': float(self.std[k])}
                for k, name in enumerate(self.names)}


@dataclass
class FitResult:
    params: CircuitParams
    resonator: Optional[ResonatorParams]
    free: Tuple[str, ...]
    predictions: np.ndarray
    residuals: np.ndarray
    cost: float
    converged: bool
    iterations: int
    message: str = ''
    cost_history: List[float] = field(default_factory=list, repr=False)
    verification_cost: Optional[float] = None
    verification_residuals: Optional[np.ndarray] = field(default=None, repr=False)
    settings: FitSettings = field(default_factory=FitSettings, repr=False)
    bootstrap: Optional[BootstrapSummary] = None

    def parameter_values(self) -> Dict[str, float]:
        space = ParameterSpace(self.params, self.resonator, self.free, {})
        return dict(zip(self.free, space.values))


class ParameterSpace:
    """Maps the free parameter subset to scaled optimizer coordinates x = value / scale."""

    def __init__(self, params: CircuitParams, res: Optional[ResonatorParams], free: Sequence[str],
                 bounds: Mapping[str, Tuple[float, float]]):
        self.params = params
        self.res = res
        self.free = tuple(free)
        for name in self.free:
            if name not in CIRCUIT_FIELDS + COUPLING_FIELDS + ('c0',):
                raise InputError(f"unknown free parameter {name!r}")
            if name in COUPLING_FIELDS and res is None:
                raise InputError(f"{name} is free but no resonator is configured")
        if 'c0' in self.free and set(self.free) & {'c01', 'c02', 'c03'}:
            raise InputError("c0 ties c01, c02 and c03; do not free them separately")
        self.values = np.array([self._read(name) for name in self.free])
        self.scales = np.array([self._scale(name, v) for name, v in zip(self.free, self.values)])
        self.bounds = [self._bounds(name, v, bounds) for name, v in zip(self.free, self.values)]
        for name, v, (lo, hi) in zip(self.free, self.values, self.bounds):
            if not lo <= v <= hi:
                raise InputError(f"initial {name}={v:.6g} lies outside bounds [{lo:.6g}, {hi:.6g}]")

    def _read(self, name: str) -> float:
        if name == 'c0':
            return (self.params.c01 + self.params.c02 + self.params.c03) / 3.0
        if name in COUPLING_FIELDS:
            return self.res.coupling_row[COUPLING_FIELDS.index(name)]
        return getattr(self.params, name)

    @staticmethod
    def _scale(name: str, value: float) -> float:
        if value != 0:
            return abs(value)
        return 1e-5 if name in COUPLING_FIELDS else 0.1

    @staticmethod
    def _bounds(name: str, value: float, user: Mapping[str, Tuple[float, float]]) -> Tuple[float, float]:
        if name in user:
            lo, hi = user[name]
            return float(lo), float(hi)
        if name == 'squid_asym':
            return 0.0, 0.99
        if name in COUPLING_FIELDS:
            span = 0.5 * abs(value) + 1e-6
            return value - span, value + span
        return 0.5 * value, 1.5 * value

    @property
    def x0(self) -> np.ndarray:
        return self.values / self.scales

    @property
    def scaled_bounds(self) -> List[Tuple[float, float]]:
        return [(lo / s, hi / s) for (lo, hi), s in zip(self.bounds, self.scales)]

    def apply(self, x: np.ndarray) -> Tuple[CircuitParams, Optional[ResonatorParams]]:
        values = dict(zip(self.free, np.asarray(x) * self.scales))
        circuit_changes = {}
        for name, value in values.items():
            if name == 'c0':
                circuit_changes.update(c01=value, c02=value, c03=value)
            elif name in CIRCUIT_FIELDS:
                circuit_changes[name] = float(value)
        params = self.params.replace(**circuit_changes) if circuit_changes else self.params
        res = self.res
        if res is not None and any(name in COUPLING_FIELDS for name in values):
            row = list(res.coupling_row)
            for k, name in enumerate(COUPLING_FIELDS):
                if name in values:
                    row[k] = float(values[name])
            res = res.with_coupling_row(row)
        return params, res


def _weighted_cost(predictions: np.ndarray, observations: ObservationSet) -> float:
    residuals = predictions - observations.values
    return float(np.sum(observations.weights * residuals ** 2))


class _Objective:
    """Penalized cost with a best-so-far history; stops the simplex on stagnation."""

    def __init__(self, space: ParameterSpace, observations: ObservationSet, settings: FitSettings):
        self.space = space
        self.observations = observations
        self.settings = settings
        self.history: List[float] = []
        self.evaluations = 0

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        try:
            params, res = self.space.apply(x)
            predictions = simulate_observables(params, res, self.observations, self.settings.coarse)
        except TrimodeError as exc:
            _logger.debug("forward model failed at %s: %s", x, exc)
            return PENALTY
        cost = _weighted_cost(predictions, self.observations)
        return cost if math.isfinite(cost) else PENALTY

    def callback(self, intermediate_result):
        self.history.append(float(intermediate_result.fun))
        window = self.settings.stagnation_window
        if len(self.history) > window:
            old, new = self.history[-window - 1], self.history[-1]
            if new <= 0.0 or (old - new) <= self.settings.stagnation_tolerance * abs(old):
                raise StopIteration


def _initial_simplex(x0: np.ndarray, bounds: Sequence[Tuple[float, float]], step: float) -> np.ndarray:
    simplex = np.tile(x0, (len(x0) + 1, 1))
    for k in range(len(x0)):
        delta = step * (abs(x0[k]) if x0[k] != 0 else 1.0)
        lo, hi = bounds[k]
        candidate = x0[k] + delta
        simplex[k + 1, k] = candidate if candidate <= hi else x0[k] - delta
    return simplex


def _run_simplex(objective: _Objective, x0: np.ndarray, space: ParameterSpace, settings: FitSettings,
                 max_iterations: int):
    return minimize(
        objective, x0, method='Nelder-Mead', bounds=space.scaled_bounds, callback=objective.callback,
        options={
            'initial_simplex': _initial_simplex(x0, space.scaled_bounds, settings.simplex_step),
            'maxiter': max_iterations,
            'xatol': 1e-9,
            'fatol': 1e-14,
        },
    )


def fit_parameters(observations: ObservationSet, initial: CircuitParams,
                   bounds: Optional[Mapping[str, Tuple[float, float]]] = None,
                   res: Optional[ResonatorParams] = None,
                   settings: Optional[FitSettings] = None) -> FitResult:
    """Minimize sum_i w_i (prediction_i - value_i)^2 over the free parameters."""
    settings = settings or FitSettings()
    if bounds is not None:
        settings = replace(settings, bounds=dict(bounds))
    space = ParameterSpace(initial, res, settings.free, settings.bounds)
    settings = replace(settings, bounds=dict(zip(space.free, space.bounds)))
    observations.check_identifiable(len(space.free))
    objective = _Objective(space, observations, settings)

    converged, iterations, message = True, 0, 'no free parameters'
    x_best = space.x0
    if space.free:
        result = _run_simplex(objective, space.x0, space, settings, settings.max_iterations)
        iterations = int(result.nit)
        x_best = result.x
        hit_cap = iterations >= settings.max_iterations
        if settings.restart and not hit_cap:
            _logger.debug("restarting simplex from best vertex (cost %.6g)", result.fun)
            restart = _run_simplex(objective, result.x, space, settings, settings.max_iterations - iterations)
            iterations += int(restart.nit)
            if restart.fun <= result.fun:
                x_best = restart.x
            hit_cap = iterations >= settings.max_iterations
        converged = not hit_cap
        message = 'converged' if converged else f'iteration cap {settings.max_iterations} reached'
        if not converged:
            _logger.warning("fit stopped at the iteration cap without converging")

    params, fitted_res = space.apply(x_best)
    predictions = simulate_observables(params, fitted_res, observations, settings.coarse)
    residuals = predictions - observations.values
    cost = float(np.sum(observations.weights * residuals ** 2))

    verification_cost = verification_residuals = None
    if settings.verify_n_max != settings.coarse_n_max:
        verified = simulate_observables(params, fitted_res, observations, settings.verify)
        verification_residuals = verified - observations.values
        verification_cost = float(np.sum(observations.weights * verification_residuals ** 2))

    _logger.info("fit finished: cost %.6g after %d iterations (%s)", cost, iterations, message)
    return FitResult(
        params=params, resonator=fitted_res, free=space.free, predictions=predictions,
        residuals=residuals, cost=cost, converged=converged, iterations=iterations, message=message,
        cost_history=list(objective.history), verification_cost=verification_cost,
        verification_residuals=verification_residuals, settings=settings,
    )


def _resampled_values(fit: FitResult, observations: ObservationSet, rng: np.random.Generator) -> np.ndarray:
    kinds = np.array(observations.kinds)
    observed_minus_predicted = observations.values - fit.predictions
    values = fit.predictions.copy()
    for kind in sorted(set(observations.kinds)):
        members = np.flatnonzero(kinds == kind)
        draws = rng.choice(observed_minus_predicted[members], size=members.size, replace=True)
        values[members] = fit.predictions[members] + draws
    return values


def bootstrap_uncertainty(fit: FitResult, observations: ObservationSet, n_samples: int = 100, seed: int = 0,
                          workers: int = 1, progress: bool = False) -> FitResult:
    """Refit `n_samples` residual-resampled data sets from the optimum.

    Sample k draws from numpy.random.default_rng([seed, k]), so results do not
    depend on the worker count.
    """
    if n_samples < 1:
        raise InputError("bootstrap needs at least one sample")
    if not fit.free:
        raise InputError("bootstrap needs at least one free parameter")
    if not fit.converged:
        _logger.warning("bootstrapping a fit that did not converge: %s", fit.message)
    settings = replace(fit.settings, verify_n_max=fit.settings.coarse_n_max)
    bounds = dict(fit.settings.bounds)

    def refit(index: int) -> Optional[np.ndarray]:
        rng = np.random.default_rng([seed, index])
        synthetic = observations.with_values(_resampled_values(fit, observations, rng))
        try:
            sample = fit_parameters(synthetic, fit.params, bounds=bounds, res=fit.resonator, settings=settings)
        except TrimodeError as exc:
            _logger.debug("bootstrap sample %d failed: %s", index, exc)
            return None
        if sample.cost >= PENALTY:
            return None
        return np.array(list(sample.parameter_values().values()))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(tqdm(pool.map(refit, range(n_samples)), total=n_samples, desc='bootstrap',
                             disable=not progress, leave=False))

    samples = [s for s in outcomes if s is not None]
    failures = n_samples - len(samples)
    if failures > BOOTSTRAP_FAILURE_LIMIT * n_samples:
        raise BootstrapError(f"{failures} of {n_samples} bootstrap refits failed")
    if failures:
        _logger.warning("%d of %d bootstrap refits failed and were excluded", failures, n_samples)

    array = np.array(samples)
    std = array.std(axis=0, ddof=1) if len(samples) > 1 else np.zeros(array.shape[1])
    fit.bootstrap = BootstrapSummary(
        names=fit.free, samples=array, mean=array.mean(axis=0), std=std,
        requested=n_samples, failures=failures,
    )
    return fit
