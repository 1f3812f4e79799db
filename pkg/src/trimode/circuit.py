"""Electrical description of the three-island circuit.

Islands 1, 2, 3 connect to the center island 0 through Josephson junctions
E_J1, E_J2 and the flux-tunable SQUID E_J3(phi_ext). Ground capacitances are
absorbed into the renormalized C_ij and C_0i.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, NamedTuple, Tuple, Union

import numpy as np
import yaml

from .errors import InputError, NonPositiveDefiniteError


CAPACITANCE_KEYS = ('c12', 'c13', 'c23', 'c01', 'c02', 'c03')
ENERGY_KEYS = ('ej1', 'ej2', 'ej3_sum')
PARAM_KEYS = CAPACITANCE_KEYS + ENERGY_KEYS + ('squid_asym', 'offset_charges')


@dataclass(frozen=True)
class CircuitParams:
    """Capacitances in fF, Josephson energies in GHz, offset charges in 2e."""

    c12: float
    c13: float
    c23: float
    c01: float
    c02: float
    c03: float
    ej1: float
    ej2: float
    ej3_sum: float
    squid_asym: float = 0.0
    offset_charges: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for key in CAPACITANCE_KEYS + ENERGY_KEYS:
            value = getattr(self, key)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise InputError(f"{key} must be a positive finite number, got {value!r}")
        if not 0.0 <= self.squid_asym < 1.0:
            raise InputError(f"squid_asym must lie in [0, 1), got {self.squid_asym!r}")
        offsets = tuple(float(q) for q in self.offset_charges)
        if len(offsets) != 3 or not all(math.isfinite(q) for q in offsets):
            raise InputError("offset_charges needs three finite values")
        object.__setattr__(self, 'offset_charges', offsets)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CircuitParams':
        """Build from a flat key set; `c0` sets c01 = c02 = c03."""
        values = dict(data)
        c0 = values.pop('c0', None)
        if c0 is not None:
            for key in ('c01', 'c02', 'c03'):
                values.setdefault(key, c0)
        unknown = set(values) - set(PARAM_KEYS)
        if unknown:
            raise InputError(f"unknown circuit keys: {', '.join(sorted(unknown))}")
        missing = [key for key in CAPACITANCE_KEYS + ENERGY_KEYS if key not in values]
        if missing:
            raise InputError(f"missing circuit keys: {', '.join(missing)}")
        converted = {}
        for key, value in values.items():
            if key == 'offset_charges':
                converted[key] = tuple(float(q) for q in (value or (0.0, 0.0, 0.0)))
            else:
                try:
                    converted[key] = float(value)
                except (TypeError, ValueError):
                    raise InputError(f"{key} must be numeric, got {value!r}")
        return cls(**converted)

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data['offset_charges'] = list(self.offset_charges)
        return data

    def replace(self, **changes) -> 'CircuitParams':
        return dataclasses.replace(self, **changes)

    @property
    def ej_fixed(self) -> Tuple[float, float]:
        return self.ej1, self.ej2


@dataclass(frozen=True)
class FluxBias:
    """Reduced external flux phi_ext / phi_0."""

    phi_ext: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.phi_ext):
            raise InputError(f"phi_ext must be finite, got {self.phi_ext!r}")


FluxLike = Union[FluxBias, float, int]


def as_flux(flux: FluxLike) -> FluxBias:
    if isinstance(flux, FluxBias):
        return flux
    return FluxBias(float(flux))


@dataclass(frozen=True)
class CapacitanceMatrix:
    """Symmetric positive definite 3x3 island capacitance matrix in fF."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (3, 3) or not np.allclose(matrix, matrix.T, rtol=0, atol=1e-12):
            raise InputError("capacitance matrix must be a symmetric 3x3 array")
        try:
            np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError:
            raise NonPositiveDefiniteError("capacitance network is degenerate (matrix not positive definite)")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    def inverse(self) -> np.ndarray:
        """C^-1 in 1/fF."""
        return np.linalg.inv(self.matrix)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


class AsymmetryMetrics(NamedTuple):
    c_delta3: float
    ej_delta: float
    ej_sigma: float
    ej_delta123: float


def squid_effective_ej(params: CircuitParams, flux: FluxLike) -> float:
    """E_J3(phi) = E_J3,sum |cos(pi phi)| sqrt(1 + d^2 tan^2(pi phi)).

    Evaluated as sqrt(cos^2 + d^2 sin^2), which stays finite at phi = 1/2.
    """
    angle = math.pi * as_flux(flux).phi_ext
    d = params.squid_asym
    return params.ej3_sum * math.sqrt(math.cos(angle) ** 2 + (d * math.sin(angle)) ** 2)


def josephson_energies(params: CircuitParams, flux: FluxLike) -> np.ndarray:
    """(E_J1, E_J2, E_J3(phi)) in GHz."""
    return np.array([params.ej1, params.ej2, squid_effective_ej(params, flux)])


def build_capacitance_matrix(params: CircuitParams) -> CapacitanceMatrix:
    c12, c13, c23 = params.c12, params.c13, params.c23
    matrix = np.array([
        [c12 + c13 + params.c01, -c12, -c13],
        [-c12, c12 + c23 + params.c02, -c23],
        [-c13, -c23, c13 + c23 + params.c03],
    ])
    return CapacitanceMatrix(matrix)


def asymmetry_metrics(params: CircuitParams, flux: FluxLike) -> AsymmetryMetrics:
    """C_Delta3 = C13 - C23, E_J,Delta, E_J,Sigma and E_DeltaJ,123 = 2 E_J3 - E_J1 - E_J2."""
    ej_sigma = params.ej1 + params.ej2
    return AsymmetryMetrics(
        c_delta3=params.c13 - params.c23,
        ej_delta=params.ej1 - params.ej2,
        ej_sigma=ej_sigma,
        ej_delta123=2.0 * squid_effective_ej(params, flux) - ej_sigma,
    )


def symmetrized(params: CircuitParams) -> CircuitParams:
    """Closest circuit with C13 = C23, C0i equal and E_J1 = E_J2 = E_J3(0)."""
    c_side = 0.5 * (params.c13 + params.c23)
    c0 = (params.c01 + params.c02 + params.c03) / 3.0
    ej = (params.ej1 + params.ej2 + params.ej3_sum) / 3.0
    return params.replace(
        c13=c_side, c23=c_side, c01=c0, c02=c0, c03=c0,
        ej1=ej, ej2=ej, ej3_sum=ej, offset_charges=(0.0, 0.0, 0.0),
    )


def load_circuit_params(path: str) -> CircuitParams:
    """Read a flat YAML/JSON mapping of circuit keys (a `circuit:` section is also accepted)."""
    with open(path, 'r') as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a mapping of circuit parameters")
    if isinstance(data.get('circuit'), dict):
        data = data['circuit']
    return CircuitParams.from_dict(data)


def dump_circuit_params(params: CircuitParams, path: str):
    with open(path, 'w') as f:
        yaml.safe_dump({'circuit': params.to_dict()}, f, sort_keys=False)
