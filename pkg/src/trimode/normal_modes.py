"""Normal-mode description of the three-island circuit.

The node phases are rotated into the fixed mode basis theta = T phi. Mode A is
the antisymmetric island 1/2 mode, mode B the island-3 mode and mode C the
collective mode sitting well above the other two. The fourth-order expansion
of the Josephson potential gives a bosonic Hamiltonian with self-Kerr,
cross-Kerr and number-conserving exchange couplings.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, sparse

from .circuit import (
    CapacitanceMatrix,
    CircuitParams,
    FluxLike,
    build_capacitance_matrix,
    josephson_energies,
)
from .errors import BranchNotFoundError, CutoffError, EigensolverError, ModelValidityError
from .units import E_CHARGE_GHZ_FF

_logger = logging.getLogger(__name__)

MODES = ('A', 'B', 'C')
PAIRS = (('A', 'B'), ('A', 'C'), ('B', 'C'))

_S2, _S3, _S6 = math.sqrt(2.0), math.sqrt(3.0), math.sqrt(6.0)
TRANSFORM = np.array([
    [-1.0 / _S2, 1.0 / _S2, 0.0],
    [-1.0 / _S6, -1.0 / _S6, 2.0 / _S6],
    [1.0 / _S3, 1.0 / _S3, 1.0 / _S3],
])
TRANSFORM.setflags(write=False)

DEFAULT_CUTOFF = 5
HYBRIDIZATION_THRESHOLD = 0.5

Occupation = Tuple[int, int, int]


def pair_key(m: str, n: str) -> Tuple[str, str]:
    """Canonical (ordered) key of a mode pair."""
    if m == n or m not in MODES or n not in MODES:
        raise KeyError(f"invalid mode pair ({m}, {n})")
    return (m, n) if MODES.index(m) < MODES.index(n) else (n, m)


def parse_pair(text: str) -> Tuple[str, str]:
    letters = [ch for ch in text.upper() if ch.isalpha()]
    if len(letters) != 2:
        raise KeyError(f"invalid mode pair {text!r}")
    return pair_key(letters[0], letters[1])


@dataclass(frozen=True)
class TransformedMatrices:
    """C~ = T C T^T (fF) and J~ = T J T^T (GHz) with J = diag(E_J1, E_J2, E_J3(phi))."""

    c_tilde: np.ndarray = field(repr=False)
    j_tilde: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    ej: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ModeParams:
    omega: float
    omega0: float
    ec: float
    ej_prime: float
    alpha: float
    beta: float

    @property
    def transmon_ratio(self) -> float:
        return self.ej_prime / self.ec


@dataclass(frozen=True)
class PairParams:
    g: float
    alpha_cross: float
    gamma: float


@dataclass(frozen=True)
class EffectiveParams:
    """Effective bosonic-model quantities, all in GHz.

    `omega` is the dressed frequency omega_0 + alpha + sum(alpha_mn)/2 that enters
    the Hamiltonian; `omega0` is the harmonic sqrt(8 E_C E'_J).
    """

    modes: Mapping[str, ModeParams]
    pairs: Mapping[Tuple[str, str], PairParams]

    def mode(self, m: str) -> ModeParams:
        return self.modes[m]

    def pair(self, m: str, n: str) -> PairParams:
        return self.pairs[pair_key(m, n)]

    def omega(self, m: str) -> float:
        return self.modes[m].omega

    def g(self, m: str, n: str) -> float:
        return self.pair(m, n).g

    def alpha_cross(self, m: str, n: str) -> float:
        return self.pair(m, n).alpha_cross

    def with_couplings_zeroed(self, pairs: Optional[Sequence[Tuple[str, str]]] = None) -> 'EffectiveParams':
        """Copy with g_mn = 0 on the given pairs (default: AB and AC, the bare-mode variant)."""
        targets = {pair_key(*p) for p in (pairs if pairs is not None else (('A', 'B'), ('A', 'C')))}
        new_pairs = {
            key: PairParams(0.0, p.alpha_cross, p.gamma) if key in targets else p
            for key, p in self.pairs.items()
        }
        return EffectiveParams(dict(self.modes), new_pairs)

    def to_record(self) -> Dict[str, float]:
        """Flat record: omega_A, ec_A, ..., g_AB, alpha_AB, gamma_AB, ..."""
        record = {}
        for m in MODES:
            mp = self.modes[m]
            for name in ('omega', 'omega0', 'ec', 'ej_prime', 'alpha', 'beta'):
                record[f'{name}_{m}'] = getattr(mp, name)
        for key in PAIRS:
            pp = self.pairs[key]
            tag = ''.join(key)
            record[f'g_{tag}'] = pp.g
            record[f'alpha_{tag}'] = pp.alpha_cross
            record[f'gamma_{tag}'] = pp.gamma
        return record


class EffectiveLevel(NamedTuple):
    energy: float
    occupation: Occupation
    overlap: float
    hybridized: bool


def transform_matrices(c: CapacitanceMatrix, params: CircuitParams, flux: FluxLike) -> TransformedMatrices:
    t = TRANSFORM
    ej = josephson_energies(params, flux)
    c_tilde = t @ c.matrix @ t.T
    j_tilde = t @ np.diag(ej) @ t.T
    # symmetrize away rounding so downstream eigensolvers see exact symmetry
    c_tilde = 0.5 * (c_tilde + c_tilde.T)
    j_tilde = 0.5 * (j_tilde + j_tilde.T)
    return TransformedMatrices(c_tilde=c_tilde, j_tilde=j_tilde, t=np.array(t), ej=ej)


def effective_parameters(tm: TransformedMatrices, params: CircuitParams) -> EffectiveParams:
    c_inv = np.linalg.inv(tm.c_tilde)
    ec = E_CHARGE_GHZ_FF * np.diag(c_inv)
    ej_prime = np.diag(tm.j_tilde).copy()

    for idx, m in enumerate(MODES[:2]):
        if ej_prime[idx] <= 0:
            raise ModelValidityError(f"E'_J of mode {m} is {ej_prime[idx]:.6g} GHz; effective model undefined")
    if ej_prime[2] <= 0:
        raise ModelValidityError(f"E'_J of mode C is {ej_prime[2]:.6g} GHz; effective model undefined")

    t4 = tm.t ** 4
    t2 = tm.t ** 2
    beta = t4 @ tm.ej
    alpha = -beta * ec / ej_prime

    pairs = {}
    for m, n in PAIRS:
        i, j = MODES.index(m), MODES.index(n)
        gamma = float(np.sum(tm.ej * t2[i] * t2[j]))
        alpha_cross = -2.0 * gamma * math.sqrt(ec[i] * ec[j]) / math.sqrt(ej_prime[i] * ej_prime[j])
        ratio = (ej_prime[i] * ej_prime[j]) / (4.0 * ec[i] * ec[j])
        g = 2.0 * E_CHARGE_GHZ_FF * c_inv[i, j] * ratio ** 0.25 + tm.j_tilde[i, j] * ratio ** -0.25
        pairs[(m, n)] = PairParams(g=float(g), alpha_cross=float(alpha_cross), gamma=gamma)

    modes = {}
    for idx, m in enumerate(MODES):
        omega0 = math.sqrt(8.0 * ec[idx] * ej_prime[idx])
        dressing = sum(pairs[pair_key(m, n)].alpha_cross for n in MODES if n != m) / 2.0
        modes[m] = ModeParams(
            omega=float(omega0 + alpha[idx] + dressing),
            omega0=float(omega0),
            ec=float(ec[idx]),
            ej_prime=float(ej_prime[idx]),
            alpha=float(alpha[idx]),
            beta=float(beta[idx]),
        )

    if modes['C'].omega <= max(modes['A'].omega, modes['B'].omega):
        _logger.warning("mode C (%.3f GHz) is not above modes A and B; check C_0i against C_ij",
                        modes['C'].omega)
    return EffectiveParams(modes, pairs)


def effective_model(params: CircuitParams, flux: FluxLike) -> EffectiveParams:
    cap = build_capacitance_matrix(params)
    return effective_parameters(transform_matrices(cap, params, flux), params)


def _resolve_cutoffs(cutoffs: Union[int, Mapping[str, int], Sequence[int]]) -> Dict[str, int]:
    if isinstance(cutoffs, int):
        resolved = {m: cutoffs for m in MODES}
    elif isinstance(cutoffs, Mapping):
        resolved = {m: int(cutoffs[m]) for m in MODES if m in cutoffs}
    else:
        resolved = {m: int(c) for m, c in zip(MODES, cutoffs)}
    if not resolved:
        raise CutoffError("at least one mode must be included")
    for m, c in resolved.items():
        if c < 2:
            raise CutoffError(f"cutoff for mode {m} is {c}; at least 2 quanta are needed")
    return resolved


def occupation_basis(cutoffs: Union[int, Mapping[str, int], Sequence[int]] = DEFAULT_CUTOFF) -> List[Occupation]:
    """Product basis in the order used by build_effective_hamiltonian; excluded modes stay at 0."""
    resolved = _resolve_cutoffs(cutoffs)
    ranges = [range(resolved[m] + 1) if m in resolved else range(1) for m in MODES]
    return [tuple(occ) for occ in itertools.product(*ranges)]


def build_effective_hamiltonian(ep: EffectiveParams,
                                cutoffs: Union[int, Mapping[str, int], Sequence[int]] = DEFAULT_CUTOFF) -> np.ndarray:
    """Matrix of H_q in the occupation basis of `occupation_basis(cutoffs)`.

    H_q = sum omega_m n_m + alpha_m/2 n_m(n_m - 1)
          + sum_{m<n} g_mn (a_m^+ a_n + a_m a_n^+) + alpha_mn n_m n_n
    """
    resolved = _resolve_cutoffs(cutoffs)
    dims = [resolved[m] + 1 if m in resolved else 1 for m in MODES]

    def embed(op_for_mode: Dict[int, sparse.spmatrix]) -> sparse.spmatrix:
        out = sparse.identity(1, format='csr')
        for idx, d in enumerate(dims):
            out = sparse.kron(out, op_for_mode.get(idx, sparse.identity(d, format='csr')), format='csr')
        return out

    lowering = [sparse.diags(np.sqrt(np.arange(1, d)), 1, shape=(d, d), format='csr') for d in dims]
    number = [sparse.diags(np.arange(d, dtype=float), 0, format='csr') for d in dims]

    total = dims[0] * dims[1] * dims[2]
    h = sparse.csr_matrix((total, total))
    for idx, m in enumerate(MODES):
        if m not in resolved:
            continue
        mp = ep.mode(m)
        n_op = number[idx]
        h = h + embed({idx: mp.omega * n_op + 0.5 * mp.alpha * (n_op @ n_op - n_op)})

    for m, n in PAIRS:
        if m not in resolved or n not in resolved:
            continue
        i, j = MODES.index(m), MODES.index(n)
        pp = ep.pair(m, n)
        hop = embed({i: lowering[i].T, j: lowering[j]})
        h = h + pp.g * (hop + hop.T) + pp.alpha_cross * embed({i: number[i], j: number[j]})

    dense = h.toarray()
    return 0.5 * (dense + dense.T)


def effective_spectrum(ep: EffectiveParams,
                       cutoffs: Union[int, Mapping[str, int], Sequence[int]] = DEFAULT_CUTOFF,
                       n_levels: Optional[int] = None) -> List[EffectiveLevel]:
    """Levels relative to the ground state (included as the first entry), labeled by dominant occupation."""
    h = build_effective_hamiltonian(ep, cutoffs)
    basis = occupation_basis(cutoffs)
    try:
        energies, vectors = linalg.eigh(h)
    except linalg.LinAlgError as exc:
        raise EigensolverError(f"effective Hamiltonian eigensolve failed: {exc}")
    energies = energies - energies[0]
    weights = np.abs(vectors) ** 2
    count = len(energies) if n_levels is None else min(n_levels, len(energies))
    levels = []
    for k in range(count):
        best = int(np.argmax(weights[:, k]))
        overlap = float(weights[best, k])
        levels.append(EffectiveLevel(
            energy=float(energies[k]),
            occupation=basis[best],
            overlap=overlap,
            hybridized=overlap < HYBRIDIZATION_THRESHOLD,
        ))
    return levels


def find_level(levels: Sequence[EffectiveLevel], occupation: Occupation) -> EffectiveLevel:
    for level in levels:
        if level.occupation == tuple(occupation):
            return level
    raise BranchNotFoundError(f"no effective level labeled {tuple(occupation)}")
