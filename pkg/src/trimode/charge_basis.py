"""Exact diagonalization of the circuit Hamiltonian in the island charge basis.

H = 4 (n - n_g)^T E_C (n - n_g) - sum_i E_Ji cos(phi_i), with E_C = (e^2/2) C^-1
and cos(phi_i) acting as nearest-neighbour hopping in the charge of island i.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse
from tqdm import tqdm

from .circuit import CircuitParams, FluxLike, as_flux, build_capacitance_matrix, josephson_energies
from .errors import (
    BasisTruncationError,
    BranchNotFoundError,
    CutoffError,
    EigensolverError,
    FluxPointError,
    HybridizedBranchError,
    InputError,
    TrimodeError,
)
from .labeling import StateLabel, format_occupation, label_eigenstates
from .normal_modes import MODES, PAIRS, EffectiveParams, Occupation, effective_model, pair_key
from .units import E_CHARGE_GHZ_FF

_logger = logging.getLogger(__name__)

MIN_N_MAX = 3
MIN_DISPERSION_SAMPLES = 3
TRUNCATION_SIGMAS = 3.0


@dataclass(frozen=True)
class ChargeBasisConfig:
    n_max: int = 7
    n_levels: int = 12

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < MIN_N_MAX:
            raise CutoffError(f"n_max must be an integer >= {MIN_N_MAX}, got {self.n_max!r}")
        if self.n_levels < 1 or self.n_levels > self.dimension:
            raise CutoffError(f"n_levels must lie in [1, {self.dimension}], got {self.n_levels!r}")

    @property
    def dimension(self) -> int:
        return (2 * self.n_max + 1) ** 3


class ChargeBasis:
    """Product basis |n_1, n_2, n_3> with n_i in [-n_max, n_max], island 1 most significant."""

    def __init__(self, n_max: int, offset_charges: Sequence[float] = (0.0, 0.0, 0.0)):
        self.n_max = n_max
        self.size = 2 * n_max + 1
        self.offset_charges = np.asarray(offset_charges, dtype=float)
        values = np.arange(-n_max, n_max + 1)
        grids = np.meshgrid(values, values, values, indexing='ij')
        self.charges = np.stack([g.ravel() for g in grids], axis=1)

    @property
    def dimension(self) -> int:
        return self.charges.shape[0]

    @property
    def shifted_charges(self) -> np.ndarray:
        """n - n_g per basis vector, in Cooper pairs."""
        return self.charges - self.offset_charges

    def charge_operator(self, island: int) -> sparse.csr_matrix:
        """Diagonal n_k - n_g,k for island k in {1, 2, 3}."""
        if island not in (1, 2, 3):
            raise InputError(f"island must be 1, 2 or 3, got {island!r}")
        return sparse.diags(self.shifted_charges[:, island - 1], 0, format='csr')

    def hopping_operator(self, island: int) -> sparse.csr_matrix:
        """(e^{i phi_k} + e^{-i phi_k}) / 2, i.e. cos(phi_k)."""
        shift = sparse.diags(np.ones(self.size - 1), 1, format='csr')
        single = 0.5 * (shift + shift.T)
        ident = sparse.identity(self.size, format='csr')
        factors = [ident, ident, ident]
        factors[island - 1] = single
        return sparse.kron(sparse.kron(factors[0], factors[1]), factors[2], format='csr')


@dataclass
class EigenSolution:
    """Lowest eigenpairs; energies are transition frequencies from the ground state (GHz)."""

    energies: np.ndarray
    states: np.ndarray = field(repr=False)
    ground_energy: float = 0.0
    labels: Optional[List[StateLabel]] = None
    basis: Optional[ChargeBasis] = field(default=None, repr=False)
    flux: Optional[float] = None

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    def index_of(self, occupation: Occupation, allow_hybridized: bool = True) -> int:
        if self.labels is None:
            raise BranchNotFoundError("solution carries no labels")
        occupation = tuple(occupation)
        for idx, lab in enumerate(self.labels):
            if lab.occupation == occupation:
                if lab.hybridized and not allow_hybridized:
                    raise HybridizedBranchError(
                        f"state {format_occupation(occupation)} is hybridized (overlap {lab.overlap:.2f})"
                    )
                return idx
        raise BranchNotFoundError(
            f"state {format_occupation(occupation)} is not among the lowest {self.n_levels} levels"
        )

    def energy(self, occupation: Occupation, allow_hybridized: bool = True) -> float:
        return float(self.energies[self.index_of(occupation, allow_hybridized)])


class ModeSpectrum(NamedTuple):
    """Mode frequencies and Kerr terms read off a labeled exact spectrum (GHz)."""

    frequencies: Dict[str, float]
    self_kerr: Dict[str, float]
    cross_kerr: Dict[Tuple[str, str], float]


@dataclass
class SpectrumSweep:
    """Labeled spectra over a flux grid with per-label transition branches."""

    flux: np.ndarray
    solutions: List[EigenSolution] = field(repr=False)
    branches: Dict[Occupation, np.ndarray] = field(default_factory=dict, repr=False)
    hybridized: Dict[Occupation, np.ndarray] = field(default_factory=dict, repr=False)

    def branch(self, occupation: Occupation) -> np.ndarray:
        occupation = tuple(occupation)
        if occupation not in self.branches:
            raise BranchNotFoundError(f"no branch {format_occupation(occupation)} in sweep")
        return self.branches[occupation]

    def max_jump(self, occupation: Occupation) -> float:
        values = self.branch(occupation)
        steps = np.abs(np.diff(values))
        steps = steps[np.isfinite(steps)]
        return float(steps.max()) if steps.size else 0.0


def single_excitation(m: str) -> Occupation:
    occ = [0, 0, 0]
    occ[MODES.index(m)] = 1
    return tuple(occ)


def double_excitation(m: str) -> Occupation:
    occ = [0, 0, 0]
    occ[MODES.index(m)] = 2
    return tuple(occ)


def pair_excitation(m: str, n: str) -> Occupation:
    occ = [0, 0, 0]
    occ[MODES.index(m)] = 1
    occ[MODES.index(n)] = 1
    return tuple(occ)


def charging_matrix(params: CircuitParams) -> np.ndarray:
    """E_C matrix (e^2/2) C^-1 in GHz."""
    return E_CHARGE_GHZ_FF * build_capacitance_matrix(params).inverse()


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


def harmonic_charge_covariance(params: CircuitParams, flux: FluxLike) -> np.ndarray:
    """Ground-state covariance of the node charges in the quadratic approximation.

    Sigma = 1/2 K^-1/2 (K^1/2 J K^1/2)^1/2 K^-1/2 with K = 8 E_C.
    """
    k = 8.0 * charging_matrix(params)
    j = np.diag(josephson_energies(params, flux))
    k_half = _sqrt_psd(k)
    k_half_inv = np.linalg.inv(k_half)
    inner = _sqrt_psd(k_half @ j @ k_half)
    return 0.5 * k_half_inv @ inner @ k_half_inv


def check_truncation(variances: np.ndarray, n_max: int, stage: str):
    limit = (n_max / TRUNCATION_SIGMAS) ** 2
    worst = int(np.argmax(variances))
    if variances[worst] > limit:
        raise BasisTruncationError(
            f"{stage} charge variance {variances[worst]:.3f} of island {worst + 1} exceeds "
            f"(n_max/3)^2 = {limit:.3f}; increase n_max above {n_max}"
        )


def build_charge_hamiltonian(params: CircuitParams, flux: FluxLike, cfg: ChargeBasisConfig,
                             basis: Optional[ChargeBasis] = None) -> sparse.csr_matrix:
    if basis is None:
        basis = ChargeBasis(cfg.n_max, params.offset_charges)
    covariance = harmonic_charge_covariance(params, flux)
    check_truncation(np.diag(covariance), cfg.n_max, 'estimated')

    ec = charging_matrix(params)
    shifted = basis.shifted_charges
    kinetic = 4.0 * np.einsum('ki,ij,kj->k', shifted, ec, shifted)
    h = sparse.diags(kinetic, 0, format='csr')
    for island, ej in enumerate(josephson_energies(params, flux), start=1):
        h = h - ej * basis.hopping_operator(island)
    return h.tocsr()


def diagonalize(h, n_levels: int, basis: Optional[ChargeBasis] = None) -> EigenSolution:
    dense = h.toarray() if sparse.issparse(h) else np.asarray(h)
    if n_levels < 1 or n_levels > dense.shape[0]:
        raise CutoffError(f"n_levels must lie in [1, {dense.shape[0]}], got {n_levels}")
    try:
        energies, states = linalg.eigh(dense, subset_by_index=[0, n_levels - 1])
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"eigensolver failed: {exc}")
    ground = float(energies[0])
    return EigenSolution(energies=energies - ground, states=states, ground_energy=ground, basis=basis)


def ground_state_variances(sol: EigenSolution) -> np.ndarray:
    psi = sol.states[:, 0]
    prob = psi ** 2 if np.isrealobj(psi) else np.abs(psi) ** 2
    shifted = sol.basis.shifted_charges
    mean = prob @ shifted
    return prob @ (shifted - mean) ** 2


def label_states(sol: EigenSolution, ep: EffectiveParams,
                 previous: Optional[EigenSolution] = None) -> EigenSolution:
    """Attach (n_A, n_B, n_C) labels; hybridized states follow `previous` when given."""
    if sol.basis is None:
        raise InputError("label_states needs a solution that carries its charge basis")
    prev_states = prev_labels = None
    if previous is not None and previous.labels is not None:
        prev_states, prev_labels = previous.states, previous.labels
    labels, _ = label_eigenstates(sol.states, sol.basis.shifted_charges, ep, prev_states, prev_labels)
    sol.labels = labels
    return sol


def _solve_unlabeled(params: CircuitParams, flux: float, cfg: ChargeBasisConfig) -> EigenSolution:
    basis = ChargeBasis(cfg.n_max, params.offset_charges)
    h = build_charge_hamiltonian(params, flux, cfg, basis)
    sol = diagonalize(h, cfg.n_levels, basis)
    check_truncation(ground_state_variances(sol), cfg.n_max, 'computed')
    sol.flux = float(flux)
    return sol


def solve_circuit(params: CircuitParams, flux: FluxLike, cfg: ChargeBasisConfig,
                  previous: Optional[EigenSolution] = None) -> EigenSolution:
    """Build, diagonalize and label the circuit at one flux point."""
    phi = as_flux(flux).phi_ext
    sol = _solve_unlabeled(params, phi, cfg)
    return label_states(sol, effective_model(params, phi), previous)


def flux_sweep(params: CircuitParams, grid: Sequence[float], cfg: ChargeBasisConfig,
               workers: int = 1, progress: bool = False) -> SpectrumSweep:
    flux = np.asarray(grid, dtype=float)
    if flux.ndim != 1 or flux.size == 0:
        raise InputError("flux grid must be a non-empty 1-D sequence")
    if np.any(np.diff(flux) < 0) or flux[0] < 0.0 or flux[-1] > 1.0:
        raise InputError("flux grid must be sorted and lie within [0, 1]")

    def solve(phi):
        try:
            return _solve_unlabeled(params, phi, cfg)
        except TrimodeError as exc:
            raise FluxPointError(phi, exc) from exc

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        iterator = pool.map(solve, flux)
        raw = list(tqdm(iterator, total=flux.size, desc='flux sweep', disable=not progress, leave=False))

    solutions = []
    previous = None
    for phi, sol in zip(flux, raw):
        try:
            previous = label_states(sol, effective_model(params, phi), previous)
        except TrimodeError as exc:
            raise FluxPointError(phi, exc) from exc
        solutions.append(previous)

    branches: Dict[Occupation, np.ndarray] = {}
    hybridized: Dict[Occupation, np.ndarray] = {}
    for k, sol in enumerate(solutions):
        for energy, lab in zip(sol.energies, sol.labels):
            if lab.occupation not in branches:
                branches[lab.occupation] = np.full(flux.size, np.nan)
                hybridized[lab.occupation] = np.zeros(flux.size, dtype=bool)
            branches[lab.occupation][k] = energy
            hybridized[lab.occupation][k] = lab.hybridized

    _logger.debug("flux sweep over %d points produced %d branches", flux.size, len(branches))
    return SpectrumSweep(flux=flux, solutions=solutions, branches=branches, hybridized=hybridized)


def charge_dispersion(params: CircuitParams, flux: FluxLike, level: Occupation,
                      cfg: ChargeBasisConfig, samples: int = 3) -> float:
    """Peak-to-peak variation (GHz) of a labeled transition over island offset charges.

    Each island offset runs over one full period [0, 1) in `samples` steps (at
    least 3). The spectrum is only even under flipping all three offsets at once,
    so no single island can be folded onto half a period.
    """
    samples = max(MIN_DISPERSION_SAMPLES, samples)
    offsets = np.arange(samples) / samples
    values = []
    for ng in np.array(np.meshgrid(offsets, offsets, offsets, indexing='ij')).reshape(3, -1).T:
        shifted = params.replace(offset_charges=tuple(ng))
        sol = solve_circuit(shifted, flux, cfg)
        values.append(sol.energy(level))
    return float(max(values) - min(values))


def single_transmon_levels(ej: float, ec: float, ng: float = 0.0, n_max: int = 20,
                           n_levels: int = 4) -> np.ndarray:
    """Transition energies of a single transmon 4 E_C (n - n_g)^2 - E_J cos(phi)."""
    n = np.arange(-n_max, n_max + 1)
    diagonal = 4.0 * ec * (n - ng) ** 2
    off_diagonal = np.full(n.size - 1, -ej / 2.0)
    evals = linalg.eigvalsh_tridiagonal(diagonal, off_diagonal, select='i',
                                        select_range=(0, n_levels - 1), check_finite=False)
    return evals - evals[0]


def mode_spectrum_from_levels(sol: EigenSolution) -> ModeSpectrum:
    """Frequencies E(1_m), self-Kerr E(2_m) - 2E(1_m), cross-Kerr E(1_m 1_n) - E(1_m) - E(1_n)."""

    def lookup(occ):
        try:
            return sol.energy(occ)
        except BranchNotFoundError:
            return None

    frequencies, self_kerr, cross_kerr = {}, {}, {}
    for m in MODES:
        e1 = lookup(single_excitation(m))
        if e1 is None:
            continue
        frequencies[m] = e1
        e2 = lookup(double_excitation(m))
        if e2 is not None:
            self_kerr[m] = e2 - 2.0 * e1
    for m, n in PAIRS:
        if m in frequencies and n in frequencies:
            e11 = lookup(pair_excitation(m, n))
            if e11 is not None:
                cross_kerr[pair_key(m, n)] = e11 - frequencies[m] - frequencies[n]
    return ModeSpectrum(frequencies, self_kerr, cross_kerr)
