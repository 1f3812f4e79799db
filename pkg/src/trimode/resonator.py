"""Coupling of the circuit to the readout resonator and the dispersive shifts.

The resonator charge q_r = i sqrt(hbar / 2 Z_r)(a^+ - a) couples to the island
charges through the resonator row of the inverse capacitance matrix. Three
independent routes give the dispersive shift of each mode:

* the general multi-level formula over all computed eigenstates,
* the effective-model formula with a direct and a cross-Kerr mediated part,
* brute-force diagonalization of circuit levels times resonator Fock states.

Reported shifts follow the 2 chi n_r n_m convention, so the resonator moves by
2 chi when the mode is excited.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .charge_basis import (
    ChargeBasisConfig,
    EigenSolution,
    ModeSpectrum,
    double_excitation,
    flux_sweep,
    mode_spectrum_from_levels,
    pair_excitation,
    single_excitation,
    solve_circuit,
)
from .circuit import CircuitParams, build_capacitance_matrix
from .errors import (
    BranchNotFoundError,
    DispersivePoleError,
    EigensolverError,
    FluxPointError,
    InputError,
    LabelingError,
    ResonanceError,
    TrimodeError,
)
from .normal_modes import MODES, TRANSFORM, EffectiveParams, effective_model, pair_key
from .units import MHZ_PER_GHZ, coupling_prefactor_mhz

_logger = logging.getLogger(__name__)

DEFAULT_IMPEDANCE = 50.0
DISPERSIVE_VALIDITY = 5.0
MODE_C_WARNING_FRACTION = 0.05
_POLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ResonatorParams:
    """omega_r in GHz, z_r in ohm, kappa in MHz, coupling_row = (C^-1)_kr in 1/fF."""

    omega_r: float
    kappa: float
    coupling_row: Tuple[float, float, float]
    z_r: float = DEFAULT_IMPEDANCE

    def __post_init__(self):
        for key in ('omega_r', 'kappa', 'z_r'):
            value = getattr(self, key)
            if not math.isfinite(value) or value <= 0:
                raise InputError(f"resonator {key} must be positive, got {value!r}")
        row = tuple(float(r) for r in self.coupling_row)
        if len(row) != 3 or not all(math.isfinite(r) for r in row):
            raise InputError("coupling_row needs three finite entries")
        object.__setattr__(self, 'coupling_row', row)

    @classmethod
    def from_capacitances(cls, params: CircuitParams, coupling_capacitances: Sequence[float], c_r: float,
                          omega_r: float, kappa: float, z_r: float = DEFAULT_IMPEDANCE) -> 'ResonatorParams':
        """Row of the inverted island + resonator capacitance network.

        coupling_capacitances are the direct island-resonator capacitances C_kr (fF)
        and c_r the resonator capacitance to ground (fF).
        """
        c_kr = np.asarray(coupling_capacitances, dtype=float)
        if c_kr.shape != (3,) or np.any(c_kr < 0) or c_r <= 0:
            raise InputError("need three non-negative coupling capacitances and a positive c_r")
        full = np.zeros((4, 4))
        full[:3, :3] = build_capacitance_matrix(params).matrix + np.diag(c_kr)
        full[:3, 3] = full[3, :3] = -c_kr
        full[3, 3] = c_r + c_kr.sum()
        row = np.linalg.inv(full)[:3, 3]
        return cls(omega_r=omega_r, kappa=kappa, coupling_row=tuple(row), z_r=z_r)

    def with_coupling_row(self, row: Sequence[float]) -> 'ResonatorParams':
        return ResonatorParams(self.omega_r, self.kappa, tuple(row), self.z_r)

    @property
    def prefactor_mhz(self) -> float:
        return coupling_prefactor_mhz(self.z_r)


@dataclass
class ModeCouplings:
    """g_ij between computed eigenstates (MHz) and the per-mode g_m = |g_{0,1_m}|."""

    matrix: np.ndarray = field(repr=False)
    g: Dict[str, float] = field(default_factory=dict)
    g_double: Dict[str, float] = field(default_factory=dict)
    g_pair: Dict[Tuple[str, str], float] = field(default_factory=dict)


class GeneralDispersive(NamedTuple):
    chi_pairs: np.ndarray
    lambdas: np.ndarray
    chi_states: np.ndarray
    chi: Dict[str, float]
    valid: bool


@dataclass
class DispersiveReport:
    """Per-mode dispersive shifts (MHz), couplings (MHz) and detunings (GHz)."""

    chi_total: Dict[str, float]
    chi_direct: Dict[str, float]
    chi_indirect: Dict[str, float]
    g: Dict[str, float]
    delta: Dict[str, float]
    lambdas: Optional[np.ndarray] = field(default=None, repr=False)
    chi_states: Optional[np.ndarray] = field(default=None, repr=False)
    chi_general: Dict[str, float] = field(default_factory=dict)
    g_matrix: Optional[np.ndarray] = field(default=None, repr=False)


class ChiProfile(NamedTuple):
    flux: np.ndarray
    reports: List[DispersiveReport]

    def column(self, kind: str, mode: str) -> np.ndarray:
        return np.array([getattr(r, kind).get(mode, np.nan) for r in self.reports])


def charge_matrix_elements(sol: EigenSolution, island: int) -> np.ndarray:
    """<i| n_k - n_g,k |j> between the computed eigenstates, in Cooper pairs."""
    if sol.basis is None:
        raise InputError("charge matrix elements need a solution that carries its charge basis")
    op = sol.basis.charge_operator(island)
    states = sol.states
    matrix = states.conj().T @ (op @ states)
    return 0.5 * (matrix + matrix.conj().T)


def _lookup_index(sol: EigenSolution, occupation) -> Optional[int]:
    try:
        return sol.index_of(occupation)
    except BranchNotFoundError:
        return None


def linear_couplings(sol: EigenSolution, res: ResonatorParams) -> ModeCouplings:
    """g_ij = sqrt(hbar/2Z_r) sum_k (C^-1)_kr <i|q_k|j>, in MHz."""
    total = np.zeros((sol.n_levels, sol.n_levels))
    for island, row in enumerate(res.coupling_row, start=1):
        if row != 0.0:
            total = total + row * charge_matrix_elements(sol, island)
    matrix = res.prefactor_mhz * np.real_if_close(total)
    couplings = ModeCouplings(matrix=matrix)
    if sol.labels is None:
        return couplings

    ground = _lookup_index(sol, (0, 0, 0))
    if ground is None:
        return couplings
    for m in MODES:
        one = _lookup_index(sol, single_excitation(m))
        if one is None:
            continue
        couplings.g[m] = float(abs(matrix[ground, one]))
        two = _lookup_index(sol, double_excitation(m))
        if two is not None:
            couplings.g_double[m] = float(abs(matrix[one, two]))
    for m in MODES:
        one_m = _lookup_index(sol, single_excitation(m))
        for n in MODES:
            if n == m or one_m is None:
                continue
            both = _lookup_index(sol, pair_excitation(m, n))
            if both is not None:
                # g_{n,mn}: from |1_m> to |1_m 1_n>, keyed (m, n)
                couplings.g_pair[(m, n)] = float(abs(matrix[one_m, both]))
    return couplings


def harmonic_mode_coupling(ep: EffectiveParams, res: ResonatorParams, mode: str) -> float:
    """g_m (MHz) from the harmonic mode charge <0|k_m|1> = (1/2)(E'_J/2E_C)^(1/4)."""
    idx = MODES.index(mode)
    mp = ep.mode(mode)
    projection = float(np.dot(res.coupling_row, TRANSFORM[idx]))
    return abs(res.prefactor_mhz * projection * 0.5 * (mp.ej_prime / (2.0 * mp.ec)) ** 0.25)


def dispersive_shifts_general(sol: EigenSolution, couplings: ModeCouplings,
                              res: ResonatorParams) -> GeneralDispersive:
    """chi_ij = |g_ij|^2 / (w_j - w_i - w_r), Lambda_j = sum_i chi_ij, chi_j = sum_i (chi_ij - chi_ji)."""
    g = couplings.matrix
    energies = np.asarray(sol.energies, dtype=float)
    denominators = (energies[None, :] - energies[:, None] - res.omega_r) * MHZ_PER_GHZ
    g2 = np.abs(g) ** 2
    active = g2 > 0
    if np.any(active & (np.abs(denominators) < _POLE_TOLERANCE)):
        i, j = np.argwhere(active & (np.abs(denominators) < _POLE_TOLERANCE))[0]
        raise ResonanceError(f"transition {i}->{j} is resonant with the readout resonator")

    chi_pairs = np.zeros_like(g2)
    np.divide(g2, denominators, out=chi_pairs, where=active)

    valid = bool(np.all(np.abs(denominators[active]) > DISPERSIVE_VALIDITY * np.sqrt(g2[active])))
    if not valid:
        _logger.warning("dispersive approximation is marginal: some |w_j - w_i - w_r| < %g |g_ij|",
                        DISPERSIVE_VALIDITY)

    lambdas = chi_pairs.sum(axis=0)
    chi_states = chi_pairs.sum(axis=0) - chi_pairs.sum(axis=1)

    chi = {}
    ground = _lookup_index(sol, (0, 0, 0)) if sol.labels is not None else None
    if ground is not None:
        for m in MODES:
            one = _lookup_index(sol, single_excitation(m))
            if one is not None:
                chi[m] = float((chi_states[one] - chi_states[ground]) / 2.0)
    return GeneralDispersive(chi_pairs, lambdas, chi_states, chi, valid)


def _kerr_source(ep: Union[EffectiveParams, ModeSpectrum]):
    if isinstance(ep, ModeSpectrum):
        return ep.frequencies, ep.self_kerr, ep.cross_kerr
    omega = {m: ep.omega(m) for m in MODES}
    alpha = {m: ep.mode(m).alpha for m in MODES}
    cross = {pair_key(m, n): ep.alpha_cross(m, n) for m in MODES for n in MODES if m < n}
    return omega, alpha, cross


def _checked_inverse(denominator_ghz: float, what: str) -> float:
    if abs(denominator_ghz) < _POLE_TOLERANCE:
        raise DispersivePoleError(f"{what} vanishes")
    return 1.0 / (denominator_ghz * MHZ_PER_GHZ)


def dispersive_shift_effective(ep: Union[EffectiveParams, ModeSpectrum],
                               g_values: Mapping[str, float],
                               res: ResonatorParams,
                               transmon_exact: bool = True,
                               g_double: Optional[Mapping[str, float]] = None,
                               g_pair: Optional[Mapping[Tuple[str, str], float]] = None) -> DispersiveReport:
    """Effective-model shifts split into a direct and an indirect (cross-Kerr) part.

    chi_m = g_m^2/D_m - g_{m,2m}^2/2/(D_m + a_m)
          + sum_n [g_n^2/2/D_n - g_{n,mn}^2/2/(D_n + a_mn)]

    With `transmon_exact`, g_{m,2m} = sqrt(2) g_m and g_{n,mn} = g_n. Otherwise
    both must be supplied (g_pair keyed (m, n) for the 1_m -> 1_m 1_n element).
    `ep` may be the effective model or a ModeSpectrum read off exact levels.
    """
    omega, alpha, cross = _kerr_source(ep)
    modes = [m for m in MODES if m in g_values and m in omega]
    delta = {m: omega[m] - res.omega_r for m in modes}

    def g_two(m):
        if transmon_exact:
            return math.sqrt(2.0) * g_values[m]
        if g_double is None or m not in g_double:
            raise InputError(f"g_(m,2m) for mode {m} is required when transmon_exact is off")
        return g_double[m]

    def g_mixed(m, n):
        if transmon_exact:
            return g_values[n]
        if g_pair is None or (m, n) not in g_pair:
            raise InputError(f"g_(n,mn) for modes ({m}, {n}) is required when transmon_exact is off")
        return g_pair[(m, n)]

    direct, indirect, total = {}, {}, {}
    for m in modes:
        if m not in alpha:
            continue
        g_m = g_values[m]
        direct[m] = (g_m ** 2 * _checked_inverse(delta[m], f"detuning of mode {m}")
                     - 0.5 * g_two(m) ** 2 * _checked_inverse(delta[m] + alpha[m], f"D_{m} + alpha_{m}"))
        contributions = {}
        for n in modes:
            if n == m or pair_key(m, n) not in cross:
                continue
            a_mn = cross[pair_key(m, n)]
            contributions[n] = 0.5 * (
                g_values[n] ** 2 * _checked_inverse(delta[n], f"detuning of mode {n}")
                - g_mixed(m, n) ** 2 * _checked_inverse(delta[n] + a_mn, f"D_{n} + alpha_{m}{n}")
            )
        indirect[m] = sum(contributions.values())
        total[m] = direct[m] + indirect[m]
        if m != 'C' and 'C' in contributions and abs(total[m]) > 0:
            share = abs(contributions['C']) / abs(total[m])
            if share > MODE_C_WARNING_FRACTION:
                _logger.warning("mode C carries %.1f%% of chi_%s", 100.0 * share, m)

    return DispersiveReport(
        chi_total=total, chi_direct=direct, chi_indirect=indirect,
        g={m: float(g_values[m]) for m in modes}, delta=delta,
    )


def dispersive_report(sol: EigenSolution, res: ResonatorParams, ep: EffectiveParams) -> DispersiveReport:
    """Both routes at one flux point.

    The effective route takes frequencies and Kerr terms from the labeled exact
    levels and the computed g_{m,2m}, g_{n,mn}; `ep` fills whatever lies above
    the computed levels. Mode C enters through its harmonic coupling estimate
    when its excitation is not among the levels.
    """
    couplings = linear_couplings(sol, res)
    general = dispersive_shifts_general(sol, couplings, res)
    spectrum = mode_spectrum_from_levels(sol)

    g_values = dict(couplings.g)
    if 'C' not in g_values:
        g_values['C'] = harmonic_mode_coupling(ep, res, 'C')
    freqs = {m: spectrum.frequencies.get(m, ep.omega(m)) for m in g_values}
    self_kerr = {m: spectrum.self_kerr.get(m, ep.mode(m).alpha) for m in g_values}
    cross = {}
    g_double = {}
    g_pair = {}
    for m in g_values:
        g_double[m] = couplings.g_double.get(m, math.sqrt(2.0) * g_values[m])
        for n in g_values:
            if n == m:
                continue
            key = pair_key(m, n)
            cross[key] = spectrum.cross_kerr.get(key, ep.alpha_cross(m, n))
            g_pair[(m, n)] = couplings.g_pair.get((m, n), g_values[n])

    report = dispersive_shift_effective(
        ModeSpectrum(freqs, self_kerr, cross), g_values, res,
        transmon_exact=False, g_double=g_double, g_pair=g_pair,
    )
    report.lambdas = general.lambdas
    report.chi_states = general.chi_states
    report.chi_general = general.chi
    report.g_matrix = couplings.matrix
    return report


def _coupled_index(weights: np.ndarray, target: int, what: str) -> int:
    column = int(np.argmax(weights[target]))
    if weights[target, column] < 0.5:
        raise LabelingError(f"coupled state {what} is too hybridized for a dispersive reading "
                            f"(overlap {weights[target, column]:.2f})")
    return column


def chi_brute_force(sol: EigenSolution, res: ResonatorParams, fock_cutoff: int = 6,
                    modes: Sequence[str] = ('A', 'B')) -> Dict[str, float]:
    """chi_m from 2 chi_m = E(1_m,1) - E(1_m,0) - E(0,1) + E(0,0) of the coupled system.

    The coupling G (x) i(a^+ - a) keeps the counter-rotating terms.
    """
    if fock_cutoff < 3:
        raise InputError(f"resonator Fock cutoff must be >= 3, got {fock_cutoff}")
    couplings = linear_couplings(sol, res)
    g_ghz = couplings.matrix / MHZ_PER_GHZ
    n_fock = fock_cutoff + 1
    a = np.diag(np.sqrt(np.arange(1, n_fock)), 1)
    quadrature = 1j * (a.T - a)
    h = (np.kron(np.diag(sol.energies), np.eye(n_fock))
         + np.kron(np.eye(sol.n_levels), res.omega_r * np.diag(np.arange(n_fock)))
         + np.kron(g_ghz, quadrature))
    try:
        energies, vectors = linalg.eigh(h)
    except linalg.LinAlgError as exc:
        raise EigensolverError(f"coupled eigensolve failed: {exc}")
    # weights[b, e]: probability of bare product state b in eigenstate e
    weights = np.abs(vectors) ** 2

    def energy(level: int, photons: int, what: str) -> float:
        return float(energies[_coupled_index(weights, level * n_fock + photons, what)])

    ground = sol.index_of((0, 0, 0))
    e00 = energy(ground, 0, '|0,0>')
    e01 = energy(ground, 1, '|0,1>')
    chi = {}
    for m in modes:
        one = sol.index_of(single_excitation(m))
        e10 = energy(one, 0, f'|1_{m},0>')
        e11 = energy(one, 1, f'|1_{m},1>')
        chi[m] = (e11 - e10 - e01 + e00) * MHZ_PER_GHZ / 2.0
    return chi


def chi_brute_force_at(params: CircuitParams, flux: float, res: ResonatorParams, cfg: ChargeBasisConfig,
                       fock_cutoff: int = 6, modes: Sequence[str] = ('A', 'B')) -> Dict[str, float]:
    """chi_brute_force of the circuit solved at one flux point."""
    return chi_brute_force(solve_circuit(params, flux, cfg), res, fock_cutoff=fock_cutoff, modes=modes)


def chi_flux_profile(params: CircuitParams, res: ResonatorParams, grid: Sequence[float],
                     cfg: ChargeBasisConfig, workers: int = 1, progress: bool = False) -> ChiProfile:
    sweep = flux_sweep(params, grid, cfg, workers=workers, progress=progress)
    reports = []
    for phi, sol in zip(sweep.flux, sweep.solutions):
        try:
            reports.append(dispersive_report(sol, res, effective_model(params, phi)))
        except TrimodeError as exc:
            raise FluxPointError(phi, exc) from exc
    return ChiProfile(sweep.flux, reports)
