"""Closed-form decoherence budget.

Public inputs are linear frequencies (GHz for mode frequencies, MHz for chi,
g and kappa); conversion to angular rates in rad/us happens here. Rates are
returned in 1/us and times in us.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .charge_basis import ChargeBasisConfig, EigenSolution, SpectrumSweep, single_excitation, solve_circuit
from .circuit import CircuitParams
from .errors import DecoherenceInputError, FluxPointError, HybridizedBranchError, InputError, TrimodeError
from .units import MHZ_PER_GHZ, TWO_PI, angular_rate

_logger = logging.getLogger(__name__)

DEFAULT_FLUX_STEP = 1e-4
RICHARDSON_TOLERANCE = 1e-3
_DERIVATIVE_FLOOR = 1e-6


class Unbounded:
    """Marker for a limit that is infinite (no coupling to the decay channel)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __str__(self):
        return 'unbounded'

    def __repr__(self):
        return 'UNBOUNDED'

    def __float__(self):
        return math.inf


UNBOUNDED = Unbounded()

TimeLimit = Union[float, Unbounded]


@dataclass(frozen=True)
class NoiseEnvironment:
    """a_phi in micro flux quanta (sqrt of the 1/f prefactor), gamma1 in 1/us."""

    a_phi: float = 1.69
    n_initial: float = 0.005
    gamma1: Optional[float] = None

    def __post_init__(self):
        for key in ('a_phi', 'n_initial'):
            value = getattr(self, key)
            if not math.isfinite(value) or value < 0:
                raise InputError(f"{key} must be a non-negative number, got {value!r}")
        if self.gamma1 is not None and (not math.isfinite(self.gamma1) or self.gamma1 < 0):
            raise InputError(f"gamma1 must be non-negative, got {self.gamma1!r}")

    def thermal_population(self, photons: float = 0.0) -> float:
        """n_th = n_initial + <n>."""
        return self.n_initial + photons


def _branch_frequency(sol: EigenSolution, branch, allow_hybridized=True) -> float:
    return sol.energy(branch, allow_hybridized=allow_hybridized)


def _model_difference(params: CircuitParams, flux: float, branch, cfg: ChargeBasisConfig,
                      step: float, center: EigenSolution) -> float:
    upper = solve_circuit(params, flux + step, cfg, previous=center)
    lower = solve_circuit(params, flux - step, cfg, previous=center)
    return (_branch_frequency(upper, branch) - _branch_frequency(lower, branch)) / (2.0 * step)


def frequency_flux_derivative(source: Union[CircuitParams, SpectrumSweep], flux: float, branch,
                              cfg: Optional[ChargeBasisConfig] = None,
                              step: float = DEFAULT_FLUX_STEP) -> float:
    """d omega / d phi_ext in GHz per flux quantum.

    With circuit parameters the branch is re-solved at phi +- step (central
    difference, checked against step/2). With a computed sweep the derivative
    comes from the grid: central in the interior, one-sided at the edges.
    """
    if isinstance(branch, str):
        branch = single_excitation(branch)
    if isinstance(source, SpectrumSweep):
        derivative = branch_derivative_from_sweep(source, branch)
        nearest = int(np.argmin(np.abs(source.flux - flux)))
        if source.hybridized.get(tuple(branch), np.zeros(source.flux.size, bool))[nearest]:
            raise HybridizedBranchError(f"branch {branch} is hybridized at phi_ext={flux:.6g}")
        return float(np.interp(flux, source.flux, derivative))

    if cfg is None:
        cfg = ChargeBasisConfig()
    center = solve_circuit(source, flux, cfg)
    _branch_frequency(center, branch, allow_hybridized=False)
    coarse = _model_difference(source, flux, branch, cfg, step, center)
    fine = _model_difference(source, flux, branch, cfg, step / 2.0, center)
    if abs(coarse - fine) > RICHARDSON_TOLERANCE * abs(fine) + _DERIVATIVE_FLOOR:
        _logger.warning("flux derivative of %s at phi=%.4g changes by %.3g GHz when halving the step",
                        branch, flux, abs(coarse - fine))
    return coarse


def branch_derivative_from_sweep(sweep: SpectrumSweep, branch) -> np.ndarray:
    """np.gradient of a tracked branch over the sweep grid (GHz per flux quantum)."""
    if isinstance(branch, str):
        branch = single_excitation(branch)
    values = sweep.branch(branch)
    if sweep.flux.size < 2:
        raise InputError("a flux derivative needs at least two grid points")
    return np.gradient(values, sweep.flux)


def flux_dephasing_rate(dw_dphi: float, env: NoiseEnvironment) -> float:
    """Gamma_phi = sqrt(A_phi) |d omega / d phi| in 1/us (no 1/f logarithmic factor)."""
    return env.a_phi * 1e-6 * TWO_PI * abs(dw_dphi) * MHZ_PER_GHZ


def photon_dephasing_rate(chi: float, kappa: float, n_th: float) -> float:
    """Photon shot-noise dephasing in 1/us.

    Gamma = kappa/2 Re[sqrt((1 + 2i chi/kappa)^2 + 8i chi n_th/kappa) - 1]
    with chi and kappa as angular rates.
    """
    if not kappa > 0:
        raise DecoherenceInputError(f"kappa must be positive, got {kappa!r}")
    if n_th < 0:
        raise DecoherenceInputError(f"n_th must be non-negative, got {n_th!r}")
    k = angular_rate(kappa)
    c = angular_rate(chi)
    root = np.sqrt(complex((1.0 + 2j * c / k) ** 2 + 8j * c * n_th / k))
    return max(0.0, float(0.5 * k * (root - 1.0).real))


def photon_dephasing_small_chi(chi: float, kappa: float, n_th: float) -> float:
    """Leading term 4 chi^2 n_th / kappa of the photon dephasing rate (1/us)."""
    if not kappa > 0:
        raise DecoherenceInputError(f"kappa must be positive, got {kappa!r}")
    return 4.0 * angular_rate(chi) ** 2 * n_th / angular_rate(kappa)


def purcell_limit(kappa: float, delta: float, g: float) -> TimeLimit:
    """T1 = (Delta/g)^2 / kappa in us; UNBOUNDED when g = 0."""
    if not kappa > 0:
        raise DecoherenceInputError(f"kappa must be positive, got {kappa!r}")
    if g == 0:
        return UNBOUNDED
    ratio = delta * MHZ_PER_GHZ / g
    return ratio ** 2 / angular_rate(kappa)


def t2_limit(gamma1: float, gamma_phi: float) -> float:
    """T2 = (Gamma_1/2 + Gamma_phi)^-1 in us."""
    if gamma1 < 0 or gamma_phi < 0:
        raise DecoherenceInputError("rates must be non-negative")
    total = 0.5 * gamma1 + gamma_phi
    if total == 0:
        raise DecoherenceInputError("T2 limit needs a non-zero relaxation or dephasing rate")
    return 1.0 / total


def noise_photons_from_stark(delta_omega: float, chi: float) -> float:
    """<n> = delta_omega / (2 chi); both in MHz."""
    if chi == 0:
        raise DecoherenceInputError("dispersive shift must be non-zero")
    return delta_omega / (2.0 * chi)


def stark_shift(photons: float, chi: float) -> float:
    """AC Stark shift 2 chi <n> in MHz."""
    return 2.0 * chi * photons


def render_limit(value: TimeLimit) -> str:
    if isinstance(value, Unbounded):
        return str(value)
    return f'{value:.10g}'


def _t2_or_unbounded(gamma1: float, gamma_phi: float) -> TimeLimit:
    try:
        return t2_limit(gamma1, gamma_phi)
    except DecoherenceInputError:
        return UNBOUNDED


def decoherence_budget(params: CircuitParams, sweep: SpectrumSweep, reports, res, env: NoiseEnvironment,
                       photon_numbers: Sequence[float], cfg: ChargeBasisConfig,
                       branches: Sequence[str] = ('A', 'B'),
                       step: float = DEFAULT_FLUX_STEP) -> List[Dict[str, object]]:
    """One row per (flux point, branch): flux and photon dephasing, Purcell and T2 limits."""
    rows = []
    for phi, sol, report in zip(sweep.flux, sweep.solutions, reports):
        for mode in branches:
            occ = single_excitation(mode)
            try:
                if sol.labels[sol.index_of(occ)].hybridized:
                    _logger.info("skipping hybridized branch %s at phi=%.4g", mode, phi)
                    continue
                dw = frequency_flux_derivative(params, float(phi), occ, cfg, step)
            except TrimodeError as exc:
                raise FluxPointError(float(phi), exc) from exc

            chi = report.chi_total.get(mode, 0.0)
            g = report.g.get(mode, 0.0)
            delta = report.delta.get(mode, sol.energy(occ) - res.omega_r)
            gamma_flux = flux_dephasing_rate(dw, env)
            row = {
                'flux': float(phi),
                'branch': mode,
                'dw_dphi': dw,
                'gamma_phi_flux': gamma_flux,
            }
            gamma1 = env.gamma1 if env.gamma1 is not None else 0.0
            for photons in photon_numbers:
                gamma_photon = photon_dephasing_rate(chi, res.kappa, env.thermal_population(photons))
                row[f'gamma_phi_photon_n{photons:g}'] = gamma_photon
                row[f't2_limit_n{photons:g}'] = _t2_or_unbounded(gamma1, gamma_flux + gamma_photon)
            gamma_photon = photon_dephasing_rate(chi, res.kappa, env.thermal_population())
            row['delta_GHz'] = delta
            row['g_MHz'] = g
            row['t1_purcell'] = purcell_limit(res.kappa, delta, g)
            row['t2_limit'] = _t2_or_unbounded(gamma1, gamma_flux + gamma_photon)
            rows.append(row)
    return rows


def purcell_curve(flux: Sequence[float], reports, res, detunings: Sequence[float],
                  branches: Sequence[str] = ('A', 'B')) -> List[Dict[str, object]]:
    """Purcell T1 over a detuning grid (GHz), one row per (flux, branch, detuning).

    g is taken from the dispersive report of each flux point.
    """
    rows = []
    for phi, report in zip(flux, reports):
        for mode in branches:
            if mode not in report.g:
                continue
            g = report.g[mode]
            for delta in detunings:
                rows.append({
                    'flux': float(phi),
                    'branch': mode,
                    'g_MHz': g,
                    'delta_GHz': float(delta),
                    't1_purcell': purcell_limit(res.kappa, float(delta), g),
                })
    return rows
