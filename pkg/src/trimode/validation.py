"""Self-check suite run by `trimode validate`.

Each check returns a Verdict; a check that raises a trimode error fails with
the error text as detail instead of aborting the suite.
"""

import logging
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from .charge_basis import (
    ChargeBasisConfig,
    check_truncation,
    harmonic_charge_covariance,
    mode_spectrum_from_levels,
    solve_circuit,
)
from .circuit import symmetrized
from .decoherence import UNBOUNDED, photon_dephasing_rate, photon_dephasing_small_chi, purcell_limit, render_limit
from .errors import TrimodeError
from .normal_modes import TRANSFORM, effective_model
from .resonator import ResonatorParams, chi_brute_force, dispersive_report, linear_couplings

_logger = logging.getLogger(__name__)

PASS = 'PASS'
FAIL = 'FAIL'
SKIP = 'SKIP'

DECOUPLING_TOLERANCE = 1e-10
CUTOFF_TOLERANCE_GHZ = 1e-6
CUTOFF_STEP = 2
DISPERSIVE_RATIO_LIMIT = 0.05
BRUTE_FORCE_TOLERANCE = 0.05
EFFECTIVE_TOLERANCE = 0.10
SERIES_TOLERANCE = 0.02
ISLAND3_ROW = 5e-5


class Verdict(NamedTuple):
    name: str
    status: str
    detail: str = ''

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    def __str__(self):
        return f'{self.status} {self.name}' + (f': {self.detail}' if self.detail else '')


def _verdict(name: str, ok: bool, detail: str) -> Verdict:
    return Verdict(name, PASS if ok else FAIL, detail)


def check_basis_truncation(run) -> Verdict:
    worst = 0.0
    for phi in (run.grid.start, run.grid.stop):
        variances = np.diag(harmonic_charge_covariance(run.circuit, phi))
        worst = max(worst, float(variances.max()))
        check_truncation(variances, run.basis.n_max, 'estimated')
    return Verdict('truncation', PASS, f'largest charge variance {worst:.3f} at n_max={run.basis.n_max}')


def check_orthonormal_transform(run) -> Verdict:
    error = float(np.abs(TRANSFORM @ TRANSFORM.T - np.eye(3)).max())
    return _verdict('orthonormal transform', error < 1e-12, f'max |T T^T - 1| = {error:.2e}')


def check_symmetric_decoupling(run) -> Verdict:
    device = symmetrized(run.circuit)
    worst = 0.0
    for phi in run.grid.points():
        ep = effective_model(device, float(phi))
        worst = max(worst, abs(ep.g('A', 'B')), abs(ep.g('A', 'C')))
    return _verdict('symmetric decoupling', worst < DECOUPLING_TOLERANCE,
                    f'max |g_AB|, |g_AC| = {worst:.2e} GHz')


def check_kerr_factor_two(run) -> Verdict:
    ep = effective_model(symmetrized(run.circuit), 0.0)
    a, b = ep.mode('A'), ep.mode('B')
    self_error = abs(a.alpha + a.ec / 2.0)
    cross_error = abs(ep.alpha_cross('A', 'B') + np.sqrt(a.ec * b.ec) / 3.0)
    return _verdict('kerr factor of two', max(self_error, cross_error) < 1e-12,
                    f'alpha_A + E_C,A/2 = {self_error:.1e}, alpha_AB + sqrt(E_C,A E_C,B)/3 = {cross_error:.1e}')


def check_island3_coupling(run) -> Verdict:
    device = symmetrized(run.circuit)
    gaps = {}
    for phi in (run.grid.start, run.grid.stop):
        ep = effective_model(device, phi)
        gaps[phi] = abs(ep.omega('A') - ep.omega('B'))
    # evaluate where 1_A is furthest from 1_B so the eigenvectors keep their parity
    flux = max(gaps, key=gaps.get)
    omega_r = run.resonator.omega_r if run.resonator is not None else 7.0
    res = ResonatorParams(omega_r=omega_r, kappa=1.0, coupling_row=(0.0, 0.0, ISLAND3_ROW))
    sol = solve_circuit(device, flux, run.basis)
    g_a = linear_couplings(sol, res).g.get('A', 0.0)
    return _verdict('island-3 coupling of mode A', g_a < DECOUPLING_TOLERANCE, f'g_A = {g_a:.2e} MHz')


def check_cutoff_convergence(run) -> Verdict:
    larger = ChargeBasisConfig(run.basis.n_max + CUTOFF_STEP, run.basis.n_levels)
    flux = run.grid.start
    coarse = mode_spectrum_from_levels(solve_circuit(run.circuit, flux, run.basis)).frequencies
    fine = mode_spectrum_from_levels(solve_circuit(run.circuit, flux, larger)).frequencies
    shifts = {m: abs(fine[m] - coarse[m]) for m in ('A', 'B') if m in fine and m in coarse}
    if not shifts:
        return Verdict('cutoff convergence', FAIL, 'modes A and B not found among the computed levels')
    worst = max(shifts.values())
    return _verdict('cutoff convergence', worst < CUTOFF_TOLERANCE_GHZ,
                    f'n_max {run.basis.n_max} -> {larger.n_max} moves omega_A/B by {worst * 1e6:.3g} kHz')


def check_dispersive_routes(run) -> Verdict:
    name = 'dispersive oracle'
    if run.resonator is None:
        return Verdict(name, SKIP, 'no resonator configured')
    flux = run.grid.start
    sol = solve_circuit(run.circuit, flux, run.basis)
    report = dispersive_report(sol, run.resonator, effective_model(run.circuit, flux))
    modes = [m for m in ('A', 'B')
             if m in report.chi_general and report.g.get(m, 0.0) / abs(report.delta[m] * 1e3) <= DISPERSIVE_RATIO_LIMIT]
    if not modes:
        return Verdict(name, SKIP, f'g/|Delta| above {DISPERSIVE_RATIO_LIMIT} for modes A and B')
    brute = chi_brute_force(sol, run.resonator, modes=modes)
    details, ok = [], True
    for m in modes:
        general = report.chi_general[m]
        scale = max(abs(general), 1e-4)
        brute_gap = abs(brute[m] - general) / scale
        effective_gap = abs(report.chi_total[m] - general) / scale
        ok &= brute_gap <= BRUTE_FORCE_TOLERANCE and effective_gap <= EFFECTIVE_TOLERANCE
        details.append(f'chi_{m} general {general:.4g}, brute force {brute[m]:.4g}, '
                       f'effective {report.chi_total[m]:.4g} MHz')
    return _verdict(name, ok, '; '.join(details))


def check_purcell_unbounded(run) -> Verdict:
    limit = purcell_limit(1.0, 1.0, 0.0)
    rendered = render_limit(limit)
    return _verdict('purcell unbounded', limit is UNBOUNDED and rendered == 'unbounded', f'g = 0 -> {rendered}')


def check_photon_series(run) -> Verdict:
    chi, kappa, n_th = -0.019, 1.32, run.noise.n_initial or 0.005
    full = photon_dephasing_rate(chi, kappa, n_th)
    series = photon_dephasing_small_chi(chi, kappa, n_th)
    gap = abs(full - series) / series
    return _verdict('photon series', gap < SERIES_TOLERANCE,
                    f'1/Gamma = {1e-3 / full:.4g} ms, series differs by {100 * gap:.2g}%')


CHECKS: List[Tuple[str, Callable]] = [
    ('truncation', check_basis_truncation),
    ('orthonormal transform', check_orthonormal_transform),
    ('symmetric decoupling', check_symmetric_decoupling),
    ('kerr factor of two', check_kerr_factor_two),
    ('island-3 coupling of mode A', check_island3_coupling),
    ('cutoff convergence', check_cutoff_convergence),
    ('dispersive oracle', check_dispersive_routes),
    ('purcell unbounded', check_purcell_unbounded),
    ('photon series', check_photon_series),
]


def run_validation(run, checks: Optional[List[Tuple[str, Callable]]] = None) -> List[Verdict]:
    verdicts = []
    for name, check in checks or CHECKS:
        try:
            verdict = check(run)
        except TrimodeError as exc:
            verdict = Verdict(name, FAIL, str(exc))
        _logger.debug("%s", verdict)
        verdicts.append(verdict)
    return verdicts
