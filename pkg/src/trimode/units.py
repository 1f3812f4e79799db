"""Physical constants and the unit conversions used across trimode.

Conventions: energies and frequencies in GHz (h = 1, linear frequency),
capacitances in fF, couplings, dispersive shifts and linewidths in MHz,
rates in 1/us, flux in units of the flux quantum.
"""

import math

from scipy import constants

# e^2 / (2 * 1 fF * h) expressed in GHz, so that E_C = E_CHARGE_GHZ_FF / C[fF]
E_CHARGE_GHZ_FF = constants.e ** 2 / (2.0 * 1e-15 * constants.h) / 1e9

FF = 1e-15
MHZ_PER_GHZ = 1e3
TWO_PI = 2.0 * math.pi


def charging_energy(capacitance_ff: float) -> float:
    """Charging energy e^2/2C in GHz for a capacitance in fF."""
    return E_CHARGE_GHZ_FF / capacitance_ff


def angular_rate(frequency_mhz):
    """Convert a linear frequency in MHz to an angular rate in rad/us."""
    return TWO_PI * frequency_mhz


def resonator_charge_zpf(z_r: float) -> float:
    """Zero-point charge sqrt(hbar / 2 Z_r) of a resonator, in coulomb."""
    return math.sqrt(constants.hbar / (2.0 * z_r))


def coupling_prefactor_mhz(z_r: float) -> float:
    """MHz per (Cooper pair x 1/fF) for the island-resonator charge coupling.

    g = sqrt(hbar/2Z_r) * (C^-1)_kr * 2e * <n_k>, converted from joule to MHz.
    """
    return resonator_charge_zpf(z_r) * 2.0 * constants.e / FF / constants.h / 1e6
