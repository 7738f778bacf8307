"""
Unit conversions and the probe-to-measurement-strength mapping.
"""

import numpy as np
from scipy import constants

__all__ = ['GYROMAGNETIC_RATIO', 'tesla_to_rad_s', 'rad_s_to_tesla',
           'rad_s_to_picotesla', 'photon_flux', 'coupling_constant',
           'measurement_strength', 'D1_WAVELENGTH']

# Rb-87 ground state, rad s^-1 T^-1
GYROMAGNETIC_RATIO = 2. * np.pi * 7e9
D1_WAVELENGTH = 794.8e-9
_ELECTRON_RADIUS = constants.physical_constants[
    'classical electron radius'][0]


def tesla_to_rad_s(field):
    return GYROMAGNETIC_RATIO * np.asarray(field)


def rad_s_to_tesla(omega):
    return np.asarray(omega) / GYROMAGNETIC_RATIO


def rad_s_to_picotesla(omega):
    return rad_s_to_tesla(omega) * 1e12


def photon_flux(power, detuning, wavelength=D1_WAVELENGTH):
    """Photons per second of a probe detuned by `detuning` Hz below the
    transition at `wavelength`."""
    frequency = constants.c / wavelength - detuning
    if frequency <= 0:
        raise ValueError("Probe frequency must be > 0; it is {}."
                         .format(frequency))
    return power / (constants.h * frequency)


def coupling_constant(detuning, area=5.03e-6, f_osc=0.34):
    """g = c r_e f_osc / (A_eff delta_nu), dimensionless."""
    if detuning == 0:
        raise ValueError("Detuning must be non-zero for the dispersive "
                         "coupling.")
    return constants.c * _ELECTRON_RADIUS * f_osc / (area * abs(detuning))


def measurement_strength(power, detuning, wavelength=D1_WAVELENGTH,
                         area=5.03e-6, f_osc=0.34):
    """M = g^2 Ndot / 4 in s^-1, from probe power [W], detuning [Hz],
    effective beam area [m^2] and oscillator strength."""
    g = coupling_constant(detuning, area, f_osc)
    return g ** 2 * photon_flux(power, detuning, wavelength) / 4.
