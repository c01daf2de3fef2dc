"""Unit conventions.

Internally everything is SI: frequencies in Hz (absolute optical frequency),
powers in W, lengths in m, attenuation in 1/m (power).  Boundary helpers
convert from the units people actually type into scenario files.
"""

import numpy as np

C_LIGHT = 299792458.0  # m/s
DB_KM_TO_NEPER_M = np.log(10.0) / 10.0 / 1e3


def dbm_to_watt(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p_w):
    p = np.asarray(p_w, dtype=float)
    if np.any(~(p > 0)):
        raise ValueError("watt_to_dbm needs strictly positive power")
    return 10.0 * np.log10(p) + 30.0


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


def wavelength_to_frequency(wavelength_m):
    return C_LIGHT / np.asarray(wavelength_m, dtype=float)


def frequency_to_wavelength(frequency_hz):
    return C_LIGHT / np.asarray(frequency_hz, dtype=float)


def nm_to_hz(wavelength_nm):
    return C_LIGHT / (np.asarray(wavelength_nm, dtype=float) * 1e-9)


def hz_to_nm(frequency_hz):
    return C_LIGHT / np.asarray(frequency_hz, dtype=float) * 1e9


def db_km_to_neper_m(alpha_db_km):
    """Power attenuation in dB/km to the 1/m coefficient used in exp(-alpha z)."""
    return np.asarray(alpha_db_km, dtype=float) * DB_KM_TO_NEPER_M


def neper_m_to_db_km(alpha):
    return np.asarray(alpha, dtype=float) / DB_KM_TO_NEPER_M


def dispersion_to_beta(d_ps_nm_km, s_ps_nm2_km, ref_wavelength_m):
    """Convert (D, S) at the reference wavelength to (beta2 [s^2/m], beta3 [s^3/m])."""
    d = d_ps_nm_km * 1e-6      # s/m^2
    s = s_ps_nm2_km * 1e3      # s/m^3
    lam = ref_wavelength_m
    k = lam ** 2 / (2 * np.pi * C_LIGHT)
    beta2 = -d * k
    beta3 = k ** 2 * (s + 2 * d / lam)
    return beta2, beta3


def beta_to_dispersion(beta2, beta3, ref_wavelength_m):
    """Inverse of :func:`dispersion_to_beta`, returning (D [ps/(nm km)], S [ps/(nm^2 km)])."""
    lam = ref_wavelength_m
    k = lam ** 2 / (2 * np.pi * C_LIGHT)
    d = -beta2 / k
    s = beta3 / k ** 2 - 2 * d / lam
    return d / 1e-6, s / 1e3
