"""Regenerate the bundled G.652.D fibre curves.

The attenuation curve is a Rayleigh + infrared-absorption + residual OH
model tuned to a low-water-peak standard single-mode fibre (0.18-0.28 dB/km
over 1400-1620 nm).  The Raman gain curve is the intermediate-broadening
13-mode model of fused silica (Hollenbeck & Cantrell, JOSA B 19, 2002),
scaled to a 0.42 1/(W km) peak, i.e. already divided by the effective area.

Both are stand-ins for digitized datasheet curves; swap the CSV files for
measured data when available.

Run from the repository root::

    python tools/make_curves.py
"""

from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "ramanqot" / "data"

C_CM = 2.99792458e10  # cm/s

# position [1/cm], amplitude, gaussian FWHM [1/cm], lorentzian FWHM [1/cm]
MODES = np.array([
    [56.25, 1.00, 52.10, 17.37],
    [100.00, 11.40, 110.42, 38.81],
    [231.25, 36.67, 175.00, 58.33],
    [362.50, 67.67, 162.50, 54.17],
    [463.00, 74.00, 135.33, 45.11],
    [497.00, 4.50, 24.50, 8.17],
    [611.50, 6.80, 41.50, 13.83],
    [691.67, 4.60, 155.00, 51.67],
    [793.67, 4.20, 59.50, 19.83],
    [835.50, 4.50, 64.30, 21.43],
    [930.00, 2.70, 150.00, 50.00],
    [1080.00, 3.10, 91.00, 30.33],
    [1215.00, 3.00, 160.00, 53.33],
])

PEAK_GAIN = 0.42  # 1/(W km)


def raman_gain(delta_f_thz):
    t = np.linspace(0.0, 6e-12, 60001)
    omega = 2 * np.pi * C_CM * MODES[:, 0]
    lor = np.pi * C_CM * MODES[:, 3]
    gau = np.pi * C_CM * MODES[:, 2]
    h = np.zeros_like(t)
    for w, a, g_l, g_g in zip(omega, MODES[:, 1], lor, gau):
        h += a * np.exp(-g_l * t) * np.exp(-(g_g ** 2) * t ** 2 / 4) * np.sin(w * t)
    big_omega = 2 * np.pi * np.asarray(delta_f_thz) * 1e12
    gain = np.trapezoid(h[None, :] * np.sin(big_omega[:, None] * t[None, :]), t, axis=1)
    gain[0] = 0.0
    return np.clip(PEAK_GAIN * gain / gain.max(), 0.0, None)


def attenuation_db_km(wavelength_nm):
    lam = np.asarray(wavelength_nm) * 1e-3  # um
    rayleigh = 0.80 / lam ** 4
    infrared = 6e11 * np.exp(-48.48 / lam)
    hydroxyl = 0.10 * np.exp(-((lam - 1.383) ** 2) / (2 * 0.012 ** 2))
    return rayleigh + infrared + hydroxyl + 0.03


def main():
    wl = np.arange(1380.0, 1650.0 + 1e-9, 2.5)
    np.savetxt(DATA / "g652d_attenuation.csv", np.column_stack([wl, attenuation_db_km(wl)]),
               delimiter=",", header="wavelength_nm,alpha_db_km", comments="", fmt=["%.1f", "%.6f"])
    df = np.round(np.arange(0.0, 40.0 + 1e-9, 0.1), 10)
    np.savetxt(DATA / "g652d_raman_gain.csv", np.column_stack([df, raman_gain(df)]),
               delimiter=",", header="delta_f_thz,gain_1_km_w", comments="", fmt=["%.1f", "%.6f"])


if __name__ == "__main__":
    main()
