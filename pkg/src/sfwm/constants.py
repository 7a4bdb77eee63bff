"""Physical constants and fixed numerical knobs shared across the package.

Units used throughout: angular frequency in rad/fs, wavelength in um,
propagation constants in 1/um, fiber length in m, nonlinear coefficient
in 1/(W km), peak power in W.
"""

import math

# Speed of light in um/fs.
C_UM_PER_FS = 0.299792458

# Three-term Sellmeier fit for fused silica (Malitson, JOSA 55, 1205, 1965).
# B_j are dimensionless, C_j in um^2.
SILICA_B = (0.6961663, 0.4079426, 0.8974794)
SILICA_C = (0.0684043**2, 0.1162414**2, 9.896161**2)
SILICA_RANGE_UM = (0.21, 3.7)

# Gaussian fit to the sinc amplitude: sinc(x) ~ exp(-GAMMA_SINC x^2) at equal FWHM.
GAMMA_SINC = 0.193

# Phasematching residual accepted after root refinement (1/um).
TOL_PHASEMATCH = 1e-9

# Schmidt eigenvalues below this are dropped before computing K.
SCHMIDT_FLOOR = 1e-12

# Stokes side of the silica Raman gain band (THz).
RAMAN_BAND_THZ = 50.0

# 1/(W km) -> 1/(W um)
GAMMA_TO_PER_UM = 1e-9
# m -> um
M_TO_UM = 1e6
# fs/um^2 -> ps/(nm km)
D_FS_PER_UM2_TO_PS_NM_KM = 1e3


def omega_from_lambda(lam_um):
    return 2.0 * math.pi * C_UM_PER_FS / lam_um


def lambda_from_omega(omega):
    return 2.0 * math.pi * C_UM_PER_FS / omega
