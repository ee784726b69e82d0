"""
Physical constants used by the model.

    HBAR            1.054571817e-34 J s      (CODATA 2018, exact in SI 2019)
    K_B             1.380649e-23 J/K         (CODATA 2018, exact)
    GYROMAGNETIC    2*pi * 28e9 rad/(s T)    (electron, rounded as quoted for YIG)
    YIG_SPIN_DENSITY 4.22e27 m^-3
"""

import numpy as np
from scipy import constants

HBAR = constants.hbar
K_B = constants.k

TWO_PI = 2.0 * np.pi

GYROMAGNETIC = TWO_PI * 28e9
YIG_SPIN_DENSITY = 4.22e27
DEFAULT_SPHERE_DIAMETER = 250e-6
