"""Coefficients of the benchmark advection-diffusion-reaction problem on the unit square.

``reaction`` returns a(t, x) itself (not a - 1).  The ``frozen_*`` fields are
the same functions written out at t = 0.
"""

import numpy as np

from .assembly import CoefficientField

NU = 0.1


def _a(t, x1, x2):
    return 1.0 - 3.0 - (2.0 - x1) * np.cos(np.pi * x2) - 2.0 * np.abs(np.sin(t + x2))


def _b(t, x1, x2):
    return ((t + 2.0) / (t + 1.0) * x1 * (x1 - 1.0) * x2,
            -np.cos(t) * (x1 - 0.5) * x2 * (x2 - 1.0))


def _a_frozen(t, x1, x2):
    return 1.0 - 3.0 - (2.0 - x1) * np.cos(np.pi * x2) - 2.0 * np.abs(np.sin(x2))


def _b_frozen(t, x1, x2):
    return (2.0 * x1 * (x1 - 1.0) * x2, -(x1 - 0.5) * x2 * (x2 - 1.0))


def initial_state(x1, x2):
    return x1 * (1.0 + np.sin(2.0 * x2))


reaction = CoefficientField(_a, time_dependent=True)
convection = CoefficientField(_b, time_dependent=True, vector=True)
frozen_reaction = CoefficientField(_a_frozen, time_dependent=False)
frozen_convection = CoefficientField(_b_frozen, time_dependent=False, vector=True)
