"""Reference values from closed forms, frozen once (mpmath, 30 digits)."""

import math

# chi-square(3) cdf at 1: pole value of P_t 1_{B_1} on flat 3-space at t = 0.5
HEAT_POLE_E3_T05 = 0.19874804309879915
# coth(1) - 1: int_1^inf dt / sinh(t)^2
GREEN_H3_R1 = 0.313035285499331303636161246931
# log(2 pi Gamma(1/3, 1000) / 3): volume outside B_10 for g = exp(-r^3), m = 2
LOG_RESIDUAL_CUBIC_R10 = -1003.86657118833694671667949329
# 2 pi int_0^inf g for g = r blended (quintic, log-domain) into exp(-r^3) on [2, 10]
VOLUME_CUBIC_DECAY = 30.70941027509662774193608965
# annulus [1, 2], m = 3, g = r, lambda = 1: h(1.5) = sinh(0.5) / (1.5 sinh 1)
ANNULUS_E3_MID = 0.295606294656691302886299265928


def exterior_e3(r, lam=1.0):
    """Minimal solution of h'' + (2/r) h' = lam h on r > 1 with h(1) = 1."""
    return math.exp(-math.sqrt(lam) * (r - 1.0)) / r


def power_law_volume(t, p):
    """V(t) for Lambda(s) = s^(-2/p)."""
    return (2.0 * t / p) ** (p / 2.0)
