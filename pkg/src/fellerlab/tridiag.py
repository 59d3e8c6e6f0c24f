"""Thomas algorithm for diagonally dominant tridiagonal systems.

No pivoting: for the M-matrices produced by the radial discretizations
this keeps the elimination free of cancellation, so nonnegative data give
nonnegative solutions bit for bit.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def thomas(lower, diag, upper, rhs):
    """Solve lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]."""
    n = diag.size
    cp = np.empty(n)
    dp = np.empty(n)
    x = np.empty(n)
    if n == 0:
        return x
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / den
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def implicit_steps(lower, diag, upper, scale, u, steps):
    """Apply ``steps`` backward-Euler steps.

    Row i of the (row-scaled) step matrix is (lower, diag, upper)[i] and its
    right-hand side is scale[i] * u[i]; the factorization is done once.
    """
    n = diag.size
    cp = np.empty(n)
    inv = np.empty(n)
    cp[0] = upper[0] / diag[0]
    inv[0] = 1.0 / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i] * cp[i - 1]
        inv[i] = 1.0 / den
        cp[i] = upper[i] * inv[i]
    x = u.copy()
    dp = np.empty(n)
    for _ in range(steps):
        dp[0] = scale[0] * x[0] * inv[0]
        for i in range(1, n):
            dp[i] = (scale[i] * x[i] - lower[i] * dp[i - 1]) * inv[i]
        x[n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = dp[i] - cp[i] * x[i + 1]
    return x
