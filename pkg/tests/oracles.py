"""Independent reference solvers used only by the test suite.

Everything here goes through scipy's adaptive Runge-Kutta integration of the
first-order companion system, which shares no code or method with the
package under test.
"""

import numpy as np
from scipy.integrate import solve_ivp


def integrate_ivp(n, phi, r, x1, x2, y0, lam, t_eval=None):
    """Integrate y^(n) + phi_1 y^(n-1) + ... + phi_n y = lam r y.

    Parameters
    ----------
    n : int
        Order of the equation.
    phi : sequence of callables
        Coefficients phi_1 .. phi_n as functions of x.
    r : callable
        Weight function.
    x1, x2 : float
        Integration range (x2 may be below x1).
    y0 : sequence
        Derivatives of order 0..n-1 at x1; complex entries allowed.
    lam : complex
        Spectral parameter.
    t_eval : array, optional
        Output abscissae.

    Returns
    -------
    ndarray of shape (n, len(t_eval)) with rows y, y', ..., y^(n-1).
    """
    y0 = np.asarray(y0, dtype=complex)

    def rhs(x, state):
        top = lam * r(x) * state[0]
        for j in range(1, n + 1):
            top -= phi[j - 1](x) * state[n - j]
        return np.concatenate([state[1:], [top]])

    sol = solve_ivp(rhs, (x1, x2), y0, method="DOP853",
                    rtol=1e-12, atol=1e-12, t_eval=t_eval, dense_output=False)
    assert sol.success, sol.message
    return sol.y


def shooting_determinant(n, phi, r, x1, x2, left, right, lam):
    """Boundary determinant from n fundamental solutions shot across [x1, x2]."""
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    mat = np.zeros((n, n), dtype=complex)
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        cols = integrate_ivp(n, phi, r, x1, x2, e, lam, t_eval=[x2])
        end_state = cols[:, -1]
        mat[:, k] = left @ e + right @ end_state
    return complex(np.linalg.det(mat))


def refine_eigenvalue(n, phi, r, x1, x2, left, right, lam0, spread=1e-3):
    """Secant iteration on the shooting determinant from a starting guess."""
    a = complex(lam0) - spread
    b = complex(lam0) + spread
    fa = shooting_determinant(n, phi, r, x1, x2, left, right, a)
    fb = shooting_determinant(n, phi, r, x1, x2, left, right, b)
    for _ in range(80):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        a, fa = b, fb
        b, fb = c, shooting_determinant(n, phi, r, x1, x2, left, right, c)
        if abs(b - a) < 1e-12 * max(1.0, abs(b)):
            break
    return b
