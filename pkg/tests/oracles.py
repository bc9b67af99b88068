"""Independent reference computations used by the tests.

These deliberately avoid the package's Galerkin/assembly code paths: the state
oracle is a shooting method on the first-order system integrated with a
high-order adaptive Runge-Kutta scheme, and quadratures are closed forms or
high-degree tensor rules.
"""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def shoot_phase(Bbar_fn, c, t_eval=None, rtol=1e-12, atol=1e-14):
    """Solve (B K')' = c (1-t) cos K, K(0)=0, K'(1)=0 by backward shooting.

    Integrates K' = k/B, k' = c (1-t) cos K backward from t=1 with K(1) = s,
    k(1) = 0 and finds the s in (-pi/2, 0] with K(0) = 0.  Returns (t, K).
    """
    def rhs(t, y):
        K, k = y
        return [k / Bbar_fn(t), c * (1.0 - t) * np.cos(K)]

    def K_at_0(s):
        sol = solve_ivp(rhs, (1.0, 0.0), [s, 0.0], rtol=rtol, atol=atol,
                        method="DOP853")
        return sol.y[0, -1]

    if c == 0:
        t = np.linspace(0, 1, 11) if t_eval is None else np.asarray(t_eval)
        return t, np.zeros_like(t)
    s_star = brentq(K_at_0, -np.pi / 2 + 1e-12, 0.0, xtol=1e-14)
    t = np.linspace(0.0, 1.0, 2001) if t_eval is None else np.asarray(t_eval)
    sol = solve_ivp(rhs, (1.0, 0.0), [s_star, 0.0], rtol=rtol, atol=atol,
                    method="DOP853", t_eval=t[::-1], dense_output=False)
    return t, sol.y[0][::-1]


def curve_from_phase(t, K):
    """Reference curve by high-order quadrature of (cos K, sin K)."""
    from scipy.integrate import cumulative_simpson

    x = cumulative_simpson(np.cos(K), x=t, initial=0.0)
    z = cumulative_simpson(np.sin(K), x=t, initial=0.0)
    return np.stack([x, z], axis=1)


def compliance_from_phase(t, K):
    """Reference compliance int (1-t) |sin K| via Simpson on a fine grid."""
    from scipy.integrate import simpson

    return simpson((1.0 - t) * np.abs(np.sin(K)), x=t)


def fd_gradient(fun, x, step=1e-6):
    """Central finite differences of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2 * step)
    return g
