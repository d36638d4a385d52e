"""Independent reference computations used by the tests."""

import numpy as np
import sympy as sp
from scipy.linalg import solve_banded

from micropolar.model import ModelParams


def omega_bvp(p: ModelParams, L: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference solve of ``rho_+ u_+ w' + mu w = nu w''``, ``w(0) = omega_b``, ``w(L) = 0``."""
    h = L / n
    x = np.linspace(0.0, L, n + 1)
    a = p.rho_plus * p.u_plus
    lower = -p.nu / h**2 - a / (2 * h)  # coefficient of w_{j-1}
    diag = 2 * p.nu / h**2 + p.mu
    upper = -p.nu / h**2 + a / (2 * h)  # coefficient of w_{j+1}
    m = n - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    rhs = np.zeros(m)
    rhs[0] = -lower * p.omega_b
    w = np.empty(n + 1)
    w[0], w[-1] = p.omega_b, 0.0
    w[1:-1] = solve_banded((1, 1), ab, rhs)
    return x, w


def manufactured(p: ModelParams, L: float, amp: float = 0.05, advective: bool = True):
    """Smooth exact fields around the constant-velocity profile (``u_b = u_+``) and their forcing.

    Fields are ``profile + amp * sin(pi x / L) * g(t)`` so both boundary
    conditions hold exactly.  Returns ``(exact, forcing)``, each a function
    of ``(t, x)``.
    """
    x, t = sp.symbols("x t", real=True)
    r1 = (p.rho_plus * p.u_plus - sp.sqrt((p.rho_plus * p.u_plus) ** 2 + 4 * p.nu * p.mu)) / (2 * p.nu)
    s = sp.sin(sp.pi * x / L) * (1 + sp.Rational(1, 2) * sp.sin(2 * t))
    rho = p.rho_plus + amp * s
    u = p.u_plus + amp * s
    w = p.omega_b * sp.exp(r1 * x) + amp * s
    if advective:
        f_rho = sp.diff(rho, t) + sp.diff(rho * u, x)
        f_m = sp.diff(rho * u, t) + sp.diff(rho * u**2 + p.K * rho**p.gamma, x) - p.lam * sp.diff(u, x, 2)
        f_w = sp.diff(rho * w, t) + sp.diff(rho * u * w, x) + p.mu * w - p.nu * sp.diff(w, x, 2)
    else:
        f_rho = sp.diff(rho, t)
        f_m = sp.diff(rho * u, t) - p.lam * sp.diff(u, x, 2)
        f_w = sp.diff(rho * w, t) + p.mu * w - p.nu * sp.diff(w, x, 2)
    fields = sp.lambdify((t, x), (rho, u, w), "numpy")
    forcing = sp.lambdify((t, x), (f_rho, f_m, f_w), "numpy")

    def exact(tt, xx):
        return tuple(np.broadcast_to(np.asarray(v, dtype=float), xx.shape).copy() for v in fields(tt, xx))

    def force(tt, xx):
        return tuple(np.broadcast_to(np.asarray(v, dtype=float), xx.shape) for v in forcing(tt, xx))

    return exact, force


def mms_error(p: ModelParams, L: float, n: int, t_end: float, *, advective=True, dt=None, cfl=0.8):
    """Max-norm error over all fields at ``t_end`` for the manufactured solution on ``n`` cells."""
    from micropolar.solver import State, run
    from micropolar.stationary import build_profile

    exact, force = manufactured(p, L, advective=advective)
    prof = build_profile(p, n=n, L=L)
    x = prof.x
    s0 = State(0.0, *exact(0.0, x), prof.grid)
    traj = run(s0, t_end, prof, p, forcing=force, advective=advective, dt_max=dt, cfl=cfl)
    ref = exact(t_end, x)
    fin = traj.final
    return max(float(np.max(np.abs(a - b))) for a, b in zip((fin.rho, fin.u, fin.omega), ref)), traj
