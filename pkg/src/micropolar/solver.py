"""Explicit finite-difference time marching of the micropolar outflow system.

Conservative variables ``(rho, m = rho u, w = rho omega)`` are advanced by a
two-stage SSP Runge-Kutta scheme.  Convective fluxes are first-order upwind
on the interface velocity, the pressure gradient is centred and both viscous
terms use the 3-point Laplacian.  Boundary nodes are not evolved; they are
overwritten by :func:`apply_boundary` after every stage.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numba import njit

from .errors import CompatibilityViolated, NonFiniteField, PositivityLost
from .grid import Grid, trapezoid
from .model import ModelParams
from .stationary import StationaryProfile

# forcing(t, x) -> (f_rho, f_m, f_w), added to the conservative right-hand side
Forcing = Callable[[float, np.ndarray], tuple]


@dataclass(frozen=True)
class State:
    t: float
    rho: np.ndarray
    u: np.ndarray
    omega: np.ndarray
    grid: Grid

    def __post_init__(self):
        if not np.all(self.rho > 0):
            j = int(np.argmin(self.rho))
            raise PositivityLost(f"rho = {self.rho[j]:.3e} at x = {self.grid.x[j]:.4g}, t = {self.t:.6g}")

    def conservative(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.rho, self.rho * self.u, self.rho * self.omega

    @classmethod
    def from_conservative(cls, t, rho, m, w, grid) -> State:
        return cls(t, rho, m / rho, w / rho, grid)

    @classmethod
    def from_profile(cls, profile: StationaryProfile, t: float = 0.0) -> State:
        return cls(t, profile.rho_t.copy(), profile.u_t.copy(), profile.omega_t.copy(), profile.grid)


# -- initial data --------------------------------------------------------------


class Shape(enum.Enum):
    BUMP = "bump"
    GAUSSIAN = "gaussian"
    ZERO = "zero"


@dataclass(frozen=True)
class PerturbationSpec:
    """Shape and per-field amplitudes of the initial perturbation.

    ``BUMP`` is ``sin^2`` supported on ``[x_c - w, x_c + w]``; ``GAUSSIAN`` is
    ``exp(-((x - x_c)/w)^2)`` multiplied by ``1 - exp(-(x/w)^2)`` so it vanishes
    at the boundary.  Both are normalized to unit maximum on the grid.
    """

    shape: Shape = Shape.BUMP
    a_rho: float = 0.0
    a_u: float = 0.0
    a_omega: float = 0.0
    x_c: float = 1.0
    width: float = 1.0
    theta: float = 2.0
    beta: float = 0.05
    far_tol: float = 1e-8

    def profile(self, x: np.ndarray) -> np.ndarray:
        if self.shape is Shape.ZERO:
            return np.zeros_like(x)
        if self.shape is Shape.BUMP:
            s = (x - (self.x_c - self.width)) / (2 * self.width)
            b = np.where((s > 0) & (s < 1), np.sin(np.pi * s) ** 2, 0.0)
        else:
            b = np.exp(-(((x - self.x_c) / self.width) ** 2)) * -np.expm1(-((x / self.width) ** 2))
        m = np.max(b)
        return b / m if m > 0 else b


@dataclass
class InitialData:
    state: State
    weighted_norms: dict


def build_initial(profile: StationaryProfile, spec: PerturbationSpec) -> InitialData:
    """Stationary profile plus ``a * b(x)`` per field, and the initial weighted norms."""
    from .analysis import WeightSpec, weighted_norm

    x = profile.x
    b = spec.profile(x)
    if b[0] != 0.0:
        raise CompatibilityViolated(f"perturbation shape is {b[0]:.3e} at x = 0")
    if abs(b[-1]) > spec.far_tol:
        raise CompatibilityViolated(f"perturbation shape is {b[-1]:.3e} at x = L; enlarge L")
    rho = profile.rho_t + spec.a_rho * b
    if not np.all(rho > 0):
        raise PositivityLost("perturbed initial density is not positive")
    state = State(0.0, rho, profile.u_t + spec.a_u * b, profile.omega_t + spec.a_omega * b, profile.grid)
    w = WeightSpec(spec.theta, spec.beta, 0)
    norms = {
        name: weighted_norm(a * b, w, profile.grid)
        for name, a in (("phi", spec.a_rho), ("psi", spec.a_u), ("zeta", spec.a_omega))
    }
    return InitialData(state, norms)


# -- spatial operator -----------------------------------------------------------


@njit(cache=True)
def _operator(rho, u, om, h, lam, mu, nu, K, gamma, advective, drho, dm, dw):
    """Fill interior rows of the conservative right-hand side; returns the net boundary mass flux.

    Interface ``j + 1/2`` takes its upwind state from node ``j + 1`` when the
    averaged interface velocity is negative, else from node ``j``.
    """
    n1 = rho.size
    inv_h = 1.0 / h
    inv_h2 = inv_h * inv_h
    drho[0] = drho[n1 - 1] = 0.0
    dm[0] = dm[n1 - 1] = 0.0
    dw[0] = dw[n1 - 1] = 0.0
    f_lo = 0.0
    fm_l = fu_l = fw_l = 0.0
    if advective:
        pr = np.empty(n1)
        for j in range(n1):
            pr[j] = K * rho[j] ** gamma
        k = 1 if u[0] + u[1] < 0.0 else 0
        fm_l = rho[k] * u[k]
        fu_l = fm_l * u[k]
        fw_l = fm_l * om[k]
        f_lo = fm_l
    for j in range(1, n1 - 1):
        dm[j] = lam * (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv_h2
        dw[j] = nu * (om[j + 1] - 2.0 * om[j] + om[j - 1]) * inv_h2 - mu * om[j]
        if advective:
            k = j + 1 if u[j] + u[j + 1] < 0.0 else j
            fm_r = rho[k] * u[k]
            fu_r = fm_r * u[k]
            fw_r = fm_r * om[k]
            drho[j] = -(fm_r - fm_l) * inv_h
            dm[j] += -(fu_r - fu_l) * inv_h - (pr[j + 1] - pr[j - 1]) * 0.5 * inv_h
            dw[j] += -(fw_r - fw_l) * inv_h
            fm_l, fu_l, fw_l = fm_r, fu_r, fw_r
        else:
            drho[j] = 0.0
    # d/dt of h * sum(rho[1:-1]) equals the inflow through x_{1/2} minus the outflow through x_{n-1/2}
    return f_lo - fm_l if advective else 0.0


def _rhs(state: State, p: ModelParams, forcing: Forcing | None, advective: bool):
    n1 = state.rho.size
    drho, dm, dw = np.empty(n1), np.empty(n1), np.empty(n1)
    boundary_flux = _operator(
        state.rho, state.u, state.omega, state.grid.h,
        p.lam, p.mu, p.nu, p.K, p.gamma, advective, drho, dm, dw,
    )
    if forcing is not None:
        f_rho, f_m, f_w = forcing(state.t, state.grid.x)
        drho[1:-1] += f_rho[1:-1]
        dm[1:-1] += f_m[1:-1]
        dw[1:-1] += f_w[1:-1]
    if not (np.all(np.isfinite(drho)) and np.all(np.isfinite(dm)) and np.all(np.isfinite(dw))):
        raise NonFiniteField(f"non-finite right-hand side at t = {state.t:.6g}")
    return (drho, dm, dw), boundary_flux


def rhs(
    state: State,
    profile: StationaryProfile,
    p: ModelParams,
    *,
    forcing: Forcing | None = None,
    advective: bool = True,
):
    """Semi-discrete time derivative of ``(rho, rho u, rho omega)``; boundary rows are zero.

    ``advective=False`` drops the convective fluxes and the pressure gradient,
    leaving the viscous/damping subproblem.
    """
    del profile  # the operator itself does not depend on the stationary state
    return _rhs(state, p, forcing, advective)[0]


@njit(cache=True)
def _boundary(rho, u, om, u_b, om_b, rho_r, u_r, om_r):
    """In-place boundary update; returns False if the extrapolated density is not positive."""
    rho[0] = 3.0 * rho[1] - 3.0 * rho[2] + rho[3]
    u[0] = u_b
    om[0] = om_b
    n = rho.size - 1
    rho[n] = rho_r
    u[n] = u_r
    om[n] = om_r
    return rho[0] > 0.0


def _boundary_data(profile: StationaryProfile, p: ModelParams):
    return p.u_b, p.omega_b, profile.rho_t[-1], profile.u_t[-1], profile.omega_t[-1]


def apply_boundary(state: State, profile: StationaryProfile, p: ModelParams | None = None) -> State:
    """Pin ``(u, omega)(0) = (u_b, omega_b)``, extrapolate ``rho(0)`` quadratically from
    ``rho_1..rho_3``, and set ``x = L`` to the stationary far-field samples."""
    p = p or profile.params
    rho, u, om = state.rho.copy(), state.u.copy(), state.omega.copy()
    if not _boundary(rho, u, om, *_boundary_data(profile, p)):
        raise PositivityLost(f"extrapolated boundary density {rho[0]:.3e} at t = {state.t:.6g}")
    return replace(state, rho=rho, u=u, omega=om)


def stable_dt(state: State, p: ModelParams, cfl: float = 0.8) -> float:
    """``cfl * min(h / max(|u| + c), h^2 min(rho) / (2 max(lam, nu)))``."""
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    return cfl * _dt_bound(state.rho, state.u, state.grid.h, p.K, p.gamma, max(p.lam, p.nu))


@njit(cache=True)
def _dt_bound(rho, u, h, K, gamma, visc):
    speed = 0.0
    rmin = rho[0]
    for j in range(rho.size):
        s = abs(u[j]) + np.sqrt(K * gamma * rho[j] ** (gamma - 1.0))
        if s > speed:
            speed = s
        if rho[j] < rmin:
            rmin = rho[j]
    return min(h / speed, h * h * rmin / (2.0 * visc))


# kernel status codes
_OK, _NEG_INTERIOR, _NEG_BOUNDARY, _NONFINITE = 0, 1, 2, 3


@njit(cache=True)
def _ssp2(rho, u, om, dt, h, lam, mu, nu, K, gamma, advective, src0, src1,
          u_b, om_b, rho_r, u_r, om_r):
    """Heun / SSP-RK2 step on conservative variables with sources ``src0`` at ``t`` and
    ``src1`` at ``t + dt``.  Returns ``(rho, u, om, mean_boundary_flux, status)``."""
    n1 = rho.size
    R = np.empty((3, n1))
    m = rho * u
    w = rho * om
    f0 = _operator(rho, u, om, h, lam, mu, nu, K, gamma, advective, R[0], R[1], R[2])
    rho1 = rho.copy()
    u1 = u.copy()
    om1 = om.copy()
    for j in range(1, n1 - 1):
        r = rho[j] + dt * (R[0, j] + src0[0, j])
        if not r > 0.0:
            return rho1, u1, om1, 0.0, _NEG_INTERIOR
        rho1[j] = r
        u1[j] = (m[j] + dt * (R[1, j] + src0[1, j])) / r
        om1[j] = (w[j] + dt * (R[2, j] + src0[2, j])) / r
    if not _boundary(rho1, u1, om1, u_b, om_b, rho_r, u_r, om_r):
        return rho1, u1, om1, 0.0, _NEG_BOUNDARY
    f1 = _operator(rho1, u1, om1, h, lam, mu, nu, K, gamma, advective, R[0], R[1], R[2])
    rho2 = rho.copy()
    u2 = u.copy()
    om2 = om.copy()
    for j in range(1, n1 - 1):
        r = 0.5 * (rho[j] + rho1[j] + dt * (R[0, j] + src1[0, j]))
        if not r > 0.0:
            return rho2, u2, om2, 0.0, _NEG_INTERIOR
        rho2[j] = r
        u2[j] = 0.5 * (m[j] + rho1[j] * u1[j] + dt * (R[1, j] + src1[1, j])) / r
        om2[j] = 0.5 * (w[j] + rho1[j] * om1[j] + dt * (R[2, j] + src1[2, j])) / r
    if not _boundary(rho2, u2, om2, u_b, om_b, rho_r, u_r, om_r):
        return rho2, u2, om2, 0.0, _NEG_BOUNDARY
    for j in range(n1):
        if not (np.isfinite(u2[j]) and np.isfinite(om2[j]) and np.isfinite(rho2[j])):
            return rho2, u2, om2, 0.0, _NONFINITE
    return rho2, u2, om2, 0.5 * (f0 + f1), _OK


@dataclass
class MassLedger:
    """Running discrete mass balance.

    The tracked mass is ``h * sum(rho[1:-1])`` (boundary nodes are not
    evolved).  ``net_inflow`` accumulates the boundary fluxes and any mass
    sources with the integrator's own stage weights, so ``drift`` isolates
    non-conservation by the update.
    """

    initial_mass: float = float("nan")
    net_inflow: float = 0.0
    current_mass: float = float("nan")

    def start(self, state: State):
        self.initial_mass = self.current_mass = interior_mass(state)
        self.net_inflow = 0.0

    @property
    def drift(self) -> float:
        return self.current_mass - self.initial_mass - self.net_inflow


def interior_mass(state: State) -> float:
    return state.grid.h * float(np.sum(state.rho[1:-1]))


def balance_source(profile: StationaryProfile, p: ModelParams | None = None, advective: bool = True):
    """Minus the discrete operator applied to the stationary profile.

    Adding it to the right-hand side makes the sampled profile an exact
    discrete equilibrium, removing the stationarity floor.
    """
    p = p or profile.params
    R, _ = _rhs(State.from_profile(profile), p, None, advective)
    return -np.array(R)


def _sources(forcing, t, x, balance, n1):
    src = np.zeros((3, n1)) if balance is None else balance.copy()
    if forcing is not None:
        f = forcing(t, x)
        src[0] += f[0]
        src[1] += f[1]
        src[2] += f[2]
    return src


def step(
    state: State,
    dt: float,
    profile: StationaryProfile,
    p: ModelParams,
    *,
    forcing: Forcing | None = None,
    advective: bool = True,
    balance: np.ndarray | None = None,
    ledger: MassLedger | None = None,
) -> State:
    """Advance by ``dt`` with Heun's method, applying the boundary after each stage.

    ``balance`` is an optional ``(3, n+1)`` steady source (see
    :func:`balance_source`); ``forcing(t, x)`` an optional time-dependent one.
    """
    x = state.grid.x
    n1 = x.size
    src0 = _sources(forcing, state.t, x, balance, n1)
    src1 = src0 if forcing is None else _sources(forcing, state.t + dt, x, balance, n1)
    rho, u, om, flux, status = _ssp2(
        state.rho, state.u, state.omega, dt, state.grid.h,
        p.lam, p.mu, p.nu, p.K, p.gamma, advective, src0, src1,
        *_boundary_data(profile, p),
    )
    t_new = state.t + dt
    if status == _NEG_INTERIOR:
        raise PositivityLost(f"density lost positivity at t = {t_new:.6g}")
    if status == _NEG_BOUNDARY:
        raise PositivityLost(f"extrapolated boundary density not positive at t = {t_new:.6g}")
    if status == _NONFINITE:
        raise NonFiniteField(f"non-finite field at t = {t_new:.6g}")
    out = State(t_new, rho, u, om, state.grid)
    if ledger is not None:
        h = state.grid.h
        src_mass = 0.5 * h * (src0[0, 1:-1].sum() + src1[0, 1:-1].sum())
        ledger.net_inflow += dt * (flux + src_mass)
        ledger.current_mass = interior_mass(out)
    return out


Observer = Callable[[State], object]


@dataclass
class Trajectory:
    final: State
    times: list = field(default_factory=list)
    records: list = field(default_factory=list)
    steps: int = 0
    mass: MassLedger = field(default_factory=MassLedger)


class SimulationError(RuntimeError):
    def __init__(self, t: float, cause: Exception):
        super().__init__(f"step failed at t = {t:.6g}: {cause}")
        self.t = t
        self.cause = cause


def run(
    state0: State,
    t_end: float,
    profile: StationaryProfile,
    p: ModelParams,
    *,
    observer: Observer | None = None,
    output_times=(),
    cfl: float = 0.8,
    dt_max: float | None = None,
    forcing: Forcing | None = None,
    advective: bool = True,
    well_balanced: bool = False,
) -> Trajectory:
    """March ``state0`` to ``t_end``, landing exactly on every requested output time.

    ``observer(state)`` is called at each output time inside ``[t0, t_end]``
    and its return value recorded.
    """
    if t_end < state0.t:
        raise ValueError("t_end precedes the initial time")
    outs = sorted(t for t in {float(t) for t in output_times} if state0.t <= t <= t_end)
    balance = balance_source(profile, p, advective) if well_balanced else None
    traj = Trajectory(final=state0)
    traj.mass.start(state0)
    state = state0
    k = 0

    def record(s):
        if observer is not None:
            traj.times.append(s.t)
            traj.records.append(observer(s))

    while k < len(outs) and outs[k] <= state.t:
        record(state)
        k += 1
    while state.t < t_end:
        dt = stable_dt(state, p, cfl)
        if dt_max is not None:
            dt = min(dt, dt_max)
        target = outs[k] if k < len(outs) else t_end
        landing = state.t + dt >= target or math.isclose(state.t + dt, target, rel_tol=1e-12)
        if landing:
            dt = target - state.t
        try:
            state = step(
                state, dt, profile, p, forcing=forcing, advective=advective,
                balance=balance, ledger=traj.mass,
            )
        except Exception as exc:
            raise SimulationError(state.t, exc) from exc
        if landing:
            state = replace(state, t=target)
        traj.steps += 1
        while k < len(outs) and outs[k] <= state.t:
            record(state)
            k += 1
    traj.final = state
    return traj


def mass(state: State) -> float:
    return trapezoid(state.rho, state.grid.h)


# -- CSV ----------------------------------------------------------------------

SNAPSHOT_HEADER = ["x", "rho", "u", "omega"]


def write_snapshot_csv(state: State, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# t={state.t:.17g}\n")
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_HEADER)
        for row in zip(state.grid.x, state.rho, state.u, state.omega):
            w.writerow([f"{v:.17g}" for v in row])


def read_snapshot_csv(path) -> tuple[float, dict[str, np.ndarray]]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# t="):
            raise ValueError(f"missing time header in {path}")
        t = float(first[4:])
        r = csv.reader(fh)
        header = next(r)
        if header != SNAPSHOT_HEADER:
            raise ValueError(f"unexpected snapshot header {header}")
        rows = np.array([[float(v) for v in row] for row in r])
    return t, {k: rows[:, i] for i, k in enumerate(SNAPSHOT_HEADER)}
