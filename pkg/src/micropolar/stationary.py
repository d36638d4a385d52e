"""Stationary outflow profiles.

The stationary system splits into a scalar first-order ODE for the
normalized velocity ``chi = u~/u_+ = rho_+/rho~``,

    lam * u_+ * chi' = F(chi),   chi(0) = u_b/u_+,   chi(inf) = 1,

and a linear constant-coefficient equation for the microrotation whose
decaying solution is ``omega_b * exp(r1 x)``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .errors import (
    BoundViolated,
    DomainTooShort,
    EnvelopeViolated,
    NoSecondRoot,
    StepTooCoarse,
)
from .grid import Grid, ddx
from .model import DerivedConstants, ModelParams, derive_constants, mach_plus

#: ``|M_+ - 1|`` below this counts as transonic.
MACH_TOL = 1e-9


class Regime(enum.Enum):
    SUPERSONIC = "supersonic"
    TRANSONIC = "transonic"
    NONEXISTENT = "nonexistent"


def flux_F(chi, p: ModelParams):
    """``K rho_+^g (chi^-g - 1) + rho_+ u_+^2 (chi - 1)``; accepts scalars or arrays."""
    chi_arr = np.asarray(chi, dtype=float)
    if np.any(chi_arr <= 0):
        raise ValueError("flux_F requires chi > 0")
    val = p.K * p.rho_plus**p.gamma * (chi_arr ** (-p.gamma) - 1.0) + p.rho_plus * p.u_plus**2 * (
        chi_arr - 1.0
    )
    return float(val) if np.ndim(chi) == 0 else val


def deflated_F(chi: float, p: ModelParams) -> float:
    """``F(chi) / (chi - 1)`` with the removable singularity filled by ``F'(1)``.

    ``chi^-g - 1`` is evaluated as ``expm1(-g log1p(chi - 1))`` so the quotient
    keeps full relative precision next to ``chi = 1``.
    """
    if chi <= 0:
        raise ValueError("deflated_F requires chi > 0")
    a = p.K * p.rho_plus**p.gamma
    b = p.rho_plus * p.u_plus**2
    d = chi - 1.0
    if d == 0.0:
        return -p.gamma * a + b
    return a * math.expm1(-p.gamma * math.log1p(d)) / d + b


def find_chi_c(p: ModelParams) -> float:
    """The root of ``F`` other than 1.

    For ``M_+ > 1`` the deflated flux is negative as ``chi -> 0+`` and equals
    ``rho_+ (u_+^2 - c_+^2) > 0`` at ``chi = 1``, so ``(0, 1)`` brackets it.
    """
    M = mach_plus(p)
    if abs(M - 1.0) <= MACH_TOL:
        return 1.0
    if M < 1.0:
        raise NoSecondRoot(f"M_+ = {M:.12g} < 1: F has no second root below chi = 1")
    lo = 0.5
    while deflated_F(lo, p) >= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise NoSecondRoot("failed to bracket chi_c")
    return bisect(deflated_F, lo, 1.0, args=(p,), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)


@dataclass(frozen=True)
class ChiProblem:
    chi0: float
    chi_c: float | None
    regime: Regime
    M_plus: float


def classify(p: ModelParams) -> ChiProblem:
    """Existence classification: a profile exists iff ``M_+ >= 1`` and ``chi_c u_+ > u_b``."""
    M = mach_plus(p)
    chi0 = p.u_b / p.u_plus
    if M < 1.0 - MACH_TOL:
        return ChiProblem(chi0, None, Regime.NONEXISTENT, M)
    chi_c = find_chi_c(p)
    # u_+ < 0, so chi_c u_+ > u_b  <=>  chi_c < chi0
    if not chi_c * p.u_plus > p.u_b and not chi0 == 1.0:
        return ChiProblem(chi0, chi_c, Regime.NONEXISTENT, M)
    regime = Regime.TRANSONIC if abs(M - 1.0) <= MACH_TOL else Regime.SUPERSONIC
    return ChiProblem(chi0, chi_c, regime, M)


def stationary_omega(x, p: ModelParams, r1: float | None = None):
    """``omega_b * exp(r1 x)``."""
    if r1 is None:
        r1 = derive_constants(p).r1
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("x must be nonnegative")
    val = p.omega_b * np.exp(r1 * x_arr)
    return float(val) if np.ndim(x) == 0 else val


@dataclass(frozen=True)
class StationaryProfile:
    """Stationary fields sampled on the solver grid.

    ``chi_x`` is the ODE right-hand side ``F(chi)/(lam u_+)`` evaluated at the
    nodes, i.e. the exact derivative of the computed trajectory.
    """

    grid: Grid
    params: ModelParams
    regime: Regime
    chi: np.ndarray
    chi_x: np.ndarray
    rho_t: np.ndarray
    u_t: np.ndarray
    omega_t: np.ndarray
    xi0_measured: float | None = None
    envelope_consts: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def chi0(self) -> float:
        return float(self.chi[0])

    @property
    def u_t_x(self) -> np.ndarray:
        return self.params.u_plus * self.chi_x

    @property
    def rho_t_x(self) -> np.ndarray:
        return -self.params.rho_plus * self.chi_x / self.chi**2

    @property
    def omega_t_x(self) -> np.ndarray:
        return derive_constants(self.params).r1 * self.omega_t

    def constants(self) -> DerivedConstants:
        dc = derive_constants(self.params)
        if self.xi0_measured is not None:
            dc = dc.with_xi0(self.xi0_measured)
        return dc


def _rk4_chi(chi0: float, p: ModelParams, h: float, n: int, substeps: int) -> np.ndarray:
    rate = 1.0 / (p.lam * p.u_plus)
    a = p.K * p.rho_plus**p.gamma * rate
    b = p.rho_plus * p.u_plus**2 * rate
    g = p.gamma

    def f(c):
        if not c > 0:
            raise StepTooCoarse(f"RK4 stage left chi > 0 (chi = {c:.3g}); reduce h")
        return a * (c ** (-g) - 1.0) + b * (c - 1.0)

    k = h / substeps
    out = np.empty(n + 1)
    c = chi0
    out[0] = c
    for j in range(1, n + 1):
        for _ in range(substeps):
            k1 = f(c)
            k2 = f(c + 0.5 * k * k1)
            k3 = f(c + 0.5 * k * k2)
            k4 = f(c + k * k3)
            c = c + k * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not c > 0:
                raise StepTooCoarse(f"chi left (0, inf) near x = {j * h:.4g}")
        out[j] = c
    return out


def transonic_tail_bound(p: ModelParams, L: float) -> float:
    """Largest ``|chi(L) - 1|`` accepted for a transonic profile on ``[0, L]``.

    Twice the leading-order algebraic tail ``d / (1 + d |u_+| A L)`` with
    ``d = |chi0 - 1|``, deflated by ``(u_+/u_b)^(gamma+2)``.
    """
    dc = derive_constants(p)
    d = abs(p.u_b / p.u_plus - 1.0)
    k = (p.u_plus / p.u_b) ** (p.gamma + 2.0)
    return 2.0 * d / (1.0 + d * abs(p.u_plus) * dc.A * k * L)


def solve_chi_profile(
    prob: ChiProblem,
    p: ModelParams,
    grid: Grid,
    *,
    substeps: int = 16,
    far_tol: float = 1e-4,
) -> StationaryProfile:
    """Integrate the ``chi`` ODE with classical RK4 (``substeps`` per grid cell)."""
    if prob.regime is Regime.NONEXISTENT:
        raise ValueError("no stationary solution exists for these parameters")
    h, n = grid.h, grid.n
    if prob.chi0 == 1.0:
        chi = np.ones(n + 1)
    else:
        chi = _rk4_chi(prob.chi0, p, h, n, substeps)
        steps = np.diff(chi)
        sign = 1.0 if prob.chi0 < 1.0 else -1.0
        bad = np.nonzero(sign * steps < 0)[0]
        lo, hi = min(prob.chi0, 1.0), max(prob.chi0, 1.0)
        outside = np.nonzero((chi < lo) | (chi > hi))[0]
        if bad.size or outside.size:
            j = int(bad[0] + 1) if bad.size else int(outside[0])
            raise StepTooCoarse(f"chi not monotone/bracketed at x = {grid.x[j]:.6g}; reduce h")
        tail = abs(chi[-1] - 1.0)
        if prob.regime is Regime.SUPERSONIC and tail > far_tol:
            raise DomainTooShort(f"|chi(L) - 1| = {tail:.3e} > {far_tol:.1e}; increase L")
        if prob.regime is Regime.TRANSONIC and tail > transonic_tail_bound(p, grid.L):
            raise DomainTooShort(
                f"|chi(L) - 1| = {tail:.3e} exceeds algebraic tail bound "
                f"{transonic_tail_bound(p, grid.L):.3e}; increase L"
            )
    chi_x = flux_F(chi, p) / (p.lam * p.u_plus)
    chi.setflags(write=False)
    return StationaryProfile(
        grid=grid,
        params=p,
        regime=prob.regime,
        chi=chi,
        chi_x=chi_x,
        rho_t=p.rho_plus / chi,
        u_t=p.u_plus * chi,
        omega_t=stationary_omega(grid.x, p),
    )


def default_length(p: ModelParams, prob: ChiProblem | None = None, n_probe: int = 512) -> float:
    """Domain length per regime: ``12/sigma`` (supersonic) or ``50/delta~`` (transonic).

    ``sigma`` needs the measured tail rate, so the supersonic length is found
    by solving on a provisional ``12/|r1|`` domain and enlarging until
    ``L >= 12 / min(|r1|, xi0)``.
    """
    prob = prob or classify(p)
    dc = derive_constants(p)
    if prob.regime is Regime.TRANSONIC:
        return 50.0 / dc.delta_tilde
    if prob.regime is not Regime.SUPERSONIC:
        raise ValueError("no stationary solution exists for these parameters")
    L = 12.0 / abs(dc.r1)
    if prob.chi0 == 1.0:
        return L
    for _ in range(20):
        prof = solve_chi_profile(prob, p, Grid(L, n_probe), far_tol=math.inf)
        tail = np.abs(prof.chi - 1.0)
        if tail[-1] < 1e-13:
            # tail already at roundoff: rate unmeasurable, domain is ample
            return L
        rate, _ = fit_exponential_tail(prof.x, tail)
        need = 12.0 / min(abs(dc.r1), rate)
        if L >= need * (1 - 1e-12):
            return L
        L = need * 1.05
    raise DomainTooShort("domain length iteration did not converge")


def build_profile(p: ModelParams, n: int = 4096, L: float | None = None, **kw) -> StationaryProfile:
    prob = classify(p)
    if L is None:
        L = default_length(p, prob)
    return solve_chi_profile(prob, p, Grid(L, n), **kw)


# -- consistency checks ----------------------------------------------------


def d4(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative: 5-point central inside, 5-point one-sided at the ends."""
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12.0 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12.0 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12.0 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12.0 * h)
    return d


def ode_residual(profile: StationaryProfile) -> float:
    """``max |lam u_+ D chi - F(chi)|`` with ``D`` the fourth-order difference operator."""
    p = profile.params
    r = p.lam * p.u_plus * d4(profile.chi, profile.grid.h) - flux_F(profile.chi, p)
    return float(np.max(np.abs(r)))


def omega_residual(profile: StationaryProfile) -> float:
    """Central-difference residual of ``rho_+ u_+ w' + mu w - nu w''`` at interior nodes."""
    p = profile.params
    w, h = profile.omega_t, profile.grid.h
    wx = (w[2:] - w[:-2]) / (2 * h)
    wxx = (w[2:] - 2 * w[1:-1] + w[:-2]) / h**2
    return float(np.max(np.abs(p.rho_plus * p.u_plus * wx + p.mu * w[1:-1] - p.nu * wxx)))


# -- decay envelopes --------------------------------------------------------


def fit_exponential_tail(x: np.ndarray, dev: np.ndarray) -> tuple[float, float]:
    """Least-squares fit of ``log|dev|`` against ``x`` on the second half of the samples.

    Returns ``(rate, rms_residual)`` where ``|dev| ~ exp(-rate x)``.
    """
    half = len(x) // 2
    xs, ys = x[half:], np.abs(dev[half:])
    keep = ys > 0
    xs, ys = xs[keep], np.log(ys[keep])
    if xs.size < 3:
        raise ValueError("tail has fewer than 3 nonzero samples")
    coef, *_ = np.linalg.lstsq(np.vstack([xs, np.ones_like(xs)]).T, ys, rcond=None)
    res = ys - (coef[0] * xs + coef[1])
    return float(-coef[0]), float(np.sqrt(np.mean(res**2)))


def fit_algebraic_tail(x: np.ndarray, dev: np.ndarray, scale: float) -> tuple[float, float]:
    """Fit ``log|dev|`` against ``log(1 + scale x)`` on the second half; returns ``(power, rms)``."""
    half = len(x) // 2
    xs, ys = np.log1p(scale * x[half:]), np.abs(dev[half:])
    keep = ys > 0
    xs, ys = xs[keep], np.log(ys[keep])
    coef, *_ = np.linalg.lstsq(np.vstack([xs, np.ones_like(xs)]).T, ys, rcond=None)
    res = ys - (coef[0] * xs + coef[1])
    return float(-coef[0]), float(np.sqrt(np.mean(res**2)))


@dataclass
class EnvelopeReport:
    regime: Regime
    C: float
    C_by_order: dict
    xi0: float | None = None
    sigma: float | None = None
    fit_residual: float | None = None
    algebraic_residual: float | None = None
    exponential_residual: float | None = None
    details: dict = field(default_factory=dict)


def _ratio(num: np.ndarray, den: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(num == 0, 0.0, np.abs(num) / den)
    return float(np.max(r))


def validate_decay(profile: StationaryProfile, cap: float = 1e3) -> EnvelopeReport:
    """Measure the decay envelope of a profile and the smallest constant certifying it.

    Supersonic: fits the exponential tail rate ``xi0`` and returns the
    smallest ``C`` with ``|d^k (rho~ - rho_+, u~ - u_+, omega~)| <= C delta~ exp(-sigma x)``
    for ``k = 0, 1``.  Transonic: smallest ``C`` with
    ``|d^k (chi~ - 1)| <= C delta~^(k+1) / (1 + delta~ x)^(k+1)``.
    """
    p = profile.params
    x, h = profile.x, profile.grid.h
    dc = derive_constants(p)
    dev = profile.chi - 1.0

    if not np.any(dev):
        return EnvelopeReport(profile.regime, 0.0, {0: 0.0, 1: 0.0}, details={"trivial": True})

    if profile.regime is Regime.SUPERSONIC:
        xi0, resid = fit_exponential_tail(x, dev)
        if not xi0 > 0:
            raise EnvelopeViolated(f"tail does not decay (fitted rate {xi0:.3e})")
        sigma = min(abs(dc.r1), xi0)
        env = dc.delta_tilde * np.exp(-sigma * x)
        fields = {
            "rho": profile.rho_t - p.rho_plus,
            "u": profile.u_t - p.u_plus,
            "omega": profile.omega_t,
        }
        C_by = {}
        per_field = {}
        for k in (0, 1):
            cs = {}
            for name, f in fields.items():
                g = f if k == 0 else ddx(f, h)
                cs[name] = _ratio(g, env)
            per_field[k] = cs
            C_by[k] = max(cs.values())
        C = max(C_by.values())
        if not C <= cap:
            raise EnvelopeViolated(f"envelope constant {C:.3e} exceeds cap {cap:.1e}")
        d0 = abs(profile.chi0 - 1.0)
        chi_C = max(
            _ratio(dev, d0 * np.exp(-xi0 * x)),
            _ratio(ddx(dev, h), d0 * np.exp(-xi0 * x)),
        )
        return EnvelopeReport(
            profile.regime, C, C_by, xi0=xi0, sigma=sigma, fit_residual=resid,
            details={"per_field": per_field, "C_chi_own_rate": chi_C},
        )

    if profile.regime is Regime.TRANSONIC:
        delta = dc.delta_tilde
        d0 = abs(profile.chi0 - 1.0)
        dchi = ddx(dev, h)
        C_by = {
            0: _ratio(dev, delta / (1 + delta * x)),
            1: _ratio(dchi, delta**2 / (1 + delta * x) ** 2),
        }
        C_chi0 = {
            0: _ratio(dev, d0 / (1 + d0 * x)),
            1: _ratio(dchi, d0**2 / (1 + d0 * x) ** 2),
        }
        C = max(C_by.values())
        if not C <= cap:
            raise EnvelopeViolated(f"envelope constant {C:.3e} exceeds cap {cap:.1e}")
        _, exp_res = fit_exponential_tail(x, dev)
        power, alg_res = fit_algebraic_tail(x, dev, delta)
        return EnvelopeReport(
            profile.regime, C, C_by,
            algebraic_residual=alg_res, exponential_residual=exp_res,
            details={"C_chi0": C_chi0, "algebraic_power": power},
        )

    raise ValueError(f"cannot validate regime {profile.regime}")


@dataclass
class BoundReport:
    worst_margin: float
    worst_x: float
    slack: float
    C_upper: float
    C_lower: float
    delta_u: float


def verify_transonic_bounds(profile: StationaryProfile, cap: float = 10.0) -> BoundReport:
    """Check the transonic lower bound on ``u~_x`` and the two-sided ``M~ - 1`` envelope.

    The strength entering both bounds is the velocity data ``|u_b - u_+|``;
    it equals ``delta~`` whenever ``|omega_b| <= |u_b - u_+|``.  Only the
    decreasing branch ``chi0 >= 1`` (where ``u~_x > 0``) admits a transonic
    profile.
    """
    p = profile.params
    if profile.regime is not Regime.TRANSONIC:
        raise ValueError("bounds apply to transonic profiles only")
    if profile.chi0 < 1.0:
        raise ValueError("transonic profiles require chi0 >= 1")
    dc = derive_constants(p)
    x, h = profile.x, profile.grid.h
    delta_u = abs(p.u_b - p.u_plus)
    B = delta_u * dc.A

    ux = ddx(profile.u_t, h)
    uxx = ddx(ux, h)
    slack = 10.0 * h**2 * float(np.max(np.abs(uxx[1:-1])))
    lower = dc.A * (p.u_plus / p.u_b) ** (p.gamma + 2.0) * delta_u**2 / (1 + B * x) ** 2
    margin = (ux - lower)[1:-1]
    j = int(np.argmin(margin))
    worst, worst_x = float(margin[j]), float(x[1:-1][j])
    if worst < -slack:
        raise BoundViolated(worst_x, f"u~_x below lower bound by {-worst:.3e} (slack {slack:.3e})")

    # M~ = |u~| / sqrt(p'(rho~)) = M_+ chi^((gamma+1)/2)
    mach_dev = dc.M_plus * profile.chi ** ((p.gamma + 1.0) / 2.0) - 1.0
    if delta_u == 0.0:
        c_up = c_lo = 0.0
    else:
        inner = slice(1, -1)
        s = 1 + B * x[inner]
        c_up = float(np.max(np.abs(mach_dev[inner]) * s / delta_u))
        lead = (p.gamma + 1.0) * delta_u / (2.0 * abs(p.u_plus) * s)
        c_lo = float(max(0.0, np.max((lead - mach_dev[inner]) * s**2 / delta_u**2)))
    if c_up > cap or c_lo > cap:
        raise BoundViolated(float("nan"), f"M~-1 envelope constants ({c_up:.3g}, {c_lo:.3g}) exceed {cap}")
    return BoundReport(worst, worst_x, slack, c_up, c_lo, delta_u)


# -- CSV ----------------------------------------------------------------------

PROFILE_HEADER = ["x", "rho_t", "u_t", "omega_t", "chi"]


def write_profile_csv(profile: StationaryProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_HEADER)
        for row in zip(profile.x, profile.rho_t, profile.u_t, profile.omega_t, profile.chi):
            w.writerow([f"{v:.17g}" for v in row])


def read_profile_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != PROFILE_HEADER:
            raise ValueError(f"unexpected profile header {header}")
        rows = np.array([[float(v) for v in row] for row in r])
    return {k: rows[:, i] for i, k in enumerate(PROFILE_HEADER)}
