"""Measurement apparatus: weighted norms, the relative energy and its balance,
Poincare-type certificates and power-law decay fits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSnapshots, NonpositiveNorm, WindowTooSmall
from .grid import Grid, ddx, trapezoid
from .model import ModelParams

# -- weights and norms ---------------------------------------------------------


@dataclass(frozen=True)
class WeightSpec:
    """Algebraic weight ``W(x) = (1 + beta x)^alpha`` and derivative order ``order`` (0 or 1)."""

    alpha: float
    beta: float
    order: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.order not in (0, 1):
            raise ValueError(f"order must be 0 or 1, got {self.order}")

    def weight(self, x: np.ndarray) -> np.ndarray:
        if self.alpha == 0 or self.beta == 0:
            return np.ones_like(x)
        return (1.0 + self.beta * x) ** self.alpha

    def weight_derivative(self, x: np.ndarray) -> np.ndarray:
        """``alpha beta (1 + beta x)^(alpha - 1)``."""
        if self.alpha == 0 or self.beta == 0:
            return np.zeros_like(x)
        return self.alpha * self.beta * (1.0 + self.beta * x) ** (self.alpha - 1.0)


def weighted_norm(f: np.ndarray, w: WeightSpec, grid: Grid) -> float:
    """``(int W (f^2 [+ f_x^2]) dx)^(1/2)`` by the trapezoid rule."""
    integrand = f * f
    if w.order == 1:
        fx = ddx(f, grid.h)
        integrand = integrand + fx * fx
    if not (w.alpha == 0 or w.beta == 0):
        integrand = w.weight(grid.x) * integrand
    return math.sqrt(trapezoid(integrand, grid.h))


def sup_norm_perturbation(state, profile) -> float:
    """``max |(rho - rho~, u - u~, omega - omega~)|`` over nodes and fields."""
    return float(
        max(
            np.max(np.abs(state.rho - profile.rho_t)),
            np.max(np.abs(state.u - profile.u_t)),
            np.max(np.abs(state.omega - profile.omega_t)),
        )
    )


# -- relative energy -----------------------------------------------------------


def phi_potential(rho, rho_t, p: ModelParams):
    """Pressure potential ``int_{rho~}^{rho} (p(s) - p(rho~)) / s^2 ds`` in closed form.

    Written in ``s = rho / rho~`` with ``expm1``/``log1p`` so the two
    first-order terms cancel without losing the quadratic remainder.
    """
    rho = np.asarray(rho, dtype=float)
    rho_t = np.asarray(rho_t, dtype=float)
    if np.any(rho <= 0) or np.any(rho_t <= 0):
        raise ValueError("densities must be positive")
    d = rho / rho_t - 1.0
    lg = np.log1p(d)
    g1 = p.gamma - 1.0
    if g1 == 0.0:
        first = lg
    else:
        first = np.expm1(g1 * lg) / g1
    out = p.K * rho_t**g1 * (first - d / (1.0 + d))
    return float(out) if out.ndim == 0 else out


def energy_density(state, profile, p: ModelParams) -> np.ndarray:
    rho = state.rho
    psi = state.u - profile.u_t
    zeta = state.omega - profile.omega_t
    return rho * phi_potential(rho, profile.rho_t, p) + 0.5 * rho * (psi * psi + zeta * zeta)


def relative_energy(state, profile, w: WeightSpec, p: ModelParams) -> float:
    """``int W [rho Phi + rho psi^2/2 + rho zeta^2/2] dx``."""
    return trapezoid(w.weight(state.grid.x) * energy_density(state, profile, p), state.grid.h)


@dataclass
class EnergyTerms:
    dissipation: float
    boundary: float
    weight_term: float
    source: float


def _balance_terms(state, profile, w: WeightSpec, p: ModelParams) -> EnergyTerms:
    x, h = state.grid.x, state.grid.h
    rho, u = state.rho, state.u
    rho_t, u_t = profile.rho_t, profile.u_t
    phi = rho - rho_t
    psi = u - u_t
    zeta = state.omega - profile.omega_t
    psi_x = ddx(psi, h)
    zeta_x = ddx(zeta, h)
    Phi = phi_potential(rho, rho_t, p)
    dp = p.pressure(rho) - p.pressure(rho_t)
    dpt = p.gamma * p.K * rho_t ** (p.gamma - 1.0)  # p'(rho~)

    flux = (
        rho * u * (Phi + 0.5 * psi * psi + 0.5 * zeta * zeta)
        + dp * psi
        - p.lam * psi * psi_x
        - p.nu * zeta * zeta_x
    )
    diss = p.mu * zeta * zeta + p.lam * psi_x * psi_x + p.nu * zeta_x * zeta_x
    ux_t = profile.u_t_x
    ox_t = profile.omega_t_x
    px_t = dpt * profile.rho_t_x
    src = (
        -ux_t * (u_t * phi * psi + rho * psi * psi + dp - dpt * phi)
        - ox_t * (u_t * phi * zeta + rho * psi * zeta)
        - px_t / rho_t * phi * psi
    )
    W = w.weight(x)
    return EnergyTerms(
        dissipation=trapezoid(W * diss, h),
        boundary=float(W[-1] * flux[-1] - W[0] * flux[0]),
        weight_term=trapezoid(w.weight_derivative(x) * flux, h),
        source=trapezoid(W * src, h),
    )


def energy_balance_residual(times, states, profile, p: ModelParams, w: WeightSpec):
    """Residual of the integrated weighted energy identity along a trajectory.

    For each interior snapshot ``i``::

        R = dE/dt + [W F]_0^L - int W' F + int W D - int W S

    where ``E`` is :func:`relative_energy`, ``F`` the full energy flux
    (including the viscous ``-lam psi psi_x - nu zeta zeta_x`` parts), ``D``
    the dissipation ``mu zeta^2 + lam psi_x^2 + nu zeta_x^2`` and ``S`` the
    stationary-gradient source terms.  ``dE/dt`` is a centred difference.
    Returns ``(t_interior, R)``.
    """
    times = np.asarray(times, dtype=float)
    if len(states) != times.size:
        raise ValueError("times and states differ in length")
    if times.size < 3:
        raise InsufficientSnapshots(f"need >= 3 snapshots, got {times.size}")
    E = np.array([relative_energy(s, profile, w, p) for s in states])
    dEdt = (E[2:] - E[:-2]) / (times[2:] - times[:-2])
    R = np.empty(times.size - 2)
    for i, s in enumerate(states[1:-1]):
        terms = _balance_terms(s, profile, w, p)
        R[i] = dEdt[i] + terms.boundary - terms.weight_term + terms.dissipation - terms.source
    return times[1:-1], R


# -- Poincare-type certificates ---------------------------------------------------


def poincare_constant(sigma: float) -> float:
    """``2 max(1/sigma, 1/sigma^2)``, from ``h^2 <= 2 h(0)^2 + 2 x ||h_x||^2``."""
    return 2.0 * max(1.0 / sigma, 1.0 / sigma**2)


def poincare_certificate(h_field: np.ndarray, sigma: float, grid: Grid):
    """Check ``int e^{-sigma x} h^2 <= C (h(0)^2 + ||h_x||^2)``; returns ``(lhs, rhs, holds)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    lhs = trapezoid(np.exp(-sigma * grid.x) * h_field**2, grid.h)
    hx = ddx(h_field, grid.h)
    rhs = poincare_constant(sigma) * (h_field[0] ** 2 + trapezoid(hx * hx, grid.h))
    return lhs, rhs, lhs <= rhs


def algebraic_poincare_constant(k: float) -> float:
    """``2 max(1/k, 1/(k (k - 1)))`` for ``k > 1``.

    Uses ``int d^(k+1)/(1+dx)^(k+1) dx = d^k / k`` and
    ``int x d^(k+1)/(1+dx)^(k+1) dx = d^(k-1) / (k (k-1))``.
    """
    if not k > 1:
        raise ValueError("k must exceed 1")
    return 2.0 * max(1.0 / k, 1.0 / (k * (k - 1.0)))


def algebraic_poincare_certificate(h_field: np.ndarray, delta: float, k: float, grid: Grid):
    """Check ``int d^(k+1)/(1+dx)^(k+1) h^2 <= C (d^k h(0)^2 + d^(k-1) ||h_x||^2)``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    wt = delta ** (k + 1) / (1.0 + delta * grid.x) ** (k + 1)
    lhs = trapezoid(wt * h_field**2, grid.h)
    hx = ddx(h_field, grid.h)
    C = algebraic_poincare_constant(k)
    rhs = C * (delta**k * h_field[0] ** 2 + delta ** (k - 1) * trapezoid(hx * hx, grid.h))
    return lhs, rhs, lhs <= rhs


def random_fourier_field(rng: np.random.Generator, x: np.ndarray, modes: int = 8) -> np.ndarray:
    """Random smooth field ``c0 + sum_k a_k sin(k pi x / l + phase_k)`` with ``a_k ~ 1/k``."""
    ell = rng.uniform(1.0, 20.0)
    out = np.full_like(x, rng.normal())
    for k in range(1, modes + 1):
        out += rng.normal() / k * np.sin(k * np.pi * x / ell + rng.uniform(0, 2 * np.pi))
    return out


@dataclass
class CertificateCampaign:
    cases: int
    violations: int
    worst_ratio: float  # max lhs / rhs over the campaign


def certificate_campaign(rng, grid: Grid, cases: int = 1000, sigmas=(0.5, 1.0, 2.0), k: float = 2.0):
    """Run both Poincare certificates on ``cases`` random fields.

    Each field is tested at every ``sigma`` and, for the algebraic form, at
    ``delta`` drawn from ``[0.01, 1]``.
    """
    violations, worst, total = 0, 0.0, 0
    for _ in range(cases):
        h = random_fourier_field(rng, grid.x)
        checks = [poincare_certificate(h, s, grid) for s in sigmas]
        checks.append(algebraic_poincare_certificate(h, rng.uniform(0.01, 1.0), k, grid))
        for lhs, rhs, holds in checks:
            total += 1
            violations += not holds
            if rhs > 0:
                worst = max(worst, float(lhs / rhs))
    return CertificateCampaign(total, violations, worst)


# -- decay fits ---------------------------------------------------------------------


@dataclass
class DecayReport:
    times: np.ndarray
    norms: np.ndarray
    fitted_exponent: float
    fit_window: tuple[float, float]
    fit_residual: float
    theoretical_exponent: float | None = None
    extra: dict = field(default_factory=dict)

    def passes(self, tolerance: float) -> bool:
        """One-sided check: decay at least as fast as the theoretical rate minus ``tolerance``."""
        if self.theoretical_exponent is None:
            raise ValueError("no theoretical exponent to compare against")
        return self.fitted_exponent >= self.theoretical_exponent - tolerance


def fit_decay(times, norms, burn_in: float, theoretical: float | None = None, min_samples: int = 8):
    """Least-squares slope of ``log(norm)`` against ``log(1 + t)`` over ``t >= burn_in``."""
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    sel = times >= burn_in
    if sel.sum() < min_samples:
        raise WindowTooSmall(f"{int(sel.sum())} samples after burn-in {burn_in}, need {min_samples}")
    t, y = times[sel], norms[sel]
    if np.any(y <= 0):
        raise NonpositiveNorm("norms must be positive inside the fit window")
    X = np.log1p(t)
    Y = np.log(y)
    A = np.vstack([X, np.ones_like(X)]).T
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = Y - A @ coef
    return DecayReport(
        times=times,
        norms=norms,
        fitted_exponent=float(-coef[0]),
        fit_window=(float(t[0]), float(t[-1])),
        fit_residual=float(np.sqrt(np.mean(res**2))),
        theoretical_exponent=theoretical,
    )


DECAY_HEADER = ["t", "sup_norm", "weighted_norm", "energy"]


def write_decay_csv(path, times, sup, weighted, energy, report: DecayReport | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DECAY_HEADER)
        for row in zip(times, sup, weighted, energy):
            w.writerow([f"{v:.17g}" for v in row])
        if report is not None:
            fh.write(f"# fitted_exponent={report.fitted_exponent:.17g}\n")
            fh.write(f"# fit_window={report.fit_window[0]:.17g},{report.fit_window[1]:.17g}\n")
            fh.write(f"# fit_residual={report.fit_residual:.17g}\n")
            th = "nan" if report.theoretical_exponent is None else f"{report.theoretical_exponent:.17g}"
            fh.write(f"# theoretical_exponent={th}\n")


def read_decay_csv(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    rows, footer = [], {}
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if header != DECAY_HEADER:
            raise ValueError(f"unexpected decay header {header}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                footer[key] = val
            else:
                rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows).reshape(-1, len(DECAY_HEADER))
    return {k: arr[:, i] for i, k in enumerate(DECAY_HEADER)}, footer
