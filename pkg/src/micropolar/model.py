"""Physical parameters of the half-line outflow problem and the scalars derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ParameterError


@dataclass(frozen=True)
class ModelParams:
    """Viscosities, pressure law ``p = K rho**gamma`` and boundary/far-field data.

    ``lam`` is the velocity viscosity (``lambda`` is a keyword).
    """

    lam: float
    mu: float
    nu: float
    K: float
    gamma: float
    rho_plus: float
    u_plus: float
    u_b: float
    omega_b: float

    def __post_init__(self):
        for name in ("lam", "mu", "nu", "K", "gamma", "rho_plus", "u_plus", "u_b", "omega_b"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParameterError(name, f"must be a finite real, got {v!r}")
        for name in ("lam", "mu", "nu", "K", "rho_plus"):
            if getattr(self, name) <= 0:
                raise ParameterError(name, f"must be > 0, got {getattr(self, name)}")
        if self.gamma < 1:
            raise ParameterError("gamma", f"must be >= 1, got {self.gamma}")
        if self.u_plus >= 0:
            raise ParameterError("u_plus", f"must be < 0 (outflow), got {self.u_plus}")
        if self.u_b >= 0:
            raise ParameterError("u_b", f"must be < 0 (outflow), got {self.u_b}")
        if self.omega_b == 0:
            raise ParameterError("omega_b", "must be nonzero")

    def pressure(self, rho):
        return self.K * rho**self.gamma

    def sound_speed(self, rho):
        return (self.K * self.gamma * rho ** (self.gamma - 1.0)) ** 0.5

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedConstants:
    """Closed-form scalars consumed by the stationary, solver and analysis modules.

    ``sigma`` is ``min(|r1|, xi0)``.  Until a supersonic profile has been
    measured, ``xi0`` is ``None``, ``sigma`` holds ``|r1|`` and
    ``sigma_provisional`` is True.  Use :meth:`with_xi0` to finalize.
    """

    c_plus: float
    M_plus: float
    r1: float
    r2: float
    delta_tilde: float
    A: float
    B: float
    theta_star: float
    sigma: float
    sigma_provisional: bool = True
    xi0: float | None = None

    def with_xi0(self, xi0: float) -> DerivedConstants:
        if not xi0 > 0:
            raise ValueError(f"xi0 must be positive, got {xi0}")
        return replace(self, xi0=xi0, sigma=min(abs(self.r1), xi0), sigma_provisional=False)


def char_roots(p: ModelParams) -> tuple[float, float]:
    """Roots ``r1 < 0 < r2`` of ``nu r^2 - rho_+ u_+ r - mu = 0``.

    The larger-magnitude root comes from the quadratic formula and the other
    from ``r1 * r2 = -mu / nu`` so neither loses digits when
    ``mu * nu << (rho_+ u_+)**2``.
    """
    b = p.rho_plus * p.u_plus  # r^2 - (b/nu) r - mu/nu = 0
    disc = math.sqrt(b * b + 4.0 * p.nu * p.mu)
    # b < 0 always, so b - disc has no cancellation
    big = (b - disc) / (2.0 * p.nu) if b <= 0 else (b + disc) / (2.0 * p.nu)
    small = -p.mu / (p.nu * big)
    r1, r2 = (big, small) if big < 0 else (small, big)
    return r1, r2


def theta_star(gamma: float) -> float:
    """Positive root of ``t (t - 2) = 4 / (gamma + 1)``."""
    return 1.0 + math.sqrt(1.0 + 4.0 / (gamma + 1.0))


def mach_plus(p: ModelParams) -> float:
    return abs(p.u_plus) / p.sound_speed(p.rho_plus)


def derive_constants(p: ModelParams) -> DerivedConstants:
    c = p.sound_speed(p.rho_plus)
    r1, r2 = char_roots(p)
    delta = max(abs(p.omega_b), abs(p.u_b - p.u_plus))
    A = (p.gamma + 1.0) * p.rho_plus / (2.0 * p.lam)
    return DerivedConstants(
        c_plus=c,
        M_plus=abs(p.u_plus) / c,
        r1=r1,
        r2=r2,
        delta_tilde=delta,
        A=A,
        B=delta * A,
        theta_star=theta_star(p.gamma),
        sigma=abs(r1),
    )


def transonic_u_plus(K: float, gamma: float, rho_plus: float) -> float:
    """Far-field velocity giving ``M_+ = 1`` exactly (negative, outflow)."""
    return -math.sqrt(K * gamma * rho_plus ** (gamma - 1.0))


def params_for_mach(
    mach: float,
    *,
    gamma: float = 1.4,
    rho_plus: float = 1.0,
    c_plus: float = 1.0,
    chi0: float = 1.1,
    omega_b: float = 0.05,
    lam: float = 1.0,
    mu: float = 1.0,
    nu: float = 1.0,
) -> ModelParams:
    """Build parameters with a prescribed far-field Mach number and ``u_b / u_+``."""
    K = c_plus**2 / (gamma * rho_plus ** (gamma - 1.0))
    u_plus = -mach * c_plus
    return ModelParams(
        lam=lam, mu=mu, nu=nu, K=K, gamma=gamma, rho_plus=rho_plus,
        u_plus=u_plus, u_b=chi0 * u_plus, omega_b=omega_b,
    )
