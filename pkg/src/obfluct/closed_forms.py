"""Analytic weak-excitation correlation functions and their Laplace transforms.

All functions work on the order-matched weak-excitation system: the
starred-row correlations ``C^{nu* j}`` and ``C^{z* j}`` evolve under the
``order_matched`` Jacobian of :mod:`obfluct.fluctuations`, starting from the
leading-order stationary covariance. Every transform shares the denominator

    Delta(s) = (xi + s)(1 + s) + xi 2C = (s - rho_+)(s - rho_-),

with ``rho_pm = -(xi+1)/2 +- i Gbar``. Time is the dimensionless delay
``tau = gamma t / 2`` and ``s`` its Laplace conjugate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import weak_excitation_limit
from .errors import InvalidParameterError, OscillatoryRegimeError, PoleError
from .fluctuations import BASIS, CorrelationTrace, basis_index

# Shipped parameter sets for the squared-Lorentzian comparison.
FIG3_MAIN = {"xi": 0.05, "C": 40.0}
MIELKE = {"xi": 1.9, "C": 58.0}

_POLE_TOL = 1e-13


@dataclass(frozen=True)
class WeakExcitationContext:
    X: float
    xi: float
    C: float
    enforce_weak: bool = True
    # only the initial conditions make sense without oscillation
    require_oscillatory: bool = True

    def __post_init__(self) -> None:
        if self.X < 0 or self.xi < 0 or self.C <= 0:
            raise InvalidParameterError("need X >= 0, xi >= 0, C > 0")
        if self.require_oscillatory and not self.oscillatory:
            raise OscillatoryRegimeError(
                f"xi 2C = {self.xi2C:.6g} must exceed (xi-1)^2/4 = {0.25 * (self.xi - 1) ** 2:.6g}")
        if self.enforce_weak and self.X > weak_excitation_limit(self.C):
            raise InvalidParameterError(
                f"X = {self.X} is above the weak-excitation limit {weak_excitation_limit(self.C):.4g}")

    @property
    def xi2C(self) -> float:
        return self.xi * 2.0 * self.C

    @property
    def oscillatory(self) -> bool:
        return self.xi2C - 0.25 * (self.xi - 1.0) ** 2 > 0

    @property
    def gbar(self) -> float:
        if not self.oscillatory:
            raise OscillatoryRegimeError("no real Rabi frequency outside the oscillatory regime")
        return math.sqrt(self.xi2C - 0.25 * (self.xi - 1.0) ** 2)

    @property
    def rho_plus(self) -> complex:
        return complex(-0.5 * (self.xi + 1.0), self.gbar)

    @property
    def rho_minus(self) -> complex:
        return complex(-0.5 * (self.xi + 1.0), -self.gbar)

    @property
    def decay(self) -> float:
        return 0.5 * (self.xi + 1.0)

    def delta(self, s: complex) -> complex:
        return (self.xi + s) * (1.0 + s) + self.xi2C


def init_conditions(ctx: WeakExcitationContext) -> np.ndarray:
    """Stationary ``nu*`` row: ``(C^{nu*z}, C^{nu*z*}, C^{nu*nu}, C^{nu*nu*}, C^{nu*mu})`` at tau=0.

    Leading order in ``X`` for each entry.
    """
    X, xi, c2 = ctx.X, ctx.xi, 2.0 * ctx.C
    p1, q1 = 1.0 + c2, xi + 1.0
    return np.array([
        X**4 * xi * c2 * (2.0 + xi + c2) / (p1**2 * q1**2),
        -X**2 * xi * c2 / (p1 * q1),
        X**4 * (c2 * (2.0 + xi + c2) + q1**2) / (p1**2 * q1**2),
        -X**2 * (p1 + xi) / (q1 * p1),
        X**3 * (c2 + xi + 1.0) / (p1 * q1),
    ])


def field_row_conditions(ctx: WeakExcitationContext) -> np.ndarray:
    """Stationary ``z*`` row ``(C^{z*z}, C^{z*z*}, C^{z*nu}, C^{z*nu*}, C^{z*mu})`` at tau=0."""
    X, xi, c2 = ctx.X, ctx.xi, 2.0 * ctx.C
    nu_row = init_conditions(ctx)
    return np.array([
        c2 * nu_row[0],
        c2 * nu_row[1],
        nu_row[0],
        nu_row[1],
        X**3 * c2 * xi / ((1.0 + c2) * (xi + 1.0)),
    ])


def leading_order_covariance(ctx: WeakExcitationContext) -> np.ndarray:
    """Full 5x5 stationary covariance at leading order in ``X``.

    The unstarred rows follow from the starred ones by exchanging
    ``z <-> z*`` and ``nu <-> nu*``; ``C^{mu mu} = 2 X^2``.
    """
    cov = np.zeros((5, 5))
    z, zs, nu, nus, mu = (basis_index(b) for b in BASIS)
    swap = [zs, z, nus, nu, mu]
    for idx, row in ((nus, init_conditions(ctx)), (zs, field_row_conditions(ctx))):
        cov[idx] = row
        cov[:, idx] = row
        cov[swap[idx], swap] = row
        cov[swap, swap[idx]] = row
    cov[mu, mu] = 2.0 * ctx.X**2
    return cov


def _taus(taus) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < 0):
        raise InvalidParameterError("closed forms are defined for tau >= 0")
    return taus


def _trace(pair: str, taus: np.ndarray, values: np.ndarray, ctx: WeakExcitationContext) -> CorrelationTrace:
    i, j = (basis_index(p) for p in pair.split(","))
    return CorrelationTrace((i, j), taus, values, 0, ctx.X)


def invert_over_delta(numerator: Sequence[float], power: int, taus, ctx: WeakExcitationContext) -> np.ndarray:
    """Inverse Laplace transform of ``P(s) / Delta(s)**power`` by residues.

    ``numerator`` holds polynomial coefficients, highest degree first, with
    degree below ``2 * power``. Only ``power`` 1 and 2 occur here.
    """
    taus = _taus(taus)
    poly = np.poly1d(numerator)
    dpoly = poly.deriv()
    total = np.zeros(taus.shape, dtype=complex)
    for rho, other in ((ctx.rho_plus, ctx.rho_minus), (ctx.rho_minus, ctx.rho_plus)):
        gap = rho - other
        exp = np.exp(rho * taus)
        if power == 1:
            total += poly(rho) / gap * exp
        elif power == 2:
            total += exp * (dpoly(rho) / gap**2 - 2.0 * poly(rho) / gap**3 + taus * poly(rho) / gap**2)
        else:
            raise InvalidParameterError(f"unsupported pole order {power}")
    return total.real


def _rational(numerator: complex, s: complex, ctx: WeakExcitationContext, power: int = 1) -> complex:
    d = ctx.delta(s)
    if abs(d) < _POLE_TOL * max(1.0, abs(s) ** 2):
        raise PoleError(f"s = {s} is a root of the transform denominator")
    return numerator / d**power


# ---- nu* z -----------------------------------------------------------------

def _nu_star_z_1_numerator(ctx: WeakExcitationContext) -> list[float]:
    c0 = init_conditions(ctx)
    return [c0[0], ctx.xi2C * c0[2] + c0[0]]


def _nu_star_z_2_prefactor(ctx: WeakExcitationContext) -> float:
    return ctx.xi2C * ctx.X**4 / ((1.0 + 2.0 * ctx.C) * (ctx.xi + 1.0))


def lt_nu_star_z_1(sbar: complex, ctx: WeakExcitationContext) -> complex:
    a, b = _nu_star_z_1_numerator(ctx)
    return _rational(a * sbar + b, sbar, ctx)


def lt_nu_star_z_2(sbar: complex, ctx: WeakExcitationContext) -> complex:
    xi, c2 = ctx.xi, 2.0 * ctx.C
    num = _nu_star_z_2_prefactor(ctx) * ((xi + sbar) * (xi + 1.0) + c2 * sbar)
    return _rational(num, sbar, ctx, power=2)


def cf_nu_star_z_1(taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    """Lorentzian (single-pole) component of ``C^{nu* z}``."""
    taus = _taus(taus)
    c0 = init_conditions(ctx)
    G, xi = ctx.gbar, ctx.xi
    env = np.exp(-ctx.decay * taus)
    sin_coeff = (ctx.xi2C * c0[2] + 0.5 * (1.0 - xi) * c0[0]) / G
    vals = env * (c0[0] * np.cos(G * taus) + sin_coeff * np.sin(G * taus))
    return _trace("nu*,z", taus, vals, ctx)


def cf_nu_star_z_2(taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    """Squared-Lorentzian (double-pole) component of ``C^{nu* z}``; zero at tau=0."""
    taus = _taus(taus)
    G, xi, c2 = ctx.gbar, ctx.xi, 2.0 * ctx.C
    env = np.exp(-ctx.decay * taus)
    sn, cs = np.sin(G * taus), np.cos(G * taus)
    secular = sn / G - taus * cs
    bracket = (xi + 1.0) * (xi - 1.0 - c2) / (2.0 * G) * secular + (1.0 + xi + c2) * taus * sn
    vals = _nu_star_z_2_prefactor(ctx) / (2.0 * G) * env * bracket
    return _trace("nu*,z", taus, vals, ctx)


def cf_nu_star_z(taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    return cf_nu_star_z_1(taus, ctx) + cf_nu_star_z_2(taus, ctx)


# ---- z* z (transmitted light) ---------------------------------------------

def _z_star_z_1_amplitude(ctx: WeakExcitationContext) -> float:
    xi, C = ctx.xi, ctx.C
    c2 = 2.0 * C
    return ctx.X**4 * 4.0 * C**2 * xi * (2.0 + xi + c2) / ((1.0 + c2) ** 2 * (xi + 1.0) ** 2)


def _z_star_z_2_prefactor(ctx: WeakExcitationContext) -> float:
    xi, C = ctx.xi, ctx.C
    return ctx.X**4 * 4.0 * C**2 * xi / ((1.0 + 2.0 * C) * (xi + 1.0))


def lt_z_star_z_1(sbar: complex, ctx: WeakExcitationContext) -> complex:
    return _rational(_z_star_z_1_amplitude(ctx) * (1.0 + ctx.xi + sbar), sbar, ctx)


def lt_z_star_z_2(sbar: complex, ctx: WeakExcitationContext) -> complex:
    xi, c2 = ctx.xi, 2.0 * ctx.C
    return _rational(_z_star_z_2_prefactor(ctx) * xi * (xi - c2 + sbar), sbar, ctx, power=2)


def cf_z_star_z_components(taus, ctx: WeakExcitationContext) -> tuple[CorrelationTrace, CorrelationTrace]:
    """Lorentzian and squared-Lorentzian parts of the field autocorrelation.

    The first part is obtained from its transform by partial fractions;
    the second is the explicit secular form.
    """
    taus = _taus(taus)
    amp = _z_star_z_1_amplitude(ctx)
    first = invert_over_delta([amp, amp * (1.0 + ctx.xi)], 1, taus, ctx)
    G, xi, C = ctx.gbar, ctx.xi, ctx.C
    env = np.exp(-ctx.decay * taus)
    sn, cs = np.sin(G * taus), np.cos(G * taus)
    bracket = xi * (xi - 1.0 - 4.0 * C) / (2.0 * G) * (sn / G - taus * cs) + xi * taus * sn
    second = _z_star_z_2_prefactor(ctx) / (2.0 * G) * env * bracket
    return _trace("z*,z", taus, first, ctx), _trace("z*,z", taus, second, ctx)


# ---- anomalous (order X^2) correlators -------------------------------------

def _anomalous_amplitude(ctx: WeakExcitationContext) -> float:
    return -ctx.X**2 * ctx.xi2C / ((ctx.xi + 1.0) * (1.0 + 2.0 * ctx.C))


def lt_nu_star_z_star(sbar: complex, ctx: WeakExcitationContext) -> complex:
    return _rational(_anomalous_amplitude(ctx) * (sbar + ctx.xi + 2.0 * (ctx.C + 1.0)), sbar, ctx)


def lt_z_star_nu_star(sbar: complex, ctx: WeakExcitationContext) -> complex:
    return _rational(_anomalous_amplitude(ctx) * (ctx.xi + sbar - 2.0 * ctx.C), sbar, ctx)


def _damped(taus: np.ndarray, ctx: WeakExcitationContext, sin_coeff: float) -> np.ndarray:
    G = ctx.gbar
    return np.exp(-ctx.decay * taus) * (np.cos(G * taus) + sin_coeff * np.sin(G * taus))


def cf_nu_star_z_star(taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    """``C^{nu* z*}``: polarization followed by the conjugate field."""
    taus = _taus(taus)
    coeff = (4.0 * ctx.C + ctx.xi + 3.0) / (2.0 * ctx.gbar)
    return _trace("nu*,z*", taus, _anomalous_amplitude(ctx) * _damped(taus, ctx, coeff), ctx)


def cf_z_star_nu_star(taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    """``C^{z* nu*}``: same initial value as ``C^{nu* z*}``, different evolution."""
    taus = _taus(taus)
    coeff = (ctx.xi - 4.0 * ctx.C - 1.0) / (2.0 * ctx.gbar)
    return _trace("z*,nu*", taus, _anomalous_amplitude(ctx) * _damped(taus, ctx, coeff), ctx)


# ---- atom-atom and atom-inversion ------------------------------------------

def lt_nu_star_mu(sbar: complex, ctx: WeakExcitationContext) -> complex:
    X, xi, c2 = ctx.X, ctx.xi, 2.0 * ctx.C
    num = X**3 / ((1.0 + c2) * (xi + 1.0)) * ((xi + sbar) * (xi + 1.0) + c2 * sbar)
    return _rational(num, sbar, ctx)


def lt_nu_star_nu_star(sbar: complex, ctx: WeakExcitationContext) -> complex:
    X, xi, c2 = ctx.X, ctx.xi, 2.0 * ctx.C
    num = -X**2 / ((xi + 1.0) * (1.0 + c2)) * ((1.0 + xi + c2) * sbar + xi * (xi + 1.0))
    return _rational(num, sbar, ctx)


def cf_nu_star_mu(taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    X, xi, c2 = ctx.X, ctx.xi, 2.0 * ctx.C
    k = X**3 / ((1.0 + c2) * (xi + 1.0))
    vals = invert_over_delta([k * (xi + 1.0 + c2), k * xi * (xi + 1.0)], 1, taus, ctx)
    return _trace("nu*,mu", _taus(taus), vals, ctx)


def cf_nu_star_nu_star(taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    X, xi, c2 = ctx.X, ctx.xi, 2.0 * ctx.C
    k = -X**2 / ((xi + 1.0) * (1.0 + c2))
    vals = invert_over_delta([k * (1.0 + xi + c2), k * xi * (xi + 1.0)], 1, taus, ctx)
    return _trace("nu*,nu*", _taus(taus), vals, ctx)


# ---- many-atom strong-coupling asymptotics ---------------------------------

def asymptotic_sum_difference(taus, X: float, xi: float, xi2C: float) -> tuple[CorrelationTrace, CorrelationTrace]:
    """Limits of ``C^{z*nu*} + C^{nu*z*}`` and ``C^{z*nu*} - C^{nu*z*}``.

    Valid for xi -> 0 with xi 2C >> 1 held fixed.
    """
    taus = _taus(taus)
    if xi2C <= 0:
        raise InvalidParameterError("xi 2C must be positive")
    w = math.sqrt(xi2C)
    env = np.exp(-0.5 * taus)
    total = -2.0 * X**2 * xi * env * np.cos(w * taus)
    diff = 2.0 * X**2 * w * env * np.sin(w * taus)
    pair = (basis_index("z*"), basis_index("nu*"))
    return (CorrelationTrace(pair, taus, total, 0, X), CorrelationTrace(pair, taus, diff, 0, X))


# ---- lookup by pair ---------------------------------------------------------

def closed_form_trace(pair: tuple[int, int], taus, ctx: WeakExcitationContext) -> CorrelationTrace:
    """Closed-form trace for any pair that has one; raises for the rest."""
    name = f"{BASIS[pair[0]]},{BASIS[pair[1]]}"
    if name == "nu*,z":
        return cf_nu_star_z(taus, ctx)
    if name == "nu*,z*":
        return cf_nu_star_z_star(taus, ctx)
    if name == "z*,nu*":
        return cf_z_star_nu_star(taus, ctx)
    if name == "z*,z":
        first, second = cf_z_star_z_components(taus, ctx)
        return first + second
    if name == "nu*,nu*":
        return cf_nu_star_nu_star(taus, ctx)
    if name == "nu*,mu":
        return cf_nu_star_mu(taus, ctx)
    raise InvalidParameterError(f"no closed form for pair {name}")


def closed_form_components(pair: tuple[int, int], taus, ctx: WeakExcitationContext) -> list[CorrelationTrace]:
    name = f"{BASIS[pair[0]]},{BASIS[pair[1]]}"
    if name == "nu*,z":
        return [cf_nu_star_z_1(taus, ctx), cf_nu_star_z_2(taus, ctx)]
    if name == "z*,z":
        return list(cf_z_star_z_components(taus, ctx))
    return [closed_form_trace(pair, taus, ctx)]


def closed_form_laplace(pair: tuple[int, int], sbar: complex, ctx: WeakExcitationContext) -> complex:
    name = f"{BASIS[pair[0]]},{BASIS[pair[1]]}"
    table = {
        "nu*,z": lambda s: lt_nu_star_z_1(s, ctx) + lt_nu_star_z_2(s, ctx),
        "nu*,z*": lambda s: lt_nu_star_z_star(s, ctx),
        "z*,nu*": lambda s: lt_z_star_nu_star(s, ctx),
        "z*,z": lambda s: lt_z_star_z_1(s, ctx) + lt_z_star_z_2(s, ctx),
        "nu*,nu*": lambda s: lt_nu_star_nu_star(s, ctx),
        "nu*,mu": lambda s: lt_nu_star_mu(s, ctx),
    }
    if name not in table:
        raise InvalidParameterError(f"no closed-form transform for pair {name}")
    return table[name](sbar)


CLOSED_FORM_PAIRS = ("nu*,z", "nu*,z*", "z*,nu*", "z*,z", "nu*,nu*", "nu*,mu")
