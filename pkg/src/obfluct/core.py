"""Mean-field steady state of absorptive optical bistability.

Everything here works in the scaled variables of the bistability state
equation: the intracavity amplitude ``X`` and the drive ``Y`` are measured
in units of the square root of the saturation photon number, and the
atomic means are normalized per atom.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameterError, WeakExcitationWarning

# X <= WEAK_FRACTION * X_minus marks the weak-excitation regime.
WEAK_FRACTION = 0.1
# Used instead of X_minus when there is no bistability (C <= 4).
MONOSTABLE_WEAK_LIMIT = 0.1


class Branch(str, Enum):
    LOWER = "lower"
    UNSTABLE = "unstable"
    UPPER = "upper"
    MONOSTABLE = "monostable"


@dataclass(frozen=True)
class PhysicalParams:
    """Rates and counts defining one experiment.

    ``g``, ``kappa`` and ``gamma`` are angular frequencies in any common unit.
    ``kappa`` is half the photon loss rate. The drive is stored as the
    scaled amplitude ``drive_y``; use :meth:`from_raw_drive` to build the
    object from the raw amplitude instead.
    """

    g: float
    kappa: float
    gamma: float
    n_atoms: int
    drive_y: float = 0.0
    omega0: float = 0.0
    phi0: float = -math.pi / 2

    def __post_init__(self) -> None:
        for name in ("g", "kappa", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be a positive finite rate, got {value!r}")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise InvalidParameterError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not (math.isfinite(self.drive_y) and self.drive_y >= 0):
            raise InvalidParameterError(f"drive_y must be non-negative, got {self.drive_y!r}")

    @classmethod
    def from_raw_drive(cls, g: float, kappa: float, gamma: float, n_atoms: int,
                       raw_drive: float, **kwargs) -> PhysicalParams:
        """Build from the raw drive magnitude ``|E0|`` (angular frequency)."""
        if gamma <= 0 or g <= 0 or kappa <= 0:
            raise InvalidParameterError("rates must be positive")
        if raw_drive < 0:
            raise InvalidParameterError(f"raw drive must be non-negative, got {raw_drive!r}")
        n_s = gamma**2 / (8.0 * g**2)
        return cls(g, kappa, gamma, n_atoms, drive_y=raw_drive / (kappa * math.sqrt(n_s)), **kwargs)

    @property
    def saturation_photons(self) -> float:
        return self.gamma**2 / (8.0 * self.g**2)

    @property
    def raw_drive(self) -> float:
        """Raw drive magnitude ``|E0| = Y kappa sqrt(n_s)``."""
        return self.drive_y * self.kappa * math.sqrt(self.saturation_photons)


@dataclass(frozen=True)
class DimensionlessParams:
    C: float
    xi: float
    n_s: float
    Y: float

    @property
    def xi2C(self) -> float:
        return self.xi * 2.0 * self.C


def derive_dimensionless(p: PhysicalParams) -> DimensionlessParams:
    """Cooperativity, decay ratio, saturation photon number and scaled drive."""
    return DimensionlessParams(
        C=p.n_atoms * p.g**2 / (p.kappa * p.gamma),
        xi=2.0 * p.kappa / p.gamma,
        n_s=p.saturation_photons,
        Y=p.drive_y,
    )


def _check_cooperativity(C: float) -> None:
    if not (math.isfinite(C) and C > 0):
        raise InvalidParameterError(f"cooperativity must be positive, got {C!r}")


def drive_for_amplitude(X: float, C: float) -> float:
    """Scaled drive that sustains intracavity amplitude ``X``."""
    if X < 0:
        raise InvalidParameterError(f"X must be non-negative, got {X!r}")
    _check_cooperativity(C)
    return X * (1.0 + 2.0 * C / (1.0 + X * X))


def turning_points_squared(C: float) -> tuple[float, float] | None:
    """``(X_minus^2, X_plus^2) = (C-1) -/+ sqrt(C(C-4))`` for C >= 4, else None.

    These are the roots in ``u = X^2`` of ``dY/dX = 0``.
    """
    _check_cooperativity(C)
    if C < 4:
        return None
    root = math.sqrt(C * (C - 4.0))
    u_plus = (C - 1.0) + root
    # product of the roots is 1 + 2C; avoids cancellation at large C
    return (1.0 + 2.0 * C) / u_plus, u_plus


def turning_points(C: float) -> tuple[float, float] | None:
    """Amplitudes ``(X_minus, X_plus)`` where dY/dX vanishes, for C >= 4, else None."""
    sq = turning_points_squared(C)
    if sq is None:
        return None
    return math.sqrt(sq[0]), math.sqrt(sq[1])


def weak_excitation_limit(C: float) -> float:
    """Largest X still flagged as weak excitation."""
    tp = turning_points(C)
    if tp is None or C == 4:
        return MONOSTABLE_WEAK_LIMIT
    return WEAK_FRACTION * tp[0]


def classify_branch(X: float, C: float) -> Branch:
    if C <= 4:
        return Branch.MONOSTABLE
    x_minus, x_plus = turning_points(C)
    if X < x_minus:
        return Branch.LOWER
    if X > x_plus:
        return Branch.UPPER
    return Branch.UNSTABLE


def atomic_means(X: float) -> tuple[float, float, float]:
    """Scaled steady-state polarization (J-, J+) and inversion Jz."""
    if X < 0:
        raise InvalidParameterError(f"X must be non-negative, got {X!r}")
    denom = 1.0 + X * X
    j_minus = -X / denom
    return j_minus, j_minus, -1.0 / denom


@dataclass(frozen=True)
class OperatingPoint:
    X: float
    Y: float
    C: float
    branch: Branch
    j_minus: float
    j_plus: float
    j_z: float
    in_weak_excitation: bool

    @classmethod
    def at(cls, X: float, C: float, Y: float | None = None) -> OperatingPoint:
        if Y is None:
            Y = drive_for_amplitude(X, C)
        jm, jp, jz = atomic_means(X)
        return cls(X, Y, C, classify_branch(X, C), jm, jp, jz,
                   X <= weak_excitation_limit(C))


def _expected_root_count(Y: float, C: float) -> int:
    tp = turning_points(C)
    if tp is None or C == 4:
        return 1
    y_hi = drive_for_amplitude(tp[0], C)
    y_lo = drive_for_amplitude(tp[1], C)
    return 3 if y_lo <= Y <= y_hi else 1


def _newton_polish(x: float, Y: float, C: float, steps: int = 4) -> float:
    c1 = 1.0 + 2.0 * C
    best, best_res = x, abs(((x - Y) * x + c1) * x - Y)
    for _ in range(steps):
        f = ((x - Y) * x + c1) * x - Y
        df = (3.0 * x - 2.0 * Y) * x + c1
        if df == 0:
            break
        x = x - f / df
        res = abs(((x - Y) * x + c1) * x - Y)
        if res < best_res and x >= 0:
            best, best_res = x, res
        else:
            break
    return best


def intracavity_roots(Y: float, C: float) -> list[OperatingPoint]:
    """All non-negative real solutions X of the state equation for drive ``Y``.

    Roots of ``X^3 - Y X^2 + (1+2C) X - Y`` are taken as eigenvalues of the
    companion matrix, the most nearly real candidates are kept (1 or 3
    depending on where ``Y`` sits relative to the turning points, counting a
    double root twice) and each is polished by Newton steps. Results are in
    ascending order.
    """
    if not (math.isfinite(Y) and Y >= 0):
        raise InvalidParameterError(f"Y must be non-negative, got {Y!r}")
    _check_cooperativity(C)
    if Y == 0:
        return [OperatingPoint.at(0.0, C, 0.0)]
    companion = np.array([
        [Y, -(1.0 + 2.0 * C), Y],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
    ])
    eig = np.linalg.eigvals(companion)
    count = _expected_root_count(Y, C)
    candidates = sorted(eig, key=lambda z: abs(z.imag))[:count]
    roots = sorted(_newton_polish(max(z.real, 0.0), Y, C) for z in candidates)
    return [OperatingPoint.at(x, C, Y) for x in roots]


def lower_branch_root(Y: float, C: float) -> OperatingPoint:
    """The smallest root, which is the lower-branch (or monostable) state."""
    return intracavity_roots(Y, C)[0]


@dataclass(frozen=True)
class EmissionRates:
    r_gamma: float
    r_kappa: float

    @property
    def ratio(self) -> float:
        return self.r_gamma / self.r_kappa


def emission_rates(X: float, p: PhysicalParams) -> EmissionRates:
    """Weak-excitation spontaneous and cavity emission rates.

    Warns with :class:`WeakExcitationWarning` if ``X`` lies outside the
    weak-excitation regime, where the dropped O(X^4) terms matter.
    """
    if X < 0:
        raise InvalidParameterError(f"X must be non-negative, got {X!r}")
    dp = derive_dimensionless(p)
    if X > weak_excitation_limit(dp.C):
        warnings.warn(f"X={X} is outside the weak-excitation regime (C={dp.C:.4g})",
                      WeakExcitationWarning, stacklevel=2)
    return EmissionRates(
        r_gamma=0.5 * p.gamma * p.n_atoms * X * X,
        r_kappa=2.0 * p.kappa * dp.n_s * X * X,
    )


def emission_ratio(p: PhysicalParams) -> float:
    """R_gamma / R_kappa, independent of X in the weak-excitation forms."""
    return (0.5 * p.gamma * p.n_atoms) / (2.0 * p.kappa * p.saturation_photons)


@dataclass(frozen=True)
class SteadyAverages:
    jp_a: float
    jp_adag: float
    photon_number: float
    ratio_r: float
    fluct_ratio_2C: float


def _cross_fluct_coefficient(xi: float, C: float) -> float:
    # <dJ+ da> N / X^4 at leading order
    c2 = 2.0 * C
    return xi * c2 * (2.0 + xi + c2) / ((1.0 + c2) ** 2 * (xi + 1.0) ** 2)


def steady_averages(X: float, xi: float, C: float, N: int) -> SteadyAverages:
    """Steady-state atom-field averages with first-order fluctuation corrections."""
    if X < 0 or xi <= 0 or C <= 0 or N < 1:
        raise InvalidParameterError("need X >= 0, xi > 0, C > 0, N >= 1")
    c2 = 2.0 * C
    q = _cross_fluct_coefficient(xi, C)
    x2 = X * X
    jp_a = -x2 * (1.0 - x2 * q / N)
    jp_adag = -x2 * (1.0 + xi * c2 / (N * (1.0 + c2) * (xi + 1.0)))
    photon_fluct_coeff = c2 * q
    photon = x2 * (1.0 + x2 * photon_fluct_coeff / N)
    # X^2 cancels between numerator and denominator
    ratio = abs((1.0 + x2 * photon_fluct_coeff / N) / (1.0 - x2 * q / N))
    return SteadyAverages(jp_a, jp_adag, photon, ratio, photon_fluct_coeff / q)


def ratio_deviation_argmax(C: float) -> float:
    """Decay ratio xi maximizing r - 1 at fixed X and C."""
    _check_cooperativity(C)
    return (C + 1.0) / C
