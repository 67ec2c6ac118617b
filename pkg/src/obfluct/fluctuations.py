"""Linearized fluctuation dynamics around the lower-branch steady state.

The fluctuation vector is ordered ``(z, z*, nu, nu*, mu)``: field amplitude,
its conjugate, collective polarization J-, J+ and the inversion. Time is the
dimensionless delay ``tau = gamma t / 2`` throughout, so the Jacobian and
diffusion matrices are the physical ones multiplied by ``2/gamma``.

Two modes are supported:

``full``
    The exact linearization at amplitude ``X``. The same matrix drives the
    stationary covariance and the two-time propagation.
``reduced``
    The weak-excitation approximation. The stationary covariance uses the
    Jacobian with ``1/(1+X^2) -> 1``. The two-time propagator additionally
    drops the couplings that are of higher order in ``X`` for the rows
    ``z*`` and ``nu*`` (mu -> nu*, z -> mu, nu -> mu). This is the system the
    closed forms in :mod:`obfluct.closed_forms` solve exactly, so
    correlations are only meaningful for pairs whose first index is ``z*``
    or ``nu*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (
    DegenerateSystemError,
    IntegrationError,
    InvalidParameterError,
    SingularResolventError,
)

BASIS = ("z", "z*", "nu", "nu*", "mu")

_ALIASES = {
    "z": "z", "z*": "z*", "zs": "z*", "zstar": "z*",
    "nu": "nu", "ν": "nu", "nu*": "nu*", "ν*": "nu*", "nus": "nu*", "nustar": "nu*",
    "mu": "mu", "μ": "mu",
}

LYAPUNOV_TOL = 1e-10
SYMMETRY_TOL = 1e-10
PROPAGATOR_AGREEMENT = 1e-10


def basis_index(name: str) -> int:
    try:
        return BASIS.index(_ALIASES[name.strip()])
    except KeyError:
        raise InvalidParameterError(f"unknown fluctuation variable {name!r}; expected one of {BASIS}") from None


def parse_pair(spec: str | tuple[str, str] | tuple[int, int]) -> tuple[int, int]:
    """Turn ``"nu*z"``, ``"ν*z*"``, ``("z*", "nu*")`` or ``(3, 0)`` into indices.

    ``"zz*"`` is accepted as a synonym of the transmitted-light pair ``z*z``.
    """
    if isinstance(spec, tuple):
        i, j = spec
        if isinstance(i, (int, np.integer)) and isinstance(j, (int, np.integer)):
            if not (0 <= i < 5 and 0 <= j < 5):
                raise InvalidParameterError(f"pair indices out of range: {spec!r}")
            return int(i), int(j)
        return basis_index(str(i)), basis_index(str(j))
    text = spec.strip().replace(" ", "").replace(",", "")
    if text in ("zz*", "zzs"):
        return 1, 0
    names = sorted(_ALIASES, key=len, reverse=True)
    for first in names:
        if text.startswith(first) and text[len(first):] in _ALIASES:
            return basis_index(first), basis_index(text[len(first):])
    raise InvalidParameterError(f"cannot parse correlation pair {spec!r}")


def pair_label(pair: tuple[int, int]) -> str:
    return f"{BASIS[pair[0]]}{BASIS[pair[1]]}"


def rabi_frequency(xi: float, C: float) -> complex:
    """Scaled vacuum Rabi frequency; imaginary in the overdamped regime."""
    arg = xi * 2.0 * C - 0.25 * (xi - 1.0) ** 2
    return complex(np.sqrt(arg)) if arg >= 0 else 1j * np.sqrt(-arg)


def jacobian_matrix(X: float, xi: float, C: float, mode: str = "full") -> np.ndarray:
    """Dimensionless Jacobian in one of ``full``, ``reduced`` or ``order_matched``."""
    if X < 0 or xi <= 0 or C <= 0:
        raise InvalidParameterError("need X >= 0, xi > 0, C > 0")
    if mode == "full":
        a, b = 1.0 / (1.0 + X * X), X / (1.0 + X * X)
    elif mode in ("reduced", "order_matched"):
        a, b = 1.0, X
    else:
        raise InvalidParameterError(f"unknown Jacobian mode {mode!r}")
    c2 = xi * 2.0 * C
    jac = np.array([
        [-xi, 0.0, c2, 0.0, 0.0],
        [0.0, -xi, 0.0, c2, 0.0],
        [-a, 0.0, -1.0, 0.0, X],
        [0.0, -a, 0.0, -1.0, X],
        [b, b, -X, -X, -2.0],
    ])
    if mode == "order_matched":
        jac[3, 4] = 0.0
        jac[4, 0] = 0.0
        jac[4, 2] = 0.0
    return jac


def build_diffusion(X: float) -> np.ndarray:
    """Dimensionless diffusion matrix; indefinite by construction.

    Both polarization entries carry the negative sign, which is what makes
    the stationary covariance reproduce the known weak-excitation
    initial conditions.
    """
    if X < 0:
        raise InvalidParameterError(f"X must be non-negative, got {X!r}")
    return (2.0 * X * X / (1.0 + X * X)) * np.diag([0.0, 0.0, -1.0, -1.0, 4.0])


@dataclass(frozen=True)
class FluctuationSystem:
    X: float
    xi: float
    C: float
    reduced: bool
    jac: np.ndarray = field(repr=False)
    diff: np.ndarray = field(repr=False)
    propagator: np.ndarray = field(repr=False)

    basis = BASIS

    @property
    def mode(self) -> str:
        return "reduced" if self.reduced else "full"

    @property
    def gbar(self) -> complex:
        return rabi_frequency(self.xi, self.C)

    @property
    def rho_plus(self) -> complex:
        return -0.5 * (self.xi + 1.0) + 1j * self.gbar

    @property
    def rho_minus(self) -> complex:
        return -0.5 * (self.xi + 1.0) - 1j * self.gbar


def build_jacobian(X: float, xi: float, C: float, reduced: bool = False) -> FluctuationSystem:
    if reduced:
        jac = jacobian_matrix(X, xi, C, "reduced")
        prop = jacobian_matrix(X, xi, C, "order_matched")
    else:
        jac = jacobian_matrix(X, xi, C, "full")
        prop = jac
    for m in (jac, prop):
        m.setflags(write=False)
    diff = build_diffusion(X)
    diff.setflags(write=False)
    return FluctuationSystem(X, xi, C, reduced, jac, diff, prop)


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray
    tau: float = 0.0
    basis = BASIS

    def __getitem__(self, pair) -> float:
        i, j = parse_pair(pair)
        return float(self.entries[i, j])

    def row(self, name: str) -> np.ndarray:
        return self.entries[basis_index(name)].copy()


def _as_array(c) -> np.ndarray:
    return c.entries if isinstance(c, CovarianceMatrix) else np.asarray(c, dtype=float)


def lyapunov_residual(jac: np.ndarray, cov: np.ndarray, diff: np.ndarray) -> float:
    return float(np.abs(jac @ cov + cov @ jac.T + diff).max())


def steady_covariance(sys: FluctuationSystem) -> CovarianceMatrix:
    """Stationary covariance from ``J C + C J^T = -D``.

    Solved directly as the 25x25 Kronecker-sum system, then symmetrized.
    """
    jac, diff = sys.jac, sys.diff
    eig = np.linalg.eigvals(jac)
    if np.max(eig.real) >= 0:
        raise DegenerateSystemError(
            f"Jacobian is not stable (max Re eigenvalue {np.max(eig.real):.3g}); "
            "only the lower branch has a stationary covariance")
    pair_sums = np.abs(eig[:, None] + eig[None, :])
    if pair_sums.min() < 1e-12 * max(1.0, np.abs(eig).max()):
        raise DegenerateSystemError("Kronecker sum is singular (eigenvalue pair sums to zero)")
    n = jac.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(J C) = (J kron I) vec(C), vec(C J^T) = (I kron J) vec(C)
    kron_sum = np.kron(jac, eye) + np.kron(eye, jac)
    cov = np.linalg.solve(kron_sum, -diff.reshape(-1)).reshape(n, n)
    asym = float(np.abs(cov - cov.T).max())
    if asym > SYMMETRY_TOL:
        raise DegenerateSystemError(f"Lyapunov solution asymmetric by {asym:.3g}")
    cov = 0.5 * (cov + cov.T)
    res = lyapunov_residual(jac, cov, diff)
    if res > LYAPUNOV_TOL:
        raise DegenerateSystemError(f"Lyapunov residual {res:.3g} exceeds {LYAPUNOV_TOL}")
    cov.setflags(write=False)
    return CovarianceMatrix(cov, 0.0)


def _check_taus(taus) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise InvalidParameterError("tau grid must be a non-empty 1-D array")
    if np.any(np.diff(taus) <= 0) or taus[0] < 0:
        raise InvalidParameterError("tau grid must be ascending and non-negative")
    return taus


def _propagate_rows_expm(rows: np.ndarray, prop: np.ndarray, taus: np.ndarray) -> np.ndarray:
    # each row r of C(tau) obeys dr/dtau = prop @ r
    out = np.empty((taus.size,) + rows.shape)
    for k, t in enumerate(taus):
        out[k] = rows if t == 0 else rows @ spla.expm(prop * t).T
    return out


def _propagate_rows_rk(rows: np.ndarray, prop: np.ndarray, taus: np.ndarray) -> np.ndarray:
    n = prop.shape[0]
    flat0 = rows.reshape(-1)
    scale = max(float(np.abs(flat0).max()), 1e-300)

    def rhs(_t, y):
        return (y.reshape(-1, n) @ prop.T).reshape(-1)

    if taus[-1] == 0:
        return np.broadcast_to(rows, (taus.size,) + rows.shape).copy()
    sol = solve_ivp(rhs, (0.0, taus[-1]), flat0, method="DOP853", t_eval=taus,
                    rtol=1e-13, atol=1e-16 * scale)
    if not sol.success:
        raise IntegrationError(f"adaptive integration failed: {sol.message}")
    return sol.y.T.reshape((taus.size,) + rows.shape)


def evolve_covariance(c0, sys: FluctuationSystem, taus: Sequence[float],
                      method: str = "expm", cross_check: bool = False) -> list[CovarianceMatrix]:
    """Two-time covariance ``C(tau) = C(0) exp(J^T tau)`` on an ascending grid.

    ``method`` picks the matrix exponential (``"expm"``) or an adaptive
    Dormand-Prince integrator (``"rk"``). With ``cross_check`` both are run
    and an :class:`IntegrationError` is raised if they differ by more than
    1e-10 relative to the largest entry of ``c0``. Negative delays follow from
    ``C(-tau) = C(tau)^T``.
    """
    taus = _check_taus(taus)
    if taus[0] != 0:
        raise InvalidParameterError("tau grid must start at 0")
    rows = _as_array(c0)
    if method == "expm":
        vals = _propagate_rows_expm(rows, sys.propagator, taus)
    elif method == "rk":
        vals = _propagate_rows_rk(rows, sys.propagator, taus)
    else:
        raise InvalidParameterError(f"unknown propagation method {method!r}")
    if cross_check:
        other = (_propagate_rows_rk if method == "expm" else _propagate_rows_expm)(rows, sys.propagator, taus)
        scale = max(float(np.abs(rows).max()), 1e-300)
        gap = float(np.abs(vals - other).max()) / scale
        if gap > PROPAGATOR_AGREEMENT:
            raise IntegrationError(f"expm and RK propagators disagree by {gap:.3g}")
    vals[0] = rows
    return [CovarianceMatrix(v, float(t)) for v, t in zip(vals, taus)]


@dataclass(frozen=True)
class CorrelationTrace:
    pair: tuple[int, int]
    taus: np.ndarray
    values: np.ndarray
    normalization: int = 0
    X: float | None = None

    @property
    def label(self) -> str:
        return pair_label(self.pair)

    def normalized(self, power: int) -> CorrelationTrace:
        """Divide out ``X**power`` (relative to the current normalization)."""
        if power not in (0, 2, 3, 4):
            raise InvalidParameterError(f"normalization power must be 0, 2, 3 or 4, got {power}")
        if self.X is None or self.X == 0:
            raise InvalidParameterError("trace has no non-zero amplitude X to normalize by")
        shift = power - self.normalization
        return CorrelationTrace(self.pair, self.taus, self.values / self.X**shift, power, self.X)

    def __add__(self, other: CorrelationTrace) -> CorrelationTrace:
        if other.normalization != self.normalization or not np.array_equal(other.taus, self.taus):
            raise InvalidParameterError("traces differ in grid or normalization")
        return CorrelationTrace(self.pair, self.taus, self.values + other.values, self.normalization, self.X)


def correlation_trace(sys: FluctuationSystem, c_inf, pair, taus: Sequence[float],
                      method: str = "expm") -> CorrelationTrace:
    """Samples of ``C^{ij}(tau)`` for one ordered pair.

    Only row ``i`` of the covariance matters; it evolves under
    left-multiplication by the propagator.
    """
    i, j = parse_pair(pair)
    taus = _check_taus(taus)
    row = _as_array(c_inf)[i][None, :]
    if method == "expm":
        vals = _propagate_rows_expm(row, sys.propagator, taus)
    else:
        vals = _propagate_rows_rk(row, sys.propagator, taus)
    return CorrelationTrace((i, j), taus, vals[:, 0, j].copy(), 0, sys.X)


def _masked_row(c_inf, i: int, sources) -> np.ndarray:
    keep = np.zeros(len(BASIS), dtype=bool)
    for name in sources:
        keep[basis_index(name) if isinstance(name, str) else int(name)] = True
    return np.where(keep, _as_array(c_inf)[i], 0.0)


def partial_correlation_trace(sys: FluctuationSystem, c_inf, pair, taus: Sequence[float],
                              sources: Sequence[str]) -> CorrelationTrace:
    """Contribution to ``C^{ij}(tau)`` from the seed entries ``C^{ik}(0)``, k in ``sources``.

    Traces are linear in the seed row, so contributions from complementary
    source sets add up to :func:`correlation_trace`. On the reduced system
    the sources ``("z", "nu")`` give the single-pole part of a starred-row
    correlation and the remaining sources give the double-pole part, since
    they reach ``z`` and ``nu`` only through ``mu``.
    """
    i, j = parse_pair(pair)
    taus = _check_taus(taus)
    row = _masked_row(c_inf, i, sources)[None, :]
    vals = _propagate_rows_expm(row, sys.propagator, taus)
    return CorrelationTrace((i, j), taus, vals[:, 0, j].copy(), 0, sys.X)


SINGLE_POLE_SOURCES = ("z", "nu")
DOUBLE_POLE_SOURCES = ("z*", "nu*", "mu")


def laplace_correlation(sys: FluctuationSystem, c_inf, pair, sbar: complex,
                        sources: Sequence[str] | None = None) -> complex:
    """Entry ``(i, j)`` of ``C_inf (s I - J^T)^-1`` at dimensionless ``sbar``.

    ``sources`` restricts the seed row as in :func:`partial_correlation_trace`.
    """
    i, j = parse_pair(pair)
    prop = sys.propagator
    mat = sbar * np.eye(prop.shape[0]) - prop
    eig = np.linalg.eigvals(prop)
    if np.min(np.abs(eig - sbar)) < 1e-12 * max(1.0, abs(sbar)):
        raise SingularResolventError(f"s = {sbar} coincides with an eigenvalue of the propagator")
    row = _as_array(c_inf)[i] if sources is None else _masked_row(c_inf, i, sources)
    rhs = row.astype(complex)
    sol = np.linalg.solve(mat, rhs)
    scale = max(float(np.abs(rhs).max()), 1e-300)
    if np.abs(mat @ sol - rhs).max() > 1e-12 * scale * max(1.0, np.abs(mat).max()):
        raise SingularResolventError(f"resolvent solve inaccurate at s = {sbar}")
    return complex(sol[j])


@dataclass(frozen=True)
class SpectrumTrace:
    pair: tuple[int, int]
    detunings: np.ndarray
    values: np.ndarray

    @property
    def label(self) -> str:
        return pair_label(self.pair)


def spectrum_trace(sys: FluctuationSystem, c_inf, pair, detunings: Sequence[float]) -> SpectrumTrace:
    """Real part of the one-sided transform at ``s = -i * detuning`` (unnormalized)."""
    det = np.asarray(detunings, dtype=float)
    i, j = parse_pair(pair)
    vals = np.array([laplace_correlation(sys, c_inf, (i, j), -1j * d).real for d in det])
    return SpectrumTrace((i, j), det, vals)
