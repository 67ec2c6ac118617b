"""Exact master-equation reference for a few atoms in a truncated cavity.

The composite basis is ``|b_1 ... b_N> (x) |n>`` with atom bits
``b = 0`` (ground) or ``1`` (excited) and photon number ``n = 0..fock_cutoff``.
Density matrices are vectorized row-major, so ``vec(A rho B) = (A kron B^T) vec(rho)``.
The model runs in the frame rotating at the common resonance frequency:

    H = i g (a^dag J- - a J+) + E0 a^dag + E0^* a,
    dissipators: gamma D[sigma_j-] per atom, 2 kappa D[a].

The drive phase follows the scaled-variable convention: ``E0 = |E0| exp(i phi0)``
makes the scaled amplitude ``i exp(-i phi0) <a> / sqrt(n_s)`` real and positive.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.linalg import eigvalsh

from .core import PhysicalParams, derive_dimensionless
from .errors import DiagnosticsError, IntegrationError, InvalidParameterError

MAX_DIMENSION = 2048
TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8
CUTOFF_TOL = 1e-8
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class HilbertConfig:
    n_atoms: int
    fock_cutoff: int

    def __post_init__(self) -> None:
        if not (1 <= self.n_atoms <= 4):
            raise InvalidParameterError(f"oracle supports 1 to 4 atoms, got {self.n_atoms}")
        if self.fock_cutoff < 2:
            raise InvalidParameterError(f"fock_cutoff must be at least 2, got {self.fock_cutoff}")
        if self.dimension > MAX_DIMENSION:
            raise InvalidParameterError(
                f"Hilbert dimension {self.dimension} exceeds the guard {MAX_DIMENSION}")

    @property
    def dimension(self) -> int:
        return 2**self.n_atoms * (self.fock_cutoff + 1)


def _operators(cfg: HilbertConfig) -> dict[str, sps.csr_matrix]:
    n_ph = cfg.fock_cutoff + 1
    a_single = sps.diags(np.sqrt(np.arange(1, n_ph, dtype=float)), 1, format="csr")
    lower = sps.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    eye2 = sps.identity(2, format="csr")
    n_atom_states = 2**cfg.n_atoms

    def on_atom(op, k):
        out = sps.identity(1, format="csr")
        for j in range(cfg.n_atoms):
            out = sps.kron(out, op if j == k else eye2, format="csr")
        return sps.kron(out, sps.identity(n_ph, format="csr"), format="csr")

    sigmas = [on_atom(lower, k) for k in range(cfg.n_atoms)]
    a = sps.kron(sps.identity(n_atom_states, format="csr"), a_single, format="csr")
    jm = sum(sigmas[1:], sigmas[0]).tocsr()
    dim = cfg.dimension
    jz = sum((2.0 * (s.conj().T @ s) for s in sigmas), sps.csr_matrix((dim, dim))) \
        - cfg.n_atoms * sps.identity(dim, format="csr")
    ops = {
        "a": a,
        "adag": a.conj().T.tocsr(),
        "Jm": jm,
        "Jp": jm.conj().T.tocsr(),
        "Jz": jz.tocsr(),
        "n": (a.conj().T @ a).tocsr(),
    }
    for k, s in enumerate(sigmas):
        ops[f"sm{k}"] = s
    return ops


@dataclass(frozen=True)
class Liouvillian:
    matrix: sps.csc_matrix = field(repr=False)
    cfg: HilbertConfig
    params: PhysicalParams
    ops: dict = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.cfg.dimension

    def trace_functional(self) -> np.ndarray:
        d = self.dimension
        t = np.zeros(d * d)
        t[np.arange(d) * (d + 1)] = 1.0
        return t


def drive_amplitude(p: PhysicalParams) -> complex:
    """Complex raw drive ``E0 = |E0| exp(i phi0)``."""
    return p.raw_drive * cmath.exp(1j * p.phi0)


def build_liouvillian(cfg: HilbertConfig, p: PhysicalParams, coupling: float | None = None,
                      raw_drive: complex | None = None) -> Liouvillian:
    """Generator of the master equation on row-major vectorized density matrices.

    ``coupling`` replaces ``p.g`` in the Hamiltonian only (0 decouples atoms and
    cavity while keeping ``p`` valid); ``raw_drive`` replaces the complex drive.
    """
    if p.n_atoms != cfg.n_atoms:
        raise InvalidParameterError("HilbertConfig and PhysicalParams disagree on the atom number")
    ops = _operators(cfg)
    d = cfg.dimension
    eye = sps.identity(d, format="csr")
    e0 = drive_amplitude(p) if raw_drive is None else complex(raw_drive)
    g = p.g if coupling is None else float(coupling)
    ham = 1j * g * (ops["adag"] @ ops["Jm"] - ops["a"] @ ops["Jp"]) \
        + e0 * ops["adag"] + np.conj(e0) * ops["a"]
    gen = -1j * (sps.kron(ham, eye) - sps.kron(eye, ham.T))

    def dissipator(c, rate):
        cdc = c.conj().T @ c
        return rate * (sps.kron(c, c.conj()) - 0.5 * sps.kron(cdc, eye) - 0.5 * sps.kron(eye, cdc.T))

    gen = gen + dissipator(ops["a"], 2.0 * p.kappa)
    for k in range(cfg.n_atoms):
        gen = gen + dissipator(ops[f"sm{k}"], p.gamma)
    return Liouvillian(gen.tocsc(), cfg, p, ops)


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    cfg: HilbertConfig

    def expect(self, op) -> complex:
        return complex((op @ self.matrix).trace() if sps.issparse(op) else np.trace(op @ self.matrix))

    def photon_distribution(self) -> np.ndarray:
        n_ph = self.cfg.fock_cutoff + 1
        diag = np.real(np.diag(self.matrix)).reshape(2**self.cfg.n_atoms, n_ph)
        return diag.sum(axis=0)

    def diagnostics(self) -> dict[str, float]:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return {
            "trace_error": abs(np.trace(self.matrix) - 1.0),
            "hermiticity_defect": float(np.abs(self.matrix - self.matrix.conj().T).max()),
            "min_eigenvalue": float(eigvalsh(herm).min()),
        }

    def check(self) -> None:
        diag = self.diagnostics()
        if diag["trace_error"] > TRACE_TOL:
            raise DiagnosticsError(f"trace off by {diag['trace_error']:.3g}")
        if diag["hermiticity_defect"] > HERMITIAN_TOL:
            raise DiagnosticsError(f"Hermiticity defect {diag['hermiticity_defect']:.3g}")
        if diag["min_eigenvalue"] < -POSITIVITY_TOL:
            raise DiagnosticsError(f"negative eigenvalue {diag['min_eigenvalue']:.3g}")


def _check_cutoff(rho: DensityOperator) -> None:
    top = rho.photon_distribution()[-1]
    if top > CUTOFF_TOL:
        raise DiagnosticsError(
            f"population {top:.3g} at the Fock cutoff {rho.cfg.fock_cutoff}; increase fock_cutoff")


def steady_state(L: Liouvillian, method: str = "direct", check_cutoff: bool = True) -> DensityOperator:
    """Stationary state of the generator.

    ``direct`` replaces one equation of ``L rho = 0`` by the trace condition
    and solves the sparse system. ``propagate`` integrates from the ground
    state until the state stops changing (cross-check only, much slower).
    """
    d = L.dimension
    if method == "direct":
        tr = sps.csr_matrix(L.trace_functional()[None, :])
        system = sps.vstack([tr, L.matrix[1:, :]]).tocsc()
        rhs = np.zeros(d * d, dtype=complex)
        rhs[0] = 1.0
        with np.errstate(all="raise"):
            try:
                vec = spla.spsolve(system, rhs)
            except (RuntimeError, FloatingPointError) as exc:
                raise DiagnosticsError(f"stationary solve failed: {exc}") from exc
        if not np.all(np.isfinite(vec)):
            raise DiagnosticsError("stationary solve produced non-finite values (null space ill-conditioned)")
    elif method == "propagate":
        vec = ground_state(L.cfg).matrix.reshape(-1).astype(complex)
        rate = max(L.params.gamma, 2.0 * L.params.kappa)
        for _ in range(200):
            nxt = spla.expm_multiply(L.matrix, vec, start=0.0, stop=50.0 / rate, num=2, endpoint=True)[-1]
            if np.abs(nxt - vec).max() < 1e-13:
                vec = nxt
                break
            vec = nxt
        else:
            raise DiagnosticsError("long-time propagation did not converge")
    else:
        raise InvalidParameterError(f"unknown steady-state method {method!r}")
    resid = float(np.abs(L.matrix @ vec).max())
    if resid > RESIDUAL_TOL * max(1.0, L.params.gamma, L.params.kappa, L.params.g):
        raise DiagnosticsError(f"stationary residual {resid:.3g}")
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    out = DensityOperator(rho, L.cfg)
    out.check()
    if check_cutoff:
        _check_cutoff(out)
    return out


def ground_state(cfg: HilbertConfig) -> DensityOperator:
    """All atoms in the ground state, cavity in vacuum."""
    d = cfg.dimension
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    return DensityOperator(rho, cfg)


def _uniform(taus: np.ndarray) -> bool:
    if taus.size < 3:
        return True
    steps = np.diff(taus)
    return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))


def _propagate(L: Liouvillian, vec: np.ndarray, taus: np.ndarray) -> np.ndarray:
    if taus.size == 1:
        if taus[0] == 0:
            return vec[None, :]
        return spla.expm_multiply(L.matrix * taus[0], vec)[None, :]
    if _uniform(taus):
        out = spla.expm_multiply(L.matrix, vec, start=taus[0], stop=taus[-1],
                                 num=taus.size, endpoint=True)
    else:
        out = np.array([spla.expm_multiply(L.matrix * t, vec) for t in taus])
    if not np.all(np.isfinite(out)):
        raise IntegrationError("propagation diverged")
    return out


def propagate(L: Liouvillian, rho0: DensityOperator, taus) -> list[DensityOperator]:
    """Evolve a density operator; trace, Hermiticity and positivity are checked at every sample."""
    taus = np.asarray(taus, dtype=float)
    if np.any(np.diff(taus) <= 0) or taus[0] < 0:
        raise InvalidParameterError("times must be ascending and non-negative")
    d = L.dimension
    states = []
    for vec in _propagate(L, rho0.matrix.reshape(-1).astype(complex), taus):
        rho = DensityOperator(vec.reshape(d, d), L.cfg)
        try:
            rho.check()
        except DiagnosticsError as exc:
            raise IntegrationError(f"invariant lost during propagation: {exc}") from exc
        states.append(rho)
    return states


def _resolve(L: Liouvillian, op):
    if isinstance(op, str):
        try:
            return L.ops[op]
        except KeyError:
            raise InvalidParameterError(f"unknown operator {op!r}; have {sorted(L.ops)}") from None
    return sps.csr_matrix(op)


def two_time_correlation(L: Liouvillian, rho_ss: DensityOperator, op_a, op_b, taus) -> np.ndarray:
    """``<A(0) B(tau)> - <A><B>`` in the steady state via quantum regression.

    ``taus`` are physical times (same unit as the inverse rates).
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(np.diff(taus) <= 0) or taus[0] < 0:
        raise InvalidParameterError("times must be ascending and non-negative")
    A, B = _resolve(L, op_a), _resolve(L, op_b)
    d = L.dimension
    seed = (rho_ss.matrix @ A.toarray()).reshape(-1)
    evolved = _propagate(L, seed, taus)
    # Tr[B M] = sum_ij B_ji M_ij
    weights = B.toarray().T.reshape(-1)
    mean_a = rho_ss.expect(A)
    mean_b = rho_ss.expect(B)
    return evolved @ weights - mean_a * mean_b


# ---- conversion to scaled variables ----------------------------------------

def _scale_factor(op: str, p: PhysicalParams) -> complex:
    n_s = p.saturation_photons
    phase = cmath.exp(-1j * p.phi0)
    factors = {
        "a": 1j * phase / math.sqrt(n_s),
        "adag": -1j * np.conj(phase) / math.sqrt(n_s),
        "Jm": 1j * math.sqrt(2.0) * phase / p.n_atoms,
        "Jp": -1j * math.sqrt(2.0) * np.conj(phase) / p.n_atoms,
        "Jz": 1.0 / p.n_atoms,
    }
    try:
        return factors[op]
    except KeyError:
        raise InvalidParameterError(f"no scaling defined for operator {op!r}") from None


@dataclass(frozen=True)
class ScaledMeans:
    amplitude: complex
    polarization: complex
    inversion: float
    photon_number: float

    @property
    def X(self) -> float:
        return abs(self.amplitude)


def map_to_scaled(rho: DensityOperator, p: PhysicalParams) -> ScaledMeans:
    """Steady-state means in the scaled variables of the mean-field theory.

    ``amplitude`` is ``a`` scaled by ``sqrt(n_s)`` (phase-corrected),
    ``polarization`` is the scaled ``J-`` whose magnitude is ``sqrt(2)|<J->|/N``,
    and ``inversion`` is ``<Jz>/N`` with ``Jz`` the sum of Pauli z operators.
    """
    ops = _operators(rho.cfg)
    return ScaledMeans(
        amplitude=_scale_factor("a", p) * rho.expect(ops["a"]),
        polarization=_scale_factor("Jm", p) * rho.expect(ops["Jm"]),
        inversion=float(np.real(rho.expect(ops["Jz"]))) / p.n_atoms,
        photon_number=float(np.real(rho.expect(ops["n"]))) / p.saturation_photons,
    )


def scale_correlation(values, op_a: str, op_b: str, p: PhysicalParams):
    """``N <dA dB>`` in scaled variables, matching the linearized covariances."""
    return p.n_atoms * _scale_factor(op_a, p) * _scale_factor(op_b, p) * np.asarray(values)


# ---- derived checks ---------------------------------------------------------

def dominant_frequency(times, values) -> float:
    """Angular frequency of the strongest spectral component of a sampled trace.

    Zero-padded FFT of the (Hann-windowed, mean-removed) complex signal, refined by
    parabolic interpolation of the peak magnitude.
    """
    times = np.asarray(times, dtype=float)
    sig = np.asarray(values, dtype=complex)
    sig = (sig - sig.mean()) * np.hanning(sig.size)
    n_fft = 1 << max(16, int(np.ceil(np.log2(sig.size))) + 4)
    spec = np.abs(np.fft.fft(sig, n=n_fft))
    freqs = 2.0 * np.pi * np.fft.fftfreq(n_fft, times[1] - times[0])
    k = int(np.argmax(spec))
    if 0 < k < n_fft - 1:
        y0, y1, y2 = spec[k - 1], spec[k], spec[k + 1]
        denom = y0 - 2.0 * y1 + y2
        offset = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    else:
        offset = 0.0
    return abs(freqs[k] + offset * (freqs[1] - freqs[0]))


def linear_response(cfg: HilbertConfig, p: PhysicalParams, drives) -> tuple[float, np.ndarray]:
    """Least-squares slope of the scaled amplitude against the scaled drive.

    Returns the slope through the origin and the scaled amplitudes.
    """
    drives = np.asarray(drives, dtype=float)
    amps = []
    for y in drives:
        q = PhysicalParams(p.g, p.kappa, p.gamma, p.n_atoms, float(y), p.omega0, p.phi0)
        rho = steady_state(build_liouvillian(cfg, q))
        amps.append(map_to_scaled(rho, q).X)
    amps = np.array(amps)
    slope = float(drives @ amps / (drives @ drives))
    return slope, amps


def expected_slope(p: PhysicalParams) -> float:
    return 1.0 / (1.0 + 2.0 * derive_dimensionless(p).C)
