import math

import numpy as np
import pytest
import scipy.sparse as sps

from obfluct import core
from obfluct import oracle as me
from obfluct.errors import DiagnosticsError, InvalidParameterError


@pytest.fixture(scope="module")
def weak_pair():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 2, drive_y=0.02 * 9.0)
    L = me.build_liouvillian(me.HilbertConfig(2, 12), p)
    return p, L, me.steady_state(L)


def test_dimension_guard():
    assert me.HilbertConfig(2, 12).dimension == 52
    with pytest.raises(InvalidParameterError):
        me.HilbertConfig(5, 3)
    with pytest.raises(InvalidParameterError):
        me.HilbertConfig(4, 1)
    with pytest.raises(InvalidParameterError):
        me.HilbertConfig(4, 200)


def test_trace_preserving():
    p = core.PhysicalParams(0.7, 0.3, 1.1, 2, drive_y=1.0)
    L = me.build_liouvillian(me.HilbertConfig(2, 4), p)
    assert np.abs(L.trace_functional() @ L.matrix).max() < 1e-12


def test_unique_stationary_state_and_gap():
    p = core.PhysicalParams(0.7, 0.3, 1.1, 1, drive_y=1.0)
    L = me.build_liouvillian(me.HilbertConfig(1, 4), p)
    ev = np.linalg.eigvals(L.matrix.toarray())
    near_zero = np.abs(ev) < 1e-10
    assert near_zero.sum() == 1
    assert np.all(ev[~near_zero].real < 0)


def test_single_atom_one_excitation_coherences():
    # coherences |g,0><g,1| and |g,0><e,0| decay at (kappa + gamma/2)/2 and split by the Rabi coupling
    for g, kappa, gamma in ((1.0, 0.5, 1.0), (0.7, 0.3, 1.3)):
        p = core.PhysicalParams(g, kappa, gamma, 1)
        L = me.build_liouvillian(me.HilbertConfig(1, 3), p, raw_drive=0.0)
        ev = np.linalg.eigvals(L.matrix.toarray())
        want = -(kappa + gamma / 2) / 2 + 1j * math.sqrt(g * g - (kappa - gamma / 2) ** 2 / 4)
        assert np.abs(ev - want).min() < 1e-12
        assert np.abs(ev - np.conj(want)).min() < 1e-12


def test_undriven_uncoupled_ground_state():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 2)
    L = me.build_liouvillian(me.HilbertConfig(2, 3), p, coupling=0.0, raw_drive=0.0)
    rho = me.steady_state(L)
    want = me.ground_state(L.cfg).matrix
    assert np.abs(rho.matrix - want).max() < 1e-14
    assert me.map_to_scaled(rho, p).inversion == pytest.approx(-1.0, abs=1e-14)


def test_decoupled_cavity_is_coherent():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 1, drive_y=0.8)
    L = me.build_liouvillian(me.HilbertConfig(1, 14), p, coupling=0.0)
    rho = me.steady_state(L)
    a = rho.expect(L.ops["a"])
    assert abs(a) == pytest.approx(p.raw_drive / p.kappa, rel=1e-9)
    assert a == pytest.approx(-1j * me.drive_amplitude(p) / p.kappa, rel=1e-9)
    assert me.map_to_scaled(rho, p).X == pytest.approx(0.8, rel=1e-9)


def test_weak_drive_means(weak_pair):
    p, L, rho = weak_pair
    m = me.map_to_scaled(rho, p)
    assert abs(m.amplitude.imag) < 1e-10 and m.amplitude.real > 0
    assert (1 + m.inversion) == pytest.approx(m.X**2, rel=0.05)
    assert abs(m.polarization) == pytest.approx(m.X / (1 + m.X**2), rel=0.05)


def test_steady_state_invariants(weak_pair):
    _, L, rho = weak_pair
    d = rho.diagnostics()
    assert d["trace_error"] < 1e-10
    assert d["hermiticity_defect"] < 1e-10
    assert d["min_eigenvalue"] > -1e-8
    assert np.abs(L.matrix @ rho.matrix.reshape(-1)).max() < 1e-10
    assert rho.photon_distribution()[-1] < 1e-8


def test_propagation_fallback_agrees(weak_pair):
    _, L, rho = weak_pair
    slow = me.steady_state(L, method="propagate")
    assert np.abs(slow.matrix - rho.matrix).max() < 1e-9


def test_cutoff_robustness():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 2, drive_y=0.5)
    means = []
    for cutoff in (10, 12):
        rho = me.steady_state(me.build_liouvillian(me.HilbertConfig(2, cutoff), p))
        m = me.map_to_scaled(rho, p)
        means.append(np.array([m.X, abs(m.polarization), m.inversion]))
    assert np.max(np.abs(means[1] - means[0]) / np.abs(means[1])) < 1e-6


def test_cutoff_insufficient_detected():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 1, drive_y=20.0)
    with pytest.raises(DiagnosticsError):
        me.steady_state(me.build_liouvillian(me.HilbertConfig(1, 3), p))


def test_linear_response_slope():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 2)
    ys = np.array([0.005, 0.01, 0.02]) * 9.0
    slope, amps = me.linear_response(me.HilbertConfig(2, 12), p, ys)
    assert slope == pytest.approx(1 / 9.0, rel=0.01)
    np.testing.assert_allclose(amps / ys, slope, rtol=0.01)


def test_variance_positive(weak_pair):
    _, L, rho = weak_pair
    for op in ("a", "Jm", "Jp", "adag"):
        adj = L.ops[op].conj().T
        val = me.two_time_correlation(L, rho, adj, L.ops[op], [0.0])[0]
        assert val.real >= -1e-10


def test_anomalous_sign(weak_pair):
    p, L, rho = weak_pair
    val = me.two_time_correlation(L, rho, "Jp", "adag", [0.0])[0]
    assert val.real < 0
    assert me.scale_correlation(val, "Jp", "adag", p).real < 0


def test_correlation_grids_agree(weak_pair):
    _, L, rho = weak_pair
    uniform = np.linspace(0, 4, 9)
    irregular = np.array([0.0, 0.5, 1.5, 4.0])
    a = me.two_time_correlation(L, rho, "adag", "a", uniform)
    b = me.two_time_correlation(L, rho, "adag", "a", irregular)
    np.testing.assert_allclose(b, a[[0, 1, 3, 8]], rtol=1e-9)


def test_rabi_frequency_three_atoms():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 3, drive_y=0.05 * 7)
    L = me.build_liouvillian(me.HilbertConfig(3, 12), p)
    rho = me.steady_state(L)
    taus = np.linspace(0, 40, 2001)
    trace = me.two_time_correlation(L, rho, "adag", "a", taus)
    assert me.dominant_frequency(taus, trace) == pytest.approx(math.sqrt(3), rel=0.05)


def test_dominant_frequency_on_synthetic_signal():
    t = np.linspace(0, 50, 4001)
    sig = np.exp(-0.2 * t) * np.cos(2.3 * t)
    assert me.dominant_frequency(t, sig) == pytest.approx(2.3, rel=1e-3)


def test_propagation_monitors_invariants():
    p = core.PhysicalParams(1.0, 0.5, 1.0, 2, drive_y=0.5)
    L = me.build_liouvillian(me.HilbertConfig(2, 10), p)
    states = me.propagate(L, me.ground_state(L.cfg), np.linspace(0, 10, 21))
    assert len(states) == 21
    for s in states:
        s.check()


def test_atom_count_mismatch():
    with pytest.raises(InvalidParameterError):
        me.build_liouvillian(me.HilbertConfig(2, 3), core.PhysicalParams(1.0, 0.5, 1.0, 3))


def test_operator_algebra():
    ops = me._operators(me.HilbertConfig(2, 4))
    jz = ops["Jz"].toarray()
    comm = (ops["Jp"] @ ops["Jm"] - ops["Jm"] @ ops["Jp"]).toarray()
    np.testing.assert_allclose(comm, jz, atol=1e-14)
    assert sps.issparse(ops["a"])
