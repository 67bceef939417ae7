import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftqst.errors import InvalidStateError, NyquistError
from ftqst.forward import (
    QWP,
    AngleScan,
    SourceModel,
    WaveplateConfig,
    angle_grid,
    apply_virtual_waveplate,
    chi,
    chi_table,
    default_waveplates,
    max_harmonic,
    measurement_operator,
    nyquist_minimum,
    poisson_counts,
    probability_signal,
    qd_period_ps,
    qd_state,
    sample_counts,
    signal_operator_route,
    signal_stokes_route,
    simulate_scan,
    virtual_waveplate,
    waveplate_unitary,
)
from ftqst.qmat import (
    BELL,
    KETS,
    fidelity_to_pure,
    pauli,
    projector,
    random_density,
    random_pure,
    stokes_from_density,
)

seeds = st.integers(0, 2**32 - 1)
angles = st.floats(-10, 10, allow_nan=False)


def jones_probability(psi, theta, waveplates):
    """|<H...H| U_1 x ... x U_n |psi>|^2 by explicit Jones matrices."""
    u = np.array([[1.0]])
    for w in waveplates:
        u = np.kron(u, waveplate_unitary(w.multiplier * theta + w.offset, w.retardance))
    amp = (u @ psi)[0]
    return abs(amp) ** 2


def test_waveplate_is_unitary_and_qwp_at_zero():
    u = waveplate_unitary(0.3)
    assert np.allclose(u @ u.conj().T, np.eye(2))
    u0 = waveplate_unitary(0.0)
    assert np.allclose(u0, np.diag([np.exp(-1j * np.pi / 4), np.exp(1j * np.pi / 4)]))


@given(angles, st.floats(0, 2 * np.pi))
def test_chi_matches_trace_definition(theta, beta):
    m = measurement_operator(theta, beta)
    direct = [np.trace(pauli(i) @ m).real for i in range(4)]
    assert np.allclose(chi_table(theta, beta), direct, atol=1e-12)


def test_qwp_chi_closed_form():
    t = np.linspace(0, np.pi, 37)
    expected = np.column_stack([np.ones_like(t), np.sin(4 * t) / 2, np.sin(2 * t), (1 + np.cos(4 * t)) / 2])
    assert np.allclose(chi_table(t), expected, atol=1e-14)
    assert np.allclose(chi(2, t), np.sin(2 * t))


@pytest.mark.parametrize(
    "label, formula",
    [
        ("H", lambda t: (3 + np.cos(4 * t)) / 4),
        ("V", lambda t: (1 - np.cos(4 * t)) / 4),
        ("D", lambda t: (2 + np.sin(4 * t)) / 4),
        ("L", lambda t: (1 + np.sin(2 * t)) / 2),
    ],
)
def test_single_qubit_signal_closed_forms(label, formula):
    scan = simulate_scan(projector(KETS[label]), 400)
    assert np.allclose(scan.values, formula(scan.theta), atol=1e-14)


@settings(max_examples=40)
@given(seeds, st.sampled_from([(1,), (1, 5), (1, 3), (2, 7)]))
def test_signal_matches_jones_oracle(seed, multipliers):
    rng = np.random.default_rng(seed)
    wps = default_waveplates(len(multipliers), list(multipliers))
    psi = random_pure(2 ** len(multipliers), rng)
    theta = angle_grid(nyquist_minimum(multipliers) + 3)
    p = probability_signal(projector(psi), wps, theta)
    q = np.array([jones_probability(psi, t, wps) for t in theta])
    assert np.allclose(p, q, atol=1e-12)


@settings(max_examples=40)
@given(seeds, st.integers(1, 3), st.floats(0.2, 3.0), st.floats(-1, 1))
def test_two_routes_agree(seed, n, beta, offset):
    rng = np.random.default_rng(seed)
    rho = random_density(2**n, rng)
    wps = tuple(WaveplateConfig(beta, 5**m, offset * m) for m in range(n))
    theta = angle_grid(60)
    p = signal_stokes_route(stokes_from_density(rho), theta, wps)
    q = signal_operator_route(rho, theta, wps)
    assert np.max(np.abs(p - q)) < 1e-12
    assert np.all(q > -1e-12) and np.all(q < 1 + 1e-12)


@settings(max_examples=30)
@given(seeds)
def test_product_state_signal_factorizes(seed):
    rng = np.random.default_rng(seed)
    ra, rb = random_density(2, rng), random_density(2, rng)
    wps = default_waveplates(2)
    theta = angle_grid(100)
    joint = probability_signal(np.kron(ra, rb), wps, theta)
    pa = probability_signal(ra, wps[:1], theta)
    pb = probability_signal(rb, (WaveplateConfig(QWP, 1),), 5 * theta)
    assert np.allclose(joint, pa * pb, atol=1e-12)


def test_nyquist_guard():
    assert max_harmonic([1]) == 4 and nyquist_minimum([1]) == 9
    assert max_harmonic([1, 5]) == 24 and nyquist_minimum([1, 5]) == 49
    with pytest.raises(NyquistError):
        simulate_scan(projector(KETS["H"]), 8)
    with pytest.raises(NyquistError):
        simulate_scan(projector(BELL["phi+"]), 48)
    simulate_scan(projector(BELL["phi+"]), 49)


def test_angle_scan_grid_validation():
    theta = angle_grid(20)
    with pytest.raises(NyquistError):
        AngleScan(theta * 1.01, np.ones(20))
    with pytest.raises(ValueError):
        AngleScan(theta, -np.ones(20))
    with pytest.raises(ValueError):
        AngleScan(theta, np.ones(20), "photons")
    scan = AngleScan(theta, np.ones(20))
    with pytest.raises(ValueError):
        scan.values[0] = 2


def test_dimension_mismatch():
    with pytest.raises(InvalidStateError):
        probability_signal(projector(KETS["H"]), default_waveplates(2), angle_grid(60))


def test_multiplier_validation():
    with pytest.raises(ValueError):
        default_waveplates(2, [5, 1])
    with pytest.raises(ValueError):
        WaveplateConfig(multiplier=0)


def test_poisson_counts_deterministic():
    p = simulate_scan(projector(KETS["V"]), 400).values
    a = poisson_counts(p, 900, seed=11)
    b = poisson_counts(p, 900, seed=11)
    assert np.array_equal(a, b)
    assert abs(a.mean() / (900 * p.mean()) - 1) < 0.05
    with pytest.raises(ValueError):
        poisson_counts(p, 0)


def test_sample_counts_kind():
    scan = simulate_scan(projector(KETS["H"]), 40)
    counts = sample_counts(scan, 100, seed=1)
    assert counts.value_kind == "counts"
    with pytest.raises(ValueError):
        sample_counts(counts)


@given(seeds, angles, angles, angles, angles)
def test_virtual_waveplate_preserves_spectrum(seed, t1, p1, t2, p2):
    rho = random_density(4, np.random.default_rng(seed))
    out = apply_virtual_waveplate(rho, [(t1, p1), (t2, p2)])
    assert np.allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(rho), atol=1e-12)
    v = virtual_waveplate(t1, p1)
    assert np.allclose(v @ v.conj().T, np.eye(2))


def test_virtual_waveplate_pair_count():
    with pytest.raises(ValueError):
        apply_virtual_waveplate(np.eye(4) / 4, [(0, 0)])


def test_qd_state_periodic():
    period = qd_period_ps(5.44)
    assert period == pytest.approx(2 * np.pi * 0.6582119569 / 5.44 * 1e3)
    phi = BELL["phi+"]
    assert fidelity_to_pure(qd_state(0, 5.44), phi) == pytest.approx(1)
    assert fidelity_to_pure(qd_state(period / 2, 5.44), phi) == pytest.approx(0, abs=1e-12)
    assert fidelity_to_pure(qd_state(period, 5.44), phi) == pytest.approx(1)


def test_source_models():
    spdc = SourceModel("spdc", fidelity=0.94)
    rho = spdc.density_matrix()
    assert fidelity_to_pure(rho, BELL["psi-"]) == pytest.approx(0.94)
    qd = SourceModel("qd-cascade", fss_uev=5.44, lifetime_ps=400)
    assert qd.weight(400) == pytest.approx(np.exp(-1))
    assert np.allclose(qd.target(), BELL["phi+"])
    with pytest.raises(ValueError):
        qd.density_matrix()
    with pytest.raises(ValueError):
        SourceModel("pure-state")
    with pytest.raises(ValueError):
        SourceModel("laser")
    custom = SourceModel("custom-density", density=np.eye(2) / 2)
    assert custom.target() is None
    assert SourceModel("pure-state", state="L").density_matrix()[1, 0] == pytest.approx(0.5j)


def test_retardance_effect():
    # a half-wave plate never produces circular sensitivity: chi_2 = 0
    t = np.linspace(0, np.pi, 50)
    assert np.allclose(chi_table(t, np.pi)[:, 2], 0, atol=1e-14)
    assert np.allclose(chi_table(t, QWP)[:, 2], np.sin(2 * t))
