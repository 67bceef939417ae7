import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftqst.errors import DegenerateInputError, FrequencySetError, InvalidStateError
from ftqst.forward import default_waveplates, poisson_counts, simulate_scan
from ftqst.harmonics import HarmonicSpectrum, extract_coefficients, frequency_set, stokes_design_matrix
from ftqst.qmat import (
    BELL,
    KETS,
    concurrence,
    eigenvalues,
    fidelity_to_pure,
    is_density,
    named_state,
    projector,
    random_density,
    random_pure,
    trace_distance,
    werner_state,
)
from ftqst.reconstruct import (
    MleConfig,
    ProjectiveData,
    _cost_and_grad,
    fit_signal,
    invert_numerical,
    invert_single_qubit,
    invert_spectrum,
    invert_two_qubit,
    linear_fit,
    linear_inversion,
    mle_fit,
    project_physical,
    projective_labels,
    projective_tomography,
    reconstruct,
    scan_operators,
    simulate_projective,
)

seeds = st.integers(0, 2**32 - 1)


def counts_scan(rho, n_points, intensity, seed):
    scan = simulate_scan(rho, n_points)
    return scan.with_values(poisson_counts(scan.values, intensity, seed), "counts")


@settings(max_examples=40)
@given(seeds)
def test_closed_forms_match_numerical_on_arbitrary_spectra(seed):
    # closed form and pseudo-inverse must agree on any spectrum in the model's range
    rng = np.random.default_rng(seed)
    for n, fs in ((1, frequency_set(1)), (2, frequency_set(2))):
        stokes = rng.normal(size=4**n)
        vec = stokes_design_matrix(fs) @ stokes
        spec = HarmonicSpectrum.from_vector(fs, vec)
        closed = invert_single_qubit(spec) if n == 1 else invert_two_qubit(spec)
        assert np.max(np.abs(closed - invert_numerical(spec))) < 1e-9


@pytest.mark.parametrize("label", ["H", "V", "D", "A", "L", "R"])
def test_single_qubit_linear_exact(label):
    rho = projector(KETS[label])
    raw, norm = linear_inversion(simulate_scan(rho, 400))
    assert norm == 1.0
    assert np.max(np.abs(raw - rho)) < 1e-12


@settings(max_examples=30)
@given(seeds, st.integers(1, 2))
def test_linear_round_trip_mixed_states(seed, n):
    rho = random_density(2**n, np.random.default_rng(seed))
    raw, _ = linear_inversion(simulate_scan(rho, 100))
    assert np.max(np.abs(raw - rho)) < 1e-11


def test_three_qubit_numerical_inversion():
    rho = random_density(8, np.random.default_rng(4))
    scan = simulate_scan(rho, 260, default_waveplates(3))
    raw = invert_spectrum(extract_coefficients(scan))
    assert np.max(np.abs(raw - rho)) < 1e-10


def test_wrong_set_for_closed_forms():
    spec = extract_coefficients(simulate_scan(projector(KETS["H"]), 50))
    with pytest.raises(FrequencySetError):
        invert_two_qubit(spec)
    spec3 = extract_coefficients(simulate_scan(np.eye(4) / 4, 60, default_waveplates(2, [1, 3])))
    with pytest.raises(FrequencySetError):
        invert_single_qubit(spec3)
    with pytest.raises(FrequencySetError):
        invert_spectrum(spec3)  # (1, 3) design is rank deficient


@pytest.mark.parametrize("name", ["phi+", "psi-", "HH", "LD"])
def test_two_qubit_noiseless_mle(name):
    psi = named_state(name)
    res = mle_fit(simulate_scan(projector(psi), 100))
    assert res.converged
    assert fidelity_to_pure(res.rho, psi) >= 1 - 1e-6


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(1, 4))
def test_mle_noiseless_fit_is_exact(seed, rank):
    rho = random_density(4, np.random.default_rng(seed), rank=rank)
    res = mle_fit(simulate_scan(rho, 100))
    assert res.cost / 100 < 1e-12
    assert res.cost <= res.initial_cost
    if rank == 4:
        assert trace_distance(res.rho, rho) < 1e-5


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    scan = counts_scan(random_density(4, rng), 100, 500, 1)
    ops = scan_operators(scan)
    y = np.asarray(scan.values) / 500
    x = rng.normal(size=16)
    for fit_scale in (False, True):
        _, g, _ = _cost_and_grad(x, ops, y, fit_scale, 4)
        h = 1e-6
        fd = np.empty_like(x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = h
            fd[j] = (_cost_and_grad(x + e, ops, y, fit_scale, 4)[0] - _cost_and_grad(x - e, ops, y, fit_scale, 4)[0]) / (2 * h)
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_fd_gradient_mode_agrees():
    scan = counts_scan(projector(KETS["D"]), 400, 900, 2)
    a = mle_fit(scan)
    b = mle_fit(scan, MleConfig(gradient="fd"))
    assert trace_distance(a.rho, b.rho) < 1e-4


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_mle_output_physical_and_monotone(seed):
    rng = np.random.default_rng(seed)
    scan = counts_scan(random_density(4, rng, rank=1), 100, 50, rng)
    res = mle_fit(scan, MleConfig(init="mixed"))
    assert is_density(res.rho)
    assert np.all(eigenvalues(res.rho) >= 0)
    hist = np.array(res.cost_history)
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])
    assert res.cost <= res.initial_cost


def test_counts_scale_invariance():
    scan = counts_scan(projector(BELL["psi-"]), 100, 300, 5)
    a = mle_fit(scan)
    b = mle_fit(scan.with_values(np.asarray(scan.values) * 7))
    # same objective in probability units; states agree to optimizer tolerance
    assert b.cost == pytest.approx(a.cost, rel=1e-9)
    assert trace_distance(a.rho, b.rho) < 1e-5
    assert b.scale == pytest.approx(7 * a.scale, rel=1e-6)
    assert a.scale == pytest.approx(300, rel=0.05)


def test_fit_signal_units():
    scan = counts_scan(projector(KETS["H"]), 400, 900, 3)
    res = mle_fit(scan)
    model = fit_signal(res, scan)
    assert abs(model.mean() / np.mean(scan.values) - 1) < 0.01


def test_counts_need_scale():
    scan = counts_scan(projector(KETS["H"]), 400, 900, 3)
    with pytest.raises(ValueError):
        mle_fit(scan, MleConfig(fit_scale=False))


def test_iteration_cap_reports_nonconvergence():
    scan = counts_scan(random_density(4, np.random.default_rng(0)), 100, 200, 0)
    res = mle_fit(scan, MleConfig(max_iter=1, init="mixed"))
    assert not res.converged
    assert is_density(res.rho)


def test_zero_scan_is_degenerate():
    scan = simulate_scan(projector(KETS["H"]), 50)
    zero = scan.with_values(np.zeros(50), "counts")
    with pytest.raises(DegenerateInputError):
        mle_fit(zero)
    with pytest.raises(DegenerateInputError):
        linear_fit(zero)


def test_project_physical():
    raw = np.diag([1.2, -0.2]).astype(complex)
    rho = project_physical(raw)
    assert is_density(rho)
    assert rho[0, 0].real == pytest.approx(1)
    with pytest.raises(InvalidStateError):
        project_physical(np.array([[0.5, 2.0], [0.0, 0.5]]))
    with pytest.raises(DegenerateInputError):
        project_physical(np.zeros((2, 2)))


def test_mle_config_validation():
    with pytest.raises(ValueError):
        MleConfig(tol=0)
    with pytest.raises(ValueError):
        MleConfig(gradient="newton")
    with pytest.raises(ValueError):
        reconstruct(simulate_scan(np.eye(2) / 2, 20), "bayes")


def test_projective_oracle():
    labels = projective_labels(2)
    assert len(labels) == 16 and labels[0] == "HH" and labels[-1] == "LL"
    for name in ("phi+", "psi-"):
        res = projective_tomography(projector(BELL[name]))
        assert fidelity_to_pure(res.rho, BELL[name]) > 1 - 1e-6
    rho = random_density(4, np.random.default_rng(3))
    res = reconstruct(simulate_projective(rho))
    assert trace_distance(res.rho, rho) < 1e-5
    with pytest.raises(InvalidStateError):
        projective_tomography(np.eye(2) / 2)


def test_projective_counts_concurrence():
    rho = werner_state(BELL["psi-"], 0.8)
    res = reconstruct(simulate_projective(rho, intensity=1e6, seed=2))
    assert concurrence(res.rho) == pytest.approx(0.7, abs=0.01)
    assert res.method == "projective"


def test_projective_data_validation():
    with pytest.raises(ValueError):
        ProjectiveData(("HH", "HV"), [1.0])
    with pytest.raises(ValueError):
        ProjectiveData(("HH",), [-1.0])


def test_random_pure_round_trip_linear_and_mle():
    rng = np.random.default_rng(12)
    for _ in range(5):
        psi = random_pure(2, rng)
        scan = simulate_scan(projector(psi), 400)
        assert fidelity_to_pure(linear_fit(scan).rho, psi) > 1 - 1e-10
        assert fidelity_to_pure(mle_fit(scan).rho, psi) > 1 - 1e-6
