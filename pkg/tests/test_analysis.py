import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftqst.analysis import MethodSummary, TimeBinSeries, compare_methods, fss_fit, fss_model
from ftqst.errors import FTQSTError
from ftqst.forward import qd_period_ps, qd_state
from ftqst.qmat import BELL, fidelity_to_pure
from ftqst.reconstruct import ReconstructionResult
from ftqst.uncertainty import MonteCarloReport

BINS = np.linspace(0, 800, 40, endpoint=False)


def qd_series(fss, t=BINS):
    rhos = [qd_state(x, fss) for x in t]
    return TimeBinSeries.from_states(t, rhos, BELL["phi+"])


def test_qd_fidelity_closed_form():
    # F(t) = (1 + cos(FSS t / hbar)) / 2
    s = qd_series(5.44)
    expected = fss_model(s.t_ps, 0.5, 0.5, 5.44, 0.0)
    assert np.allclose(s.fidelity, expected, atol=1e-12)


def test_noiseless_recovery():
    fit = fss_fit(qd_series(5.44))
    assert fit.fss == pytest.approx(5.44, abs=1e-6)
    assert fit.amplitude == pytest.approx(0.5, abs=1e-6)
    assert fit.offset == pytest.approx(0.5, abs=1e-6)
    assert abs(np.angle(np.exp(1j * fit.phase0))) < 1e-5
    assert not fit.degenerate
    assert np.allclose(fit.model(BINS), qd_series(5.44).fidelity, atol=1e-6)


@pytest.mark.parametrize("dt", [-150.0, 37.5, 1000.0])
def test_shift_invariance(dt):
    s = qd_series(5.44)
    a = fss_fit(s)
    b = fss_fit(s.shifted(dt))
    assert b.fss == pytest.approx(a.fss, abs=1e-8)
    assert b.amplitude == pytest.approx(a.amplitude, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 15.0))
def test_recovery_across_splittings(fss):
    t = np.linspace(0, 1.5 * qd_period_ps(fss), 40)
    fit = fss_fit(qd_series(fss, t))
    assert fit.fss == pytest.approx(fss, rel=0.01)


@pytest.mark.parametrize("fss", [1.0, 3.0, 5.44, 10.0])
def test_recovery_at_listed_splittings(fss):
    t = np.linspace(0, 1.5 * qd_period_ps(fss), 40)
    assert fss_fit(qd_series(fss, t)).fss == pytest.approx(fss, rel=0.01)


def test_noisy_recovery():
    rng = np.random.default_rng(0)
    s = qd_series(5.44)
    noisy = TimeBinSeries(s.t_ps, np.clip(s.fidelity + rng.normal(0, 0.02, s.t_ps.size), 0, 1))
    fit = fss_fit(noisy)
    assert fit.fss == pytest.approx(5.44, abs=0.15)
    assert 0 < fit.fss_err < 0.1


def test_flat_series_degenerate():
    fit = fss_fit(TimeBinSeries(BINS, np.full(BINS.size, 0.8)))
    assert fit.degenerate
    assert fit.fss == 0.0
    assert fit.offset == pytest.approx(0.8)


def test_short_series_rejected():
    with pytest.raises(FTQSTError):
        fss_fit(TimeBinSeries(BINS[:5], np.linspace(0.2, 0.9, 5)))


def test_half_period_precondition():
    t = np.linspace(0, 800, 40)
    with pytest.raises(FTQSTError):
        fss_fit(qd_series(1.0, t))


def test_series_validation():
    with pytest.raises(ValueError):
        TimeBinSeries([0, 0, 1], [0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        TimeBinSeries([0, 1], [0.5, 1.2])
    with pytest.raises(ValueError):
        TimeBinSeries([0, 1], [0.5, 0.5], [0.1, -0.1])


def test_compare_methods():
    a = MethodSummary(0.94, 0.006, 0.90, 0.018)
    b = MethodSummary(0.95, 0.006, 0.88, 0.018)
    cmp = compare_methods(a, b)
    assert cmp["fidelity"].delta == pytest.approx(0.01)
    assert cmp["fidelity"].combined_sigma == pytest.approx(0.006 * np.sqrt(2))
    assert cmp["fidelity"].agree
    assert cmp["concurrence"].agree
    far = compare_methods(a, MethodSummary(0.99, 0.001))
    assert not far["fidelity"].agree
    assert "concurrence" not in far


@given(st.floats(0, 1), st.floats(0, 0.1), st.floats(0, 1), st.floats(0, 0.1))
def test_compare_symmetric(f1, s1, f2, s2):
    a, b = MethodSummary(f1, s1), MethodSummary(f2, s2)
    assert compare_methods(a, b)["fidelity"].agree == compare_methods(b, a)["fidelity"].agree


def test_method_summary_from_report():
    rho = qd_state(0, 5.44)
    res = ReconstructionResult(rho, "mle")
    rep = MonteCarloReport(10, 0, rho, np.zeros((4, 4)), np.zeros((4, 4)), {"fidelity": (1.0, 0.01), "concurrence": (1.0, 0.02)})
    m = MethodSummary.from_result(res, rep, BELL["phi+"])
    assert m.fidelity == pytest.approx(fidelity_to_pure(rho, BELL["phi+"]))
    assert m.fidelity_sigma == 0.01 and m.concurrence_sigma == 0.02
