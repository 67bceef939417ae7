"""Fidelity time series, fine-structure-splitting fits and method comparison."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import ConvergenceError, FTQSTError
from .forward import HBAR_UEV_NS
from .qmat import concurrence, fidelity_to_pure

FSS_GRID_UEV = (0.1, 20.0)


@dataclass(frozen=True, eq=False)
class TimeBinSeries:
    """Per-bin fidelities; ``t_ps`` strictly increasing."""

    t_ps: np.ndarray
    fidelity: np.ndarray
    fidelity_sigma: np.ndarray | None = None
    rhos: tuple | None = None

    def __post_init__(self):
        t = np.array(self.t_ps, dtype=float)
        f = np.array(self.fidelity, dtype=float)
        s = np.zeros_like(f) if self.fidelity_sigma is None else np.array(self.fidelity_sigma, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or s.shape != f.shape:
            raise ValueError("t_ps, fidelity and fidelity_sigma must be 1-D and of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time bins must be strictly increasing")
        if np.any(f < -1e-12) or np.any(f > 1 + 1e-12):
            raise ValueError("fidelities must lie in [0, 1]")
        if np.any(s < 0):
            raise ValueError("fidelity uncertainties must be non-negative")
        object.__setattr__(self, "t_ps", t)
        object.__setattr__(self, "fidelity", f)
        object.__setattr__(self, "fidelity_sigma", s)

    @classmethod
    def from_states(cls, t_ps, rhos, target, sigmas=None):
        fid = [fidelity_to_pure(r, target) for r in rhos]
        return cls(t_ps, fid, sigmas, tuple(rhos))

    def shifted(self, dt_ps):
        return TimeBinSeries(self.t_ps + dt_ps, self.fidelity, self.fidelity_sigma, self.rhos)


@dataclass(frozen=True)
class FssFitResult:
    fss: float  # ueV
    amplitude: float
    offset: float
    phase0: float
    rms: float
    fss_err: float = 0.0
    amplitude_err: float = 0.0
    offset_err: float = 0.0
    phase0_err: float = 0.0
    degenerate: bool = False

    def model(self, t_ps):
        return fss_model(np.asarray(t_ps, dtype=float), self.offset, self.amplitude, self.fss, self.phase0)


def fss_model(t_ps, offset, amplitude, fss, phase0):
    """offset + amplitude * cos(FSS t / hbar + phase0), t in ps, FSS in ueV."""
    return offset + amplitude * np.cos(fss * (t_ps * 1e-3) / HBAR_UEV_NS + phase0)


def _periodogram(t_ns, f, fss_grid):
    """Residual of the best linear fit [1, cos, sin] at each trial splitting."""
    resid = np.empty(fss_grid.size)
    for i, fss in enumerate(fss_grid):
        w = fss / HBAR_UEV_NS
        basis = np.column_stack([np.ones_like(t_ns), np.cos(w * t_ns), np.sin(w * t_ns)])
        coef, *_ = np.linalg.lstsq(basis, f, rcond=None)
        r = f - basis @ coef
        resid[i] = r @ r
    return resid


def fss_fit(series, grid=FSS_GRID_UEV, grid_points=2000, degenerate_tol=1e-6):
    """Fit a sinusoid to fidelity vs time and return the splitting in ueV.

    The frequency is seeded from the best point of a least-squares
    periodogram over ``grid``; the four parameters are then refined jointly.
    Standard errors come from the Jacobian at the optimum. A flat series is
    reported as FSS 0 with ``degenerate`` set.
    """
    t = series.t_ps
    f = series.fidelity
    if t.size < 6:
        raise FTQSTError(f"FSS fit needs at least 6 time bins, got {t.size}")
    if np.ptp(f) < degenerate_tol:
        rms = float(np.sqrt(np.mean((f - f.mean()) ** 2)))
        return FssFitResult(0.0, 0.0, float(f.mean()), 0.0, rms, degenerate=True)

    t_ns = (t - t[0]) * 1e-3
    fss_grid = np.linspace(grid[0], grid[1], grid_points)
    resid = _periodogram(t_ns, f, fss_grid)
    fss0 = fss_grid[np.argmin(resid)]
    w0 = fss0 / HBAR_UEV_NS
    basis = np.column_stack([np.ones_like(t_ns), np.cos(w0 * t_ns), np.sin(w0 * t_ns)])
    (c0, ca, cb), *_ = np.linalg.lstsq(basis, f, rcond=None)
    amp0 = np.hypot(ca, cb)
    ph0 = np.arctan2(-cb, ca)

    def residual(x):
        off, amp, fss, ph = x
        return off + amp * np.cos(fss * t_ns / HBAR_UEV_NS + ph) - f

    sol = least_squares(residual, [c0, amp0, fss0, ph0], xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000)
    if not sol.success:
        raise ConvergenceError(f"FSS fit did not converge: {sol.message}")
    off, amp, fss, ph = sol.x
    if amp < 0:
        amp, ph = -amp, ph + np.pi
    if fss < 0:
        fss, ph = -fss, -ph
    # refer the phase back to the original time origin
    ph = ph - fss * (t[0] * 1e-3) / HBAR_UEV_NS
    ph = float(np.angle(np.exp(1j * ph)))

    if amp < degenerate_tol:
        rms = float(np.sqrt(np.mean((f - f.mean()) ** 2)))
        return FssFitResult(0.0, 0.0, float(f.mean()), 0.0, rms, degenerate=True)
    period_ps = 2 * np.pi * HBAR_UEV_NS / fss * 1e3
    if np.ptp(t) < period_ps / 2:
        raise FTQSTError(f"time span {np.ptp(t):.1f} ps covers less than half a period ({period_ps / 2:.1f} ps)")

    r = sol.fun
    dof = max(t.size - 4, 1)
    rss = float(r @ r)
    jac = sol.jac
    try:
        cov = np.linalg.inv(jac.T @ jac) * rss / dof
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(4, np.inf)
    return FssFitResult(
        fss=float(fss),
        amplitude=float(amp),
        offset=float(off),
        phase0=ph,
        rms=float(np.sqrt(rss / t.size)),
        fss_err=float(err[2]),
        amplitude_err=float(err[1]),
        offset_err=float(err[0]),
        phase0_err=float(err[3]),
    )


# -- method comparison -------------------------------------------------------


@dataclass(frozen=True)
class MethodSummary:
    fidelity: float
    fidelity_sigma: float
    concurrence: float | None = None
    concurrence_sigma: float | None = None

    @classmethod
    def from_result(cls, result, report, target):
        """Point estimates from ``result``, uncertainties from a Monte Carlo report."""
        f = fidelity_to_pure(result.rho, target)
        fs = report.metrics["fidelity"][1]
        if result.rho.shape == (4, 4):
            return cls(f, fs, concurrence(result.rho), report.metrics["concurrence"][1])
        return cls(f, fs)


@dataclass(frozen=True)
class MetricComparison:
    delta: float
    combined_sigma: float
    agree: bool


def _compare(x, sx, y, sy, k):
    delta = abs(x - y)
    comb = float(np.hypot(sx, sy))
    return MetricComparison(float(delta), comb, bool(delta <= k * comb))


def compare_methods(a, b, k=2.0):
    """|difference|, combined sigma and agreement at ``k`` sigma, per metric."""
    out = {"fidelity": _compare(a.fidelity, a.fidelity_sigma, b.fidelity, b.fidelity_sigma, k)}
    if a.concurrence is not None and b.concurrence is not None:
        out["concurrence"] = _compare(a.concurrence, a.concurrence_sigma, b.concurrence, b.concurrence_sigma, k)
    return out
