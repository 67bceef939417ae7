"""Density-matrix reconstruction.

* closed-form linear inversion of the harmonic spectrum (1 and 2 qubits),
* a numerically derived inversion through the Stokes design matrix (any n),
* least-squares maximum-likelihood fit over the Cholesky parametrization,
* standard 16-setting projective tomography, used as an independent check.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .errors import DegenerateInputError, FrequencySetError, InvalidStateError
from .forward import measurement_operators, poisson_counts
from .harmonics import (
    HarmonicSpectrum,
    extract_coefficients,
    frequency_set,
    stokes_design_matrix,
)
from .qmat import (
    KETS,
    check_density,
    cholesky_from_density,
    cholesky_matrix,
    cholesky_params,
    density_from_stokes,
    n_qubits_of,
    pauli_string,
    projector,
    tensor,
)

_FSET_1 = frequency_set(1, (1,))
_FSET_2 = frequency_set(2, (1, 5))


# -- closed-form inversion ---------------------------------------------------


def invert_single_qubit(spectrum):
    """2x2 matrix from (A0, A4, B2, B4). Trace is not forced to one."""
    if spectrum.fset != _FSET_1:
        raise FrequencySetError("single-qubit inversion needs the n=1 frequency set")
    a0, a4 = spectrum.a0, spectrum.a[4]
    b2, b4 = spectrum.b[2], spectrum.b[4]
    p = np.empty((2, 2), dtype=complex)
    p[0, 0] = a0 + a4
    p[0, 1] = (b2 + 2j * b4) / 1j
    p[1, 0] = (b2 - 2j * b4) / -1j
    p[1, 1] = a0 - 3 * a4
    return p


def invert_two_qubit(spectrum, herm_tol=1e-9):
    """4x4 matrix from the two-qubit spectrum with multipliers (1, 5).

    The subscript of every coefficient is its harmonic of theta.
    """
    if spectrum.fset != _FSET_2:
        raise FrequencySetError("two-qubit inversion needs the n=2 frequency set with multipliers (1, 5)")
    a = dict(spectrum.a)
    a[0] = spectrum.a0
    b = spectrum.b
    i = 1j
    p = np.empty((4, 4), dtype=complex)
    p[0, 0] = a[0] + a[4] + a[20] + a[16] + a[24]
    p[0, 1] = -i * b[10] - 2 * i * b[14] + 2 * b[20] + 2 * b[16] + 2 * b[24]
    p[0, 2] = -2 * b[16] + 2 * i * b[18] - i * b[2] + 2 * b[24] + 2 * b[4]
    p[0, 3] = (8 * a[12] + 16 * a[16] - 16 * i * a[18] - 16 * a[24] - 16 * i * a[6]) / 4
    p[1, 0] = i * b[10] + 2 * i * b[14] + 2 * b[20] + 2 * b[16] + 2 * b[24]
    p[1, 1] = a[0] + a[4] - 3 * a[20] - 3 * a[16] - 3 * a[24]
    p[1, 2] = (-8 * a[12] + 16 * a[16] - 16 * i * a[18] - 16 * a[24] + 16 * i * a[6]) / 4
    p[1, 3] = 6 * b[16] - 6 * i * b[18] - i * b[2] - 6 * b[24] + 2 * b[4]
    p[2, 0] = -2 * b[16] - 2 * i * b[18] + i * b[2] + 2 * b[24] + 2 * b[4]
    p[2, 1] = (-8 * a[12] + 16 * a[16] + 16 * i * a[18] - 16 * a[24] - 16 * i * a[6]) / 4
    p[2, 2] = a[0] - 3 * a[16] + a[20] - 3 * a[24] - 3 * a[4]
    p[2, 3] = -i * b[10] + 6 * i * b[14] + 2 * b[20] - 6 * b[16] - 6 * b[24]
    p[3, 0] = (8 * a[12] + 16 * a[16] + 16 * i * a[18] - 16 * a[24] + 16 * i * a[6]) / 4
    p[3, 1] = 6 * b[16] + 6 * i * b[18] + i * b[2] - 6 * b[24] + 2 * b[4]
    p[3, 2] = i * b[10] - 6 * i * b[14] + 2 * b[20] - 6 * b[16] - 6 * b[24]
    p[3, 3] = a[0] + 9 * a[16] - 3 * a[20] + 9 * a[24] - 3 * a[4]
    herm = np.max(np.abs(p - p.conj().T))
    if herm > herm_tol:
        raise AssertionError(f"two-qubit inversion produced a non-Hermitian matrix ({herm:.3g})")
    return p


@lru_cache(maxsize=None)
def _design_pinv(fset):
    a = stokes_design_matrix(fset)
    rank = np.linalg.matrix_rank(a, tol=1e-9)
    if rank < a.shape[1]:
        raise FrequencySetError(
            f"multipliers {fset.multipliers} give a design of rank {rank} < {a.shape[1]}; the state is not identifiable"
        )
    return np.linalg.pinv(a)


def invert_numerical(spectrum):
    """Least-squares inversion through the forward model's Stokes design matrix.

    Independent of the closed-form tables, and works for any qubit number
    whose multipliers give a full-rank design.
    """
    stokes = _design_pinv(spectrum.fset) @ spectrum.vector()
    n = spectrum.fset.n_qubits
    return density_from_stokes(stokes.reshape((4,) * n))


def invert_spectrum(spectrum):
    if spectrum.fset == _FSET_1:
        return invert_single_qubit(spectrum)
    if spectrum.fset == _FSET_2:
        return invert_two_qubit(spectrum)
    return invert_numerical(spectrum)


def project_physical(raw):
    """Nearest-style physical state: Hermitize, clip negative eigenvalues, renormalize."""
    raw = np.asarray(raw, dtype=complex)
    herm = np.max(np.abs(raw - raw.conj().T))
    if herm >= 0.5:
        raise InvalidStateError(f"matrix is far from Hermitian ({herm:.3g})")
    h = (raw + raw.conj().T) / 2
    lam, vec = np.linalg.eigh(h)
    lam = np.clip(lam, 0.0, None)
    if not lam.sum() > 0:
        raise DegenerateInputError("matrix has no positive spectral weight")
    lam /= lam.sum()
    rho = (vec * lam) @ vec.conj().T
    return (rho + rho.conj().T) / 2


# -- results -----------------------------------------------------------------


@dataclass(frozen=True)
class MleConfig:
    max_iter: int = 2000
    tol: float = 1e-10
    fd_step: float = 1e-6
    gradient: str = "analytic"  # or "fd": central differences with fd_step
    init: str = "linear"  # or "mixed"
    fit_scale: bool | None = None  # None: on for counts, off for probabilities
    eigen_floor: float = 1e-6

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.max_iter > 0:
            raise ValueError("max_iter must be positive")
        if self.gradient not in ("analytic", "fd"):
            raise ValueError(f"gradient must be 'analytic' or 'fd', got {self.gradient!r}")
        if self.init not in ("linear", "mixed"):
            raise ValueError(f"init must be 'linear' or 'mixed', got {self.init!r}")


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    rho: np.ndarray
    method: str
    cost: float = 0.0
    iterations: int = 0
    converged: bool = True
    scale: float = 1.0
    initial_cost: float | None = None
    cost_history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        check_density(self.rho)


# -- linear reconstruction ---------------------------------------------------


def spectrum_of(scan):
    return extract_coefficients(scan, frequency_set(scan.n_qubits, scan.multipliers), allow_counts=True)


def linear_inversion(scan):
    """Raw (possibly unphysical) unit-trace matrix and the normalization used.

    For counts the inverted matrix is divided by its own trace, which is the
    estimated intensity; for probabilities the normalization is 1.
    """
    if not np.any(scan.values > 0):
        raise DegenerateInputError("scan is identically zero")
    raw = invert_spectrum(spectrum_of(scan))
    if scan.value_kind == "probability":
        return raw, 1.0
    norm = float(np.trace(raw).real)
    if not norm > 0:
        raise DegenerateInputError("inverted counts have non-positive trace")
    return raw / norm, norm


def normalize_counts(scan):
    """Probability scan p_k = c_k / s with s the linear-inversion intensity."""
    if scan.value_kind == "probability":
        return scan, 1.0
    _, norm = linear_inversion(scan)
    return scan.with_values(scan.values / norm, "probability"), norm


def linear_fit(scan):
    raw, norm = linear_inversion(scan)
    rho = project_physical(raw)
    return ReconstructionResult(rho, "linear", scale=norm)


# -- maximum likelihood ------------------------------------------------------


@lru_cache(maxsize=64)
def _scan_operators(theta_bytes, waveplates):
    theta = np.frombuffer(theta_bytes, dtype=float)
    ops = np.ascontiguousarray(measurement_operators(theta, waveplates))
    ops.setflags(write=False)
    return ops


def scan_operators(scan):
    return _scan_operators(scan.theta.tobytes(), scan.waveplates)


def _cost_and_grad(params, ops, y, fit_scale, dim):
    t = cholesky_matrix(params, dim)
    cost, grad, s, _ = _kernels.lsq_cost_grad(t, ops, y, fit_scale)
    return cost, cholesky_params(grad), s


def _fd_grad(params, ops, y, fit_scale, dim, step):
    g = np.empty_like(params)
    for j in range(params.size):
        e = np.zeros_like(params)
        e[j] = step
        fp = _cost_and_grad(params + e, ops, y, fit_scale, dim)[0]
        fm = _cost_and_grad(params - e, ops, y, fit_scale, dim)[0]
        g[j] = (fp - fm) / (2 * step)
    return g


def least_squares_fit(ops, y, rho0, config, fit_scale, method):
    """Minimize sum_k (y_k - s Tr[rho M_k])^2 over rho = T T^dagger / Tr.

    ``s`` is profiled out in closed form when ``fit_scale`` is set and is 1
    otherwise. L-BFGS-B drives the search; the gradient is analytic unless
    the configuration asks for central differences.
    """
    ops = np.ascontiguousarray(ops, dtype=complex)
    y = np.ascontiguousarray(y, dtype=float)
    dim = ops.shape[1]
    x0 = cholesky_from_density(rho0, config.eigen_floor)

    if config.gradient == "analytic":

        def fun(x):
            c, g, _ = _cost_and_grad(x, ops, y, fit_scale, dim)
            return c, g

    else:

        def fun(x):
            c = _cost_and_grad(x, ops, y, fit_scale, dim)[0]
            return c, _fd_grad(x, ops, y, fit_scale, dim, config.fd_step)

    c0 = fun(x0)[0]
    history = [c0]
    # the tolerance is an absolute change in units of the starting cost
    unit = c0 if 0 < c0 < 1 else 1.0

    def scaled(x):
        c, g = fun(x)
        return c / unit, g / unit

    def record(xk):
        history.append(_cost_and_grad(xk, ops, y, fit_scale, dim)[0])

    res = minimize(
        scaled,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": config.max_iter, "ftol": config.tol, "gtol": 1e-14, "maxcor": 20},
    )
    x = res.x
    cost, _, s = _cost_and_grad(x, ops, y, fit_scale, dim)
    if cost > c0:
        x, cost = x0, c0
        s = _cost_and_grad(x0, ops, y, fit_scale, dim)[2]
    t = cholesky_matrix(x, dim)
    rho = t @ t.conj().T
    rho = rho / np.trace(rho).real
    rho = (rho + rho.conj().T) / 2
    return ReconstructionResult(
        rho,
        method,
        cost=float(cost),
        iterations=int(res.nit),
        converged=bool(res.status != 1 and res.nit < config.max_iter),
        scale=float(s),
        initial_cost=float(c0),
        cost_history=tuple(history),
    )


def _initial_state(raw, dim, config):
    if config.init == "mixed" or raw is None:
        return np.eye(dim) / dim
    try:
        return project_physical(raw)
    except (DegenerateInputError, InvalidStateError):
        return np.eye(dim) / dim


def mle_fit(scan, config=None, waveplates=None):
    """Physical state minimizing the squared residual to the scan.

    Counts are first divided by the linear-inversion intensity, so ``cost``
    is in probability units for both kinds of input; ``scale`` is the total
    fitted intensity (1 for probability scans).
    """
    config = config or MleConfig()
    if waveplates is not None and tuple(waveplates) != scan.waveplates:
        scan = type(scan)(scan.theta, scan.values, scan.value_kind, tuple(waveplates), scan.time_ps)
    if not np.any(scan.values > 0):
        raise DegenerateInputError("scan is identically zero")
    fit_scale = config.fit_scale
    if fit_scale is None:
        fit_scale = scan.value_kind == "counts"
    if scan.value_kind == "counts" and not fit_scale:
        raise ValueError("counts input needs the intensity-scale parameter")
    try:
        raw, norm = linear_inversion(scan)
    except DegenerateInputError:
        raw, norm = None, float(scan.values.sum()) / len(scan) * 2**scan.n_qubits
    dim = 2**scan.n_qubits
    y = scan.values / norm
    res = least_squares_fit(scan_operators(scan), y, _initial_state(raw, dim, config), config, fit_scale, "mle")
    return _with_scale(res, res.scale * norm)


def _with_scale(res, scale):
    return ReconstructionResult(
        res.rho, res.method, res.cost, res.iterations, res.converged, scale, res.initial_cost, res.cost_history
    )


def fit_signal(result, scan):
    """Fitted detection signal (in the scan's units) for a reconstruction."""
    p = np.einsum("ab,kba->k", result.rho, scan_operators(scan)).real
    return p * (result.scale if scan.value_kind == "counts" else 1.0)


# -- projective tomography ---------------------------------------------------

PROJECTIVE_BASES = "HVDL"


@dataclass(frozen=True, eq=False)
class ProjectiveData:
    """Counts or probabilities for the product projectors {H,V,D,L}^n."""

    labels: tuple
    values: np.ndarray
    value_kind: str = "probability"
    time_ps: float | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.labels),):
            raise ValueError("one value per projector label is required")
        if np.any(values < 0):
            raise ValueError("projective values must be non-negative")
        if self.value_kind not in ("counts", "probability"):
            raise ValueError(f"value_kind must be 'counts' or 'probability', got {self.value_kind!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_qubits(self):
        return len(self.labels[0])

    def with_values(self, values, value_kind=None):
        return ProjectiveData(self.labels, values, value_kind or self.value_kind, self.time_ps)


def projective_labels(n_qubits=2):
    return tuple("".join(c) for c in product(PROJECTIVE_BASES, repeat=n_qubits))


def projective_operators(labels):
    return np.array([projector(tensor(*(KETS[c] for c in lab))) for lab in labels])


def simulate_projective(rho, intensity=None, seed=None):
    """Projector probabilities, or Poisson counts at ``intensity`` per setting."""
    rho = check_density(rho)
    labels = projective_labels(n_qubits_of(rho.shape[0]))
    p = np.clip(np.einsum("ab,kba->k", rho, projective_operators(labels)).real, 0, 1)
    if intensity is None:
        return ProjectiveData(labels, p, "probability")
    return ProjectiveData(labels, poisson_counts(p, intensity, seed), "counts")


def _operator_linear_inversion(ops, y):
    n = n_qubits_of(ops.shape[1])
    paulis = [pauli_string(idx) for idx in product(range(4), repeat=n)]
    a = np.array([[np.trace(m @ p).real for p in paulis] for m in ops]) / 2**n
    stokes, *_ = np.linalg.lstsq(a, y, rcond=None)
    return density_from_stokes(stokes.reshape((4,) * n))


def reconstruct_projective(data, config=None):
    config = config or MleConfig()
    if not np.any(data.values > 0):
        raise DegenerateInputError("projective data are identically zero")
    ops = projective_operators(data.labels)
    fit_scale = config.fit_scale
    if fit_scale is None:
        fit_scale = data.value_kind == "counts"
    raw = _operator_linear_inversion(ops, data.values)
    norm = float(np.trace(raw).real) if data.value_kind == "counts" else 1.0
    if not norm > 0:
        raw, norm = None, float(data.values.sum()) / 4 ** data.n_qubits * 2**data.n_qubits
    else:
        raw = raw / norm
    dim = 2**data.n_qubits
    res = least_squares_fit(ops, data.values / norm, _initial_state(raw, dim, config), config, fit_scale, "projective")
    return _with_scale(res, res.scale * norm)


def projective_tomography(rho_true, intensity=None, seed=None, config=None):
    """Simulate 16-setting projective data for ``rho_true`` and reconstruct it."""
    rho_true = check_density(rho_true)
    if rho_true.shape != (4, 4):
        raise InvalidStateError("projective tomography oracle is defined for two qubits")
    return reconstruct_projective(simulate_projective(rho_true, intensity, seed), config)


def reconstruct(data, method="mle", config=None):
    """Dispatch on data type and method name."""
    if isinstance(data, ProjectiveData):
        return reconstruct_projective(data, config)
    if method == "linear":
        return linear_fit(data)
    if method == "mle":
        return mle_fit(data, config)
    raise ValueError(f"unknown method {method!r}")


__all__ = [
    "HarmonicSpectrum",
    "MleConfig",
    "ProjectiveData",
    "ReconstructionResult",
    "invert_numerical",
    "invert_single_qubit",
    "invert_two_qubit",
    "linear_fit",
    "linear_inversion",
    "mle_fit",
    "project_physical",
    "projective_tomography",
    "reconstruct",
    "reconstruct_projective",
    "simulate_projective",
]
