"""Pauli algebra, density-matrix checks, Stokes tensors and state metrics.

Basis convention: |H> = (1, 0), |V> = (0, 1), |D> = (|H> + |V>)/sqrt2,
|L> = (|H> + i|V>)/sqrt2. Multi-qubit index order puts qubit 1 (the slowest
waveplate) leftmost in every Kronecker product and every Stokes index.

Density matrices are plain complex ``numpy`` arrays; Stokes tensors are real
arrays of shape ``(4,) * n``.
"""

from functools import reduce
from itertools import product

import numpy as np

from .errors import DegenerateInputError, InvalidStateError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_FLOOR = -1e-10

_PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
_PAULI.setflags(write=False)

_S2 = 1 / np.sqrt(2)
KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S2, _S2], dtype=complex),
    "A": np.array([_S2, -_S2], dtype=complex),
    "L": np.array([_S2, 1j * _S2], dtype=complex),
    "R": np.array([_S2, -1j * _S2], dtype=complex),
}
BELL = {
    "phi+": np.array([_S2, 0, 0, _S2], dtype=complex),
    "phi-": np.array([_S2, 0, 0, -_S2], dtype=complex),
    "psi+": np.array([0, _S2, _S2, 0], dtype=complex),
    "psi-": np.array([0, _S2, -_S2, 0], dtype=complex),
}


def pauli(i):
    """Return sigma_i (0 = identity, 1 = x, 2 = y, 3 = z) as a fresh 2x2 array."""
    if not isinstance(i, (int, np.integer)) or not 0 <= i <= 3:
        raise IndexError(f"Pauli index must be 0..3, got {i!r}")
    return _PAULI[i].copy()


def tensor(*mats):
    """Kronecker product of the arguments, left to right."""
    if not mats:
        raise ValueError("tensor() needs at least one operand")
    return reduce(np.kron, (np.asarray(m) for m in mats))


def pauli_string(indices):
    return tensor(*(_PAULI[i] for i in indices))


def n_qubits_of(dim):
    n = int(round(np.log2(dim)))
    if dim < 2 or 2**n != dim:
        raise InvalidStateError(f"dimension {dim} is not a power of two")
    return n


def named_state(name):
    """State vector for a label such as ``"H"``, ``"HV"``, ``"phi+"`` or ``"psi-"``.

    Product labels are built letter by letter from ``KETS``.
    """
    key = name.strip()
    if key.lower() in BELL:
        return BELL[key.lower()].copy()
    try:
        return tensor(*(KETS[c] for c in key.upper()))
    except KeyError:
        raise ValueError(f"unknown state label {name!r}") from None


def projector(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def check_density(rho, name="rho"):
    """Validate a density matrix and return it as a complex array.

    Raises InvalidStateError on a non-square / non-power-of-two shape,
    Hermiticity error above 1e-12, trace error above 1e-12, or an
    eigenvalue below -1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"{name} must be square, got shape {rho.shape}")
    n_qubits_of(rho.shape[0])
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise InvalidStateError(f"{name} is not Hermitian (max |rho - rho^H| = {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise InvalidStateError(f"{name} trace is {tr.real:.15g}, expected 1")
    lam = np.linalg.eigvalsh(rho).min()
    if lam < EIGEN_FLOOR:
        raise InvalidStateError(f"{name} has negative eigenvalue {lam:.3g}")
    return rho


def is_density(rho):
    try:
        check_density(rho)
    except InvalidStateError:
        return False
    return True


def eigenvalues(rho):
    """Ascending eigenvalues with the [-1e-10, 0) band clamped to zero."""
    lam = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    lam[(lam < 0) & (lam >= EIGEN_FLOOR)] = 0.0
    return lam


def _pauli_strings(n):
    """Array of shape (4**n, 2**n, 2**n) in row-major Stokes index order."""
    return np.array([pauli_string(idx) for idx in product(range(4), repeat=n)])


def stokes_from_density(rho):
    """Generalized Stokes tensor S[i1..in] = Tr[rho (sigma_i1 x ... x sigma_in)]."""
    rho = np.asarray(rho, dtype=complex)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise InvalidStateError(f"input is not Hermitian (max |rho - rho^H| = {herm:.3g})")
    n = n_qubits_of(rho.shape[0])
    # Tr[rho P] = sum_ab rho_ab P_ba
    vals = np.einsum("ab,kba->k", rho, _pauli_strings(n))
    return vals.real.reshape((4,) * n)


def density_from_stokes(stokes):
    """rho = 2**-n sum S[i1..in] sigma_i1 x ... x sigma_in. No physicality check."""
    s = np.asarray(stokes, dtype=float)
    n = s.ndim
    if s.shape != (4,) * n:
        raise ValueError(f"Stokes tensor must have shape (4,)*n, got {s.shape}")
    return np.einsum("k,kab->ab", s.ravel(), _pauli_strings(n)) / 2**n


# -- Cholesky parametrization ------------------------------------------------
#
# Parameter layout for dimension d (d**2 reals): the d real diagonal entries
# of T first, then (real, imag) pairs for the strictly lower entries in
# row-major order.


def n_cholesky_params(dim):
    return dim * dim


def cholesky_matrix(params, dim):
    """Lower-triangular complex T from its real parameter vector."""
    params = np.asarray(params, dtype=float)
    if params.shape != (dim * dim,):
        raise ValueError(f"expected {dim * dim} parameters, got shape {params.shape}")
    t = np.zeros((dim, dim), dtype=complex)
    t[np.diag_indices(dim)] = params[:dim]
    rows, cols = np.tril_indices(dim, -1)
    off = params[dim:].reshape(-1, 2)
    t[rows, cols] = off[:, 0] + 1j * off[:, 1]
    return t


def cholesky_params(t):
    """Inverse of ``cholesky_matrix``; the upper triangle of ``t`` is ignored."""
    t = np.asarray(t, dtype=complex)
    dim = t.shape[0]
    rows, cols = np.tril_indices(dim, -1)
    off = np.column_stack([t[rows, cols].real, t[rows, cols].imag]).ravel()
    return np.concatenate([np.diag(t).real, off])


def density_from_cholesky(params, dim=None):
    """rho = T T^dagger / Tr(T T^dagger) for a parameter vector of length dim**2."""
    params = np.asarray(params, dtype=float)
    if dim is None:
        dim = int(round(np.sqrt(params.size)))
    t = cholesky_matrix(params, dim)
    x = t @ t.conj().T
    tr = np.trace(x).real
    if not tr > 0:
        raise DegenerateInputError("Cholesky parameters are all zero; trace of T T^dagger vanishes")
    rho = x / tr
    return (rho + rho.conj().T) / 2


def cholesky_from_density(rho, floor=1e-6):
    """Parameters whose ``density_from_cholesky`` reproduces ``rho``.

    Eigenvalues are floored at ``floor`` (then renormalized) so the Cholesky
    factorization exists for rank-deficient states.
    """
    rho = np.asarray(rho, dtype=complex)
    lam, vec = np.linalg.eigh((rho + rho.conj().T) / 2)
    lam = np.maximum(lam, floor)
    lam /= lam.sum()
    full = (vec * lam) @ vec.conj().T
    return cholesky_params(np.linalg.cholesky((full + full.conj().T) / 2))


# -- metrics -----------------------------------------------------------------


def fidelity_to_pure(rho, psi):
    """F = <psi|rho|psi> for a normalized pure target."""
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.vdot(psi, psi).real
    if abs(norm - 1) > 1e-12:
        raise ValueError(f"target state is not normalized (<psi|psi> = {norm:.15g})")
    f = np.vdot(psi, np.asarray(rho) @ psi).real
    return float(min(max(f, 0.0), 1.0))


_YY = np.kron(_PAULI[2], _PAULI[2])


def concurrence(rho):
    """Wootters concurrence of a two-qubit state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidStateError(f"concurrence needs a 4x4 density matrix, got {rho.shape}")
    r = rho @ _YY @ rho.conj() @ _YY
    lam = np.sort(np.sqrt(np.clip(np.linalg.eigvals(r).real, 0, None)))[::-1]
    return float(min(max(lam[0] - lam[1] - lam[2] - lam[3], 0.0), 1.0))


def trace_distance(a, b):
    return float(0.5 * np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))).sum())


def werner_state(psi, p):
    """p |psi><psi| + (1 - p) I/d."""
    psi = np.asarray(psi, dtype=complex)
    d = psi.size
    return p * projector(psi) + (1 - p) * np.eye(d) / d


def random_density(dim, rng, rank=None):
    """Ginibre-distributed random state; full rank unless ``rank`` is given."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    x = g @ g.conj().T
    return x / np.trace(x).real


def random_pure(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(dim, rng):
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
