"""Frequency sets of the rotating-waveplate signal and harmonic projection.

Harmonics are integers in units of the slow-waveplate mechanical angle theta,
so a harmonic ``f`` means ``cos(f theta)`` / ``sin(f theta)``. Every harmonic
is even, which makes the signal pi-periodic in theta.
"""

from collections import defaultdict
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import _kernels
from .errors import FrequencySetError, NyquistError
from .forward import angle_grid, check_multipliers, default_waveplates, signal_stokes_route


@dataclass(frozen=True)
class FrequencySet:
    n_qubits: int
    multipliers: tuple
    cos: tuple
    sin: tuple

    @property
    def max_harmonic(self):
        return max(self.cos + self.sin)

    @property
    def nyquist_minimum(self):
        return 2 * self.max_harmonic + 1

    @property
    def size(self):
        """Number of real coefficients, DC included."""
        return 1 + len(self.cos) + len(self.sin)


def _mode_terms(r):
    # chi_0 = 1, chi_1 ~ sin 4t, chi_2 ~ sin 2t, chi_3 ~ 1 + cos 4t (t = r theta)
    return [("c", 0), ("c", 4 * r), ("s", 2 * r), ("s", 4 * r)]


def frequency_set(n_qubits, multipliers=None):
    """Harmonic content of the n-qubit signal, built from the product expansion.

    A product of per-mode terms expands into cos/sin of every signed sum of
    the factor frequencies; an even number of sine factors gives a cosine.
    """
    if multipliers is None:
        multipliers = [5**m for m in range(n_qubits)]
    multipliers = tuple(int(r) for r in multipliers)
    if len(multipliers) != n_qubits:
        raise ValueError(f"need {n_qubits} multipliers, got {len(multipliers)}")
    check_multipliers(multipliers)
    cos, sin = set(), set()
    for terms in product(*(_mode_terms(r) for r in multipliers)):
        n_sin = sum(kind == "s" for kind, _ in terms)
        freqs = [f for _, f in terms]
        for signs in product((1, -1), repeat=n_qubits):
            f = abs(sum(s * x for s, x in zip(signs, freqs)))
            if n_sin % 2 == 0:
                cos.add(f)
            elif f:
                sin.add(f)
    cos.discard(0)
    return FrequencySet(n_qubits, multipliers, tuple(sorted(cos)), tuple(sorted(sin)))


def harmonic_collisions(multipliers):
    """Signed combined harmonics produced by more than one index combination.

    Each mode contributes one of {0, +-2r, +-4r}; returns ``{sum: combos}``
    for every sum reached by two or more distinct combinations.
    """
    check_multipliers(multipliers)
    hits = defaultdict(list)
    for combo in product(*([0, 2 * r, -2 * r, 4 * r, -4 * r] for r in multipliers)):
        hits[sum(combo)].append(combo)
    return {s: c for s, c in sorted(hits.items()) if len(c) > 1}


@dataclass(frozen=True, eq=False)
class HarmonicSpectrum:
    fset: FrequencySet
    a0: float
    a: dict
    b: dict

    def __post_init__(self):
        if tuple(sorted(self.a)) != self.fset.cos or tuple(sorted(self.b)) != self.fset.sin:
            raise FrequencySetError("coefficient keys do not match the frequency set")

    def vector(self):
        """[a0, a_f for f in cos, b_f for f in sin]."""
        return np.array([self.a0] + [self.a[f] for f in self.fset.cos] + [self.b[f] for f in self.fset.sin])

    @classmethod
    def from_vector(cls, fset, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (fset.size,):
            raise ValueError(f"expected {fset.size} coefficients, got {vec.shape}")
        nc = len(fset.cos)
        a = dict(zip(fset.cos, vec[1 : 1 + nc].tolist()))
        b = dict(zip(fset.sin, vec[1 + nc :].tolist()))
        return cls(fset, float(vec[0]), a, b)

    @classmethod
    def constant(cls, fset, c):
        return cls(fset, float(c), dict.fromkeys(fset.cos, 0.0), dict.fromkeys(fset.sin, 0.0))

    def scaled(self, factor):
        return HarmonicSpectrum.from_vector(self.fset, self.vector() * factor)


def extract_coefficients(scan, fset=None, allow_counts=False):
    """Project an evenly spaced scan onto DC, cosine and sine harmonics.

    Exact for signals band-limited to ``fset`` on a grid that meets its
    Nyquist minimum. Counts scans are refused unless ``allow_counts``.
    """
    if fset is None:
        fset = frequency_set(scan.n_qubits, scan.multipliers)
    if scan.value_kind != "probability" and not allow_counts:
        raise ValueError("normalize counts to probabilities before extracting coefficients")
    if fset.n_qubits != scan.n_qubits or fset.multipliers != scan.multipliers:
        raise FrequencySetError("frequency set does not match the scan's waveplates")
    if len(scan) < fset.nyquist_minimum:
        raise NyquistError(f"{len(scan)} samples; harmonic {fset.max_harmonic} needs at least {fset.nyquist_minimum}")
    theta = np.ascontiguousarray(scan.theta)
    values = np.ascontiguousarray(scan.values)
    a_c, _ = _kernels.harmonic_projection(values, theta, np.array(fset.cos, dtype=float))
    _, b_s = _kernels.harmonic_projection(values, theta, np.array(fset.sin, dtype=float))
    a = dict(zip(fset.cos, a_c.tolist()))
    b = dict(zip(fset.sin, b_s.tolist()))
    return HarmonicSpectrum(fset, float(values.mean()), a, b)


def evaluate_series(spectrum, theta):
    """a0 + sum_f a_f cos(f theta) + b_f sin(f theta); vectorized over theta."""
    theta = np.asarray(theta, dtype=float)
    out = np.full(theta.shape, spectrum.a0)
    for f, c in spectrum.a.items():
        out = out + c * np.cos(f * theta)
    for f, c in spectrum.b.items():
        out = out + c * np.sin(f * theta)
    return out


def stokes_design_matrix(fset, waveplates=None):
    """Linear map from the flattened Stokes tensor to the spectrum vector.

    Column j is the spectrum of the signal produced by the j-th Pauli string
    alone, computed through the forward model on a Nyquist-sufficient grid.
    """
    n = fset.n_qubits
    if waveplates is None:
        waveplates = default_waveplates(n, fset.multipliers)
    theta = angle_grid(max(fset.nyquist_minimum, 4 * fset.max_harmonic + 4))
    freqs_c = np.array(fset.cos, dtype=float)
    freqs_s = np.array(fset.sin, dtype=float)
    cols = []
    for j in range(4**n):
        s = np.zeros(4**n)
        s[j] = 1.0
        p = signal_stokes_route(s, theta, waveplates)
        a_c, _ = _kernels.harmonic_projection(p, theta, freqs_c)
        _, b_s = _kernels.harmonic_projection(p, theta, freqs_s)
        cols.append(np.concatenate([[p.mean()], a_c, b_s]))
    return np.array(cols).T


def design_rank(multipliers, tol=1e-9):
    """Rank of the Stokes -> spectrum map; 4**n means every parameter is recoverable."""
    fset = frequency_set(len(multipliers), multipliers)
    return int(np.linalg.matrix_rank(stokes_design_matrix(fset), tol=tol))
