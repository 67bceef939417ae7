"""Rotating-waveplate polarimeter model.

Each qubit mode m passes a waveplate of retardance beta_m rotated to the
mechanical angle ``multiplier_m * theta + offset_m`` and then a fixed
horizontal polarizer. The independent variable throughout is the mechanical
angle ``theta`` of the slowest waveplate, sampled on [0, pi).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import InvalidStateError, NyquistError
from .qmat import (
    _PAULI,
    check_density,
    named_state,
    n_qubits_of,
    projector,
    stokes_from_density,
    tensor,
    werner_state,
)

QWP = np.pi / 2
HBAR_UEV_NS = 0.6582119569
INTENSITY_PRESET = 900.0  # 30 ms x 30 kcps per sample


@dataclass(frozen=True)
class WaveplateConfig:
    retardance: float = QWP
    multiplier: int = 1
    offset: float = 0.0

    def __post_init__(self):
        if not 0 < self.retardance < 2 * np.pi:
            raise ValueError(f"retardance must lie in (0, 2pi), got {self.retardance}")
        if int(self.multiplier) != self.multiplier or self.multiplier < 1:
            raise ValueError(f"multiplier must be a positive integer, got {self.multiplier}")
        object.__setattr__(self, "multiplier", int(self.multiplier))


def default_waveplates(n_qubits, multipliers=None, retardance=QWP):
    """Quarter waveplates with multipliers 1, 5, 25, ... unless given."""
    if multipliers is None:
        multipliers = [5**m for m in range(n_qubits)]
    if len(multipliers) != n_qubits:
        raise ValueError(f"need {n_qubits} multipliers, got {len(multipliers)}")
    check_multipliers(multipliers)
    return tuple(WaveplateConfig(retardance, r) for r in multipliers)


def check_multipliers(multipliers):
    m = list(multipliers)
    if any(int(r) != r or r < 1 for r in m):
        raise ValueError(f"multipliers must be positive integers, got {m}")
    if any(b <= a for a, b in zip(m, m[1:])):
        raise ValueError(f"multipliers must be strictly increasing, got {m}")


def max_harmonic(multipliers):
    """Largest harmonic of theta in the signal: 4 * sum of multipliers."""
    return 4 * int(sum(multipliers))


def nyquist_minimum(multipliers):
    return 2 * max_harmonic(multipliers) + 1


def angle_grid(n_points):
    """n_points evenly spaced angles covering [0, pi)."""
    return np.pi * np.arange(n_points) / n_points


@dataclass(frozen=True, eq=False)
class AngleScan:
    """Samples of a full sweep of the slowest waveplate.

    ``values`` are either detected counts or probabilities (``value_kind``).
    The grid must be evenly spaced with step pi/N over [0, pi) and dense
    enough for the largest harmonic the waveplates generate.
    """

    theta: np.ndarray
    values: np.ndarray
    value_kind: str = "probability"
    waveplates: tuple = field(default=(WaveplateConfig(),))
    time_ps: float | None = None

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        values = np.array(self.values, dtype=float)
        if theta.ndim != 1 or theta.shape != values.shape:
            raise ValueError("theta and values must be 1-D arrays of equal length")
        if self.value_kind not in ("counts", "probability"):
            raise ValueError(f"value_kind must be 'counts' or 'probability', got {self.value_kind!r}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("scan values must be finite and non-negative")
        wps = tuple(self.waveplates)
        check_multipliers([w.multiplier for w in wps])
        check_grid(theta, [w.multiplier for w in wps])
        theta.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "waveplates", wps)

    @property
    def n_qubits(self):
        return len(self.waveplates)

    @property
    def multipliers(self):
        return tuple(w.multiplier for w in self.waveplates)

    def __len__(self):
        return self.theta.size

    def with_values(self, values, value_kind=None):
        return replace(self, values=values, value_kind=value_kind or self.value_kind)


def check_grid(theta, multipliers, tol=1e-9):
    n = theta.size
    need = nyquist_minimum(multipliers)
    if n < need:
        raise NyquistError(f"{n} samples cannot resolve harmonic {max_harmonic(multipliers)}; need at least {need}")
    step = np.pi / n
    if np.max(np.abs(np.diff(theta) - step)) > tol:
        raise NyquistError("angles must be evenly spaced with step pi/N over [0, pi)")
    if not -tol <= theta[0] < step - tol:
        raise NyquistError(f"scan must start within the first step of 0, got theta[0] = {theta[0]}")


# -- optics ------------------------------------------------------------------


def waveplate_unitary(theta, beta=QWP):
    """U = cos(b/2) I - i sin(b/2) [cos(2 theta) sigma_z + sin(2 theta) sigma_x].

    The mechanical angle doubles on the Bloch sphere; the rotation axis
    sweeps the x-z great circle.
    """
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    axis = np.cos(2 * theta) * _PAULI[3] + np.sin(2 * theta) * _PAULI[1]
    return c * _PAULI[0] - 1j * s * axis


def measurement_operator(theta, beta=QWP):
    """M = U^dagger |H><H| U, the projector detected behind the polarizer."""
    u = waveplate_unitary(theta, beta)
    row = u[0]  # <H|U
    return np.outer(row.conj(), row)


def chi(i, theta, beta=QWP):
    """chi_i = Tr[sigma_i M(theta)]. Vectorized over ``theta``."""
    return chi_table(theta, beta)[..., i]


def chi_table(theta, beta=QWP):
    """chi_i(theta) for i = 0..3, shape ``theta.shape + (4,)``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    # first row of U
    u0 = c - 1j * s * c2
    u1 = -1j * s * s2
    # chi_i = <H|U sigma_i U^dagger|H> = u sigma_i u^dagger
    out = np.empty(theta.shape + (4,))
    out[..., 0] = np.abs(u0) ** 2 + np.abs(u1) ** 2
    cross = u0 * np.conj(u1)
    out[..., 1] = 2 * cross.real
    out[..., 2] = 2 * cross.imag
    out[..., 3] = np.abs(u0) ** 2 - np.abs(u1) ** 2
    return out


def mode_angles(theta, waveplates):
    theta = np.asarray(theta, dtype=float)
    return [w.multiplier * theta + w.offset for w in waveplates]


def mode_chi(theta, waveplates):
    """Stacked chi tables, shape (n_modes, N, 4)."""
    return np.stack([chi_table(a, w.retardance) for a, w in zip(mode_angles(theta, waveplates), waveplates)])


def measurement_operators(theta, waveplates):
    """M_1(theta) x ... x M_n(theta) for each angle, shape (N, d, d)."""
    per_mode = []
    for a, w in zip(mode_angles(theta, waveplates), waveplates):
        per_mode.append(np.array([measurement_operator(x, w.retardance) for x in a]))
    ops = per_mode[0]
    for m in per_mode[1:]:
        ops = np.einsum("kab,kcd->kacbd", ops, m).reshape(ops.shape[0], ops.shape[1] * m.shape[1], -1)
    return ops


def signal_stokes_route(stokes, theta, waveplates):
    """p = 2**-n sum S[idx] prod_m chi_{m, idx_m}."""
    stokes = np.ascontiguousarray(np.asarray(stokes, dtype=float).ravel())
    chi_m = np.ascontiguousarray(mode_chi(theta, waveplates))
    if stokes.size != 4 ** chi_m.shape[0]:
        raise ValueError("Stokes tensor size does not match the number of waveplates")
    return _kernels.stokes_signal(stokes, chi_m)


def signal_operator_route(rho, theta, waveplates):
    """p = Tr[rho (M_1 x ... x M_n)]."""
    ops = measurement_operators(theta, waveplates)
    return np.einsum("ab,kba->k", np.asarray(rho, dtype=complex), ops).real


def probability_signal(rho, waveplates, theta, self_check=True, tol=1e-12):
    """Detection probability at each angle.

    Evaluated through the Stokes/chi product; with ``self_check`` the direct
    operator trace is computed as well and the two must agree within ``tol``.
    """
    rho = check_density(rho)
    if rho.shape[0] != 2 ** len(waveplates):
        raise InvalidStateError(f"state dimension {rho.shape[0]} does not match {len(waveplates)} waveplates")
    p = signal_stokes_route(stokes_from_density(rho), theta, waveplates)
    if self_check:
        q = signal_operator_route(rho, theta, waveplates)
        err = np.max(np.abs(p - q))
        if err > tol:
            raise AssertionError(f"signal evaluation routes disagree by {err:.3g}")
    return np.clip(p, 0.0, 1.0)


def simulate_scan(rho, n_points, waveplates=None, time_ps=None):
    """Noiseless probability scan of ``rho`` on the standard grid."""
    rho = check_density(rho)
    if waveplates is None:
        waveplates = default_waveplates(n_qubits_of(rho.shape[0]))
    theta = angle_grid(n_points)
    check_grid(theta, [w.multiplier for w in waveplates])
    p = probability_signal(rho, waveplates, theta)
    return AngleScan(theta, p, "probability", tuple(waveplates), time_ps)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def poisson_counts(probabilities, mean_intensity, seed=None):
    if not mean_intensity > 0:
        raise ValueError(f"mean_intensity must be positive, got {mean_intensity}")
    lam = mean_intensity * np.clip(np.asarray(probabilities, dtype=float), 0, None)
    return _rng(seed).poisson(lam).astype(float)


def sample_counts(scan, mean_intensity=INTENSITY_PRESET, seed=None):
    """Poisson(mean_intensity * p) counts for a probability scan."""
    if scan.value_kind != "probability":
        raise ValueError("sample_counts needs a probability scan")
    return scan.with_values(poisson_counts(scan.values, mean_intensity, seed), "counts")


# -- sources -----------------------------------------------------------------


def qd_phase(t_ps, fss_uev):
    return (np.asarray(t_ps, dtype=float) * 1e-3) * fss_uev / HBAR_UEV_NS


def qd_period_ps(fss_uev):
    return 2 * np.pi * HBAR_UEV_NS / fss_uev * 1e3


def qd_state(t_ps, fss_uev):
    """(|HH> + exp(i phi(t))|VV>)/sqrt2 with phi = t * FSS / hbar."""
    phi = qd_phase(t_ps, fss_uev)
    psi = np.array([1, 0, 0, np.exp(1j * phi)], dtype=complex) / np.sqrt(2)
    return projector(psi)


def virtual_waveplate(theta, phi):
    """Quarter waveplate at ``theta`` followed by the retarder diag(1, e^{i phi})."""
    return np.diag([1, np.exp(1j * phi)]) @ waveplate_unitary(theta, QWP)


def apply_virtual_waveplate(rho, corrections):
    """Conjugate ``rho`` by the local correction V_1 x ... x V_n.

    ``corrections`` holds one (theta, phi) pair per qubit.
    """
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of(rho.shape[0])
    corrections = list(corrections)
    if len(corrections) != n:
        raise ValueError(f"need {n} (theta, phi) pairs, got {len(corrections)}")
    v = tensor(*(virtual_waveplate(t, p) for t, p in corrections))
    out = v @ rho @ v.conj().T
    return (out + out.conj().T) / 2


@dataclass(frozen=True)
class SourceModel:
    """Source of the measured state.

    kind: ``pure-state`` (``state`` label or vector), ``spdc`` (Werner-like
    mixture around ``state``, default psi-, with target ``fidelity``),
    ``qd-cascade`` (``fss_uev``; optional ``lifetime_ps`` decay weights) or
    ``custom-density`` (``density`` matrix).
    """

    kind: str = "pure-state"
    state: object = None
    fidelity: float = 0.94
    fss_uev: float = 5.44
    lifetime_ps: float | None = None
    density: object = None

    def __post_init__(self):
        if self.kind not in ("pure-state", "spdc", "qd-cascade", "custom-density"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "spdc" and not 0.25 <= self.fidelity <= 1:
            raise ValueError("spdc fidelity must lie in [1/4, 1]")
        if self.kind == "custom-density" and self.density is None:
            raise ValueError("custom-density source needs a density matrix")
        if self.kind == "pure-state" and self.state is None:
            raise ValueError("pure-state source needs a state")

    def target(self):
        if self.kind == "qd-cascade":
            return named_state("phi+")
        if self.kind == "custom-density":
            return None
        state = "psi-" if self.state is None else self.state
        if isinstance(state, str):
            return named_state(state)
        psi = np.asarray(state, dtype=complex)
        return psi / np.linalg.norm(psi)

    def density_matrix(self, t_ps=None):
        if self.kind == "pure-state":
            rho = projector(self.target())
        elif self.kind == "spdc":
            psi = self.target()
            d = psi.size
            p = (d * self.fidelity - 1) / (d - 1)
            rho = werner_state(psi, p)
        elif self.kind == "qd-cascade":
            if t_ps is None:
                raise ValueError("qd-cascade source needs a time delay")
            rho = qd_state(t_ps, self.fss_uev)
        else:
            rho = np.asarray(self.density, dtype=complex)
        return check_density(rho)

    def weight(self, t_ps):
        """Relative emission weight of a time bin (1 without a lifetime)."""
        if self.kind != "qd-cascade" or not self.lifetime_ps:
            return 1.0
        return float(np.exp(-t_ps / self.lifetime_ps))
