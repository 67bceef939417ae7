"""Fourier-transform quantum state tomography for polarization qubits.

Rotating-waveplate signals are simulated, decomposed into their harmonics and
inverted to density matrices, either in closed form or by a constrained
least-squares (Cholesky) fit.
"""

from ._kernels import BACKEND
from .analysis import FssFitResult, MethodSummary, TimeBinSeries, compare_methods, fss_fit
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    FrequencySetError,
    FTQSTError,
    InvalidStateError,
    NyquistError,
    ScanFormatError,
)
from .forward import (
    AngleScan,
    SourceModel,
    WaveplateConfig,
    apply_virtual_waveplate,
    default_waveplates,
    probability_signal,
    sample_counts,
    simulate_scan,
    virtual_waveplate,
)
from .harmonics import FrequencySet, HarmonicSpectrum, evaluate_series, extract_coefficients, frequency_set
from .qmat import concurrence, fidelity_to_pure, named_state
from .reconstruct import (
    MleConfig,
    ProjectiveData,
    ReconstructionResult,
    invert_spectrum,
    linear_fit,
    linear_inversion,
    mle_fit,
    projective_tomography,
    reconstruct,
)
from .uncertainty import MonteCarloReport, monte_carlo

__version__ = "0.1.0"
