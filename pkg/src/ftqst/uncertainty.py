"""Monte Carlo propagation of counting noise into reconstruction uncertainties.

Every count is redrawn from Normal(c, sqrt(max(c, 1))), clipped at zero, and
the resampled dataset goes through the same reconstruction as the original.
Statistics are element-wise over the resulting density matrices.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FTQSTError
from .qmat import concurrence, fidelity_to_pure
from .reconstruct import project_physical, reconstruct

DEFAULT_SAMPLES = 100


@dataclass(frozen=True, eq=False)
class MonteCarloReport:
    n_samples: int
    seed: int | None
    mean: np.ndarray
    std_real: np.ndarray
    std_imag: np.ndarray
    metrics: dict  # name -> (mean, std)
    excluded: int = 0

    @property
    def mean_physical(self):
        return project_physical(self.mean)

    def metric(self, name):
        return self.metrics[name]


def resample_counts(counts, rng):
    counts = np.asarray(counts, dtype=float)
    sigma = np.sqrt(np.maximum(counts, 1.0))
    return np.clip(rng.normal(counts, sigma), 0.0, None)


def resample_scan(data, seed=None):
    """Resampled copy of a counts dataset (AngleScan or ProjectiveData)."""
    if data.value_kind != "counts":
        raise ValueError("Monte Carlo resampling needs counts, not probabilities")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return data.with_values(resample_counts(data.values, rng))


def sub_seeds(seed, n):
    """Independent per-sample seeds derived from the master seed."""
    return np.random.SeedSequence(seed).spawn(n)


def _metrics(rho, target):
    out = {}
    if target is not None:
        out["fidelity"] = fidelity_to_pure(rho, target)
    if rho.shape == (4, 4):
        out["concurrence"] = concurrence(rho)
    return out


def monte_carlo(data, n_samples=DEFAULT_SAMPLES, reconstructor=None, target=None, seed=None, executor=None):
    """Resample ``data`` n_samples times and reconstruct each copy.

    ``reconstructor`` maps a dataset to a ReconstructionResult (default: the
    MLE for the data type). Samples whose fit does not converge, or raises a
    package error, are excluded and counted. Passing an ``executor``
    (anything with ``map``) runs the samples concurrently; the per-sample
    sub-seeds make the report identical either way.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    if reconstructor is None:
        reconstructor = reconstruct
    seeds = sub_seeds(seed, n_samples)

    def one(ss):
        sample = resample_scan(data, np.random.default_rng(ss))
        try:
            res = reconstructor(sample)
        except FTQSTError:
            return None
        return res.rho if res.converged else None

    mapper = executor.map if executor is not None else map
    rhos = list(mapper(one, seeds))
    kept = [r for r in rhos if r is not None]
    excluded = len(rhos) - len(kept)
    if len(kept) < 2:
        raise FTQSTError(f"only {len(kept)} of {n_samples} Monte Carlo samples reconstructed")
    stack = np.array(kept)
    per = [_metrics(r, target) for r in kept]
    metrics = {}
    for name in per[0]:
        vals = np.array([m[name] for m in per])
        metrics[name] = (float(vals.mean()), float(vals.std(ddof=1)))
    return MonteCarloReport(
        n_samples=n_samples,
        seed=seed,
        mean=stack.mean(axis=0),
        std_real=stack.real.std(axis=0, ddof=1),
        std_imag=stack.imag.std(axis=0, ddof=1),
        metrics=metrics,
        excluded=excluded,
    )
