"""Hot numeric kernels with a numba path and a pure-numpy path.

The numba versions are used when numba imports cleanly and the environment
variable ``FTQST_DISABLE_NUMBA`` is unset (or ``0``/``false``). Both versions
are always importable as ``*_numba`` / ``*_numpy`` so tests and the benchmark
can compare them directly; the unsuffixed names are the selected backend.

Kernels
-------
stokes_signal(stokes, chi)
    p_k = 2**-n sum_idx S[idx] prod_m chi[m, k, idx_m]
harmonic_projection(values, theta, freqs)
    rectangle-rule cosine/sine inner products (2/N) sum v cos(f theta)
lsq_cost_grad(t, ops, y, fit_scale)
    least-squares cost of the Cholesky-parametrized state against data, its
    gradient with respect to T, the profiled intensity scale and the fitted
    probabilities.
"""

import os

import numpy as np

_flag = os.environ.get("FTQST_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _disabled
BACKEND = "numba" if USE_NUMBA else "numpy"


# -- numpy -------------------------------------------------------------------


def stokes_signal_numpy(stokes, chi):
    n, npts, _ = chi.shape
    acc = chi[0] @ stokes.reshape(4, -1)  # (N, 4**(n-1))
    for m in range(1, n):
        acc = np.einsum("kj,kjr->kr", chi[m], acc.reshape(npts, 4, -1))
    return acc[:, 0] / 2**n


def harmonic_projection_numpy(values, theta, freqs):
    arg = np.outer(freqs, theta)
    scale = 2.0 / theta.size
    return scale * (np.cos(arg) @ values), scale * (np.sin(arg) @ values)


def lsq_cost_grad_numpy(t, ops, y, fit_scale):
    npts, d, _ = ops.shape
    x = t @ t.conj().T
    tr = np.trace(x).real
    rho = x / tr
    # p_k = Tr[rho M_k] = sum_ab rho_ab M_k[b, a]
    p = np.einsum("ab,kba->k", rho, ops).real
    if fit_scale:
        pp = p @ p
        s = max(p @ y / pp, 0.0) if pp > 0 else 0.0
    else:
        s = 1.0
    r = s * p - y
    cost = r @ r
    g = np.tensordot(2.0 * s * r, ops, axes=1)
    g = (g - np.trace(g @ rho).real * np.eye(d)) / tr
    return cost, 2.0 * g @ t, s, p


# -- numba -------------------------------------------------------------------

if HAVE_NUMBA:
    _njit = numba.njit(cache=True, fastmath=False)

    @_njit
    def stokes_signal_numba(stokes, chi):
        n, npts, _ = chi.shape
        nterms = stokes.size
        out = np.empty(npts)
        norm = 1.0 / 2**n
        for k in range(npts):
            acc = 0.0
            for j in range(nterms):
                sj = stokes[j]
                if sj == 0.0:
                    continue
                prod = sj
                rem = j
                # row-major index: last qubit is the fastest-varying digit
                for m in range(n - 1, -1, -1):
                    prod *= chi[m, k, rem % 4]
                    rem //= 4
                acc += prod
            out[k] = acc * norm
        return out

    @_njit
    def harmonic_projection_numba(values, theta, freqs):
        nf = freqs.size
        npts = theta.size
        a = np.zeros(nf)
        b = np.zeros(nf)
        for i in range(nf):
            f = freqs[i]
            sa = 0.0
            sb = 0.0
            for k in range(npts):
                arg = f * theta[k]
                sa += values[k] * np.cos(arg)
                sb += values[k] * np.sin(arg)
            a[i] = 2.0 * sa / npts
            b[i] = 2.0 * sb / npts
        return a, b

    @_njit
    def lsq_cost_grad_numba(t, ops, y, fit_scale):
        npts, d, _ = ops.shape
        rho = np.zeros((d, d), dtype=np.complex128)
        tr = 0.0
        for a in range(d):
            for b in range(d):
                z = 0.0j
                for c in range(min(a, b) + 1):
                    z += t[a, c] * np.conj(t[b, c])
                rho[a, b] = z
            tr += rho[a, a].real
        rho /= tr
        p = np.empty(npts)
        for k in range(npts):
            pk = 0.0
            for a in range(d):
                for b in range(d):
                    pk += (rho[a, b] * ops[k, b, a]).real
            p[k] = pk
        s = 1.0
        if fit_scale:
            pp = 0.0
            py = 0.0
            for k in range(npts):
                pp += p[k] * p[k]
                py += p[k] * y[k]
            s = max(py / pp, 0.0) if pp > 0.0 else 0.0
        g = np.zeros((d, d), dtype=np.complex128)
        cost = 0.0
        for k in range(npts):
            r = s * p[k] - y[k]
            cost += r * r
            w = 2.0 * s * r
            for a in range(d):
                for b in range(d):
                    g[a, b] += w * ops[k, a, b]
        gr = 0.0
        for a in range(d):
            for b in range(d):
                gr += (g[a, b] * rho[b, a]).real
        for a in range(d):
            g[a, a] -= gr
        grad = np.zeros((d, d), dtype=np.complex128)
        for a in range(d):
            for c in range(d):
                z = 0.0j
                for b in range(c, d):
                    z += g[a, b] * t[b, c]
                grad[a, c] = 2.0 * z / tr
        return cost, grad, s, p

else:  # pragma: no cover
    stokes_signal_numba = stokes_signal_numpy
    harmonic_projection_numba = harmonic_projection_numpy
    lsq_cost_grad_numba = lsq_cost_grad_numpy


if USE_NUMBA:
    stokes_signal = stokes_signal_numba
    harmonic_projection = harmonic_projection_numba
    lsq_cost_grad = lsq_cost_grad_numba
else:
    stokes_signal = stokes_signal_numpy
    harmonic_projection = harmonic_projection_numpy
    lsq_cost_grad = lsq_cost_grad_numpy
