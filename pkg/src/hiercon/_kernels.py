"""Hot path-accrual kernels: numba-jitted with a pure-numpy fallback.

The backend is chosen at import time.  Set ``HIERCON_DISABLE_NUMBA=1`` to
force the numpy path (also used automatically when numba is unavailable).
``benchmarks/bench_kernels.py`` compares the two.

The kernel consumes Brownian increments for one block of paths and reduces
them to per-path terminal quantities:

* terminal output per worker,
* accrued agent compensations (quadratic-variation term accrued at its
  analytic rate sigma^2 dt),
* the net benefit's martingale sum and its realized quadratic variation
  (sum of squared drift-compensated increments),

leaving only O(paths) post-processing to the caller.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("HIERCON_DISABLE_NUMBA", "").strip() not in ("", "0")

try:  # pragma: no cover - exercised via the env flag in tests
    if _DISABLED:
        raise ImportError("numba disabled by HIERCON_DISABLE_NUMBA")
    import numba

    # skip the TBB/OMP probing; workqueue is always available
    numba.config.THREADING_LAYER = "workqueue"
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _accrue_block_numpy(dw, sigma, weights):
    """Per-path reductions for one block.

    dw: (workers, paths, steps) Brownian increments.
    sigma: (workers,) volatilities.
    weights: (workers,) martingale weights of the net benefit
             (1 for the manager, 1 - z_i for agent i).

    Returns (wsum, zeta_mart, qv):
    wsum (workers, paths): per-worker sums of dW;
    zeta_mart (paths,): terminal martingale part of the net benefit;
    qv (paths,): sum of squared net-benefit martingale increments.
    """
    wsum = dw.sum(axis=2)
    buf = np.einsum("w,wps->ps", weights * sigma, dw)
    zeta_mart = buf.sum(axis=1)
    qv = np.einsum("ps,ps->p", buf, buf)
    return wsum, zeta_mart, qv


if HAVE_NUMBA:

    @numba.njit(parallel=True, fastmath=False, cache=True)
    def _accrue_block_numba(dw, sigma, weights):  # pragma: no cover - jitted
        n_workers, n_paths, n_steps = dw.shape
        wsum = np.zeros((n_workers, n_paths))
        zeta_mart = np.zeros(n_paths)
        qv = np.zeros(n_paths)
        coef = weights * sigma
        for p in numba.prange(n_paths):
            for s in range(n_steps):
                dz = 0.0
                for w in range(n_workers):
                    x = dw[w, p, s]
                    wsum[w, p] += x
                    dz += coef[w] * x
                zeta_mart[p] += dz
                qv[p] += dz * dz
        return wsum, zeta_mart, qv

    accrue_block = _accrue_block_numba
    BACKEND = "numba"
else:
    accrue_block = _accrue_block_numpy
    BACKEND = "numpy"

# always importable for benchmarking / equivalence tests
accrue_block_numpy = _accrue_block_numpy
