"""Hot DP inner loops: numba-compiled kernels with a pure-numpy fallback.

The sum-product and max-sum recursions dominate runtime (Theta(k_max * n^2)
logsumexp/argmax work), so they are compiled with ``numba.njit`` when numba
is importable. Setting the environment variable ``BAYESBREAK_NUMBA=0`` (or
``false``/``no``) before import forces the pure-numpy path; the same
functions are also selectable per call for backend benchmarking.

All kernels operate on a square ``(n+1, n+1)`` array ``log_a`` where
``log_a[i, j]`` is the log evidence of block ``(i, j]`` (``-inf`` where
``i >= j`` or the block is forbidden).
"""

from __future__ import annotations

import os

import numpy as np

_ENV = os.environ.get("BAYESBREAK_NUMBA", "1").strip().lower()
_WANT_NUMBA = _ENV not in ("0", "false", "no", "off")

try:  # pragma: no cover - exercised indirectly via backend tests
    if not _WANT_NUMBA:
        raise ImportError("numba disabled via BAYESBREAK_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


NEG_INF = -np.inf


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _logsumexp_1d(v: np.ndarray) -> float:
    m = np.max(v) if v.size else NEG_INF
    if m == NEG_INF:
        return NEG_INF
    return m + np.log(np.sum(np.exp(v - m)))


def _forward_numpy(log_a: np.ndarray, k_max: int) -> np.ndarray:
    n = log_a.shape[0] - 1
    L = np.full((k_max + 1, n + 1), NEG_INF)
    L[0, 0] = 0.0
    for k in range(k_max):
        for j in range(k + 1, n + 1):
            L[k + 1, j] = _logsumexp_1d(L[k, k:j] + log_a[k:j, j])
    return L


def _backward_numpy(log_a: np.ndarray, k_max: int) -> np.ndarray:
    n = log_a.shape[0] - 1
    R = np.full((k_max + 1, n + 1), NEG_INF)
    R[0, n] = 0.0
    for k in range(k_max):
        for i in range(n - k - 1, -1, -1):
            R[k + 1, i] = _logsumexp_1d(log_a[i, i + 1 : n + 1] + R[k, i + 1 : n + 1])
    return R


def _maxsum_numpy(log_a: np.ndarray, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    n = log_a.shape[0] - 1
    M = np.full((k_max + 1, n + 1), NEG_INF)
    ptr = np.full((k_max + 1, n + 1), -1, dtype=np.int64)
    M[0, 0] = 0.0
    for k in range(k_max):
        for j in range(k + 1, n + 1):
            cand = M[k, k:j] + log_a[k:j, j]
            if cand.size == 0:
                continue
            best = int(np.argmax(cand))  # np.argmax returns the first (smallest h) maximizer
            if cand[best] > NEG_INF:
                M[k + 1, j] = cand[best]
                ptr[k + 1, j] = k + best
    return M, ptr


def _curve_logweights_numpy(
    logL: np.ndarray, logR: np.ndarray, log_a: np.ndarray, k: int
) -> np.ndarray:
    n = log_a.shape[0] - 1
    # position[i, j] = logsumexp_m ( logL[m-1, i] + logR[k-m, j] ), m = 1..k
    pos = np.full((n + 1, n + 1), NEG_INF)
    for m in range(1, k + 1):
        pos = np.logaddexp(pos, logL[m - 1, :, None] + logR[k - m, None, :])
    return pos + log_a


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _forward_nb(log_a, k_max):  # pragma: no cover - compiled
    n = log_a.shape[0] - 1
    L = np.full((k_max + 1, n + 1), NEG_INF)
    L[0, 0] = 0.0
    for k in range(k_max):
        for j in range(k + 1, n + 1):
            m = NEG_INF
            for h in range(k, j):
                v = L[k, h] + log_a[h, j]
                if v > m:
                    m = v
            if m == NEG_INF:
                continue
            s = 0.0
            for h in range(k, j):
                s += np.exp(L[k, h] + log_a[h, j] - m)
            L[k + 1, j] = m + np.log(s)
    return L


@njit(cache=True)
def _backward_nb(log_a, k_max):  # pragma: no cover - compiled
    n = log_a.shape[0] - 1
    R = np.full((k_max + 1, n + 1), NEG_INF)
    R[0, n] = 0.0
    for k in range(k_max):
        for i in range(n - k - 1, -1, -1):
            m = NEG_INF
            for h in range(i + 1, n + 1):
                v = log_a[i, h] + R[k, h]
                if v > m:
                    m = v
            if m == NEG_INF:
                continue
            s = 0.0
            for h in range(i + 1, n + 1):
                s += np.exp(log_a[i, h] + R[k, h] - m)
            R[k + 1, i] = m + np.log(s)
    return R


@njit(cache=True)
def _maxsum_nb(log_a, k_max):  # pragma: no cover - compiled
    n = log_a.shape[0] - 1
    M = np.full((k_max + 1, n + 1), NEG_INF)
    ptr = np.full((k_max + 1, n + 1), -1, dtype=np.int64)
    M[0, 0] = 0.0
    for k in range(k_max):
        for j in range(k + 1, n + 1):
            best = NEG_INF
            arg = -1
            for h in range(k, j):
                v = M[k, h] + log_a[h, j]
                if v > best:  # strict: keeps the smallest maximizing h
                    best = v
                    arg = h
            if arg >= 0:
                M[k + 1, j] = best
                ptr[k + 1, j] = arg
    return M, ptr


@njit(cache=True)
def _curve_logweights_nb(logL, logR, log_a, k):  # pragma: no cover - compiled
    n = log_a.shape[0] - 1
    out = np.full((n + 1, n + 1), NEG_INF)
    for i in range(n):
        for j in range(i + 1, n + 1):
            if log_a[i, j] == NEG_INF:
                continue
            m = NEG_INF
            for q in range(1, k + 1):
                v = logL[q - 1, i] + logR[k - q, j]
                if v > m:
                    m = v
            if m == NEG_INF:
                continue
            s = 0.0
            for q in range(1, k + 1):
                s += np.exp(logL[q - 1, i] + logR[k - q, j] - m)
            out[i, j] = m + np.log(s) + log_a[i, j]
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_IMPLS = {
    "numpy": {
        "forward": _forward_numpy,
        "backward": _backward_numpy,
        "maxsum": _maxsum_numpy,
        "curve": _curve_logweights_numpy,
    },
}
if HAVE_NUMBA:
    _IMPLS["numba"] = {
        "forward": _forward_nb,
        "backward": _backward_nb,
        "maxsum": _maxsum_nb,
        "curve": _curve_logweights_nb,
    }

ACTIVE_BACKEND = "numba" if HAVE_NUMBA else "numpy"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPLS))


def _impl(name: str, backend: str | None):
    b = backend or ACTIVE_BACKEND
    if b not in _IMPLS:
        raise ValueError(f"unknown kernel backend {b!r}; available: {available_backends()}")
    return _IMPLS[b][name]


def forward_pass(log_a: np.ndarray, k_max: int, backend: str | None = None) -> np.ndarray:
    """Prefix log evidences L[k, j] for j in 0..n and k in 0..k_max."""
    return _impl("forward", backend)(np.ascontiguousarray(log_a, dtype=np.float64), k_max)


def backward_pass(log_a: np.ndarray, k_max: int, backend: str | None = None) -> np.ndarray:
    """Suffix log evidences R[k, i] for i in 0..n and k in 0..k_max."""
    return _impl("backward", backend)(np.ascontiguousarray(log_a, dtype=np.float64), k_max)


def maxsum_pass(
    log_a: np.ndarray, k_max: int, backend: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Max-sum scores M[k, j] and smallest-h backpointers."""
    return _impl("maxsum", backend)(np.ascontiguousarray(log_a, dtype=np.float64), k_max)


def curve_logweights(
    logL: np.ndarray,
    logR: np.ndarray,
    log_a: np.ndarray,
    k: int,
    backend: str | None = None,
) -> np.ndarray:
    """Unnormalized log coverage weights: logsumexp_m(L[m-1,i] + R[k-m,j]) + log_a[i,j]."""
    return _impl("curve", backend)(
        np.ascontiguousarray(logL, dtype=np.float64),
        np.ascontiguousarray(logR, dtype=np.float64),
        np.ascontiguousarray(log_a, dtype=np.float64),
        k,
    )


def warmup(backend: str | None = None) -> None:
    """Trigger JIT compilation on a tiny instance so timings exclude it."""
    a = np.full((3, 3), NEG_INF)
    a[0, 1] = a[0, 2] = a[1, 2] = 0.0
    L = forward_pass(a, 2, backend)
    R = backward_pass(a, 2, backend)
    maxsum_pass(a, 2, backend)
    curve_logweights(L, R, a, 2, backend)
