"""Hot numeric kernels, jitted with numba when available.

Everything here operates on C-contiguous complex128 arrays. Kraus sets are
passed as 3d stacks of shape (k, out_dim, in_dim). The drop-condition checks
call these kernels many thousands of times on small matrices, where the jitted
loops beat numpy's per-call dispatch overhead.

Set QPN_PURE_NUMPY=1 to force the plain numpy implementations (also used
automatically when numba is not importable). `benchmarks/bench_kernels.py`
compares both paths.
"""

from __future__ import annotations

import numpy as np

from .config import pure_numpy_requested

# ---------------------------------------------------------------- numpy path


def _np_kron(a, b):
    return np.kron(a, b)


def _np_pair_krons(a_stack, b_stack):
    ka, am, an = a_stack.shape
    kb, bm, bn = b_stack.shape
    out = a_stack[:, None, :, None, :, None] * b_stack[None, :, None, :, None, :]
    return np.ascontiguousarray(out.reshape(ka * kb, am * bm, an * bn))


def _np_pair_products(a_stack, b_stack):
    ka, am, an = a_stack.shape
    kb, bm, bn = b_stack.shape
    out = np.einsum("amn,bnp->abmp", a_stack, b_stack)
    return np.ascontiguousarray(out.reshape(ka * kb, am, bn))


def _np_effect_sum(stack):
    return np.einsum("kri,krj->ij", stack.conj(), stack)


def _np_weighted_effect(stack, mid):
    return np.einsum("kri,rs,ksj->ij", stack.conj(), mid, stack)


def _np_apply_channel(stack, rho):
    return np.einsum("kab,bc,kdc->ad", stack, rho, stack.conj())


_NUMPY_IMPLS = {
    "kron": _np_kron,
    "pair_krons": _np_pair_krons,
    "pair_products": _np_pair_products,
    "effect_sum": _np_effect_sum,
    "weighted_effect": _np_weighted_effect,
    "apply_channel": _np_apply_channel,
}

# ---------------------------------------------------------------- numba path

_NUMBA_IMPLS = {}

try:
    if pure_numpy_requested():
        raise ImportError("QPN_PURE_NUMPY set")
    from numba import njit

    @njit(cache=True)
    def _nb_kron(a, b):
        am, an = a.shape
        bm, bn = b.shape
        out = np.empty((am * bm, an * bn), dtype=np.complex128)
        for i in range(am):
            for j in range(an):
                aij = a[i, j]
                for k in range(bm):
                    for l in range(bn):
                        out[i * bm + k, j * bn + l] = aij * b[k, l]
        return out

    @njit(cache=True)
    def _nb_pair_krons(a_stack, b_stack):
        ka, am, an = a_stack.shape
        kb, bm, bn = b_stack.shape
        out = np.empty((ka * kb, am * bm, an * bn), dtype=np.complex128)
        for s in range(ka):
            for t in range(kb):
                r = s * kb + t
                for i in range(am):
                    for j in range(an):
                        aij = a_stack[s, i, j]
                        for k in range(bm):
                            for l in range(bn):
                                out[r, i * bm + k, j * bn + l] = aij * b_stack[t, k, l]
        return out

    @njit(cache=True)
    def _nb_pair_products(a_stack, b_stack):
        ka, am, an = a_stack.shape
        kb, bm, bn = b_stack.shape
        out = np.zeros((ka * kb, am, bn), dtype=np.complex128)
        for s in range(ka):
            for t in range(kb):
                r = s * kb + t
                for i in range(am):
                    for j in range(bn):
                        acc = 0.0 + 0.0j
                        for m in range(an):
                            acc += a_stack[s, i, m] * b_stack[t, m, j]
                        out[r, i, j] = acc
        return out

    @njit(cache=True)
    def _nb_effect_sum(stack):
        k, m, n = stack.shape
        out = np.zeros((n, n), dtype=np.complex128)
        for s in range(k):
            for i in range(n):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for r in range(m):
                        acc += np.conj(stack[s, r, i]) * stack[s, r, j]
                    out[i, j] += acc
        return out

    @njit(cache=True)
    def _nb_weighted_effect(stack, mid):
        k, m, n = stack.shape
        out = np.zeros((n, n), dtype=np.complex128)
        tmp = np.empty((m, n), dtype=np.complex128)
        for s in range(k):
            for r in range(m):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for q in range(m):
                        acc += mid[r, q] * stack[s, q, j]
                    tmp[r, j] = acc
            for i in range(n):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for r in range(m):
                        acc += np.conj(stack[s, r, i]) * tmp[r, j]
                    out[i, j] += acc
        return out

    @njit(cache=True)
    def _nb_apply_channel(stack, rho):
        k, m, n = stack.shape
        out = np.zeros((m, m), dtype=np.complex128)
        tmp = np.empty((m, n), dtype=np.complex128)
        for s in range(k):
            for a in range(m):
                for c in range(n):
                    acc = 0.0 + 0.0j
                    for b in range(n):
                        acc += stack[s, a, b] * rho[b, c]
                    tmp[a, c] = acc
            for a in range(m):
                for d in range(m):
                    acc = 0.0 + 0.0j
                    for c in range(n):
                        acc += tmp[a, c] * np.conj(stack[s, d, c])
                    out[a, d] += acc
        return out

    _NUMBA_IMPLS = {
        "kron": _nb_kron,
        "pair_krons": _nb_pair_krons,
        "pair_products": _nb_pair_products,
        "effect_sum": _nb_effect_sum,
        "weighted_effect": _nb_weighted_effect,
        "apply_channel": _nb_apply_channel,
    }
except ImportError:
    pass

BACKEND = "numba" if _NUMBA_IMPLS else "numpy"
_ACTIVE = _NUMBA_IMPLS if _NUMBA_IMPLS else _NUMPY_IMPLS

IMPLEMENTATIONS = {"numpy": _NUMPY_IMPLS}
if _NUMBA_IMPLS:
    IMPLEMENTATIONS["numba"] = _NUMBA_IMPLS


def _c2(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def kron(a, b):
    return _ACTIVE["kron"](_c2(a), _c2(b))


def pair_krons(a_stack, b_stack):
    """All pairwise Kronecker products A_j (x) B_k, j-major order."""
    return _ACTIVE["pair_krons"](_c2(a_stack), _c2(b_stack))


def pair_products(a_stack, b_stack):
    """All pairwise matrix products A_j B_k, j-major order."""
    return _ACTIVE["pair_products"](_c2(a_stack), _c2(b_stack))


def effect_sum(stack):
    """Sum of K^dag K over a Kraus stack."""
    return _ACTIVE["effect_sum"](_c2(stack))


def weighted_effect(stack, mid):
    """Sum of K^dag M K over a Kraus stack."""
    return _ACTIVE["weighted_effect"](_c2(stack), _c2(mid))


def apply_channel(stack, rho):
    """Sum of K rho K^dag over a Kraus stack."""
    return _ACTIVE["apply_channel"](_c2(stack), _c2(rho))


def warmup():
    """Trigger jit compilation on tiny inputs so timed runs stay honest."""
    a = np.eye(2, dtype=np.complex128)
    stack = a[None, :, :]
    kron(a, a)
    pair_krons(stack, stack)
    pair_products(stack, stack)
    effect_sum(stack)
    weighted_effect(stack, a)
    apply_channel(stack, a)
