"""Finite-dimensional complex linear algebra for quantum maps.

Maps between finite-dimensional spaces are kept Kraus-first: a map is a
nonempty stack of Kraus operators, and the Choi matrix is derived (and cached)
only when needed. Maps loaded from a Choi matrix go through a mandatory
complete-positivity gate and are converted back to Kraus form by
eigendecomposition.

Tensor-product spaces are always handled through an explicit FactorLayout so
that "up to an implicit permutation" never appears in the code: every factor
reordering is a concrete `permute_factors` call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, Sequence, Union

import numpy as np

from . import _kernels as kernels
from .config import COMPRESS_DIM_CAP, KRAUS_CAP, default_psd_tol, dim_cap
from .errors import (
    DimensionCapExceeded,
    DimensionMismatch,
    LayoutMismatch,
    NotCompletelyPositive,
    NotHermitian,
    UnknownFactor,
)

Matrix = np.ndarray

# A factor is either a condition (plain node id) or an H slot of a transition,
# tagged by the side it lives on: ("hin", tid) or ("hout", tid).
FactorId = Union[int, tuple]


def as_matrix(value) -> Matrix:
    """Coerce to a finite 2d complex128 array."""
    mat = np.ascontiguousarray(value, dtype=np.complex128)
    if mat.ndim != 2:
        raise DimensionMismatch(f"expected a 2d matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return mat


def dagger(mat: Matrix) -> Matrix:
    return mat.conj().T


def max_abs(mat: Matrix) -> float:
    return float(np.max(np.abs(mat))) if mat.size else 0.0


def frobenius(mat: Matrix) -> float:
    return float(np.linalg.norm(mat))


def hermiticity_defect(mat: Matrix) -> float:
    return max_abs(mat - dagger(mat))


def factor_key(fid: FactorId):
    """Canonical total order: conditions first, then input-H, then output-H."""
    if isinstance(fid, tuple):
        if len(fid) == 2 and fid[0] in ("hin", "hout"):
            return (1 if fid[0] == "hin" else 2, fid[1])
        raise UnknownFactor(f"malformed factor id {fid!r}")
    return (0, fid)


@dataclass(frozen=True)
class FactorLayout:
    """Ordered factors of a tensor-product space: ((factor_id, dim), ...)."""

    factors: tuple

    def __post_init__(self):
        seen = set()
        for fid, dim in self.factors:
            factor_key(fid)
            if not isinstance(dim, int) or dim < 1:
                raise DimensionMismatch(f"factor {fid!r} has invalid dimension {dim!r}")
            if fid in seen:
                raise LayoutMismatch(f"duplicate factor id {fid!r}")
            seen.add(fid)

    @staticmethod
    def of(pairs: Iterable) -> "FactorLayout":
        return FactorLayout(tuple((fid, int(dim)) for fid, dim in pairs))

    @property
    def ids(self) -> tuple:
        return tuple(fid for fid, _ in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def index_of(self, fid: FactorId) -> int:
        for i, (other, _) in enumerate(self.factors):
            if other == fid:
                return i
        raise UnknownFactor(f"factor {fid!r} not in layout")

    def dim_of(self, fid: FactorId) -> int:
        return self.factors[self.index_of(fid)][1]

    def restricted(self, keep) -> "FactorLayout":
        keep = set(keep)
        return FactorLayout(tuple(f for f in self.factors if f[0] in keep))

    def sorted_canonical(self) -> "FactorLayout":
        return FactorLayout(tuple(sorted(self.factors, key=lambda f: factor_key(f[0]))))

    def is_permutation_of(self, other: "FactorLayout") -> bool:
        return sorted(self.factors, key=repr) == sorted(other.factors, key=repr)


def layout(pairs: Iterable) -> FactorLayout:
    return FactorLayout.of(pairs)


EMPTY_LAYOUT = FactorLayout(())


# ---------------------------------------------------------------- quantum maps


@dataclass(frozen=True, eq=False)
class QuantumMap:
    """A map between matrix algebras, as a stack of Kraus operators.

    `kraus` has shape (k, out_dim, in_dim). Completely positive by
    construction; trace non-increase is a property checked by `is_cptni`,
    not enforced here, so that violating maps can be represented and
    rejected with a precise verdict.
    """

    in_dim: int
    out_dim: int
    kraus: np.ndarray

    @cached_property
    def choi(self) -> Matrix:
        """Choi matrix, (in*out) square, row index i*out + a for basis E_ij -> (a, b)."""
        return kraus_to_choi(self.kraus)

    @property
    def kraus_count(self) -> int:
        return self.kraus.shape[0]

    def kraus_list(self) -> list:
        return [self.kraus[i] for i in range(self.kraus.shape[0])]


def kraus_to_choi(stack: np.ndarray) -> Matrix:
    k, out_d, in_d = stack.shape
    vecs = np.ascontiguousarray(stack.transpose(0, 2, 1)).reshape(k, in_d * out_d)
    return vecs.T @ vecs.conj()


def choi_to_kraus(choi: Matrix, in_dim: int, out_dim: int, tol: float) -> np.ndarray:
    """Eigendecompose a (validated) Choi matrix back into a Kraus stack."""
    vals, vecs = np.linalg.eigh((choi + dagger(choi)) / 2.0)
    if vals.size and vals[0] < -tol:
        raise NotCompletelyPositive(f"Choi matrix has eigenvalue {vals[0]:.3e} < -{tol:.3e}")
    ops = []
    for val, vec in zip(vals, vecs.T):
        if val > tol:
            ops.append(np.sqrt(val) * vec.reshape(in_dim, out_dim).T)
    if not ops:
        ops.append(np.zeros((out_dim, in_dim), dtype=np.complex128))
    return np.ascontiguousarray(np.stack(ops))


def quantum_map(kraus, in_dim: int | None = None, out_dim: int | None = None) -> QuantumMap:
    """Build a map from a nonempty list of Kraus matrices (or a 3d stack)."""
    if isinstance(kraus, np.ndarray) and kraus.ndim == 3:
        stack = np.ascontiguousarray(kraus, dtype=np.complex128)
    else:
        mats = [as_matrix(k) for k in kraus]
        if not mats:
            raise DimensionMismatch("a quantum map needs at least one Kraus operator")
        shapes = {m.shape for m in mats}
        if len(shapes) != 1:
            raise DimensionMismatch(f"Kraus operators disagree on shape: {sorted(shapes)}")
        stack = np.ascontiguousarray(np.stack(mats))
    if stack.shape[0] == 0:
        raise DimensionMismatch("a quantum map needs at least one Kraus operator")
    if not np.all(np.isfinite(stack.view(np.float64))):
        raise ValueError("Kraus entries must be finite")
    out_d, in_d = stack.shape[1], stack.shape[2]
    if in_dim is not None and in_dim != in_d:
        raise DimensionMismatch(f"declared input dim {in_dim} != Kraus columns {in_d}")
    if out_dim is not None and out_dim != out_d:
        raise DimensionMismatch(f"declared output dim {out_dim} != Kraus rows {out_d}")
    return QuantumMap(in_dim=in_d, out_dim=out_d, kraus=stack)


def identity_map(dim: int) -> QuantumMap:
    if dim < 1:
        raise DimensionMismatch(f"dimension must be >= 1, got {dim}")
    _check_cap(dim)
    return quantum_map(np.eye(dim, dtype=np.complex128)[None, :, :])


def map_from_choi(choi, in_dim: int, out_dim: int, tol: float | None = None) -> QuantumMap:
    """Load a map from its Choi matrix; the positivity gate is mandatory here."""
    mat = as_matrix(choi)
    if mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"Choi matrix must be square, got {mat.shape}")
    if mat.shape[0] != in_dim * out_dim:
        raise DimensionMismatch(
            f"Choi dimension {mat.shape[0]} != in_dim*out_dim = {in_dim * out_dim}"
        )
    if tol is None:
        tol = default_psd_tol(mat.shape[0], max_abs(mat))
    defect = hermiticity_defect(mat)
    if defect > max(tol, 1e-12):
        raise NotHermitian(f"Choi matrix deviates from Hermitian by {defect:.3e}")
    return quantum_map(choi_to_kraus(mat, in_dim, out_dim, tol))


def _check_cap(total: int) -> None:
    cap = dim_cap()
    if total > cap:
        raise DimensionCapExceeded(f"tensor dimension {total} exceeds cap {cap}")


def _maybe_compress(m: QuantumMap) -> QuantumMap:
    pair = m.in_dim * m.out_dim
    if m.kraus_count > KRAUS_CAP and pair < m.kraus_count and pair <= COMPRESS_DIM_CAP:
        return compress(m)
    return m


def compress(m: QuantumMap) -> QuantumMap:
    """Re-extract a minimal Kraus stack (same channel) through the Choi matrix."""
    choi = m.choi
    tol = default_psd_tol(choi.shape[0], max_abs(choi))
    stack = choi_to_kraus(choi, m.in_dim, m.out_dim, max(tol, 1e-14))
    return QuantumMap(in_dim=m.in_dim, out_dim=m.out_dim, kraus=stack)


def tensor(a: QuantumMap, b: QuantumMap) -> QuantumMap:
    _check_cap(a.in_dim * b.in_dim)
    _check_cap(a.out_dim * b.out_dim)
    stack = kernels.pair_krons(a.kraus, b.kraus)
    return _maybe_compress(
        QuantumMap(in_dim=a.in_dim * b.in_dim, out_dim=a.out_dim * b.out_dim, kraus=stack)
    )


def tensor_all(maps: Sequence[QuantumMap]) -> QuantumMap:
    if not maps:
        return identity_map(1)
    return reduce(tensor, maps)


def compose(after: QuantumMap, before: QuantumMap) -> QuantumMap:
    if before.out_dim != after.in_dim:
        raise DimensionMismatch(
            f"cannot compose: inner dims differ ({before.out_dim} vs {after.in_dim})"
        )
    stack = kernels.pair_products(after.kraus, before.kraus)
    return _maybe_compress(QuantumMap(in_dim=before.in_dim, out_dim=after.out_dim, kraus=stack))


def apply_map(m: QuantumMap, rho) -> Matrix:
    mat = as_matrix(rho)
    if mat.shape != (m.in_dim, m.in_dim):
        raise DimensionMismatch(f"state has shape {mat.shape}, map expects {m.in_dim}")
    return kernels.apply_channel(m.kraus, mat)


def choi_distance(a: QuantumMap, b: QuantumMap) -> float:
    if (a.in_dim, a.out_dim) != (b.in_dim, b.out_dim):
        raise DimensionMismatch(
            f"maps have different signatures: {a.in_dim}->{a.out_dim} vs {b.in_dim}->{b.out_dim}"
        )
    return frobenius(a.choi - b.choi)


# ---------------------------------------------------------------- effects and order


@dataclass(frozen=True, eq=False)
class EffectOperator:
    """Hermitian operator E with tr(M(rho)) = tr(E rho) when E comes from a map."""

    dim: int
    matrix: Matrix


def effect_operator(matrix, tol: float | None = None) -> EffectOperator:
    mat = as_matrix(matrix)
    if mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"effect must be square, got {mat.shape}")
    if tol is None:
        tol = max(default_psd_tol(mat.shape[0], max_abs(mat)), 1e-12)
    defect = hermiticity_defect(mat)
    if defect > tol:
        raise NotHermitian(f"effect deviates from Hermitian by {defect:.3e}")
    return EffectOperator(dim=mat.shape[0], matrix=mat)


def effect_of(m: QuantumMap) -> EffectOperator:
    return effect_operator(kernels.effect_sum(m.kraus))


def min_eigenvalue(matrix) -> float:
    mat = as_matrix(matrix)
    herm = (mat + dagger(mat)) / 2.0
    return float(np.linalg.eigvalsh(herm)[0])


def _psd_input(operator_or_matrix) -> Matrix:
    if isinstance(operator_or_matrix, EffectOperator):
        return operator_or_matrix.matrix
    return as_matrix(operator_or_matrix)


def is_psd(operator_or_matrix, tol: float | None = None) -> bool:
    """True iff the Hermitian input has minimum eigenvalue >= -tol."""
    mat = _psd_input(operator_or_matrix)
    if tol is None:
        tol = default_psd_tol(mat.shape[0], max_abs(mat))
    defect = hermiticity_defect(mat)
    if defect > max(tol, 1e-12):
        raise NotHermitian(f"is_psd input deviates from Hermitian by {defect:.3e}")
    return min_eigenvalue(mat) >= -tol


def loewner_geq(a, b, tol: float | None = None) -> bool:
    """a >= b in the Loewner order, i.e. a - b is positive semidefinite."""
    return is_psd(_psd_input(a) - _psd_input(b), tol)


@dataclass(frozen=True)
class CptniVerdict:
    cp: bool
    tni: bool
    min_choi_eig: float
    min_tni_eig: float


def is_cptni(
    m,
    tol: float | None = None,
    *,
    in_dim: int | None = None,
    out_dim: int | None = None,
) -> CptniVerdict:
    """Check complete positivity (Choi PSD) and trace non-increase (effect <= I).

    Accepts a QuantumMap or a raw Choi matrix (then in_dim/out_dim are required).
    """
    if isinstance(m, QuantumMap):
        choi = m.choi
        effect = kernels.effect_sum(m.kraus)
    else:
        mat = as_matrix(m)
        if in_dim is None or out_dim is None:
            raise DimensionMismatch("raw Choi input needs explicit in_dim and out_dim")
        if mat.shape[0] != mat.shape[1] or mat.shape[0] != in_dim * out_dim:
            raise DimensionMismatch(
                f"Choi of shape {mat.shape} does not match in_dim*out_dim = {in_dim * out_dim}"
            )
        choi = mat
        # Partial trace of the Choi over the output factor gives the transposed effect.
        effect = np.einsum("abcb->ac", choi.reshape(in_dim, out_dim, in_dim, out_dim)).T
    if tol is None:
        tol = max(default_psd_tol(choi.shape[0], max_abs(choi)), 1e-12)
    min_choi = min_eigenvalue(choi)
    eye = np.eye(effect.shape[0], dtype=np.complex128)
    min_tni = min_eigenvalue(eye - effect)
    return CptniVerdict(
        cp=min_choi >= -tol,
        tni=min_tni >= -tol,
        min_choi_eig=min_choi,
        min_tni_eig=min_tni,
    )


# ---------------------------------------------------------------- factor shuffling


def _axes(frm: FactorLayout, to: FactorLayout) -> list:
    if not frm.is_permutation_of(to):
        raise LayoutMismatch(f"layouts are not permutations of each other: {frm} vs {to}")
    return [frm.index_of(fid) for fid in to.ids]


def permute_matrix_factors(mat: Matrix, frm: FactorLayout, to: FactorLayout) -> Matrix:
    """Reorder the tensor factors of an operator (conjugation by the permutation unitary)."""
    mat = as_matrix(mat)
    if mat.shape != (frm.total_dim, frm.total_dim):
        raise DimensionMismatch(f"matrix shape {mat.shape} does not match layout {frm.total_dim}")
    axes = _axes(frm, to)
    n = len(axes)
    if n == 0:
        return mat
    dims = frm.dims
    t = mat.reshape(dims + dims)
    t = np.transpose(t, axes + [a + n for a in axes])
    return np.ascontiguousarray(t.reshape(mat.shape))


def relayout_kraus(
    stack: np.ndarray,
    out_from: FactorLayout,
    out_to: FactorLayout,
    in_from: FactorLayout,
    in_to: FactorLayout,
) -> np.ndarray:
    """Reorder input and output factors of every Kraus operator in a stack."""
    out_axes = _axes(out_from, out_to)
    in_axes = _axes(in_from, in_to)
    k = stack.shape[0]
    t = stack.reshape((k,) + out_from.dims + in_from.dims)
    n_out = len(out_axes)
    t = np.transpose(
        t, [0] + [1 + a for a in out_axes] + [1 + n_out + a for a in in_axes]
    )
    return np.ascontiguousarray(t.reshape(stack.shape))


def permute_map_factors(
    m: QuantumMap,
    in_from: FactorLayout,
    in_to: FactorLayout,
    out_from: FactorLayout,
    out_to: FactorLayout,
) -> QuantumMap:
    if in_from.total_dim != m.in_dim or out_from.total_dim != m.out_dim:
        raise DimensionMismatch("layouts do not match the map's dimensions")
    stack = relayout_kraus(m.kraus, out_from, out_to, in_from, in_to)
    return QuantumMap(in_dim=m.in_dim, out_dim=m.out_dim, kraus=stack)


def permute_factors(obj, frm, to):
    """Factor permutation for a matrix, or for a map given (in, out) layout pairs."""
    if isinstance(obj, QuantumMap):
        (in_from, out_from), (in_to, out_to) = frm, to
        return permute_map_factors(obj, in_from, in_to, out_from, out_to)
    return permute_matrix_factors(obj, frm, to)


def partial_trace(mat, lay: FactorLayout, keep) -> Matrix:
    """Trace out the factors of `lay` not listed in `keep` (order of `lay` preserved)."""
    mat = as_matrix(mat)
    if mat.shape != (lay.total_dim, lay.total_dim):
        raise DimensionMismatch(f"matrix shape {mat.shape} does not match layout {lay.total_dim}")
    keep = set(keep)
    ids = set(lay.ids)
    for fid in keep:
        if fid not in ids:
            raise UnknownFactor(f"factor {fid!r} not in layout")
    keep_idx = [i for i, (fid, _) in enumerate(lay.factors) if fid in keep]
    drop_idx = [i for i, (fid, _) in enumerate(lay.factors) if fid not in keep]
    dims = lay.dims
    n = len(dims)
    keep_dim = int(np.prod([dims[i] for i in keep_idx], dtype=np.int64)) if keep_idx else 1
    drop_dim = int(np.prod([dims[i] for i in drop_idx], dtype=np.int64)) if drop_idx else 1
    t = mat.reshape(dims + dims)
    order = keep_idx + drop_idx
    t = np.transpose(t, order + [n + i for i in order])
    t = t.reshape(keep_dim, drop_dim, keep_dim, drop_dim)
    return np.ascontiguousarray(np.einsum("abcb->ac", t))


def identity_matrix(dim: int) -> Matrix:
    return np.eye(dim, dtype=np.complex128)


def kron_all(mats: Sequence[Matrix]) -> Matrix:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = kernels.kron(out, m)
    return out
