"""Runtime knobs: dimension caps, Kraus compression, tolerance defaults.

Environment variables:
  QPN_MAX_DIM     overrides the total tensor-dimension cap (default 4096).
  QPN_PURE_NUMPY  any of 1/true/yes/on forces the pure-numpy kernel path.
"""

from __future__ import annotations

import os

DEFAULT_DIM_CAP = 4096

# Kraus sets larger than this are compressed through the Choi matrix,
# provided the Choi side stays affordable.
KRAUS_CAP = 64
COMPRESS_DIM_CAP = 4096

DEFAULT_STATE_CAP = 10_000
DEFAULT_DROP_TOL = 1e-8


def dim_cap() -> int:
    """Total tensor-dimension cap, overridable via QPN_MAX_DIM."""
    raw = os.environ.get("QPN_MAX_DIM", "").strip()
    if not raw:
        return DEFAULT_DIM_CAP
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"QPN_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"QPN_MAX_DIM must be >= 1, got {value}")
    return value


def pure_numpy_requested() -> bool:
    return os.environ.get("QPN_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes", "on"}


def default_psd_tol(dim: int, max_abs_entry: float) -> float:
    """Eigenvalue noise grows with dimension and magnitude; scale tolerance with both."""
    return 1e-9 * dim * max_abs_entry
