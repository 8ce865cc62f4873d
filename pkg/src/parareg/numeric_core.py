"""Dense numeric kernel: extended reals, symmetric bilinear maps, tolerances.

Vectors and matrices are plain numpy arrays (float64, 1-D and 2-D); this
module adds the few value types the rest of the package shares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndeterminateSum

__all__ = [
    "ExtReal",
    "POS_INF",
    "NEG_INF",
    "extreal_add",
    "BilinearMap",
    "apply_bilinear",
    "TolerancePolicy",
    "DEFAULT_TOLS",
    "as_vector",
    "as_matrix",
    "scaled_tol",
]


@dataclass(frozen=True)
class ExtReal:
    """Extended real number with a tagged representation.

    ``tag`` is one of ``finite``, ``pos_inf``, ``neg_inf``; the stored
    ``value`` is meaningful only for the finite tag and is never an IEEE
    infinity, which keeps equality decidable.  Ordering is total:
    neg_inf < any finite < pos_inf.
    """

    tag: str
    value: float = 0.0

    def __post_init__(self):
        if self.tag not in ("finite", "pos_inf", "neg_inf"):
            raise ValueError(f"bad ExtReal tag {self.tag!r}")
        if self.tag == "finite" and not np.isfinite(self.value):
            raise ValueError("finite ExtReal requires a finite value")
        if self.tag != "finite" and self.value != 0.0:
            object.__setattr__(self, "value", 0.0)

    @staticmethod
    def finite(v: float) -> "ExtReal":
        return ExtReal("finite", float(v))

    @staticmethod
    def from_float(v: float) -> "ExtReal":
        """Convert a float that may be an IEEE infinity."""
        if np.isposinf(v):
            return POS_INF
        if np.isneginf(v):
            return NEG_INF
        return ExtReal.finite(v)

    @property
    def is_finite(self) -> bool:
        return self.tag == "finite"

    @property
    def is_pos_inf(self) -> bool:
        return self.tag == "pos_inf"

    @property
    def is_neg_inf(self) -> bool:
        return self.tag == "neg_inf"

    def as_float(self) -> float:
        """Value as a float, mapping the infinite tags to IEEE infinities."""
        if self.tag == "pos_inf":
            return float("inf")
        if self.tag == "neg_inf":
            return float("-inf")
        return self.value

    def _rank(self) -> int:
        return {"neg_inf": -1, "finite": 0, "pos_inf": 1}[self.tag]

    def __lt__(self, other: "ExtReal") -> bool:
        if self.tag == "finite" and other.tag == "finite":
            return self.value < other.value
        return self._rank() < other._rank()

    def __le__(self, other: "ExtReal") -> bool:
        return self == other or self < other

    def __gt__(self, other: "ExtReal") -> bool:
        return other < self

    def __ge__(self, other: "ExtReal") -> bool:
        return other <= self

    def __add__(self, other: "ExtReal") -> "ExtReal":
        return extreal_add(self, other)

    def __neg__(self) -> "ExtReal":
        if self.tag == "pos_inf":
            return NEG_INF
        if self.tag == "neg_inf":
            return POS_INF
        return ExtReal.finite(-self.value)

    def __repr__(self) -> str:
        if self.tag == "pos_inf":
            return "ExtReal(+inf)"
        if self.tag == "neg_inf":
            return "ExtReal(-inf)"
        return f"ExtReal({self.value!r})"


POS_INF = ExtReal("pos_inf")
NEG_INF = ExtReal("neg_inf")


def extreal_add(a: ExtReal, b: ExtReal) -> ExtReal:
    """Extended-real sum; raises IndeterminateSum on (+inf) + (-inf)."""
    if a.is_finite and b.is_finite:
        return ExtReal.finite(a.value + b.value)
    if (a.is_pos_inf and b.is_neg_inf) or (a.is_neg_inf and b.is_pos_inf):
        raise IndeterminateSum("(+inf) + (-inf) is indeterminate")
    if a.is_pos_inf or b.is_pos_inf:
        return POS_INF
    return NEG_INF


def as_vector(x, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"expected length {n}, got {v.shape[0]}")
    return v


def as_matrix(a, shape: tuple[int, int] | None = None) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    if shape is not None and m.shape != shape:
        raise DimensionMismatch(f"expected shape {shape}, got {m.shape}")
    return m


# Relative symmetry slack for the per-coordinate Hessian blocks.
SYM_TOL = 1e-10


@dataclass(frozen=True)
class BilinearMap:
    """Symmetric bilinear map R^n x R^n -> R^m as an (m, n, n) array.

    Block i is the symmetric matrix of output coordinate i; symmetry is
    checked at construction to within SYM_TOL * ||H_i||.
    """

    blocks: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.blocks, dtype=float)
        if h.ndim != 3 or h.shape[1] != h.shape[2]:
            raise DimensionMismatch(f"expected (m, n, n) blocks, got {h.shape}")
        for i in range(h.shape[0]):
            hi = h[i]
            scale = np.linalg.norm(hi)
            if np.linalg.norm(hi - hi.T) > SYM_TOL * max(scale, 1.0):
                raise ValueError(f"block {i} is not symmetric")
        object.__setattr__(self, "blocks", h)

    @property
    def m(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[1]


def apply_bilinear(h: BilinearMap | np.ndarray, w, v) -> np.ndarray:
    """Evaluate the m-vector of quadratic forms (<H_1 w, v>, ..., <H_m w, v>)."""
    blocks = h.blocks if isinstance(h, BilinearMap) else np.asarray(h, dtype=float)
    n = blocks.shape[1]
    wv = as_vector(w, n)
    vv = as_vector(v, n)
    return np.einsum("kij,i,j->k", blocks, wv, vv)


@dataclass(frozen=True)
class TolerancePolicy:
    """Global comparison tolerances; all strictly positive.

    Comparisons against cones/sets use an absolute tolerance scaled by
    (1 + ||input||) so behaviour is uniform near zero and at large
    magnitudes.
    """

    eq_tol: float = 1e-9
    cone_tol: float = 1e-8
    oracle_tol: float = 1e-3
    lp_tol: float = 1e-9

    def __post_init__(self):
        for name in ("eq_tol", "cone_tol", "oracle_tol", "lp_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOLS = TolerancePolicy()


def scaled_tol(base: float, *vectors) -> float:
    """Absolute tolerance base * (1 + max input norm)."""
    scale = 1.0
    for v in vectors:
        if v is None:
            continue
        a = np.asarray(v, dtype=float)
        if a.size:
            scale = max(scale, 1.0 + float(np.linalg.norm(a.ravel())))
    return base * scale
