"""Degenerate U-statistics and companion statistics, fast forms plus oracles.

Every fast evaluator here reduces a quadruple-sum U-statistic to O(n^2) (or
O(d) / O(n) for count data) arithmetic on cached Gram matrices or category
counts, and each one is certified in the test suite against a literal
brute-force enumeration (`two_sample_u_naive`, `independence_u_naive`).

Permutations act by index relabeling on cached values; kernels are never
re-evaluated per relabeling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .kernels import GramMatrix, KernelSpec, eval as kernel_eval

__all__ = [
    "Categorical",
    "Continuous",
    "TwoSamplePooled",
    "PairedSample",
    "PoissonCounts",
    "NAIVE_TWO_SAMPLE_LIMIT",
    "NAIVE_INDEPENDENCE_LIMIT",
    "two_sample_u",
    "two_sample_u_many",
    "two_sample_u_naive",
    "multinomial_two_sample_u",
    "independence_u",
    "independence_u_many",
    "independence_u_naive",
    "multinomial_independence_u",
    "poisson_chisq",
    "linear_stat",
    "linear_stat_many",
]

NAIVE_TWO_SAMPLE_LIMIT = 30
NAIVE_INDEPENDENCE_LIMIT = 10


@dataclass(frozen=True)
class Categorical:
    """Discrete domain {0, ..., d-1}."""

    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")


@dataclass(frozen=True)
class Continuous:
    """Real domain of a fixed dimension."""

    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _validate_domain(values: np.ndarray, domain: Categorical | Continuous, name: str) -> np.ndarray:
    if isinstance(domain, Categorical):
        arr = np.asarray(values)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name}: categorical data must be integer")
        if arr.ndim != 1:
            raise ValueError(f"{name}: categorical data must be 1-D")
        if arr.size and (arr.min() < 0 or arr.max() >= domain.d):
            raise ValueError(f"{name}: category out of range [0, {domain.d})")
        return arr
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != domain.dim:
        raise ValueError(f"{name}: expected points of dimension {domain.dim}")
    return arr


@dataclass(frozen=True)
class TwoSamplePooled:
    """Labeled pooled two-sample data: n1 Y-observations then n2 Z-observations."""

    y: np.ndarray
    z: np.ndarray
    domain: Categorical | Continuous

    def __post_init__(self) -> None:
        y = _validate_domain(self.y, self.domain, "y")
        z = _validate_domain(self.z, self.domain, "z")
        if len(y) < 2 or len(z) < 2:
            raise ValueError("two-sample data needs n1 >= 2 and n2 >= 2")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n1(self) -> int:
        return int(len(self.y))

    @property
    def n2(self) -> int:
        return int(len(self.z))

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def pooled(self) -> np.ndarray:
        return np.concatenate([self.y, self.z])


@dataclass(frozen=True)
class PairedSample:
    """n paired observations (y_i, z_i) for independence testing."""

    y: np.ndarray
    z: np.ndarray
    y_domain: Categorical | Continuous
    z_domain: Categorical | Continuous

    def __post_init__(self) -> None:
        y = _validate_domain(self.y, self.y_domain, "y")
        z = _validate_domain(self.z, self.z_domain, "z")
        if len(y) != len(z):
            raise ValueError("paired sample requires equal-length y and z")
        if len(y) < 4:
            raise ValueError("independence testing needs n >= 4")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return int(len(self.y))


@dataclass(frozen=True)
class PoissonCounts:
    """Per-category Poisson counts for two equal-size groups.

    ``v`` and ``w`` are the length-d group totals.  ``y_individual`` and
    ``z_individual`` are the optional n x d per-individual count matrices;
    they are required for permuted evaluation and must column-sum to ``v``
    and ``w``.  Unequal group sizes are rejected.
    """

    v: np.ndarray
    w: np.ndarray
    y_individual: np.ndarray | None = None
    z_individual: np.ndarray | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.v, dtype=np.int64)
        w = np.asarray(self.w, dtype=np.int64)
        if v.ndim != 1 or w.shape != v.shape:
            raise ValueError("v and w must be equal-length 1-D count vectors")
        if np.any(v < 0) or np.any(w < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        if (self.y_individual is None) != (self.z_individual is None):
            raise ValueError("per-individual matrices must be given for both groups")
        if self.y_individual is not None:
            ym = np.asarray(self.y_individual, dtype=np.int64)
            zm = np.asarray(self.z_individual, dtype=np.int64)
            if ym.ndim != 2 or zm.ndim != 2 or ym.shape[1] != v.size or zm.shape[1] != v.size:
                raise ValueError("per-individual matrices must be n x d")
            if ym.shape[0] != zm.shape[0]:
                raise ValueError("the Poisson chi-square statistic requires equal group sizes")
            if not np.array_equal(ym.sum(axis=0), v) or not np.array_equal(zm.sum(axis=0), w):
                raise ValueError("per-individual matrices must column-sum to v and w")
            object.__setattr__(self, "y_individual", ym)
            object.__setattr__(self, "z_individual", zm)

    @classmethod
    def from_individuals(cls, y_individual, z_individual) -> "PoissonCounts":
        ym = np.asarray(y_individual, dtype=np.int64)
        zm = np.asarray(z_individual, dtype=np.int64)
        return cls(
            v=ym.sum(axis=0),
            w=zm.sum(axis=0),
            y_individual=ym,
            z_individual=zm,
        )

    @property
    def d(self) -> int:
        return int(self.v.size)

    @property
    def group_size(self) -> int:
        if self.y_individual is None:
            raise ValueError("per-individual matrices are not present")
        return int(self.y_individual.shape[0])


def _identity_if_none(labeling, n: int) -> np.ndarray:
    if labeling is None:
        return np.arange(n, dtype=np.intp)
    perm = np.asarray(labeling, dtype=np.intp)
    if perm.shape != (n,):
        raise ValueError(f"labeling must have length {n}")
    return perm


def two_sample_u(
    gram: GramMatrix, n1: int, n2: int, labeling: np.ndarray | None = None
) -> float:
    """Two-sample U-statistic from a pooled Gram matrix, O(n^2).

    Equals the quadruple sum over the four-term kernel by expansion:
    within-group ordered-pair averages minus twice the cross-group average.
    """
    if n1 < 2 or n2 < 2:
        raise ValueError("two_sample_u requires n1 >= 2 and n2 >= 2")
    n = n1 + n2
    if gram.n != n:
        raise ValueError(f"gram covers {gram.n} points, expected {n}")
    if not gram.diagonal_zeroed:
        raise ValueError("two_sample_u requires a zero-diagonal Gram matrix")
    perm = _identity_if_none(labeling, n)
    g = gram.values
    idx1 = perm[:n1]
    idx2 = perm[n1:]
    within1 = float(g[np.ix_(idx1, idx1)].sum())
    within2 = float(g[np.ix_(idx2, idx2)].sum())
    total = float(g.sum())
    cross = 0.5 * (total - within1 - within2)
    return (
        within1 / (n1 * (n1 - 1))
        + within2 / (n2 * (n2 - 1))
        - 2.0 * cross / (n1 * n2)
    )


def two_sample_u_many(
    gram: GramMatrix, n1: int, n2: int, labelings: np.ndarray
) -> np.ndarray:
    """Vectorized `two_sample_u` over a stack of labelings (rows)."""
    if n1 < 2 or n2 < 2:
        raise ValueError("two_sample_u requires n1 >= 2 and n2 >= 2")
    n = n1 + n2
    if gram.n != n or not gram.diagonal_zeroed:
        raise ValueError("gram must be zero-diagonal over n1 + n2 points")
    perms = np.asarray(labelings, dtype=np.intp)
    if perms.ndim != 2 or perms.shape[1] != n:
        raise ValueError("labelings must be (m, n)")
    g = gram.values
    total = float(g.sum())
    m = perms.shape[0]
    out = np.empty(m, dtype=float)
    # membership-mask quadratic forms: chunked so memory stays ~ chunk * n
    chunk = max(1, int(2e7) // max(n * n, 1))
    for start in range(0, m, chunk):
        block = perms[start : start + chunk]
        mask1 = np.zeros((block.shape[0], n), dtype=float)
        np.put_along_axis(mask1, block[:, :n1], 1.0, axis=1)
        p = mask1 @ g
        within1 = np.einsum("ij,ij->i", p, mask1)
        cross = p.sum(axis=1) - within1
        within2 = total - 2.0 * cross - within1
        out[start : start + chunk] = (
            within1 / (n1 * (n1 - 1))
            + within2 / (n2 * (n2 - 1))
            - 2.0 * cross / (n1 * n2)
        )
    return out


def two_sample_u_naive(
    y, z, kernel: KernelSpec, labeling: np.ndarray | None = None
) -> float:
    """Literal quadruple sum over the four-term two-sample kernel.

    Oracle-scale only (pooled size capped); used to certify the fast forms.
    """
    y_arr = np.asarray(y)
    z_arr = np.asarray(z)
    n1, n2 = len(y_arr), len(z_arr)
    n = n1 + n2
    if n > NAIVE_TWO_SAMPLE_LIMIT:
        raise ValueError(f"naive oracle refuses pooled size {n} > {NAIVE_TWO_SAMPLE_LIMIT}")
    if n1 < 2 or n2 < 2:
        raise ValueError("two_sample_u_naive requires n1 >= 2 and n2 >= 2")
    pooled = np.concatenate([y_arr, z_arr])
    perm = _identity_if_none(labeling, n)
    ys = [pooled[perm[i]] for i in range(n1)]
    zs = [pooled[perm[n1 + j]] for j in range(n2)]
    terms = []
    for i1 in range(n1):
        for i2 in range(n1):
            if i1 == i2:
                continue
            for j1 in range(n2):
                for j2 in range(n2):
                    if j1 == j2:
                        continue
                    terms.append(
                        kernel_eval(kernel, ys[i1], ys[i2])
                        + kernel_eval(kernel, zs[j1], zs[j2])
                        - kernel_eval(kernel, ys[i1], zs[j2])
                        - kernel_eval(kernel, ys[i2], zs[j1])
                    )
    denom = n1 * (n1 - 1) * n2 * (n2 - 1)
    return math.fsum(terms) / denom


def multinomial_two_sample_u(
    counts_y, counts_z, weights: np.ndarray | None = None
) -> float:
    """O(d) two-sample U-statistic from per-category counts.

    Unweighted (weights None) this is the unbiased estimator of the squared
    l2 distance between the two category distributions; with flattening
    weights each category is scaled by 1/w_k.
    """
    cy = np.asarray(counts_y, dtype=float)
    cz = np.asarray(counts_z, dtype=float)
    if cy.shape != cz.shape or cy.ndim != 1:
        raise ValueError("count vectors must be 1-D with matching length")
    n1 = float(cy.sum())
    n2 = float(cz.sum())
    if n1 < 2 or n2 < 2:
        raise ValueError("multinomial_two_sample_u requires n1 >= 2 and n2 >= 2")
    inv_w = 1.0 if weights is None else 1.0 / np.asarray(weights, dtype=float)
    per_cat = (
        cy * (cy - 1.0) / (n1 * (n1 - 1.0))
        + cz * (cz - 1.0) / (n2 * (n2 - 1.0))
        - 2.0 * cy * cz / (n1 * n2)
    )
    return float(np.sum(inv_w * per_cat))


def _indep_pieces(gram_y: GramMatrix, gram_z: GramMatrix) -> tuple:
    if gram_y.n != gram_z.n:
        raise ValueError("gram matrices must cover the same n points")
    if not (gram_y.diagonal_zeroed and gram_z.diagonal_zeroed):
        raise ValueError("independence_u requires zero-diagonal Gram matrices")
    n = gram_y.n
    if n < 4:
        raise ValueError("independence_u requires n >= 4")
    ky = gram_y.values
    kz = gram_z.values
    row_y = ky.sum(axis=1)
    row_z = kz.sum(axis=1)
    return n, ky, kz, row_y, row_z, float(row_y.sum()), float(row_z.sum())


def _indep_from_sums(n: int, s1: float, r: float, ty: float, tz: float) -> float:
    # Closed form for the fourth-order product-kernel U-statistic.  The 16
    # expansion terms split by index overlap of the two kernel pairs:
    # identical pair (4 terms, +, weight (n-2)(n-3)), one shared index
    # (8 terms, -, weight (n-3), pair sum S2 = R - S1), disjoint (4 terms, +,
    # pair sum S3 = Ty*Tz - 2*S1 - 4*S2), which collapses to the line below.
    n4 = n * (n - 1) * (n - 2) * (n - 3)
    return (4.0 * (n - 1) * (n - 2) * s1 - 8.0 * (n - 1) * r + 4.0 * ty * tz) / n4


def independence_u(
    gram_y: GramMatrix, gram_z: GramMatrix, z_relabeling: np.ndarray | None = None
) -> float:
    """Fourth-order product-kernel U-statistic in O(n^2).

    ``z_relabeling`` pairs y_i with z_{perm[i]}.  Certified against
    `independence_u_naive` in the test suite.
    """
    n, ky, kz, row_y, row_z, ty, tz = _indep_pieces(gram_y, gram_z)
    perm = _identity_if_none(z_relabeling, n)
    kz_p = kz[np.ix_(perm, perm)]
    s1 = float((ky * kz_p).sum())
    r = float(row_y @ row_z[perm])
    return _indep_from_sums(n, s1, r, ty, tz)


def independence_u_many(
    gram_y: GramMatrix, gram_z: GramMatrix, z_relabelings: np.ndarray
) -> np.ndarray:
    """Vectorized `independence_u` over a stack of z-relabelings (rows)."""
    n, ky, kz, row_y, row_z, ty, tz = _indep_pieces(gram_y, gram_z)
    perms = np.asarray(z_relabelings, dtype=np.intp)
    if perms.ndim != 2 or perms.shape[1] != n:
        raise ValueError("z_relabelings must be (m, n)")
    m = perms.shape[0]
    out = np.empty(m, dtype=float)
    chunk = max(1, int(2e7) // max(n * n, 1))
    for start in range(0, m, chunk):
        block = perms[start : start + chunk]
        kz_p = kz[block[:, :, None], block[:, None, :]]
        s1 = (ky * kz_p).sum(axis=(1, 2))
        r = (row_y * row_z[block]).sum(axis=1)
        n4 = n * (n - 1) * (n - 2) * (n - 3)
        out[start : start + chunk] = (
            4.0 * (n - 1) * (n - 2) * s1 - 8.0 * (n - 1) * r + 4.0 * ty * tz
        ) / n4
    return out


def independence_u_naive(
    y_points,
    z_points,
    kernel_y: KernelSpec,
    kernel_z: KernelSpec,
    z_relabeling: np.ndarray | None = None,
) -> float:
    """Literal sum of the product kernel over all distinct index 4-tuples."""
    y_arr = np.asarray(y_points)
    z_arr = np.asarray(z_points)
    n = len(y_arr)
    if len(z_arr) != n:
        raise ValueError("paired data must have equal lengths")
    if n > NAIVE_INDEPENDENCE_LIMIT:
        raise ValueError(f"naive oracle refuses n {n} > {NAIVE_INDEPENDENCE_LIMIT}")
    if n < 4:
        raise ValueError("independence_u_naive requires n >= 4")
    perm = _identity_if_none(z_relabeling, n)
    gy = np.array(
        [[kernel_eval(kernel_y, y_arr[i], y_arr[j]) for j in range(n)] for i in range(n)]
    )
    gz_raw = np.array(
        [[kernel_eval(kernel_z, z_arr[i], z_arr[j]) for j in range(n)] for i in range(n)]
    )
    gz = gz_raw[np.ix_(perm, perm)]
    terms = []
    for i1, i2, i3, i4 in itertools.permutations(range(n), 4):
        hy = gy[i1, i2] + gy[i3, i4] - gy[i1, i3] - gy[i2, i4]
        hz = gz[i1, i2] + gz[i3, i4] - gz[i1, i3] - gz[i2, i4]
        terms.append(hy * hz)
    n4 = n * (n - 1) * (n - 2) * (n - 3)
    return math.fsum(terms) / n4


def multinomial_independence_u(
    y, z, d1: int, d2: int, z_relabeling: np.ndarray | None = None
) -> float:
    """Count-based O(n + d1*d2) form of `independence_u` for indicator kernels."""
    y_arr = np.asarray(y, dtype=np.intp)
    z_arr = np.asarray(z, dtype=np.intp)
    n = y_arr.size
    if z_arr.size != n:
        raise ValueError("paired data must have equal lengths")
    if n < 4:
        raise ValueError("independence U-statistic requires n >= 4")
    perm = _identity_if_none(z_relabeling, n)
    zp = z_arr[perm]
    cy = np.bincount(y_arr, minlength=d1).astype(float)
    cz = np.bincount(z_arr, minlength=d2).astype(float)
    joint = np.bincount(y_arr * d2 + zp, minlength=d1 * d2).astype(float)
    s1 = float((joint * joint).sum()) - n
    r = float(((cy[y_arr] - 1.0) * (cz[zp] - 1.0)).sum())
    ty = float((cy * cy).sum()) - n
    tz = float((cz * cz).sum()) - n
    return _indep_from_sums(n, s1, r, ty, tz)


def poisson_chisq(
    counts: PoissonCounts, relabeling: np.ndarray | None = None
) -> float:
    """Centered chi-square statistic, optionally under individual relabeling.

    sum_k [(Delta_k^2 - V_k - W_k) / (V_k + W_k)] over categories with a
    positive pooled total, where Delta_k is the difference of the two group
    sums after relabeling the 2n individuals.  The pooled totals V_k + W_k
    are relabeling-invariant.
    """
    totals = (counts.v + counts.w).astype(float)
    if relabeling is None:
        delta = (counts.v - counts.w).astype(float)
    else:
        if counts.y_individual is None:
            raise ValueError("permuted evaluation requires per-individual matrices")
        pooled = np.vstack([counts.y_individual, counts.z_individual])
        n = counts.group_size
        perm = _identity_if_none(relabeling, 2 * n)
        first = pooled[perm[:n]].sum(axis=0).astype(float)
        delta = 2.0 * first - totals
    mask = totals > 0
    if not np.any(mask):
        return 0.0
    contrib = (delta[mask] ** 2 - totals[mask]) / totals[mask]
    return float(contrib.sum())


def linear_stat(y, z, relabeling: np.ndarray | None = None) -> float:
    """Permuted sample covariance (1/n) sum_i (y_i - ybar)(z_{perm_i} - zbar)."""
    y_arr = np.asarray(y, dtype=float)
    z_arr = np.asarray(z, dtype=float)
    n = y_arr.size
    if z_arr.size != n:
        raise ValueError("y and z must have equal lengths")
    if n < 2:
        raise ValueError("linear_stat requires n >= 2")
    perm = _identity_if_none(relabeling, n)
    a = y_arr - y_arr.mean()
    b = z_arr - z_arr.mean()
    return float(a @ b[perm]) / n


def linear_stat_many(y, z, relabelings: np.ndarray) -> np.ndarray:
    """Vectorized `linear_stat` over a stack of relabelings (rows)."""
    y_arr = np.asarray(y, dtype=float)
    z_arr = np.asarray(z, dtype=float)
    n = y_arr.size
    perms = np.asarray(relabelings, dtype=np.intp)
    if perms.ndim != 2 or perms.shape[1] != n:
        raise ValueError("relabelings must be (m, n)")
    a = y_arr - y_arr.mean()
    b = z_arr - z_arr.mean()
    return (b[perms] @ a) / n
