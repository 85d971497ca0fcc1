"""Named permutation test procedures.

Each procedure wires a statistic (count-based or Gram-based), optional
binning or sample splitting, and a :class:`~permkit.perm_core.PermutationPlan`
into a finished decision.  Statistic evaluators are pure functions of
``(data, permutation)`` and provide vectorized batch evaluation so Monte
Carlo and exact enumeration both run on index arrays, never re-touching
kernels.

Binned procedures discretize ``[0, 1]^dim`` with equal cells, count of cells
per axis chosen from the smoothness-driven rules ``two_sample_bin_count``
and ``independence_bin_count``.  Adaptive procedures sweep a dyadic grid of
cell counts and Bonferroni-split the level across it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import perm_core
from .kernels import Gaussian, gram, product_weights, split_weights
from .perm_core import PermutationPlan, TestOutcome, split_seed
from .ustats import (
    Categorical,
    Continuous,
    PairedSample,
    PoissonCounts,
    TwoSamplePooled,
    independence_u,
    independence_u_many,
    two_sample_u,
    two_sample_u_many,
)

__all__ = [
    "BinGrid",
    "AdaptiveGrid",
    "AdaptiveOutcome",
    "SmoothnessRule",
    "bin_data",
    "two_sample_bin_count",
    "independence_bin_count",
    "adaptive_grid_two_sample",
    "adaptive_grid_independence",
    "mmd_bandwidths",
    "hsic_bandwidths",
    "binned_two_sample",
    "binned_independence",
    "multinomial_l2_two_sample",
    "multinomial_l2_independence",
    "holder_two_sample",
    "holder_independence",
    "adaptive_two_sample",
    "adaptive_independence",
    "l1_split_two_sample",
    "l1_split_independence",
    "mmd_test",
    "hsic_test",
    "poisson_chisq_test",
]

GRID_CELL_CAP = 10**6  # adaptive grids drop kappa values beyond this many cells


@dataclass(frozen=True)
class BinGrid:
    """Equal-cell partition of [0, 1]^dim with ``kappa`` bins per axis."""

    kappa: int
    dim: int

    def __post_init__(self) -> None:
        if self.kappa < 1 or self.dim < 1:
            raise ValueError("kappa and dim must be positive")
        if self.kappa**self.dim >= 2**62:
            raise ValueError("total cell count is not representable")

    @property
    def cells(self) -> int:
        return self.kappa**self.dim


@dataclass(frozen=True)
class SmoothnessRule:
    """Pick bandwidths from an assumed Holder/Sobolev exponent ``s``."""

    s: float

    def __post_init__(self) -> None:
        if self.s <= 0:
            raise ValueError("smoothness s must be positive")


@dataclass(frozen=True)
class AdaptiveGrid:
    """Dyadic grid of per-axis bin counts with the Bonferroni-split level.

    ``gamma_max`` is the formula value before the cell cap is applied, and
    it is what splits the level; ``kappas`` may be shorter when large bin
    counts were dropped.
    """

    kappas: tuple
    gamma_max: int

    def __post_init__(self) -> None:
        if self.gamma_max < 1:
            raise ValueError("gamma_max must be >= 1")
        ks = tuple(self.kappas)
        if not ks or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("kappas must be non-empty and strictly increasing")

    def per_test_alpha(self, alpha: float) -> float:
        return alpha / self.gamma_max


def bin_data(points, grid: BinGrid) -> np.ndarray:
    """Map points in [0, 1]^dim to 0-based flat cell codes.

    Per-axis index floor(x * kappa) with the right boundary clamped into the
    last cell; axes combined row-major (last axis fastest).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != grid.dim:
        raise ValueError(f"points must be (n, {grid.dim})")
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ValueError("coordinates must lie in [0, 1]")
    axis_idx = np.minimum((pts * grid.kappa).astype(np.int64), grid.kappa - 1)
    flat = np.zeros(pts.shape[0], dtype=np.int64)
    for j in range(grid.dim):
        flat = flat * grid.kappa + axis_idx[:, j]
    return flat


def two_sample_bin_count(n1: int, s: float, d: int) -> int:
    """Bins per axis for the binned two-sample test: floor(n1^{2/(4s+d)}), at least 1."""
    if s <= 0:
        raise ValueError("smoothness s must be positive")
    return max(1, int(math.floor(n1 ** (2.0 / (4.0 * s + d)) + 1e-9)))


def independence_bin_count(n: int, s: float, d_total: int) -> int:
    """Bins per axis for the binned independence test: floor(n^{2/(4s+d1+d2)})."""
    if s <= 0:
        raise ValueError("smoothness s must be positive")
    return max(1, int(math.floor(n ** (2.0 / (4.0 * s + d_total)) + 1e-9)))


def _gamma_max(n: int, d_total: int) -> int:
    # natural log for the inner iterated logarithm
    if n < 3:
        raise ValueError("adaptive grid needs sample size >= 3")
    inner = math.log(math.log(n))
    if inner <= 0:
        raise ValueError("adaptive grid needs log(log(n)) > 0")
    g = math.ceil((2.0 / d_total) * math.log2(n / inner))
    if g < 1:
        raise ValueError("adaptive grid is empty for this sample size")
    return g


def adaptive_grid_two_sample(n1: int, d: int) -> AdaptiveGrid:
    """Dyadic kappa grid for the adaptive two-sample test."""
    g = _gamma_max(n1, d)
    return AdaptiveGrid(kappas=tuple(_capped_kappas(g, d)), gamma_max=g)


def adaptive_grid_independence(n: int, d1: int, d2: int) -> AdaptiveGrid:
    """Dyadic kappa grid for the adaptive independence test."""
    g = _gamma_max(n, d1 + d2)
    return AdaptiveGrid(kappas=tuple(_capped_kappas(g, d1 + d2)), gamma_max=g)


def _capped_kappas(gamma_max: int, dim: int) -> list[int]:
    kappas = []
    for j in range(1, gamma_max + 1):
        kappa = 2**j
        if kappa**dim > GRID_CELL_CAP:
            warnings.warn(
                f"dropping kappa={kappa} from the adaptive grid: "
                f"{kappa}^{dim} cells exceed the {GRID_CELL_CAP} cap",
                RuntimeWarning,
                stacklevel=3,
            )
            continue
        kappas.append(kappa)
    if not kappas:
        raise ValueError("no kappa survives the grid cell cap")
    return kappas


def mmd_bandwidths(n1: int, n2: int, s: float, dim: int) -> np.ndarray:
    """Smoothness-driven Gaussian bandwidths (1/n1 + 1/n2)^{2/(4s+d)} per axis."""
    lam = (1.0 / n1 + 1.0 / n2) ** (2.0 / (4.0 * s + dim))
    return np.full(dim, lam)


def hsic_bandwidths(n: int, s: float, d1: int, d2: int) -> tuple[np.ndarray, np.ndarray]:
    """Smoothness-driven bandwidths n^{-2/(4s+d1+d2)} for both coordinates."""
    lam = float(n) ** (-2.0 / (4.0 * s + d1 + d2))
    return np.full(d1, lam), np.full(d2, lam)


def _compress(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Remap codes to 0..u-1 over the values actually present.

    Categories that never occur contribute zero to every count statistic, so
    dropping them leaves all statistics unchanged while bounding work by n.
    """
    values, compressed = np.unique(codes, return_inverse=True)
    return compressed.astype(np.intp), values


class _CountTwoSampleStat:
    """Two-sample U-statistic on compressed category codes.

    ``data`` is the pooled code array; the permutation assigns the first
    ``n1`` relabeled positions to group one.
    """

    def __init__(self, n1: int, n2: int, n_cats: int, inv_weights: np.ndarray | None = None):
        self.n1 = n1
        self.n2 = n2
        self.n_cats = n_cats
        self.inv_weights = inv_weights

    def _from_counts(self, c1, c2):
        n1, n2 = self.n1, self.n2
        per_cat = (
            c1 * (c1 - 1.0) / (n1 * (n1 - 1.0))
            + c2 * (c2 - 1.0) / (n2 * (n2 - 1.0))
            - 2.0 * c1 * c2 / (n1 * n2)
        )
        if self.inv_weights is not None:
            per_cat = per_cat * self.inv_weights
        return per_cat.sum(axis=-1)

    def __call__(self, codes: np.ndarray, perm: np.ndarray) -> float:
        relabeled = codes[perm]
        c1 = np.bincount(relabeled[: self.n1], minlength=self.n_cats).astype(float)
        c_all = np.bincount(codes, minlength=self.n_cats).astype(float)
        return float(self._from_counts(c1, c_all - c1))

    def evaluate_many(self, codes: np.ndarray, perms: np.ndarray) -> np.ndarray:
        m = perms.shape[0]
        u = self.n_cats
        c_all = np.bincount(codes, minlength=u).astype(float)
        out = np.empty(m, dtype=float)
        chunk = max(1, int(2e7) // max(u, 1))
        for start in range(0, m, chunk):
            block = perms[start : start + chunk]
            rows = block.shape[0]
            g1 = codes[block[:, : self.n1]]
            offsets = (np.arange(rows, dtype=np.int64) * u)[:, None]
            c1 = np.bincount(
                (g1 + offsets).ravel(), minlength=rows * u
            ).reshape(rows, u).astype(float)
            out[start : start + rows] = self._from_counts(c1, c_all - c1)
        return out


class _CountIndependenceStat:
    """Independence U-statistic with indicator kernels on category codes.

    ``data`` is ``(y_codes, z_codes)``; the permutation relabels z only.
    Uses the O(n) count reduction of the closed form (pair-match counts,
    row-sum dot products and invariant totals).
    """

    def __init__(self, u1: int, u2: int):
        self.u1 = u1
        self.u2 = u2

    def _pieces(self, y: np.ndarray, z: np.ndarray):
        cy = np.bincount(y, minlength=self.u1).astype(float)
        cz = np.bincount(z, minlength=self.u2).astype(float)
        n = y.size
        ty = float((cy * cy).sum()) - n
        tz = float((cz * cz).sum()) - n
        return cy, cz, ty, tz

    def __call__(self, data, perm: np.ndarray) -> float:
        y, z = data
        n = y.size
        cy, cz, ty, tz = self._pieces(y, z)
        zp = z[perm]
        joint = np.bincount(y * self.u2 + zp, minlength=self.u1 * self.u2).astype(float)
        s1 = float((joint * joint).sum()) - n
        r = float(((cy[y] - 1.0) * (cz[zp] - 1.0)).sum())
        n4 = n * (n - 1) * (n - 2) * (n - 3)
        return (4.0 * (n - 1) * (n - 2) * s1 - 8.0 * (n - 1) * r + 4.0 * ty * tz) / n4

    def evaluate_many(self, data, perms: np.ndarray) -> np.ndarray:
        y, z = data
        n = y.size
        ncell = self.u1 * self.u2
        cy, cz, ty, tz = self._pieces(y, z)
        ay = cy[y] - 1.0
        bz = cz[z] - 1.0
        m = perms.shape[0]
        out = np.empty(m, dtype=float)
        n4 = n * (n - 1) * (n - 2) * (n - 3)
        chunk = max(1, int(2e7) // max(ncell, 1))
        for start in range(0, m, chunk):
            block = perms[start : start + chunk]
            rows = block.shape[0]
            zp = z[block]
            codes = y[None, :] * self.u2 + zp
            offsets = (np.arange(rows, dtype=np.int64) * ncell)[:, None]
            joint = np.bincount(
                (codes + offsets).ravel(), minlength=rows * ncell
            ).reshape(rows, ncell).astype(float)
            s1 = (joint * joint).sum(axis=1) - n
            r = bz[block] @ ay
            out[start : start + rows] = (
                4.0 * (n - 1) * (n - 2) * s1 - 8.0 * (n - 1) * r + 4.0 * ty * tz
            ) / n4
        return out


class _GramTwoSampleStat:
    """Two-sample U-statistic on a cached pooled Gram matrix."""

    def __init__(self, n1: int, n2: int):
        self.n1 = n1
        self.n2 = n2

    def __call__(self, gram_matrix, perm: np.ndarray) -> float:
        return two_sample_u(gram_matrix, self.n1, self.n2, perm)

    def evaluate_many(self, gram_matrix, perms: np.ndarray) -> np.ndarray:
        return two_sample_u_many(gram_matrix, self.n1, self.n2, perms)


class _GramIndependenceStat:
    """Independence U-statistic on two cached Gram matrices."""

    def __call__(self, grams, perm: np.ndarray) -> float:
        gy, gz = grams
        return independence_u(gy, gz, perm)

    def evaluate_many(self, grams, perms: np.ndarray) -> np.ndarray:
        gy, gz = grams
        return independence_u_many(gy, gz, perms)


class _PoissonChisqStat:
    """Centered chi-square statistic under relabeling of 2n individuals."""

    def __init__(self, group_size: int):
        self.group_size = group_size

    def __call__(self, pooled: np.ndarray, perm: np.ndarray) -> float:
        totals = pooled.sum(axis=0).astype(float)
        first = pooled[perm[: self.group_size]].sum(axis=0).astype(float)
        delta = 2.0 * first - totals
        mask = totals > 0
        if not np.any(mask):
            return 0.0
        return float(((delta[mask] ** 2 - totals[mask]) / totals[mask]).sum())

    def evaluate_many(self, pooled: np.ndarray, perms: np.ndarray) -> np.ndarray:
        totals = pooled.sum(axis=0).astype(float)
        mask = totals > 0
        m = perms.shape[0]
        out = np.empty(m, dtype=float)
        if not np.any(mask):
            out.fill(0.0)
            return out
        d = pooled.shape[1]
        chunk = max(1, int(2e7) // max(self.group_size * d, 1))
        tm = totals[mask]
        for start in range(0, m, chunk):
            block = perms[start : start + chunk]
            first = pooled[block[:, : self.group_size]].sum(axis=1).astype(float)
            delta = 2.0 * first - totals
            out[start : start + block.shape[0]] = (
                (delta[:, mask] ** 2 - tm) / tm
            ).sum(axis=1)
        return out


def _require_categorical(domain, name: str) -> int:
    if not isinstance(domain, Categorical):
        raise ValueError(f"{name} must be categorical for this test")
    return domain.d


def _require_continuous(domain, name: str) -> int:
    if not isinstance(domain, Continuous):
        raise ValueError(f"{name} must be continuous for this test")
    return domain.dim


def multinomial_l2_two_sample(
    data: TwoSamplePooled, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    """Permutation test on the unweighted multinomial two-sample U-statistic."""
    _require_categorical(data.domain, "two-sample data")
    codes, _ = _compress(data.pooled())
    stat = _CountTwoSampleStat(data.n1, data.n2, n_cats=int(codes.max()) + 1)
    return perm_core.run_test(stat, codes, data.n, plan, alpha)


def multinomial_l2_independence(
    data: PairedSample, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    """Permutation test on the multinomial independence U-statistic (z permuted)."""
    _require_categorical(data.y_domain, "y")
    _require_categorical(data.z_domain, "z")
    y_codes, _ = _compress(np.asarray(data.y, dtype=np.int64))
    z_codes, _ = _compress(np.asarray(data.z, dtype=np.int64))
    stat = _CountIndependenceStat(int(y_codes.max()) + 1, int(z_codes.max()) + 1)
    return perm_core.run_test(stat, (y_codes, z_codes), data.n, plan, alpha)


def binned_two_sample(
    data: TwoSamplePooled, kappa: int, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    dim = _require_continuous(data.domain, "two-sample data")
    grid = BinGrid(kappa=kappa, dim=dim)
    binned = TwoSamplePooled(
        y=bin_data(data.y, grid),
        z=bin_data(data.z, grid),
        domain=Categorical(grid.cells),
    )
    return multinomial_l2_two_sample(binned, alpha, plan)


def holder_two_sample(
    data: TwoSamplePooled, s: float, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    """Binned two-sample test with the smoothness-driven cell count."""
    dim = _require_continuous(data.domain, "two-sample data")
    return binned_two_sample(data, two_sample_bin_count(data.n1, s, dim), alpha, plan)


def binned_independence(
    data: PairedSample, kappa: int, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    d1 = _require_continuous(data.y_domain, "y")
    d2 = _require_continuous(data.z_domain, "z")
    gy = BinGrid(kappa=kappa, dim=d1)
    gz = BinGrid(kappa=kappa, dim=d2)
    binned = PairedSample(
        y=bin_data(data.y, gy),
        z=bin_data(data.z, gz),
        y_domain=Categorical(gy.cells),
        z_domain=Categorical(gz.cells),
    )
    return multinomial_l2_independence(binned, alpha, plan)


def holder_independence(
    data: PairedSample, s: float, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    """Binned independence test with the smoothness-driven cell count."""
    d1 = _require_continuous(data.y_domain, "y")
    d2 = _require_continuous(data.z_domain, "z")
    kappa = independence_bin_count(data.n, s, d1 + d2)
    return binned_independence(data, kappa, alpha, plan)


@dataclass(frozen=True)
class AdaptiveOutcome:
    """Decision of a smoothness-adaptive test plus its per-kappa breakdown."""

    reject: bool
    alpha: float
    gamma_max: int
    per_test_alpha: float
    components: tuple[tuple[int, TestOutcome], ...]

    @property
    def p_value(self) -> float:
        """Bonferroni-adjusted p-value: gamma_max * min component p, capped at 1."""
        return min(1.0, self.gamma_max * min(o.p_value for _, o in self.components))


def _component_plan(plan: PermutationPlan, j: int) -> PermutationPlan:
    if plan.mode == "exact":
        return plan
    return plan.reseeded(split_seed(plan.seed, j))


def _warn_if_level_unreachable(level: float, plan: PermutationPlan) -> None:
    # the smallest Monte Carlo p-value is 1/(B+1); below that the components
    # can never reject and the union test is pure type II error
    if plan.mode == "monte_carlo" and level < 1.0 / (plan.replicates + 1):
        warnings.warn(
            f"per-component level {level:.4g} is below 1/(B+1) = "
            f"{1.0 / (plan.replicates + 1):.4g}; components can never reject. "
            "Increase the replicate count.",
            RuntimeWarning,
            stacklevel=3,
        )


def adaptive_two_sample(
    data: TwoSamplePooled, alpha: float, plan: PermutationPlan
) -> AdaptiveOutcome:
    """Union of binned two-sample tests over a dyadic kappa grid.

    Each component runs at level alpha / gamma_max; the union rejects iff
    any component rejects.
    """
    dim = _require_continuous(data.domain, "two-sample data")
    grid = adaptive_grid_two_sample(data.n1, dim)
    level = grid.per_test_alpha(alpha)
    _warn_if_level_unreachable(level, plan)
    components = []
    for j, kappa in enumerate(grid.kappas):
        outcome = binned_two_sample(data, kappa, level, _component_plan(plan, j))
        components.append((kappa, outcome))
    return AdaptiveOutcome(
        reject=any(o.reject for _, o in components),
        alpha=alpha,
        gamma_max=grid.gamma_max,
        per_test_alpha=level,
        components=tuple(components),
    )


def adaptive_independence(
    data: PairedSample, alpha: float, plan: PermutationPlan
) -> AdaptiveOutcome:
    """Union of binned independence tests over a dyadic kappa grid."""
    d1 = _require_continuous(data.y_domain, "y")
    d2 = _require_continuous(data.z_domain, "z")
    grid = adaptive_grid_independence(data.n, d1, d2)
    level = grid.per_test_alpha(alpha)
    _warn_if_level_unreachable(level, plan)
    components = []
    for j, kappa in enumerate(grid.kappas):
        outcome = binned_independence(data, kappa, level, _component_plan(plan, j))
        components.append((kappa, outcome))
    return AdaptiveOutcome(
        reject=any(o.reject for _, o in components),
        alpha=alpha,
        gamma_max=grid.gamma_max,
        per_test_alpha=level,
        components=tuple(components),
    )


def l1_split_two_sample(
    data: TwoSamplePooled, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    """Sample-splitting two-sample test with data-driven flattening weights.

    The groups carry 2*n1 and 2*n2 observations.  Weights come from the
    trailing min(n2, d) block of the larger group; the weighted U-statistic
    uses the leading n1 observations of each group and permutations stay
    inside those 2*n1 points.  Input order is semantically meaningful: no
    shuffling is applied before splitting.
    """
    d = _require_categorical(data.domain, "two-sample data")
    y = np.asarray(data.y, dtype=np.int64)
    z = np.asarray(data.z, dtype=np.int64)
    if len(y) % 2 or len(z) % 2:
        raise ValueError("l1_split_two_sample needs 2*n1 and 2*n2 observations")
    if len(y) > len(z):
        y, z = z, y  # weights always come from the larger group
    n1 = len(y) // 2
    n2 = len(z) // 2
    if n1 < 2:
        raise ValueError("split group size must be at least 2")
    m = min(n2, d)
    holdout = z[n2 : n2 + m]
    if holdout.size < m or m < 1:
        raise ValueError("insufficient holdout block for weight estimation")
    weights = split_weights(holdout, d)
    pooled = np.concatenate([y[:n1], z[:n1]])
    codes, kept = _compress(pooled)
    stat = _CountTwoSampleStat(
        n1, n1, n_cats=int(codes.max()) + 1, inv_weights=1.0 / weights[kept]
    )
    return perm_core.run_test(stat, codes, 2 * n1, plan, alpha)


def l1_split_independence(
    data: PairedSample, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    """Sample-splitting independence test via conversion to two-sample form.

    With 3n pairs (n even): the first n pairs are kept as joint draws, pairs
    n..2n supply the Y's and pairs 2n..3n the Z's of n product-law draws.
    Product weights come from the second halves of those blocks (Y's of
    pairs 3n/2..3n/2+m1, Z's of pairs 5n/2..5n/2+m2), the weighted
    two-sample U-statistic runs on the first halves, and permutations stay
    inside those n points.
    """
    d1 = _require_categorical(data.y_domain, "y")
    d2 = _require_categorical(data.z_domain, "z")
    total = data.n
    if total % 6:
        raise ValueError("l1_split_independence needs 3n pairs with n even")
    n = total // 3
    half = n // 2
    if half < 2:
        raise ValueError("needs at least 12 pairs so each split group has 2+")
    y = np.asarray(data.y, dtype=np.int64)
    z = np.asarray(data.z, dtype=np.int64)
    joint = np.stack([y[:half], z[:half]], axis=1)
    product = np.stack([y[n : n + half], z[2 * n : 2 * n + half]], axis=1)
    m1 = min(half, d1)
    m2 = min(half, d2)
    pw = product_weights(
        y[3 * n // 2 : 3 * n // 2 + m1], z[5 * n // 2 : 5 * n // 2 + m2], d1, d2
    )
    pair_codes = np.concatenate(
        [joint[:, 0] * d2 + joint[:, 1], product[:, 0] * d2 + product[:, 1]]
    )
    codes, kept = _compress(pair_codes)
    inv_w = 1.0 / (pw.row_weights[kept // d2] * pw.col_weights[kept % d2])
    stat = _CountTwoSampleStat(half, half, n_cats=int(codes.max()) + 1, inv_weights=inv_w)
    return perm_core.run_test(stat, codes, n, plan, alpha)


def _resolve_bandwidths(bandwidths, dim: int, resolver) -> np.ndarray:
    if isinstance(bandwidths, SmoothnessRule):
        return resolver(bandwidths.s)
    lam = np.atleast_1d(np.asarray(bandwidths, dtype=float))
    if lam.size == 1 and dim > 1:
        lam = np.full(dim, float(lam[0]))
    if lam.shape != (dim,):
        raise ValueError(f"expected {dim} bandwidths")
    if np.any(lam <= 0):
        raise ValueError("bandwidths must be positive")
    return lam


def mmd_test(
    data: TwoSamplePooled,
    bandwidths,
    alpha: float,
    plan: PermutationPlan,
) -> TestOutcome:
    """Gaussian-kernel two-sample permutation test.

    ``bandwidths`` is either an explicit per-axis array or a
    :class:`SmoothnessRule`, which sets every axis to
    (1/n1 + 1/n2)^{2/(4s+d)}.
    """
    dim = _require_continuous(data.domain, "two-sample data")
    lam = _resolve_bandwidths(
        bandwidths, dim, lambda s: mmd_bandwidths(data.n1, data.n2, s, dim)
    )
    g = gram(Gaussian(lam), data.pooled(), zero_diagonal=True)
    stat = _GramTwoSampleStat(data.n1, data.n2)
    return perm_core.run_test(stat, g, data.n, plan, alpha)


def hsic_test(
    data: PairedSample,
    bandwidths_y,
    bandwidths_z,
    alpha: float,
    plan: PermutationPlan,
) -> TestOutcome:
    """Gaussian-kernel independence permutation test (z permuted).

    Passing a :class:`SmoothnessRule` for either side sets all bandwidths to
    n^{-2/(4s+d1+d2)}.
    """
    d1 = _require_continuous(data.y_domain, "y")
    d2 = _require_continuous(data.z_domain, "z")

    def rule(s: float) -> tuple[np.ndarray, np.ndarray]:
        return hsic_bandwidths(data.n, s, d1, d2)

    lam_y = _resolve_bandwidths(bandwidths_y, d1, lambda s: rule(s)[0])
    lam_z = _resolve_bandwidths(bandwidths_z, d2, lambda s: rule(s)[1])
    gy = gram(Gaussian(lam_y), data.y, zero_diagonal=True)
    gz = gram(Gaussian(lam_z), data.z, zero_diagonal=True)
    stat = _GramIndependenceStat()
    return perm_core.run_test(stat, (gy, gz), data.n, plan, alpha)


def poisson_chisq_test(
    counts: PoissonCounts, alpha: float, plan: PermutationPlan
) -> TestOutcome:
    """Permutation test on the centered chi-square statistic.

    Relabels the 2n per-individual count vectors; requires the per-individual
    matrices and equal group sizes (enforced by :class:`PoissonCounts`).
    """
    if counts.y_individual is None:
        raise ValueError("poisson_chisq_test requires per-individual count matrices")
    pooled = np.vstack([counts.y_individual, counts.z_individual])
    stat = _PoissonChisqStat(counts.group_size)
    return perm_core.run_test(stat, pooled, 2 * counts.group_size, plan, alpha)
