"""Rank-based test battery and hierarchical regression.

Statistics are computed from first principles (rank sums, trimmed
means, block-wise OLS); scipy supplies only reference distributions
and midranks. Exact modes enumerate the permutation null with integer
counting, so their p-values are exact rationals rounded once at the
end.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import chi2 as chi2_dist
from scipy.stats import f as f_dist
from scipy.stats import norm as norm_dist
from scipy.stats import rankdata
from scipy.stats import t as t_dist

from .errors import NumericError, ValidationError

EXACT_FRIEDMAN_MAX_CELLS = (10, 6)  # (subjects, conditions) guard for (k!)^n


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: float | tuple[float, float] | None
    p_value: float
    effect: float | None = None
    effect_name: str | None = None

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0 or math.isnan(self.p_value)):
            raise ValidationError(f"p-value {self.p_value} outside [0, 1]")


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise ValidationError("expected a subjects x conditions matrix")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("missing or non-finite cells")
    return arr


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _row_midranks(data: np.ndarray) -> np.ndarray:
    return np.apply_along_axis(rankdata, 1, data)


def _friedman_parts(data: np.ndarray):
    """Rank sums and the tie-corrected normalizers shared by the
    omnibus test and the Conover pairwise comparisons."""
    n, k = data.shape
    ranks = _row_midranks(data)
    col_sums = ranks.sum(axis=0)
    a1 = float((ranks**2).sum())
    c1 = n * k * (k + 1) ** 2 / 4.0
    dev = float(((col_sums - n * (k + 1) / 2.0) ** 2).sum())
    return ranks, col_sums, a1, c1, dev


def friedman(data, exact: bool = False) -> TestResult:
    """Friedman omnibus test on an n x k within-subject matrix.

    Ranks within each subject (midranks on ties), tie-corrected
    chi-square statistic on k-1 df. With exact=True the p-value is the
    permutation tail over all within-subject rank orderings instead of
    the chi-square approximation; only feasible for small designs.
    """
    data = _as_matrix(data)
    n, k = data.shape
    if n < 2 or k < 2:
        raise ValidationError("need at least 2 subjects and 2 conditions")
    ranks, _, a1, c1, dev = _friedman_parts(data)
    denom = a1 - c1
    if denom <= 0.0:
        # every subject ranked all conditions equal
        return TestResult(0.0, float(k - 1), 1.0)
    stat = (k - 1) * dev / denom
    if not exact:
        return TestResult(stat, float(k - 1), float(chi2_dist.sf(stat, k - 1)))
    return TestResult(stat, float(k - 1), _friedman_exact_p(ranks))


def _friedman_exact_p(ranks: np.ndarray) -> float:
    """Tail probability of the rank-sum deviation under uniform
    within-row permutations, counted exactly over (k!)^n orderings.

    Doubling the midranks keeps every partial sum an integer, so the
    distribution fits in a dict of tuples -> counts.
    """
    n, k = ranks.shape
    if n > EXACT_FRIEDMAN_MAX_CELLS[0] or k > EXACT_FRIEDMAN_MAX_CELLS[1]:
        raise ValidationError(
            f"exact Friedman limited to {EXACT_FRIEDMAN_MAX_CELLS} (subjects, conditions)"
        )
    doubled = np.rint(2.0 * ranks).astype(int)
    center = n * (k + 1)  # doubled expected column sum
    observed = int(((doubled.sum(axis=0) - center) ** 2).sum())

    states: dict[tuple[int, ...], int] = {(0,) * k: 1}
    for row in doubled:
        nxt: dict[tuple[int, ...], int] = {}
        for perm in itertools.permutations(row.tolist()):
            for sums, cnt in states.items():
                key = tuple(s + p for s, p in zip(sums, perm))
                nxt[key] = nxt.get(key, 0) + cnt
        states = nxt
    total = sum(states.values())
    hits = sum(
        cnt
        for sums, cnt in states.items()
        if sum((s - center) ** 2 for s in sums) >= observed
    )
    return float(Fraction(hits, total))


def durbin_conover_posthoc(data) -> np.ndarray:
    """Pairwise Conover comparisons after a Friedman test.

    Returns a symmetric k x k matrix of two-sided p-values (diagonal
    1). Differences of column rank sums are scaled by the pooled
    rank-variance term and referred to a t distribution on
    (n-1)(k-1) df.
    """
    data = _as_matrix(data)
    n, k = data.shape
    if n < 2 or k < 2:
        raise ValidationError("need at least 2 subjects and 2 conditions")
    _, col_sums, a1, c1, dev = _friedman_parts(data)
    df = (n - 1) * (k - 1)
    p = np.ones((k, k))
    if a1 - c1 <= 0.0:
        return p
    t1 = (k - 1) * dev / (a1 - c1)
    scale = (2.0 * n * (a1 - c1) / df) * (1.0 - t1 / (n * (k - 1)))
    se = math.sqrt(max(scale, 0.0))
    for i in range(k):
        for j in range(i + 1, k):
            diff = abs(col_sums[i] - col_sums[j])
            if se == 0.0:
                pij = 1.0 if diff == 0.0 else 0.0
            else:
                pij = min(1.0, 2.0 * float(t_dist.sf(diff / se, df)))
            p[i, j] = p[j, i] = pij
    return p


def _tie_term(values: np.ndarray) -> float:
    _, counts = np.unique(values, return_counts=True)
    return float((counts**3 - counts).sum())


def _two_sided_from_counts(lo: int, hi: int, total: int) -> float:
    return float(min(Fraction(1), 2 * min(Fraction(lo, total), Fraction(hi, total))))


def wilcoxon_signed_rank(x, y, mode: str = "auto") -> TestResult:
    """Wilcoxon signed-rank test of paired samples; W sums the ranks of
    pairs where y exceeds x.

    Zero differences are dropped. Exact mode enumerates all 2^n sign
    assignments (automatic for n <= 20); the approximation is normal
    with tie and continuity corrections.
    """
    if mode not in ("auto", "exact", "approx"):
        raise ValidationError(f"unknown mode {mode!r}")
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.shape != y.shape:
        raise ValidationError("paired samples differ in length")
    d = y - x
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise NumericError("all differences are zero")
    ranks = rankdata(np.abs(d))
    w = float(ranks[d > 0.0].sum())

    exact = mode == "exact" or (mode == "auto" and n <= 20)
    if exact:
        if n > 30:
            raise ValidationError("exact signed-rank limited to n <= 30")
        doubled = np.rint(2.0 * ranks).astype(int)
        total_sum = int(doubled.sum())
        dist = [0] * (total_sum + 1)
        dist[0] = 1
        for r in doubled:
            nxt = dist[:]
            for s in range(total_sum - r + 1):
                if dist[s]:
                    nxt[s + r] += dist[s]
            dist = nxt
        w2 = int(round(2.0 * w))
        lo = sum(dist[: w2 + 1])
        hi = sum(dist[w2:])
        return TestResult(w, float(n), _two_sided_from_counts(lo, hi, 2**n))

    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(ranks) / 48.0
    if var <= 0.0:
        raise NumericError("degenerate rank variance")
    z = max(abs(w - mu) - 0.5, 0.0) / math.sqrt(var)
    return TestResult(w, float(n), min(1.0, 2.0 * float(norm_dist.sf(z))))


def mann_whitney_u(x, y, mode: str = "auto") -> TestResult:
    """Mann-Whitney U for two independent samples; U counts toward x.

    Exact mode enumerates all C(n+m, n) group labelings (automatic for
    n+m <= 16); otherwise normal approximation with tie correction.
    """
    if mode not in ("auto", "exact", "approx"):
        raise ValidationError(f"unknown mode {mode!r}")
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    nx, ny = x.size, y.size
    combined = np.concatenate([x, y])
    ranks = rankdata(combined)
    r_x = float(ranks[:nx].sum())
    u = r_x - nx * (nx + 1) / 2.0

    exact = mode == "exact" or (mode == "auto" and nx + ny <= 16)
    if exact:
        if nx + ny > 30:
            raise ValidationError("exact Mann-Whitney limited to n+m <= 30")
        doubled = np.rint(2.0 * ranks).astype(int)
        # dist[j][s]: subsets of size j with doubled-rank sum s
        total_sum = int(doubled.sum())
        dist = [[0] * (total_sum + 1) for _ in range(nx + 1)]
        dist[0][0] = 1
        for r in doubled:
            for j in range(min(nx, len(doubled)) - 1, -1, -1):
                row = dist[j]
                tgt = dist[j + 1]
                for s in range(total_sum - r + 1):
                    if row[s]:
                        tgt[s + r] += row[s]
        counts = dist[nx]
        r2 = int(round(2.0 * r_x))
        lo = sum(counts[: r2 + 1])
        hi = sum(counts[r2:])
        return TestResult(u, None, _two_sided_from_counts(lo, hi, math.comb(nx + ny, nx)))

    n_tot = nx + ny
    mu = nx * ny / 2.0
    var = nx * ny / 12.0 * (n_tot + 1 - _tie_term(ranks) / (n_tot * (n_tot - 1)))
    if var <= 0.0:
        raise NumericError("degenerate rank variance")
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return TestResult(u, None, min(1.0, 2.0 * float(norm_dist.sf(z))))


def yuen_welch(x, y, trim: float = 0.2) -> TestResult:
    """Yuen-Welch comparison of trimmed means with winsorized variances.

    trim is the fraction cut from each tail; 0 reduces exactly to
    Welch's t.
    """
    if not 0.0 <= trim < 0.5:
        raise ValidationError("trim must be in [0, 0.5)")
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")

    def side(v: np.ndarray):
        n = v.size
        g = int(math.floor(trim * n))
        h = n - 2 * g
        if h < 2 or n < 2:
            raise ValidationError(f"sample of {n} over-trimmed at trim={trim}")
        srt = np.sort(v)
        tmean = float(srt[g : n - g].mean())
        wins = np.clip(v, srt[g], srt[n - 1 - g])
        swin = float(wins.var(ddof=1))
        return tmean, (n - 1) * swin / (h * (h - 1)), h

    m1, d1, h1 = side(x)
    m2, d2, h2 = side(y)
    if d1 + d2 == 0.0:
        if m1 == m2:
            return TestResult(0.0, float(h1 + h2 - 2), 1.0)
        raise NumericError("zero variance with unequal trimmed means")
    stat = (m1 - m2) / math.sqrt(d1 + d2)
    df = (d1 + d2) ** 2 / (d1**2 / (h1 - 1) + d2**2 / (h2 - 1))
    return TestResult(stat, df, min(1.0, 2.0 * float(t_dist.sf(abs(stat), df))))


def welch_t(x, y) -> TestResult:
    """Welch's unequal-variance t test, written out directly (the
    trim-0 Yuen reduction is checked against this, not defined by it)."""
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.size < 2 or y.size < 2:
        raise ValidationError("need at least 2 values per sample")
    vx = float(x.var(ddof=1)) / x.size
    vy = float(y.var(ddof=1)) / y.size
    if vx + vy == 0.0:
        raise NumericError("zero variance in both samples")
    stat = (float(x.mean()) - float(y.mean())) / math.sqrt(vx + vy)
    df = (vx + vy) ** 2 / (vx**2 / (x.size - 1) + vy**2 / (y.size - 1))
    return TestResult(stat, df, min(1.0, 2.0 * float(t_dist.sf(abs(stat), df))))


def paired_t(x, y) -> TestResult:
    """Paired-samples t test on the differences y - x."""
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.shape != y.shape:
        raise ValidationError("paired samples differ in length")
    d = y - x
    n = d.size
    if n < 2:
        raise ValidationError("need at least 2 pairs")
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise NumericError("zero-variance differences")
    stat = float(d.mean()) / (sd / math.sqrt(n))
    df = n - 1
    return TestResult(stat, float(df), min(1.0, 2.0 * float(t_dist.sf(abs(stat), df))))


def partial_pearson(x, y, covariates=None, two_tailed: bool = True) -> TestResult:
    """Pearson correlation of x and y after removing covariates.

    Both variables are residualized on the covariates (plus intercept)
    by least squares; with no covariates this is the plain Pearson
    correlation. The statistic is r itself; df = n - 2 - #covariates.
    """
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.size != y.size:
        raise ValidationError("x and y differ in length")
    n = x.size
    if covariates is None:
        cov = np.empty((n, 0))
    else:
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        if cov.shape[0] != n:
            raise ValidationError("covariate rows do not match samples")
    p = cov.shape[1]
    if n <= p + 2:
        raise ValidationError(f"need more than {p + 2} samples for {p} covariates")
    design = np.column_stack([np.ones(n), cov])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise NumericError("collinear covariates")
    ex = x - design @ np.linalg.lstsq(design, x, rcond=None)[0]
    ey = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
    sx = float(ex @ ex)
    sy = float(ey @ ey)
    if sx == 0.0 or sy == 0.0:
        raise NumericError("zero residual variance")
    r = float(ex @ ey) / math.sqrt(sx * sy)
    r = max(-1.0, min(1.0, r))
    df = n - 2 - p
    if 1.0 - r * r <= 0.0:
        return TestResult(r, float(df), 0.0)
    tval = r * math.sqrt(df / (1.0 - r * r))
    tail = float(t_dist.sf(abs(tval), df))
    return TestResult(r, float(df), min(1.0, (2.0 * tail) if two_tailed else tail))


def cohens_f2(r_squared: float) -> float:
    """Effect size f^2 = R^2 / (1 - R^2)."""
    if not 0.0 <= r_squared <= 1.0:
        raise ValidationError("R^2 must be in [0, 1]")
    if r_squared == 1.0:
        return math.inf
    return r_squared / (1.0 - r_squared)


@dataclass(frozen=True)
class PredictorBlock:
    """One hierarchical-regression step: named predictors entered together."""

    name: str
    data: np.ndarray
    columns: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "columns", tuple(self.columns))
        if arr.shape[1] != len(self.columns):
            raise ValidationError(
                f"block {self.name!r}: {arr.shape[1]} columns, {len(self.columns)} names"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"block {self.name!r} has non-finite values")


@dataclass(frozen=True)
class StepResult:
    block: str
    r2: float
    delta_r2: float
    f_stat: float
    f_p: float
    df: tuple[float, float]
    aic: float
    betas: dict[str, float] = field(default_factory=dict)
    degenerate: bool = False


@dataclass(frozen=True)
class HierModel:
    steps: tuple[StepResult, ...]

    @property
    def r2(self) -> float:
        return self.steps[-1].r2

    @property
    def cohens_f2(self) -> float:
        return cohens_f2(min(self.r2, 1.0))


def _standardize(arr: np.ndarray, what: str) -> np.ndarray:
    sd = arr.std(ddof=1, axis=0)
    if np.any(sd == 0.0):
        raise NumericError(f"constant column in {what}")
    return (arr - arr.mean(axis=0)) / sd


def hierarchical_regression(outcome, blocks: Sequence[PredictorBlock]) -> HierModel:
    """Blockwise OLS on standardized variables.

    Each step adds one block to the cumulative design and reports R^2,
    the R^2 increment with its F test, Gaussian AIC (n ln(RSS/n) +
    2(p+2), intercept and variance counted), and standardized betas. A
    perfect fit is flagged degenerate with AIC -inf rather than raised.
    """
    y = _as_vector(outcome, "outcome")
    n = y.size
    if not blocks:
        raise ValidationError("no predictor blocks")
    if n < 3:
        raise ValidationError("need at least 3 observations")
    zy = _standardize(y[:, None], "outcome").ravel()
    tss = float(zy @ zy)

    steps = []
    design = np.ones((n, 1))
    names: list[str] = []
    r2_prev = 0.0
    for block in blocks:
        if block.data.shape[0] != n:
            raise ValidationError(f"block {block.name!r} rows do not match outcome")
        z = _standardize(block.data, f"block {block.name!r}")
        design = np.column_stack([design, z])
        names.extend(block.columns)
        if np.linalg.matrix_rank(design) < design.shape[1]:
            raise NumericError(f"rank-deficient design at block {block.name!r}")
        beta = np.linalg.lstsq(design, zy, rcond=None)[0]
        resid = zy - design @ beta
        rss = float(resid @ resid)
        r2 = 1.0 - rss / tss
        m = len(block.columns)
        p_tot = design.shape[1] - 1
        df_den = n - p_tot - 1
        if df_den <= 0:
            raise ValidationError(f"too few observations for block {block.name!r}")
        degenerate = rss <= tss * 1e-14
        if degenerate:
            f_stat, f_p, aic = math.inf, 0.0, -math.inf
        else:
            f_stat = (max(r2 - r2_prev, 0.0) / m) / ((1.0 - r2) / df_den)
            f_p = float(f_dist.sf(f_stat, m, df_den))
            aic = n * math.log(rss / n) + 2.0 * (p_tot + 2)
        steps.append(
            StepResult(
                block=block.name,
                r2=r2,
                delta_r2=r2 - r2_prev,
                f_stat=f_stat,
                f_p=f_p,
                df=(float(m), float(df_den)),
                aic=aic,
                betas={nm: float(b) for nm, b in zip(names, beta[1:])},
                degenerate=degenerate,
            )
        )
        r2_prev = r2
    return HierModel(tuple(steps))


def filter_significant_predictors(
    outcome, candidates: dict[str, np.ndarray], threshold: float = 0.05
) -> list[str]:
    """Names of candidate predictors whose plain Pearson correlation
    with the outcome is significant at the threshold, in input order."""
    if not 0.0 < threshold <= 1.0:
        raise ValidationError("threshold must be in (0, 1]")
    keep = []
    for name, values in candidates.items():
        if partial_pearson(outcome, values).p_value < threshold:
            keep.append(name)
    return keep


__all__ = [
    "TestResult",
    "friedman",
    "durbin_conover_posthoc",
    "wilcoxon_signed_rank",
    "mann_whitney_u",
    "yuen_welch",
    "welch_t",
    "paired_t",
    "partial_pearson",
    "cohens_f2",
    "PredictorBlock",
    "StepResult",
    "HierModel",
    "hierarchical_regression",
    "filter_significant_predictors",
]
