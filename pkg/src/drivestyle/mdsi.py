"""Driving-style questionnaire scoring.

44 six-point Likert items are condensed to six factor scores by the
regression method: standardize items, weight by the correlation-inverse
times the loading matrix, classify each subject to the factor with the
highest score. Loadings come from config; item extraction is out of
scope.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InsufficientDataError, NumericError, ValidationError

N_ITEMS = 44
FACTOR_NAMES = (
    "angry",
    "anxious",
    "careful",
    "dissociative",
    "distress-reduction",
    "risky",
)
RESPONSE_RANGE = (1, 6)
DEFAULT_RIDGE = 1e-3
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ItemResponses:
    """subjects x 44 integer response matrix plus the reverse-keyed item set.

    Item ids are 1-based; reverse coding maps a response x to 7 - x.
    """

    values: np.ndarray
    subject_ids: tuple[str, ...]
    reverse_coded: frozenset[int] = frozenset()

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[1] != N_ITEMS:
            raise ValidationError(f"expected subjects x {N_ITEMS} matrix")
        if np.issubdtype(arr.dtype, np.floating) and np.isnan(arr).any():
            raise ValidationError("missing responses are not imputed")
        if not np.array_equal(arr, np.rint(arr)):
            raise ValidationError("responses must be integers")
        arr = arr.astype(int)
        lo, hi = RESPONSE_RANGE
        if arr.min() < lo or arr.max() > hi:
            raise ValidationError(f"responses outside [{lo}, {hi}]")
        if len(self.subject_ids) != arr.shape[0]:
            raise ValidationError("subject id count does not match rows")
        bad = [i for i in self.reverse_coded if not 1 <= i <= N_ITEMS]
        if bad:
            raise ValidationError(f"reverse-coded item ids out of range: {bad}")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))
        object.__setattr__(self, "reverse_coded", frozenset(self.reverse_coded))

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LoadingConfig:
    """Item-to-factor loading matrix, optionally with a reference
    item-correlation matrix to use instead of the sample one."""

    loadings: np.ndarray
    r_ref: np.ndarray | None = None
    factor_names: tuple[str, ...] = FACTOR_NAMES

    def __post_init__(self):
        lam = np.asarray(self.loadings, dtype=float)
        if lam.ndim != 2 or lam.shape != (N_ITEMS, len(self.factor_names)):
            raise ValidationError(
                f"loadings must be {N_ITEMS} x {len(self.factor_names)}"
            )
        if not np.all(np.isfinite(lam)):
            raise ValidationError("non-finite loadings")
        object.__setattr__(self, "loadings", lam)
        object.__setattr__(self, "factor_names", tuple(self.factor_names))
        if self.r_ref is not None:
            r = np.asarray(self.r_ref, dtype=float)
            if r.shape != (N_ITEMS, N_ITEMS):
                raise ValidationError(f"r_ref must be {N_ITEMS} x {N_ITEMS}")
            if not np.allclose(r, r.T, atol=1e-10):
                raise ValidationError("r_ref must be symmetric")
            if np.linalg.eigvalsh(r).min() < -1e-8:
                raise ValidationError("r_ref must be positive semidefinite")
            object.__setattr__(self, "r_ref", r)


@dataclass(frozen=True)
class MdsiScores:
    subject_ids: tuple[str, ...]
    scores: np.ndarray  # subjects x factors, z scale
    style_class: tuple[str, ...]
    factor_names: tuple[str, ...] = FACTOR_NAMES


def reverse_code(values: np.ndarray, items: frozenset[int] | set[int]) -> np.ndarray:
    """Flip the flagged 1-based item columns on the 1-6 scale (7 - x)."""
    out = np.array(values, copy=True)
    for item in items:
        out[:, item - 1] = 7 - out[:, item - 1]
    return out


def cronbach_alpha(items) -> float:
    """Internal consistency k/(k-1) * (1 - sum of item variances /
    variance of the summed scale); sample variances throughout."""
    arr = np.asarray(items, dtype=float)
    if arr.ndim != 2:
        raise ValidationError("expected a subjects x items matrix")
    n, k = arr.shape
    if k < 2:
        raise ValidationError("need at least 2 items")
    if n < 2:
        raise InsufficientDataError("need at least 2 subjects")
    total_var = arr.sum(axis=1).var(ddof=1)
    if total_var == 0.0:
        raise NumericError("zero total-score variance")
    return float(k / (k - 1) * (1.0 - arr.var(axis=0, ddof=1).sum() / total_var))


def _zscore_columns(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0, ddof=1)
    z = np.zeros_like(arr, dtype=float)
    live = sd > 0.0
    z[:, live] = (arr[:, live] - mean[live]) / sd[live]
    return z, live


def regression_factor_scores(
    data, loadings, r_ref=None, ridge: float = 0.0
) -> np.ndarray:
    """Generic regression-method factor scores for any item matrix.

    Standardizes columns, forms B = (R + ridge*I)^-1 Lambda with R the
    supplied or sample item correlations, and returns Z B. Constant
    columns carry no information and are treated as uncorrelated.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValidationError("need a matrix with at least 2 rows")
    lam = np.asarray(loadings, dtype=float)
    if lam.shape[0] != arr.shape[1]:
        raise ValidationError("loading rows do not match item columns")
    if ridge < 0.0:
        raise ValidationError("ridge must be >= 0")
    z, live = _zscore_columns(arr)
    if r_ref is not None:
        r = np.asarray(r_ref, dtype=float)
    else:
        r = (z.T @ z) / (arr.shape[0] - 1)
        r[~live, :] = 0.0
        r[:, ~live] = 0.0
        np.fill_diagonal(r, 1.0)
    r = r + ridge * np.eye(r.shape[0])
    if np.linalg.cond(r) > _COND_LIMIT:
        raise NumericError(
            "item correlation matrix is singular; supply r_ref or a ridge > 0"
        )
    weights = np.linalg.solve(r, lam)
    return z @ weights


def refined_factor_scores(
    resp: ItemResponses, cfg: LoadingConfig, ridge: float = DEFAULT_RIDGE
) -> MdsiScores:
    """Score every subject on the six factors and classify by argmax.

    Reverse-keyed items are flipped first; the scores are deviations
    from each factor's sample mean, so a subject's class says which
    factor they exceed the group on most. Ties go to the first factor
    in canonical order.
    """
    coded = reverse_code(resp.values, resp.reverse_coded)
    scores = regression_factor_scores(
        coded.astype(float), cfg.loadings, cfg.r_ref, ridge
    )
    classes = tuple(cfg.factor_names[int(i)] for i in np.argmax(scores, axis=1))
    return MdsiScores(resp.subject_ids, scores, classes, cfg.factor_names)


def read_items_csv(path, reverse_coded=()) -> ItemResponses:
    """Long-format `subject_id,item_id,response` file to ItemResponses.

    Every subject must answer all 44 items exactly once.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    want = ["subject_id", "item_id", "response"]
    if list(frame.columns) != want:
        raise ValidationError(f"expected columns {want}, got {list(frame.columns)}")
    if frame.isna().any().any():
        raise ValidationError("missing responses are not imputed")
    frame["subject_id"] = frame["subject_id"].astype(str)
    subjects = list(dict.fromkeys(frame["subject_id"]))
    try:
        pivot = frame.pivot(index="subject_id", columns="item_id", values="response")
    except ValueError as err:
        raise ValidationError("duplicate subject/item rows") from err
    if sorted(pivot.columns) != list(range(1, N_ITEMS + 1)):
        raise ValidationError(f"item ids must be exactly 1..{N_ITEMS}")
    if pivot.isna().any().any():
        raise ValidationError("each subject must answer every item")
    pivot = pivot.reindex(subjects)[sorted(pivot.columns)]
    return ItemResponses(
        pivot.to_numpy(), tuple(pivot.index), frozenset(reverse_coded)
    )


def read_loadings_csv(path) -> LoadingConfig:
    """44-row CSV with one named column per factor, rows in item order."""
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != list(FACTOR_NAMES):
        raise ValidationError(
            f"expected factor columns {list(FACTOR_NAMES)}, got {list(frame.columns)}"
        )
    if len(frame) != N_ITEMS:
        raise ValidationError(f"expected {N_ITEMS} rows, got {len(frame)}")
    return LoadingConfig(frame.to_numpy(dtype=float))


def write_scores_csv(scores: MdsiScores, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", *scores.factor_names, "style_class"])
        for sid, row, cls in zip(scores.subject_ids, scores.scores, scores.style_class):
            writer.writerow([sid, *(repr(float(v)) for v in row), cls])


def read_scores_csv(path) -> MdsiScores:
    frame = pd.read_csv(path, float_precision="round_trip")
    want = ["subject_id", *FACTOR_NAMES, "style_class"]
    if list(frame.columns) != want:
        raise ValidationError(f"expected columns {want}, got {list(frame.columns)}")
    return MdsiScores(
        tuple(frame["subject_id"].astype(str)),
        frame[list(FACTOR_NAMES)].to_numpy(dtype=float),
        tuple(frame["style_class"].astype(str)),
    )


__all__ = [
    "N_ITEMS",
    "FACTOR_NAMES",
    "DEFAULT_RIDGE",
    "ItemResponses",
    "LoadingConfig",
    "MdsiScores",
    "reverse_code",
    "cronbach_alpha",
    "regression_factor_scores",
    "refined_factor_scores",
    "read_items_csv",
    "read_loadings_csv",
    "write_scores_csv",
    "read_scores_csv",
]
