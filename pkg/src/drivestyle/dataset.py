"""Study-data ingestion and descriptive reproduction.

The released study tables arrive with arbitrary headers; a ColumnMap
renames them into five canonical tables with closed vocabularies and
per-inventory response ranges. Everything downstream (scoring, the test
battery, confusion and descriptive tables) consumes only the canonical
form.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ValidationError

STYLE_VOCAB = ("passive", "rail", "replay", "sportive")
WEATHER_VOCAB = ("dry", "rain")
INVENTORY_VOCAB = ("tia", "arca")
TRAFFIC_VOCAB = ("clear", "oncoming")
ROAD_VOCAB = ("straight", "curve")

# canonical field -> nullable
TABLE_FIELDS: dict[str, dict[str, bool]] = {
    "subjects": {"id": False, "age": True, "gender": True, "license_years": True},
    "mdsi_items": {"subject": False, "item": False, "response": False},
    "post_ride": {
        "subject": False,
        "style": False,
        "weather": False,
        "inventory": False,
        "item": False,
        "response": False,
    },
    "ondrive": {
        "subject": False,
        "style": False,
        "weather": False,
        "traffic": False,
        "road": False,
        "relaxation": False,
    },
    "guesses": {"subject": False, "presented_style": False, "guessed_style": False},
}

RESPONSE_RANGES = {"tia": (1, 5), "arca": (0, 10), "mdsi": (1, 6)}


@dataclass(frozen=True)
class ColumnMap:
    """Canonical-to-source column names, one mapping per table.

    A None source means the release omits that field; only nullable
    fields may be None. Tables missing from the map default to identity
    naming.
    """

    tables: dict[str, dict[str, str | None]] = field(default_factory=dict)

    def __post_init__(self):
        for table, mapping in self.tables.items():
            if table not in TABLE_FIELDS:
                raise ValidationError(f"unknown table {table!r} in column map")
            fields = TABLE_FIELDS[table]
            for canon, src in mapping.items():
                if canon not in fields:
                    raise ValidationError(f"unknown field {table}.{canon}")
                if src is None and not fields[canon]:
                    raise ValidationError(f"{table}.{canon} cannot be null")

    def source_for(self, table: str, canon: str) -> str | None:
        mapping = self.tables.get(table, {})
        return mapping.get(canon, canon)


def load_column_map(path) -> ColumnMap:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValidationError("column map must be a JSON object of tables")
    return ColumnMap(raw)


@dataclass(frozen=True)
class StudyTables:
    subjects: pd.DataFrame
    mdsi_items: pd.DataFrame
    post_ride: pd.DataFrame
    ondrive: pd.DataFrame
    guesses: pd.DataFrame

    def table(self, name: str) -> pd.DataFrame:
        if name not in TABLE_FIELDS:
            raise ValidationError(f"unknown table {name!r}")
        return getattr(self, name)


def _bad_rows(frame: pd.DataFrame, mask, table: str, why: str) -> None:
    mask = np.asarray(mask, dtype=bool)
    if mask.any():
        rows = [int(i) + 1 for i in np.flatnonzero(mask)[:10]]
        raise ValidationError(f"{table}: {why} at data row(s) {rows}")


def _check_vocab(frame, table, column, vocab):
    _bad_rows(
        frame,
        ~frame[column].isin(vocab),
        table,
        f"{column} outside {list(vocab)}",
    )


def _check_range(frame, mask, table, column, lo, hi):
    vals = frame.loc[mask, column]
    bad = pd.Series(False, index=frame.index)
    bad.loc[mask] = (vals < lo) | (vals > hi) | vals.isna()
    _bad_rows(frame, bad, table, f"{column} outside [{lo}, {hi}]")


def _check_unique(frame, table, cols):
    _bad_rows(frame, frame.duplicated(subset=cols), table, f"duplicate key {cols}")


def _validate(table: str, frame: pd.DataFrame) -> pd.DataFrame:
    for col in ("subject", "id", "style", "weather", "inventory", "traffic", "road",
                "presented_style", "guessed_style", "gender"):
        if col in frame.columns:
            frame[col] = frame[col].astype("string").astype(object)
    if table == "subjects":
        _check_unique(frame, table, ["id"])
    elif table == "mdsi_items":
        _check_unique(frame, table, ["subject", "item"])
        _bad_rows(frame, ~frame["item"].between(1, 44), table, "item outside 1..44")
        lo, hi = RESPONSE_RANGES["mdsi"]
        _check_range(frame, pd.Series(True, index=frame.index), table, "response", lo, hi)
    elif table == "post_ride":
        _check_vocab(frame, table, "style", STYLE_VOCAB)
        _check_vocab(frame, table, "weather", WEATHER_VOCAB)
        _check_vocab(frame, table, "inventory", INVENTORY_VOCAB)
        _check_unique(frame, table, ["subject", "style", "weather", "inventory", "item"])
        for inv, (lo, hi) in (("tia", RESPONSE_RANGES["tia"]), ("arca", RESPONSE_RANGES["arca"])):
            _check_range(frame, frame["inventory"] == inv, table, "response", lo, hi)
    elif table == "ondrive":
        _check_vocab(frame, table, "style", STYLE_VOCAB)
        _check_vocab(frame, table, "weather", WEATHER_VOCAB)
        _check_vocab(frame, table, "traffic", TRAFFIC_VOCAB)
        _check_vocab(frame, table, "road", ROAD_VOCAB)
        _bad_rows(
            frame,
            ~np.isfinite(frame["relaxation"].to_numpy(dtype=float)),
            table,
            "non-finite relaxation",
        )
    elif table == "guesses":
        _check_vocab(frame, table, "presented_style", STYLE_VOCAB)
        _check_vocab(frame, table, "guessed_style", STYLE_VOCAB)
        _check_unique(frame, table, ["subject", "presented_style"])
    return frame


def ingest(paths: dict[str, str], cmap: ColumnMap | None = None) -> StudyTables:
    """Read the five study CSVs into validated canonical tables.

    paths maps table names to files; cmap adapts source headers. Schema
    or vocabulary violations raise with the offending rows named.
    """
    cmap = cmap or ColumnMap()
    missing = set(TABLE_FIELDS) - set(paths)
    if missing:
        raise ValidationError(f"missing table paths: {sorted(missing)}")
    frames = {}
    for table, fields in TABLE_FIELDS.items():
        raw = pd.read_csv(paths[table], float_precision="round_trip")
        cols = {}
        for canon, nullable in fields.items():
            src = cmap.source_for(table, canon)
            if src is None:
                cols[canon] = pd.Series(pd.NA, index=raw.index)
                continue
            if src not in raw.columns:
                raise ValidationError(
                    f"{table}: source column {src!r} not found (has {list(raw.columns)})"
                )
            cols[canon] = raw[src]
            if not nullable and raw[src].isna().any():
                _bad_rows(raw, raw[src].isna(), table, f"missing {canon}")
        frames[table] = _validate(table, pd.DataFrame(cols))
    return StudyTables(**frames)


def export_tables(tables: StudyTables, out_dir) -> dict[str, str]:
    """Write the canonical tables as CSVs named after themselves.

    Floats are written in shortest round-trip form, so ingest of the
    written files reproduces the tables exactly.
    """
    import os

    written = {}
    for table in TABLE_FIELDS:
        path = os.path.join(str(out_dir), f"{table}.csv")
        tables.table(table).to_csv(path, index=False)
        written[table] = path
    return written


def classification_confusion(guesses: pd.DataFrame) -> pd.DataFrame:
    """Row-normalized 4x4 matrix of guessed style by presented style.

    Rows and columns follow the canonical style order; each row sums to
    1, with the diagonal holding per-style correct-classification rates.
    """
    if len(guesses) == 0:
        raise ValidationError("no guesses")
    for col in ("presented_style", "guessed_style"):
        if col not in guesses.columns:
            raise ValidationError(f"guesses table lacks {col!r}")
        bad = ~guesses[col].isin(STYLE_VOCAB)
        if bad.any():
            raise ValidationError(
                f"unknown labels in {col}: {sorted(guesses.loc[bad, col].unique())}"
            )
    counts = pd.crosstab(guesses["presented_style"], guesses["guessed_style"])
    counts = counts.reindex(index=STYLE_VOCAB, columns=STYLE_VOCAB, fill_value=0)
    sums = counts.sum(axis=1)
    if (sums == 0).any():
        empty = [s for s in STYLE_VOCAB if sums[s] == 0]
        raise ValidationError(f"no guesses for presented style(s) {empty}")
    return counts.div(sums, axis=0)


def descriptives(frame: pd.DataFrame, group_by, value: str) -> pd.DataFrame:
    """Per-cell mean, sample SD, and count of `value` grouped by the
    given columns. Cells with one observation report SD as NaN; empty
    cells simply do not appear.
    """
    group_by = [group_by] if isinstance(group_by, str) else list(group_by)
    for col in group_by + [value]:
        if col not in frame.columns:
            raise ValidationError(f"no column {col!r}")
    grouped = frame.groupby(group_by, observed=True)[value]
    out = grouped.agg(mean="mean", sd=lambda v: v.std(ddof=1), n="count")
    return out.reset_index()


__all__ = [
    "STYLE_VOCAB",
    "WEATHER_VOCAB",
    "INVENTORY_VOCAB",
    "TRAFFIC_VOCAB",
    "ROAD_VOCAB",
    "TABLE_FIELDS",
    "RESPONSE_RANGES",
    "ColumnMap",
    "load_column_map",
    "StudyTables",
    "ingest",
    "export_tables",
    "classification_confusion",
    "descriptives",
]
