"""Command-line frontend.

Every subcommand is deterministic given its flags and input files: all
randomness flows from explicit seeds, numbers are formatted with
dot-decimal repr regardless of locale, and reports are CSV or plain
key-value text. Exit codes: 0 ok, 1 usage, 2 numeric failure, 3
validation failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import pandas as pd

from . import dataset as ds
from . import mdsi as mdsi_mod
from . import stats as st
from .errors import NumericError, ValidationError
from .metrics import estimate_ccg, gg_means, gg_percentiles
from .pathfollow import SimConfig
from .road import generate_track, read_track_csv, write_track_csv
from .scenario import TrafficScript, WeatherTag, read_traffic_csv, run
from .styles import BUILTIN_STYLE_NAMES, builtin_style, read_style, read_trace_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_VALIDATION = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"usage: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _cmd_gen_track(args) -> int:
    track = generate_track(
        length_m=args.length,
        n_curves=args.curves,
        radius_range=(args.radius_min, args.radius_max),
        seed=args.seed,
    )
    write_track_csv(track, args.out)
    print(f"wrote {args.out}: {len(track.segments)} segments, "
          f"{track.total_length!r} m")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    track = read_track_csv(args.track)
    if args.replay is not None:
        style = read_trace_csv(args.replay)
    elif args.style_file is not None:
        style = read_style(args.style_file)
    elif args.style is not None:
        style = builtin_style(args.style)
    else:
        raise ValidationError("one of --style, --style-file, --replay is required")
    script = TrafficScript()
    if args.traffic is not None:
        script = read_traffic_csv(args.traffic)
    cfg = SimConfig(dt=args.dt, v_target=args.vtarget)
    log = run(
        track,
        style,
        script=script,
        cfg=cfg,
        weather=WeatherTag(args.weather),
        inverted_ramp=args.inverted_ramp,
    )
    log.write_csv(args.out)
    print(f"wrote {args.out}: {len(log)} rows")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    from .scenario import SimLog

    log = SimLog.read_csv(args.log)
    est = estimate_ccg(log, k_min=args.kmin)
    lines = [
        ("ccg", est.ccg),
        ("ccg0", est.ccg0),
        ("r_squared", est.r_squared),
        ("n_samples", est.n_samples),
    ]
    if args.percentile == "mean":
        gg = gg_means(log)
        tag = "mean"
    else:
        gg = gg_percentiles(log, float(args.percentile))
        tag = f"p{args.percentile}"
    lines += [
        (f"ax_max_{tag}", gg.ax_max_p),
        (f"ax_min_{tag}", gg.ax_min_p),
        (f"ay_max_{tag}", gg.ay_max_p),
    ]
    for key, val in lines:
        print(f"{key} {val!r}")
    return EXIT_OK


def _parse_items_arg(text: str) -> frozenset[int]:
    if not text:
        return frozenset()
    try:
        return frozenset(int(tok) for tok in text.split(","))
    except ValueError as err:
        raise ValidationError(f"bad --reverse-items list {text!r}") from err


def _cmd_mdsi_score(args) -> int:
    resp = mdsi_mod.read_items_csv(args.items, _parse_items_arg(args.reverse_items))
    cfg = mdsi_mod.read_loadings_csv(args.loadings)
    if args.rref is not None:
        r = pd.read_csv(args.rref, header=None, float_precision="round_trip")
        cfg = mdsi_mod.LoadingConfig(cfg.loadings, r.to_numpy(dtype=float))
    scores = mdsi_mod.refined_factor_scores(resp, cfg, ridge=args.ridge)
    mdsi_mod.write_scores_csv(scores, args.out)
    print(f"wrote {args.out}: {len(scores.subject_ids)} subjects")
    return EXIT_OK


def _load_spec(path) -> dict:
    with open(path) as fh:
        spec = json.load(fh)
    if not isinstance(spec, dict):
        raise ValidationError("analysis spec must be a JSON object")
    return spec


def _spec_frame(spec: dict, data_dir: str) -> pd.DataFrame:
    table = spec.get("table")
    if table not in ds.TABLE_FIELDS:
        raise ValidationError(f"spec.table must be one of {sorted(ds.TABLE_FIELDS)}")
    frame = pd.read_csv(
        f"{data_dir}/{table}.csv", float_precision="round_trip"
    )
    for col, val in spec.get("filter", {}).items():
        if col not in frame.columns:
            raise ValidationError(f"filter column {col!r} not in {table}")
        frame = frame[frame[col] == val]
    if len(frame) == 0:
        raise ValidationError("no rows left after filtering")
    return frame.reset_index(drop=True)


def _required(spec: dict, *keys):
    missing = [k for k in keys if k not in spec]
    if missing:
        raise ValidationError(f"analysis spec lacks {missing}")
    return [spec[k] for k in keys]


def _subject_by_condition(frame, spec) -> pd.DataFrame:
    values, subject, condition = _required(spec, "values", "subject", "condition")
    pivot = frame.pivot_table(
        index=subject, columns=condition, values=values, aggfunc="mean"
    )
    if pivot.isna().any().any():
        raise ValidationError("incomplete subject x condition design")
    return pivot


def _two_samples(frame, spec):
    values, group, levels = _required(spec, "values", "group", "levels")
    if len(levels) != 2:
        raise ValidationError("levels must name exactly two groups")
    a, b = levels
    paired_by = spec.get("paired_by")
    if paired_by is None:
        x = frame.loc[frame[group] == a, values].to_numpy(dtype=float)
        y = frame.loc[frame[group] == b, values].to_numpy(dtype=float)
        return x, y
    xs = frame[frame[group] == a].groupby(paired_by)[values].mean()
    ys = frame[frame[group] == b].groupby(paired_by)[values].mean()
    common = xs.index.intersection(ys.index)
    if len(common) == 0:
        raise ValidationError("no paired units shared by both levels")
    return xs[common].to_numpy(dtype=float), ys[common].to_numpy(dtype=float)


def _expand_predictor(frame: pd.DataFrame, col: str) -> tuple[np.ndarray, list[str]]:
    """Numeric columns pass through; categorical ones become 0/1
    indicators against a reference level (canonical style order puts
    passive first, everything else sorts)."""
    series = frame[col]
    if pd.api.types.is_numeric_dtype(series):
        return series.to_numpy(dtype=float)[:, None], [col]
    levels = list(dict.fromkeys(series))
    if set(levels) <= set(ds.STYLE_VOCAB):
        order = [s for s in ds.STYLE_VOCAB if s in levels]
    else:
        order = sorted(levels)
    ref = order[0]
    cols, names = [], []
    for level in order[1:]:
        cols.append((series == level).to_numpy(dtype=float)[:, None])
        names.append(f"{col}[{level}]")
    if not cols:
        raise ValidationError(f"predictor {col!r} has a single level")
    return np.hstack(cols), names


def _hier_blocks(frame, spec) -> tuple[np.ndarray, list[st.PredictorBlock]]:
    (outcome,) = _required(spec, "outcome")
    if outcome not in frame.columns:
        raise ValidationError(f"outcome column {outcome!r} missing")
    blocks = []
    for blk in spec.get("blocks", []):
        name = blk.get("name")
        preds = blk.get("predictors", [])
        if not name or not preds:
            raise ValidationError("each block needs a name and predictors")
        mats, names = [], []
        for col in preds:
            if col not in frame.columns:
                raise ValidationError(f"predictor column {col!r} missing")
            mat, cnames = _expand_predictor(frame, col)
            mats.append(mat)
            names.extend(cnames)
        blocks.append(st.PredictorBlock(name, np.hstack(mats), tuple(names)))
    if not blocks:
        raise ValidationError("analysis spec lacks blocks")
    return frame[outcome].to_numpy(dtype=float), blocks


def _write_result(res: st.TestResult, out) -> None:
    with open(out, "w") as fh:
        fh.write("statistic,df,p_value\n")
        df_txt = "" if res.df is None else repr(res.df)
        fh.write(f"{res.statistic!r},{df_txt},{res.p_value!r}\n")


ANALYZE_TESTS = (
    "friedman",
    "durbin-conover",
    "wilcoxon",
    "mannwhitney",
    "yuen",
    "welch-t",
    "paired-t",
    "pearson",
    "hierarchical",
)


def _cmd_analyze(args) -> int:
    spec = _load_spec(args.spec)
    frame = _spec_frame(spec, args.data)
    test = args.test
    if test == "friedman":
        res = st.friedman(_subject_by_condition(frame, spec).to_numpy())
        _write_result(res, args.out)
    elif test == "durbin-conover":
        pivot = _subject_by_condition(frame, spec)
        p = st.durbin_conover_posthoc(pivot.to_numpy())
        pd.DataFrame(p, index=pivot.columns, columns=pivot.columns).to_csv(args.out)
    elif test in ("wilcoxon", "mannwhitney", "yuen", "welch-t", "paired-t"):
        x, y = _two_samples(frame, spec)
        if test == "wilcoxon":
            res = st.wilcoxon_signed_rank(x, y, mode=spec.get("mode", "auto"))
        elif test == "mannwhitney":
            res = st.mann_whitney_u(x, y, mode=spec.get("mode", "auto"))
        elif test == "yuen":
            res = st.yuen_welch(x, y, trim=float(spec.get("trim", 0.2)))
        elif test == "welch-t":
            res = st.welch_t(x, y)
        else:
            res = st.paired_t(x, y)
        _write_result(res, args.out)
    elif test == "pearson":
        xcol, ycol = _required(spec, "x", "y")
        cov = None
        if spec.get("covariates"):
            mats = [_expand_predictor(frame, c)[0] for c in spec["covariates"]]
            cov = np.hstack(mats)
        res = st.partial_pearson(
            frame[xcol].to_numpy(dtype=float),
            frame[ycol].to_numpy(dtype=float),
            covariates=cov,
        )
        _write_result(res, args.out)
    elif test == "hierarchical":
        outcome, blocks = _hier_blocks(frame, spec)
        model = st.hierarchical_regression(outcome, blocks)
        _write_hier_report(model, args.out)
    else:  # argparse choices make this unreachable
        raise ValidationError(f"unknown test {test!r}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _write_hier_report(model: st.HierModel, out) -> None:
    with open(out, "w") as fh:
        for step in model.steps:
            fh.write(
                f"step {step.block} r2={step.r2!r} delta_r2={step.delta_r2!r} "
                f"f={step.f_stat!r} p={step.f_p!r} aic={step.aic!r} "
                f"degenerate={step.degenerate}\n"
            )
        for name, beta in model.steps[-1].betas.items():
            fh.write(f"beta {name} {beta!r}\n")
        fh.write(f"cohens_f2 {model.cohens_f2!r}\n")


def _cmd_study_reproduce(args) -> int:
    import os

    paths = {t: os.path.join(args.data, f"{t}.csv") for t in ds.TABLE_FIELDS}
    cmap = ds.load_column_map(args.map) if args.map else None
    tables = ds.ingest(paths, cmap)
    os.makedirs(args.out, exist_ok=True)

    report = []
    post = tables.post_ride
    for inventory in ds.INVENTORY_VOCAB:
        block = post[post["inventory"] == inventory]
        wide = block.pivot_table(
            index=["subject", "style", "weather"],
            columns="item",
            values="response",
        )
        if wide.isna().any().any() or wide.shape[1] < 2:
            report.append(f"alpha_{inventory} skipped (incomplete items)")
            continue
        alpha = mdsi_mod.cronbach_alpha(wide.to_numpy(dtype=float))
        report.append(f"alpha_{inventory} {alpha!r}")

    by_style = post[post["inventory"] == "tia"].pivot_table(
        index="subject", columns="style", values="response", aggfunc="mean"
    )
    if not by_style.isna().any().any() and by_style.shape[1] >= 2:
        res = st.friedman(by_style.to_numpy())
        report.append(
            f"friedman_tia_styles chi2={res.statistic!r} df={res.df!r} p={res.p_value!r}"
        )

    conf = ds.classification_confusion(tables.guesses)
    conf.to_csv(os.path.join(args.out, "confusion.csv"))
    report.append(
        "confusion_diagonal "
        + " ".join(repr(float(conf.loc[s, s])) for s in ds.STYLE_VOCAB)
    )

    desc = ds.descriptives(tables.ondrive, ["style", "weather"], "relaxation")
    desc.to_csv(os.path.join(args.out, "ondrive_descriptives.csv"), index=False)

    if args.loadings:
        cfg = mdsi_mod.read_loadings_csv(args.loadings)
        wide = tables.mdsi_items.pivot(index="subject", columns="item", values="response")
        resp = mdsi_mod.ItemResponses(
            wide.to_numpy(),
            tuple(str(s) for s in wide.index),
            _parse_items_arg(args.reverse_items),
        )
        scores = mdsi_mod.refined_factor_scores(resp, cfg, ridge=args.ridge)
        mdsi_mod.write_scores_csv(scores, os.path.join(args.out, "mdsi_scores.csv"))

        merged = tables.ondrive.merge(
            tables.subjects, left_on="subject", right_on="id", how="left"
        )
        factor = pd.DataFrame(
            scores.scores, columns=list(scores.factor_names)
        ).assign(subject=list(scores.subject_ids))
        merged = merged.merge(factor, on="subject", how="left")
        spec = {
            "outcome": "relaxation",
            "blocks": [
                {"name": "sociodemographic", "predictors": ["age", "gender"]},
                {"name": "mdsi", "predictors": list(scores.factor_names)},
                {"name": "context", "predictors": ["weather", "traffic", "road"]},
                {"name": "style", "predictors": ["style"]},
            ],
        }
        outcome, blocks = _hier_blocks(merged, spec)
        try:
            model = st.hierarchical_regression(outcome, blocks)
        except NumericError as err:
            # small pilot exports can be rank-deficient; keep the rest
            report.append(f"hierarchical skipped ({err})")
        else:
            _write_hier_report(model, os.path.join(args.out, "hierarchical.txt"))
            report.append(f"hierarchical_f2 {model.cohens_f2!r}")

    report_path = os.path.join(args.out, "report.txt")
    with open(report_path, "w") as fh:
        fh.write("\n".join(report) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drivestyle")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-track", help="generate a synthetic track CSV")
    p.add_argument("--length", type=float, default=5000.0)
    p.add_argument("--curves", type=int, default=30)
    p.add_argument("--radius-min", type=float, default=80.0)
    p.add_argument("--radius-max", type=float, default=400.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_track)

    p = sub.add_parser("simulate", help="run one style over a track")
    p.add_argument("--track", required=True)
    p.add_argument("--style", choices=BUILTIN_STYLE_NAMES)
    p.add_argument("--style-file")
    p.add_argument("--replay", help="trace CSV to feed back as the target")
    p.add_argument("--traffic", help="oncoming-encounter script CSV")
    p.add_argument("--weather", choices=("dry", "rain"), default="dry")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--vtarget", type=float, default=22.2)
    p.add_argument("--inverted-ramp", action="store_true",
                   help="use the distance-growing traffic ramp variant")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="recover style parameters from a log")
    p.add_argument("--log", required=True)
    p.add_argument("--kmin", type=float, default=0.002)
    p.add_argument("--percentile", default="85",
                   help="GG percentile (number) or 'mean'")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("mdsi", help="questionnaire tools")
    msub = p.add_subparsers(dest="mdsi_command", required=True)
    p = msub.add_parser("score", help="score items to factors")
    p.add_argument("--items", required=True)
    p.add_argument("--loadings", required=True)
    p.add_argument("--rref", help="reference item-correlation CSV (no header)")
    p.add_argument("--ridge", type=float, default=mdsi_mod.DEFAULT_RIDGE)
    p.add_argument("--reverse-items", default="",
                   help="comma-separated 1-based ids of reverse-keyed items")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mdsi_score)

    p = sub.add_parser("analyze", help="run one statistical test")
    p.add_argument("test", choices=ANALYZE_TESTS)
    p.add_argument("--spec", required=True, help="JSON analysis spec")
    p.add_argument("--data", required=True, help="directory of canonical CSVs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("study", help="whole-study operations")
    ssub = p.add_subparsers(dest="study_command", required=True)
    p = ssub.add_parser("reproduce", help="regenerate the descriptive tables")
    p.add_argument("--data", required=True)
    p.add_argument("--map", help="column map JSON for non-canonical headers")
    p.add_argument("--out", required=True)
    p.add_argument("--loadings", help="MDSI loadings CSV (enables scoring steps)")
    p.add_argument("--reverse-items", default="")
    p.add_argument("--ridge", type=float, default=mdsi_mod.DEFAULT_RIDGE)
    p.set_defaults(func=_cmd_study_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as err:
        code = err.code if isinstance(err.code, int) else EXIT_USAGE
        return code
    except ValidationError as err:
        sys.stderr.write(f"validation: {err}\n")
        return EXIT_VALIDATION
    except NumericError as err:
        sys.stderr.write(f"numeric: {err}\n")
        return EXIT_NUMERIC
    except OSError as err:
        sys.stderr.write(f"validation: {err}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
