"""``rampcast`` command line: ingest, synth, label, detect, fit, forecast, evaluate, report, version.

Exit status is 0 on success, 1 on runtime or configuration errors and 2 on
usage errors. Artifacts are staged and only moved into the output directory
once a command has fully succeeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from rampcast import __version__, config as cfgmod, linear, rnn
from rampcast.binary import detect
from rampcast.core import Frame, SeriesError, fit_scaler, resample_mean
from rampcast.evaluation import parse_reports_json, reports_csv, reports_json
from rampcast.ingest import IngestError, ingest
from rampcast.io import Staging, dump_json, iso, load_json, read_frame, write_frame, write_rows
from rampcast.pipeline import evaluate
from rampcast.synth import (
    RNG_NAME,
    SynthConfig,
    default_composite_config,
    gen_arma,
    gen_composite,
    gen_ramp_profile,
    random_ramp_config,
)
from rampcast.wavelet import AbsoluteThreshold, QuantileThreshold, classify, extract_events, ramp_function

log = logging.getLogger("rampcast")


class CLIError(RuntimeError):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="INI run configuration")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--model", action="append", metavar="NAME", help="model to run (repeatable)")
    p.add_argument("--rate", choices=sorted(cfgmod.RATES))
    p.add_argument("--selection", choices=["univariate", "multivariate"])
    p.add_argument("--lambda-max", type=int, metavar="N")
    p.add_argument("--threshold-quantile", type=float, metavar="Q")
    p.add_argument("--test-fraction", type=float, metavar="F")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="rampcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("ingest", parents=[common], help="parse SCADA CSVs into a farm feature frame")
    p.add_argument("inputs", nargs="*", type=Path, help="SCADA files (default: [ingest] paths)")

    p = sub.add_parser("synth", parents=[common], help="generate a seeded synthetic dataset")
    p.add_argument("--kind", choices=["arma", "ramp-profile", "composite"], default="composite")
    p.add_argument("--length", type=int, default=2000)
    p.add_argument("--phi", type=float, nargs="*", default=[0.8])
    p.add_argument("--theta", type=float, nargs="*", default=[])
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--events", type=int, default=3, help="ramp count for ramp-profile")
    p.add_argument("--noise", type=float, default=20.0, help="noise sigma (kW) for ramp-profile/composite")

    for name, helptext in (
        ("label", "ramp function, classes and events for a power series"),
        ("detect", "binary ramp flags under a classic definition"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("input", type=Path)
        if name == "detect":
            p.add_argument("--method", choices=["endpoint", "minmax", "rate", "filtered"])
            p.add_argument("--delta-t", type=int)
            p.add_argument("--p-val", type=float)
            p.add_argument("--p-rr", type=float)
            p.add_argument("--n-nam", type=int)

    p = sub.add_parser("fit", parents=[common], help="fit one model and save it as JSON")
    p.add_argument("input", type=Path)

    p = sub.add_parser("forecast", parents=[common], help="forecast from the end of a history")
    p.add_argument("model_file", type=Path)
    p.add_argument("input", type=Path)
    p.add_argument("--horizon", type=int, default=1)

    p = sub.add_parser("evaluate", parents=[common], help="train/test evaluation with ramp-conditioned metrics")
    p.add_argument("input", type=Path)

    p = sub.add_parser("report", parents=[common], help="merge report.json files into one table")
    p.add_argument("inputs", nargs="+", type=Path)

    sub.add_parser("version", help="print the version")
    return parser


def _resolved(args) -> tuple[cfgmod.RunConfig, "cfgmod.configparser.ConfigParser"]:
    cp = cfgmod.load(args.config)
    o = cfgmod.override
    o(cp, "run", "out", args.out)
    o(cp, "run", "seed", args.seed)
    o(cp, "run", "models", args.model)
    o(cp, "run", "rate", args.rate)
    o(cp, "run", "selection", args.selection)
    o(cp, "run", "test_fraction", args.test_fraction)
    o(cp, "wavelet", "lambda_max", args.lambda_max)
    o(cp, "threshold", "quantile", args.threshold_quantile)
    if args.command == "detect":
        o(cp, "detect", "method", args.method)
        o(cp, "detect", "delta_t", args.delta_t)
        o(cp, "detect", "p_val", args.p_val)
        o(cp, "detect", "p_rr", args.p_rr)
        o(cp, "detect", "n_nam", args.n_nam)
    return cfgmod.resolve(cp), cp


def _echo_config(st: Staging, cp) -> None:
    st.path("config.ini").write_text(f"# rampcast {__version__}\n" + cfgmod.dump(cp), encoding="utf-8")


def _require(path: Path) -> Path:
    if not path.is_file():
        raise CLIError(f"input file not found: {path}")
    return path


def _load_frame(path: Path, rc: cfgmod.RunConfig) -> Frame:
    frame = read_frame(_require(path))
    col = rc.column
    if col not in frame:
        if len(frame.names) == 1:
            only = frame.names[0]
            frame = Frame({col: frame[only]} )
        else:
            raise CLIError(f"{path}: power column {col!r} not found (columns: {frame.names})")
    if frame.interval == rc.interval:
        return frame
    if frame.interval > rc.interval:
        raise CLIError(f"{path}: data interval {frame.interval}s is coarser than requested rate {rc.interval}s")
    ratio = rc.interval // frame.interval
    min_count = min(rc.resample_min_count, ratio)
    return Frame({k: resample_mean(v, rc.interval, min_count) for k, v in frame.columns.items()})


def cmd_ingest(args, rc, cp) -> None:
    paths = args.inputs or rc.paths
    if not paths:
        raise CLIError("no input files: pass paths or set [ingest] paths")
    for p in paths:
        _require(Path(p))
    frame, report = ingest(paths, rc.mapping, rc.farm)
    with Staging(rc.out) as st:
        write_frame(frame, st.path("features.csv"))
        dump_json(report.to_dict(), st.path("ingest_report.json"))
        _echo_config(st, cp)
    log.info("ingested %d rows (%d rejected)", report.rows_read, report.rows_rejected)


def cmd_synth(args, rc, cp) -> None:
    seed = rc.seed
    if args.kind == "arma":
        sc = SynthConfig(
            kind="arma", length=args.length, interval=rc.interval, seed=seed,
            phi=tuple(args.phi), theta=tuple(args.theta), sigma=args.sigma, mean=args.mean,
        )
        series = gen_arma(sc)
        frame, events = Frame({rc.column: series}), []
    elif args.kind == "ramp-profile":
        sc = random_ramp_config(seed, length=args.length, noise_sigma=args.noise, n_events=args.events)
        sc = SynthConfig(**{**sc.__dict__, "interval": rc.interval})
        truth = gen_ramp_profile(sc)
        frame, events = Frame({rc.column: truth.series}), truth.events
    else:
        sc = default_composite_config(args.length, seed, rc.interval)
        sc = SynthConfig(**{**sc.__dict__, "noise_sigma": args.noise if args.noise > 0 else sc.noise_sigma})
        frame, truth = gen_composite(sc, rc.farm.rated_power)
        if rc.column != "P_tot":
            frame = Frame({**frame.columns, rc.column: frame["P_tot"]})
        events = truth.events
    with Staging(rc.out) as st:
        write_frame(frame, st.path("series.csv"))
        dump_json(
            {"rng": RNG_NAME, "seed": seed, "kind": args.kind, "events": [e.to_dict() for e in events]},
            st.path("events.json"),
        )
        _echo_config(st, cp)


def cmd_label(args, rc, cp) -> None:
    frame = _load_frame(args.input, rc)
    power = frame[rc.column]
    rf = ramp_function(power, rc.eval.wavelet)
    spec = AbsoluteThreshold(rc.absolute_threshold) if rc.absolute_threshold else QuantileThreshold(rc.eval.threshold_quantile)
    classes = classify(rf, spec)
    dropped: list = []
    events = extract_events(classes, power, dropped)
    codes = classes.codes()
    with Staging(rc.out) as st:
        write_rows(
            st.path("labels.csv"),
            ["timestamp", "power", "R_t", "class"],
            ([iso(power.timestamp(i)), power.values[i], rf.values[i], codes[i]] for i in range(len(power))),
        )
        dump_json(
            {"threshold": classes.threshold, "events": [e.to_dict() for e in events], "dropped_runs": dropped},
            st.path("events.json"),
        )
        _echo_config(st, cp)


def cmd_detect(args, rc, cp) -> None:
    frame = _load_frame(args.input, rc)
    power = frame[rc.column]
    det = detect(rc.detect_method, power, rc.binary)
    with Staging(rc.out) as st:
        write_rows(
            st.path("flags.csv"),
            ["timestamp", "power", "evaluable", "ramp", "direction"],
            (
                [iso(power.timestamp(i)), power.values[i], int(det.evaluable[i]), int(det.flags[i]), int(det.direction[i])]
                for i in range(len(power))
            ),
        )
        dump_json(
            {
                "method": det.method,
                "parameters": rc.binary.__dict__,
                "evaluable": int(det.evaluable.sum()),
                "not_evaluable": int((~det.evaluable).sum()),
                "ramps": det.count,
                "ramp_frequency": det.frequency,
                "up": int((det.direction > 0).sum()),
                "down": int((det.direction < 0).sum()),
            },
            st.path("summary.json"),
        )
        _echo_config(st, cp)


def _single_model(rc):
    if len(rc.models) != 1:
        raise CLIError("fit needs exactly one --model")
    return rc.models[0]


def cmd_fit(args, rc, cp) -> None:
    spec = _single_model(rc)
    frame = _load_frame(args.input, rc)
    y = frame[rc.column].values
    with Staging(rc.out) as st:
        if spec.kind == "persistence":
            dump_json({"kind": "persistence"}, st.path("model.json"))
        elif spec.kind in ("arma", "arima"):
            if np.isnan(y).any():
                raise CLIError("input has absent values; regularise or impute before fitting")
            d = spec.d if spec.kind == "arima" else 0
            model = linear.fit_arima(y, spec.p, d, spec.q, include_intercept=(d == 0))
            dump_json(model.to_dict(), st.path("model.json"))
        else:
            feats = spec.lstm.features(rc.column)
            scaler = fit_scaler(frame.matrix(feats))
            ds = rnn.make_windows(frame, spec.lstm.lags, rc.column, scaler, feats)
            params, hist = rnn.train(spec.lstm, ds)
            rnn.save_model(st.path("model.json"), spec.lstm, params, scaler, feats, rc.column)
            dump_json({"loss": hist.loss}, st.path("train_history.json"))
        _echo_config(st, cp)


def cmd_forecast(args, rc, cp) -> None:
    if args.horizon < 1:
        raise CLIError("--horizon must be >= 1")
    doc = load_json(_require(args.model_file))
    frame = _load_frame(args.input, rc)
    power = frame[rc.column]
    y = power.values
    kind = doc.get("kind")
    if kind == "persistence":
        fc = linear.persistence_forecast(y, args.horizon)
    elif kind == "arima":
        fc = linear.forecast(linear.ARMAModel.from_dict(doc), y, args.horizon)
    elif kind == "lstm":
        cfg, params, scaler, feats, target = rnn.load_model(args.model_file)
        if len(feats) > 1 and args.horizon > 1:
            raise CLIError("multivariate LSTM forecasts are one step only (future covariates are unknown)")
        hist = frame.matrix(feats)[-cfg.lags :]
        window = scaler.apply(hist)
        fc = np.empty(args.horizon)
        for h in range(args.horizon):
            pred, _ = rnn.forward(params, window)
            fc[h] = scaler.invert(pred, feature=0)
            window = np.vstack([window[1:], [[pred]]]) if len(feats) == 1 else window
    else:
        raise CLIError(f"{args.model_file}: unknown model kind {kind!r}")
    n = len(power)
    with Staging(rc.out) as st:
        write_rows(st.path("forecast.csv"), ["timestamp", "forecast"], ([iso(power.timestamp(n + h)), fc[h]] for h in range(args.horizon)))
        _echo_config(st, cp)


def _slug(name: str, i: int) -> str:
    return f"{i:02d}_" + "".join(c.lower() if c.isalnum() else "_" for c in name)


def cmd_evaluate(args, rc, cp) -> None:
    frame = _load_frame(args.input, rc)
    results = evaluate(frame, rc.models, rc.eval)
    reports = [r.report for r in results]
    with Staging(rc.out) as st:
        st.path("report.csv").write_text(reports_csv(reports), encoding="utf-8")
        st.path("report.json").write_text(reports_json(reports), encoding="utf-8")
        for i, (res, spec) in enumerate(zip(results, rc.models)):
            name = _slug(f"{res.report.model}_{res.report.selection}", i)
            codes = {1: "U", -1: "D", 0: "N"}
            write_rows(
                st.path(f"plots/{name}.csv"),
                ["timestamp", "actual", "predicted", "R_t", "class"],
                (
                    [iso(ts), a, p, r, codes[int(c)]]
                    for ts, a, p, r, c in zip(res.timestamps, res.actual, res.predicted, res.ramp, res.labels)
                ),
            )
        _echo_config(st, cp)
    for r in reports:
        print(f"{r.model:<12} {r.selection:<12} test MAE {r.test.mae:10.2f}  RMSE {r.test.rmse:10.2f}")


def cmd_report(args, rc, cp) -> None:
    reports = []
    for p in args.inputs:
        reports.extend(parse_reports_json(_require(p).read_text(encoding="utf-8")))
    with Staging(rc.out) as st:
        st.path("report.csv").write_text(reports_csv(reports), encoding="utf-8")
        st.path("report.json").write_text(reports_json(reports), encoding="utf-8")


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "label": cmd_label,
    "detect": cmd_detect,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    if args.command == "version":
        print(f"rampcast {__version__}")
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        rc, cp = _resolved(args)
        COMMANDS[args.command](args, rc, cp)
    except cfgmod.ConfigError as exc:
        print("error: invalid configuration", file=sys.stderr)
        for item in exc.problems:
            print(f"  - {item}", file=sys.stderr)
        return 1
    except (CLIError, SeriesError, IngestError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
