"""Command-line entry point: ``cganuc {synth,train,predict,eval,sweep,backtest}``.

Settings resolve in three layers: built-in defaults, then a flat JSON config
file (``--config``), then explicit command-line flags.  The resolved settings
are echoed to stderr and embedded in every file written.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from cganuc import data as data_mod
from cganuc import io as cio
from cganuc.autodiff import NonFiniteError
from cganuc.backtest import compare_strategies, non_overlapping
from cganuc.evaluation import evaluate_classification, evaluate_regression, noise_sweep
from cganuc.prediction import predict, summarize
from cganuc.training import TrainConfig, TrainingDivergence, train

log = logging.getLogger("cganuc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

BLOB_BOX = (-4.0, 4.0)

DEFAULTS = {
    **TrainConfig().to_dict(),
    "k": 256,
    "bins": 64,
    "point": "mode",
    "error": "absolute",
    "thresholds": [],
    "a_values": [0.0, 0.25, 0.5, 0.75, 1.0],
    "lookback": 30,
    "horizon": 5,
    "train_fraction": 0.8,
    "cost": 0.0,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def resolve_config(args: argparse.Namespace, keys) -> dict:
    cfg = {k: DEFAULTS[k] for k in keys}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        loaded = json.loads(path.read_text())
        if not isinstance(loaded, dict):
            raise UsageError(f"{path}: config must be a flat JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg.update({k: v for k, v in loaded.items() if k in cfg})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if "hidden" in cfg:
        cfg["hidden"] = list(cfg["hidden"])
    print(f"cganuc: resolved config {json.dumps(cfg, sort_keys=True)}", file=sys.stderr)
    return cfg


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig.from_dict({k: cfg[k] for k in TrainConfig().to_dict()})


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing required {what}")
    return Path(path)


# -- commands ------------------------------------------------------------------

def cmd_synth(args) -> int:
    out = _require(args.out, "--out")
    kind = args.kind
    if kind == "heteroscedastic":
        ds = data_mod.synth_heteroscedastic(args.n, args.seed)
    elif kind == "bimodal":
        ds = data_mod.synth_bimodal(args.n, args.seed)
    elif kind == "blobs":
        ds = data_mod.synth_blobs(args.n, args.classes, args.seed)
        if not args.raw:
            ds.inputs = data_mod.to_unit_box(ds.inputs, *BLOB_BOX)
            ds.note += f" unit-box{list(BLOB_BOX)}"
    elif kind == "prices":
        rng = np.random.default_rng(args.seed)
        rets = 0.0003 + 0.012 * rng.standard_normal(args.n - 1)
        closes = 100.0 * np.cumprod(np.concatenate([[1.0], 1.0 + rets]))
        dates = np.datetime64("2001-01-01") + np.arange(args.n)
        lines = ["date,close"] + [f"{d},{float(c)!r}" for d, c in zip(dates.astype(str), closes)]
        out.write_text("\n".join(lines) + "\n")
        return EXIT_OK
    elif kind == "windows":
        ds = _price_windows(args.prices, args.lookback or DEFAULTS["lookback"],
                            args.horizon or DEFAULTS["horizon"],
                            args.train_fraction or DEFAULTS["train_fraction"], args.split)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown synth kind {kind}")
    cio.save_dataset(ds, out)
    return EXIT_OK


def _price_windows(prices_path, lookback, horizon, train_fraction, split):
    series = data_mod.load_prices_csv(_require(prices_path, "--prices"))
    returns = data_mod.prices_to_returns(series)
    ds = data_mod.make_windows(returns, lookback, horizon, ids=series.dates[1:])
    train_ds, test_ds = data_mod.split_chronological(ds, train_fraction)
    return train_ds if split == "train" else test_ds


TRAIN_KEYS = list(TrainConfig().to_dict())


def cmd_train(args) -> int:
    cfg = resolve_config(args, TRAIN_KEYS)
    ds = cio.load_dataset(_require(args.data, "--data"))
    model_out = _require(args.model_out, "--model-out")
    tc = _train_config(cfg)
    model, report = train(
        ds, tc, on_epoch=lambda r: log.debug("epoch %d d=%.5f g=%.5f (%.3fs)", r.epoch, r.d_loss, r.g_loss, r.seconds)
    )
    cio.save_model(model, model_out)
    report_path = Path(args.report) if args.report else model_out.with_suffix(".train.csv")
    cio.write_csv(report_path, "train-report", tc.to_dict(), ["epoch", "d_loss", "g_loss"],
                  ([r.epoch, r.d_loss, r.g_loss] for r in report.epochs))
    log.info("wrote %s (%d disc / %d gen updates)", model_out, report.disc_updates, report.gen_updates)
    return EXIT_OK


def _load_model_for(args, task: str | None = None):
    model = cio.load_model(_require(args.model, "--model"))
    if task is not None and model.task != task:
        raise data_mod.DataError(f"model is a {model.task} model but a {task} model is required")
    return model


PREDICT_KEYS = ["k", "bins", "seed", "point"]


def cmd_predict(args) -> int:
    cfg = resolve_config(args, PREDICT_KEYS)
    model = _load_model_for(args, args.task)
    ds = cio.load_dataset(_require(args.data, "--data"))
    out = _require(args.out, "--out")
    preds = predict(model, ds.inputs, cfg["k"], cfg["seed"], cfg["bins"], cfg["point"])
    cio.write_predictions(out, preds, {**cfg, "task": model.task}, ds.ids, args.emit_distributions)
    return EXIT_OK


EVAL_KEYS = ["k", "bins", "seed", "error"]


def cmd_eval(args) -> int:
    cfg = resolve_config(args, EVAL_KEYS)
    model = _load_model_for(args)
    ds = cio.load_dataset(_require(args.data, "--data"))
    if model.task == "regression":
        report = evaluate_regression(model, ds, cfg["k"], cfg["seed"], cfg["bins"], cfg["error"])
    else:
        report = evaluate_classification(model, ds, cfg["k"], cfg["seed"], cfg["bins"])
    text = json.dumps({"format": "cganuc-eval v1", "config": cfg, "report": report.to_dict()},
                      sort_keys=True, indent=2)
    _require(args.out, "--out").write_text(text + "\n")
    return EXIT_OK


SWEEP_KEYS = ["k", "bins", "seed", "a_values"]


def cmd_sweep(args) -> int:
    cfg = resolve_config(args, SWEEP_KEYS)
    model = _load_model_for(args, "classification")
    ds = cio.load_dataset(_require(args.data, "--data"))
    points = noise_sweep(model, ds, cfg["a_values"], cfg["k"], cfg["seed"], cfg["bins"])
    cio.write_csv(_require(args.out, "--out"), "sweep", cfg, ["a", "accuracy", "median_eta"],
                  ([p.a, p.accuracy, p.median_eta] for p in points))
    return EXIT_OK


BACKTEST_KEYS = ["k", "bins", "seed", "thresholds", "lookback", "horizon", "train_fraction", "cost"]


def cmd_backtest(args) -> int:
    cfg = resolve_config(args, BACKTEST_KEYS)
    out_dir = _require(args.out_dir, "--out-dir")
    if not args.prices:
        raise UsageError("missing required --prices")
    test = _price_windows(args.prices, cfg["lookback"], cfg["horizon"], cfg["train_fraction"], "test")
    if args.predictions:
        _, recs = cio.read_predictions(args.predictions)
        if len(recs) != test.n:
            raise data_mod.DataError(f"{len(recs)} predictions for {test.n} test windows")
        points = np.array([r["point"][0] for r in recs])
        etas = np.array([r["eta"][0] for r in recs])
    elif args.model:
        model = _load_model_for(args, "regression")
        s = summarize(model, test.inputs, cfg["k"], cfg["seed"], cfg["bins"])
        points, etas = s.point[:, 0], s.eta
    else:
        raise UsageError("backtest needs --model or --predictions")
    idx = non_overlapping(test.n, cfg["horizon"])
    ids = [test.ids[i] for i in idx]
    reports = compare_strategies(points[idx], etas[idx], test.targets[idx, 0], cfg["thresholds"],
                                 cfg["cost"], ids)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    for i, rep in enumerate(reports):
        name = "baseline" if rep.threshold is None else f"threshold_{i}"
        curve = rep.equity_curve()
        cio.write_csv(out_dir / f"equity_{name}.csv", "equity", {**cfg, "strategy_threshold": rep.threshold},
                      ["date", "position", "daily_return", "cumulative"],
                      ([d, p.name.lower(), float(r), float(c)]
                       for d, p, r, c in zip(ids, rep.positions, rep.daily_returns, curve)))
        summary.append([name, "" if rep.threshold is None else rep.threshold, rep.cumulative, rep.std,
                        rep.counts["long"], rep.counts["short"], rep.counts["neutral"]])
    cio.write_csv(out_dir / "summary.csv", "backtest-summary", cfg,
                  ["strategy", "threshold", "cumulative_return", "std", "n_long", "n_short", "n_neutral"], summary)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cganuc", description="cGAN predictor with entropy-based uncertainty")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic dataset or price file")
    s.add_argument("kind", choices=["heteroscedastic", "bimodal", "blobs", "prices", "windows"])
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--raw", action="store_true", help="blobs: keep raw plane coordinates")
    s.add_argument("--prices")
    s.add_argument("--split", choices=["train", "test"], default="train")
    s.add_argument("--lookback", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--train-fraction", type=float)
    s.add_argument("--out")

    def common(sp, keys):
        sp.add_argument("--config")
        if "k" in keys:
            sp.add_argument("--k", type=int)
        if "bins" in keys:
            sp.add_argument("--bins", type=int)
        if "seed" in keys:
            sp.add_argument("--seed", type=int)

    t = sub.add_parser("train", help="train a model")
    common(t, TRAIN_KEYS)
    t.add_argument("--data")
    t.add_argument("--model-out")
    t.add_argument("--report")
    t.add_argument("--task", choices=["regression", "classification"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr-gen", type=float)
    t.add_argument("--lr-disc", type=float)
    t.add_argument("--disc-steps", type=int)
    t.add_argument("--noise-dim", type=int)
    t.add_argument("--hidden", type=_ints)
    t.add_argument("--u", type=int)
    t.add_argument("--condition", choices=["raw", "features"])

    pr = sub.add_parser("predict", help="Monte Carlo predictions with uncertainty")
    common(pr, PREDICT_KEYS)
    pr.add_argument("--model")
    pr.add_argument("--data")
    pr.add_argument("--out")
    pr.add_argument("--task", choices=["regression", "classification"])
    pr.add_argument("--point", choices=["mode", "mean", "median"])
    pr.add_argument("--emit-distributions", action="store_true")

    e = sub.add_parser("eval", help="correlation / accuracy / t-statistic report")
    common(e, EVAL_KEYS)
    e.add_argument("--model")
    e.add_argument("--data")
    e.add_argument("--out")
    e.add_argument("--error", choices=["absolute", "squared"])

    sw = sub.add_parser("sweep", help="accuracy and median uncertainty versus input noise")
    common(sw, SWEEP_KEYS)
    sw.add_argument("--model")
    sw.add_argument("--data")
    sw.add_argument("--out")
    sw.add_argument("--a-values", type=_floats)

    b = sub.add_parser("backtest", help="long/short/neutral strategy comparison")
    common(b, BACKTEST_KEYS)
    b.add_argument("--prices")
    b.add_argument("--model")
    b.add_argument("--predictions")
    b.add_argument("--out-dir")
    b.add_argument("--thresholds", type=_floats)
    b.add_argument("--lookback", type=int)
    b.add_argument("--horizon", type=int)
    b.add_argument("--train-fraction", type=float)
    b.add_argument("--cost", type=float)
    return p


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "backtest": cmd_backtest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cganuc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergence, NonFiniteError, FloatingPointError) as exc:
        print(f"cganuc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, data_mod.DataError, cio.FormatError, ValueError, KeyError) as exc:
        print(f"cganuc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
