"""Command line entry point: ``hardc <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric error (including a failing self test).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, HardcError, NumericError, SpecError

log = logging.getLogger("hardc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value settings file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardc", description="ECG beat classification pipeline")
    parser.add_argument("--version", action="version", version=f"hardc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="raw record -> z-scored beat CSVs (all, train, test)")
    _common(p)
    p.add_argument("--record", type=Path, help="samples file ('fs=<rate>' header, one value per line)")
    p.add_argument("--annotations", type=Path, help="'<index>,<class code>' per line")
    p.add_argument("--demo", action="store_true", help="generate a synthetic labeled record instead")

    p = sub.add_parser("synth", help="train a conditional GAN and write a class-balanced beat CSV")
    _common(p)
    p.add_argument("--beats", type=Path, help="input beat CSV (default OUT/train.csv)")
    p.add_argument("--generator", type=Path, help="reuse a saved generator instead of training")

    p = sub.add_parser("train", help="fit the classifier; writes model.ckpt and history.csv")
    _common(p)
    p.add_argument("--beats", type=Path, help="training CSV (default OUT/balanced.csv, else OUT/train.csv)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)

    p = sub.add_parser("eval", help="score a checkpoint; writes report and confusion files")
    _common(p)
    p.add_argument("--model", type=Path, help="checkpoint (default OUT/model.ckpt)")
    p.add_argument("--beats", type=Path, help="labeled beat CSV (default OUT/test.csv)")

    p = sub.add_parser("predict", help="stream per-beat class probabilities as CSV on stdout")
    _common(p)
    p.add_argument("--model", type=Path, help="checkpoint (default OUT/model.ckpt)")
    p.add_argument("--beats", type=Path, required=True)

    p = sub.add_parser("bench", help="time a dilated conv stack against a dense conv of equal reach")
    _common(p)
    p.add_argument("--width", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--iters", type=int)

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    _common(p)
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.set("seed", args.seed)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(key.strip(), value)
    flag_keys = {
        "epochs": "train.epochs",
        "batch": "train.batch",
        "lr": "train.lr",
        "width": "bench.width",
        "levels": "bench.levels",
        "iters": "bench.iters",
    }
    for attr, key in flag_keys.items():
        v = getattr(args, attr, None)
        if v is not None:
            cfg.set(key, v)
    if args.no_plots:
        cfg.set("report.plots", False)
    return cfg


def _read_beats(path: Path):
    from .record_io import parse_beat_csv, sniff_segment_len

    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    return parse_beat_csv(data, sniff_segment_len(data))


def _write(path: Path, data: bytes | str) -> None:
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)
    log.info("wrote %s", path)


# ----------------------------------------------------------------- subcommands


def cmd_preprocess(args, cfg: RunConfig, out: Path) -> int:
    from .dsp.pipeline import run_pipeline
    from .record_io import read_raw_record, stratified_split, write_beat_csv, write_raw_record

    if args.demo:
        from .synthetic import synthetic_ecg

        rng = np.random.default_rng([cfg["seed"], 20])
        n = cfg["data.demo_beats"]
        # skewed class mix so the balancing step has work to do
        labels = rng.choice(5, size=n, p=[0.4, 0.15, 0.15, 0.15, 0.15])
        rec = synthetic_ecg(n, 72, seed=cfg["seed"], noise=cfg["data.demo_noise"], labels=labels).record
        samples, ann = write_raw_record(rec)
        _write(out / "record.txt", samples)
        _write(out / "record_ann.txt", ann)
    else:
        if args.record is None or args.annotations is None:
            raise UsageError("preprocess needs --record and --annotations (or --demo)")
        try:
            rec = read_raw_record(args.record, args.annotations)
        except OSError as exc:
            raise DataError(f"cannot read record: {exc}") from None
    pcfg = cfg.pipeline()
    res = run_pipeline(rec, pcfg)
    ds = res.dataset
    if len(ds) == 0:
        raise DataError("no labeled beats survived preprocessing")
    train, test = stratified_split(ds, cfg["data.train_fraction"], cfg["seed"])
    _write(out / "beats.csv", write_beat_csv(ds))
    _write(out / "train.csv", write_beat_csv(train))
    _write(out / "test.csv", write_beat_csv(test))
    if res.delineation is not None:
        rows = ["qrs_onset,r_peak,qrs_offset,carried"]
        rows += [f"{b.qrs_onset},{b.r_peak},{b.qrs_offset},{int(b.carried)}" for b in res.delineation.beats]
        _write(out / "delineation.csv", "\n".join(rows) + "\n")
    if cfg["report.plots"]:
        from .plots import plot_preprocessing

        plot_preprocessing(
            rec.signal.samples, res.filtered.samples, res.denoised.samples, res.all_peaks,
            rec.signal.fs, out / "preprocessing.png",
        )
    counts = ds.class_counts()
    print(f"{len(ds)} beats ({len(train)} train, {len(test)} test); per class {counts.tolist()}")
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig, out: Path) -> int:
    from .cgan import (
        augment_to_balance,
        load_generator,
        save_generator,
        train_cgan,
    )
    from .record_io import write_beat_csv

    ds = _read_beats(args.beats or out / "train.csv")
    if args.generator:
        g = load_generator(args.generator)
        history = []
    else:
        res = train_cgan(ds, cfg.gan_spec(ds.segment_len), cfg.gan_hyper())
        g, history = res.generator, res.history
        save_generator(out / "generator.ckpt", g, cfg["seed"])
        rows = ["epoch,loss_d,loss_g"] + [f"{i},{a:.9g},{b:.9g}" for i, (a, b) in enumerate(history, 1)]
        _write(out / "gan_history.csv", "\n".join(rows) + "\n")
    balanced = augment_to_balance(ds, g, cfg.balance_target(), seed=cfg["seed"])
    _write(out / "balanced.csv", write_beat_csv(balanced))
    if cfg["report.plots"]:
        from .plots import plot_beats, plot_history

        plot_beats(ds, out / "synthetic.png", synthetic=balanced.subset(np.arange(len(ds), len(balanced))))
        if history:
            plot_history(history, out / "gan_history.png", labels=("discriminator loss", "generator loss"))
    print(f"{len(ds)} -> {len(balanced)} beats; per class {balanced.class_counts().tolist()}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig, out: Path) -> int:
    from .model import build_model, history_csv, save_checkpoint, train

    path = args.beats
    if path is None:
        path = out / "balanced.csv" if (out / "balanced.csv").exists() else out / "train.csv"
    ds = _read_beats(path)
    spec = cfg.model_spec(ds.segment_len)
    model = build_model(spec, cfg["seed"])
    ck = train(model, ds, cfg.train_hyper())
    save_checkpoint(out / "model.ckpt", ck)
    _write(out / "history.csv", history_csv(ck.history))
    if cfg["report.plots"]:
        from .plots import plot_history

        plot_history(ck.history, out / "history.png")
    loss, acc = ck.history[-1]
    print(f"trained {len(ck.history)} epochs on {len(ds)} beats: loss {loss:.5f}, train accuracy {acc:.4f}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig, out: Path) -> int:
    from .metrics import confusion_csv, correlation_matrix, emit_report, evaluate
    from .model import load_checkpoint

    ck = load_checkpoint(args.model or out / "model.ckpt")
    ds = _read_beats(args.beats or out / "test.csv")
    if len(ds) == 0:
        raise DataError("evaluation set is empty")
    t0 = time.perf_counter()
    probs = ck.model().predict_proba(ds.beats)
    report = evaluate(probs, ds.labels, seconds=time.perf_counter() - t0)
    # wall-clock time goes to its own file so the reports stay reproducible
    _write(out / "report.txt", emit_report(report, "text", timing=False))
    _write(out / "report.csv", emit_report(report, "csv"))
    _write(out / "report.jsonl", emit_report(report, "json_lines", timing=False))
    _write(out / "timing.csv", f"stage,seconds\neval,{report.seconds:.6f}\n")
    _write(out / "confusion.csv", confusion_csv(report.confusion))
    if cfg["report.plots"]:
        from .plots import plot_confusion, plot_correlation, plot_metrics

        plot_confusion(report.confusion.counts, out / "confusion.png")
        plot_metrics(report, out / "metrics.png")
        plot_correlation(correlation_matrix(ds.beats), out / "correlation.png")
    sys.stdout.write(emit_report(report, "text").decode("utf-8"))
    return EXIT_OK


def cmd_predict(args, cfg: RunConfig, out: Path) -> int:
    from .model import load_checkpoint
    from .record_io import CLASS_NAMES

    ck = load_checkpoint(args.model or out / "model.ckpt")
    ds = _read_beats(args.beats)
    model = ck.model()
    print("index," + ",".join(f"p_{n}" for n in CLASS_NAMES) + ",predicted")
    for start in range(0, len(ds), 256):
        probs = model.predict_proba(ds.beats[start : start + 256])
        for i, row in enumerate(probs, start=start):
            print(f"{i}," + ",".join(f"{v:.6f}" for v in row) + f",{CLASS_NAMES[int(np.argmax(row))]}")
    return EXIT_OK


def cmd_bench(args, cfg: RunConfig, out: Path) -> int:
    from .bench import run_bench

    r = run_bench(
        width=cfg["bench.width"],
        levels=cfg["bench.levels"],
        channels=cfg["bench.channels"],
        length=cfg["bench.length"],
        iters=cfg["bench.iters"],
        repeats=cfg["bench.repeats"],
        seed=cfg["seed"],
    )
    _write(out / "bench.csv", r.csv())
    print(f"receptive field {r.receptive_field} samples, {r.iters} forward passes (best of {cfg['bench.repeats']})")
    print(f"dilated stack  {r.dilated_s:.4f} s")
    print(f"dense conv     {r.dense_s:.4f} s")
    print(f"ratio          {r.ratio:.3f}")
    return EXIT_OK


def cmd_selftest(args, cfg: RunConfig, out: Path) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_NUMERIC


COMMANDS = {
    "preprocess": cmd_preprocess,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "bench": cmd_bench,
    "selftest": cmd_selftest,
}


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _config(args)
        out = args.out
        if args.command not in ("predict", "selftest"):  # these two write no files
            out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except (UsageError, ConfigError, SpecError) as exc:
        print(f"hardc {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"hardc {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"hardc {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HardcError as exc:
        print(f"hardc {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
