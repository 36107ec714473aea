"""Command-line entry point: ``tomeval <subcommand> ...``.

Datasets on disk use one layout everywhere: ``<dir>/images/<id>.png`` and
``<dir>/annotations/<id>.xml``. Each subcommand writes its outputs plus a
``run_manifest.json`` into ``--out``.

Exit status: 0 on success, 1 on validation or usage errors, 2 on IO errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__
from .augment import augment_dataset
from .calibration import load_calibration, sweep
from .config import config_hash, defaults_for, load_config
from .errors import DataIOError, TomevalError, UsageError
from .manifest import (
    build_manifest,
    frames_from_csv,
    frames_from_dir,
    split_train_val,
    subsample_frames,
    write_manifest,
)
from .metrics import INTERPOLATIONS, EvalConfig, counts_vs_threshold, evaluate
from .raster import IMAGE_EXTENSIONS
from .report import (
    Series,
    SummaryRow,
    emit_plot,
    emit_summary,
    read_timing_log,
    timing_stats,
)
from .tiling import KeepPolicy, tile_dataset
from .voc import load_annotation, load_annotation_dir, load_detection_dir

log = logging.getLogger("tomeval")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
RUN_MANIFEST = "run_manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _annotation_dir(path) -> Path:
    path = Path(path)
    return path / "annotations" if (path / "annotations").is_dir() else path


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, [])]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


# ---------------------------------------------------------------- subcommands


def cmd_subsample(args, out: Path) -> dict:
    _need(args, "frames")
    frames_dir = Path(args.frames)
    if args.timestamps:
        frames = frames_from_csv(args.timestamps)
        frames = [f.__class__(str(frames_dir / f.path), f.timestamp) for f in frames]
    else:
        frames = frames_from_dir(frames_dir, args.fps, IMAGE_EXTENSIONS)
    selected = subsample_frames(frames, args.interval)
    img_out, xml_out = out / "images", out / "annotations"
    img_out.mkdir(parents=True, exist_ok=True)
    ann_dir = Path(args.annotations) if args.annotations else None
    n_xml = 0
    for f in selected:
        src = Path(f.path)
        if not src.is_file():
            raise DataIOError(f"frame not found: {src}")
        shutil.copyfile(src, img_out / src.name)
        if ann_dir is not None:
            xml = ann_dir / f"{src.stem}.xml"
            if xml.is_file():
                xml_out.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(xml, xml_out / xml.name)
                n_xml += 1
    with open(out / "frames.csv", "w", encoding="utf-8") as fh:
        fh.write("path,timestamp\n")
        for f in selected:
            fh.write(f"{Path(f.path).name},{f.timestamp!r}\n")
    log.info("kept %d of %d frames", len(selected), len(frames))
    return {"frames_in": len(frames), "frames_out": len(selected), "annotations_out": n_xml}


def cmd_tile(args, out: Path) -> dict:
    _need(args, "data")
    data = Path(args.data)
    anns = list(load_annotation_dir(_annotation_dir(data)).values())
    images_dir = data / "images" if (data / "images").is_dir() else data
    policy = KeepPolicy(args.min_visible, args.min_side)
    records = tile_dataset(anns, images_dir, out, args.size, args.min_overlap, policy,
                           args.drop_empty, args.workers)
    return {"frames": len(anns), "tiles": len(records)}


def cmd_augment(args, out: Path) -> dict:
    _need(args, "data")
    policy = KeepPolicy(args.min_visible, args.min_side)
    records = augment_dataset(args.data, out, args.multiplicity, args.seed, policy, args.workers)
    return {"augmented": len(records)}


def cmd_split(args, out: Path) -> dict:
    _need(args, "data")
    data = Path(args.data)
    ids = sorted(p.stem for p in (data / "annotations").glob("*.xml"))
    train, val = split_train_val(ids, args.train_fraction, args.seed, args.group_by_parent)
    out.mkdir(parents=True, exist_ok=True)
    result = {}
    for name, subset in (("train", sorted(train)), ("val", sorted(val))):
        manifest = build_manifest(name, subset, data, relative_to=out)
        write_manifest(manifest, out / f"{name}.csv")
        result[name] = {"images": manifest.n_images, "annotations": manifest.n_annotations}
    return result


def _load_eval_inputs(args):
    _need(args, "det")
    if not args.manifest:
        _need(args, "gt")
    if args.manifest:
        from .manifest import read_manifest

        manifest = read_manifest(args.manifest, verify=False)
        base = Path(args.manifest).parent
        gts = {r.id: load_annotation(base / r.xml_path) for r in manifest.rows}
    else:
        gts = load_annotation_dir(_annotation_dir(args.gt))
    dets = load_detection_dir(args.det)
    if args.exclude_augmented:
        gts = {k: v for k, v in gts.items() if "_aug" not in k}
    stray = sorted(set(dets) - set(gts))
    if stray:
        log.warning("%d detection files have no ground truth and are ignored", len(stray))
    dets = {k: v for k, v in dets.items() if k in gts}
    return gts, dets


def cmd_evaluate(args, out: Path) -> dict:
    gts, dets = _load_eval_inputs(args)
    threshold_pct = args.threshold
    if args.threshold_from:
        threshold_pct = load_calibration(args.threshold_from)
    config = EvalConfig(args.iou, threshold_pct / 100, args.interp)
    report = evaluate(dets, gts, config)
    out.mkdir(parents=True, exist_ok=True)
    data = report.to_json()
    data["n_images"] = len(gts)
    _dump_json(data, out / "report.json")
    with open(out / "pr_curve.csv", "w", encoding="utf-8") as fh:
        fh.write("class,recall,precision,confidence\n")
        for label, res in sorted(report.per_class.items()):
            for r, p, c in zip(res.curve.recall, res.curve.precision, res.curve.confidence):
                fh.write(f"{label},{float(r)!r},{float(p)!r},{float(c)!r}\n")
    rows = counts_vs_threshold(dets, gts, args.step / 100, EvalConfig(args.iou))
    with open(out / "counts_vs_threshold.csv", "w", encoding="utf-8") as fh:
        fh.write("threshold,tp,fp,fn\n")
        for t, c in rows:
            fh.write(f"{t!r},{c.tp},{c.fp},{c.fn}\n")
    totals = report.totals
    log.info("mAP %.4f  P %.4f  R %.4f  F1 %.4f", report.map, totals.precision,
             totals.recall, totals.f1)
    return {"map": report.map, "f1": totals.f1, "threshold_pct": threshold_pct}


def cmd_calibrate(args, out: Path) -> dict:
    gts, dets = _load_eval_inputs(args)
    result = sweep(dets, gts, EvalConfig(args.iou), args.step / 100)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(result.to_csv(), encoding="utf-8")
    _dump_json(result.to_json(), out / "calibration.json")
    log.info("best threshold %g%% (F1 %.4f)", result.best_threshold_pct, result.best_f1)
    return result.to_json()


def _pairs(values, flag):
    out = []
    for v in values or []:
        name, sep, path = v.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"{flag} expects NAME=PATH, got {v!r}")
        out.append((name, Path(path)))
    return out


def cmd_report(args, out: Path) -> dict:
    _need(args, "run")
    runs = _pairs(args.run, "--run")
    timings = dict(_pairs(args.timing, "--timing"))
    calibs = _pairs(args.calib, "--calib")
    rows, pr_series, count_series = [], [], []
    for name, run_dir in runs:
        path = run_dir / "report.json" if run_dir.is_dir() else run_dir
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataIOError(f"cannot read evaluation report {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: not a JSON report ({exc})") from None
        model = name.split("@", 1)[0]
        mean_ms = None
        if model in timings:
            mean_ms = timing_stats(read_timing_log(timings[model], model)).mean
        t = data["totals"]
        thr_pct = round(data["config"]["confidence_threshold"] * 100, 9)
        rows.append(SummaryRow(model, thr_pct, mean_ms, data["map"],
                               t["precision"], t["recall"], t["f1"]))
        curve = data["curve"]
        if curve:
            pr_series.append(Series(name, [c[0] for c in curve], [c[1] for c in curve]))
        counts_csv = path.parent / "counts_vs_threshold.csv"
        if counts_csv.is_file():
            table = [line.split(",") for line in counts_csv.read_text().splitlines()[1:]]
            xs = [float(r[0]) for r in table]
            for col, label in ((1, "TP"), (2, "FP"), (3, "FN")):
                count_series.append(Series(f"{name} {label}", xs, [float(r[col]) for r in table]))
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(emit_summary(rows, "csv"), encoding="utf-8")
    (out / "summary.md").write_text(emit_summary(rows, "markdown"), encoding="utf-8")
    if pr_series:
        (out / "pr_curve.svg").write_text(emit_plot(pr_series, "pr_curve"), encoding="utf-8")
    if count_series:
        (out / "counts_vs_threshold.svg").write_text(
            emit_plot(count_series, "counts_vs_threshold"), encoding="utf-8")
    f1_series = []
    for name, calib_dir in calibs:
        sweep_csv = calib_dir / "sweep.csv" if calib_dir.is_dir() else calib_dir
        try:
            lines = sweep_csv.read_text(encoding="utf-8").splitlines()[1:]
        except OSError as exc:
            raise DataIOError(f"cannot read sweep {sweep_csv}: {exc.strerror}") from None
        table = [line.split(",") for line in lines]
        f1_series.append(Series(name, [float(r[0]) / 100 for r in table],
                                [float(r[6]) for r in table]))
    if f1_series:
        (out / "f1_vs_threshold.svg").write_text(
            emit_plot(f1_series, "f1_vs_threshold"), encoding="utf-8")
    return {"rows": len(rows)}


# ---------------------------------------------------------------- parser


def _add_keep_policy(p):
    p.add_argument("--min-visible", type=float, default=0.30,
                   help="minimum visible fraction of a clipped box (default 0.30)")
    p.add_argument("--min-side", type=float, default=10.0,
                   help="minimum side of a clipped box in px (default 10)")


def _add_eval_inputs(p):
    p.add_argument("--gt", help="ground-truth XML directory (or dataset directory)")
    p.add_argument("--det", help="directory of <image_id>.txt detection files")
    p.add_argument("--manifest", help="restrict ground truth to the ids of a split manifest CSV")
    p.add_argument("--exclude-augmented", action="store_true",
                   help="drop augmented copies (ids containing '_aug') from ground truth")
    p.add_argument("--iou", type=float, default=0.5, help="IoU threshold (default 0.5)")
    p.add_argument("--step", type=float, default=1.0,
                   help="confidence threshold step in percent (default 1)")


COMMANDS = {
    "subsample": cmd_subsample,
    "tile": cmd_tile,
    "augment": cmd_augment,
    "split": cmd_split,
    "evaluate": cmd_evaluate,
    "calibrate": cmd_calibrate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML config file supplying option defaults")
    common.add_argument("--seed", type=int, default=0, help="global random seed (default 0)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="tomeval", description=__doc__.split("\n\n")[0],
                     parents=[common])
    parser.add_argument("--version", action="version", version=f"tomeval {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("subsample", parents=[common], help="keep one frame every N seconds")
    p.add_argument("--frames", help="directory of sequential frames")
    p.add_argument("--annotations", help="directory of per-frame VOC XML to carry along")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate when timestamps are implicit")
    p.add_argument("--timestamps", help="CSV with path,timestamp columns")
    p.add_argument("--interval", type=float, default=3.0, help="seconds between kept frames")

    p = sub.add_parser("tile", parents=[common], help="split frames into overlapping tiles")
    p.add_argument("--data", help="dataset directory with images/ and annotations/")
    p.add_argument("--size", type=int, default=300, help="tile side in px (default 300)")
    p.add_argument("--min-overlap", type=float, default=0.2,
                   help="minimum overlap ratio between neighbouring tiles (default 0.2)")
    p.add_argument("--drop-empty", action="store_true", help="omit tiles without boxes")
    p.add_argument("--workers", type=int, default=1)
    _add_keep_policy(p)

    p = sub.add_parser("augment", parents=[common], help="add seeded augmented copies")
    p.add_argument("--data", help="tiled dataset directory")
    p.add_argument("--multiplicity", type=int, default=3,
                   help="augmented copies per source tile (default 3)")
    p.add_argument("--workers", type=int, default=1)
    _add_keep_policy(p)

    p = sub.add_parser("split", parents=[common], help="train/validation split manifests")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--group-by-parent", action="store_true",
                   help="keep all tiles of one parent frame on the same side")

    p = sub.add_parser("evaluate", parents=[common], help="VOC-style detection evaluation")
    _add_eval_inputs(p)
    p.add_argument("--threshold", type=float, default=0.0,
                   help="confidence threshold in percent (default 0)")
    p.add_argument("--threshold-from", help="calibration.json produced by 'calibrate'")
    p.add_argument("--interp", choices=INTERPOLATIONS, default=INTERPOLATIONS[0])

    p = sub.add_parser("calibrate", parents=[common], help="F1-maximising confidence threshold")
    _add_eval_inputs(p)

    p = sub.add_parser("report", parents=[common], help="summary tables and SVG plots")
    p.add_argument("--run", action="append", help="NAME=EVAL_DIR (repeatable)")
    p.add_argument("--timing", action="append", help="NAME=CSV with an 'ms' column")
    p.add_argument("--calib", action="append", help="NAME=CALIBRATE_DIR for the F1 plot")
    return parser


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def parse_args(argv):
    parser = build_parser()
    # options given before the subcommand would be reset by the subparser's
    # defaults, so move them behind it
    for i, tok in enumerate(argv):
        prev = argv[i - 1] if i else ""
        takes_value = prev.startswith("-") and "=" not in prev and prev not in ("-v", "--verbose")
        if tok in COMMANDS and not takes_value:
            argv = argv[i:i + 1] + argv[:i] + argv[i + 1:]
            break
    config_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
    config = {}
    if config_path:
        config = load_config(config_path)
        for name, sp in _subparsers(parser).items():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**defaults_for(config, name, known))
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        raise UsageError("no subcommand given")
    return args, config


def _effective_options(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose", "config")}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args, _ = parse_args(argv)
        if args.verbose:
            logging.getLogger("tomeval").setLevel(logging.INFO)
        _need(args, "out")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](args, out)
        options = _effective_options(args)
        outputs = {
            p.relative_to(out).as_posix(): _sha256(p)
            for p in sorted(out.rglob("*")) if p.is_file() and p.name != RUN_MANIFEST
        }
        _dump_json({
            "tool": f"tomeval {__version__}",
            "command": args.command,
            "seed": args.seed,
            "config_hash": config_hash(options),
            "inputs": {k: v for k, v in options.items() if k not in ("command", "out", "seed")},
            "outputs": outputs,
            "summary": summary,
        }, out / RUN_MANIFEST)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    except (DataIOError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except TomevalError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
