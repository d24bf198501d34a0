"""Command-line entry point: ``yolomu {build-info,augment,detect,eval,report}``.

Exit codes: 0 success, 1 input error, 2 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .augment import AugmentConfig, augment_sample, config_dict, resize_bilinear, sample_params
from .dataset import (
    ClassMap,
    LabelError,
    norm_to_pixel,
    read_label_file,
    read_manifest,
    write_label_file,
    write_manifest,
)
from .detect import DEFAULT_CONF, DEFAULT_IOU, decode_predictions, nms
from .forward import forward
from .graph import build_yolov5mu, estimate_flops, layer_table, module_count, param_count
from .imageio import ImageFormatError, read_image, write_image
from .metrics import GroundTruth, ImageDetection, evaluate
from .report import line_plot, parse_loss_log, pr_curve_svg, rows_to_csv, summary_rows
from .weights import WeightFormatError, init_weights, load_weights

log = logging.getLogger("yolomu")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2
INPUT_ERRORS = (ValueError, OSError, LabelError, WeightFormatError, ImageFormatError, KeyError)


class InputError(Exception):
    """Bad user input discovered after argument parsing."""


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here those are input errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _img_size(text: str) -> int:
    v = int(text)
    if v <= 0 or v % 32:
        raise argparse.ArgumentTypeError("image size must be a positive multiple of 32")
    return v


def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("value must be in [0, 1]")
    return v


def _shared() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--seed", type=_u64, default=0, help="random seed (u64)")
    g.add_argument("--classes", type=Path, default=None, help="class file, one name per line; the four smart-home classes when omitted")
    g.add_argument("--img", type=_img_size, default=640, help="network input size in pixels")
    g.add_argument("--conf", type=_unit, default=DEFAULT_CONF, help="confidence threshold")
    g.add_argument("--iou", type=_unit, default=DEFAULT_IOU, help="NMS IoU threshold")
    g.add_argument("--format", choices=("table", "csv", "json"), default="table", help="stdout format")
    g.add_argument("--out", type=Path, default=None, help="output file or directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="yolomu", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    shared = [_shared()]

    p = sub.add_parser("build-info", parents=shared, formatter_class=fmt,
                       help="per-layer shapes, parameters and FLOPs")
    p.set_defaults(func=cmd_build_info)

    p = sub.add_parser("augment", parents=shared, formatter_class=fmt, help="augment a manifest of labelled images")
    p.add_argument("--manifest", type=Path, required=True, help="image<TAB>label manifest")
    p.add_argument("--gray-prob", type=_unit, default=0.15, help="probability of grayscale conversion")
    p.add_argument("--hue", type=float, default=0.10, help="hue jitter limit, fraction of the colour wheel")
    p.add_argument("--sat", type=float, default=0.25, help="saturation jitter limit (multiplicative)")
    p.add_argument("--bright", type=float, default=0.05, help="brightness jitter limit (multiplicative)")
    p.add_argument("--sampling", choices=("uniform", "endpoints"), default="uniform", help="how jitter values are drawn")
    p.add_argument("--letterbox", action="store_true", help="aspect-preserving resize with padding")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("detect", parents=shared, formatter_class=fmt, help="run the detector on images")
    p.add_argument("images", nargs="*", type=str, help="image files (PPM, or any format Pillow reads)")
    p.add_argument("--manifest", type=Path, default=None, help="take images from a manifest instead")
    p.add_argument("--weights", type=Path, default=None, help="weight file; seeded random weights if omitted")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", parents=shared, formatter_class=fmt, help="score detections against ground truth")
    p.add_argument("--detections", type=Path, required=True, help="JSON-lines detections")
    p.add_argument("--manifest", type=Path, required=True, help="ground-truth manifest")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", parents=shared, formatter_class=fmt, help="SVG plots and CSV tables")
    p.add_argument("--metrics", type=Path, default=None, help="metrics JSON (from eval) or metrics CSV")
    p.add_argument("--loss-log", type=Path, default=None, help="CSV with epoch and loss columns")
    p.set_defaults(func=cmd_report)
    return parser


def _class_map(args) -> ClassMap:
    return ClassMap.from_file(args.classes) if args.classes else ClassMap()


def _emit(args, text: str, default_name: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    path = args.out / default_name if args.out.is_dir() else args.out
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# build-info


def build_info(img: int = 640, num_classes: int = 4) -> dict:
    graph = build_yolov5mu(num_classes)
    rows = layer_table(graph, (img, img))
    _, total = param_count(graph)
    return {
        "img_size": img,
        "num_classes": num_classes,
        "layers": [
            {
                "index": r.id,
                "name": r.name,
                "in_channels": list(r.in_channels),
                "out_channels": r.out_channels,
                "output_shape": _shape_text(r.out_shape),
                "params": r.params,
                "gflops": r.flops,
                "detail": r.detail,
            }
            for r in rows
        ],
        "total_params": total,
        "total_gflops": estimate_flops(graph, (img, img)),
        "table_rows": len(rows),
        "modules": module_count(graph),
    }


def _shape_text(shape) -> str:
    if shape and isinstance(shape[0], tuple):
        return ";".join("x".join(map(str, s)) for s in shape)
    return "x".join(map(str, shape))


def cmd_build_info(args) -> int:
    info = build_info(args.img, len(_class_map(args)))
    if args.format == "json":
        text = json.dumps(info, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "name", "in_channels", "out_channels", "output_shape", "params", "gflops"])
        for r in info["layers"]:
            w.writerow([r["index"], r["name"], " ".join(map(str, r["in_channels"])), r["out_channels"],
                        r["output_shape"], r["params"], repr(r["gflops"])])
        w.writerow(["", "total", "", "", "", info["total_params"], repr(info["total_gflops"])])
        text = buf.getvalue()
    else:
        lines = [f"{'#':>3} {'layer':<9} {'in':>13} {'out':>5} {'output shape':<28} {'params':>11} {'GFLOPs':>8}"]
        for r in info["layers"]:
            lines.append(
                f"{r['index']:>3} {r['name']:<9} {','.join(map(str, r['in_channels'])):>13} {r['out_channels']:>5} "
                f"{r['output_shape']:<28} {r['params']:>11,} {r['gflops']:>8.3f}"
            )
        lines.append(
            f"total: {info['total_params']:,} parameters, {info['total_gflops']:.1f} GFLOPs at "
            f"{args.img}x{args.img}, {info['table_rows']} table rows, {info['modules']} modules"
        )
        text = "\n".join(lines) + "\n"
    _emit(args, text, f"build_info.{ 'txt' if args.format == 'table' else args.format}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# augment


def cmd_augment(args) -> int:
    if args.out is None:
        raise InputError("augment needs --out DIR")
    classes = _class_map(args)
    config = AugmentConfig(
        target_size=args.img,
        gray_probability=args.gray_prob,
        hue_limit=args.hue,
        sat_limit=args.sat,
        bright_limit=args.bright,
        master_seed=args.seed,
        sampling=args.sampling,
        letterbox=args.letterbox,
    )
    entries = read_manifest(args.manifest)
    img_dir, lbl_dir = args.out / "images", args.out / "labels"
    img_dir.mkdir(parents=True, exist_ok=True)
    lbl_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    pairs = []
    provenance = [json.dumps({"config": config_dict(config)}, sort_keys=True)]
    for index, entry in enumerate(entries):
        try:
            img = read_image(entry.image_path)
            anns = read_label_file(entry.label_path, len(classes))
        except INPUT_ERRORS as exc:
            log.error("sample %d (%s): %s", index, entry.image, exc)
            failures += 1
            continue
        params = sample_params(config, index)
        boxes = np.array([a[1:] for a in anns], dtype=np.float64).reshape(-1, 4)
        out_img, out_boxes = augment_sample(img, boxes, config, index, params)
        stem = f"{index:05d}_{Path(entry.image).stem}"
        write_image(img_dir / f"{stem}.ppm", out_img)
        (lbl_dir / f"{stem}.txt").write_text(
            write_label_file([(a.class_id, *b) for a, b in zip(anns, out_boxes)]), encoding="utf-8"
        )
        pairs.append((f"images/{stem}.ppm", f"labels/{stem}.txt"))
        provenance.append(json.dumps({"index": index, "source": entry.image, "output": stem, **params}, sort_keys=True))
    write_manifest(args.out / "manifest.tsv", pairs)
    (args.out / "augment_log.jsonl").write_text("\n".join(provenance) + "\n", encoding="utf-8")
    return EXIT_INPUT if failures else EXIT_OK


# ---------------------------------------------------------------------------
# detect


def preprocess(img: np.ndarray, size: int) -> np.ndarray:
    """Stretch to size x size and scale to a (1, 3, H, W) float tensor in [0, 1]."""
    resized = resize_bilinear(img, size, size)
    return (resized.astype(np.float32) / 255.0).transpose(2, 0, 1)[None].copy()


def detect_image(graph, weights, img: np.ndarray, size: int, conf: float, iou: float):
    """Forward, decode, clip, NMS; boxes come back in original image pixels."""
    h, w, _ = img.shape
    maps = forward(graph, weights, preprocess(img, size))
    cands = decode_predictions(maps, graph.num_classes, conf, graph.strides, image_size=(size, size))
    kept = nms(cands, iou)
    sx, sy = w / size, h / size
    out = []
    for d in kept:
        b = d.box
        box = [min(max(b.x1 * sx, 0.0), w), min(max(b.y1 * sy, 0.0), h),
               min(max(b.x2 * sx, 0.0), w), min(max(b.y2 * sy, 0.0), h)]
        out.append((d.class_id, d.score, box))
    return out


def cmd_detect(args) -> int:
    classes = _class_map(args)
    graph = build_yolov5mu(len(classes))
    if args.weights is not None:
        weights = load_weights(args.weights)
        if weights.num_classes != graph.num_classes:
            raise InputError(
                f"weights are for {weights.num_classes} classes but {len(classes)} class names were given"
            )
        weights.validate(graph)
    else:
        weights = init_weights(graph, args.seed)
    if args.manifest is not None:
        sources = [(e.image, e.image_path) for e in read_manifest(args.manifest)]
    else:
        sources = [(s, Path(s)) for s in args.images]
    if not sources:
        raise InputError("no images given")
    lines = []
    for image_id, path in sources:
        img = read_image(path)
        for class_id, score, box in detect_image(graph, weights, img, args.img, args.conf, args.iou):
            lines.append(json.dumps({"image": image_id, "class_id": class_id, "score": score, "box": box}))
    _emit(args, "".join(line + "\n" for line in lines), "detections.jsonl")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def read_detections(path) -> List[ImageDetection]:
    dets = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            box = tuple(float(v) for v in obj["box"])
            if len(box) != 4:
                raise ValueError("box needs 4 numbers")
            dets.append(ImageDetection(str(obj["image"]), int(obj["class_id"]), float(obj["score"]), box))
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}:{lineno}: bad detection line ({exc})") from None
    return dets


def load_ground_truth(manifest, num_classes: int) -> List[GroundTruth]:
    gts = []
    for e in read_manifest(manifest):
        h, w, _ = read_image(e.image_path).shape
        for a in read_label_file(e.label_path, num_classes):
            gts.append(GroundTruth(e.image, a.class_id, tuple(norm_to_pixel(a[1:], w, h))))
    return gts


def cmd_eval(args) -> int:
    classes = _class_map(args)
    dets = read_detections(args.detections)
    known = {e.image for e in read_manifest(args.manifest)}
    missing = sorted({d.image for d in dets} - known)
    if missing:
        raise InputError(f"detections reference images missing from the manifest: {missing[:5]}")
    bad = [d for d in dets if not 0 <= d.class_id < len(classes)]
    if bad:
        raise InputError(f"detection class id {bad[0].class_id} out of range")
    gts = load_ground_truth(args.manifest, len(classes))
    summary = evaluate(dets, gts, len(classes), args.conf)
    doc = summary.as_dict()
    doc["class_names"] = list(classes.names)
    csv_text = rows_to_csv(summary_rows(doc, classes.names))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "metrics.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        (args.out / "metrics.csv").write_text(csv_text, encoding="utf-8")
    if args.format == "json":
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    elif args.format == "csv":
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(_eval_table(doc, classes.names))
    return EXIT_OK


def _eval_table(doc: dict, names: Sequence[str]) -> str:
    def f(v):
        return "-" if v is None else f"{v:.3f}"

    lines = [f"status: {doc['status']}",
             f"{'class':<28} {'gts':>5} {'AP50':>7} {'AP50-95':>8}"]
    for e in doc["per_class"]:
        lines.append(f"{names[e['class_id']]:<28} {e['gt_count']:>5} {f(e['ap50']):>7} {f(e['ap50_95']):>8}")
    lines.append(f"{'all':<28} {'':>5} {f(doc['map50']):>7} {f(doc['map50_95']):>8}")
    lines.append(f"precision {f(doc['precision'])}  recall {f(doc['recall'])}  F1 {f(doc['f1'])} "
                 f"at conf {f(doc['confidence'])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# report


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def cmd_report(args) -> int:
    if args.out is None:
        raise InputError("report needs --out DIR")
    if args.metrics is None and args.loss_log is None:
        raise InputError("report needs --metrics and/or --loss-log")
    args.out.mkdir(parents=True, exist_ok=True)
    if args.metrics is not None:
        text = args.metrics.read_text(encoding="utf-8")
        if args.metrics.suffix.lower() == ".csv":
            reader = csv.reader(io.StringIO(text))
            header = next(reader, None)
            if header != ["metric", "class", "value"]:
                raise InputError("metrics CSV must have header metric,class,value")
            rows = [tuple(r) for r in reader if r]
            if any(len(r) != 3 for r in rows):
                raise InputError("malformed metrics CSV row")
        else:
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise InputError(f"bad metrics JSON: {exc}") from None
            names = doc.get("class_names") or list(_class_map(args).names)
            rows = summary_rows(doc, names)
            for entry in doc.get("per_class", []):
                cid = entry["class_id"]
                name = names[cid] if cid < len(names) else str(cid)
                pts = [(p["recall"], p["precision"]) for p in entry.get("pr_curve", [])]
                (args.out / f"pr_{cid}_{_safe(name)}.svg").write_text(pr_curve_svg(pts, name), encoding="utf-8")
        (args.out / "summary.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    if args.loss_log is not None:
        series = parse_loss_log(args.loss_log.read_text(encoding="utf-8"))
        for name, pts in series.items():
            if not pts:
                continue
            svg = line_plot({name: pts}, f"{name} loss", "epoch", "loss")
            (args.out / f"loss_{_safe(name)}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # invariant failures
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
