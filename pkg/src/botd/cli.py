"""``botd`` command-line entry point.

Exit codes: 0 success, 1 usage or validation failure, 2 I/O or parse error.
Every artifact except timing files is a pure function of flags and inputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, evaluate, labelgen, reconstruct, render
from . import geometry as geo
from .checks import run_loss_checks
from .config import RunConfig, load_config_file
from .errors import ParseError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def parse_scales(text: str) -> list[float]:
    """``"a,b,c"`` or inclusive ``"start:stop:step"``."""
    text = text.strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"bad range {text!r}; expected start:stop:step")
        start, stop, step = parts
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _poly_json(poly) -> list:
    return [[int(v) if float(v).is_integer() else float(v) for v in pt] for pt in np.asarray(poly).tolist()]


def _pmap(fn, items, jobs: int):
    # ordered map; results are identical whatever the job count
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# --------------------------------------------------------------------------
# per-image workers (module level so they pickle)
# --------------------------------------------------------------------------

def _labelgen_one(task):
    out_dir, name, (w, h), anns, cm_scale = task
    labels = labelgen.label_image(anns, w, h, cm_scale)
    maps = labelgen.render_label_maps(labels, w, h)
    out = Path(out_dir)
    dataio.write_pgm(out / f"{name}_cls.pgm", maps.cls)
    dataio.write_float_raster(out / f"{name}_reg.f32", maps.reg)
    care = [a for a in anns if a.care]
    kept = [a for a in care if geo.rasterize_polygon(a.polygon, w, h).any()]
    sidecar = {
        "width": w, "height": h, "cm_scale": cm_scale,
        "instances": [
            {"center": [lab.center.x, lab.center.y], "pmd": lab.pmd, "cm_scale": lab.cm_scale,
             "polygon": _poly_json(a.polygon)}
            for lab, a in zip(labels, kept)
        ],
    }
    _dump_json(out / f"{name}_labels.json", sidecar)
    return {"name": name, "width": w, "height": h, "cls": f"{name}_cls.pgm",
            "reg": f"{name}_reg.f32", "labels": f"{name}_labels.json"}


def _decode_one(task):
    out_dir, name, cls_path, reg_path, cfg, reduce = task
    cls = dataio.read_pgm(cls_path).astype(np.float64) / 255.0
    reg = dataio.read_float_raster(reg_path)
    dets, timing = reconstruct.decode_detailed(cls, reg, cfg.cm_scale, cfg.bin_threshold,
                                               cfg.min_area, reduce)
    out = Path(out_dir)
    dataio.write_polygons(out / f"{name}.txt", [d.polygon for d in dets])
    _dump_json(out / f"{name}.json", {
        "detections": [{"polygon": _poly_json(d.polygon), "score": d.score, "pmd": d.pmd} for d in dets],
    })
    return {"name": name, "polygons": f"{name}.txt", "detections": f"{name}.json",
            "count": len(dets)}, timing


def _upper_iou_one(task):
    poly, image_scale, cm_scale, size = task
    return evaluate.upper_iou(poly, image_scale, cm_scale, size)


def _eval_one(task):
    preds, gts, thr = task
    return evaluate.match_detections(preds, gts, thr)


def _render_one(task):
    out_dir, name, (w, h), anns, preds, cm_scale = task
    labels = labelgen.label_image(anns, w, h, cm_scale)
    care = [a for a in anns if a.care and geo.rasterize_polygon(a.polygon, w, h).any()]
    if preds is None:
        maps = labelgen.render_label_maps(labels, w, h)
        preds = [p for p, _ in reconstruct.decode(maps.cls.astype(np.float64), maps.reg, cm_scale)]
    img = render.render_overlay(w, h, care + [a for a in anns if not a.care], labels, preds)
    render.write_ppm(Path(out_dir) / f"{name}.ppm", img)
    return f"{name}.ppm"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> int:
    ds = dataio.synth_dataset(cfg.seed, args.count, args.kind, args.size, args.instances, args.adhesion)
    manifest = dataio.write_dataset(args.out, ds)
    print(json.dumps({"manifest": str(manifest), "images": len(ds),
                      "instances": sum(len(a) for _, a in ds)}))
    return 0


def cmd_labelgen(args, cfg: RunConfig) -> int:
    data = dataio.load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(str(out), name, size, anns, cfg.cm_scale) for name, size, anns in data]
    entries = _pmap(_labelgen_one, tasks, cfg.jobs)
    _dump_json(out / "manifest.json", {"cm_scale": cfg.cm_scale, "images": entries})
    print(json.dumps({"images": len(entries), "out": str(out)}))
    return 0


def cmd_decode(args, cfg: RunConfig) -> int:
    src = Path(args.labels)
    meta = json.loads((src / "manifest.json").read_text(encoding="utf-8"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(str(out), e["name"], str(src / e["cls"]), str(src / e["reg"]), cfg, args.reduce)
             for e in meta["images"]]
    results = _pmap(_decode_one, tasks, cfg.jobs)
    _dump_json(out / "manifest.json", {"cm_scale": cfg.cm_scale, "bin_threshold": cfg.bin_threshold,
                                       "min_area": cfg.min_area, "reduce": args.reduce,
                                       "images": [r[0] for r in results]})
    # wall-clock numbers are the one non-deterministic output; kept apart
    timing = {r[0]["name"]: {k: v * 1e3 for k, v in r[1].items()} for r in results}
    _dump_json(out / "timing.json", {"unit": "ms", "images": timing})
    print(json.dumps({"images": len(results), "detections": sum(r[0]["count"] for r in results)}))
    return 0


def _load_predictions(pred_dir: Path):
    meta = json.loads((pred_dir / "manifest.json").read_text(encoding="utf-8"))
    preds = {}
    for e in meta["images"]:
        dets = json.loads((pred_dir / e["detections"]).read_text(encoding="utf-8"))["detections"]
        preds[e["name"]] = [(np.asarray(d["polygon"], dtype=np.float64), float(d["score"])) for d in dets]
    return preds


def cmd_eval(args, cfg: RunConfig) -> int:
    data = dataio.load_dataset(args.data)
    preds = _load_predictions(Path(args.pred))
    tasks = [(preds.get(name, []), [(a.polygon, a.care) for a in anns], args.iou)
             for name, _, anns in data]
    reports = _pmap(_eval_one, tasks, cfg.jobs)
    total = evaluate.aggregate(reports)
    tp, fp, fn = total.counts
    summary = {"precision": total.precision, "recall": total.recall, "f_measure": total.f_measure,
               "tp": tp, "fp": fp, "fn": fn, "iou_threshold": args.iou,
               "convention": "0/0 precision or recall reads as 1.0",
               "per_image": [{"name": name, "tp": r.per_image[0][0], "fp": r.per_image[0][1],
                              "fn": r.per_image[0][2]} for (name, _, _), r in zip(data, reports)]}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "eval.json", summary)
        rows = [[p["name"], p["tp"], p["fp"], p["fn"]] for p in summary["per_image"]]
        rows.append(["TOTAL", tp, fp, fn])
        _write_csv(out / "eval.csv", ["image", "tp", "fp", "fn"], rows)
    print(json.dumps({k: summary[k] for k in ("precision", "recall", "f_measure", "tp", "fp", "fn")}))
    return 0


def cmd_upper_iou(args, cfg: RunConfig) -> int:
    data = dataio.load_dataset(args.data)
    instances = [(a.polygon, size) for _, size, anns in data for a in anns if a.care]
    if not instances:
        raise ValueError("dataset has no care instances")
    image_scales = parse_scales(args.image_scales) if args.image_scales else []
    cm_scales = parse_scales(args.cm_scales) if args.cm_scales else []
    settings = ([("image_scale", s, s, args.fixed_cm_scale) for s in image_scales]
                + [("cm_scale", s, args.fixed_image_scale, s) for s in cm_scales])
    tasks = [(poly, img_s, cm_s, size) for _, _, img_s, cm_s in settings for poly, size in instances]
    values = _pmap(_upper_iou_one, tasks, cfg.jobs)
    k = len(instances)
    means = [float(np.mean(values[i * k:(i + 1) * k])) for i in range(len(settings))]
    report = {"instances": k, "fixed": {"cm_scale": args.fixed_cm_scale,
                                        "image_scale": args.fixed_image_scale},
              "image_scale": [{"image_scale": s[1], "upper_iou": m}
                              for s, m in zip(settings, means) if s[0] == "image_scale"],
              "cm_scale": [{"cm_scale": s[1], "upper_iou": m}
                           for s, m in zip(settings, means) if s[0] == "cm_scale"]}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "upper_iou.json", report)
        for axis in ("image_scale", "cm_scale"):
            if report[axis]:
                _write_csv(out / f"upper_iou_{axis}.csv", [axis, "upper_iou"],
                           [[r[axis], f"{r['upper_iou']:.6f}"] for r in report[axis]])
    print(json.dumps(report))
    return 0


def cmd_loss_check(args, cfg: RunConfig) -> int:
    report = run_loss_checks(cfg.seed)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0 if report["passed"] else 1


def cmd_bench(args, cfg: RunConfig) -> int:
    if args.data:
        data = [(size, anns) for _, size, anns in dataio.load_dataset(args.data)]
    else:
        data = dataio.synth_dataset(cfg.seed, args.count, args.kind, args.size, args.instances)
    maps = []
    for (w, h), anns in data:
        maps.append(labelgen.render_label_maps(labelgen.label_image(anns, w, h, cfg.cm_scale), w, h))
    report = evaluate.bench_decode(maps, cfg.cm_scale, args.repetitions, cfg.bin_threshold, cfg.min_area)
    out = report.to_dict()
    out["median_decode_ms_per_image"] = report.per_image.median_ms if report.per_image else None
    out["note"] = "wall-clock on this machine; no latency target is asserted"
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_render(args, cfg: RunConfig) -> int:
    data = dataio.load_dataset(args.data)
    preds = _load_predictions(Path(args.pred)) if args.pred else {}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.limit is not None:
        data = data[:args.limit]
    tasks = [(str(out), name, size, anns,
              [p for p, _ in preds[name]] if name in preds else None, cfg.cm_scale)
             for name, size, anns in data]
    files = _pmap(_render_one, tasks, cfg.jobs)
    print(json.dumps({"rendered": files}))
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of flag defaults")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for per-image work")
    common.add_argument("--cm-scale", dest="cm_scale", type=float)
    common.add_argument("--bin-threshold", dest="bin_threshold", type=float)
    common.add_argument("--min-area", dest="min_area", type=int)

    p = _Parser(prog="botd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("--kind", choices=dataio.KINDS, default="ribbons")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--size", type=int, default=640)
    s.add_argument("--instances", type=int, default=1, help="instances per image")
    s.add_argument("--adhesion", action="store_true", help="place instances in 2 px-gap pairs")
    s.add_argument("--out", default="synth")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("labelgen", parents=[common], help="CM / PMD targets for a dataset")
    s.add_argument("--data", required=True, help="dataset directory or manifest.json")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_labelgen)

    s = sub.add_parser("decode", parents=[common], help="reconstruct polygons from cls/reg maps")
    s.add_argument("--labels", required=True, help="directory written by labelgen")
    s.add_argument("--out", required=True)
    s.add_argument("--reduce", choices=("mean", "median"), default="mean")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("eval", parents=[common], help="precision / recall / F-measure")
    s.add_argument("--data", required=True)
    s.add_argument("--pred", required=True, help="directory written by decode")
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("upper-iou", parents=[common], help="reconstruction fidelity sweeps")
    s.add_argument("--data", required=True)
    s.add_argument("--image-scales", default="160,320,640,1280")
    s.add_argument("--cm-scales", default="0.1:0.9:0.1")
    s.add_argument("--fixed-cm-scale", type=float, default=0.5)
    s.add_argument("--fixed-image-scale", type=float, default=640)
    s.add_argument("--out")
    s.set_defaults(func=cmd_upper_iou)

    s = sub.add_parser("loss-check", parents=[common], help="gradient and invariance suites")
    s.add_argument("--out")
    s.set_defaults(func=cmd_loss_check)

    s = sub.add_parser("bench", parents=[common], help="time the decode stages")
    s.add_argument("--data")
    s.add_argument("--count", type=int, default=50)
    s.add_argument("--instances", type=int, default=10)
    s.add_argument("--kind", choices=dataio.KINDS, default="convex")
    s.add_argument("--size", type=int, default=640)
    s.add_argument("--repetitions", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("render", parents=[common], help="PPM overlays of labels and reconstructions")
    s.add_argument("--data", required=True)
    s.add_argument("--pred")
    s.add_argument("--out", required=True)
    s.add_argument("--limit", type=int)
    s.set_defaults(func=cmd_render)
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            # config keys act as defaults; flags given on the command line win
            given = _explicit(argv)
            for k, v in load_config_file(args.config).items():
                if hasattr(args, k) and k not in given:
                    setattr(args, k, v)
        cfg = RunConfig.from_namespace(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (OSError, ParseError, json.JSONDecodeError, KeyError) as exc:
        print(f"botd: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"botd: error: {exc}", file=sys.stderr)
        return 1


def _explicit(argv) -> set[str]:
    names = set()
    for tok in argv:
        if tok.startswith("--"):
            names.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    return names


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
