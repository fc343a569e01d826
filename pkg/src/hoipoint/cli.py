"""Command-line front end: encode, decode, group, loss, eval, synth, bench."""

import argparse
import json
import logging
import os
import platform
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import codec, io_formats
from .config import ConfigError, RunConfig, load_config
from .evaluator import GroundTruthSet, evaluate
from .geometry import Point, UnsignedVector
from .grouping import MODES, group
from .io_formats import FormatError, SchemaError, TripletRecord
from .losses import loss_report
from .structures import InteractionCandidate, ScoredDetection
from .testkit import PackingError, synth_scene

log = logging.getLogger("hoipoint")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run config")
    g.add_argument("--config", type=Path, help="JSON run config; flags override it")
    g.add_argument("--stride", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--topk", type=int)
    g.add_argument("--h-tau", dest="h_tau", type=float)
    g.add_argument("--o-tau", dest="o_tau", type=float)
    g.add_argument("--a-tau", dest="a_tau", type=float)
    g.add_argument("--d-tau", dest="d_tau", type=float)
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--setting", choices=("default", "known_object"))
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hoipoint", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="ground truth -> point heatmap, vector field and mask tensors")
    _common(p)
    p.add_argument("--bundle", type=Path, help="synth bundle directory (supplies gt and grid size)")
    p.add_argument("--gt", type=Path)
    p.add_argument("--image-id")
    p.add_argument("--grid", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--num-classes", type=int)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("decode", help="tensors -> interaction candidates")
    _common(p)
    p.add_argument("--points", type=Path, required=True)
    p.add_argument("--vectors", type=Path, required=True)
    p.add_argument("--image-id", default="0")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("group", help="candidates + detections -> triplets")
    _common(p)
    p.add_argument("--candidates", type=Path, required=True)
    p.add_argument("--detections", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("loss", help="predicted + target tensors -> loss report")
    _common(p)
    p.add_argument("--pred-points", type=Path, required=True)
    p.add_argument("--pred-vectors", type=Path, required=True)
    p.add_argument("--target-points", type=Path, required=True)
    p.add_argument("--target-vectors", type=Path, required=True)
    p.add_argument("--target-mask", type=Path, required=True)
    p.add_argument("--lambda-v", dest="lambda_v", type=float)

    p = sub.add_parser("eval", help="triplets + ground truth -> role mAP report")
    _common(p)
    p.add_argument("--triplets", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--gt-meta", type=Path, help="JSON with train_counts, rare_cutoff, class_objects")
    p.add_argument("--known-object", type=Path, help="JSON object category -> image ids")
    p.add_argument("--csv", type=Path, help="optional per-class AP table")
    p.add_argument("--out", type=Path, help="also write the report JSON here")

    p = sub.add_parser("synth", help="write a synthetic scene bundle")
    _common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--humans", type=int, default=2)
    p.add_argument("--objects", type=int, default=2)
    p.add_argument("--actions", type=int, default=2)
    p.add_argument("--distractors", type=int, default=0)
    p.add_argument("--grid", type=int, nargs=2, default=(48, 48), metavar=("H", "W"))

    p = sub.add_parser("bench", help="time grouping on a random scene")
    _common(p)
    p.add_argument("--humans", type=int, default=20)
    p.add_argument("--objects", type=int, default=20)
    p.add_argument("--candidates", type=int, default=50)
    p.add_argument("--repeats", type=int, default=100)
    return parser


_CONFIG_FLAGS = ("stride", "sigma", "topk", "h_tau", "o_tau", "a_tau", "d_tau", "mode", "setting", "seed", "threads", "lambda_v")


def resolve_config(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_FLAGS}
    try:
        return load_config(args.config, overrides)
    except (ConfigError, TypeError) as e:
        raise CliError(f"config: {e}", EXIT_CONFIG) from None
    except OSError as e:
        raise CliError(f"config: {e}", EXIT_IO) from None


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=False) + "\n")


# -- subcommands -----------------------------------------------------------------


def cmd_encode(args, cfg: RunConfig) -> None:
    gt_path, image_id, grid, n_cls = args.gt, args.image_id, args.grid, args.num_classes or cfg.num_classes
    if args.bundle is not None:
        meta = json.loads((args.bundle / "meta.json").read_text(encoding="utf-8"))
        gt_path = gt_path or args.bundle / "gt.jsonl"
        image_id = image_id or meta["image_id"]
        grid = grid or (meta["height"], meta["width"])
        n_cls = n_cls or meta["num_classes"]
        no_obj = set(meta.get("no_object_classes", [])) | set(cfg.no_object_classes)
    else:
        no_obj = set(cfg.no_object_classes)
    if gt_path is None or grid is None or n_cls is None:
        raise CliError("encode needs --gt, --grid and --num-classes (or --bundle)", EXIT_CONFIG)
    records = io_formats.read_triplets(gt_path, no_obj)
    by_image = io_formats.group_by_image(records, cfg.stride)
    if image_id is None:
        if len(by_image) != 1:
            raise CliError("ground truth has several images; pass --image-id", EXIT_CONFIG)
        image_id = next(iter(by_image))
    triplets = by_image.get(image_id, [])
    h, w = grid
    heat = codec.encode_points(triplets, n_cls, h, w, cfg.sigma)
    vec, mask = codec.encode_vectors(triplets, h, w)
    args.out.mkdir(parents=True, exist_ok=True)
    io_formats.write_tensor(heat, args.out / "points.ipnt")
    io_formats.write_tensor(vec, args.out / "vectors.ipnt")
    io_formats.write_tensor(mask, args.out / "mask.ipnt")


def cmd_decode(args, cfg: RunConfig) -> None:
    hm = io_formats.read_tensor(args.points)
    vf = io_formats.read_tensor(args.vectors)
    if hm.ndim != 3 or vf.shape != (2,) + hm.shape[1:]:
        raise CliError(f"tensor shapes {hm.shape} / {vf.shape} are not (C,H,W) / (2,H,W)", EXIT_VALIDATION)
    floors = cfg.score_floors()
    if not isinstance(floors, float) and len(floors) != hm.shape[0]:
        raise CliError(f"dynamic thresholds cover {len(floors)} classes, heatmap has {hm.shape[0]}", EXIT_CONFIG)
    cands = codec.decode_peaks(hm, cfg.topk, floors, vf)
    io_formats.write_candidates(args.out, {args.image_id: cands})


def _group_image(item, cfg: RunConfig):
    image_id, (split, cands) = item
    return image_id, group(split.humans, split.objects, cands, cfg.grouping())


def cmd_group(args, cfg: RunConfig) -> None:
    cands = io_formats.read_candidates(args.candidates)
    dets = io_formats.ingest_detections(args.detections, cfg.stride, cfg.person_category, cfg.num_categories)
    if dets.rejected:
        log.warning("%d malformed detection records dropped", dets.rejected)
    # output order follows candidate-file image order, then any detection-only images
    order = list(cands) + [i for i in dets.images if i not in cands]
    work = [(i, (dets.images.get(i, io_formats.DetectionSplit()), cands.get(i, []))) for i in order]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(lambda it: _group_image(it, cfg), work))
    records = [TripletRecord.from_triplet(img, t, cfg.stride) for img, ts in results for t in ts]
    io_formats.write_triplets(args.out, records)


def cmd_loss(args, cfg: RunConfig) -> None:
    tensors = [
        io_formats.read_tensor(p)
        for p in (args.pred_points, args.pred_vectors, args.target_points, args.target_vectors, args.target_mask)
    ]
    pp, pv, tp, tv, tm = tensors
    if pp.shape != tp.shape or pv.shape != tv.shape or tm.shape != tv.shape[1:]:
        raise CliError("prediction and target tensor shapes disagree", EXIT_VALIDATION)
    _emit(loss_report(pp, pv, tp, tv, tm, cfg.lambda_v).to_dict())


def cmd_eval(args, cfg: RunConfig) -> None:
    meta = {}
    if args.gt_meta is not None:
        meta = json.loads(args.gt_meta.read_text(encoding="utf-8"))
    no_obj = set(cfg.no_object_classes) | set(meta.get("no_object_classes", []))
    preds = io_formats.group_by_image(io_formats.read_triplets(args.triplets, no_obj))
    gts = io_formats.group_by_image(io_formats.read_triplets(args.gt, no_obj))
    known = None
    if args.known_object is not None:
        known = {int(k): list(v) for k, v in json.loads(args.known_object.read_text(encoding="utf-8")).items()}
    gt = GroundTruthSet(
        triplets=gts,
        train_counts={int(k): int(v) for k, v in meta.get("train_counts", {}).items()},
        rare_cutoff=int(meta.get("rare_cutoff", 10)),
        class_objects={int(k): int(v) for k, v in meta["class_objects"].items()} if "class_objects" in meta else None,
        known_object_images=known,
    )
    if cfg.setting == "known_object" and (gt.class_objects is None or known is None):
        raise CliError("known_object setting needs --gt-meta with class_objects and --known-object", EXIT_CONFIG)
    report = evaluate(preds, gt, cfg.setting).to_dict()
    if args.csv is not None:
        lines = ["action_id,ap,n_gt"] + [
            f"{k},{v!r},{report['n_gt'][k]}" for k, v in report["per_class_ap"].items()
        ]
        io_formats.atomic_write_bytes(args.csv, ("\n".join(lines) + "\n").encode("utf-8"))
    if args.out is not None:
        io_formats.atomic_write_bytes(args.out, (json.dumps(report) + "\n").encode("utf-8"))
    _emit(report)


def write_bundle(bundle, out: Path, stride: float) -> None:
    """Scene bundle directory: meta.json, gt.jsonl, detections.jsonl and tensors."""
    image_id = f"synth-{bundle.seed}"
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "seed": bundle.seed,
        "image_id": image_id,
        "height": bundle.height,
        "width": bundle.width,
        "num_classes": bundle.num_classes,
        "stride": stride,
        "no_object_classes": sorted(bundle.no_object_classes),
        "distractors": bundle.n_distractors,
    }
    io_formats.atomic_write_bytes(out / "meta.json", (json.dumps(meta, indent=2) + "\n").encode("utf-8"))
    io_formats.write_triplets(
        out / "gt.jsonl", [TripletRecord.from_triplet(image_id, t, stride) for t in bundle.triplets]
    )
    dets = [(d, 0) for d in bundle.humans] + [(d, d.class_id) for d in bundle.objects]
    lines = [io_formats.detection_record(image_id, d.bbox.scaled(stride), cat, d.score) for d, cat in dets]
    io_formats.atomic_write_bytes(out / "detections.jsonl", "".join(x + "\n" for x in lines).encode("utf-8"))
    io_formats.write_tensor(bundle.heatmap, out / "points.ipnt")
    io_formats.write_tensor(bundle.vectors, out / "vectors.ipnt")
    io_formats.write_tensor(bundle.mask, out / "mask.ipnt")


def cmd_synth(args, cfg: RunConfig) -> None:
    try:
        bundle = synth_scene(
            cfg.seed,
            args.humans,
            args.objects,
            args.actions,
            args.distractors,
            height=args.grid[0],
            width=args.grid[1],
            no_object_classes=cfg.no_object_classes,
            sigma=cfg.sigma,
        )
    except PackingError as e:
        raise CliError(str(e), EXIT_VALIDATION) from None
    write_bundle(bundle, args.out, cfg.stride)


def machine_info() -> dict:
    cpu = platform.processor() or ""
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.startswith("model name"):
                cpu = line.split(":", 1)[1].strip()
                break
    except OSError:
        pass
    return {
        "cpu": cpu,
        "logical_cpus": os.cpu_count(),
        "machine": platform.machine(),
        "system": platform.system(),
        "python": platform.python_version(),
    }


def bench_scene(n_humans: int, n_objects: int, n_candidates: int, seed: int = 0, size: float = 128.0):
    """Random detections and candidates for timing grouping."""
    import random

    rng = random.Random(seed)

    def det(cat):
        cx, cy = rng.uniform(0, size), rng.uniform(0, size)
        hw, hh = rng.uniform(2, 12), rng.uniform(2, 12)
        return ScoredDetection((cx - hw, cy - hh, cx + hw, cy + hh), cat, rng.uniform(0.5, 1.0))

    humans = [det(0) for _ in range(n_humans)]
    objects = [det(1) for _ in range(n_objects)]
    cands = []
    for k in range(n_candidates):
        if k % 2 == 0:
            # near a real pair, so some combinations pass every test
            hc, oc = rng.choice(humans).center, rng.choice(objects).center
            pos = Point(float(round((hc.x + oc.x) / 2)), float(round((hc.y + oc.y) / 2)))
            vec = UnsignedVector(abs(hc.x - oc.x) / 2 + rng.uniform(0, 1), abs(hc.y - oc.y) / 2 + rng.uniform(0, 1))
        else:
            pos = Point(float(rng.randrange(int(size))), float(rng.randrange(int(size))))
            vec = UnsignedVector(rng.uniform(0, 20), rng.uniform(0, 20))
        cands.append(InteractionCandidate(rng.randrange(10), pos, rng.uniform(0.2, 1.0), vec))
    return humans, objects, cands


def run_bench(n_humans=20, n_objects=20, n_candidates=50, repeats=100, seed=0, cfg=None) -> dict:
    from .grouping import GroupingConfig

    gcfg = cfg or GroupingConfig(h_tau=0.0, o_tau=0.0, a_tau=0.0)
    humans, objects, cands = bench_scene(n_humans, n_objects, n_candidates, seed)
    group(humans, objects, cands, gcfg)
    times = []
    n_out = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        n_out = len(group(humans, objects, cands, gcfg))
        times.append(time.perf_counter() - t0)
    return {
        "humans": n_humans,
        "objects": n_objects,
        "candidates": n_candidates,
        "pair_count": n_humans * n_objects * n_candidates,
        "repeats": repeats,
        "median_ms": statistics.median(times) * 1e3,
        "min_ms": min(times) * 1e3,
        "max_ms": max(times) * 1e3,
        "triplets": n_out,
        "machine": machine_info(),
    }


def cmd_bench(args, cfg: RunConfig) -> None:
    from .grouping import GroupingConfig

    gcfg = GroupingConfig(h_tau=0.0, o_tau=0.0, a_tau=0.0, d_tau=cfg.d_tau, mode=cfg.mode)
    _emit(run_bench(args.humans, args.objects, args.candidates, args.repeats, cfg.seed, gcfg))


COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "group": cmd_group,
    "loss": cmd_loss,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        sys.stderr.write("resolved config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n")
        COMMANDS[args.command](args, cfg)
    except CliError as e:
        sys.stderr.write(f"error: {e}\n")
        return e.code
    except (OSError, FileNotFoundError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_IO
    except (FormatError, SchemaError, ValueError, KeyError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
