"""Command-line front end: ``garmentflow <command> [options]``.

Every command resolves its settings as defaults < ``--config`` JSON < flags,
rejects unknown keys, and writes the resolved settings next to its outputs.
Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .cycleopt import CycleConfig
from .errors import GarmentFlowError
from .flowfield import FlowField, blend_wflow, warp_bilinear
from .geometry import rasterize, vertex_flow
from .labels import GARMENT_LABELS, PROTECTED_LABELS
from .metrics import MetricReport, iou, label_mask, ssim
from .pipeline import PersonBundle, candidate_pairs, sample_pairs, transfer
from .pixelflow import FlowParams, estimate_flow

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    # synth
    "canvas": [128, 128],
    "frames": 2,
    "garment": "tight",
    "texture": "noise",
    "period": 14.0,
    "background": "flat",
    # pixel flow
    "levels": 4,
    "max_disp": 4,
    "patch_radius": 3,
    "median_filter": True,
    "part_weight": 0.25,
    # transfer / refinement
    "mode": "wflow",
    "dilation": 5,
    "garment_labels": list(GARMENT_LABELS),
    "protected_labels": list(PROTECTED_LABELS),
    "k": 20,
    "step_size": 0.2,
    "tv_weight": 0.1,
    "armijo_backtrack": True,
    "smoothing": 4.0,
    # evaluation
    "iou_threshold": 0.5,
    "per_video": None,
    # optimiser settings of the original networks; recorded, never used
    "adam_beta1": 0.5,
    "adam_beta2": 0.999,
    "learning_rate": 0.0002,
}

FLAG_KEYS = {"seed", "jobs", "k", "levels", "max_disp", "frames", "mode", "per_video"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        path = Path(args.config)
        try:
            user = json.loads(path.read_text())
        except FileNotFoundError:
            raise GarmentFlowError(f"{path}: config file not found") from None
        except json.JSONDecodeError as exc:
            raise GarmentFlowError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise GarmentFlowError(f"{path}: config must be a JSON object")
        unknown = sorted(set(user) - set(DEFAULTS))
        if unknown:
            raise GarmentFlowError(f"{path}: unknown config keys {unknown}")
        cfg.update(user)
    for key in FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def flow_params(cfg) -> FlowParams:
    md = cfg["max_disp"]
    return FlowParams(
        levels=int(cfg["levels"]),
        max_disp=tuple(md) if isinstance(md, list) else int(md),
        patch_radius=int(cfg["patch_radius"]),
        median_filter=bool(cfg["median_filter"]),
        part_weight=float(cfg["part_weight"]),
    )


def cycle_config(cfg) -> CycleConfig:
    return CycleConfig(
        k=int(cfg["k"]),
        step_size=float(cfg["step_size"]),
        tv_weight=float(cfg["tv_weight"]),
        armijo_backtrack=bool(cfg["armijo_backtrack"]),
        smoothing=float(cfg["smoothing"]),
    )


def _write_config(path, cfg, command) -> None:
    io.write_json(path, {"command": command, **cfg})


def _out_dir(args) -> Path:
    if args.out is None:
        raise UsageError(f"{args.command}: --out is required")
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _out_file(args, suffix) -> Path:
    if args.out is None:
        raise UsageError(f"{args.command}: --out is required")
    p = Path(args.out)
    if p.suffix != suffix:
        raise UsageError(f"{args.command}: --out must end in {suffix}")
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".config.json")


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- commands


def _render_frame(job):
    from .synthdata import PuppetModel, dance_pose

    spec, t = job
    return PuppetModel(spec).render(dance_pose(spec.seed, t, spec.canvas))


def cmd_synth(args, cfg):
    from .synthdata import PuppetSpec, pair_from_puppets

    out = _out_dir(args)
    n = int(cfg["frames"])
    if n < 2:
        raise GarmentFlowError(f"frames must be >= 2, got {n}")
    spec = PuppetSpec(
        seed=int(cfg["seed"]),
        canvas=tuple(int(v) for v in cfg["canvas"]),
        garment=cfg["garment"],
        texture=cfg["texture"],
        period=float(cfg["period"]),
        background=cfg["background"],
    )
    ts = [float(t) for t in np.linspace(0.0, 1.0, n, endpoint=False)]
    frames = _map(_render_frame, [(spec, t) for t in ts], int(cfg["jobs"]))
    for i, f in enumerate(frames):
        d = out / f"frame_{i:03d}"
        f.bundle.save(d, f.mesh)
        f.extended.save(d / "mesh_extended.json")
    pair_from_puppets(frames[0], frames[1]).save(out / "pair")
    _write_config(out / "config.json", cfg, "synth")
    print(f"wrote {n} frames and pair/ to {out}")


def cmd_pairs(args, cfg):
    root = Path(args.frames_dir)
    dirs = sorted(p for p in root.glob("frame_*") if p.is_dir())
    if not dirs:
        raise GarmentFlowError(f"{root}: no frame_* bundle directories")
    bundles = [PersonBundle.load(d, require_mesh=False)[0] for d in dirs]
    per = cfg["per_video"]
    n_sampled = len(bundles) if per is None else int(per)
    cands = candidate_pairs(n_sampled)
    pairs = sample_pairs(bundles, None if per is None else int(per))
    print(f"{len(cands)} candidate pairs, {len(pairs)} oriented pairs")
    if args.out is not None:
        out = _out_file(args, ".json")
        io.write_json(
            out,
            {
                "frames": [d.name for d in dirs],
                "candidates": len(cands),
                "pairs": [[dirs[a].name, dirs[b].name] for a, b in pairs],
            },
        )
        _write_config(_sidecar(out), cfg, "pairs")


def cmd_flow(args, cfg):
    src, _ = PersonBundle.load(args.source, require_mesh=False)
    tgt, _ = PersonBundle.load(args.target, require_mesh=False)
    out = _out_file(args, ".flo")
    flow = estimate_flow(src, tgt, flow_params(cfg))
    io.write_flo(out, flow)
    _write_config(_sidecar(out), cfg, "flow")


def cmd_vflow(args, cfg):
    src, src_mesh = PersonBundle.load(args.source)
    tgt, tgt_mesh = PersonBundle.load(args.target)
    out = _out_file(args, ".flo")
    h, w = tgt.shape
    flow, _ = vertex_flow(src_mesh, tgt_mesh, rasterize(tgt_mesh, w, h))
    io.write_flo(out, flow)
    _write_config(_sidecar(out), cfg, "vflow")


def cmd_blend(args, cfg):
    fv = io.read_flo(args.vertex_flow)
    fp = io.read_flo(args.pixel_flow)
    out = _out_file(args, ".flo")
    io.write_flo(out, blend_wflow(fv, fv.valid.astype(np.float64), fp))
    _write_config(_sidecar(out), cfg, "blend")


def cmd_warp(args, cfg):
    image = io.read_png(args.image)
    flow = io.read_flo(args.flow)
    out = _out_file(args, ".png")
    io.write_png(out, warp_bilinear(image, flow))
    _write_config(_sidecar(out), cfg, "warp")


def _run_transfer(args, cfg, refine):
    src, src_mesh = PersonBundle.load(args.source)
    qry, qry_mesh = PersonBundle.load(args.query)
    out = _out_dir(args)
    res = transfer(
        src,
        qry,
        src_mesh,
        qry_mesh,
        flow_params(cfg),
        refine=cycle_config(cfg) if refine else None,
        mode=cfg["mode"],
        garment_labels=tuple(cfg["garment_labels"]),
        protected_labels=tuple(cfg["protected_labels"]),
        dilation=int(cfg["dilation"]),
    )
    io.write_png(out / "composite.png", res.composite)
    io.write_png(out / "warped.png", res.warped)
    io.write_png(out / "background.png", res.inpainted_background)
    io.write_pgm(out / "fusion_mask.pgm", np.round(np.clip(res.fusion_mask, 0, 1) * 255))
    io.write_pgm(out / "garment.pgm", np.round(np.clip(res.warped_garment, 0, 1) * 255))
    io.write_flo(out / "wflow.flo", res.wflow)
    if res.refined is not None:
        res.refined.write_trace(out / "loss_trace.csv")
    _write_config(out / "config.json", cfg, args.command)
    return res


def cmd_transfer(args, cfg):
    _run_transfer(args, cfg, refine=False)


def cmd_refine(args, cfg):
    res = _run_transfer(args, cfg, refine=True)
    trace = res.refined.loss_trace
    print(
        f"objective {res.refined.initial_objective:.6g} -> {trace[-1]:.6g} in {len(trace)} passes"
    )


def _eval_item(job):
    pred, gt, garment_labels, threshold = job
    pred, gt = Path(pred), Path(gt)
    if pred.is_dir():
        image = io.read_png(pred / "composite.png")
        mask_path = pred / "garment.pgm"
        mask = io.read_pgm(mask_path) / 255.0 if mask_path.exists() else None
    else:
        image, mask = io.read_png(pred), None
    if gt.is_dir():
        ref = io.read_png(gt / "image.png")
        seg = io.read_pgm(gt / "segmentation.pgm")
        gt_mask = label_mask(seg, garment_labels)
    else:
        ref, gt_mask = io.read_png(gt), None
    if image.shape != ref.shape:
        raise GarmentFlowError(f"{pred}: shape {image.shape} does not match {gt} {ref.shape}")
    s = ssim(image, ref)
    i = iou(mask, gt_mask, threshold) if mask is not None and gt_mask is not None else float("nan")
    l1 = float(np.abs(image - ref).mean())
    return s, i, l1


def cmd_eval(args, cfg):
    items = args.items
    if len(items) % 2:
        raise UsageError("eval: expects PRED GT pairs")
    jobs = [
        (items[i], items[i + 1], tuple(cfg["garment_labels"]), float(cfg["iou_threshold"]))
        for i in range(0, len(items), 2)
    ]
    results = _map(_eval_item, jobs, int(cfg["jobs"]))
    report = MetricReport()
    for (pred, _, _, _), (s, i, l1) in zip(jobs, results):
        report.rows.append({"image_id": Path(pred).name, "ssim": s, "iou": i, "l1": l1})
    out = _out_file(args, ".csv")
    report.write_csv(out)
    _write_config(_sidecar(out), cfg, "eval")
    for row in report.rows:
        print(f"{row['image_id']}: ssim {row['ssim']:.4f} iou {row['iou']:.4f} l1 {row['l1']:.4f}")


def cmd_viz(args, cfg):
    from .cycleopt import read_loss_trace
    from .viz import flow_to_color, svg_line_plot

    src = Path(args.input)
    if src.suffix == ".flo":
        out = _out_file(args, ".png")
        io.write_png(out, flow_to_color(io.read_flo(src)))
    elif src.suffix == ".csv":
        out = _out_file(args, ".svg")
        if not src.exists():
            raise GarmentFlowError(f"{src}: file not found")
        try:
            objectives, _ = read_loss_trace(src)
        except (KeyError, ValueError) as exc:
            raise GarmentFlowError(f"{src}: malformed loss trace ({exc})") from None
        svg_line_plot(out, objectives, title="cycle refinement", ylabel="objective")
    else:
        raise UsageError("viz: input must be a .flo flow or a .csv loss trace")


COMMANDS = {
    "synth": cmd_synth,
    "pairs": cmd_pairs,
    "flow": cmd_flow,
    "vflow": cmd_vflow,
    "blend": cmd_blend,
    "warp": cmd_warp,
    "transfer": cmd_transfer,
    "refine": cmd_refine,
    "eval": cmd_eval,
    "viz": cmd_viz,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for independent items")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--k", type=int, help="cycle refinement passes")
    common.add_argument("--levels", type=int, help="pixel-flow pyramid levels")
    common.add_argument("--max-disp", dest="max_disp", type=int, help="per-level search radius")

    parser = _Parser(prog="garmentflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("synth", parents=[common], help="render puppet frames and a ground-truth pair")
    p.add_argument("--frames", type=int)
    p = sub.add_parser("pairs", parents=[common], help="sample training pairs from frames")
    p.add_argument("frames_dir")
    p.add_argument("--per-video", dest="per_video", type=int)
    for name, text in (("flow", "pixel flow"), ("vflow", "vertex flow")):
        p = sub.add_parser(name, parents=[common], help=f"{text} between two bundles -> .flo")
        p.add_argument("source")
        p.add_argument("target")
    p = sub.add_parser("blend", parents=[common], help="blend vertex and pixel flow -> .flo")
    p.add_argument("vertex_flow")
    p.add_argument("pixel_flow")
    p = sub.add_parser("warp", parents=[common], help="warp an image by a flow -> .png")
    p.add_argument("image")
    p.add_argument("flow")
    for name, text in (("transfer", "garment transfer"), ("refine", "transfer with cycle refinement")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("source")
        p.add_argument("query")
        p.add_argument("--mode", choices=("wflow", "vertex", "pixel"))
    p = sub.add_parser("eval", parents=[common], help="SSIM / IoU / L1 report -> .csv")
    p.add_argument("items", nargs="+", metavar="PRED GT")
    p = sub.add_parser("viz", parents=[common], help="flow colour PNG or loss-trace SVG")
    p.add_argument("input")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (GarmentFlowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
