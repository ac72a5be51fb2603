"""Batch command-line frontend.

Every command reads a KITTI-layout dataset root (``velodyne/``, ``label_2/``,
``calib/``) and writes one output file per frame, named by frame id. Exit
codes: 0 on success, 1 when some frames failed, 2 on configuration or usage
errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .bev import GridConfig, encode_birdnet, encode_mv3d, select_channels
from .boxes import ClassHeightPrior, lift_to_3d
from .evaluation import DIFFICULTIES, evaluate_table, format_report, format_report_kv
from .exceptions import BevliftError, ConfigError
from .front_view import FrontViewConfig, encode_front_view
from .fusion import FusionSpec, fuse_detections
from .ground_plane import Plane, fit_ground_plane
from .kitti_io import (
    BEV_FIELDS,
    Calibration,
    load_calibration,
    load_detections,
    load_labels,
    load_velodyne,
    parse_bev_detections,
    parse_detections,
    parse_label_file,
    read_split,
    write_detections,
    write_velodyne,
    DetectionRecord,
)
from .pointcloud import clip_range, crop_to_fov
from .tensorfile import load_tensor, save_tensor

log = logging.getLogger("bevlift")

DEFAULTS = {
    "grid.x_min": 0.0,
    "grid.x_max": 70.4,
    "grid.y_min": -40.0,
    "grid.y_max": 40.0,
    "grid.z_min": -2.73,
    "grid.z_max": 1.27,
    "grid.resolution": 0.1,
    "grid.slices": 8,
    "grid.density": "log",
    "fov.horizontal_fov": 90.0,
    "fov.require_forward": True,
    "clip.max_distance": 25.0,
    "clip.metric": "forward",
    "fv.azimuth_resolution_deg": 0.08,
    "fv.elevation_resolution_deg": 0.4,
    "fv.azimuth_min_deg": -45.0,
    "fv.azimuth_max_deg": 45.0,
    "fv.elevation_min_deg": -25.2,
    "fv.elevation_max_deg": 2.0,
    "ransac.iterations": 200,
    "ransac.tolerance": 0.05,
    "ransac.bottom_fraction": 0.4,
    "ransac.seed": 0,
    "heights.Car": 1.53,
    "heights.Pedestrian": 1.76,
    "heights.Cyclist": 1.74,
    "heights.policy": "plane",
    "eval.class": "Car",
    "eval.iou": "0.5,0.7",
    "eval.kinds": "bev,3d",
    "eval.difficulty": "Easy,Moderate,Hard",
    "eval.ap_mode": "11-point",
    "fusion.match_iou": 0.5,
    "fusion.unmatched_scale": 1.0,
}


def _coerce(key, raw, template):
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(template, bool):
            if isinstance(raw, bool):
                return raw
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(template, int):
            return int(raw)
        if isinstance(template, float):
            return float(raw)
    except (ValueError, AttributeError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return str(raw)


class PipelineConfig:
    """Flat ``section.key`` settings with typed defaults.

    Config files hold ``key = value`` lines (``#`` starts a comment).
    Unknown keys are rejected, except extra ``heights.<Class>`` entries.
    """

    def __init__(self, values=None):
        self.values = dict(DEFAULTS)
        for key, value in (values or {}).items():
            self.set(key, value)

    def set(self, key, value):
        if key in DEFAULTS:
            self.values[key] = _coerce(key, value, DEFAULTS[key])
        elif key.startswith("heights."):
            self.values[key] = _coerce(key, value, 1.0)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_file(cls, path):
        values = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected key = value")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
        return cls(values)

    def dump(self):
        return "".join(f"{k} = {_format_value(v)}\n" for k, v in sorted(self.values.items()))

    def grid(self):
        v = self.values
        return GridConfig(
            (v["grid.x_min"], v["grid.x_max"]),
            (v["grid.y_min"], v["grid.y_max"]),
            (v["grid.z_min"], v["grid.z_max"]),
            v["grid.resolution"],
            v["grid.slices"],
            v["grid.density"],
        )

    def front_view(self):
        v = self.values
        r = math.radians
        return FrontViewConfig(
            r(v["fv.azimuth_resolution_deg"]),
            r(v["fv.elevation_resolution_deg"]),
            (r(v["fv.azimuth_min_deg"]), r(v["fv.azimuth_max_deg"])),
            (r(v["fv.elevation_min_deg"]), r(v["fv.elevation_max_deg"])),
        )

    def heights(self):
        heights = {k.split(".", 1)[1]: v for k, v in self.values.items()
                   if k.startswith("heights.") and k != "heights.policy"}
        policy = self.values["heights.policy"]
        return ClassHeightPrior(heights=heights, policy={tag: policy for tag in heights})

    def ransac_kwargs(self):
        v = self.values
        return dict(
            n_iterations=v["ransac.iterations"],
            inlier_tolerance=v["ransac.tolerance"],
            bottom_fraction=v["ransac.bottom_fraction"],
            random_state=v["ransac.seed"],
        )

    def preprocess(self, cloud):
        v = self.values
        cloud = crop_to_fov(cloud, v["fov.horizontal_fov"], v["fov.require_forward"])
        return clip_range(cloud, v["clip.max_distance"], v["clip.metric"])

    def list_of(self, key, cast=str):
        return [cast(p.strip()) for p in str(self.values[key]).split(",") if p.strip()]


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


# --------------------------------------------------------------------------
# frame plumbing


def _frame_ids(args, fallback_dir=None, suffix=".bin"):
    if getattr(args, "frames", None):
        return list(args.frames)
    if getattr(args, "split", None):
        return read_split(args.split)
    if fallback_dir and os.path.isdir(fallback_dir):
        return sorted(_ids_in(fallback_dir, suffix))
    raise ConfigError("no frames selected: pass --split or --frames")


def _ids_in(directory, suffix):
    if not directory or not os.path.isdir(directory):
        return set()
    stems = (f[: -len(suffix)] for f in os.listdir(directory) if f.endswith(suffix))
    return {stem for stem in stems if stem.isdigit()}


def _calib_for(root, fid):
    if root:
        path = os.path.join(root, "calib", f"{fid}.txt")
        if os.path.exists(path):
            return load_calibration(path)
    return Calibration.nominal()


def run_frames(frame_ids, work, jobs=1, fail_fast=False):
    """Apply ``work(fid)`` to every frame; returns ``{fid: error message}``."""
    failures = {}

    def guarded(fid):
        try:
            work(fid)
            return fid, None
        except (OSError, BevliftError, ValueError) as exc:
            return fid, f"{type(exc).__name__}: {exc}"

    if jobs <= 1:
        for fid in frame_ids:
            _, err = guarded(fid)
            if err:
                failures[fid] = err
                log.error("frame %s: %s", fid, err)
                if fail_fast:
                    break
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for fid, err in pool.map(guarded, frame_ids):
                if err:
                    failures[fid] = err
                    log.error("frame %s: %s", fid, err)
    return failures


def _prepare_out(args, config):
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "effective_config.txt"), "w", encoding="utf-8") as fh:
        fh.write(config.dump())


def _finish(args, failures):
    log_path = os.path.join(args.out, "errors.log")
    if os.path.exists(log_path):
        os.remove(log_path)
    if failures:
        with open(log_path, "w", encoding="utf-8") as fh:
            for fid in sorted(failures):
                fh.write(f"{fid}: {failures[fid]}\n")
        return 1
    return 0


# --------------------------------------------------------------------------
# commands


def cmd_encode_bev(args, config):
    grid = config.grid()
    encode = encode_mv3d if args.variant == "mv3d" else encode_birdnet
    frames = _frame_ids(args, os.path.join(args.data, "velodyne"))
    _prepare_out(args, config)

    def work(fid):
        cloud = load_velodyne(os.path.join(args.data, "velodyne", f"{fid}.bin"))
        if args.clip:
            cloud = config.preprocess(cloud)
        save_tensor(os.path.join(args.out, f"{fid}.bevt"), encode(cloud, grid))

    return _finish(args, run_frames(frames, work, args.jobs, args.fail_fast))


def cmd_encode_fv(args, config):
    fv = config.front_view()
    frames = _frame_ids(args, os.path.join(args.data, "velodyne"))
    _prepare_out(args, config)

    def work(fid):
        cloud = load_velodyne(os.path.join(args.data, "velodyne", f"{fid}.bin"))
        if args.clip:
            cloud = config.preprocess(cloud)
        save_tensor(os.path.join(args.out, f"{fid}.bevt"), encode_front_view(cloud, fv))

    return _finish(args, run_frames(frames, work, args.jobs, args.fail_fast))


def cmd_clip(args, config):
    frames = _frame_ids(args, os.path.join(args.data, "velodyne"))
    _prepare_out(args, config)
    os.makedirs(os.path.join(args.out, "velodyne"), exist_ok=True)

    def work(fid):
        cloud = load_velodyne(os.path.join(args.data, "velodyne", f"{fid}.bin"))
        clipped = config.preprocess(cloud)
        with open(os.path.join(args.out, "velodyne", f"{fid}.bin"), "wb") as fh:
            fh.write(write_velodyne(clipped))

    return _finish(args, run_frames(frames, work, args.jobs, args.fail_fast))


def cmd_ground_plane(args, config):
    frames = _frame_ids(args, os.path.join(args.data, "velodyne"))
    kwargs = config.ransac_kwargs()
    _prepare_out(args, config)

    def work(fid):
        cloud = load_velodyne(os.path.join(args.data, "velodyne", f"{fid}.bin"))
        plane, _ = fit_ground_plane(cloud, **kwargs)
        with open(os.path.join(args.out, f"{fid}.txt"), "w", encoding="utf-8") as fh:
            fh.write(plane.to_text())

    return _finish(args, run_frames(frames, work, args.jobs, args.fail_fast))


def _height_from_channel(grid, bev, plane):
    from .bev import cell_indices
    from .boxes import corners_bev

    import numpy as np

    cfg = grid.config
    corners = corners_bev(bev)
    rows_all, cols_all = np.meshgrid(np.arange(cfg.n_rows), np.arange(cfg.n_cols), indexing="ij")
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    r_lo, c_lo, _ = cell_indices(hi[0], hi[1], cfg)
    r_hi, c_hi, _ = cell_indices(lo[0], lo[1], cfg)
    r0, r1 = max(int(r_lo), 0), min(int(r_hi), cfg.n_rows - 1)
    c0, c1 = max(int(c_lo), 0), min(int(c_hi), cfg.n_cols - 1)
    if r1 < r0 or c1 < c0:
        return None
    rows, cols = rows_all[r0:r1 + 1, c0:c1 + 1], cols_all[r0:r1 + 1, c0:c1 + 1]
    cx = cfg.x_range[1] - (rows + 0.5) * cfg.resolution
    cy = cfg.y_range[1] - (cols + 0.5) * cfg.resolution
    c, s = math.cos(bev.yaw), math.sin(bev.yaw)
    u = (cx - bev.center[0]) * c + (cy - bev.center[1]) * s
    v = -(cx - bev.center[0]) * s + (cy - bev.center[1]) * c
    inside = (np.abs(u) <= bev.size[0] / 2) & (np.abs(v) <= bev.size[1] / 2)
    heights = [grid.channels[i] for i, t in enumerate(grid.channel_semantics)
               if t == "height" or t.startswith("height_slice")]
    if not heights or not inside.any():
        return None
    z_min, z_max = cfg.z_range
    if grid.channel_semantics[0] == "height":
        vals = heights[0][rows[inside], cols[inside]]
        if vals.max() <= 0:
            return None
        top = z_min + float(vals.max()) * (z_max - z_min)
    else:
        edges, delta = cfg.slab_edges()
        top = None
        for i in range(len(heights) - 1, -1, -1):
            vals = heights[i][rows[inside], cols[inside]]
            if vals.max() > 0:
                top = edges[i] + float(vals.max()) * delta
                break
        if top is None:
            return None
    height = top - plane.height_at(*bev.center)
    return height if height > 0 else None


def cmd_lift(args, config):
    prior = config.heights()
    kwargs = config.ransac_kwargs()
    frames = _frame_ids(args, args.bev_dets, suffix=".txt")
    _prepare_out(args, config)

    def work(fid):
        with open(os.path.join(args.bev_dets, f"{fid}.txt"), "rb") as fh:
            bev_dets = parse_bev_detections(fh.read())
        if args.planes:
            with open(os.path.join(args.planes, f"{fid}.txt"), encoding="utf-8") as fh:
                plane = Plane.from_text(fh.read())
        elif args.data:
            cloud = load_velodyne(os.path.join(args.data, "velodyne", f"{fid}.bin"))
            plane, _ = fit_ground_plane(cloud, **kwargs)
        else:
            raise ConfigError("lift needs --planes or --data")
        calib = _calib_for(args.data, fid)
        grid = load_tensor(os.path.join(args.bev_tensors, f"{fid}.bevt")) if args.bev_tensors else None
        records = []
        for tag, bev, score in bev_dets:
            height = prior.height_for(tag)
            if grid is not None and prior.policy_for(tag) == "height-channel":
                height = _height_from_channel(grid, bev, plane) or height
            records.append(DetectionRecord(tag, lift_to_3d(bev, plane, height), score))
        with open(os.path.join(args.out, f"{fid}.txt"), "w", encoding="utf-8") as fh:
            fh.write(write_detections(records, calib))

    return _finish(args, run_frames(frames, work, args.jobs, args.fail_fast))


def cmd_evaluate(args, config):
    frames = _frame_ids(args, os.path.join(args.data, "label_2"), suffix=".txt")
    missing = [f for f in frames if not os.path.exists(os.path.join(args.data, "label_2", f"{f}.txt"))]
    if missing:
        log.error("missing ground truth for frames: %s", ", ".join(missing))
        return 1
    gts, dets, calibs = {}, {}, {}
    for fid in frames:
        calibs[fid] = _calib_for(args.data, fid)
        gts[fid] = load_labels(os.path.join(args.data, "label_2", f"{fid}.txt"))
        det_path = os.path.join(args.dets, f"{fid}.txt")
        dets[fid] = load_detections(det_path, calibs[fid]) if os.path.exists(det_path) else []
    class_tag = config["eval.class"]
    table = evaluate_table(
        dets, gts, class_tag,
        overlap_kinds=config.list_of("eval.kinds"),
        thresholds=config.list_of("eval.iou", float),
        difficulties=config.list_of("eval.difficulty"),
        ap_mode=config["eval.ap_mode"],
        calibs=calibs,
    )
    report = format_report(table, class_tag=class_tag)
    sys.stdout.write(report)
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
        with open(args.out + ".kv", "w", encoding="utf-8") as fh:
            fh.write(format_report_kv(table, class_tag))
    return 0


def cmd_fuse(args, config):
    spec = FusionSpec("mean", config["fusion.match_iou"], config["fusion.unmatched_scale"])
    if args.split or args.frames:
        frames = _frame_ids(args)
    else:
        frames = sorted(_ids_in(args.real, ".txt") | _ids_in(args.generated, ".txt"))
    _prepare_out(args, config)

    def load(d, fid, calib):
        path = os.path.join(d, f"{fid}.txt")
        return load_detections(path, calib) if os.path.exists(path) else []

    def work(fid):
        calib = _calib_for(args.data, fid)
        fused = fuse_detections(load(args.real, fid, calib), load(args.generated, fid, calib), spec)
        with open(os.path.join(args.out, f"{fid}.txt"), "w", encoding="utf-8") as fh:
            fh.write(write_detections(fused, calib))

    return _finish(args, run_frames(frames, work, args.jobs, args.fail_fast))


def load_boxes_any(path, calib=None):
    """Boxes from a label (15 fields), result (16) or BEV detection (7) file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    first = next((line.split() for line in raw.decode("utf-8", "replace").splitlines() if line.split()), None)
    if first is None:
        return []
    if len(first) == 15:
        return [b for b in (o.box3d(calib) for o in parse_label_file(raw)) if b is not None]
    if len(first) == 16:
        return [d.box3d for d in parse_detections(raw, calib)]
    if len(first) == BEV_FIELDS:
        return [box for _, box, _ in parse_bev_detections(raw)]
    raise ConfigError(f"{path}: unrecognized box file ({len(first)} fields)")


def _output_stems(paths):
    """Basename stems, prefixed by the parent directory when they collide."""
    stems = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{os.path.basename(os.path.dirname(os.path.abspath(p)))}_{s}" for p, s in zip(paths, stems)]


def cmd_render(args, config):
    from .render import render_channels, render_overlay

    os.makedirs(args.out, exist_ok=True)
    calib = load_calibration(args.calib) if args.calib else Calibration.nominal()
    sources = [load_boxes_any(p, calib) for p in (args.overlay or [])]
    failures = {}
    for path, stem in zip(args.tensor, _output_stems(args.tensor)):
        try:
            grid = load_tensor(path)
            for tag, image in render_channels(grid).items():
                image.save(os.path.join(args.out, f"{stem}_{tag}.png"))
            if sources:
                render_overlay(grid, sources, args.channel).save(os.path.join(args.out, f"{stem}_overlay.png"))
        except (OSError, BevliftError, ValueError) as exc:
            failures[stem] = f"{type(exc).__name__}: {exc}"
            log.error("%s: %s", path, exc)
    return _finish(args, failures)


def cmd_ablate(args, config):
    keep = [t.strip() for t in args.keep.split(",") if t.strip()]
    _prepare_out(args, config)
    failures = {}
    for path, stem in zip(args.tensor, _output_stems(args.tensor)):
        try:
            save_tensor(os.path.join(args.out, f"{stem}.bevt"), select_channels(load_tensor(path), keep))
        except ConfigError:
            raise
        except (OSError, BevliftError, ValueError) as exc:
            failures[stem] = f"{type(exc).__name__}: {exc}"
            log.error("%s: %s", path, exc)
    return _finish(args, failures)


def cmd_make_synthetic(args, config):
    from .synthetic import write_mini_dataset

    ids = write_mini_dataset(args.out, args.n_frames, args.seed if args.seed is not None else 0)
    log.info("wrote %d frames to %s", len(ids), args.out)
    return 0


# --------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(prog="bevlift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--seed", type=int)
    common.add_argument("--fail-fast", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")
    frames = argparse.ArgumentParser(add_help=False)
    frames.add_argument("--split", help="file listing frame ids")
    frames.add_argument("--frames", nargs="+", help="explicit frame ids")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode-bev", parents=[common, frames], help="rasterize clouds to BEV tensors")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("birdnet", "mv3d"), default="birdnet")
    p.add_argument("--slices", type=int)
    p.add_argument("--clip", action="store_true", help="FOV crop and range clip first")
    p.add_argument("--clip-distance", type=float)
    p.set_defaults(func=cmd_encode_bev)

    p = sub.add_parser("encode-fv", parents=[common, frames], help="cylindrical front-view tensors")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clip", action="store_true")
    p.add_argument("--clip-distance", type=float)
    p.set_defaults(func=cmd_encode_fv)

    p = sub.add_parser("clip", parents=[common, frames], help="FOV crop + range clip velodyne scans")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clip-distance", type=float)
    p.set_defaults(func=cmd_clip)

    p = sub.add_parser("ground-plane", parents=[common, frames], help="RANSAC ground plane per frame")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ground_plane)

    p = sub.add_parser("lift", parents=[common, frames], help="lift BEV detections to 3D result files")
    p.add_argument("--bev-dets", required=True)
    p.add_argument("--planes")
    p.add_argument("--data", help="dataset root for calibration (and clouds when --planes is absent)")
    p.add_argument("--bev-tensors", help="BEV tensors for the height-channel policy")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("evaluate", parents=[common, frames], help="KITTI-style AP report")
    p.add_argument("--dets", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--class", dest="class_tag")
    p.add_argument("--iou", type=float, nargs="+")
    p.add_argument("--kind", nargs="+", choices=("bev", "3d", "2d"))
    p.add_argument("--difficulty", nargs="+", choices=DIFFICULTIES)
    p.add_argument("--ap-mode", choices=("11-point", "40-point"))
    p.add_argument("--out", help="report path (a .kv twin is written alongside)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fuse", parents=[common, frames], help="late-fuse two detectors' result files")
    p.add_argument("--real", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--data", help="dataset root for calibration")
    p.add_argument("--out", required=True)
    p.add_argument("--match-iou", type=float)
    p.add_argument("--unmatched-scale", type=float)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("render", parents=[common], help="grayscale PNGs of tensors and box overlays")
    p.add_argument("--tensor", nargs="+", required=True)
    p.add_argument("--overlay", nargs="+", help="box files; each file is one source shade")
    p.add_argument("--calib", help="calibration file for camera-frame box files")
    p.add_argument("--channel", help="channel tag under the overlay")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("ablate-channels", parents=[common], help="keep a subset of tensor channels")
    p.add_argument("--tensor", nargs="+", required=True)
    p.add_argument("--keep", required=True, help="comma list of height, density, intensity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("make-synthetic", parents=[common], help="write the synthetic mini-dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-frames", type=int, default=5)
    p.set_defaults(func=cmd_make_synthetic)
    return parser


_FLAG_KEYS = {
    "slices": "grid.slices",
    "clip_distance": "clip.max_distance",
    "seed": "ransac.seed",
    "class_tag": "eval.class",
    "ap_mode": "eval.ap_mode",
    "match_iou": "fusion.match_iou",
    "unmatched_scale": "fusion.unmatched_scale",
}
_LIST_FLAG_KEYS = {"iou": "eval.iou", "kind": "eval.kinds", "difficulty": "eval.difficulty"}


def resolve_config(args):
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        config.set(key.strip(), value)
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            config.set(key, value)
    for attr, key in _LIST_FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value:
            config.set(key, ",".join(str(v) for v in value))
    return config


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        config = resolve_config(args)
        return args.func(args, config)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
