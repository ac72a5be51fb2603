"""Independent reference implementations used as test oracles.

Nothing here imports the library's geometry or evaluation internals; each
oracle recomputes its answer from first principles.
"""

import bisect
import math

import numpy as np


# ---------------------------------------------------------------- IoU

def _inside_rect(px, py, cx, cy, length, width, yaw):
    # float32 keeps the 10**6-sample oracle fast; its rounding (~1e-7 m) is
    # far below the sampling error
    f = np.float32
    c, s = f(math.cos(yaw)), f(math.sin(yaw))
    dx, dy = px - f(cx), py - f(cy)
    u = np.abs(dx * c + dy * s)
    v = np.abs(dy * c - dx * s)
    return (u <= f(0.5 * length)) & (v <= f(0.5 * width))


def mc_iou_bev(a, b, side=1000, seed=0):
    """IoU with the intersection area measured by jittered-stratified
    sampling of ``side**2`` points over ``a``'s own rectangle: the fraction
    landing in ``b`` times ``area(a)``."""
    f = np.float32
    rng = np.random.default_rng(seed)
    steps = np.arange(side, dtype=f)
    u = ((steps[:, None] + rng.random((side, side), dtype=f)) / f(side) - f(0.5)) * f(a.size[0])
    v = ((steps[None, :] + rng.random((side, side), dtype=f)) / f(side) - f(0.5)) * f(a.size[1])
    c, s = f(math.cos(a.yaw)), f(math.sin(a.yaw))
    px = f(a.center[0]) + u * c - v * s
    py = f(a.center[1]) + u * s + v * c
    area_a = a.size[0] * a.size[1]
    area_b = b.size[0] * b.size[1]
    inter = area_a * np.count_nonzero(_inside_rect(px, py, *b.center, *b.size, b.yaw)) / side**2
    return inter / (area_a + area_b - inter)


# ---------------------------------------------------------------- BEV binning

def _interval_index(value, upper, res, n):
    """Index k of the half-open interval (upper - (k+1)res, upper - k res]
    holding ``value``, found by scanning every interval; None if outside."""
    # The library uses floor((upper - v) / res); this scan reaches the same
    # answer through interval membership instead.
    q = (upper - value) / res
    for k in range(n):
        if k <= q < k + 1:
            return k
    return None


def brute_cell(x, y, cfg):
    row = _interval_index(x, cfg.x_range[1], cfg.resolution, cfg.n_rows)
    col = _interval_index(y, cfg.y_range[1], cfg.resolution, cfg.n_cols)
    if row is None or col is None:
        return None
    return row, col


def _fast_cell(x, y, cfg):
    # Closed-form shortcut for large grids; validated against brute_cell in tests.
    q_r = (cfg.x_range[1] - x) / cfg.resolution
    q_c = (cfg.y_range[1] - y) / cfg.resolution
    if not (0 <= q_r < cfg.n_rows and 0 <= q_c < cfg.n_cols):
        return None
    return int(q_r), int(q_c)


def _top(points):
    # highest z, ties broken by the lowest input index
    return min(points, key=lambda ip: (-ip[1][2], ip[0]))[1]


def brute_bev(cloud, cfg, variant="birdnet"):
    """Dict {(channel_tag, row, col): value} of every nonzero-capable cell."""
    z_min, z_max = cfg.z_range
    cells = {}
    for i, p in enumerate(cloud.tolist()):
        if not (z_min <= p[2] <= z_max):
            continue
        cell = _fast_cell(p[0], p[1], cfg)
        if cell is not None:
            cells.setdefault(cell, []).append((i, p))
    out = {}
    for cell, pts in cells.items():
        n = len(pts)
        density = min(1.0, math.log(n + 1) / math.log(64)) if cfg.density == "log" else min(1.0, n / 64)
        out[("density", *cell)] = density
        out[("intensity", *cell)] = _top(pts)[3]
        if variant == "birdnet":
            h = (_top(pts)[2] - z_min) / (z_max - z_min)
            out[("height", *cell)] = min(1.0, max(0.0, h))
        else:
            m = cfg.n_slices
            delta = (z_max - z_min) / m
            edges = [z_min + k * delta for k in range(m)]
            by_slab = {}
            for ip in pts:
                slab = min(bisect.bisect_right(edges, ip[1][2]) - 1, m - 1)
                by_slab.setdefault(slab, []).append(ip)
            for slab, sp in by_slab.items():
                v = (_top(sp)[2] - edges[slab]) / delta
                out[(f"height_slice({slab})", *cell)] = min(1.0, max(0.0, v))
    return out


def dense_from_brute(values, tags, shape):
    grid = np.zeros((len(tags), *shape), dtype=np.float32)
    for (tag, r, c), v in values.items():
        grid[tags.index(tag), r, c] = v
    return grid


# ---------------------------------------------------------------- front view

def brute_front_view(cloud, cfg):
    (az_lo, az_hi), (el_lo, el_hi) = cfg.azimuth_span, cfg.elevation_span
    grid = np.zeros((3, cfg.n_rows, cfg.n_cols), dtype=np.float32)
    best = {}
    for i, (x, y, z, r) in enumerate(cloud.tolist()):
        theta = math.atan2(y, x)
        phi = math.atan2(z, math.hypot(x, y))
        col = math.floor((az_hi - theta) / cfg.azimuth_resolution)
        row = math.floor((el_hi - phi) / cfg.elevation_resolution)
        if not (0 <= row < cfg.n_rows and 0 <= col < cfg.n_cols):
            continue
        key = (math.sqrt(x * x + y * y + z * z), i)
        if (row, col) not in best or key < best[(row, col)][0]:
            best[(row, col)] = (key, (z, math.hypot(x, y), r))
    for (row, col), (_, vals) in best.items():
        grid[:, row, col] = vals
    return grid


# ---------------------------------------------------------------- evaluation

DEVKIT_THRESHOLDS = {  # min bbox height px, max occlusion, max truncation
    "Easy": (40.0, 0, 0.15),
    "Moderate": (25.0, 1, 0.30),
    "Hard": (25.0, 2, 0.50),
}


def aligned_iou(a, b):
    """BEV IoU of two boxes whose yaw is a multiple of pi/2."""
    def extent(box):
        quarter = round(box.yaw / (math.pi / 2)) % 2
        length, width = box.size if quarter == 0 else box.size[::-1]
        return (box.center[0] - length / 2, box.center[0] + length / 2,
                box.center[1] - width / 2, box.center[1] + width / 2)

    ax0, ax1, ay0, ay1 = extent(a)
    bx0, bx1, by0, by1 = extent(b)
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    return inter / (a.size[0] * a.size[1] + b.size[0] * b.size[1] - inter)


def reference_evaluate(frames, class_tag, iou_thr, difficulty, n_points=11):
    """Brute-force AP.

    ``frames`` maps frame id to ``(dets, gts)`` where a det is
    ``(class, bev_box, score, bbox2d)`` and a gt is
    ``(class, bev_box, bbox2d, occlusion, truncation)``.
    """
    min_h, max_occ, max_trunc = DEVKIT_THRESHOLDS[difficulty]
    neighbors = {"Car": {"Van"}, "Pedestrian": {"Person_sitting"}}.get(class_tag, set())
    pooled = []
    total_gt = 0
    for f_pos, fid in enumerate(sorted(frames)):
        dets, gts = frames[fid]
        kind = []
        for cls, _, bbox, occ, trunc in gts:
            if cls == "DontCare":
                kind.append("dc")
            elif cls == class_tag:
                ok = bbox[3] - bbox[1] >= min_h and occ <= max_occ and trunc <= max_trunc
                kind.append("valid" if ok else "ign")
            elif cls in neighbors:
                kind.append("ign")
            else:
                kind.append("skip")
        total_gt += kind.count("valid")
        taken = [False] * len(gts)
        mine = [i for i in range(len(dets)) if dets[i][0] == class_tag]
        mine.sort(key=lambda i: (-dets[i][2], i))
        for i in mine:
            _, dbox, score, dbb = dets[i]
            outcome = "FP"
            for wanted in ("valid", "ign"):
                options = [(aligned_iou(dbox, gts[j][1]), -j) for j in range(len(gts))
                           if kind[j] == wanted and not taken[j]]
                options = [o for o in options if o[0] >= iou_thr]
                if options:
                    j = -max(options)[1]
                    taken[j] = True
                    outcome = "TP" if wanted == "valid" else "ignored"
                    break
            if outcome == "FP" and dbb is not None:
                d_area = (dbb[2] - dbb[0]) * (dbb[3] - dbb[1])
                for j in range(len(gts)):
                    if kind[j] != "dc":
                        continue
                    r = gts[j][2]
                    iw = min(dbb[2], r[2]) - max(dbb[0], r[0])
                    ih = min(dbb[3], r[3]) - max(dbb[1], r[1])
                    if iw > 0 and ih > 0 and iw * ih / d_area >= iou_thr:
                        outcome = "ignored"
                        break
            if outcome != "ignored":
                pooled.append((-score, f_pos, i, outcome == "TP"))
    pooled.sort()
    return reference_ap([p[3] for p in pooled], total_gt, n_points)


def reference_ap(sequence, num_gt, n_points=11):
    """Interpolated AP by direct enumeration of every prefix of ``sequence``."""
    if num_gt == 0:
        return 0.0
    if n_points == 11:
        levels = [i / 10 for i in range(11)]
    else:
        levels = [i / 40 for i in range(1, 41)]
    values = []
    for r in levels:
        best = 0.0
        for k in range(1, len(sequence) + 1):
            hits = sum(1 for v in sequence[:k] if v)
            if hits / num_gt >= r:
                best = max(best, hits / k)
        values.append(best)
    return math.fsum(values) / len(values)
