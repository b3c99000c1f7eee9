#!/usr/bin/env python3
"""Independent reference computations for the fixture-based tests.

Nothing here imports the C++ code; values are recomputed from the PNGs with
numpy/scipy and written to frozen.json. The C++ tests carry the same numbers
as literals. `--check` recomputes and compares against the frozen file.
"""
import argparse
import hashlib
import json
import os
import sys

import numpy as np
from PIL import Image
from scipy.ndimage import convolve1d

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIX = os.path.join(ROOT, "fixtures")
FROZEN = os.path.join(os.path.dirname(os.path.abspath(__file__)), "frozen.json")


def load_manifest(name):
    with open(os.path.join(FIX, name, "manifest.json")) as f:
        return json.load(f)


def rgba(path):
    return np.asarray(Image.open(path).convert("RGBA"), dtype=np.int64)


def gray_mask(path):
    return np.asarray(Image.open(path).convert("L")) >= 128


def canvas_masks(name):
    """Per layer: (amodal, visible) boolean masks placed on the canvas."""
    m = load_manifest(name)
    w, h = m["canvas"]["width"], m["canvas"]["height"]
    out = {}
    for entry in m["layers"]:
        img = rgba(os.path.join(FIX, name, entry["amodal"]))
        ox, oy = entry["offset"]
        amodal = np.zeros((h, w), bool)
        visible = np.zeros((h, w), bool)
        lh, lw = img.shape[:2]
        for y in range(lh):
            for x in range(lw):
                cx, cy = ox + x, oy + y
                if 0 <= cx < w and 0 <= cy < h:
                    amodal[cy, cx] = img[y, x, 3] > 0
        if "visible_mask" in entry:
            vm = gray_mask(os.path.join(FIX, name, entry["visible_mask"]))
            for y in range(lh):
                for x in range(lw):
                    cx, cy = ox + x, oy + y
                    if 0 <= cx < w and 0 <= cy < h:
                        visible[cy, cx] = vm[y, x]
        out[entry["id"]] = (amodal, visible)
    return m, out


def occlusion_matrix(name):
    m, masks = canvas_masks(name)
    ids = [e["id"] for e in m["layers"]]
    mat = []
    for i in ids:
        row = []
        for j in ids:
            if i == j:
                row.append(0)
                continue
            ai, vi = masks[i]
            _, vj = masks[j]
            row.append(int(np.any(ai & ~vi & vj)))
        mat.append(row)
    pop = {i: int(masks[i][1].sum()) for i in ids}
    return {"ids": ids, "O": mat, "visible_popcount": pop}


def column_extent(mask, lowest):
    cols = {}
    for x in np.nonzero(mask.any(axis=0))[0]:
        rows = np.nonzero(mask[:, x])[0]
        cols[int(x)] = int(rows.max() if lowest else rows.min())
    return cols


def crow_gravity():
    m, masks = canvas_masks("crow")
    ground = m["ground_y"]
    crow_bottom = column_extent(masks["crow"][0], lowest=True)
    pumpkin_top = column_extent(masks["pumpkin"][0], lowest=False)
    shared = sorted(set(crow_bottom) & set(pumpkin_top))
    contact_gap = min(pumpkin_top[c] - crow_bottom[c] for c in shared)
    # pumpkin gone: nothing else lies below the crow, so it lands on the ground
    delta = min(ground - 1 - b for b in crow_bottom.values())
    post_gap = ground - (max(crow_bottom.values()) + delta)
    return {"contact_gap": contact_gap, "fall_delta": delta, "post_fall_ground_gap": post_gap,
            "shared_columns": len(shared)}


def over(dst, src, ox, oy):
    h, w = dst.shape[:2]
    lh, lw = src.shape[:2]
    for y in range(lh):
        for x in range(lw):
            cx, cy = ox + x, oy + y
            if not (0 <= cx < w and 0 <= cy < h):
                continue
            a = int(src[y, x, 3])
            if a == 0:
                continue
            d = dst[cy, cx]
            for c in range(3):
                d[c] = (int(src[y, x, c]) * a + int(d[c]) * (255 - a) + 127) // 255
            d[3] = (a * 255 + int(d[3]) * (255 - a) + 127) // 255


def composite_digest(name, back_to_front):
    m = load_manifest(name)
    canvas = rgba(os.path.join(FIX, name, m["background"])).copy()
    entries = {e["id"]: e for e in m["layers"]}
    for lid in back_to_front:
        e = entries[lid]
        over(canvas, rgba(os.path.join(FIX, name, e["amodal"])), *e["offset"])
    return hashlib.sha256(canvas.astype(np.uint8).tobytes()).hexdigest()


# ---------------------------------------------------------------- LPIPS-U

def lpips_fixture():
    rng = np.random.RandomState(7)
    i = rng.randint(0, 256, size=(32, 32, 4)).astype(np.uint8)
    i[..., 3] = 255
    edit = np.zeros((32, 32), bool)
    edit[12:20, 10:22] = True
    j = i.copy()
    j[edit, :3] = 255 - j[edit, :3]
    k = i.copy()
    noise = rng.randint(-12, 13, size=(32, 32, 3))
    k[..., :3] = np.clip(k[..., :3].astype(int) + noise, 0, 255).astype(np.uint8)
    d = os.path.join(FIX, "lpips")
    os.makedirs(d, exist_ok=True)
    Image.fromarray(i, "RGBA").save(os.path.join(d, "original.png"))
    Image.fromarray(j, "RGBA").save(os.path.join(d, "inside_only.png"))
    Image.fromarray(k, "RGBA").save(os.path.join(d, "noisy.png"))
    Image.fromarray((edit * 255).astype(np.uint8), "L").save(os.path.join(d, "edit_mask.png"))


def pyramid(img, levels=3):
    kernel = np.array([1, 4, 6, 4, 1], float) / 16.0
    cur = img[..., :3].astype(float) / 255.0
    out = [cur]
    for _ in range(levels - 1):
        b = convolve1d(cur, kernel, axis=1, mode="nearest")
        b = convolve1d(b, kernel, axis=0, mode="nearest")
        cur = b[::2, ::2]
        out.append(cur)
    return out


def keep_mask(keep, shape, scale):
    h, w = shape
    out = np.zeros((h, w), bool)
    for y in range(h):
        for x in range(w):
            block = keep[y * scale:(y + 1) * scale, x * scale:(x + 1) * scale]
            out[y, x] = block.size > 0 and 2 * block.sum() >= block.size
    return out


def lpips_levels(a, b, edit, raw=False):
    keep = ~edit
    vals = []
    for lvl, (fa, fb) in enumerate(zip(pyramid(a), pyramid(b))):
        m = keep_mask(keep, fa.shape[:2], 2 ** lvl)
        diff = (fa - fb)[m]
        s = np.sqrt((diff ** 2).sum())
        n = diff.size
        vals.append(float(s if raw else (s / np.sqrt(n) if n else 0.0)))
    return vals


def lpips_values():
    d = os.path.join(FIX, "lpips")
    i = rgba(os.path.join(d, "original.png"))
    j = rgba(os.path.join(d, "inside_only.png"))
    k = rgba(os.path.join(d, "noisy.png"))
    edit = gray_mask(os.path.join(d, "edit_mask.png"))
    out = {}
    for name, other in (("inside_only", j), ("noisy", k)):
        lv = lpips_levels(i, other, edit)
        raw = lpips_levels(i, other, edit, raw=True)
        out[name] = {"levels": lv, "total": sum(lv) / 3.0, "raw_levels": raw}
    return out


def compute():
    return {
        "two_squares": occlusion_matrix("two_squares"),
        "chain3": occlusion_matrix("chain3"),
        "crow": crow_gravity(),
        "composite_sha256": {
            "two_squares": composite_digest("two_squares", ["A", "B"]),
            "crow": composite_digest("crow", ["moon", "pumpkin", "crow"]),
        },
        "lpips": lpips_values(),
    }


def close(a, b):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(close(x, y) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= 1e-12
    return a == b


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--check", action="store_true", help="compare against frozen.json")
    p.add_argument("--regenerate-lpips", action="store_true", help="rewrite the LPIPS PNGs")
    args = p.parse_args()
    if args.regenerate_lpips or not os.path.exists(os.path.join(FIX, "lpips", "original.png")):
        lpips_fixture()
    values = compute()
    if args.check:
        with open(FROZEN) as f:
            frozen = json.load(f)
        if not close(values, frozen):
            print("oracle values drifted from frozen.json")
            print(json.dumps(values, indent=2))
            return 1
        print("oracle values match frozen.json")
        return 0
    with open(FROZEN, "w") as f:
        json.dump(values, f, indent=2)
        f.write("\n")
    print(json.dumps(values, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
