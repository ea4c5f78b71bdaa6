#!/usr/bin/env python3
"""Writes the VIS-only evaluation fixture: per-image GT and prediction files
whose pooled confusion matrix is fixed below."""
import argparse
import pathlib
import random

W, H = 1792, 1433
CELL = 110
IMAGES = 149

# rows: true occupied/empty/isolated, cols: predicted occupied/empty/isolated
MATCHED = [[299, 3, 5],
           [14, 11, 0],
           [7, 0, 5]]
MISSED = [10, 10, 5]      # GT with no prediction
SPURIOUS = [26, 1, 1]     # predictions with no GT
IGNORED_LOW_SCORE = 12    # below the 0.5 score threshold


def line(cls, x0, y0, score=None):
    cx, cy = (x0 + 40) / W, (y0 + 30) / H
    s = f"{cls} {cx:.10f} {cy:.10f} {80 / W:.10f} {60 / H:.10f}"
    return s if score is None else f"{s} {score:.10f}"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()
    rng = random.Random(7)

    events = []
    for t in range(3):
        for p in range(3):
            events += [("match", t, p)] * MATCHED[t][p]
        events += [("miss", t, None)] * MISSED[t]
        events += [("fp", None, p) for p in [t] * SPURIOUS[t]]
    events += [("low", None, rng.randrange(3)) for _ in range(IGNORED_LOW_SCORE)]
    rng.shuffle(events)

    per_image = [[] for _ in range(IMAGES)]
    for i, e in enumerate(events):
        per_image[i % IMAGES].append(e)

    cols = W // CELL
    for d in ("gt", "pred"):
        (args.out / d).mkdir(parents=True, exist_ok=True)
    for i, evs in enumerate(per_image):
        gt, pred = [], []
        for slot, (kind, t, p) in enumerate(evs):
            x0, y0 = (slot % cols) * CELL + 5, (slot // cols) * CELL + 5
            if kind in ("match", "miss"):
                gt.append(line(t, x0, y0))
            if kind == "match":
                pred.append(line(p, x0, y0, 0.55 + 0.4 * rng.random()))
            elif kind == "fp":
                pred.append(line(p, x0, y0, 0.5 + 0.45 * rng.random()))
            elif kind == "low":
                pred.append(line(p, x0, y0, 0.45 * rng.random()))
        name = f"test_{i:03d}.txt"
        (args.out / "gt" / name).write_text("".join(s + "\n" for s in gt))
        (args.out / "pred" / name).write_text("".join(s + "\n" for s in pred))


if __name__ == "__main__":
    main()
