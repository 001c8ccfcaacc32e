#!/usr/bin/env python3
"""Regenerates the fixture maps under fixtures/maps/.

Each fixture is a hand-placed skeleton (solution path, dead ends) padded
with seeded filler holds that stay out of reach of the skeleton, the start
and the goals. Radii follow the estimate recorded in each map's notes.
"""
import json
import math
import pathlib
import random

WIDTH = 1000.0
REACH = 160.0
FOVEA = 150.0
GOAL_R = 40.0
NOTES = ("fixture; reach radius ~1/6 of map width estimated from the sample "
         "map figure, fovea radius chosen slightly smaller than reach")

OUT = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "maps"


def pad(skeleton, start, goals, n_total, seed, min_gap=1.1 * REACH):
    rng = random.Random(seed)
    holds = list(skeleton)
    anchors = list(skeleton) + [start] + [g for g, _ in goals]
    filler = []
    tries = 0
    while len(holds) + len(filler) < n_total:
        tries += 1
        if tries > 200000:
            raise RuntimeError("cannot place filler")
        p = (round(rng.uniform(30, WIDTH - 30), 2), round(rng.uniform(30, WIDTH - 30), 2))
        if any(math.dist(p, a) <= min_gap for a in anchors):
            continue
        if any(math.dist(p, f) <= 0.2 * REACH for f in filler):
            continue
        filler.append(p)
    return holds + filler


def emit(map_id, start, goals, holds, notes=NOTES):
    doc = {
        "format": 1,
        "id": map_id,
        "bounds": {"width": WIDTH, "height": WIDTH},
        "start": {"x": start[0], "y": start[1]},
        "reach_radius": REACH,
        "fovea_radius": FOVEA,
        "goals": [{"x": g[0], "y": g[1], "radius": r} for g, r in goals],
        "holds": [{"id": i, "x": p[0], "y": p[1]} for i, p in enumerate(holds)],
        "notes": notes,
    }
    (OUT / f"{map_id}.json").write_text(json.dumps(doc, indent=2) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    # Goal hold within reach and inside the initial spotlight.
    start = (500.0, 500.0)
    goals = [((600.0, 500.0), GOAL_R)]
    emit("trivial", start, goals, pad([(600.0, 500.0)], start, goals, 10, seed=1))

    # Eight holds in a diagonal chain, spacing 0.8 r.
    start = (130.0, 130.0)
    step = 0.8 * REACH / math.sqrt(2.0)
    chain = [(round(130.0 + k * step, 6), round(130.0 + k * step, 6)) for k in range(1, 9)]
    emit("corridor-8", start, [(chain[-1], GOAL_R)], chain)

    start = (500.0, 500.0)

    # Short, nearly straight path with a parallel alternative.
    skeleton = [(620.0, 560.0), (740.0, 620.0), (860.0, 680.0), (620.0, 440.0), (740.0, 500.0)]
    goals = [((860.0, 680.0), GOAL_R)]
    emit("open-field", start, goals, pad(skeleton, start, goals, 50, seed=11))

    # Two reachable goals at different depths.
    skeleton = [(380.0, 440.0), (260.0, 380.0), (150.0, 310.0),
                (600.0, 590.0), (690.0, 690.0), (780.0, 790.0), (860.0, 880.0)]
    goals = [((150.0, 310.0), GOAL_R), ((860.0, 880.0), GOAL_R)]
    emit("two-goals", start, goals, pad(skeleton, start, goals, 50, seed=12))

    # Winding path whose first leg runs across the goal direction.
    skeleton = [(620.0, 420.0), (740.0, 350.0), (860.0, 420.0), (880.0, 550.0),
                (840.0, 680.0), (760.0, 790.0)]
    goals = [((760.0, 790.0), GOAL_R)]
    emit("zigzag", start, goals, pad(skeleton, start, goals, 50, seed=13))

    # Goal straight ahead, reachable only around an empty region.
    skeleton = [(620.0, 560.0), (720.0, 670.0), (740.0, 800.0), (650.0, 900.0), (530.0, 880.0)]
    goals = [((530.0, 880.0), GOAL_R)]
    emit("detour", start, goals, pad(skeleton, start, goals, 50, seed=14))

    # Fork one hop from the start: the branch pointing at the goal ends one
    # gap short, the connected route leaves sideways and curves back.
    start = (500.0, 300.0)
    fork = (500.0, 440.0)
    direct = [(500.0, 580.0)]
    detour = [(645.0, 479.0), (670.0, 635.0), (600.0, 765.0), (510.0, 810.0)]
    goals = [((510.0, 810.0), GOAL_R)]
    emit("fork-trap", start, goals, pad([fork] + direct + detour, start, goals, 50, seed=15))


if __name__ == "__main__":
    main()
