"""Write a seeded synthetic fracture file in the Benchmark 4 layout.

The real 64-fracture geometry is distributed separately; this stand-in only
exercises the pipeline (file loading, meshing, both solvers) at the same
domain size and material contrast.

    python3 scripts/make_synthetic_b4.py tests/data/benchmark4_fractures.csv
"""

import argparse

import numpy as np

from frackbench.geometry import Segment, point_segment_distance, segment_intersection


def synthetic_network(n=24, seed=7, min_angle_deg=25.0, min_gap=8.0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        c = rng.uniform([80.0, 80.0], [620.0, 520.0])
        L = rng.uniform(80.0, 220.0)
        th = rng.uniform(0.0, np.pi)
        d = 0.5 * L * np.array([np.cos(th), np.sin(th)])
        a, b = c - d, c + d
        if np.any(a < 20) or np.any(b < 20) or max(a[0], b[0]) > 680 or max(a[1], b[1]) > 580:
            continue
        ok = True
        for p, q in out:
            x = segment_intersection(Segment(a, b), Segment(p, q))
            if x is not None:
                u, v = (b - a) / L, (q - p) / np.hypot(*(q - p))
                ang = np.degrees(np.arccos(min(1.0, abs(float(u @ v)))))
                ends = min(x.t1, 1 - x.t1) * L, min(x.t2, 1 - x.t2) * np.hypot(*(q - p))
                if ang < min_angle_deg or min(ends) < min_gap:
                    ok = False
                    break
            else:
                gap = min(point_segment_distance([a, b], p, q).min(), point_segment_distance([p, q], a, b).min())
                if gap < min_gap:
                    ok = False
                    break
        if ok:
            out.append((a, b))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("path")
    ap.add_argument("--n", type=int, default=24)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    with open(args.path, "w") as fh:
        fh.write("# synthetic stand-in network, not the published Benchmark 4 geometry\n")
        fh.write("xA,yA,xB,yB\n")
        for a, b in synthetic_network(args.n, args.seed):
            fh.write(",".join(f"{v:.6f}" for v in (*a, *b)) + "\n")


if __name__ == "__main__":
    main()
