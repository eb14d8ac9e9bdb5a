"""Rough-isometry constant between g and the collar path metric d as the
boundary ring is refined. Prints one row per ring size."""
import argparse

import numpy as np

from gromovlab.balogh_bonk import d_matrix, g_matrix, lift_to_height
from gromovlab.fixtures import get_fixture
from gromovlab.metric_core import fit_distortion


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=60)
    ap.add_argument("--rings", default="64,256,1024")
    ap.add_argument("--seed", type=int, default=6)
    args = ap.parse_args()
    disk = get_fixture("disk")
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    th = rng.uniform(0, 2 * np.pi, args.samples)
    h = np.exp(rng.uniform(np.log(0.03), np.log(np.sqrt(disk.collar_eps)), args.samples))
    X = np.array([lift_to_height(disk, [np.cos(a), np.sin(a)], b) for a, b in zip(th, h)])
    G = g_matrix(disk, X)
    print("ring  lambda  c")
    for ring in (int(r) for r in args.rings.split(",")):
        fit = fit_distortion(G, d_matrix(disk, X, ring=ring), kind="rough")
        print(f"{ring:5d}  {fit.lam:.4g}  {fit.c:.4g}")


if __name__ == "__main__":
    main()
