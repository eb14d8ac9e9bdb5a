"""Carnot-Caratheodory distances on the unit sphere in C^2: penalty solver
against the dynamic-programming reference."""
import argparse

import numpy as np

from gromovlab.carnot import CCOptions, cc_distance
from gromovlab.fixtures import get_fixture
from gromovlab.oracles import dp_pair_distances


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()
    sphere = get_fixture("ball2")
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    A, B = rng.normal(size=(2, args.pairs, 4))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    B /= np.linalg.norm(B, axis=1, keepdims=True)
    dp = dp_pair_distances(A, B)
    opts = CCOptions()
    print("pair  solver  dp  rel_err")
    for i in range(args.pairs):
        v = cc_distance(sphere, A[i], B[i], opts).value
        print(f"{i:4d}  {v:.5f}  {dp[i]:.5f}  {abs(v / dp[i] - 1):.2e}")


if __name__ == "__main__":
    main()
