"""Critical points and slab component counts for the built-in Morse fixtures."""
import argparse
from collections import Counter

from gromovlab.fixtures import get_fixture
from gromovlab.morse import boundary_connectedness, find_critical_points


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fixtures", default="ball2,indexed_psh,two_shell")
    ap.add_argument("--grid-res", type=int, default=24)
    args = ap.parse_args()
    for name in args.fixtures.split(","):
        dom = get_fixture(name)
        cps = find_critical_points(dom)
        v = boundary_connectedness(dom, args.grid_res, cps=cps)
        idx = dict(sorted(Counter(cp.index for cp in cps).items()))
        print(f"{name}: index counts {idx}, components {v.components}, connected {v.connected}, refused {v.refused}")


if __name__ == "__main__":
    main()
