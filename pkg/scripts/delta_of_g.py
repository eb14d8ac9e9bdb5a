"""Four-point delta of the g metric on sunflower samples of the unit disk."""
import argparse

from gromovlab.balogh_bonk import verify_gromov_inequality_g
from gromovlab.curves import sunflower_disk
from gromovlab.fixtures import get_fixture


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="50,100,200")
    ap.add_argument("--radius", type=float, default=0.95)
    args = ap.parse_args()
    disk = get_fixture("disk")
    for n in (int(s) for s in args.sizes.split(",")):
        rep = verify_gromov_inequality_g(disk, sunflower_disk(n, args.radius), budget=10 ** 8)
        print(f"n = {n:4d}  delta = {rep.delta:.4f}")


if __name__ == "__main__":
    main()
