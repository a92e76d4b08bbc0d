"""Gradient energy of theta_1 on the two-ball lens under grid refinement.

The energy keeps growing as h shrinks, the numerical signature of theta_1
lying outside H^1.

    python scripts/run_theta_energy.py
"""
from __future__ import annotations

import argparse

from ballschwarz import chain
from ballschwarz.pou import theta_energy_on_grid


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--levels", type=int, default=5, help="number of grid spacings, halving from 0.2")
    args = p.parse_args()
    union = chain(2, 2.0, 2.0)
    prev = None
    print("h,energy,increment")
    for k in range(args.levels):
        h = 0.2 / 2 ** k
        e = theta_energy_on_grid(union, 0, h)
        print(f"{h:g},{e:.6f},{'' if prev is None else f'{e - prev:.6f}'}", flush=True)
        prev = e


if __name__ == "__main__":
    main()
