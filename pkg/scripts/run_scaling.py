"""Iteration counts and measured contraction for the three lattice growth cases.

    python scripts/run_scaling.py --out results/scaling
"""
from __future__ import annotations

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ballschwarz import cli
from ballschwarz import diagnostics as dg


@dataclass
class ScalingConfig:
    cases: dict = field(default_factory=lambda: {1: [2, 4, 8, 16], 2: [2, 4, 8, 16], 3: [2, 3, 4, 5]})
    methods: tuple = ("gmres-ms", "gmres-ms+coarse", "pcg-as", "ms+coarse")
    h: float = 0.15
    tol: float = 1e-8
    radius: float = 0.9
    with_indicators: bool = False
    seed: int = 0


def run(cfg: ScalingConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for case, ns in cfg.cases.items():
        for method in cfg.methods:
            if case != 3 and method.endswith("+coarse"):
                continue  # the column and slab lattices have almost no interior balls
            rows = dg.scaling_sweep(case, ns, method, cfg.tol, cfg.h, cfg.radius,
                                    with_indicators=cfg.with_indicators, seed=cfg.seed)
            path = out / f"case{case}_{method.replace('+', '_')}.csv"
            cli.write_csv(rows, dg.SWEEP_COLUMNS, path)
            its = [r["iterations"] for r in rows]
            msg = f"case {case} {method:16s} iterations {its} max/min {max(its) / min(its):.2f}"
            if case == 3:
                msg += f" slope {dg.loglog_slope([r['M'] for r in rows], its):.3f}"
            print(msg, flush=True)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results/scaling"))
    p.add_argument("--h", type=float, default=ScalingConfig.h)
    p.add_argument("--indicators", action="store_true", help="also compute d_F, N_0 and the s0 bound")
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)
    run(ScalingConfig(h=args.h, with_indicators=args.indicators), args.out)


if __name__ == "__main__":
    main()
