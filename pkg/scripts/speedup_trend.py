"""Iterations to a fixed objective level against tau, next to the beta/tau prediction.

    python3 scripts/speedup_trend.py --out results/speedup.csv
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from boostcd import RegimeSpec, SamplingLaw, SolverConfig, compute_beta, generate, solve


@dataclass
class SpeedupConfig:
    m: int = 5000
    n: int = 2000
    density: float = 0.003
    instance_seed: int = 0
    target_F: float = -0.02
    taus: tuple = (1, 2, 4, 8, 16, 32)
    seeds: tuple = (0, 1, 2)
    max_iter: int = 10**7
    out: Path = field(default_factory=lambda: Path("results/speedup.csv"))


def iterations_to_target(A, tau, seed, cfg: SpeedupConfig) -> int:
    law = SamplingLaw("nice", tau, seed, A.active_coordinates())
    tr = solve(A, SolverConfig("pcdm", law, target_F=cfg.target_F, max_iter=cfg.max_iter,
                               trace_every=max(1, 32 // tau), record_time=False))
    if tr.status != "target_reached":
        raise RuntimeError(f"tau={tau} seed={seed}: {tr.status}")
    return tr.iters[-1]


def run(cfg: SpeedupConfig) -> list[dict]:
    A = generate(RegimeSpec("mixed", cfg.m, cfg.n, cfg.density, seed=cfg.instance_seed)).A
    n_active = A.active_coordinates().size
    rows = []
    for tau in cfg.taus:
        its = [iterations_to_target(A, tau, s, cfg) for s in cfg.seeds]
        rows.append({"tau": tau, "iterations": float(np.mean(its)),
                     "beta": compute_beta(A.m, n_active, A.omega, tau)})
    base = rows[0]["iterations"]
    for r in rows:
        r["measured_ratio"] = r["iterations"] / base
        r["predicted_ratio"] = r["beta"] / r["tau"]
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=SpeedupConfig.m)
    ap.add_argument("--n", type=int, default=SpeedupConfig.n)
    ap.add_argument("--density", type=float, default=SpeedupConfig.density)
    ap.add_argument("--target-F", type=float, default=SpeedupConfig.target_F)
    ap.add_argument("--taus", type=int, nargs="+", default=list(SpeedupConfig.taus))
    ap.add_argument("--out", type=Path, default=Path("results/speedup.csv"))
    a = ap.parse_args()
    cfg = SpeedupConfig(m=a.m, n=a.n, density=a.density, target_F=a.target_F, taus=tuple(a.taus), out=a.out)
    rows = run(cfg)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"{'tau':>4} {'iters':>12} {'T/T1':>8} {'beta/tau':>9}")
    for r in rows:
        print(f"{r['tau']:>4} {r['iterations']:>12.0f} {r['measured_ratio']:>8.3f} {r['predicted_ratio']:>9.3f}")


if __name__ == "__main__":
    main()
