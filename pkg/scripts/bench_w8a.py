"""Four-way timed comparison (pcdm, full, greedy, accel) on w8a.

Looks for the file in $BOOSTCD_W8A, then data/w8a. With --surrogate and no
w8a available, benchmarks a synthetic instance of the same shape instead:
49749 x 300 binary features, a skewed column popularity, about 11.7
nonzeros per row and ~3% positive labels from a noisy planted linear rule.
Surrogate numbers are indicative only; they are not w8a results.

    python3 scripts/bench_w8a.py --seconds 20 --tau 16 --out-dir results/w8a
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from boostcd import write_libsvm
from boostcd.cli import main as cli_main


@dataclass
class SurrogateShape:
    m: int = 49749
    n: int = 300
    mean_row_nnz: float = 11.65
    positive_rate: float = 0.03
    seed: int = 0


def find_w8a() -> Path | None:
    for cand in (os.environ.get("BOOSTCD_W8A"), "data/w8a", "data/w8a.txt"):
        if cand and Path(cand).is_file():
            return Path(cand)
    return None


def write_surrogate(path: Path, shape: SurrogateShape) -> None:
    rng = np.random.default_rng(shape.seed)
    pop = rng.pareto(1.2, shape.n) + 0.05
    pop *= shape.mean_row_nnz / pop.sum()
    pop = np.minimum(pop, 0.9)
    M = sp.csr_matrix((rng.random((shape.m, shape.n)) < pop).astype(np.float64))
    w = rng.standard_normal(shape.n)
    score = M @ w + 0.5 * rng.standard_normal(shape.m)
    y = np.where(score >= np.quantile(score, 1 - shape.positive_rate), 1.0, -1.0)
    write_libsvm(path, M, y)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=20.0)
    ap.add_argument("--tau", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", type=Path, default=Path("results/w8a"))
    ap.add_argument("--surrogate", action="store_true", help="fall back to a synthetic w8a-shaped instance")
    a = ap.parse_args()
    data = find_w8a()
    if data is None:
        if not a.surrogate:
            sys.exit("w8a not found: set BOOSTCD_W8A or place it at data/w8a (or pass --surrogate)")
        a.out_dir.mkdir(parents=True, exist_ok=True)
        data = a.out_dir / "w8a_surrogate.svm"
        write_surrogate(data, SurrogateShape(seed=a.seed))
        print(f"w8a not found; benchmarking synthetic surrogate {data}")
    sys.exit(cli_main(["bench", "--data", str(data), "--tau", str(a.tau), "--seconds", str(a.seconds),
                       "--seed", str(a.seed), "--out-dir", str(a.out_dir), "--plot"]))


if __name__ == "__main__":
    main()
