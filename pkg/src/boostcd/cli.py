"""boostcd command line.

Exit codes: 0 success, 2 bad flags, 3 data errors, 4 validator FAIL.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DatasetError, build_margin_matrix, file_checksum, load_dataset, write_libsvm
from .eso import EsoParams, compute_beta, overlap_coefficients, overlap_pmf, speedup_factor
from .sampling import SamplingLaw
from .solvers import SolverConfig, Trace, solve
from .svgplot import convergence_svg
from .synthgen import RegimeSpec, generate
from .validate import validate_eso, validate_expected_decrease

EXIT_OK, EXIT_FLAGS, EXIT_DATA, EXIT_FAIL = 0, 2, 3, 4
REGIME_NAMES = {"weak": "weak_learnable", "attain": "attainable", "mixed": "mixed"}
BENCH_ALGS = ("pcdm", "full", "greedy", "accel")
# flags echoed into a solve manifest and accepted back by --from-manifest
SOLVE_KEYS = ("data", "alg", "tau", "threads", "mode", "seconds", "iters", "seed", "sampling",
              "allow_collisions", "strict_labels", "n_features", "refresh_every", "trace_every",
              "target_F", "grad_tol", "no_wallclock")


class FlagError(Exception):
    pass


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _sha256(path) -> str:
    return file_checksum(path)


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="LIBSVM file")
    p.add_argument("--strict-labels", action="store_true", help="reject labels other than +1/-1")
    p.add_argument("--n-features", type=_positive_int, default=None, help="pad the feature dimension")
    p.add_argument("--no-cache", action="store_true", help="skip the binary dataset cache")


def _add_run_flags(p):
    p.add_argument("--tau", type=_positive_int, default=16)
    p.add_argument("--threads", type=_positive_int, default=None, help="default: tau")
    p.add_argument("--mode", choices=("sync", "async"), default="sync")
    p.add_argument("--seconds", type=float, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--sampling", choices=("nice", "independent"), default="nice")
    p.add_argument("--allow-collisions", action="store_true",
                   help="tau-independent: apply repeated coordinates more than once")
    p.add_argument("--refresh-every", type=_positive_int, default=None,
                   help="iterations between full residual recomputations (default 10 n / tau)")
    p.add_argument("--trace-every", type=_positive_int, default=None)
    p.add_argument("--target-F", type=float, default=None)
    p.add_argument("--grad-tol", type=float, default=None)
    p.add_argument("--no-wallclock", action="store_true",
                   help="write elapsed_s as nan so sync traces are byte-reproducible")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boostcd", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"boostcd {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="run one solver and write a trace + manifest")
    p.add_argument("--data")
    p.add_argument("--strict-labels", action="store_true")
    p.add_argument("--n-features", type=_positive_int, default=None)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--alg", choices=BENCH_ALGS, default="pcdm")
    _add_run_flags(p)
    p.add_argument("--trace", default=None, help="trace CSV path (manifest goes next to it)")
    p.add_argument("--from-manifest", default=None, help="re-run the configuration stored in a manifest")

    p = sub.add_parser("beta", help="ESO parameters for given (m, n, omega, tau)")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--omega", type=_positive_int, required=True)
    p.add_argument("--tau", type=_positive_int, required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("gen", help="write a synthetic instance with a known regime")
    p.add_argument("--regime", choices=tuple(REGIME_NAMES), required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", help="Monte-Carlo ESO / expected-decrease checks")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--eso", action="store_true")
    g.add_argument("--decrease", action="store_true")
    _add_data_flags(p)
    p.add_argument("--tau", type=_positive_int, default=4)
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--pairs", type=_positive_int, default=5, help="random (x, h) pairs")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--beta-scale", type=float, default=1.0, help="multiply beta (falsification probes)")
    p.add_argument("--points", default=None,
                   help='JSON list of {"x": [...], "h": [...]} pairs to check instead of random ones')
    p.add_argument("--out", default=None, help="also write the JSON report here")

    p = sub.add_parser("bench", help="run all four algorithms under one time budget")
    _add_data_flags(p)
    _add_run_flags(p)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--plot", action="store_true", help="write convergence.svg")
    p.set_defaults(seconds=20.0)
    return ap


# --------------------------------------------------------------------------


def _load(args):
    ds = load_dataset(args.data, n_features=args.n_features, strict_labels=args.strict_labels,
                      use_cache=not getattr(args, "no_cache", False))
    return build_margin_matrix(ds)


def _config(args, alg, A):
    threads = args.threads if args.threads is not None else args.tau
    law = None
    if alg in ("pcdm",):
        if args.mode == "async":
            law = SamplingLaw("independent", threads, args.seed, A.active_coordinates(), args.allow_collisions)
        else:
            law = SamplingLaw(args.sampling, args.tau, args.seed, A.active_coordinates(), args.allow_collisions)
    if args.seconds is None and args.iters is None and args.target_F is None and args.grad_tol is None:
        raise FlagError("give --seconds, --iters, --target-F or --grad-tol")
    return SolverConfig(algorithm=alg, law=law, threads=threads, mode=args.mode if alg == "pcdm" else "sync",
                        max_iter=args.iters, seconds=args.seconds, target_F=args.target_F,
                        grad_tol=args.grad_tol, trace_every=args.trace_every,
                        refresh_every=args.refresh_every, record_time=not args.no_wallclock)


def _manifest(args, A, eso, trace: Trace, trace_path: Path, command: str, alg: str) -> dict:
    L = eso.L if eso is not None else None
    finite = L[np.isfinite(L)] if L is not None else None
    cfg = {k: getattr(args, k, None) for k in SOLVE_KEYS}
    cfg["alg"] = alg
    cfg["data"] = str(Path(args.data).resolve())
    man = {
        "software": {"name": "boostcd", "version": __version__},
        "command": command,
        "config": cfg,
        "dataset": {"path": cfg["data"], "sha256": _sha256(args.data), "m": A.m, "n": A.n,
                    "nnz": A.nnz, "omega": A.omega, "active_columns": int(A.active_coordinates().size)},
        "result": {"status": trace.status, "iterations": trace.iters[-1], "final_F": trace.F[-1],
                   "final_f": trace.f[-1], "rejected_steps": trace.state.rejected if trace.state else None},
        "files": {trace_path.name: _sha256(trace_path)},
    }
    if eso is not None:
        man["eso"] = {"tau": eso.tau, "beta": eso.beta, "speedup": eso.speedup,
                      "L_min": float(finite.min()), "L_max": float(finite.max()), "L_mean": float(finite.mean())}
    for k in ("updates", "collisions"):
        if k in trace.meta:
            man["result"][k] = trace.meta[k]
    return man


def manifest_path(trace_path: Path) -> Path:
    return trace_path.with_name(trace_path.stem + ".manifest.json")


def _run_one(args, A, alg, trace_path: Path, command: str):
    cfg = _config(args, alg, A)
    eso = None
    if cfg.algorithm == "pcdm":
        tau = cfg.threads if cfg.mode == "async" else cfg.law.tau
        eso = EsoParams.for_matrix(A, tau)
    tr = solve(A, cfg, eso=eso)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    tr.to_csv(trace_path)
    man = _manifest(args, A, eso, tr, trace_path, command, alg)
    with open(manifest_path(trace_path), "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return tr, man


def cmd_solve(args) -> int:
    if args.from_manifest:
        with open(args.from_manifest) as fh:
            stored = json.load(fh)["config"]
        for k in SOLVE_KEYS:
            setattr(args, k, stored.get(k))
    if not args.data:
        raise FlagError("--data is required")
    A = _load(args)
    trace_path = Path(args.trace or f"trace_{args.alg}.csv")
    tr, man = _run_one(args, A, args.alg, trace_path, "solve")
    print(json.dumps({"trace": str(trace_path), **man["result"]}))
    return EXIT_OK


def cmd_beta(args) -> int:
    if args.omega > args.n or args.tau > args.n:
        raise FlagError("need omega <= n and tau <= n")
    p = overlap_pmf(args.n, args.omega, args.tau)
    c = overlap_coefficients(args.n, args.omega, args.tau)
    beta = compute_beta(args.m, args.n, args.omega, args.tau)
    out = {"m": args.m, "n": args.n, "omega": args.omega, "tau": args.tau,
           "p": p.tolist(), "c": c.tolist(), "beta": beta, "speedup": speedup_factor(args.tau, beta)}
    if args.json:
        print(json.dumps(out))
    else:
        for l, (pl, cl) in enumerate(zip(p, c)):
            print(f"l={l:<4d} p_l={pl:.6e}  c_l={cl:.6g}")
        print(f"beta = {beta:.6g}")
        print(f"tau/beta = {out['speedup']:.6g}")
    return EXIT_OK


def cmd_gen(args) -> int:
    if not 0 < args.density <= 1:
        raise FlagError("--density must lie in (0, 1]")
    inst = generate(RegimeSpec(REGIME_NAMES[args.regime], args.m, args.n, args.density, args.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_libsvm(out, inst.A)
    side = inst.sidecar()
    side["seed"] = args.seed
    side["density"] = args.density
    with open(out.with_name(out.name + ".json"), "w") as fh:
        json.dump(side, fh, indent=2)
    print(json.dumps({"out": str(out), "m": inst.A.m, "n": inst.A.n, "omega": inst.A.omega, "f_bar": inst.f_bar}))
    return EXIT_OK


def _validation_points(args, A, eso):
    if args.points:
        with open(args.points) as fh:
            pts = json.load(fh)
        out = []
        for pt in pts:
            x = np.asarray(pt["x"], dtype=np.float64)
            h = np.asarray(pt.get("h", np.zeros(A.n)), dtype=np.float64)
            if x.shape != (A.n,) or h.shape != (A.n,):
                raise FlagError(f"--points entries must have length {A.n}")
            out.append((x, h))
        return out
    rng = np.random.default_rng(args.seed)
    Ls = np.where(np.isfinite(eso.L), eso.L, 1.0)
    return [(rng.standard_normal(A.n) * 0.5, rng.standard_normal(A.n) / np.sqrt(Ls)) for _ in range(args.pairs)]


def cmd_validate(args) -> int:
    A = _load(args)
    dom = A.active_coordinates()
    if args.tau > dom.size:
        raise FlagError(f"--tau exceeds the {dom.size} active columns")
    eso = EsoParams.for_matrix(A, args.tau)
    eso = eso.with_beta(eso.beta * args.beta_scale) if args.beta_scale != 1.0 else eso
    reports = []
    for k, (x, h) in enumerate(_validation_points(args, A, eso)):
        if args.eso:
            rep = validate_eso(A, eso, x, h, trials=args.trials, seed=args.seed + k)
        else:
            rep = validate_expected_decrease(A, eso, x, trials=args.trials, seed=args.seed + k)
        reports.append(rep.to_dict())
    ok = all(r["passed"] for r in reports)
    out = {"check": "eso" if args.eso else "decrease", "verdict": "PASS" if ok else "FAIL",
           "beta": eso.beta, "tau": args.tau, "reports": reports}
    text = json.dumps(out, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    A = _load(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces, summary = {}, []
    for alg in BENCH_ALGS:
        tr, man = _run_one(args, A, alg, out_dir / f"{alg}.csv", "bench")
        traces[alg] = tr
        summary.append({"algorithm": alg, "iterations": tr.iters[-1], "final_F": tr.F[-1],
                        "final_f": tr.f[-1], "elapsed_s": tr.elapsed[-1], "status": tr.status})
    summary.sort(key=lambda r: r["final_F"])
    files = {f"{a}.csv": _sha256(out_dir / f"{a}.csv") for a in BENCH_ALGS}
    if args.plot:
        convergence_svg(traces, out_dir / "convergence.svg", x="iter" if args.no_wallclock else "time")
        files["convergence.svg"] = _sha256(out_dir / "convergence.svg")
    with open(out_dir / "summary.csv", "w") as fh:
        fh.write("algorithm,iterations,final_F,final_f,elapsed_s,status\n")
        for r in summary:
            fh.write(f"{r['algorithm']},{r['iterations']},{r['final_F']!r},{r['final_f']!r},{r['elapsed_s']!r},{r['status']}\n")
    files["summary.csv"] = _sha256(out_dir / "summary.csv")
    with open(out_dir / "summary.json", "w") as fh:
        json.dump({"dataset": str(Path(args.data).resolve()), "seconds": args.seconds, "tau": args.tau,
                   "ranking": summary, "files": files}, fh, indent=2)
    for r in summary:
        print(f"{r['algorithm']:>7s}  F={r['final_F']:.10g}  iters={r['iterations']}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "beta": cmd_beta, "gen": cmd_gen, "validate": cmd_validate, "bench": cmd_bench}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except FlagError as e:
        print(f"boostcd: error: {e}", file=sys.stderr)
        return EXIT_FLAGS
    except DatasetError as e:
        print(f"boostcd: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"boostcd: error: {e}", file=sys.stderr)
        return EXIT_FLAGS


if __name__ == "__main__":
    sys.exit(main())
