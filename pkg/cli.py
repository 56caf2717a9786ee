"""Command-line entry point for the MANOJAVAM simulator.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""
import argparse
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pydantic

from config import APP_NAME, APP_VERSION, settings
from models.cache_models import CacheMode
from models.perf_models import HARDWARE_PRESETS, WorkloadDims
from models.run_models import RunConfig
from services.cache_service import CacheHierarchy
from services.engine_service import MMEngine, plan_passes
from services.pca_service import convergence_study, run_configured
from services.perf_service import bottleneck_sweep, dse_sweep, estimate_cycles
from utils.csv_io import read_matrix_csv, write_matrix_csv, write_rows
from utils.datasets import BENCHMARK_DATASETS, GENERATORS, dataset_dims, digits_matrix, generate
from utils.errors import InputValidationError, NumericalFailure
from utils.matrix import Matrix, grid_dims
from utils.oracle import oracle_matmul

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NUMERICAL_FAILURE = 2

PERF_FIELDS = ["phase", "cycles_load", "cycles_compute", "cycles_total", "wall_time_s", "energy_j"]
TRACE_FIELDS = ["pass_id", "row_block", "column_blocks", "cycles", "lhs_hits", "lhs_misses", "rhs_hits", "rhs_misses"]
CACHE_FIELDS = ["cache_id", "mode", "hits", "misses", "allocations", "writebacks", "measured_p", "eat"]
CONVERGENCE_FIELDS = ["dataset", "sweep", "e_off", "e_off_relative", "max_pivot_magnitude", "rotations_so_far"]
DSE_FIELDS = ["t", "s", "phase", "mode", "cycles_load", "cycles_compute", "cycles_total", "wall_time_s", "energy_j"]
BOTTLENECK_FIELDS = ["regime", "records", "features", "matmul_cycles", "eigen_cycles", "matmul_share", "eigen_share"]

# CLI flag -> RunConfig field
RUN_FLAGS = {
    "tile_size": "t",
    "parallelism": "s",
    "path": "path",
    "q_format": "q_format",
    "cordic_iters": "cordic_iterations",
    "sweeps": "sweep_budget",
    "rotations": "rotation_budget",
    "guard_bits": "guard_bits",
    "pivot": "pivot_strategy",
    "epsilon": "epsilon",
    "sparse": "sparse_rotations",
    "saturation_limit": "saturation_limit",
    "lhs_cache_rows": "lhs_cache_rows",
    "rhs_cache_rows": "rhs_cache_rows",
    "dram_penalty": "dram_penalty",
    "clock_mhz": "clock_mhz",
    "power_w": "peak_power_w",
    "select": "selection",
    "preset": "preset",
    "costing": "costing",
    "hit_rate": "hit_rate_assumed",
    "threads": "threads",
    "seed": "seed",
}


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _shape(text: str):
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}")
    return rows, cols


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--tile-size", type=int, help="systolic array size T")
    g.add_argument("--parallelism", type=int, help="number of arrays S")
    g.add_argument("--path", choices=["float", "fixed"], help="numeric path")
    g.add_argument("--q-format", help="fixed-point format I.F")
    g.add_argument("--cordic-iters", type=int)
    g.add_argument("--sweeps", type=int, help="Jacobi sweep budget")
    g.add_argument("--rotations", type=int, help="cap on the total number of Jacobi rotations")
    g.add_argument("--guard-bits", type=int, help="extra fraction bits of the fixed-point rotation datapath")
    g.add_argument("--pivot", choices=["max", "cyclic"])
    g.add_argument("--epsilon", type=float, help="early-exit threshold on E_off (0 = budget only)")
    g.add_argument("--sparse", action="store_true", default=None, help="sparse Givens fast path")
    g.add_argument("--saturation-limit", type=int, help="saturation events tolerated per sweep")
    g.add_argument("--lhs-cache-rows", type=int)
    g.add_argument("--rhs-cache-rows", type=int)
    g.add_argument("--dram-penalty", type=float)
    g.add_argument("--clock-mhz", type=float)
    g.add_argument("--power-w", type=float, help="measured peak power for energy figures")
    g.add_argument("--preset", choices=sorted(HARDWARE_PRESETS))
    g.add_argument("--costing", choices=["sequential", "parallel"])
    g.add_argument("--hit-rate", type=float, help="assumed hit rate of the analytical model")
    g.add_argument("--select", help="evcr:t, cvcr:t or k:n")
    g.add_argument("--standardize", choices=["on", "off"])
    g.add_argument("--threads", type=int, help="worker threads per pass")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", default=None, help="output directory")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manojavam", description=f"{APP_NAME}: PCA accelerator simulator")
    parser.add_argument("--log-level", default=settings.log_level)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    p = sub.add_parser("pca", parents=[common], help="end-to-end PCA on a CSV")
    p.add_argument("input", help="data matrix CSV (records x features)")
    p.add_argument("--verify", action="store_true", help="compare against the double-precision reference")

    p = sub.add_parser("convergence", parents=[common], help="per-sweep E_off traces")
    p.add_argument("inputs", nargs="*", help="data matrix CSVs")
    p.add_argument("--digits", action="store_true", help="include the 8x8 digits dataset (needs scikit-learn)")
    p.add_argument("--symmetric", action="store_true", help="inputs are the matrices to diagonalize")

    p = sub.add_parser("dse", parents=[common], help="T x S design-space sweep")
    p.add_argument("--input", help="data matrix CSV")
    p.add_argument("--dataset", choices=sorted(BENCHMARK_DATASETS))
    p.add_argument("--records", type=int)
    p.add_argument("--features", type=int)
    p.add_argument("--t-values", type=_int_list, default=[2, 4, 8])
    p.add_argument("--s-values", type=_int_list, default=[1, 2, 4, 8])
    p.add_argument("--estimate-sweeps", type=int, default=15)

    p = sub.add_parser("matmul", parents=[common], help="one product on the engine")
    p.add_argument("a", nargs="?", help="left operand CSV")
    p.add_argument("b", nargs="?", help="right operand CSV")
    p.add_argument("--plan-only", action="store_true", help="emit the pass trace without executing")
    p.add_argument("--lhs-shape", type=_shape, help="RxC, plan-only without CSVs")
    p.add_argument("--rhs-shape", type=_shape, help="RxC, plan-only without CSVs")
    p.add_argument("--verify", action="store_true")

    p = sub.add_parser("estimate", parents=[common], help="analytical PerfReport")
    p.add_argument("--dataset", choices=sorted(BENCHMARK_DATASETS))
    p.add_argument("--records", type=int)
    p.add_argument("--features", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--estimate-sweeps", type=int, default=15)

    p = sub.add_parser("bottleneck", parents=[common], help="matmul vs eigendecomposition shares")
    p.add_argument("--estimate-sweeps", type=int, default=15)

    p = sub.add_parser("generate", help="write a synthetic data matrix")
    p.add_argument("kind", choices=list(GENERATORS) + ["digits"])
    p.add_argument("--records", type=int, default=200)
    p.add_argument("--features", type=int, default=8)
    p.add_argument("--factors", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8000)
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Explicit flags override settings; the preset fills what is left."""
    values = {}
    for flag, field in RUN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[field] = value
    standardize = getattr(args, "standardize", None)
    if standardize is not None:
        values["standardize"] = standardize == "on"
    return RunConfig(**values).with_preset()


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or settings.output_dir)


def _manifest(command: str, cfg: Optional[RunConfig], extra: Dict[str, object]) -> Dict[str, object]:
    return {
        "command": command,
        "config": json.loads(cfg.json()) if cfg is not None else None,
        "versions": {
            "manojavam": APP_VERSION,
            "numpy": np.__version__,
            "pydantic": pydantic.VERSION,
            "python": platform.python_version(),
        },
        **extra,
    }


def _write_manifest(out: Path, manifest: Dict[str, object]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run_manifest.json", "w", newline="\n", encoding="utf-8") as f:
        f.write(json.dumps(manifest, indent=2, sort_keys=True))
        f.write("\n")


def cmd_pca(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    x = read_matrix_csv(args.input)
    result = run_configured(x, cfg, verify=args.verify)

    out = _out_dir(args)
    sel = result.selection
    write_rows(out / "eigenvalues.csv",
               [{"index": i + 1, "eigenvalue": float(v)} for i, v in enumerate(result.jacobi.eigenvalues)],
               ["index", "eigenvalue"])
    write_rows(out / "evcr_cvcr.csv",
               [{"index": i + 1, "eigenvalue": float(sel.eigenvalues[i]), "evcr": float(sel.evcr[i]), "cvcr": float(sel.cvcr[i])}
                for i in range(len(sel.evcr))],
               ["index", "eigenvalue", "evcr", "cvcr"])
    write_matrix_csv(out / "projection.csv", result.projected.to_real(), header=[f"pc{i + 1}" for i in range(sel.k)])
    write_rows(out / "convergence.csv",
               [{"dataset": Path(args.input).name, **row.dict()} for row in result.jacobi.convergence],
               CONVERGENCE_FIELDS)
    write_rows(out / "cache_stats.csv", result.cache_stats, CACHE_FIELDS)
    write_rows(out / "perf.csv", result.perf.rows(), PERF_FIELDS)
    write_rows(out / "pass_trace.csv", [t.as_row() for t in result.pass_trace], TRACE_FIELDS)
    _write_manifest(out, _manifest("pca", cfg, {
        "input": str(args.input),
        "shape": list(x.shape),
        "k": sel.k,
        "sweeps_executed": result.jacobi.sweeps_executed,
        "rotations_executed": result.jacobi.rotations_executed,
        "saturation_events": result.jacobi.saturation_events,
        "batches": result.perf.batches,
        "passes": result.perf.passes,
        "oracle_projector_distance": result.oracle_projector_distance,
    }))
    logger.info(f"PCA done: k={sel.k}, {result.perf.total_cycles:.6g} cycles, outputs in {out}")
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    datasets = [(Path(p).name, read_matrix_csv(p)) for p in args.inputs]
    if args.digits:
        datasets.append(("digits-8x8", digits_matrix()))
    if not datasets:
        raise InputValidationError("no inputs: pass CSV files or --digits")

    rows = []
    summary = {}
    for name, x in datasets:
        logger.info(f"Convergence run on {name} {x.shape}")
        result = convergence_study(x, cfg, symmetric=args.symmetric and name != "digits-8x8")
        rows.extend({"dataset": name, **row.dict()} for row in result.convergence)
        summary[name] = {"sweeps_executed": result.sweeps_executed, "final_e_off_relative": result.e_off_relative[-1]}

    out = _out_dir(args)
    write_rows(out / "convergence.csv", rows, CONVERGENCE_FIELDS)
    _write_manifest(out, _manifest("convergence", cfg, {"datasets": summary}))
    return EXIT_OK


def _dims_from_args(args: argparse.Namespace):
    if getattr(args, "dataset", None):
        dims = dataset_dims(args.dataset)
        return dims.records, dims.features
    if args.records is None or args.features is None:
        raise InputValidationError("give --dataset or both --records and --features")
    return args.records, args.features


def cmd_dse(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    data = None
    if args.input:
        data = read_matrix_csv(args.input)
        records, features = data.shape
    else:
        records, features = _dims_from_args(args)
    rows, verdicts = dse_sweep(
        records, features, args.t_values, args.s_values, cfg.perf_model(),
        data=data, sweeps=args.estimate_sweeps, seed=cfg.seed, threads=cfg.threads,
    )
    out = _out_dir(args)
    write_rows(out / "dse.csv", [r.dict() for r in rows], DSE_FIELDS)
    _write_manifest(out, _manifest("dse", cfg, {
        "records": records,
        "features": features,
        "t_values": args.t_values,
        "s_values": args.s_values,
        "verdicts": verdicts,
    }))
    return EXIT_OK


def _plan_rows(plan) -> List[dict]:
    return [
        {"pass_id": p.pass_id, "row_block": p.row_block, "column_blocks": " ".join(str(c) for c in p.column_blocks)}
        for p in plan.passes
    ]


def cmd_matmul(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    engine_cfg = cfg.engine_config()
    out = _out_dir(args)

    if args.plan_only:
        if args.a and args.b:
            lhs_shape, rhs_shape = read_matrix_csv(args.a).shape, read_matrix_csv(args.b).shape
        elif args.lhs_shape and args.rhs_shape:
            lhs_shape, rhs_shape = args.lhs_shape, args.rhs_shape
        else:
            raise InputValidationError("--plan-only needs two CSVs or --lhs-shape and --rhs-shape")
        if lhs_shape[1] != rhs_shape[0]:
            raise InputValidationError(f"dimension mismatch: {lhs_shape} x {rhs_shape}")
        plan = plan_passes(grid_dims(*lhs_shape, engine_cfg.t), grid_dims(*rhs_shape, engine_cfg.t), engine_cfg)
        write_rows(out / "pass_trace.csv", _plan_rows(plan), TRACE_FIELDS)
        summary = {
            "row_blocks": plan.row_blocks,
            "column_blocks": plan.column_blocks,
            "tiles_per_block": plan.tiles_per_block,
            "passes": plan.pass_count,
        }
        _write_manifest(out, _manifest("matmul", cfg, {"plan_only": True, "plan": summary}))
        logger.info(f"Plan: {summary}")
        return EXIT_OK

    if not (args.a and args.b):
        raise InputValidationError("matmul needs two operand CSVs")
    a, b = read_matrix_csv(args.a), read_matrix_csv(args.b)
    if a.shape[1] != b.shape[0]:
        raise InputValidationError(f"dimension mismatch: {a.shape} x {b.shape}")
    fmt = cfg.qformat
    lhs_cache, rhs_cache = cfg.cache_configs()
    engine = MMEngine(engine_cfg, CacheHierarchy(engine_cfg.s, lhs_cache, rhs_cache),
                      qformat=fmt, threads=cfg.threads, costing=cfg.costing)
    result = engine.run_matmul(Matrix.from_real(a, fmt, engine.counter), Matrix.from_real(b, fmt, engine.counter),
                               mode=CacheMode.COVARIANCE)
    product = result.product.to_real()

    extra = {
        "plan_only": False,
        "plan": {
            "row_blocks": result.plan.row_blocks,
            "column_blocks": result.plan.column_blocks,
            "tiles_per_block": result.plan.tiles_per_block,
            "passes": result.plan.pass_count,
        },
        "cycles": result.cycles,
        "saturation_events": result.saturation_events,
    }
    if args.verify:
        reference = oracle_matmul(a, b)
        extra["oracle_max_abs_error"] = float(np.max(np.abs(product - reference))) if product.size else 0.0
        logger.info(f"Oracle max abs error: {extra['oracle_max_abs_error']:.3e}")

    write_matrix_csv(out / "product.csv", product)
    write_rows(out / "pass_trace.csv", [t.as_row() for t in result.trace], TRACE_FIELDS)
    write_rows(out / "cache_stats.csv", result.cache_stats, CACHE_FIELDS)
    _write_manifest(out, _manifest("matmul", cfg, extra))
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    records, features = _dims_from_args(args)
    dims = WorkloadDims(records=records, features=features, k=args.k, sweeps=args.estimate_sweeps)
    report = estimate_cycles(dims, cfg.engine_config(), cfg.perf_model())
    out = _out_dir(args)
    write_rows(out / "perf.csv", report.rows(), PERF_FIELDS)
    _write_manifest(out, _manifest("estimate", cfg, {
        "dims": dims.dict(),
        "batches": report.batches,
        "passes": report.passes,
        "total_cycles": report.total_cycles,
        "wall_time_s": report.wall_time_s,
        "energy_j": report.energy_j,
    }))
    logger.info(f"Estimate: {report.total_cycles:.6g} cycles, {report.wall_time_s:.6g} s, {report.batches} batches")
    return EXIT_OK


def cmd_bottleneck(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    rows = bottleneck_sweep(cfg.engine_config(), cfg.perf_model(), sweeps=args.estimate_sweeps)
    out = _out_dir(args)
    write_rows(out / "bottleneck.csv", [r.dict() for r in rows], BOTTLENECK_FIELDS)
    _write_manifest(out, _manifest("bottleneck", cfg, {"estimate_sweeps": args.estimate_sweeps}))
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    if args.kind == "digits":
        data = digits_matrix()
    else:
        data = generate(args.kind, args.records, args.features, seed=args.seed, factors=args.factors)
    out = Path(args.out or settings.output_dir)
    path = write_matrix_csv(out / f"{args.kind}.csv", data)
    logger.info(f"Wrote {data.shape[0]}x{data.shape[1]} matrix to {path}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("main:app", host=args.host, port=args.port, log_level=settings.log_level.lower())
    return EXIT_OK


COMMANDS = {
    "pca": cmd_pca,
    "convergence": cmd_convergence,
    "dse": cmd_dse,
    "matmul": cmd_matmul,
    "estimate": cmd_estimate,
    "bottleneck": cmd_bottleneck,
    "generate": cmd_generate,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except NumericalFailure as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL_FAILURE
    except (ValueError, ImportError) as e:
        logger.error(f"Input error: {e}")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
