import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from cgks import settings  # noqa: E402
from cgks.config import load_case  # noqa: E402
from cgks.driver import accuracy_study, bench_case, run_case  # noqa: E402
from cgks.errors import CGKSError  # noqa: E402
from cgks.mesh_tools import mesh_info, read_mesh  # noqa: E402

# Setup Logging
logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL, logging.INFO),
                    format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger("cgks")

CASES_DIR = Path(__file__).parent / "cases"

# --- COMMANDS ---


def cmd_run(args) -> int:
    config = load_case(args.config)
    if args.workers:
        config = replace(config, workers=args.workers)
    result = run_case(config)
    if result.report is not None:
        r = result.report
        print(f"rho L1={r.l1[0]:.6e} L2={r.l2[0]:.6e} Linf={r.linf[0]:.6e}")
    for path in result.outputs:
        print(f"wrote {path}")
    return 0


def cmd_accuracy(args) -> int:
    if args.config:
        config = load_case(args.config)
    else:
        config = load_case(CASES_DIR / f"accuracy_{args.style}.ini")
    config = replace(config, reconstruction=args.path or config.reconstruction,
                     record=config.record or args.record)
    reports = accuracy_study(config, args.levels, args.start)
    print("cells        L1            L2            Linf          order(L1)")
    for r in reports:
        order = f"{r.orders['l1'][0]:.3f}" if r.orders else "-"
        print(f"{r.cells:<12d} {r.l1[0]:.6e}  {r.l2[0]:.6e}  {r.linf[0]:.6e}  {order}")
    return 0


def cmd_bench(args) -> int:
    config = load_case(args.config)
    reports = bench_case(config, args.repetitions, args.steps)
    for r in reports.values():
        print(f"{r.path:<10s} reals/cell={r.reals_per_cell:.0f} matrices={r.matrices} "
              f"reconstruction={r.reconstruction_time:.4f}s step={r.step_time:.4f}s")
    two, orig = reports["two_step"], reports["original"]
    print(f"reconstruction speedup {orig.reconstruction_time / two.reconstruction_time:.3f}x, "
          f"step ratio {orig.step_time / two.step_time:.3f}")
    return 0


def cmd_info(args) -> int:
    info = mesh_info(read_mesh(args.mesh))
    for line in info.lines():
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgks", description="Compact gas-kinetic scheme solver")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a case file")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=0)
    run.set_defaults(func=cmd_run)

    acc = sub.add_parser("accuracy", help="sine-wave convergence study")
    acc.add_argument("--style", choices=("hex", "tet"), default="hex")
    acc.add_argument("--levels", type=int, default=2)
    acc.add_argument("--start", type=int, default=None, help="cells per axis on the coarsest level")
    acc.add_argument("--path", choices=("two_step", "original"), default=None)
    acc.add_argument("--config", default=None, help="case file overriding the shipped one")
    acc.add_argument("--record", action="store_true")
    acc.set_defaults(func=cmd_accuracy)

    bench = sub.add_parser("bench-recon", help="compare both reconstruction paths")
    bench.add_argument("config")
    bench.add_argument("--repetitions", type=int, default=3)
    bench.add_argument("--steps", type=int, default=1)
    bench.set_defaults(func=cmd_bench)

    info = sub.add_parser("info", help="summarise a mesh file")
    info.add_argument("mesh")
    info.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CGKSError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
