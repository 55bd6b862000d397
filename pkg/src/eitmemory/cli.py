"""Command-line entry point.

Exit status: 0 success, 2 usage error, 3 invalid configuration,
4 calibration failure, 5 insufficient data.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import FIDELITIES, ExperimentConfig
from .errors import CalibrationError, DataInsufficientError, GridStabilityError, ValidationError
from .orchestrator import calibrate, run_scenario, write_report

EXIT_VALIDATION = 3
EXIT_CALIBRATION = 4
EXIT_DATA = 5


def _common(p):
    p.add_argument("--config", type=Path, help="configuration file (INI)")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--out", type=Path, help="output directory (overrides config)")
    p.add_argument("--fidelity", choices=FIDELITIES, help="analytic or sampled")


def build_parser():
    parser = argparse.ArgumentParser(prog="eitmemory", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("simulate-eit", help="storage/retrieval time series for one ensemble"))
    fr = sub.add_parser("fringe", help="fringe and reconstructed state for one stage")
    fr.add_argument("--stage", choices=("in", "out"), required=True)
    _common(fr)
    _common(sub.add_parser("table1", help="raw detector statistics for both stages"))
    _common(sub.add_parser("report", help="all scenarios plus transfer ratio"))
    cal = sub.add_parser("calibrate", help="tune the control Rabi frequency to a target efficiency")
    _common(cal)
    cal.add_argument("--target", type=float, default=0.17)
    cal.add_argument("--tol", type=float, default=0.002)
    dump = sub.add_parser("write-config", help="write the default configuration")
    dump.add_argument("path", type=Path)
    return parser


def _load(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    run = cfg.run
    if args.seed is not None:
        run = replace(run, master_seed=args.seed)
    if args.out is not None:
        run = replace(run, output_dir=str(args.out))
    if args.fidelity is not None:
        run = replace(run, fidelity=args.fidelity)
    return replace(cfg, run=run)


SCENARIO_FOR = {"simulate-eit": "fig2", "table1": "table1", "report": "full_report"}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "write-config":
            ExperimentConfig().save(args.path)
            return 0
        cfg = _load(args).validate()
        if args.command == "calibrate":
            res = calibrate(cfg, target=args.target, tol=args.tol)
            out = Path(cfg.run.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            res.config.save(out / "calibrated.ini")
            values = {"calibrate.target": args.target, "calibrate.rabi_mhz_2pi": res.rabi_mhz_2pi, "calibrate.eta_r": res.eta}
            for i, (x, y) in enumerate(res.trace):
                values[f"calibrate.trace.{i}"] = f"{x:.6f} {y:.6f}"
            write_report(values, out / "report_calibrate.txt")
            print(f"rabi_mhz_2pi = {res.rabi_mhz_2pi:.6f}  eta_r = {res.eta:.5f}")
            return 0
        scenario = SCENARIO_FOR.get(args.command) or f"fringe_{args.stage}"
        result = run_scenario(cfg, scenario)
        for path in result.files:
            print(path)
        return 0
    except (ValidationError, GridStabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        for x, y in exc.trace:
            print(f"  rabi {x:.4f} MHz -> eta_r {y:.5f}", file=sys.stderr)
        return EXIT_CALIBRATION
    except DataInsufficientError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
