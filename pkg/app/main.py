"""
Command-line entry point.

    python -m app.main validate --config configs/default.env
    python -m app.main run decay --config configs/decay.env --threads 4
    python -m app.main dump-tensor --config configs/k_sweep.env --out tensor.csv
    python -m app.main schema
    python -m app.main version
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from app import __version__
from app.core.config import RunConfig, load_run_config, settings
from app.core.errors import ConfigError, SimulationError, SweepAborted
from app.schemas.params import grid_from_config, params_from_config
from app.schemas.reports import ExperimentSummary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_FAILURE = 3

PRESET_NAMES = ("relaxation", "decay", "conservation", "hydro_sweep", "k_sweep", "eps_sweep")


def _configure_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _banner(title: str) -> None:
    print("\n" + "=" * 50)
    print(f"  {title}")
    print("=" * 50)
    print(f"  Environment: {settings.APP_ENV}")
    print("-" * 50)


def _load_checked(path: str) -> tuple[RunConfig, list[str]]:
    from app.services.model_core import validate_params

    config = load_run_config(path)
    checked = validate_params(params_from_config(config), grid_from_config(config))
    return config, checked.flags


def cmd_validate(args) -> int:
    _banner("Validating configuration")
    try:
        config, flags = _load_checked(args.config)
    except ConfigError as e:
        print(f"  [FAIL] Config    - {args.config}")
        for violation in e.violations:
            print(f"         - {violation}")
        return EXIT_CONFIG
    print(f"  [OK]   Config    ({args.config})")
    for flag in flags:
        print(f"  [WARN] {flag}")
    print("-" * 50)
    print(json.dumps(config.echo(), indent=2))
    return EXIT_OK


def cmd_run(args) -> int:
    from app.services.experiments import plan_from_config, run_experiment
    from app.services.outputs import emit_outputs

    _banner(f"Running preset {args.preset}")
    try:
        config, flags = _load_checked(args.config)
        output_dir = args.output or settings.OUTPUT_DIR
        plan = plan_from_config(
            config,
            args.preset,
            output_dir,
            threads=args.threads or settings.THREADS,
            plots=settings.PLOTS and not args.no_plots,
        )
    except (ConfigError, ValidationError) as e:
        print(f"  [FAIL] Config    - {e}")
        return EXIT_CONFIG
    print(f"  [OK]   Config    ({args.config})")
    for flag in flags:
        print(f"  [WARN] {flag}")

    try:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        print(f"  [OK]   Output    ({output_dir})")
    except OSError as e:
        print(f"  [FAIL] Output    - {e}")
        return EXIT_FAILURE

    try:
        results = run_experiment(plan, config)
        paths = emit_outputs(results, output_dir)
    except ConfigError as e:
        print(f"  [FAIL] Config    - {e}")
        return EXIT_CONFIG
    except SweepAborted as e:
        if e.results is not None:
            try:
                partial = emit_outputs(e.results, output_dir)
                print(f"  [WARN] Partial results in {partial[-1].parent}")
            except SimulationError as emit_error:
                print(f"  [FAIL] {emit_error.code} - {emit_error}")
        print(f"  [FAIL] {e.code} - {e}")
        return EXIT_FAILURE
    except SimulationError as e:
        print(f"  [FAIL] {e.code} - {e}")
        return EXIT_FAILURE

    print("-" * 50)
    for check in results.summary.checks:
        status = "[OK]  " if check.passed else "[FAIL]"
        value = "" if check.value is None else f" value={check.value:.3e}"
        print(f"  {status} {check.name}{value} {check.detail}".rstrip())
    print("-" * 50)
    print(f"  Wrote {len(paths)} files to {paths[-1].parent if paths else output_dir}")
    print("=" * 50 + "\n")
    return EXIT_OK if results.summary.passed else EXIT_CHECK_FAILED


def cmd_dump_tensor(args) -> int:
    from app.services import gpc_service
    from app.services.outputs import write_tensor_csv

    try:
        config = load_run_config(args.config)
        measure = gpc_service.measure_from_config(config.MEASURE, config.BETA_A, config.BETA_B)
        basis = gpc_service.build_basis(measure, config.GPC_ORDER, config.QUAD_POINTS or None)
    except ConfigError as e:
        print(f"  [FAIL] Config    - {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as e:
        print(f"  [FAIL] {e.code} - {e}", file=sys.stderr)
        return EXIT_FAILURE

    try:
        text = write_tensor_csv(gpc_service.triple_products(basis), args.out)
    except SimulationError as e:
        print(f"  [FAIL] {e.code} - {e}", file=sys.stderr)
        return EXIT_FAILURE
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_schema(_args) -> int:
    print(json.dumps(ExperimentSummary.model_json_schema(), indent=2))
    return EXIT_OK


def cmd_version(_args) -> int:
    print(__version__)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.main", description="Multi-size fluid-particle perturbation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="check a run configuration")
    validate.add_argument("--config", required=True)
    validate.set_defaults(func=cmd_validate)

    run = sub.add_parser("run", help="run an acceptance preset")
    run.add_argument("preset", choices=PRESET_NAMES)
    run.add_argument("--config", required=True)
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--output", default=None)
    run.add_argument("--no-plots", action="store_true")
    run.set_defaults(func=cmd_run)

    dump = sub.add_parser("dump-tensor", help="write S_jlk as CSV")
    dump.add_argument("--config", required=True)
    dump.add_argument("--out", default=None)
    dump.set_defaults(func=cmd_dump_tensor)

    schema = sub.add_parser("schema", help="print the summary JSON schema")
    schema.set_defaults(func=cmd_schema)

    version = sub.add_parser("version", help="print the package version")
    version.set_defaults(func=cmd_version)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
