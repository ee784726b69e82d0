"""
Command-line front end for the magnomechanical entanglement engine.

Subcommands:
    steady    evaluate the scenario's base point
    sweep     evaluate the scenario's parameter grid
    dynamics  evolve the covariance matrix in time
    presets   list (or export) the built-in figure scenarios
"""

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

from config import Config
from services.record_writer import FORMATS, OutputError, write_records
from services.scenario_parser import ScenarioError, parse_scenario, serialize_scenario
from services.sweep import PRESET_NAMES, ScenarioInvalid, SweepResult, SweepRunner, make_preset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

COMMANDS = ('steady', 'sweep', 'dynamics', 'presets')


@dataclass
class RunConfig:
    command: str
    preset: Optional[str] = None
    scenario_path: Optional[str] = None
    output_path: Optional[str] = None
    format: str = 'csv'
    workers: int = Config.WORKERS
    overrides: List[str] = field(default_factory=list)
    export_dir: Optional[str] = None


# ============================================
# Helper Functions
# ============================================

def configure_logging():
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='magnomech',
        description='Entanglement in coherent-feedback cavity magnomechanics'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    for command in ('steady', 'sweep', 'dynamics'):
        sub = subparsers.add_parser(command)
        source = sub.add_mutually_exclusive_group(required=True)
        source.add_argument('--preset', choices=PRESET_NAMES)
        source.add_argument('--scenario', dest='scenario_path', metavar='FILE')
        sub.add_argument('--out', dest='output_path', metavar='PATH')
        sub.add_argument('--format', choices=FORMATS, default='csv')
        sub.add_argument('--workers', type=int, default=Config.WORKERS, metavar='N')
        sub.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE')

    presets = subparsers.add_parser('presets')
    presets.add_argument('--export', dest='export_dir', metavar='DIR')
    return parser


def to_run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        preset=getattr(args, 'preset', None),
        scenario_path=getattr(args, 'scenario_path', None),
        output_path=getattr(args, 'output_path', None),
        format=getattr(args, 'format', 'csv'),
        workers=getattr(args, 'workers', Config.WORKERS),
        overrides=getattr(args, 'overrides', []),
        export_dir=getattr(args, 'export_dir', None),
    )


def list_presets(cfg: RunConfig) -> int:
    """Print preset names; with an export directory also write them as files"""
    for name in PRESET_NAMES:
        print(name)

    if cfg.export_dir:
        try:
            os.makedirs(cfg.export_dir, exist_ok=True)
            for name in PRESET_NAMES:
                path = os.path.join(cfg.export_dir, f"{name}.scenario")
                with open(path, 'w') as f:
                    f.write(serialize_scenario(make_preset(name)))
                logger.info(f"✓ Exported {name} to {path}")
        except OSError as e:
            logger.error(f"Preset export failed: {str(e)}")
            return EXIT_RUNTIME_ERROR
    return EXIT_OK


def run_scenario(cfg: RunConfig, scenario) -> SweepResult:
    """Dispatch one command to the sweep engine"""
    runner = SweepRunner(cfg.workers)

    if cfg.command == 'steady':
        return runner.run_steady_sweep(replace(scenario.without_axes(), mode='steady'))

    if cfg.command == 'sweep':
        if scenario.mode != 'steady':
            raise ScenarioInvalid("sweep needs a steady-mode scenario; use the dynamics command")
        if 'temperature' in scenario.axis_names:
            return runner.run_temperature_scan(scenario)
        return runner.run_steady_sweep(scenario)

    if scenario.mode != 'dynamics' or scenario.axes:
        logger.info("Running the scenario's base point as a dynamics run")
        scenario = replace(scenario.without_axes(), mode='dynamics')
    return runner.run_dynamics(scenario)


def print_summary(result: SweepResult, wall_time: float):
    print(f"{result.point_count} points computed, {result.unstable_count} unstable, "
          f"{result.error_count} errors, wall time {wall_time:.2f} s")


# ============================================
# Main Entry Point
# ============================================

def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG_ERROR

    configure_logging()
    cfg = to_run_config(args)

    if cfg.command == 'presets':
        return list_presets(cfg)

    if cfg.workers < 1:
        print(f"error: --workers must be >= 1 (got {cfg.workers})", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        scenario = parse_scenario(preset=cfg.preset, path=cfg.scenario_path, overrides=cfg.overrides)
    except ScenarioError as e:
        for diagnostic in e.diagnostics:
            print(f"error: {diagnostic}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if cfg.output_path is None:
        cfg.output_path = f"{scenario.name}-{cfg.command}.{cfg.format}"

    start = time.time()
    try:
        result = run_scenario(cfg, scenario)
        write_records(result, cfg)
    except ScenarioInvalid as e:
        print(f"error: {str(e)}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OutputError as e:
        logger.error(str(e))
        return EXIT_RUNTIME_ERROR
    except Exception as e:
        logger.error(f"❌ Run failed: {str(e)}")
        return EXIT_RUNTIME_ERROR

    print_summary(result, time.time() - start)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
