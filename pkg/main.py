# main.py
import argparse
import csv
import sys
from fractions import Fraction
from pathlib import Path

from config import ConfigError, ScenarioConfig
from data_manager import ResultWriter
from harness import analyze_shots, run_couplings_table, run_oracle_compare, run_scenario
from logger import Logger
from spin_couplings import CSV_HEADER, ERBIUM_167, AngularMomentumSpec
from version import get_version_string

# Exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# Initialize logger
logger = Logger()


def build_parser():
    parser = argparse.ArgumentParser(
        prog='xysqueeze',
        description='Spin squeezing of dipolar XY lattice spins with discrete truncated Wigner dynamics')
    parser.add_argument('--version', action='version', version=get_version_string(include_date=True))
    parser.add_argument('--verbose', action='store_true', help='log debug messages to the console')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p):
        p.add_argument('--seed', type=int, help='override run.seed')
        p.add_argument('--threads', type=int, help='worker processes, 0 = physical cores')
        p.add_argument('--out-dir', type=Path, default=Path('results'), help='output directory')

    p = sub.add_parser('couplings', help='print the exchange coupling table as CSV')
    p.add_argument('--nuclear-spin', type=Fraction, default=ERBIUM_167.nuclear_spin)
    p.add_argument('--electronic-j', type=Fraction, default=ERBIUM_167.electronic_j)
    p.add_argument('--g-j', type=float, default=ERBIUM_167.lande_gj)
    p.add_argument('--spacing-nm', type=float, default=266.0)
    p.add_argument('--f-lower', type=Fraction, help='single qubit: lower hyperfine level')
    p.add_argument('--m-f', type=Fraction, help='single qubit: magnetic sublevel')

    p = sub.add_parser('simulate', help='run a scenario file')
    p.add_argument('scenario', type=Path)
    common(p)

    p = sub.add_parser('oracle-compare', help='compare DTWA against exact references')
    p.add_argument('scenario', type=Path)
    common(p)

    p = sub.add_parser('analyze', help='analyze a file of spin-resolved snapshots')
    p.add_argument('shots', type=Path)
    p.add_argument('--split-column', type=int, help='differential squeezing between columns left/right of this')
    p.add_argument('--bootstrap', type=int, default=1000)
    p.add_argument('--fit-model', choices=('sinusoid', 'quadratic'), default='sinusoid')
    p.add_argument('--window', type=int, default=9)
    p.add_argument('--no-filter', action='store_true', help='keep every shot')
    common(p)
    return parser


def load_scenario(args):
    overrides = {}
    if args.seed is not None:
        overrides['run.seed'] = args.seed
    if args.threads is not None:
        overrides['run.threads'] = args.threads
    return ScenarioConfig(args.scenario, overrides)


def cmd_couplings(args):
    atom = AngularMomentumSpec(args.nuclear_spin, args.electronic_j, args.g_j)
    rows = run_couplings_table(atom, args.spacing_nm * 1e-9, args.f_lower, args.m_f)
    writer = csv.writer(sys.stdout, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv_row())
    logger.debug(f"Printed {len(rows)} coupling rows")


def cmd_simulate(args):
    logger.attach_file(args.out_dir / 'logs')
    result = run_scenario(load_scenario(args))
    ResultWriter(args.out_dir).write(result)


def cmd_oracle_compare(args):
    logger.attach_file(args.out_dir / 'logs')
    config = load_scenario(args)
    config.set('scenario.kind', 'oracle')
    ResultWriter(args.out_dir).write(run_oracle_compare(config))


def cmd_analyze(args):
    logger.attach_file(args.out_dir / 'logs')
    result = analyze_shots(args.shots, args.split_column, 12345 if args.seed is None else args.seed,
                           args.bootstrap, args.fit_model, args.window, not args.no_filter)
    ResultWriter(args.out_dir).write(result)


COMMANDS = {
    'couplings': cmd_couplings,
    'simulate': cmd_simulate,
    'oracle-compare': cmd_oracle_compare,
    'analyze': cmd_analyze,
}


def main(argv=None):
    """Command-line entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logger.set_console_level('DEBUG')
    try:
        COMMANDS[args.command](args)
        return EXIT_OK
    except (ConfigError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=False)
        logger.debug(Logger.format_error(e))
        return EXIT_CONFIG
    except ArithmeticError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=False)
        logger.debug(Logger.format_error(e))
        return EXIT_NUMERICAL


if __name__ == "__main__":
    logger.info(f"Starting {get_version_string()}...")
    sys.exit(main())
