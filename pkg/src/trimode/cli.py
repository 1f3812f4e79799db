#!/usr/bin/env python3
"""trimode CLI entry point."""

import argparse
import logging
import sys

from . import __version__
from .commands import EXIT_INPUT, CommandRunner
from .config import Config
from .errors import InputError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='trimode',
        description='Spectrum, dispersive readout, decoherence and fitting for a three-mode qubit.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='YAML or JSON config file (default ~/.trimode.conf)')
    common.add_argument('--out', metavar='DIR', help='output directory')
    common.add_argument('--seed', type=int, help='random seed for bootstrap resampling')
    common.add_argument('--grid', metavar='START:STOP:COUNT', help='flux grid in flux quanta')
    common.add_argument('--nmax', type=int, help='charge-basis cutoff per island')
    common.add_argument('--bootstrap', type=int, help='number of bootstrap refits')

    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.add_parser('spectrum', parents=[common], help='exact and effective spectra versus flux')
    sub.add_parser('chi', parents=[common], help='dispersive shifts versus flux')
    sub.add_parser('decoherence', parents=[common], help='dephasing, Purcell and T2 limits')
    fit = sub.add_parser('fit', parents=[common], help='fit circuit parameters to observations')
    fit.add_argument('observations', help='CSV with columns kind, flux, label, value, weight')
    sub.add_parser('validate', parents=[common], help='run the self-check suite')
    return parser


def main():
    """Main entry point for the trimode CLI."""
    parser = build_parser()
    args = parser.parse_args(sys.argv[1:])
    if args.command is None:
        parser.print_help()
        sys.exit(EXIT_INPUT)

    try:
        config = Config(args.config)
    except (InputError, FileNotFoundError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(EXIT_INPUT)

    logging.basicConfig(
        level=logging.DEBUG if config.get('debug', False) else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )

    runner = CommandRunner(config)

    exit_code = runner.run(args)

    sys.exit(exit_code)


if __name__ == '__main__':
    main()
