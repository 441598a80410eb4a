"""
Command-line application for the two-asset Kou American option engine
Handles argument parsing, logging setup and the study subcommands
"""

import argparse
import logging
from typing import List, Optional

import pandas as pd

from models.run_models import DIRK_VARIANTS, Quantity, RunConfig, Variant, default_points
from repositories.reference_repository import ReferenceRepository
from repositories.results_repository import ResultsRepository
from utils.config_loader import EnvSettings, load_environment, load_run_config
from utils.fd_operator import assemble_AD
from utils.greeks_eval import point_values
from utils.spatial_grid import build_grid
from utils import studies

logger = logging.getLogger(__name__)

VARIANT_CHOICES = ['a', 'b', 'c', 'd', 'be']


def configure_logging(env: EnvSettings, verbose: bool = False):
    level = logging.DEBUG if verbose else getattr(logging, env.log_level, logging.INFO)
    logging.basicConfig(level=level, format=env.log_format, force=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', default=None,
                        help='TOML run file (default: $KOU2D_CONFIG or the built-in parameter set)')
    common.add_argument('--m', type=int, default=None, help='grid intervals per direction')
    common.add_argument('--N', type=int, default=None, help='number of time steps')
    common.add_argument('--variant', choices=VARIANT_CHOICES, default=None, help='DIRK-P variant')
    common.add_argument('--out', metavar='DIR', default=None, help='output directory')
    common.add_argument('--verbose', action='store_true', default=False,
                        help='DEBUG logging, including per-step iteration counts')

    parser = argparse.ArgumentParser(
        prog='kou2d',
        description='American put-on-the-average under the two-asset Kou model (DIRK-P)')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('price', parents=[common], help='one run; prints value and Greeks at the five points')
    sub.add_parser('reference', parents=[common], help='build or load the cached reference solution')
    converge = sub.add_parser('converge', parents=[common], help='temporal convergence study over N')
    converge.add_argument('--N-list', type=int, nargs='+', default=None, dest='N_list')
    converge.add_argument('--variants', choices=VARIANT_CHOICES, nargs='+', default=None)
    sub.add_parser('table', parents=[common], help='point tables and numerical orders over the (m, N) ladder')
    sub.add_parser('region', parents=[common], help='early exercise region data')
    sub.add_parser('surface', parents=[common], help='value and Greek surfaces on [0, 2K]^2')
    sub.add_parser('grid', parents=[common], help='dump the spatial grid')
    sub.add_parser('matrix', parents=[common], help='dump A_D in Matrix Market format')
    return parser


def _results(config: RunConfig) -> ResultsRepository:
    return ResultsRepository(config.output_dir)


def cmd_price(config: RunConfig, args) -> int:
    result = studies.price(config)
    rows = point_values(result.V, result.grid, default_points(config.params.K))
    frame = pd.DataFrame(rows, columns=['s1', 's2'] + [q.value for q in Quantity])
    tag = f"m{config.m}_N{config.N}_{config.variant.label}"
    _results(config).save(frame, f"price_{tag}")
    _results(config).save(pd.DataFrame([result.to_dict()]), f"run_{tag}")
    print(frame.to_string(index=False, float_format=lambda x: f"{x:.9g}"))
    print(f"kappa1 max={max(result.kappa1)} kappa2 max={max(result.kappa2)} "
          f"wall time={result.wall_time:.2f}s")
    return 0


def cmd_reference(config: RunConfig, args) -> int:
    repository = ReferenceRepository(config.cache_dir)
    V = studies.run_reference(config, repository=repository)
    print(f"Reference m={config.m} N={config.reference_N}: {V.size} values in {config.cache_dir}")
    for name in repository.list():
        print(f"  {name}")
    return 0


def cmd_converge(config: RunConfig, args) -> int:
    variants = tuple(Variant.parse(v) for v in args.variants) if args.variants else DIRK_VARIANTS
    study = studies.run_convergence_study(config, N_list=args.N_list, variants=variants)
    repo = _results(config)
    name = repo.save(study.errors_frame(), f"errors_m{config.m}").name
    # slopes are fitted from the CSV as written, 9 significant digits
    summary = studies.summarize_errors(repo.load(name))
    repo.save(summary, f"slopes_m{config.m}")
    print(summary.to_string(index=False))
    return 0


def cmd_table(config: RunConfig, args) -> int:
    table = studies.run_point_table(config)
    repo = _results(config)
    repo.save(table.values, "point_table")
    repo.save(table.orders, "orders")
    print(table.orders.pivot_table(index=['s1', 's2'], columns='quantity', values='order').to_string())
    return 0


def cmd_region(config: RunConfig, args) -> int:
    result = studies.price(config)
    region = studies.emit_exercise_region(result.V, result.V0, result.grid, config.roi)
    _results(config).save(region.frame, f"exercise_region_m{config.m}")
    print(f"exercise fraction={region.fraction:.4f} roi_hit={region.roi_hit}")
    return 0


def cmd_surface(config: RunConfig, args) -> int:
    result = studies.price(config)
    repo = _results(config)
    for name, frame in studies.surface_frames(result.V, result.grid).items():
        repo.save(frame, f"surface_{name}_m{config.m}")
    repo.save(result.grid.to_frame(), f"grid_m{config.m}")
    print(f"Surfaces written to {config.output_dir}")
    return 0


def cmd_grid(config: RunConfig, args) -> int:
    grid = build_grid(config.m, config.params.K, config.smax)
    path = _results(config).save(grid.to_frame(), f"grid_m{config.m}")
    print(f"Grid written to {path}")
    return 0


def cmd_matrix(config: RunConfig, args) -> int:
    grid = build_grid(config.m, config.params.K, config.smax)
    path = _results(config).save_matrix(assemble_AD(grid, config.params), f"A_D_m{config.m}")
    print(f"A_D written to {path}")
    return 0


COMMANDS = {
    'price': cmd_price,
    'reference': cmd_reference,
    'converge': cmd_converge,
    'table': cmd_table,
    'region': cmd_region,
    'surface': cmd_surface,
    'grid': cmd_grid,
    'matrix': cmd_matrix,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    env = load_environment()
    configure_logging(env, args.verbose)
    try:
        config = load_run_config(args.config, env, m=args.m, N=args.N,
                                 variant=args.variant, output_dir=args.out)
        return COMMANDS[args.command](config, args)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
