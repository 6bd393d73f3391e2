import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

import bandlab.config as cfg
from bandlab.analyzer.berezin import BosonizationFunction, bosonization_check, generating_function, nilpotent_expand
from bandlab.analyzer.ensemble import Boundary, LatticeSpec, Scaling, build_covariance, dump_sample, \
    sample_block_band
from bandlab.analyzer.experiment_config import ExperimentConfig, check_name, load_config
from bandlab.analyzer.experiment_runner import jsonable, run_experiment
from bandlab.analyzer.scalars import bulk_constants, domain_report, r_plus_minus_limit, r_plus_plus_limit, \
    sine_kernel_limit, sine_kernel_reference
from bandlab.analyzer.spectra import POISSON_GAP_RATIO, collect_spectra, gap_ratio_stats, gap_ratio_table, \
    gue_spectra, semicircle_distance, spectrum_table, two_point_estimator
from bandlab.analyzer.transfer import ZonalGrid, compact_sector, hyperbolic_truncation, transfer_report
from bandlab.checks import AlgebraCheck, check_algebra
from bandlab.errors import BandLabError

logger = logging.getLogger("bandlab")


def add_profile_arguments(parser, scaling="sigma"):
    parser.add_argument('--d', type=int, default=1, help='Lattice dimension')
    parser.add_argument('--n', type=int, default=10, help='Sites per axis')
    parser.add_argument('--W', type=int, default=30, help='Orbitals per site')
    parser.add_argument('--beta', type=float, default=1.0, help='Coupling in front of the Laplacian')
    parser.add_argument('--scaling', choices=[s.value for s in Scaling], default=scaling)
    parser.add_argument('--boundary', choices=[b.value for b in Boundary], default='neumann')
    parser.add_argument('--samples', type=int, default=20, help='Number of sampled matrices')
    parser.add_argument('--seed', type=int, default=0, help='Root seed')


def profile_from(args, W=None):
    lattice = LatticeSpec(d=args.d, n=args.n, W=args.W if W is None else W)
    return build_covariance(lattice, args.beta, Scaling(args.scaling), Boundary(args.boundary))


def add_point_arguments(parser):
    parser.add_argument('--E', type=float, default=0.0, help='Energy inside the bulk')
    parser.add_argument('--eps', type=float, default=0.5, help='Imaginary shift scale')
    parser.add_argument('--xi', type=complex, nargs=4, default=[0.5, -0.5, 0.25, -0.25],
                        metavar=('XI1', 'XI2', 'XI1P', 'XI2P'), help='Shifts, complex values as 0.5+0.1j')


def print_json(data):
    print(json.dumps(jsonable(data), indent=4))


def run_ensemble(args):
    profile = profile_from(args)
    os.makedirs(args.out, exist_ok=True)
    for index in range(args.samples):
        path = os.path.join(args.out, "H_{}_{:04d}.c16".format(args.seed, index))
        dump_sample(sample_block_band(profile, args.seed, index), path, profile)
    print("Samples stored in: {}".format(args.out))
    return 0


def save_csv(path, columns, rows, fmt="%.17g"):
    np.savetxt(path, np.asarray(rows, dtype=float).reshape(-1, len(columns)), delimiter=",",
               header=",".join(columns), comments="", fmt=fmt)


def run_spectra(args):
    ens = collect_spectra(profile_from(args), args.samples, args.seed)
    window = tuple(args.window)
    stats = gap_ratio_stats(ens, window, min_count=args.min_count)
    summary = {"profile": ens.profile.to_dict(), "ks_distance": semicircle_distance(ens),
               "gap_ratio": stats.mean, "gap_ratio_stderr": stats.stderr, "gap_ratio_count": stats.count}
    if args.out:
        histogram = two_point_estimator(ens, args.E0, args.bin_width, half_width=args.half_width,
                                        min_pairs=args.min_pairs)
        summary.update(pairs=histogram.pairs, output_dir=args.out)
        os.makedirs(args.out, exist_ok=True)
        save_csv(os.path.join(args.out, "spectrum.csv"), ["sample_id", "index", "eigenvalue"], spectrum_table(ens))
        save_csv(os.path.join(args.out, "gap_ratio.csv"), ["sample_id", "index", "ratio"],
                 gap_ratio_table(ens, window))
        save_csv(os.path.join(args.out, "r2_histogram.csv"), ["bin_center", "value", "stderr"], histogram.table())
    print_json(summary)
    return 0


def run_crossover(args):
    window = tuple(args.window)
    rows = []
    for W in args.W_values:
        profile = profile_from(args, W)
        stats = gap_ratio_stats(collect_spectra(profile, args.samples, args.seed), window, args.min_count)
        rows.append([W, profile.lattice.N, stats.mean, stats.stderr])
    gue = gap_ratio_stats(gue_spectra(args.gue_N, args.samples, args.seed), window, args.min_count)

    header = "W,N,gap_ratio,stderr\n# gue_N={} gap_ratio={:.6f} stderr={:.6f}; poisson gap_ratio={:.6f}".format(
        args.gue_N, gue.mean, gue.stderr, POISSON_GAP_RATIO)
    np.savetxt(args.out or sys.stdout, np.asarray(rows), delimiter=",", header=header, comments="", fmt="%.10g")
    return 0


def run_berezin_check(args):
    determinant, measured = check_algebra(AlgebraCheck.GRASSMANN_DETERMINANT, args.seed, count=args.count,
                                          max_size=args.max_size)
    coefficients, printed = check_algebra(AlgebraCheck.GENERATING_FUNCTION, args.seed)
    bosonization = bosonization_check(args.W, BosonizationFunction.EXP_TRACE, args.samples, args.seed)
    print_json({"determinant": {"passed": determinant, **measured},
                "generating_function": {"passed": coefficients, **printed},
                "bosonization": {"W": args.W, "lhs": bosonization.lhs, "lhs_stderr": bosonization.lhs_stderr,
                                 "rhs": bosonization.rhs, "exact": bosonization.exact,
                                 "sigma": bosonization.lhs_sigma}})
    if args.export:
        with open(args.export, "w") as fp:
            json.dump({name: str(poly) for name, poly in nilpotent_expand(generating_function()).items()}, fp,
                      indent=4)
        print("Results stored in: {}".format(args.export))
    return 0 if determinant and coefficients else 1


def run_sigma_limit(args):
    constants = bulk_constants(args.E)
    result = {"domain": domain_report(args.E), "rho": constants.rho, "c0": constants.c0,
              "r_plus_minus": r_plus_minus_limit(args.E, args.eps, args.xi),
              "r_plus_plus": r_plus_plus_limit(args.E, args.eps, args.xi)}
    if args.x:
        result["sine_kernel"] = [{"x": x, "value": sine_kernel_limit(args.E, x), "reference": sine_kernel_reference(x)}
                                 for x in args.x]
    print_json(result)
    return 0


def run_transfer(args):
    s_max = args.smax if args.smax is not None else hyperbolic_truncation(args.E, args.eps, args.xi)
    grid = ZonalGrid.build(args.nu, args.ns, s_max)
    print_json(transfer_report(args.E, args.eps, args.xi, args.beta, args.n, grid))
    return 0


def run_transfer_spectra(args):
    rows = []
    for beta_tilde in args.beta_tilde:
        for l in range(args.lmax + 1):
            sector = compact_sector(l, beta_tilde)
            rows.append([beta_tilde, l, sector.lam, sector.lambda_m10.imag, sector.lambda_m1m1.real, sector.mu])
    np.savetxt(args.out or sys.stdout, np.asarray(rows), delimiter=",", comments="", fmt="%.17g",
               header="beta_tilde,l,lambda,lambda_m10_im,lambda_m1m1,mu")
    if args.out:
        print("Results stored in: {}".format(args.out))
    return 0


def run_config(args):
    if args.config:
        config = load_config(args.config)
        print("Using config file {}".format(args.config))
    else:
        config = ExperimentConfig.from_experiment(args.experiment)
        print("Using default experiment {}".format(args.experiment))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.output_dir is not None:
        config = dataclasses.replace(config, output_dir=args.output_dir)

    print("Starting experiment {}...".format(config.experiment))
    print("-----------------------")
    manifest = run_experiment(config)
    for entry in manifest.checks:
        print("{:<40} {}{}".format(entry["check"], "PASS" if entry["passed"] else "FAIL",
                                   "" if entry["gating"] else " (non-gating)"))
    print("-----------------------")
    print("Results stored in: {}".format(", ".join(manifest.artifacts)))
    return 0 if manifest.passed else 1


def run_list_experiments(args):
    for experiment, checks in cfg.experiments.items():
        suffix = " (non-gating)" if experiment in cfg.non_gating else ""
        print("{}{}: {}".format(experiment, suffix, ", ".join(check_name(entry[0]) for entry in checks)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(description='Random band matrices and the sigma-model transfer operator')
    parser.add_argument('--log-level', default='WARNING', help='Logging level (DEBUG, INFO, WARNING, ...)')
    commands = parser.add_subparsers(dest='command', required=True)

    ensemble = commands.add_parser('ensemble', help='Sample block-band matrices and store them')
    add_profile_arguments(ensemble)
    ensemble.add_argument('-o', '--out', default='samples', help='Output directory')
    ensemble.set_defaults(func=run_ensemble)

    spectra = commands.add_parser('spectra', help='Semicircle distance and gap ratio of a sampled ensemble')
    add_profile_arguments(spectra)
    spectra.add_argument('--window', type=float, nargs=2, default=[-0.5, 0.5])
    spectra.add_argument('--min-count', type=int, default=1000)
    spectra.add_argument('--E0', type=float, default=0.0, help='Center of the two-point window')
    spectra.add_argument('--half-width', type=float, default=0.5, help='Half width of the two-point window')
    spectra.add_argument('--bin-width', type=float, default=0.05, help='Bin width in unfolded units')
    spectra.add_argument('--min-pairs', type=int, default=10 ** 5)
    spectra.add_argument('-o', '--out', help='Directory for spectrum.csv, gap_ratio.csv and r2_histogram.csv')
    spectra.set_defaults(func=run_spectra)

    crossover = commands.add_parser('crossover', help='Gap ratio over a sweep of W next to the GUE and Poisson values')
    add_profile_arguments(crossover, scaling='band')
    crossover.add_argument('--W-values', type=int, nargs='+', default=[4, 8, 16, 32])
    crossover.add_argument('--window', type=float, nargs=2, default=[-1.0, 1.0])
    crossover.add_argument('--min-count', type=int, default=1000)
    crossover.add_argument('--gue-N', type=int, default=256)
    crossover.add_argument('-o', '--out', help='CSV file; stdout if omitted')
    crossover.set_defaults(func=run_crossover, beta=0.2)

    berezin = commands.add_parser('berezin-check', help='Grassmann and bosonization identity residuals')
    berezin.add_argument('--count', type=int, default=100)
    berezin.add_argument('--max-size', type=int, default=8)
    berezin.add_argument('--W', type=int, default=2)
    berezin.add_argument('--samples', type=int, default=10 ** 5)
    berezin.add_argument('--seed', type=int, default=0)
    berezin.add_argument('--export', help='Write the generating-function coefficients to this JSON file')
    berezin.set_defaults(func=run_berezin_check)

    sigma = commands.add_parser('sigma-limit', help='Closed-form limits and the sine kernel')
    add_point_arguments(sigma)
    sigma.add_argument('--x', type=float, nargs='*', default=[0.25, 0.5, 1.5])
    sigma.set_defaults(func=run_sigma_limit)

    transfer = commands.add_parser('transfer', help='Transfer-operator value against the closed form')
    add_point_arguments(transfer)
    transfer.add_argument('--beta', type=float, default=2500.0)
    transfer.add_argument('--n', type=int, default=8)
    transfer.add_argument('--nu', type=int, default=24, help='u nodes')
    transfer.add_argument('--ns', type=int, default=64, help='s nodes')
    transfer.add_argument('--smax', type=float, default=None, help='Hyperbolic truncation')
    transfer.set_defaults(func=run_transfer)

    spectra_t = commands.add_parser('transfer-spectra', help='Sector eigenvalues of the compact kernel as CSV')
    spectra_t.add_argument('--beta-tilde', type=float, nargs='+', default=[100.0, 1000.0, 10000.0])
    spectra_t.add_argument('--lmax', type=int, default=6)
    spectra_t.add_argument('-o', '--out', help='CSV file; stdout if omitted')
    spectra_t.set_defaults(func=run_transfer_spectra)

    run = commands.add_parser('run', help='Run an experiment and write its manifest')
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument('-c', '--config', help='Configuration file (.json or .py)')
    source.add_argument('-e', '--experiment', help='Default experiment id, see list-experiments')
    run.add_argument('--seed', type=int, default=None)
    run.add_argument('--output-dir', default=None)
    run.set_defaults(func=run_config)

    listing = commands.add_parser('list-experiments', help='List the default experiments')
    listing.set_defaults(func=run_list_experiments)
    return parser


def main(argv=None):
    """The main routine."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format='%(asctime)s %(name)s %(levelname)s %(message)s')

    try:
        return args.func(args)
    except BandLabError as err:
        print('Error [{}]: {}'.format(err.code, err), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
