#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""The ``stationsim`` command.

Subcommands::

  build-gt         OSM XML -> ground truth TSV and dataset statistics
  evaluate         baseline classifiers and RF over repeated splits
  train            train a random forest on a ground truth
  classify         label a pair TSV with a trained model
  sweep            metric curves over thresholds or forest parameters
  export-features  feature matrix of a ground truth as TSV

Exit codes: 0 success, 1 other stationsim errors, 2 usage, 3 I/O, 4 malformed
input (ground truth, OSM, model), 5 configuration.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .classifiers import Voting, parse_classifier
from .common import atomic_open
from .evaluation import (FOREST_PARAMETERS, prepare_ground_truth,
                         run_experiment, similar_distance_histogram, split,
                         sweep_classifier, sweep_filename, sweep_forest,
                         write_histogram_csv, write_report, write_sweep_csv)
from .features import FeatureSchema, build_vocabulary, write_feature_matrix
from .forest import load_model, predict, save_model, train_forest
from .labels import normalize
from .osm import build_pairs, dataset_statistics, parse_osm, spice
from .station import (ConfigError, GroundTruthFormatError, ModelFormatError,
                      OsmParseError, StationSimError, canonical_order,
                      read_ground_truth, read_unlabeled_pairs,
                      write_ground_truth)
from .utils.config import load_config, pipeline_config, print_config
from .utils.misc import parse_list, repetition_rng
from .utils.sysinfo import system_info

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_CONFIG = 5

LOG_FORMAT = "[{asctime}][{levelname}][{name}]: {message}"


def setup_logging(verbosity):
    """Install the stderr handler on the root logger.

    `verbosity` is the number of ``-v`` minus the number of ``-q`` flags.
    """
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = logging.INFO
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_stationsim', False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, style='{'))
    handler._stationsim = True
    root.addHandler(handler)
    root.setLevel(level)


def _progress(args):
    return not args.quiet and sys.stderr.isatty()


def _check_input(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f'No such file: {path}')


def _pipeline(args, **overrides):
    """PipelineConfig from the config files and the command line flags"""
    parser = load_config([args.config] if args.config else [])
    overrides['general.seed'] = args.seed
    overrides['general.threads'] = args.threads
    return pipeline_config(parser, overrides)


def _feature_overrides(args):
    rules_file = getattr(args, 'rules', None)
    return {'features.top_k': getattr(args, 'top_k', None),
            'features.n_grids': getattr(args, 'n_grids', None),
            'evaluation.normalize': (True if getattr(args, 'normalize', False)
                                     or rules_file else None),
            'evaluation.rules_file': (os.path.abspath(rules_file)
                                      if rules_file else None)}


def _schema(gt, cfg):
    """Feature schema with a vocabulary from all labels of `gt`"""
    rules = cfg.experiment.active_rules
    corpus = gt.labels()
    if rules is not None:
        corpus = [normalize(s, rules) for s in corpus]
    return FeatureSchema(build_vocabulary(corpus, cfg.top_k), cfg.grid, rules)


def cmd_print_config(args):
    extra = [args.config] if args.config else []
    print_config(load_config(extra), extra)
    return EXIT_OK


def cmd_build_gt(args):
    _check_input(args.osm)
    cfg = _pipeline(args, **{'osm.radius': args.radius})
    progress = _progress(args)
    data = parse_osm(args.osm, cfg.station_tags, cfg.label_attributes,
                     progress=progress)
    gt = build_pairs(data, cfg.radius, cfg.same_name_radius,
                     cfg.label_attributes, progress=progress)
    hist = similar_distance_histogram(gt) if args.histogram else None
    if args.spice:
        gt = spice(gt, dataclasses.replace(cfg.spicing, p=args.spice),
                   cfg.radius, progress=progress)
    # statistics describe the emitted pairs, spiced or not
    stats = dataset_statistics(data, gt)
    write_ground_truth(gt, args.out)
    print(stats.render())
    if args.stats:
        with atomic_open(args.stats) as f:
            json.dump(dataclasses.asdict(stats), f, indent=2)
            f.write('\n')
    if args.histogram:
        write_histogram_csv(hist, args.histogram)
        print(f'similar pairs within 50 m: {hist.fraction_within_50m:.1%}')
    return EXIT_OK


def _experiment_overrides(args):
    overrides = _feature_overrides(args)
    overrides.update({
        'evaluation.classifiers': args.classifiers,
        'evaluation.thresholds': args.thresholds,
        'evaluation.voting': args.voting,
        'evaluation.repetitions': args.repetitions,
        'evaluation.train_fraction': args.train_fraction,
        'paths.report_dir': (os.path.abspath(args.report_dir)
                             if args.report_dir else None),
    })
    return overrides


def cmd_evaluate(args):
    _check_input(args.gt)
    cfg = _pipeline(args, **_experiment_overrides(args))
    experiment = cfg.experiment
    if args.no_spice:
        experiment = dataclasses.replace(experiment, spicing=None)
    gt = read_ground_truth(args.gt)
    report = run_experiment(gt, experiment, progress=_progress(args))
    write_report(report, cfg.report_dir)
    print(report.render(), end='')
    return EXIT_OK


def cmd_train(args):
    _check_input(args.gt)
    cfg = _pipeline(args, **_feature_overrides(args),
                    **{'forest.n_trees': args.trees})
    gt = read_ground_truth(args.gt)
    if len(gt) == 0:
        raise ValueError(f'{args.gt} holds no pairs')
    progress = _progress(args)
    schema = _schema(gt, cfg)
    X = schema.matrix(gt.pairs, progress=progress)
    y = np.array(gt.classes())
    model = train_forest(X, y, cfg.forest, schema, n_jobs=cfg.n_jobs,
                         progress=progress)
    accuracy = float((model.predict(X) == y).mean())
    save_model(model, args.model)
    print(f'{len(model.trees)} trees, {schema.n_features} features, '
          f'training accuracy {accuracy:.4f}')
    if args.importances:
        ranked = sorted(zip(model.feature_importances(),
                            schema.column_names()), key=lambda x: -x[0])
        for value, name in ranked[:args.importances]:
            print(f'  {name:<16}{value:.4f}')
    return EXIT_OK


def _classify_rows(model, rows, out):
    """Write every row with class and probability appended. Returns the
    number of malformed rows."""
    n_errors = 0
    for lineno, line, pair, error in rows:
        if error is not None:
            n_errors += 1
            logger.warning(f'line {lineno}: {error}')
            out.write(f'{line}\tERROR\t{error}\n')
            continue
        pair_class, p = predict(model, model.schema.extract(
            canonical_order(pair)))
        out.write(f'{line}\t{int(pair_class)}\t{p:.6f}\n')
    return n_errors


def cmd_classify(args):
    _check_input(args.model)
    if args.pairs != '-':
        _check_input(args.pairs)
    model = load_model(args.model)
    if model.schema is None:
        raise ModelFormatError(f'{args.model} stores no feature schema')
    src = sys.stdin if args.pairs == '-' else open(args.pairs,
                                                    encoding='utf-8')
    try:
        rows = read_unlabeled_pairs(src)
        if args.output:
            with atomic_open(args.output) as out:
                n_errors = _classify_rows(model, rows, out)
        else:
            n_errors = _classify_rows(model, rows, sys.stdout)
    finally:
        if src is not sys.stdin:
            src.close()
    if n_errors:
        logger.warning(f'{n_errors} malformed row(s)')
    return EXIT_OK


def cmd_sweep(args):
    _check_input(args.gt)
    overrides = _feature_overrides(args)
    overrides['evaluation.voting'] = args.voting
    cfg = _pipeline(args, **overrides)
    experiment = cfg.experiment
    if args.no_spice:
        experiment = dataclasses.replace(experiment, spicing=None)
    name = args.classifier.upper()
    gt = read_ground_truth(args.gt)
    progress = _progress(args)
    if name == 'RF':
        if not args.values:
            raise ConfigError('RF sweeps need --values')
        table = sweep_forest(gt, parse_list(args.values, int), args.param,
                             experiment, progress=progress)
    else:
        gt = prepare_ground_truth(gt, experiment, progress)
        train, test = split(gt, experiment.train_fraction,
                            repetition_rng(experiment.seed, 0))
        table = sweep_classifier(name, train, test, experiment)
    csv = args.csv or os.path.join(cfg.report_dir, sweep_filename(name))
    os.makedirs(os.path.dirname(os.path.abspath(csv)), exist_ok=True)
    write_sweep_csv(table, csv)
    best = ', '.join(f'{k}={v:g}' for k, v in table.best.items())
    print(f'{name}: {best}')
    if args.plot:
        from .helper.plotting import save_sweep_plot
        save_sweep_plot(table, args.plot, title=name)
    return EXIT_OK


def cmd_export_features(args):
    _check_input(args.gt)
    cfg = _pipeline(args, **_feature_overrides(args))
    gt = read_ground_truth(args.gt)
    if len(gt) == 0:
        raise ValueError(f'{args.gt} holds no pairs')
    write_feature_matrix(gt.pairs, _schema(gt, cfg), args.out)
    return EXIT_OK


def _classifier_name(value):
    try:
        parse_classifier(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    return value.upper()


def _classifier_list(value):
    return [_classifier_name(v) for v in parse_list(value)]


def _probability(value):
    p = float(value)
    if not 0 <= p <= 1:
        raise argparse.ArgumentTypeError(f'must be in [0, 1]. Is {p}')
    return p


def _add_feature_options(p):
    p.add_argument('--top-k', type=int, help='trigram vocabulary size')
    p.add_argument('--n-grids', type=int, help='number of interwoven grids')
    p.add_argument('--normalize', action='store_true',
                   help='normalize labels before every measure and feature')
    p.add_argument('--rules', metavar='FILE',
                   help='normalization rules (implies --normalize)')


def make_parser():
    parser = argparse.ArgumentParser(
        prog='stationsim',
        description='Similarity classification of public transit stations')
    parser.add_argument('--config', metavar='FILE',
                        help='configuration file overriding the defaults')
    parser.add_argument('--seed', type=int, help='random seed')
    parser.add_argument('--threads', type=int,
                        help='worker processes, 0 uses all cores')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('-q', '--quiet', action='count', default=0)
    parser.add_argument('--version', action='version',
                        version=f'stationsim {__version__}')
    parser.add_argument('--sysinfo', action='store_true',
                        help='print library versions and exit')
    parser.add_argument('--print-config', action='store_true',
                        help='print the configuration files and options '
                             'and exit')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')

    p = sub.add_parser('build-gt', help='ground truth from OSM data')
    p.add_argument('osm', help='OSM XML file, optionally .bz2 or .gz')
    p.add_argument('out', help='ground truth TSV')
    p.add_argument('--spice', type=_probability, default=0.0, metavar='P',
                   help='spice the ground truth with probability P')
    p.add_argument('--radius', type=float, help='pair search radius in m')
    p.add_argument('--stats', metavar='FILE',
                   help='write the dataset statistics as JSON')
    p.add_argument('--histogram', metavar='FILE',
                   help='write the similar pair distance histogram as CSV')
    p.set_defaults(func=cmd_build_gt)

    p = sub.add_parser('evaluate', help='evaluate classifiers')
    p.add_argument('gt', help='ground truth TSV')
    p.add_argument('--classifiers', type=_classifier_list,
                   help='comma separated, e.g. P,ED,P+TFIDF,RF')
    p.add_argument('--thresholds', metavar='SPEC',
                   help='fixed thresholds, e.g. "P=100, P+ED=100:0.8"')
    p.add_argument('--voting', choices=[v.value for v in Voting])
    p.add_argument('--repetitions', type=int)
    p.add_argument('--train-fraction', type=float)
    p.add_argument('--no-spice', action='store_true',
                   help='evaluate the ground truth as given')
    p.add_argument('--report-dir', metavar='DIR')
    _add_feature_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('train', help='train a random forest')
    p.add_argument('gt', help='ground truth TSV')
    p.add_argument('model', help='model file to write')
    p.add_argument('--trees', type=int, help='number of trees')
    p.add_argument('--importances', type=int, default=0, metavar='N',
                   help='print the N most important features')
    _add_feature_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('classify', help='classify pairs with a model')
    p.add_argument('model', help='model file written by train')
    p.add_argument('pairs', nargs='?', default='-',
                   help='pair TSV without class column, - for stdin')
    p.add_argument('-o', '--output', metavar='FILE',
                   help='output file instead of stdout')
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser('sweep', help='metric curves of one classifier')
    p.add_argument('gt', help='ground truth TSV')
    p.add_argument('--classifier', type=_classifier_name, required=True)
    p.add_argument('--param', choices=FOREST_PARAMETERS, default='top_k',
                   help='swept forest parameter')
    p.add_argument('--values', help='comma separated forest parameter values')
    p.add_argument('--voting', choices=[v.value for v in Voting])
    p.add_argument('--no-spice', action='store_true')
    p.add_argument('--csv', metavar='FILE', help='sweep table output')
    p.add_argument('--plot', metavar='FILE',
                   help='save a plot, format from the extension')
    _add_feature_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('export-features', help='write the feature matrix')
    p.add_argument('gt', help='ground truth TSV')
    p.add_argument('out', help='feature TSV')
    _add_feature_options(p)
    p.set_defaults(func=cmd_export_features)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.sysinfo:
        system_info()
        return EXIT_OK
    if args.print_config:
        func = cmd_print_config
    elif args.command is None:
        parser.error('a command is required')
    else:
        func = args.func
    setup_logging(args.verbose - args.quiet)
    try:
        return func(args)
    except (GroundTruthFormatError, OsmParseError, ModelFormatError) as e:
        logger.error(str(e))
        return EXIT_PARSE
    except ConfigError as e:
        logger.error(f'Configuration error: {e}')
        return EXIT_CONFIG
    except OSError as e:
        logger.error(str(e))
        return EXIT_IO
    except (StationSimError, ValueError) as e:
        logger.error(str(e))
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
