"""cli (command line interface) module of the program.

Commands (type `qoelstm <command> --help` for details):

    synth     generate a synthetic corpus with oracle ground truth QoE
    train     train one LSTM-QoE model per fold of an evaluation protocol
    predict   predict the continuous QoE of a session trace
    evaluate  evaluate the models of all folds and write a metrics report
    sweep     train and evaluate a grid of LSTM(l, d) networks
    pool      correlate pooled continuous QoE with overall QoE scores
"""
import argparse
from argparse import RawTextHelpFormatter
import csv
import inspect
import json
import os
import re
import sys
import warnings
from dataclasses import replace
from datetime import datetime, timezone
from os import makedirs, listdir
from os.path import join, splitext, basename, isdir

import numpy as np
from joblib import Parallel, delayed, cpu_count

from qoelstm.core.baseline import fit_affine, predict_affine
from qoelstm.core.datasets import load_corpus, save_corpus, make_plan, \
    read_trace_csv
from qoelstm.core.features import FEATURE_NAMES, ABLATION_SETS, SessionTrace
from qoelstm.core.lstm import NetworkConfig
from qoelstm.core.metrics import MetricsReport, pool_overall, format_table, \
    SUBSETS, AGGREGATES
from qoelstm.core.model import TrainedModel, model_paths, model_file_name, \
    predict
from qoelstm.core.numerics import child_rng, child_seed
from qoelstm.core.synth import SynthConfig, gen_corpus
from qoelstm.core.training import TrainConfig, fit
from qoelstm.cli.utils import ProgressBar


# CLI protocol names -> qoelstm.core.datasets protocols:
PROTOCOLS = {
    'netflix': 'netflix_style',
    'lfovia': 'lfovia_style',
    'leave-p-out': 'leave_p_out',
    'random': 'random_fraction',
    'fixed-80-20': 'fixed_fraction_80_20'
}

SEED_ENV_VAR = 'QOE_LSTM_SEED'

PLAN_FILE_NAME = 'plan.json'


##########
# Parsing
##########


def resolve_seed(seed=-1, fallback=0):
    """Return `seed` if non-negative, otherwise the value of the environment
    variable QOE_LSTM_SEED if set, otherwise `fallback`"""
    if seed is not None and seed >= 0:
        return int(seed)
    env = os.environ.get(SEED_ENV_VAR, '').strip()
    if env:
        try:
            val = int(env)
        except ValueError:
            val = -1
        if val < 0:
            raise ValueError(f'Invalid {SEED_ENV_VAR} (non-negative integer '
                             f'required): {env!r}')
        return val
    return fallback


def parse_net(net):
    """Parse a string "l,d" into a NetworkConfig with l layers of d units"""
    try:
        layers, units = (int(_) for _ in net.split(','))
    except ValueError:
        raise ValueError(f'Invalid network "{net}", expected "l,d" '
                         f'(e.g. "2,22")') from None
    return NetworkConfig(layers=layers, units=units)


def parse_features(features):
    """Parse a features string and return the tuple (feature names, mode):

    - 'full': all features
    - 'stsq-only': all features, with rebuffering ignored
    - 'ablation:SET': SET is a letter in a..g or feature names joined by '+',
      e.g. 'ablation:f' or 'ablation:stsq+tr'
    """
    if features == 'full':
        return FEATURE_NAMES, 'full'
    if features == 'stsq-only':
        return FEATURE_NAMES, 'stsq_only'
    if features.startswith('ablation:'):
        subset = features[len('ablation:'):]
        if subset in ABLATION_SETS:
            return ABLATION_SETS[subset], 'full'
        names = tuple(_ for _ in subset.split('+') if _)
        if names and all(_ in FEATURE_NAMES for _ in names):
            return names, 'full'
    raise ValueError(f'Invalid features "{features}", expected "full", '
                     f'"stsq-only" or "ablation:SET" with SET in '
                     f'{"".join(ABLATION_SETS)} or names joined by "+" '
                     f'({", ".join(FEATURE_NAMES)})')


def parse_int_range(value):
    """Parse "a..b" (inclusive range), "a,b,c" or "a" into a list of ints"""
    try:
        if '..' in value:
            start, end = (int(_) for _ in value.split('..'))
            ret = list(range(start, end + 1))
        else:
            ret = [int(_) for _ in value.split(',')]
    except ValueError:
        ret = []
    if not ret or any(_ < 1 for _ in ret):
        raise ValueError(f'Invalid integer range "{value}", expected '
                         f'e.g. "1..3" or "1,4,10"')
    return ret


def timestamp():
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


###################
# Fold processing
###################


def load_plan(corpus, protocol, seed, p=5, rule='content', fraction=0.8):
    """Return the SplitPlan of the given CLI protocol name"""
    if protocol not in PROTOCOLS:
        raise ValueError(f'Invalid protocol "{protocol}", choose among: '
                         f'{", ".join(PROTOCOLS)}')
    return make_plan(corpus, PROTOCOLS[protocol], rng=child_rng(seed, 0),
                     p=p, rule=rule, fraction=fraction)


def fold_seed(seed, fold_index):
    """The training seed of the fold with the given index"""
    return child_seed(seed, fold_index + 1)


def run_folds(func, folds, args, jobs=1, progress_output=sys.stderr):
    """Call `func(fold, *args)` for each fold with `jobs` parallel workers,
    and return the results in fold order"""
    if jobs == 0 or jobs < -1:
        raise ValueError(f'jobs must be a positive number or -1 (all CPUs), '
                         f'found {jobs}')
    results = []
    chunk_size = cpu_count() if jobs == -1 else jobs
    with ProgressBar(len(folds), 'folds', progress_output) as pbar:
        for start in range(0, len(folds), chunk_size):
            chunk = folds[start: start + chunk_size]
            results.extend(Parallel(n_jobs=jobs)(delayed(func)(fold, *args)
                                                 for fold in chunk))
            pbar.update(len(chunk))
    return results


def train_fold(fold, corpus, protocol, net_config, train_config, features,
               mode, seed, created=''):
    """Train the model of a fold. Return a TrainedModel"""
    provenance = {
        'model': 'LSTM-QoE',
        'corpus': corpus.name,
        'protocol': protocol,
        'fold': fold.index,
        'test_ids': list(fold.test_ids)
    }
    if created:
        provenance['created'] = created
    return fit(corpus.select(fold.train_ids), net_config,
               replace(train_config, seed=fold_seed(seed, fold.index)),
               features=features, mode=mode, provenance=provenance)


def usable_folds(plan, fold='all', max_folds=0, info_output=None):
    folds = plan.usable_folds(info_output)
    if fold != 'all':
        try:
            index = int(fold)
        except ValueError:
            raise ValueError(f'Invalid fold "{fold}", expected an integer '
                             f'or "all"') from None
        folds = [_ for _ in folds if _.index == index]
        if not folds:
            raise ValueError(f'Fold {index} not found or with empty training '
                             f'set (protocol {plan.protocol}, '
                             f'{len(plan.folds)} folds)')
    if max_folds > 0:
        folds = folds[:max_folds]
    if not folds:
        raise ValueError('No fold to process')
    return folds


def predict_fold(model_fold, corpus, baseline=False):
    """Predict the test videos of a fold. Return a list of
    (trace, predicted, affine predicted or None)"""
    model, fold = model_fold
    affine = None
    if baseline:
        affine = fit_affine(corpus.select(fold.train_ids), model.norm)
    return [(trace, predict(model, trace),
             None if affine is None else predict_affine(affine, trace))
            for trace in corpus.select(fold.test_ids)]


def build_reports(results, vqa_metric='', or_delta=0.1, baseline=False):
    """Build the MetricsReport (and the affine baseline report, or None) from
    the output of :func:`predict_fold` on each fold"""
    report = MetricsReport('LSTM-QoE', vqa_metric, or_delta)
    base_report = MetricsReport('affine', vqa_metric, or_delta) \
        if baseline else None
    predictions = {}
    overall = {}
    for (_, fold), rows in results:
        for trace, pred, affine_pred in rows:
            if trace.ground_truth_qoe is None:
                raise ValueError(f'{trace.video_id}: no ground truth QoE, '
                                 f'cannot be evaluated')
            report.add_session(trace.video_id, pred, trace.ground_truth_qoe,
                               trace.qoe_scale, fold.index, trace.has_stalls)
            if base_report is not None:
                base_report.add_session(trace.video_id, affine_pred,
                                        trace.ground_truth_qoe,
                                        trace.qoe_scale, fold.index,
                                        trace.has_stalls)
            predictions[trace.video_id] = pred
            if trace.overall_qoe is not None:
                overall[trace.video_id] = trace.overall_qoe
    if len(set(predictions) & set(overall)) >= 2:
        report.pooling = [pool_overall(predictions, overall, method)
                          for method in AGGREGATES]
    return report, base_report


def evaluate_folds(corpus, models_and_folds, or_delta=0.1, baseline=False,
                   jobs=1, progress_output=sys.stderr):
    """Evaluate (model, fold) pairs on their test videos. Return the tuple
    (report, baseline report or None, list of test results)"""
    results = run_folds(predict_fold, models_and_folds, (corpus, baseline),
                        jobs, progress_output)
    vqa_metric = models_and_folds[0][0].norm.vqa_metric
    report, base_report = build_reports(zip(models_and_folds, results),
                                        vqa_metric, or_delta, baseline)
    return report, base_report, results


def write_predictions(directory, results):
    """Write one CSV (columns t,qoe,predicted) per test video"""
    makedirs(directory, exist_ok=True)
    for rows in results:
        for trace, pred, _ in rows:
            with open(join(directory, f'{trace.video_id}.csv'), 'w',
                      newline='', encoding='utf-8') as fp:
                writer = csv.writer(fp)
                writer.writerow(['t', 'qoe', 'predicted'])
                for t, val in enumerate(pred):
                    writer.writerow([t, repr(float(trace.ground_truth_qoe[t])),
                                     repr(float(val))])


def print_tables(reports, sep='', file=sys.stdout):
    for method in AGGREGATES:
        print(f'{method} over all test videos:', file=file)
        print(format_table(reports, method, sep=sep), file=file)
    for subset in SUBSETS:
        if reports[0].aggregate('mean', subset)['sessions']:
            for method in AGGREGATES:
                print(f'{method} over {subset} videos:', file=file)
                print(format_table(reports, method, subset, sep=sep),
                      file=file)
    for pooled in reports[0].pooling:
        print(f'overall QoE, {pooled["method"]} pooling ({pooled["n"]} '
              f'videos): LCC {pooled["lcc"]:.3f} SROCC {pooled["srocc"]:.3f}',
              file=file)


###########
# Commands
###########


def synth_corpus(out, config='', seed=-1, verbose=False):
    """Generate a synthetic corpus: n_contents x n_patterns session traces with
    ground truth QoE computed by a known oracle with memory (rebuffering
    drops and slow recovery, min-pooled quality over the last K seconds).
    Writes the trace CSV files, the corpus manifest, an "overall.csv" file
    (columns video_id,overall: the mean of each ground truth series) and the
    synthesis parameters used ("synth_config.json")

    :param out: the output directory (created if it does not exist)

    :param config: path to a JSON file of synthesis parameters (see
        qoelstm.core.synth.SynthConfig). Default: "" (default parameters,
        14 contents x 8 patterns of 120 seconds)

    :param seed: the random seed. Default: -1 (use the environment variable
        QOE_LSTM_SEED if set, otherwise the config seed)

    :param verbose: (boolean flag) print additional info to stderr
    """
    cfg = SynthConfig.from_json(config) if config else SynthConfig()
    cfg = replace(cfg, seed=resolve_seed(seed, cfg.seed))
    corpus = gen_corpus(cfg)
    manifest = save_corpus(corpus, out)
    with open(join(out, 'overall.csv'), 'w', newline='',
              encoding='utf-8') as fp:
        writer = csv.writer(fp)
        writer.writerow(['video_id', 'overall'])
        for trace in corpus.traces:
            writer.writerow([trace.video_id, repr(trace.overall_qoe)])
    with open(join(out, 'synth_config.json'), 'w', encoding='utf-8') as fp:
        json.dump(cfg.to_dict(), fp, indent=1, sort_keys=True)
    if verbose:
        print(f'Corpus manifest: {manifest}', file=sys.stderr)
    print(f'{len(corpus)} traces written to {out}', file=sys.stdout)


def train_models(corpus, out, protocol='netflix', fold='all', net='2,22',
                 features='full', train_config='', p=5, rule='content',
                 fraction=0.8, seed=-1, jobs=1, deterministic=False,
                 verbose=False):
    """Train one LSTM-QoE model per fold of an evaluation protocol. Writes a
    model file (fold_<index>.model.json: weights, normalization and
    provenance) per fold and the split plan (plan.json) in the output
    directory

    :param corpus: the corpus directory (or its corpus.json manifest)

    :param out: the output directory (created if it does not exist)

    :param protocol: the evaluation protocol, one of netflix (one fold per
        video, training videos share neither content nor playout pattern with
        the test video), lfovia (one fold per video, no shared playout
        pattern), leave-p-out (test groups of p videos, see 'p' and 'rule'),
        random (one fold per video, random training fraction of the other
        videos, see 'fraction'), fixed-80-20 (a single random train/test
        split). Default: netflix

    :param fold: the fold index to train, or "all". Default: all

    :param net: the network shape "l,d": l LSTM layers of d units.
        Default: "2,22"

    :param features: the input features: full (STSQ, PI and T_R), stsq-only
        (rebuffering ignored) or ablation:SET, where SET is a letter from a
        to g (a: STSQ, b: PI, c: T_R, d: STSQ+PI, e: PI+T_R, f: STSQ+T_R,
        g: all) or feature names joined by "+" (e.g. "stsq+tr").
        Default: full

    :param train_config: path to a JSON file of training parameters (see
        qoelstm.core.training.TrainConfig). Default: "" (timestep 4,
        windows starting from the state carried from the preceding seconds,
        200 epochs, batch size 32, Adam with learning rate 0.001)

    :param p: the test group size of the leave-p-out protocol. Default: 5

    :param rule: the exclusion rule of the leave-p-out protocol: content,
        pattern or content_or_pattern. Default: content

    :param fraction: the training fraction of the random protocols.
        Default: 0.8

    :param seed: the random seed. Default: -1 (use the environment variable
        QOE_LSTM_SEED if set, otherwise 0)

    :param jobs: the number of folds trained in parallel (-1: all CPUs).
        Default: 1

    :param deterministic: (boolean flag) do not write creation timestamps,
        so that runs with the same arguments produce identical files

    :param verbose: (boolean flag) print additional info and warnings to
        stderr
    """
    info = sys.stderr if verbose else None
    seed = resolve_seed(seed)
    cps = load_corpus(corpus)
    plan = load_plan(cps, protocol, seed, p, rule, fraction)
    folds = usable_folds(plan, fold, info_output=info)
    feats, mode = parse_features(features)
    tcfg = TrainConfig.from_json(train_config) if train_config \
        else TrainConfig()
    makedirs(out, exist_ok=True)
    plan.save(join(out, PLAN_FILE_NAME))
    created = '' if deterministic else timestamp()
    models = run_folds(train_fold, folds,
                       (cps, protocol, parse_net(net), tcfg, feats, mode,
                        seed, created), jobs, sys.stderr)
    for fld, model in zip(folds, models):
        path = join(out, model_file_name(fld.index))
        model.save(path)
        if info:
            print(f'Fold {fld.index}: final training loss '
                  f'{model.provenance["final_loss"]:.6g} '
                  f'({model.provenance["epochs_run"]} epochs), '
                  f'model written to {path}', file=info)
    print(f'{len(models)} model(s) written to {out}', file=sys.stdout)


def predict_trace(model, trace, out=''):
    """Predict the continuous QoE of a session trace, one value per second.
    The trace is a CSV file with columns t,stsq,playing (and optionally qoe,
    written as additional output column)

    :param model: the model file path (see command 'train')

    :param trace: the trace CSV file path

    :param out: the output CSV file path (columns t,predicted and optionally
        qoe). Default: "" (print to stdout)
    """
    mdl = TrainedModel.load(model)
    stsq, playing, qoe = read_trace_csv(trace)
    session = SessionTrace(video_id=splitext(basename(trace))[0],
                           stsq=stsq, playing=playing,
                           qoe_scale=mdl.norm.qoe_scale,
                           ground_truth_qoe=qoe,
                           vqa_orientation=mdl.norm.orientation)
    pred = predict(mdl, session)
    fp = open(out, 'w', newline='', encoding='utf-8') if out else sys.stdout
    try:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(['t', 'predicted'] + ([] if qoe is None else ['qoe']))
        for t, val in enumerate(pred):
            writer.writerow([t, repr(float(val))] +
                            ([] if qoe is None else [repr(float(qoe[t]))]))
    finally:
        if out:
            fp.close()


def load_fold_models(models, plan):
    """Load all models of the given directory and return the list of
    (model, fold) pairs, sorted by fold index"""
    ret = []
    for path in model_paths(models):
        mdl = TrainedModel.load(path)
        index = mdl.provenance.get('fold')
        if not isinstance(index, int) or not 0 <= index < len(plan.folds):
            raise ValueError(f'{path}: fold {index} not in the split plan '
                             f'({len(plan.folds)} folds)')
        fld = plan.folds[index]
        test_ids = mdl.provenance.get('test_ids')
        if test_ids is not None and tuple(test_ids) != fld.test_ids:
            raise ValueError(f'{path}: the model test videos differ from fold '
                             f'{index} of protocol {plan.protocol} (different '
                             f'corpus, protocol or seed?)')
        ret.append((mdl, fld))
    return sorted(ret, key=lambda _: _[1].index)


def evaluate_models(corpus, models, out, protocol='netflix', or_delta=0.1,
                    baseline=False, p=5, rule='content', fraction=0.8,
                    seed=-1, jobs=1, sep='', deterministic=False,
                    verbose=False):
    """Evaluate the models of all folds (see command 'train') on their test
    videos and print the mean and median LCC, SROCC, RMSE_n (%) and
    OR (%) over all test videos, and over the test videos without (Vc) and
    with (Vs) rebuffering. Writes the metrics report (JSON) and the
    predicted QoE of each test video (directory "<out>_predictions" with one
    CSV per video, columns t,qoe,predicted)

    :param corpus: the corpus directory (or its corpus.json manifest)

    :param models: the directory of the model files

    :param out: the JSON report file path

    :param protocol: the evaluation protocol the models were trained with
        (see command 'train'). Default: netflix

    :param or_delta: the outage rate threshold, as fraction of the QoE scale
        range. Default: 0.1

    :param baseline: (boolean flag) also fit and evaluate a memoryless affine
        model on each fold (row "affine")

    :param p: the test group size of the leave-p-out protocol. Default: 5

    :param rule: the exclusion rule of the leave-p-out protocol: content,
        pattern or content_or_pattern. Default: content

    :param fraction: the training fraction of the random protocols.
        Default: 0.8

    :param seed: the random seed the models were trained with. Default: -1
        (use the environment variable QOE_LSTM_SEED if set, otherwise 0)

    :param jobs: the number of folds evaluated in parallel (-1: all CPUs).
        Default: 1

    :param sep: the column separator of the printed tables. Default: ""
        (aligned columns)

    :param deterministic: (boolean flag) do not write creation timestamps

    :param verbose: (boolean flag) print additional info and warnings to
        stderr
    """
    seed = resolve_seed(seed)
    cps = load_corpus(corpus)
    plan = load_plan(cps, protocol, seed, p, rule, fraction)
    pairs = load_fold_models(models, plan)
    report, base_report, results = evaluate_folds(cps, pairs, or_delta,
                                                  baseline, jobs, sys.stderr)
    report.info = {'corpus': cps.name, 'protocol': plan.protocol,
                   'folds': len(pairs), 'seed': seed}
    if not deterministic:
        report.info['created'] = timestamp()
    reports = [report] + ([base_report] if base_report else [])
    report.save(out, reports[1:])
    write_predictions(splitext(out)[0] + '_predictions', results)
    if verbose:
        print(f'Report written to {out}', file=sys.stderr)
    print_tables(reports, sep, sys.stdout)


def sweep_grid(corpus, out, protocol='netflix', layers='1..3',
               units='1,4,10,22,30', features='full', train_config='',
               or_delta=0.1, max_folds=0, p=5, rule='content', fraction=0.8,
               seed=-1, jobs=1, sep='', deterministic=False, verbose=False):
    """Train and evaluate LSTM(l, d) networks over a grid of numbers of layers
    l and units d. For each grid point, writes the models and the report in
    the subdirectory "l<l>_d<d>" of the output directory. Prints the mean
    measures of each grid point and writes them in "sweep.json"

    :param corpus: the corpus directory (or its corpus.json manifest)

    :param out: the output directory (created if it does not exist)

    :param protocol: the evaluation protocol (see command 'train').
        Default: netflix

    :param layers: the numbers of layers, as range (e.g. "1..3") or comma
        separated list. Default: "1..3"

    :param units: the numbers of units per layer, as range or comma separated
        list. Default: "1,4,10,22,30"

    :param features: the input features (see command 'train'). Default: full

    :param train_config: path to a JSON file of training parameters (see
        command 'train'). Default: ""

    :param or_delta: the outage rate threshold, as fraction of the QoE scale
        range. Default: 0.1

    :param max_folds: evaluate only the first max_folds folds (0: all).
        Default: 0

    :param p: the test group size of the leave-p-out protocol. Default: 5

    :param rule: the exclusion rule of the leave-p-out protocol. Default:
        content

    :param fraction: the training fraction of the random protocols.
        Default: 0.8

    :param seed: the random seed. Default: -1 (use the environment variable
        QOE_LSTM_SEED if set, otherwise 0)

    :param jobs: the number of folds processed in parallel (-1: all CPUs).
        Default: 1

    :param sep: the column separator of the printed table. Default: ""

    :param deterministic: (boolean flag) do not write creation timestamps

    :param verbose: (boolean flag) print additional info and warnings to
        stderr
    """
    info = sys.stderr if verbose else None
    seed = resolve_seed(seed)
    cps = load_corpus(corpus)
    plan = load_plan(cps, protocol, seed, p, rule, fraction)
    folds = usable_folds(plan, max_folds=max_folds, info_output=info)
    feats, mode = parse_features(features)
    tcfg = TrainConfig.from_json(train_config) if train_config \
        else TrainConfig()
    created = '' if deterministic else timestamp()
    makedirs(out, exist_ok=True)
    plan.save(join(out, PLAN_FILE_NAME))
    grid, reports = [], []
    for n_layers in parse_int_range(layers):
        for n_units in parse_int_range(units):
            net_config = NetworkConfig(layers=n_layers, units=n_units)
            if info:
                print(f'LSTM({n_layers}, {n_units})', file=info)
            subdir = join(out, f'l{n_layers}_d{n_units}')
            makedirs(subdir, exist_ok=True)
            models = run_folds(train_fold, folds,
                               (cps, protocol, net_config, tcfg, feats, mode,
                                seed, created), jobs, sys.stderr)
            for fld, model in zip(folds, models):
                model.save(join(subdir, model_file_name(fld.index)))
            report, _, _ = evaluate_folds(cps, list(zip(models, folds)),
                                          or_delta, False, jobs, sys.stderr)
            report.model = f'LSTM({n_layers},{n_units})'
            report.info = {'corpus': cps.name, 'protocol': plan.protocol,
                           'folds': len(folds), 'seed': seed}
            report.save(join(subdir, 'report.json'))
            reports.append(report)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                agg = report.aggregate('mean')
            grid.append({'layers': n_layers, 'units': n_units,
                         **{k: (None if np.isnan(agg[k]) else agg[k])
                            for k in ('lcc', 'srocc', 'rmse_n_percent',
                                      'or_percent')}})
    summary = {'corpus': cps.name, 'protocol': plan.protocol,
               'folds': len(folds), 'seed': seed, 'grid': grid}
    if not deterministic:
        summary['created'] = created
    with open(join(out, 'sweep.json'), 'w', encoding='utf-8') as fp:
        json.dump(summary, fp, indent=1, sort_keys=True)
    print(format_table(reports, 'mean', sep=sep), file=sys.stdout)


def read_overall_csv(path):
    """Read a CSV with columns video_id,overall into a dict"""
    with open(path, newline='', encoding='utf-8') as fp:
        reader = csv.DictReader(fp)
        if not {'video_id', 'overall'} <= set(reader.fieldnames or []):
            raise ValueError(f'{path}: expected columns video_id,overall')
        return {row['video_id']: float(row['overall']) for row in reader}


def read_prediction_csvs(directory, column='predicted'):
    """Read all CSV files of a directory (see command 'evaluate') into a dict
    of video id (the file name without extension) -> QoE series"""
    if not isdir(directory):
        raise FileNotFoundError(f'Not a directory: {directory}')
    ret = {}
    for fname in sorted(listdir(directory)):
        if splitext(fname)[1].lower() != '.csv':
            continue
        with open(join(directory, fname), newline='', encoding='utf-8') as fp:
            reader = csv.DictReader(fp)
            if column not in (reader.fieldnames or []):
                raise ValueError(f'{fname}: no column "{column}"')
            ret[splitext(fname)[0]] = np.array([float(row[column])
                                                for row in reader])
    if not ret:
        raise FileNotFoundError(f'No CSV file found in {directory}')
    return ret


def pool_predictions(predictions, overall, method='mean', column='predicted'):
    """Pool the continuous QoE of each video into one overall score (mean or
    median over time) and print its LCC and SROCC against the overall QoE
    scores, across videos

    :param predictions: the directory of QoE CSV files, one per video (see
        command 'evaluate')

    :param overall: the CSV file of overall QoE scores, with columns
        video_id,overall

    :param method: the pooling method: mean or median. Default: mean

    :param column: the CSV column to pool: predicted or qoe (ground truth).
        Default: predicted
    """
    res = pool_overall(read_prediction_csvs(predictions, column),
                       read_overall_csv(overall), method)
    print(f'method {res["method"]}', file=sys.stdout)
    print(f'videos {res["n"]}', file=sys.stdout)
    for name in ('lcc', 'srocc'):
        val = res[name]
        print(f'{name} {"nan" if np.isnan(val) else f"{val:.6f}"}',
              file=sys.stdout)


COMMANDS = {
    'synth': synth_corpus,
    'train': train_models,
    'predict': predict_trace,
    'evaluate': evaluate_models,
    'sweep': sweep_grid,
    'pool': pool_predictions
}


def getdoc(func, param=None):
    """Parse the doc of the given command function and returns the doc for the
    given param. If the latter is None, returns the doc for the whole
    function (portion of text from start until first occurrence of ":param "
    """
    flags = re.DOTALL  # @UndefinedVariable
    pattern = "^(.*?)\\n\\s*\\:param " if not param else \
        f"\\:param {param}: (.*?)(?:$|\\:param)"
    stripstart = "\n    " if not param else "\n        "
    try:
        return re.search(pattern, func.__doc__, flags).\
            group(1).strip().replace(stripstart, "\n") + '\n'
    except AttributeError:
        return 'No doc available'


def getdef(func, param):
    """Return the default of the given command function param, or raise
    KeyError if it has no default (required param)"""
    val = inspect.signature(func).parameters[param]
    if val.default is not inspect.Parameter.empty:
        return val.default
    raise KeyError(param)


#####################
# ArgumentParser code
#####################

def build_parser():
    parser = argparse.ArgumentParser(
        prog='qoelstm',
        description=__doc__.split('\n\n', 1)[1],
        formatter_class=RawTextHelpFormatter
    )
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    for command, func in COMMANDS.items():
        subparser = subparsers.add_parser(
            command, description=getdoc(func),
            help=getdoc(func).split('.')[0].replace('\n', ' '),
            formatter_class=RawTextHelpFormatter)
        # each argument of the command function is mapped to a flag with the
        # same name (underscores -> dashes). Arguments without default are
        # required:
        for name in inspect.signature(func).parameters:
            kwargs = {'dest': name, 'metavar': name,
                      'help': getdoc(func, name)}
            try:
                param_default = getdef(func, name)
            except KeyError:
                kwargs['required'] = True
                kwargs['type'] = str
            else:
                if isinstance(param_default, bool):  # boolean flag
                    kwargs['action'] = 'store_false' if param_default \
                        else 'store_true'
                    kwargs.pop('metavar')  # invalid for store_true action
                else:
                    kwargs['default'] = param_default
                    kwargs['type'] = type(param_default)
            subparser.add_argument('--' + name.replace('_', '-'), **kwargs)
    return parser


def cli_entry_point(argv=None):
    args = vars(build_parser().parse_args(argv))
    func = COMMANDS[args.pop('command')]
    with warnings.catch_warnings(record=False):
        warnings.simplefilter('always' if args.get('verbose') else 'ignore')
        try:
            func(**args)
        except Exception as exc:
            msg = ' '.join(str(exc).split())
            print(f'ERROR: {exc.__class__.__name__}: {msg}', file=sys.stderr)
            sys.exit(1)
    sys.exit(0)


if __name__ == '__main__':
    cli_entry_point()
