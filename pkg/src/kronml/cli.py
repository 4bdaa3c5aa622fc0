"""
Command-line interface: character tables, datasets, training, evaluation,
reproduction of the reference comparison and the verification suite.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .characters import MAX_TABLE_DEGREE, CharacterTable
from .config import (ACCURACY_TOLERANCE, CLASSIFIERS, ENCODING_FOR, LGBM_FLOOR, REFERENCE_ACCURACY,
                     STABILIZATION_TOLERANCE, RunSettings)
from .dataset import (ENCODINGS, LabeledDataset, SplitManifest, build_dataset, load_dataset, make_split_manifest,
                      save_dataset)
from .errors import (CharacterTableError, DatasetError, KroneckerCorruptionError, KronmlError, ModelError,
                     PartitionError, ReportError, VerificationError)
from .evaluation import (MODEL_SUFFIX, ExperimentPlan, ExperimentResult, evaluate_scores, load_classifier,
                         run_experiment, subsample_train, train_classifier)
from .kronecker import coefficient_histogram
from .model_cnn import CnnConfig
from .model_gbdt import GbdtConfig
from .reporting import accuracy_table, plot_confusion, write_report_set
from .storage import write_text_atomic
from .table_store import CharacterTableStore
from .verification import LEVELS, run_verification

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2

REPRO_DEGREES = (12, 13, 14)
BANNER_WIDTH = 70


class UsageError(KronmlError):
    """Bad flags or a flag combination that cannot work."""


class KronmlArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; usage errors here exit with 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Console helpers
# ---------------------------------------------------------------------------

class Console:
    """Human-facing output; silent under --quiet."""

    def __init__(self, quiet: bool = False):
        self.quiet = quiet

    def say(self, text: str = '') -> None:
        if not self.quiet:
            print(text)

    def banner(self, title: str, subtitle: Optional[str] = None) -> None:
        self.say("\n" + "=" * BANNER_WIDTH)
        self.say(title)
        if subtitle:
            self.say(subtitle)
        self.say("=" * BANNER_WIDTH)


def _degree(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"n must be an integer, got {value!r}") from None
    if not 1 <= n <= MAX_TABLE_DEGREE:
        raise argparse.ArgumentTypeError(f"n must lie in [1, {MAX_TABLE_DEGREE}], got {n}")
    return n


def _fraction(value: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {value!r}") from None
    if not 0.0 < x <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1], got {x}")
    return x


def dataset_path(settings: RunSettings, n: int, encoding: int) -> Path:
    return settings.out_dir / 'datasets' / f"dataset_n{n}_a{encoding}.csv"


def model_path(settings: RunSettings, classifier: str, n: int) -> Path:
    return settings.out_dir / 'models' / f"{classifier}_n{n}{MODEL_SUFFIX[classifier]}"


def manifest_path(settings: RunSettings, classifier: str, n: int) -> Path:
    return settings.out_dir / 'models' / f"{classifier}_n{n}.split.json"


def _load_table(settings: RunSettings, n: int) -> CharacterTable:
    return CharacterTableStore(settings.table_dir).load_or_build(n, workers=settings.threads)


def _plan_from_args(args: argparse.Namespace, n: int, classifier: str) -> ExperimentPlan:
    cnn = CnnConfig(epochs=args.epochs) if getattr(args, 'epochs', None) else CnnConfig()
    gbdt = GbdtConfig(num_iterations=args.iterations) if getattr(args, 'iterations', None) else GbdtConfig()
    return ExperimentPlan(
        n=n, classifier=classifier, cap=getattr(args, 'cap', None),
        repetitions=getattr(args, 'repetitions', None) or 1,
        train_subsample=getattr(args, 'train_subsample', None),
        cnn=cnn, gbdt=gbdt,
    )


def repro_plan(args: argparse.Namespace, n: int, classifier: str) -> ExperimentPlan:
    """Plan for one repro cell; without --cap the reference per-class size for n applies."""
    plan = _plan_from_args(args, n, classifier)
    if plan.cap is None and n in REFERENCE_ACCURACY:
        plan = replace(plan, cap=REFERENCE_ACCURACY[n].balanced_per_class)
    return plan


def _dataset_for(args: argparse.Namespace, settings: RunSettings, n: int, encoding: int) -> LabeledDataset:
    path = Path(args.dataset) if getattr(args, 'dataset', None) else dataset_path(settings, n, encoding)
    if not path.is_file():
        raise UsageError(f"Dataset not found: {path} (run: gen --n {n} --encoding {encoding})")
    dataset = load_dataset(path)
    if (dataset.n, dataset.encoding) != (n, encoding):
        raise UsageError(f"{path} holds n={dataset.n}, a={dataset.encoding}; "
                         f"{args.model} needs n={n}, a={encoding}")
    return dataset


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_chartab(args: argparse.Namespace, settings: RunSettings, console: Console) -> int:
    store = CharacterTableStore(settings.table_dir)
    console.banner("CHARACTER TABLE", f"S_{args.n}")
    cached = store.exists(args.n)
    table = store.load_or_build(args.n, workers=settings.threads)
    console.say(f"📋 p({args.n}) = {len(table)}")
    console.say(f"   File: {store.path_for(args.n)} ({'verified cache' if cached else 'computed'})")
    console.say(f"   SHA-256: {store.checksum(args.n)}")
    console.say("✅ Row and column orthogonality hold")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace, settings: RunSettings, console: Console) -> int:
    console.banner("DATASET GENERATION", f"n={args.n}, encoding a={args.encoding}")
    table = _load_table(settings, args.n)
    dataset = build_dataset(args.n, args.encoding, table, threads=settings.threads)
    path = save_dataset(dataset, Path(args.output) if args.output else dataset_path(settings, args.n, args.encoding))
    zeros, ones = dataset.class_counts()
    console.say(f"📊 triples={len(table) ** 3} rows={len(dataset)}")
    console.say(f"   zeros={zeros} ones={ones}")
    console.say(f"   File: {path}")
    if args.histogram:
        counts = coefficient_histogram(table, threads=settings.threads)
        lines = [f"{value},{count}" for value, count in sorted(counts.items())]
        histogram_path = path.with_suffix('.histogram.csv')
        write_text_atomic(histogram_path, "value,count\n" + "\n".join(lines) + "\n")
        console.say(f"\n📊 Coefficient values over Q({args.n}):")
        for value, count in sorted(counts.items()):
            console.say(f"   g={value:<8} {count:>10,}")
        console.say(f"   File: {histogram_path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, settings: RunSettings, console: Console) -> int:
    plan = _plan_from_args(args, args.n, args.model)
    dataset = _dataset_for(args, settings, args.n, plan.encoding)
    console.banner("TRAINING", f"{args.model} on n={args.n} (a={plan.encoding})")
    manifest = make_split_manifest(dataset, plan.split_for(settings.seed, 0))
    train, valid = manifest.apply(dataset)
    if plan.train_subsample is not None and plan.train_subsample < 1.0:
        train = subsample_train(train, plan.train_subsample, settings.seed, 0)
    trained, _ = train_classifier(plan, train, valid, settings.seed)
    path = Path(args.output) if args.output else model_path(settings, args.model, args.n)
    trained.save(path)
    manifest.save(manifest_path(settings, args.model, args.n))
    console.say(f"📊 Train rows: {len(train):,}   Validation rows: {len(valid):,}")
    if 'parameters' in trained.extras:
        console.say(f"   Parameters: {trained.extras['parameters']}")
    if 'best_k' in trained.extras:
        console.say(f"   Best k: {trained.extras['best_k']}")
    if 'trees' in trained.extras:
        console.say(f"   Trees: {trained.extras['trees']}")
    console.say(f"✅ Model saved to {path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, settings: RunSettings, console: Console) -> int:
    plan = _plan_from_args(args, args.n, args.model)
    dataset = _dataset_for(args, settings, args.n, plan.encoding)
    model_file = Path(args.model_path) if args.model_path else model_path(settings, args.model, args.n)
    split_file = manifest_path(settings, args.model, args.n)
    if not split_file.is_file():
        raise UsageError(f"Split manifest not found: {split_file} (run: train --model {args.model} --n {args.n})")
    trained = load_classifier(args.model, model_file)
    manifest = SplitManifest.load(split_file)
    train, valid = manifest.apply(dataset)
    report = evaluate_scores(plan, train, valid, trained.predict_proba(valid))
    report.seeds = {'master': settings.seed, 'split': manifest.seed}
    paths = write_report_set(report, settings.out_dir / 'reports', f"{args.model}_n{args.n}", args.figure_format)
    console.say(str(report))
    for path in paths:
        console.say(f"   Wrote {path}")
    return EXIT_OK


def _comparison_lines(results: Dict[int, Dict[str, ExperimentResult]]) -> List[str]:
    lines = []
    for n in sorted(results):
        reference = REFERENCE_ACCURACY.get(n)
        for classifier, result in results[n].items():
            accuracy = result.headline.accuracy
            if reference is None:
                lines.append(f"   n={n:<3} {classifier:<6} {accuracy:.4f}   (no reference value)")
                continue
            expected = reference.accuracy[classifier]
            ok = abs(accuracy - expected) <= ACCURACY_TOLERANCE
            lines.append(f"{'✅' if ok else '❌'} n={n:<3} {classifier:<6} {accuracy:.4f} vs {expected:.4f} "
                         f"(±{ACCURACY_TOLERANCE})")
    return lines


def check_reproduction(results: Dict[int, Dict[str, ExperimentResult]]) -> List[str]:
    """
    Hard failures of a reproduction run: accuracy outside tolerance, broken
    classifier ordering, an LGBM run below its floor, or n=13 and n=14 LGBM
    runs that have not stabilized.
    """
    failures = []
    for n, by_classifier in results.items():
        reference = REFERENCE_ACCURACY.get(n)
        for classifier, result in by_classifier.items():
            accuracy = result.headline.accuracy
            if reference and abs(accuracy - reference.accuracy[classifier]) > ACCURACY_TOLERANCE:
                failures.append(f"n={n} {classifier} accuracy {accuracy:.4f} outside tolerance")
            if classifier == 'lgbm' and n >= 13 and accuracy < LGBM_FLOOR:
                failures.append(f"n={n} lgbm accuracy {accuracy:.4f} below {LGBM_FLOOR}")
        if all(c in by_classifier for c in CLASSIFIERS):
            ordered = [by_classifier[c].headline.accuracy for c in CLASSIFIERS]
            if not all(a < b for a, b in zip(ordered, ordered[1:])):
                failures.append(f"n={n} ordering NearN < CNN2 < CNN3 < LGBM does not hold")
    if all(n in results and 'lgbm' in results[n] for n in (13, 14)):
        gap = abs(results[13]['lgbm'].headline.accuracy - results[14]['lgbm'].headline.accuracy)
        if gap > STABILIZATION_TOLERANCE:
            failures.append(f"lgbm accuracy moves by {gap:.4f} between n=13 and n=14")
    return failures


def cmd_repro(args: argparse.Namespace, settings: RunSettings, console: Console) -> int:
    degrees = [args.n] if args.n else list(REPRO_DEGREES)
    console.banner("REPRODUCTION", f"Table {args.table}, n in {degrees}")
    reports_dir = settings.out_dir / 'reports' / f"table{args.table}"
    results: Dict[int, Dict[str, ExperimentResult]] = {}
    for n in degrees:
        table = _load_table(settings, n)
        datasets = {a: build_dataset(n, a, table, threads=settings.threads) for a in sorted(set(ENCODING_FOR.values()))}
        results[n] = {}
        for classifier in CLASSIFIERS:
            plan = repro_plan(args, n, classifier)
            console.say(f"🔍 n={n} {classifier}: {plan.repetitions} run(s)")
            result = run_experiment(plan, datasets[plan.encoding], master_seed=settings.seed,
                                    record_timings=args.record_timings,
                                    partial_path=reports_dir / f"{classifier}_n{n}.runs.json")
            results[n][classifier] = result
            headline = result.headline
            write_report_set(headline, reports_dir, f"{classifier}_n{n}", args.figure_format)
            if args.table == 2:
                plot_confusion(headline, reports_dir / f"confusion_{classifier}_n{n}.{args.figure_format}")
            if classifier == 'lgbm':
                class0_errors, class1_errors = headline.class_errors
                if class1_errors <= class0_errors:
                    logger.warning("n=%d lgbm: class-1 errors (%d) do not exceed class-0 errors (%d)",
                                   n, class1_errors, class0_errors)
                    console.say(f"⚠️  n={n} lgbm: class 1 misclassified {class1_errors} times, "
                                f"class 0 {class0_errors} times")

    table_text = accuracy_table({n: {c: r.headline.accuracy for c, r in by.items()} for n, by in results.items()},
                                reference=True)
    write_text_atomic(reports_dir / 'comparison.txt', table_text)
    console.say("\n" + table_text)
    for line in _comparison_lines(results):
        console.say(line)
    failures = check_reproduction(results)
    if failures:
        for failure in failures:
            console.say(f"❌ {failure}")
        raise VerificationError(f"{len(failures)} reproduction check(s) failed")
    console.say("\n✅ All reproduction checks passed")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, settings: RunSettings, console: Console) -> int:
    store = CharacterTableStore(settings.table_dir)
    report = run_verification(args.level, max_n=args.n, seed=settings.seed,
                              table_source=lambda n: store.load_or_build(n, workers=settings.threads))
    console.say(str(report))
    report.ensure_passed()
    return EXIT_OK


COMMANDS = {
    'chartab': cmd_chartab, 'gen': cmd_gen, 'train': cmd_train,
    'eval': cmd_eval, 'repro': cmd_repro, 'verify': cmd_verify,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Global flags; the subcommand copies default to SUPPRESS."""
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument('--seed', type=int, default=default, help='Master seed for every random stream')
    parser.add_argument('--out-dir', default=default, help='Output directory (env KRONML_OUT_DIR)')
    parser.add_argument('--cache-dir', default=default, help='Character table cache (env KRONML_CACHE_DIR)')
    parser.add_argument('--threads', type=int, default=default, help='Worker threads (env KRONML_THREADS)')
    parser.add_argument('--quiet', action='store_true', default=argparse.SUPPRESS if suppress else False,
                        help='Only print warnings and errors')


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--cap', type=int, help='Per-class ceiling on sampled rows')
    parser.add_argument('--epochs', type=int, help='CNN training epochs')
    parser.add_argument('--iterations', type=int, help='GBDT boosting iterations')
    parser.add_argument('--train-subsample', type=_fraction, help='Share of the training split used')


def build_parser() -> argparse.ArgumentParser:
    parser = KronmlArgumentParser(
        prog='kronml',
        description="Machine learning on the vanishing of Kronecker coefficients",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py chartab --n 12                     # Build and cache the character table of S_12
  python main.py gen --n 12 --encoding 1            # Labeled dataset for n=12
  python main.py train --model lgbm --n 12          # Train and save a model
  python main.py eval --model lgbm --n 12           # JSON, text and figure reports
  python main.py repro --table 1 --n 12             # Compare all classifiers with the reference table
  python main.py verify --level fast                # Property suite
        """
    )
    _add_global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest='command', parser_class=KronmlArgumentParser)

    chartab = sub.add_parser('chartab', parents=[common], help='Build or validate a cached character table')
    chartab.add_argument('--n', type=_degree, required=True)

    gen = sub.add_parser('gen', parents=[common], help='Generate a labeled dataset')
    gen.add_argument('--n', type=_degree, required=True)
    gen.add_argument('--encoding', type=int, choices=ENCODINGS, required=True)
    gen.add_argument('--output', help='Dataset file (default: <out-dir>/datasets/dataset_n<n>_a<a>.csv)')
    gen.add_argument('--histogram', action='store_true', help='Also count coefficient values over Q(n)')

    for name, help_text in (('train', 'Train and save a model'), ('eval', 'Evaluate a saved model')):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument('--model', choices=CLASSIFIERS, required=True)
        cmd.add_argument('--n', type=_degree, required=True)
        cmd.add_argument('--dataset', help='Dataset file (default: the gen output for the model encoding)')
        _add_experiment_flags(cmd)
        if name == 'train':
            cmd.add_argument('--output', help='Model file')
        else:
            cmd.add_argument('--model-path', help='Model file (default: the train output)')
            cmd.add_argument('--figure-format', choices=('png', 'svg'), default='png')

    repro = sub.add_parser('repro', parents=[common], help='Reproduce the reference comparison')
    repro.add_argument('--table', type=int, choices=(1, 2), required=True)
    repro.add_argument('--n', type=_degree, help='Only this degree (default: 12, 13 and 14)')
    repro.add_argument('--repetitions', type=int, default=5)
    repro.add_argument('--record-timings', action='store_true', help='Store wall-clock timings in the reports')
    repro.add_argument('--figure-format', choices=('png', 'svg'), default='png')
    _add_experiment_flags(repro)

    verify = sub.add_parser('verify', parents=[common], help='Run the property suite')
    verify.add_argument('--n', type=_degree, help='Largest degree to check')
    verify.add_argument('--level', choices=LEVELS, default='fast')
    return parser


def configure_logging(quiet: bool) -> None:
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s', force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a usage error, 2 on a verification failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    console = Console(bool(args.quiet))
    try:
        settings = RunSettings.resolve(seed=args.seed, out_dir=args.out_dir, threads=args.threads,
                                       quiet=bool(args.quiet), cache_dir=args.cache_dir)
    except ValueError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(settings.quiet)

    try:
        return COMMANDS[args.command](args, settings, console)
    except (VerificationError, CharacterTableError, KroneckerCorruptionError) as e:
        print(f"❌ Verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except (UsageError, PartitionError, ModelError, DatasetError, FileNotFoundError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ReportError as e:
        print(f"❌ Could not write report: {e}", file=sys.stderr)
        return EXIT_USAGE
