"""Command-line front end: ``pnka <subcommand> ...``.

Every subcommand writes machine-readable output (JSON with ``"schema": 1``,
or plot-ready CSV) and a run manifest recording the resolved parameters and
SHA-256 digests of every input file, so a run can be audited and repeated.

Exit codes: 0 success, 2 usage error, 3 data or format error, 4 internal
error.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .ablation import (
    DEFAULT_COUNT,
    DEFAULT_TOP_M,
    impacts_from_json,
    impacts_to_json,
    neuron_impacts,
    select_neurons,
    select_neurons_by_activation,
)
from .bias import (
    direct_cosine_baseline,
    group_score_distributions,
    omega_summary,
    projection_changes,
    sembias_frequencies,
    sembias_wordlist,
)
from .cohorts import DEFAULT_BINS, DEFAULT_THRESHOLD, agreement_split, cohort_split, correctness_split, score_histogram
from .data import CohortLabels
from .errors import DataError, PNKAError
from .kernel import BACKENDS, DEFAULT_BLOCK, resolve_threads
from .metrics import aggregate_pnka, linear_cka, pnka_scores
from .neighbors import METRICS, knn_overlap
from .probe import ProbeConfig, evaluate_probe, train_probe

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
SCHEMA = 1


@dataclass
class RunManifest:
    subcommand: str
    params: dict
    inputs: dict = field(default_factory=dict)
    version: str = __version__
    seed: int = 0

    @classmethod
    def build(cls, args: argparse.Namespace, input_keys: tuple[str, ...]) -> "RunManifest":
        params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
        params["threads"] = resolve_threads(args.threads)
        inputs = {}
        for key in input_keys:
            value = getattr(args, key, None)
            paths = value if isinstance(value, list) else [value]
            for p in paths:
                if p is not None:
                    inputs[str(p)] = pio.sha256_file(p)
        return cls(args.command, params, inputs, __version__, args.seed)

    def as_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "params": self.params,
            "inputs": self.inputs,
            "version": self.version,
            "seed": self.seed,
        }


def _emit(obj: dict, out) -> None:
    """Write a JSON report to ``out``, or to stdout when ``out`` is None or '-'."""
    if out is None or str(out) == "-":
        import json

        sys.stdout.write(json.dumps(pio.jsonable(obj), indent=2) + "\n")
    else:
        pio.write_json(obj, out)


def _report(manifest: RunManifest, **body) -> dict:
    return {"schema": SCHEMA, **body, "manifest": manifest.as_dict()}


# -- subcommands -------------------------------------------------------------


def cmd_compare(args) -> int:
    manifest = RunManifest.build(args, ("left", "right"))
    y = pio.read_matrix(args.left)
    z = pio.read_matrix(args.right)
    scores = pnka_scores(y, z, args.block_size, threads=args.threads, backend=args.backend)
    agg = aggregate_pnka(scores)
    if args.out is not None:
        if args.format == "json":
            pio.write_scores_json(scores, args.out)
        else:
            pio.write_scores_csv(scores, args.out)
    low = int((scores.defined_scores < args.threshold).sum())
    summary = _report(
        manifest,
        n_points=len(scores),
        aggregate_pnka=agg.value,
        linear_cka=linear_cka(y, z),
        degenerate_count=agg.n_degenerate,
        degenerate_points=list(scores.degenerate_points),
        low_score_count=low,
        threshold=args.threshold,
    )
    _emit(summary, args.summary)
    return EXIT_OK


def cmd_knn_overlap(args) -> int:
    manifest = RunManifest.build(args, ("left", "right"))
    y = pio.read_matrix(args.left)
    z = pio.read_matrix(args.right)
    rep = knn_overlap(
        y, z, args.k, args.metric, bins=args.bins, block=args.block_size, centered=args.centered, threads=args.threads
    )
    if args.out is not None:
        pio.write_rows_csv(args.out, ["index", "overlap"], ((i, float(v)) for i, v in enumerate(rep.per_point_overlap)))
    binned_path = args.binned
    if binned_path is None and args.out is not None:
        out = Path(args.out)
        binned_path = out.with_name(out.stem + "_binned.csv")
    if binned_path is not None:
        pio.write_rows_csv(
            binned_path,
            ["bin_lower", "bin_upper", "mean_overlap", "count"],
            ((b.lower, b.upper, b.mean_overlap, b.count) for b in rep.binned),
        )
    _emit(
        _report(
            manifest,
            k=rep.k,
            metric=rep.metric,
            spearman=rep.spearman,
            mean_overlap=float(rep.per_point_overlap.mean()),
            excluded=list(rep.excluded),
            binned=[b.__dict__ for b in rep.binned],
        ),
        args.summary,
    )
    return EXIT_OK


def cmd_cohort(args) -> int:
    manifest = RunManifest.build(args, ("scores", "labels", "truth"))
    scores = pio.read_scores(args.scores)
    n = len(scores)
    labels = [pio.read_labels(p, kind="prediction", expected=n) for p in (args.labels or [])]
    if args.mode == "hist":
        dist = score_histogram(scores, args.bins, args.threshold)
    elif args.mode == "agreement":
        if len(labels) < 2:
            raise _Usage("--mode agreement needs --labels at least twice (one prediction file per model)")
        dist = agreement_split(scores, labels, args.bins, args.threshold)
    elif args.mode == "correctness":
        if not labels or args.truth is None:
            raise _Usage("--mode correctness needs --truth and at least one --labels")
        truth = pio.read_labels(args.truth, kind="class", expected=n)
        dist = correctness_split(scores, labels, truth, args.bins, args.threshold)
    else:
        if len(labels) != 1:
            raise _Usage("--mode cohort needs exactly one --labels file")
        dist = cohort_split(scores, CohortLabels(labels[0].values, kind="cohort"), args.bins, args.threshold)
    _emit(_report(manifest, mode=args.mode, **dist.as_dict()), args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    manifest = RunManifest.build(args, ("repr", "classes"))
    m = pio.read_matrix(args.repr)
    classes = pio.read_labels(args.classes, expected=m.n_points)
    impacts = neuron_impacts(m, classes, args.top_m, method=args.method, block=args.block_size, threads=args.threads)
    if args.scores_out is not None:
        pio.write_npy(np.column_stack([imp.scores.scores for imp in impacts]), args.scores_out)
    _emit(_report(manifest, n_points=m.n_points, top_m=args.top_m, impacts=impacts_to_json(impacts)), args.out)
    return EXIT_OK


def cmd_select(args) -> int:
    manifest = RunManifest.build(args, ("impacts", "repr", "classes"))
    cls = _label_value(args.cls)
    if args.method == "activation":
        if args.repr is None or args.classes is None:
            raise _Usage("--method activation needs --repr and --classes")
        m = pio.read_matrix(args.repr)
        classes = pio.read_labels(args.classes, expected=m.n_points)
        neurons = select_neurons_by_activation(m, classes, cls, args.count, args.mode)
    else:
        if args.impacts is not None:
            doc = pio.read_json(args.impacts)
            records = doc.get("impacts") if isinstance(doc, dict) else doc
            if not isinstance(records, list):
                raise DataError(f"{args.impacts}: no 'impacts' list")
            impacts = impacts_from_json(records)
        elif args.repr is not None and args.classes is not None:
            m = pio.read_matrix(args.repr)
            classes = pio.read_labels(args.classes, expected=m.n_points)
            impacts = neuron_impacts(m, classes, args.top_m, block=args.block_size, threads=args.threads)
        else:
            raise _Usage("--method pnka needs --impacts, or --repr with --classes")
        neurons = select_neurons(impacts, cls, args.count, args.mode)
    _emit(_report(manifest, cls=cls, mode=args.mode, method=args.method, neurons=neurons), args.out)
    return EXIT_OK


def _label_value(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def _read_neurons(path) -> list[int]:
    doc = pio.read_json(path)
    values = doc.get("neurons") if isinstance(doc, dict) else doc
    if not isinstance(values, list) or not values:
        raise DataError(f"{path}: expected a non-empty list of neuron indices")
    try:
        return [int(v) for v in values]
    except (TypeError, ValueError):
        raise DataError(f"{path}: neuron indices must be integers") from None


def cmd_probe(args) -> int:
    manifest = RunManifest.build(args, ("repr", "classes", "neurons", "test_repr", "test_classes"))
    m = pio.read_matrix(args.repr)
    classes = pio.read_labels(args.classes, expected=m.n_points)
    neurons = _read_neurons(args.neurons) if args.neurons is not None else None
    hp = ProbeConfig(args.learning_rate, args.epochs, args.l2, args.seed)
    model = train_probe(m, classes, hp, neurons=neurons)
    if (args.test_repr is None) != (args.test_classes is None):
        raise _Usage("--test-repr and --test-classes go together")
    if args.test_repr is not None:
        tm = pio.read_matrix(args.test_repr)
        tc = pio.read_labels(args.test_classes, expected=tm.n_points)
        ev, split = evaluate_probe(model, tm, tc), "test"
    else:
        ev, split = evaluate_probe(model, m, classes), "train"
    _emit(_report(manifest, evaluated_on=split, accuracy=ev.as_dict(), model=model.to_json()), args.out)
    return EXIT_OK


def cmd_bias(args) -> int:
    manifest = RunManifest.build(args, ("base", "variant", "wordlist", "sembias", "context"))
    if args.wordlist is None and args.sembias is None:
        raise _Usage("bias needs --wordlist and/or --sembias")
    instances = pio.read_sembias(args.sembias) if args.sembias is not None else []
    if args.wordlist is not None:
        words, groups = pio.read_wordlist(args.wordlist)
    else:
        words, groups = sembias_wordlist(instances)
    context = None
    if args.context is not None:
        context = _read_context(args.context)
    wanted = set(words) | {args.pos, args.neg} | set(context or ()) | {w for inst in instances for w in inst.words}
    base = pio.read_glove(args.base, wanted)
    variant = pio.read_glove(args.variant, wanted)

    keep = [i for i, w in enumerate(words) if w in base and w in variant]
    missing = [w for w in words if w not in base or w not in variant]
    if missing:
        warnings.warn(f"{len(missing)} word(s) missing from an embedding were dropped", stacklevel=1)
    words = [words[i] for i in keep]
    groups = CohortLabels(tuple(groups.values[i] for i in keep), kind="word-group")
    if len(words) < 2:
        raise DataError("fewer than 2 words of the word list occur in both embeddings")
    if context is not None:
        context = [w for w in context if w in base and w in variant]

    report: dict = {"pos": args.pos, "neg": args.neg, "n_words": len(words), "missing_words": missing}
    dist = group_score_distributions(
        base, variant, words, groups, context=context, bins=args.bins, threshold=args.threshold,
        block=args.block_size, threads=args.threads,
    )
    report["pnka_groups"] = dist.as_dict()
    if base.dim == variant.dim:
        report["direct_cosine_groups"] = direct_cosine_baseline(
            base, variant, words, groups, bins=args.bins, threshold=args.threshold
        ).as_dict()
    changes = projection_changes(base, variant, words, args.pos, args.neg)
    report["omega"] = [c.__dict__ for c in changes]
    report["omega_summary"] = omega_summary(changes, words, groups)
    if instances:
        report["sembias"] = {
            "base": sembias_frequencies(base, instances, args.pos, args.neg).as_dict(),
            "variant": sembias_frequencies(variant, instances, args.pos, args.neg).as_dict(),
        }
    _emit(_report(manifest, **report), args.out)
    return EXIT_OK


def _read_context(path) -> list[str]:
    """First token of every non-blank line (a group column is ignored)."""
    with pio._text(path) as f:
        return [line.split()[0] for line in f if line.strip()]


# -- parser ------------------------------------------------------------------


class _Usage(Exception):
    """Flag combination that argparse alone cannot reject."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $PNKA_THREADS or 1)")
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    common.add_argument("--block-size", type=_positive, default=DEFAULT_BLOCK, help="kernel rows per block")

    parser = argparse.ArgumentParser(prog="pnka", description="Pointwise normalized kernel alignment tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", parents=[common], help="per-point PNKA between two representations")
    p.add_argument("--left", required=True, help="N x d1 matrix (.npy or .csv)")
    p.add_argument("--right", required=True, help="N x d2 matrix (.npy or .csv)")
    p.add_argument("--out", help="per-point score file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--summary", help="summary JSON (default: stdout)")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD, help="low-score cutoff")
    p.add_argument("--backend", choices=BACKENDS, default="ordered")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("knn-overlap", parents=[common], help="k-NN overlap binned by PNKA score")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--k", type=_positive, required=True)
    p.add_argument("--metric", choices=METRICS, default="cosine")
    p.add_argument("--bins", type=_positive, default=DEFAULT_BINS)
    p.add_argument("--centered", action="store_true", help="rank neighbors on column-centered rows")
    p.add_argument("--out", help="per-point overlap CSV")
    p.add_argument("--binned", help="binned CSV (default: <out>_binned.csv)")
    p.add_argument("--summary", help="summary JSON (default: stdout)")
    p.set_defaults(func=cmd_knn_overlap)

    p = sub.add_parser("cohort", parents=[common], help="score distributions per cohort")
    p.add_argument("--scores", required=True, help="score file from 'compare'")
    p.add_argument("--labels", action="append", help="prediction or cohort labels, one per line (repeatable)")
    p.add_argument("--truth", help="ground-truth labels for --mode correctness")
    p.add_argument("--mode", choices=("hist", "agreement", "correctness", "cohort"), default="hist")
    p.add_argument("--bins", type=_positive, default=DEFAULT_BINS)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("ablate", parents=[common], help="leave-one-neuron-out PNKA")
    p.add_argument("--repr", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--top-m", type=_positive, default=DEFAULT_TOP_M)
    p.add_argument("--method", choices=("rank1", "direct"), default="rank1")
    p.add_argument("--scores-out", help="N x d matrix of ablation scores (.npy)")
    p.add_argument("--out", help="impacts JSON (default: stdout)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("select", parents=[common], help="pick neurons aligned with a class")
    p.add_argument("--impacts", help="impacts JSON from 'ablate'")
    p.add_argument("--repr")
    p.add_argument("--classes")
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--count", type=_positive, default=DEFAULT_COUNT)
    p.add_argument("--mode", choices=("most", "least"), default="most")
    p.add_argument("--method", choices=("pnka", "activation"), default="pnka")
    p.add_argument("--top-m", type=_positive, default=DEFAULT_TOP_M)
    p.add_argument("--out", help="selection JSON (default: stdout)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("probe", parents=[common], help="train and score a linear probe")
    p.add_argument("--repr", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--neurons", help="JSON list of neurons, or the output of 'select'")
    p.add_argument("--test-repr")
    p.add_argument("--test-classes")
    p.add_argument("--epochs", type=_positive, default=ProbeConfig.epochs)
    p.add_argument("--learning-rate", type=float, default=ProbeConfig.learning_rate)
    p.add_argument("--l2", type=float, default=ProbeConfig.l2)
    p.add_argument("--out", help="model and accuracy JSON (default: stdout)")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("bias", parents=[common], help="audit a debiased embedding against its base")
    p.add_argument("--base", required=True, help="GloVe text file")
    p.add_argument("--variant", required=True, help="GloVe text file")
    p.add_argument("--wordlist", help="word<TAB>group lines")
    p.add_argument("--sembias", help="SemBias file")
    p.add_argument("--context", help="extra words that join the kernel but are not scored")
    p.add_argument("--pos", default="he")
    p.add_argument("--neg", default="she")
    p.add_argument("--bins", type=_positive, default=DEFAULT_BINS)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.set_defaults(func=cmd_bias)
    return parser


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None and args.threads < 1:
        parser.print_usage(sys.stderr)
        print("pnka: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"pnka {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PNKAError as exc:
        print(f"pnka {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        print(f"pnka {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
