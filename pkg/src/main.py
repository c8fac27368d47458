import os
import sys
import json
import math
import logging
import argparse
import numpy as np
from collections import Counter
from typing import Dict, List, Optional, Sequence, Union
from bench import BenchRow, benchmark
from dataset import FeatureMode, GraphDataset
from diffusion import TransitionMatrix
from errors import (
    DegenerateLabelError,
    ParseError,
    StratificationError,
    ValidationError,
    VocabularyError,
)
from evalkit import CvReport, ForestConfig, Grid, component_importance, cross_validate
from manifest import RunManifest
from pipeline import DatasetEmbedding, Mode, PwlrConfig, embed_dataset_modes, embed_graph
from utils.config import ASSETS_DIR, load_config
from utils.export import dump_csv, dump_json, embedding_document, write_embeddings

log = logging.getLogger(__name__)

config = load_config()

USAGE_ERRORS = (
    ValidationError,
    ParseError,
    VocabularyError,
    StratificationError,
    DegenerateLabelError,
    FileNotFoundError,
)


def _k_value(text: str) -> Union[int, float]:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'inf', got {text!r}") from None


def _k_range(text: str) -> List[int]:
    """'A..B' inclusive, or a single integer."""
    first, sep, last = text.partition("..")
    try:
        lo = int(first)
        hi = int(last) if sep else lo
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"range {text!r} must satisfy 0 <= A <= B")
    return list(range(lo, hi + 1))


def _int_list(text: str) -> List[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}") from None


def _mode_list(text: str) -> List[Mode]:
    try:
        return [Mode(tok.strip()) for tok in text.split(",") if tok.strip()]
    except ValueError:
        choices = ",".join(m.value for m in Mode)
        raise argparse.ArgumentTypeError(f"modes must be among {choices}, got {text!r}") from None


def _fold_count(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 folds, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    defaults = config["embedding"]
    cv = config["cross-validation"]

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", required=True, help="dataset name, the prefix of the TU files")
    common.add_argument("--data-dir", default=config["data-dir"], help="directory holding the dataset")
    common.add_argument("--feature-mode", choices=[m.value for m in FeatureMode], default=defaults["feature-mode"])
    common.add_argument("--md-preprocess", action="store_true", help="drop zero-weight edges, invert distances")
    common.add_argument("--p", type=float, default=defaults["p"], help="norm order of the edge heights")
    common.add_argument("--tau", type=float, default=defaults["tau"], help="bias added to every height")
    common.add_argument("--threads", type=int, default=config["threads"])
    common.add_argument("--seed", type=int, default=config["seed"])
    common.add_argument("--out-path", default=None, help="output file; printed to stdout when omitted")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pwlr", description="Persistent WL and random walk graph embeddings")
    sub = parser.add_subparsers(dest="command", required=True)

    embed = sub.add_parser("embed", parents=[common], help="write one embedding vector per graph")
    embed.add_argument("--mode", type=_mode_list, default=[Mode(defaults["mode"])], help="comma separated modes")
    embed.add_argument("--k1", type=int, default=defaults["k1"])
    embed.add_argument("--k2", type=_k_value, default=defaults["k2"], help="integer or 'inf'")
    embed.add_argument("--out", choices=["csv", "json"], default=config["output"]["format"])
    embed.set_defaults(func=cmd_embed)

    classify = sub.add_parser("classify", parents=[common], help="repeated nested cross-validation")
    classify.add_argument("--mode", type=_mode_list, default=[Mode(defaults["mode"])], help="comma separated modes")
    classify.add_argument("--repeats", type=int, default=cv["repeats"])
    classify.add_argument("--folds", type=_fold_count, default=cv["folds"])
    classify.add_argument("--inner-folds", type=_fold_count, default=cv["inner-folds"])
    classify.add_argument("--grid-k", type=_k_range, default=_k_range("{}..{}".format(*cv["grid-k"])))
    classify.add_argument("--trees", type=_int_list, default=list(config["forest"]["trees"]))
    classify.add_argument("--importances", action="store_true", help="add the component importance table")
    classify.set_defaults(func=cmd_classify)

    inspect = sub.add_parser("inspect", parents=[common], help="show every stage for one graph")
    inspect.add_argument("--index", type=int, default=0, help="0-indexed graph position in the dataset")
    inspect.add_argument("--k1", type=int, default=defaults["k1"])
    inspect.add_argument("--k2", type=_k_value, default=defaults["k2"], help="integer or 'inf'")
    inspect.add_argument("--summary", action="store_true", help="print dataset statistics instead")
    inspect.set_defaults(func=cmd_inspect)

    bench = sub.add_parser("bench", parents=[common], help="embedding wall time versus k1 and k2")
    bench.add_argument("--k1", type=_int_list, default=list(config["bench"]["k1"]))
    bench.add_argument("--k2", type=_int_list, default=list(config["bench"]["k2"]))
    bench.add_argument("--repeats", type=int, default=config["bench"]["repeats"])
    bench.set_defaults(func=cmd_bench)

    return parser


def resolve_dataset(name: str, data_dir: str) -> GraphDataset:
    """
    Looks for `{name}_A.txt` in data_dir/name, then data_dir, then the bundled fixtures.
    """
    candidates = [os.path.join(data_dir, name), data_dir, os.path.join(ASSETS_DIR, "fixtures", name)]
    for root in candidates:
        if os.path.isfile(os.path.join(root, f"{name}_A.txt")):
            return GraphDataset.from_tu(root, name)
    raise FileNotFoundError(f"dataset {name} not found: no {name}_A.txt under {os.path.abspath(data_dir)}")


def _base_config(args: argparse.Namespace, mode: Mode, k1: int = 0, k2: Union[int, float] = 0) -> PwlrConfig:
    return PwlrConfig(
        k1=k1,
        k2=k2,
        p=args.p,
        tau=args.tau,
        mode=mode,
        feature_mode=FeatureMode(args.feature_mode),
        md_preprocess=args.md_preprocess,
    )


def _manifest_path(out_path: str) -> str:
    return f"{out_path}.manifest.json"


def _mode_path(out_path: str, mode: Mode, several: bool) -> str:
    if not several:
        return out_path
    root, ext = os.path.splitext(out_path)
    return f"{root}_{mode.value}{ext}"


def _print_embeddings(embeddings: Dict[Mode, DatasetEmbedding], fmt: str, several: bool) -> None:
    """csv prints one block per mode; json prints a single document, keyed by mode when there are several."""
    if fmt == "json":
        if not several:
            (emb,) = embeddings.values()
            dump_json(sys.stdout, emb.ids, emb.labels, emb.vectors, emb.columns())
            return
        docs = {
            mode.value: embedding_document(emb.ids, emb.labels, emb.vectors, emb.columns())
            for mode, emb in embeddings.items()
        }
        json.dump(docs, sys.stdout)
        print()
        return
    for mode, emb in embeddings.items():
        if several:
            print(f"# mode {mode.value}")
        dump_csv(sys.stdout, emb.ids, emb.labels, emb.vectors, emb.columns())


def cmd_embed(args: argparse.Namespace) -> int:
    modes: List[Mode] = args.mode
    cfg = _base_config(args, modes[0], args.k1, args.k2)
    manifest = RunManifest("embed", args.dataset, {**cfg.to_dict(), "modes": [m.value for m in modes]}, args.seed)

    with manifest.phase("load"):
        ds = resolve_dataset(args.dataset, args.data_dir)
    with manifest.phase("embed"):
        embeddings = embed_dataset_modes(ds, cfg, modes, args.threads)

    several = len(modes) > 1
    if args.out_path is None:
        _print_embeddings(embeddings, args.out, several)
        return 0

    for mode, emb in embeddings.items():
        path = _mode_path(args.out_path, mode, several)
        with manifest.phase("write"):
            write_embeddings(path, args.out, emb.ids, emb.labels, emb.vectors, emb.columns(),
                             os.path.basename(_manifest_path(args.out_path)))
        log.info("wrote %d %s vectors of width %d to %s", len(emb.vectors), mode.value, emb.dim, path)

    manifest.write(_manifest_path(args.out_path))
    return 0


def _modal_choice(report: CvReport):
    counts = Counter((c.mode, c.k1, c.k2, c.trees) for rep in report.chosen for c in rep)
    return counts.most_common(1)[0][0]


def cmd_classify(args: argparse.Namespace) -> int:
    modes: List[Mode] = args.mode
    grid = Grid(tuple(args.grid_k), tuple(args.grid_k), tuple(args.trees))
    base = _base_config(args, modes[0])
    settings = {
        **base.to_dict(),
        "modes": [m.value for m in modes],
        "repeats": args.repeats,
        "folds": args.folds,
        "inner_folds": args.inner_folds,
        "grid": {"k1": list(grid.k1), "k2": list(grid.k2), "trees": list(grid.trees)},
    }
    manifest = RunManifest("classify", args.dataset, settings, args.seed)

    with manifest.phase("load"):
        ds = resolve_dataset(args.dataset, args.data_dir)
    with manifest.phase("cross-validate"):
        report = cross_validate(ds, modes, grid, args.repeats, args.folds, args.inner_folds, args.seed, base,
                                args.threads)

    if args.importances:
        mode, k1, k2, trees = _modal_choice(report)
        cfg = _base_config(args, Mode(mode), k1, k2)
        with manifest.phase("importances"):
            emb = embed_dataset_modes(ds, cfg, [cfg.mode], args.threads)[cfg.mode]
            report.importances = component_importance(emb, ForestConfig(trees=trees, seed=args.seed,
                                                                         threads=args.threads))

    print(f"{args.dataset} {','.join(report.modes)}: accuracy {report.mean:.4f} ± {report.std:.4f} "
          f"over {args.repeats}x{args.folds} folds ({report.runtime:.1f}s)")
    for r, rep in enumerate(report.chosen):
        picks = " ".join(f"{c.mode}/{c.k1}/{c.k2}/{c.trees}" for c in rep)
        print(f"  repeat {r}: {picks}")
    for name, value in report.importances:
        print(f"  {name:>12} {value:.4f}")

    if args.out_path is not None:
        doc = {**report.to_dict(), "manifest": os.path.basename(_manifest_path(args.out_path))}
        with open(args.out_path, "w") as f:
            json.dump(doc, f, indent=2)
        manifest.write(_manifest_path(args.out_path))
    return 0


def _fmt_row(values: Sequence[float]) -> str:
    return "(" + ", ".join(f"{x:.6f}" for x in values) + ")"


def _print_summary(ds: GraphDataset) -> None:
    for key, value in ds.statistics().items():
        print(f"{key:>16}: {value:g}")


def cmd_inspect(args: argparse.Namespace) -> int:
    ds = resolve_dataset(args.dataset, args.data_dir)
    if args.summary:
        _print_summary(ds)
        return 0

    if not 0 <= args.index < len(ds):
        raise ValidationError(f"graph index {args.index} out of range 0..{len(ds) - 1}")
    if args.md_preprocess:
        ds = ds.preprocess_md()
    g = ds[args.index]
    cfg = _base_config(args, Mode.H0H1, args.k1, args.k2)
    x = ds.encode_graph(g, cfg.feature_mode)
    vocab = sorted(set(g.degree_tuples()))
    emb = embed_graph(g, x, cfg, vocab)
    m = TransitionMatrix.from_graph(g)

    print(f"graph {args.index} of {ds.name}: {g.node_count} nodes, {g.edge_count} edges, class {g.label}")
    print("transition matrix:")
    print(np.array2string(m.dense(), precision=6, suppress_small=True))
    print(f"propagated features (k1={cfg.k1}, k2={cfg.k2}), one row per node:")
    print(np.array2string(emb.features.node_rows(), precision=6, suppress_small=True))

    print("sorted edges:")
    print(f"{'rank':>4} {'edge':>10} {'height':>10} {'event':>6} {'tuple':>8}")
    for rank, ev in enumerate(emb.summary.events, start=1):
        u, v = g.edges[ev.edge]
        print(f"{rank:>4} {f'({u},{v})':>10} {ev.height:>10.6f} {ev.kind.value:>6} {str(ev.degree_tuple):>8}")

    print("nested subgraphs:")
    print(f"{'prefix':>6} {'height':>10} {'components':>10} {'cycles':>6}")
    for i, (height, beta0, beta1) in enumerate(emb.summary.betti_table()):
        print(f"{i:>6} {height:>10.6f} {beta0:>10} {beta1:>6}")

    print(f"phi H0: {_fmt_row(emb.phi_h0)}")
    print(f"phi H1: {_fmt_row(emb.phi_h1)}")
    print(f"degree tuples: {vocab}")
    print(f"opt H0: {_fmt_row(emb.opt_h0)}")
    print(f"opt H1: {_fmt_row(emb.opt_h1)}")

    if g.is_connected() and g.edge_count and np.all(g.weights > 0):
        spectral = m.spectral_summary()
        print(f"stationary distribution: {_fmt_row(spectral.stationary)}")
        print(f"second eigenvalue: {spectral.mu2:.6f}")
    else:
        print(f"{g.component_count()} components; stationary distribution is per component")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    base = _base_config(args, Mode.H0)
    ds = resolve_dataset(args.dataset, args.data_dir)
    rows = benchmark(ds, base, args.k1, args.k2, args.repeats)

    header = BenchRow.header()
    lines = [",".join(header)]
    lines += [",".join(str(getattr(row, name)) for name in header) for row in rows]
    if args.out_path is None:
        print("\n".join(lines))
    else:
        with open(args.out_path, "w") as f:
            f.write("\n".join(lines) + "\n")
        manifest = RunManifest("bench", args.dataset, {**base.to_dict(), "k1": args.k1, "k2": args.k2}, args.seed)
        manifest.write(_manifest_path(args.out_path))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else config["log-level"],
        format=config["log-format"],
    )
    try:
        return args.func(args)
    except USAGE_ERRORS as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        log.exception("%s failed", args.command)
        print(f"error: {e}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
