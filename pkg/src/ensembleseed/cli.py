"""Command-line pipeline: simulate -> train -> basecall -> eval -> report.

Each subcommand validates its inputs up front, writes outputs atomically, and
drops a resolved config JSON next to them. Outputs are deterministic for a
fixed seed regardless of thread count: every read gets its own RNG stream,
allocated in read order before any work is dispatched.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .decode import (
    ReadEnsemble,
    forward,
    path_to_sequence,
    sample_paths,
    viterbi,
    write_basecalls,
    load_basecalls,
)
from .evaluate import (
    CHAIN_10,
    CHAIN_10_VITERBI,
    SINGLE_13,
    SINGLE_13_VITERBI,
    StrategyConfig,
    build_windows,
    load_report,
    sweep,
    write_points,
    write_report,
)
from .io import atomic_write, read_fasta, write_fasta
from .pore_model import (
    DEFAULT_ORDER_PROBS,
    TransitionModel,
    load_events,
    load_pore_model,
    make_hmm,
    write_events,
    write_pore_model,
)
from .seeding import build_index
from .simulate import (
    DEFAULT_CORPUS_SEED,
    DEFAULT_EVENTS_PER_READ,
    DEFAULT_READ_COUNT,
    DEFAULT_REFERENCE_LENGTH,
    simulate_corpus,
    synthetic_pore_model,
    write_true_paths,
    load_true_paths,
    load_truth,
    write_truth,
)
from .train import (
    count_transitions,
    estimate_transitions,
    load_transition_model,
    save_transition_model,
)

log = logging.getLogger("ensembleseed")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _write_config(out_dir: str, name: str, args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    with atomic_write(os.path.join(out_dir, f"{name}_config.json")) as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_out_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def _load_transitions(args) -> TransitionModel:
    if getattr(args, "transitions", None):
        model = load_transition_model(args.transitions)
        if model.k != args.model_k:
            raise ValueError(
                f"transition model has k={model.k}, but --model-k is {args.model_k}"
            )
        return model
    probs = args.order_probs if getattr(args, "order_probs", None) else list(DEFAULT_ORDER_PROBS)
    if len(probs) != args.max_shift + 1:
        raise ValueError(
            f"--order-probs needs {args.max_shift + 1} values for --max-shift "
            f"{args.max_shift}, got {len(probs)}"
        )
    return TransitionModel.per_order(args.model_k, order_probs=probs)


def cmd_simulate(args) -> int:
    _ensure_out_dir(args.out_dir)
    pore = synthetic_pore_model(args.model_k, seed=args.seed)
    hmm = make_hmm(pore, _load_transitions(args))
    reference, reads = simulate_corpus(
        hmm,
        reference_length=args.ref_length,
        read_count=args.reads,
        events_per_read=args.events_per_read,
        seed=args.seed,
        threads=args.threads,
    )
    write_fasta(os.path.join(args.out_dir, "reference.fasta"), [("ref", reference)])
    write_pore_model(os.path.join(args.out_dir, "pore_model.tsv"), pore)
    write_events(os.path.join(args.out_dir, "events.jsonl"), [r.events for r in reads])
    write_truth(os.path.join(args.out_dir, "truth.tsv"), reads)
    write_true_paths(os.path.join(args.out_dir, "true_paths.jsonl"), reads)
    _write_config(args.out_dir, "simulate", args)
    log.info("simulated %d reads over a %d bp reference", len(reads), len(reference))
    return 0


def cmd_train(args) -> int:
    _ensure_out_dir(args.out_dir)
    if args.source == "truth":
        if not args.true_paths:
            raise ValueError("--source truth requires --true-paths")
        paths = list(load_true_paths(args.true_paths).values())
    else:
        if not (args.events and args.pore_model):
            raise ValueError("--source viterbi requires --events and --pore-model")
        pore = load_pore_model(args.pore_model)
        hmm = make_hmm(pore, _load_transitions_for_k(args, pore.k))
        events = load_events(args.events)
        with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
            paths = list(pool.map(lambda ev: viterbi(hmm, ev), events))
    counts = count_transitions(paths, args.model_k, args.max_shift, args.mode)
    model = estimate_transitions(counts, pseudocount=args.pseudocount)
    save_transition_model(
        os.path.join(args.out_dir, "transitions.tsv"), model, pseudocount=args.pseudocount
    )
    _write_config(args.out_dir, "train", args)
    log.info("trained %s model from %d transitions", args.mode, counts.total)
    return 0


def _load_transitions_for_k(args, k: int) -> TransitionModel:
    saved = args.model_k
    args.model_k = k
    try:
        return _load_transitions(args)
    finally:
        args.model_k = saved


def cmd_basecall(args) -> int:
    _ensure_out_dir(args.out_dir)
    pore = load_pore_model(args.pore_model)
    hmm = make_hmm(pore, _load_transitions_for_k(args, pore.k))
    events = load_events(args.events)
    k = pore.k
    max_shift = hmm.transitions.max_shift
    streams = np.random.SeedSequence(args.seed).spawn(max(1, len(events)))

    def call(pair) -> ReadEnsemble:
        ev, stream = pair
        vit = viterbi(hmm, ev)
        samples = []
        if args.n > 0:
            fwd = forward(hmm, ev)
            samples = sample_paths(hmm, ev, fwd, args.n, seed=stream)
        return ReadEnsemble(
            read_id=ev.read_id,
            viterbi=path_to_sequence(vit, k, max_shift),
            samples=[path_to_sequence(p, k, max_shift) for p in samples],
        )

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        ensembles = list(pool.map(call, zip(events, streams)))
    write_basecalls(
        os.path.join(args.out_dir, "basecalls.fasta"),
        os.path.join(args.out_dir, "spans.jsonl"),
        ensembles,
    )
    _write_config(args.out_dir, "basecall", args)
    log.info("base-called %d reads (n=%d samples each)", len(ensembles), args.n)
    return 0


def _strategies(args) -> list[StrategyConfig]:
    single_k = args.seed_k if args.seed_k else SINGLE_13.seed_k
    chain_k = args.seed_k if args.seed_k else CHAIN_10.seed_k
    common = dict(chain_len=args.chain_len, min_gap=args.min_gap, max_gap=args.max_gap)
    return [
        StrategyConfig(kind="single", seed_k=single_k),
        StrategyConfig(kind="chain", seed_k=chain_k, **common),
        StrategyConfig(kind="single", seed_k=single_k, use_viterbi=True),
        StrategyConfig(kind="chain", seed_k=chain_k, use_viterbi=True, **common),
    ]


def cmd_eval(args) -> int:
    _ensure_out_dir(args.out_dir)
    records = read_fasta(args.reference)
    if len(records) != 1:
        raise ValueError(f"{args.reference}: expected exactly one reference sequence")
    reference = records[0][1]
    ensembles = load_basecalls(args.basecalls, args.spans)
    truth = load_truth(args.truth)
    true_paths = load_true_paths(args.true_paths)

    windows = []
    for ens in ensembles:
        if ens.read_id not in truth:
            raise ValueError(f"read {ens.read_id} missing from {args.truth}")
        if ens.read_id not in true_paths:
            raise ValueError(f"read {ens.read_id} missing from {args.true_paths}")
        windows += build_windows(
            ens, truth[ens.read_id], true_paths[ens.read_id], args.model_k,
            window_size=args.window,
        )
    log.info("evaluating %d windows", len(windows))

    rows = []
    for config in _strategies(args):
        index = build_index(reference, config.seed_k)
        rows += sweep(windows, index, config, args.t, args.n, radius=args.dedup_radius)
    write_report(os.path.join(args.out_dir, "report.tsv"), rows)
    _write_config(args.out_dir, "eval", args)
    return 0


def cmd_report(args) -> int:
    _ensure_out_dir(args.out_dir)
    rows = load_report(args.report)
    groups: dict[tuple[str, int], list] = {}
    for row in rows:
        groups.setdefault((row.strategy, row.t), []).append(row)
    for (strategy, t), group in sorted(groups.items()):
        write_points(os.path.join(args.out_dir, f"points_{strategy}_t{t}.tsv"), group)
    _write_config(args.out_dir, "report", args)
    log.info("wrote %d points files", len(groups))
    return 0


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model-k", type=int, default=5, help="HMM k-mer length")
    p.add_argument("--max-shift", type=int, default=2, help="largest skip order")
    p.add_argument(
        "--order-probs", type=_float_list, default=None,
        help="per-order transition probabilities, comma separated (stay,move,skip...)",
    )
    p.add_argument("--transitions", default=None, help="trained transition model TSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensembleseed",
        description="Event-HMM base calling with posterior ensembles and k-mer seeding.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic corpus")
    _add_model_flags(p)
    p.add_argument("--ref-length", type=int, default=DEFAULT_REFERENCE_LENGTH)
    p.add_argument("--reads", type=int, default=DEFAULT_READ_COUNT)
    p.add_argument("--events-per-read", type=int, default=DEFAULT_EVENTS_PER_READ)
    p.add_argument("--seed", type=int, default=DEFAULT_CORPUS_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="estimate transition probabilities from paths")
    _add_model_flags(p)
    p.add_argument("--source", choices=("truth", "viterbi"), default="truth")
    p.add_argument("--true-paths", default=None, help="true_paths.jsonl from simulate")
    p.add_argument("--events", default=None, help="events.jsonl (for --source viterbi)")
    p.add_argument("--pore-model", default=None, help="pore model TSV (for --source viterbi)")
    p.add_argument("--mode", choices=("per-order", "per-transition"), default="per-order")
    p.add_argument("--pseudocount", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("basecall", help="Viterbi call plus posterior samples per read")
    _add_model_flags(p)
    p.add_argument("--events", required=True)
    p.add_argument("--pore-model", required=True)
    p.add_argument("--n", type=int, default=250, help="posterior samples per read")
    p.add_argument("--seed", type=int, default=DEFAULT_CORPUS_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_basecall)

    p = sub.add_parser("eval", help="windowed seeding sensitivity/FP sweep")
    p.add_argument("--reference", required=True)
    p.add_argument("--basecalls", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--true-paths", required=True)
    p.add_argument("--model-k", type=int, default=5)
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--seed-k", type=int, default=None,
                   help="seed length override (default: 13 single, 10 chain)")
    p.add_argument("--chain-len", type=int, default=3)
    p.add_argument("--min-gap", type=int, default=10)
    p.add_argument("--max-gap", type=int, default=50)
    p.add_argument("--dedup-radius", type=int, default=10)
    p.add_argument("--t", type=_int_list, default=[1], help="support thresholds, comma separated")
    p.add_argument("--n", type=_int_list, default=[1], help="sample counts, comma separated")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="convert a report TSV into FP/TP points files")
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ENSEMBLESEED_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"ensembleseed {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
