"""Synthetic references, pore tables, and model-generated reads with ground truth.

A read is a walk along the reference: each step draws a shift order from the
transition model, advances that many bases (re-emitting in place on a split),
and emits one event mean from the state's scaled gaussian. Reverse-strand
reads walk the reverse complement and map their span back to forward
coordinates.

A walk is only accepted if translating its state path back through the
shortest-interpretation rule reproduces the consumed reference span exactly.
Rare walks through near-periodic sequence (for example a skip inside a
homopolymer) read back shorter than what they consumed; resampling the read
keeps the ground-truth invariant exact instead of approximately true.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .decode import StatePath, path_log_joint, path_to_sequence
from .io import atomic_write
from .kmers import BASES, kmer_codes, reverse_complement
from .pore_model import EventSequence, Hmm, PoreModel, ReadScaling

DEFAULT_REFERENCE_LENGTH = 100_000
DEFAULT_READ_COUNT = 200
DEFAULT_EVENTS_PER_READ = 1500
# Per-read calibration jitter. Read quality is a two-component mixture: most
# reads draw their noise factor near 1, while a fixed fraction is degraded,
# giving the corpus the usual tail of low-quality reads.
SCALE_JITTER = (0.95, 1.05)
SHIFT_JITTER = (-3.0, 3.0)
VAR_JITTER = (0.9, 1.1)
DEGRADED_FRACTION = 0.15
DEGRADED_VAR = (1.6, 2.0)
DEFAULT_CORPUS_SEED = 20260817

STRANDS = ("+", "-")

_MAX_WALK_RETRIES = 200


@dataclass
class SimulatedRead:
    """One simulated read with its generating path and reference interval."""

    events: EventSequence
    true_path: StatePath
    truth: tuple[str, int, int, str]
    true_sequence: str

    @property
    def read_id(self) -> str:
        return self.events.read_id


def generate_reference(length: int, seed) -> str:
    """Uniform i.i.d. DNA string, deterministic per seed."""
    if length < 0:
        raise ValueError(f"length must be >= 0, got {length}")
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 4, size=length)
    lookup = np.frombuffer(BASES.encode("ascii"), dtype=np.uint8)
    return lookup[codes].tobytes().decode("ascii")


def synthetic_pore_model(
    k: int,
    seed,
    level_center: float = 100.0,
    level_spread: float = 16.0,
    stdv_range: tuple[float, float] = (2.0, 3.5),
) -> PoreModel:
    """Random pore table: i.i.d. gaussian levels, uniform per-state noise widths.

    The defaults give enough level overlap that decoding is hard but not
    hopeless at desk scale.
    """
    rng = np.random.default_rng(seed)
    m = 4**k
    level_mean = rng.normal(level_center, level_spread, size=m)
    level_stdv = rng.uniform(stdv_range[0], stdv_range[1], size=m)
    return PoreModel(k=k, level_mean=level_mean, level_stdv=level_stdv)


def _order_masses(hmm: Hmm) -> np.ndarray:
    """(m, max_shift + 1) total outgoing probability per state per shift order."""
    trans = hmm.transitions
    cols = [trans.tables[0][:, None]]
    cols += [trans.tables[j].sum(axis=1)[:, None] for j in range(1, trans.max_shift + 1)]
    return np.concatenate(cols, axis=1)


def simulate_read(
    hmm: Hmm,
    reference: str,
    read_len_events: int,
    strand: str,
    seed,
    *,
    read_id: str = "read0",
    contig: str = "ref",
    scaling: ReadScaling | None = None,
    max_retries: int = _MAX_WALK_RETRIES,
) -> SimulatedRead:
    """Simulate one read of ``read_len_events`` events from a uniform start.

    ``seed`` may be an int or a numpy Generator. ``scaling`` defaults to a mild
    per-read jitter drawn from the same stream.
    """
    if strand not in STRANDS:
        raise ValueError(f"strand must be one of {STRANDS}, got {strand!r}")
    if read_len_events < 1:
        raise ValueError(f"need at least one event, got {read_len_events}")
    k = hmm.k
    max_shift = hmm.transitions.max_shift
    L = len(reference)
    if L < k:
        raise ValueError(f"reference of length {L} cannot hold a {k}-mer")

    walk_seq = reference if strand == "+" else reverse_complement(reference)
    codes = kmer_codes(walk_seq, k)
    if np.any(codes < 0):
        raise ValueError("reference must contain only ACGT for simulation")

    rng = np.random.default_rng(seed)
    if scaling is None:
        var_range = DEGRADED_VAR if rng.random() < DEGRADED_FRACTION else VAR_JITTER
        scaling = ReadScaling(
            scale=rng.uniform(*SCALE_JITTER),
            shift=rng.uniform(*SHIFT_JITTER),
            var=rng.uniform(*var_range),
        )

    per_order = hmm.transitions.mode == "per-order"
    order_probs = None if not per_order else np.asarray(hmm.transitions.order_probs)
    masses = None if per_order else _order_masses(hmm)

    for _ in range(max_retries):
        start = int(rng.integers(0, L - k + 1))
        if per_order:
            orders = rng.choice(max_shift + 1, size=read_len_events - 1, p=order_probs)
            offsets = np.concatenate([[0], np.cumsum(orders)])
            if start + k + int(offsets[-1]) > L:
                continue
            states = codes[start + offsets]
        else:
            states = np.empty(read_len_events, dtype=np.int64)
            states[0] = codes[start]
            pos, overrun = start, False
            for i in range(1, read_len_events):
                j = int(rng.choice(max_shift + 1, p=masses[states[i - 1]]))
                pos += j
                if pos + k > L:
                    overrun = True
                    break
                states[i] = codes[pos]
            if overrun:
                continue
            offsets = None

        path = StatePath(states=states, log_joint=0.0)
        call = path_to_sequence(path, k, max_shift)
        consumed = walk_seq[start : start + len(call.sequence)]
        if call.sequence != consumed:
            continue

        mu = scaling.scale * hmm.pore.level_mean[states] + scaling.shift
        sd = hmm.pore.level_stdv[states] * scaling.var
        means = rng.normal(mu, sd)
        events = EventSequence(read_id=read_id, means=means, scaling=scaling)
        path.log_joint = path_log_joint(hmm, events, states)

        span = len(call.sequence)
        if strand == "+":
            truth = (contig, start, start + span, "+")
        else:
            truth = (contig, L - start - span, L - start, "-")
        return SimulatedRead(
            events=events, true_path=path, truth=truth, true_sequence=call.sequence
        )
    raise RuntimeError(
        f"no accepted walk for {read_id} after {max_retries} tries; "
        "reference may be too short for the requested event count"
    )


def simulate_corpus(
    hmm: Hmm,
    *,
    reference_length: int = DEFAULT_REFERENCE_LENGTH,
    read_count: int = DEFAULT_READ_COUNT,
    events_per_read: int = DEFAULT_EVENTS_PER_READ,
    seed: int = DEFAULT_CORPUS_SEED,
    contig: str = "ref",
    threads: int = 1,
) -> tuple[str, list[SimulatedRead]]:
    """Reference plus independently simulated reads, random strand each.

    Reads get dedicated RNG streams spawned from ``seed`` in read order, so the
    corpus is reproducible regardless of thread count.
    """
    streams = np.random.SeedSequence(seed).spawn(read_count + 1)
    reference = generate_reference(reference_length, streams[0])

    def one(i: int) -> SimulatedRead:
        rng = np.random.default_rng(streams[i + 1])
        strand = STRANDS[int(rng.random() < 0.5)]
        return simulate_read(
            hmm,
            reference,
            events_per_read,
            strand,
            rng,
            read_id=f"read{i:04d}",
            contig=contig,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reads = list(pool.map(one, range(read_count)))
    else:
        reads = [one(i) for i in range(read_count)]
    return reference, reads


# ---------------------------------------------------------------------------
# Truth files. Intervals go to a BED-like TSV; generating paths to JSON lines
# so training and evaluation can reuse them without re-deriving anything.

TRUTH_HEADER = ["contig", "start", "end", "strand", "read_id"]


def write_truth(path, reads: list[SimulatedRead]) -> None:
    with atomic_write(path) as fh:
        fh.write("\t".join(TRUTH_HEADER) + "\n")
        for read in reads:
            contig, start, end, strand = read.truth
            fh.write(f"{contig}\t{start}\t{end}\t{strand}\t{read.read_id}\n")


def load_truth(path) -> dict[str, tuple[str, int, int, str]]:
    """Truth intervals keyed by read id."""
    out: dict[str, tuple[str, int, int, str]] = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != TRUTH_HEADER:
            raise ValueError(f"{path}: unexpected truth header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 columns, got {len(fields)}")
            contig, start, end, strand, read_id = fields
            if strand not in STRANDS:
                raise ValueError(f"{path}:{lineno}: bad strand {strand!r}")
            if read_id in out:
                raise ValueError(f"{path}:{lineno}: duplicate read id {read_id!r}")
            out[read_id] = (contig, int(start), int(end), strand)
    return out


def write_true_paths(path, reads: list[SimulatedRead]) -> None:
    with atomic_write(path) as fh:
        for read in reads:
            fh.write(
                json.dumps(
                    {
                        "read_id": read.read_id,
                        "states": read.true_path.states.tolist(),
                        "log_joint": read.true_path.log_joint,
                    }
                )
                + "\n"
            )


def load_true_paths(path) -> dict[str, StatePath]:
    out: dict[str, StatePath] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[rec["read_id"]] = StatePath(
                    states=np.asarray(rec["states"], dtype=np.int64),
                    log_joint=float(rec["log_joint"]),
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad true-path record: {exc}") from None
    return out
