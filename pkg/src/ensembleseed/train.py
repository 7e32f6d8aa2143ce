"""Transition-probability estimation from observed state paths.

Counting tallies consecutive state pairs, inferring each pair's shift order as
the smallest that links them. Estimation smooths with a pseudocount and
normalizes per source state; in per-order mode the counts are pooled across
states by order before the same smoothing applies, so both modes agree on the
zero-data limit (uniform over a state's out-edges).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .decode import IllegalPathError, StatePath
from .io import atomic_write
from .kmers import decode_kmer, encode_kmer
from .pore_model import TransitionModel, smallest_shift

MODES = ("per-order", "per-transition")


@dataclass
class TransitionCounts:
    """Tally of observed transitions.

    ``counts`` is keyed by (source, target) state codes in per-transition mode
    and by shift order in per-order mode. Tables with matching shape add.
    """

    k: int
    max_shift: int
    mode: str
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not 1 <= self.max_shift <= self.k:
            raise ValueError(f"max_shift must be in [1, k], got {self.max_shift}")
        if self.mode == "per-order":
            base = {j: 0 for j in range(self.max_shift + 1)}
            base.update(self.counts)
            self.counts = base
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __add__(self, other: "TransitionCounts") -> "TransitionCounts":
        if (self.k, self.max_shift, self.mode) != (other.k, other.max_shift, other.mode):
            raise ValueError("can only add counts with matching k, max_shift, and mode")
        merged = Counter(self.counts)
        merged.update(other.counts)
        return TransitionCounts(self.k, self.max_shift, self.mode, dict(merged))


def _path_states(path) -> np.ndarray:
    if isinstance(path, StatePath):
        return path.states
    return np.asarray(path, dtype=np.int64)


def infer_orders(states: np.ndarray, k: int, max_shift: int) -> np.ndarray:
    """Smallest shift order of each consecutive pair; -1 where no order fits."""
    prev, cur = states[:-1], states[1:]
    orders = np.where(prev == cur, 0, -1)
    for j in range(1, max_shift + 1):
        fits = (prev % 4 ** (k - j)) == (cur >> (2 * j))
        orders = np.where((orders < 0) & fits, j, orders)
    return orders


def count_transitions(
    paths, k: int, max_shift: int = 2, mode: str = "per-order"
) -> TransitionCounts:
    """Tally every consecutive state pair across ``paths``.

    Raises IllegalPathError naming the offending path and event position if a
    pair is not linked by any shift of order <= max_shift.
    """
    out = TransitionCounts(k, max_shift, mode)
    tally: Counter = Counter(out.counts)
    for pi, path in enumerate(paths):
        states = _path_states(path)
        if states.size < 2:
            continue
        if states.min() < 0 or states.max() >= 4**k:
            raise IllegalPathError(f"path {pi}: state codes out of range for k={k}")
        orders = infer_orders(states, k, max_shift)
        bad = np.flatnonzero(orders < 0)
        if bad.size:
            pos = int(bad[0])
            raise IllegalPathError(
                f"path {pi}, events {pos}..{pos + 1}: "
                f"{decode_kmer(int(states[pos]), k)} -> {decode_kmer(int(states[pos + 1]), k)} "
                f"needs a shift beyond {max_shift}"
            )
        if mode == "per-order":
            tally.update(dict(enumerate(np.bincount(orders, minlength=max_shift + 1).tolist())))
        else:
            tally.update(zip(states[:-1].tolist(), states[1:].tolist()))
    out.counts = dict(tally)
    return TransitionCounts(out.k, out.max_shift, out.mode, out.counts)


def _num_edges(max_shift: int) -> int:
    return sum(4**j for j in range(max_shift + 1))


def estimate_transitions(counts: TransitionCounts, pseudocount: int = 1) -> TransitionModel:
    """Smoothed maximum-likelihood transition model from a count table.

    Each of a state's out-edges gets (count + pseudocount) mass, normalized over
    that state's edges. Per-order counts are pooled, so an order-j edge carries
    a 4**-j share of its order's pool; pseudocount 0 is only legal when every
    row would still be supported.
    """
    if pseudocount < 0:
        raise ValueError(f"pseudocount must be >= 0, got {pseudocount}")
    k, max_shift = counts.k, counts.max_shift
    edges = _num_edges(max_shift)

    if counts.mode == "per-order":
        pooled = np.array([counts.counts.get(j, 0) for j in range(max_shift + 1)], float)
        total = pooled.sum()
        if pseudocount == 0 and total == 0:
            raise ValueError("no observations and pseudocount 0 would leave zero rows")
        sizes = 4.0 ** np.arange(max_shift + 1)
        probs = (pooled + pseudocount * sizes) / (total + pseudocount * edges)
        return TransitionModel.per_order(k, order_probs=probs)

    m = 4**k
    tables = [np.full(m, float(pseudocount))]
    for j in range(1, max_shift + 1):
        tables.append(np.full((m, 4**j), float(pseudocount)))
    totals = np.zeros(m)
    for (src, tgt), c in counts.counts.items():
        j = smallest_shift(src, tgt, k, max_shift)
        if j is None:
            raise IllegalPathError(
                f"count table pairs {decode_kmer(src, k)} -> {decode_kmer(tgt, k)} "
                f"with no shift of order <= {max_shift}"
            )
        if j == 0:
            tables[0][src] += c
        else:
            tables[j][src, tgt & (4**j - 1)] += c
        totals[src] += c
    if pseudocount == 0:
        unsupported = np.flatnonzero(totals == 0)
        if unsupported.size:
            raise ValueError(
                f"state {decode_kmer(int(unsupported[0]), k)} has no observed "
                "transitions; pseudocount 0 would give it a zero row"
            )
    denom = totals + float(pseudocount) * edges
    tables[0] /= denom
    for j in range(1, max_shift + 1):
        tables[j] /= denom[:, None]
    return TransitionModel(k, tables, mode="per-transition")


# ---------------------------------------------------------------------------
# Model files. One metadata line, then a column header, then TSV rows. The
# per-transition variant stores each (source, target) pair's total probability
# with parallel shift orders summed; loading assigns each pair's mass to its
# smallest linking order, which leaves every state-to-state probability intact.


def save_transition_model(path, model: TransitionModel, pseudocount: int = 1) -> None:
    meta = (
        f"# k={model.k} max_shift={model.max_shift} "
        f"mode={model.mode} pseudocount={pseudocount}\n"
    )
    with atomic_write(path) as fh:
        fh.write(meta)
        if model.mode == "per-order":
            fh.write("order\tprob\n")
            for j, p in enumerate(model.order_probs):
                fh.write(f"{j}\t{p:.17g}\n")
            return
        fh.write("source_kmer\ttarget_kmer\tprob\n")
        for src in range(4**model.k):
            for tgt, prob in model.out_edges(src):
                fh.write(f"{decode_kmer(src, model.k)}\t{decode_kmer(tgt, model.k)}\t{prob:.17g}\n")


def _parse_meta(line: str, path) -> dict:
    if not line.startswith("#"):
        raise ValueError(f"{path}: missing metadata line")
    meta: dict = {}
    for token in line[1:].split():
        key, _, value = token.partition("=")
        meta[key] = value
    for key in ("k", "max_shift", "mode", "pseudocount"):
        if key not in meta:
            raise ValueError(f"{path}: metadata line lacks {key}")
    return meta


def load_transition_model(path) -> TransitionModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty model file")
    meta = _parse_meta(lines[0], path)
    k, max_shift = int(meta["k"]), int(meta["max_shift"])
    mode = meta["mode"]
    if mode not in MODES:
        raise ValueError(f"{path}: unknown mode {mode!r}")

    header = lines[1] if len(lines) > 1 else ""
    if mode == "per-order":
        if header != "order\tprob":
            raise ValueError(f"{path}: expected header 'order\\tprob', got {header!r}")
        probs = np.zeros(max_shift + 1)
        seen = np.zeros(max_shift + 1, dtype=bool)
        for lineno, line in enumerate(lines[2:], start=3):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(fields)}")
            j = int(fields[0])
            if not 0 <= j <= max_shift:
                raise ValueError(f"{path}:{lineno}: order {j} outside [0, {max_shift}]")
            if seen[j]:
                raise ValueError(f"{path}:{lineno}: duplicate order {j}")
            seen[j] = True
            probs[j] = float(fields[1])
        if not seen.all():
            raise ValueError(f"{path}: missing order rows {np.flatnonzero(~seen).tolist()}")
        return TransitionModel.per_order(k, order_probs=probs)

    m = 4**k
    tables = [np.zeros(m)]
    for j in range(1, max_shift + 1):
        tables.append(np.zeros((m, 4**j)))
    if header != "source_kmer\ttarget_kmer\tprob":
        raise ValueError(
            f"{path}: expected header 'source_kmer\\ttarget_kmer\\tprob', got {header!r}"
        )
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(fields)}")
        src, tgt = encode_kmer(fields[0]), encode_kmer(fields[1])
        if len(fields[0]) != k or len(fields[1]) != k:
            raise ValueError(f"{path}:{lineno}: k-mers must have length {k}")
        j = smallest_shift(src, tgt, k, max_shift)
        if j is None:
            raise ValueError(
                f"{path}:{lineno}: {fields[0]} -> {fields[1]} is not reachable "
                f"with max shift {max_shift}"
            )
        prob = float(fields[2])
        if j == 0:
            tables[0][src] += prob
        else:
            tables[j][src, tgt & (4**j - 1)] += prob
    return TransitionModel(k, tables, mode="per-transition")
