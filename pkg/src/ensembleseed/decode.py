"""Decoding kernels: scaled forward pass, Viterbi, posterior path sampling.

The forward pass keeps each column rescaled to sum 1 (log-space would lose the
within-column ratios that traceback sampling needs); Viterbi runs in log space.
Both exploit the regular shift structure of the state graph, so the cost per
event is O(m * out_degree) rather than O(m^2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .io import atomic_write, read_fasta
from .kmers import decode_kmer
from .pore_model import Hmm, EventSequence, smallest_shift


class IllegalPathError(ValueError):
    """A state path contains a pair not connected by any allowed shift."""


@dataclass
class StatePath:
    """One k-mer state per event, with the log joint probability of (path, events)."""

    states: np.ndarray
    log_joint: float

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64)

    def __len__(self) -> int:
        return self.states.size


@dataclass
class ForwardMatrix:
    """Per-event forward columns, rescaled so each column sums to 1.

    The true forward probability is ``columns[i][s] * prod(scale_factors[:i+1])``;
    the factors are kept as logs so the total likelihood never over- or
    underflows.
    """

    columns: np.ndarray
    log_scale_factors: np.ndarray

    @property
    def scale_factors(self) -> np.ndarray:
        return np.exp(self.log_scale_factors)

    @property
    def log_likelihood(self) -> float:
        return float(self.log_scale_factors.sum())


@dataclass
class BaseCall:
    """A decoded DNA sequence plus the (offset, length) span each event contributed."""

    sequence: str
    event_spans: list[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass
class ReadEnsemble:
    """Viterbi call plus posterior sample calls for one read."""

    read_id: str
    viterbi: BaseCall
    samples: list[BaseCall]


def emission_log_matrix(hmm: Hmm, events: EventSequence) -> np.ndarray:
    """(n_events, n_states) log densities of each event under each state."""
    scaling = events.scaling
    loc = scaling.scale * hmm.pore.level_mean + scaling.shift
    sd = hmm.pore.level_stdv * scaling.var
    z = (events.means[:, None] - loc[None, :]) / sd[None, :]
    return -0.5 * z * z - np.log(sd * np.sqrt(2.0 * np.pi))[None, :]


def forward(hmm: Hmm, events: EventSequence) -> ForwardMatrix:
    """Scaled forward pass starting from the silent start state's uniform fan-out."""
    logpdf = emission_log_matrix(hmm, events)
    n, m = logpdf.shape
    col_max = logpdf.max(axis=1)
    eprob = np.exp(logpdf - col_max[:, None])

    trans = hmm.transitions
    tables = trans.tables
    k, max_shift = trans.k, trans.max_shift

    columns = np.empty((n, m))
    log_sf = np.empty(n)

    raw = eprob[0] / m
    total = raw.sum()
    columns[0] = raw / total
    log_sf[0] = np.log(total) + col_max[0]

    for i in range(1, n):
        prev = columns[i - 1]
        raw = tables[0] * prev
        for j in range(1, max_shift + 1):
            width = 4**j
            # Edge (x, b) lands on the state made of x's last k-j bases plus b,
            # so summing out x's leading j bases realigns mass onto targets.
            spread = (prev[:, None] * tables[j]).reshape(width, m // width, width)
            raw += spread.sum(axis=0).reshape(m)
        raw *= eprob[i]
        total = raw.sum()
        columns[i] = raw / total
        log_sf[i] = np.log(total) + col_max[i]
    return ForwardMatrix(columns=columns, log_scale_factors=log_sf)


def viterbi(hmm: Hmm, events: EventSequence) -> StatePath:
    """Most probable state path; ties break toward the lowest state id."""
    logpdf = emission_log_matrix(hmm, events)
    n, m = logpdf.shape

    agg = hmm.transitions.aggregate_matrix()
    indptr = agg.indptr
    pred = agg.indices  # rows, sorted ascending within each target column
    with np.errstate(divide="ignore"):
        log_t = np.log(agg.data)
    col_sizes = np.diff(indptr)
    nnz = pred.size
    edge_pos = np.arange(nnz)

    scores = logpdf[0] - np.log(m)
    backptr = np.empty((n, m), dtype=np.int32)
    for i in range(1, n):
        vals = scores[pred] + log_t
        best = np.maximum.reduceat(vals, indptr[:-1])
        hit = np.where(vals == np.repeat(best, col_sizes), edge_pos, nnz)
        backptr[i] = pred[np.minimum.reduceat(hit, indptr[:-1])]
        scores = logpdf[i] + best

    states = np.empty(n, dtype=np.int64)
    states[-1] = int(np.argmax(scores))
    for i in range(n - 1, 0, -1):
        states[i - 1] = backptr[i, states[i]]
    return StatePath(states=states, log_joint=float(scores[states[-1]]))


def aggregate_transition_probs(hmm: Hmm, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Total transition probability for each (source, target) pair of state codes.

    Sums parallel shift orders connecting the same pair, which matters for
    periodic k-mers.
    """
    trans = hmm.transitions
    k = trans.k
    total = np.where(sources == targets, trans.tables[0][sources], 0.0)
    for j in range(1, trans.max_shift + 1):
        fits = (sources & (4 ** (k - j) - 1)) == (targets >> (2 * j))
        total = total + np.where(fits, trans.tables[j][sources, targets & (4**j - 1)], 0.0)
    return total


def path_log_joint(hmm: Hmm, events: EventSequence, states: np.ndarray) -> float:
    """Log P(path, events) for an explicit state path."""
    states = np.asarray(states, dtype=np.int64)
    scaling = events.scaling
    loc = scaling.scale * hmm.pore.level_mean[states] + scaling.shift
    sd = hmm.pore.level_stdv[states] * scaling.var
    z = (events.means - loc) / sd
    emit = np.sum(-0.5 * z * z - np.log(sd * np.sqrt(2.0 * np.pi)))
    trans = aggregate_transition_probs(hmm, states[:-1], states[1:])
    if np.any(trans <= 0):
        raise IllegalPathError("path contains a zero-probability transition")
    return float(-np.log(hmm.num_states) + emit + np.log(trans).sum())


def sample_paths(
    hmm: Hmm,
    events: EventSequence,
    fwd: ForwardMatrix,
    count: int,
    seed,
) -> list[StatePath]:
    """Draw independent exact posterior path samples by stochastic traceback.

    The forward matrix is computed once and shared across draws: the final
    state is drawn proportionally to the last column, then each earlier state
    proportionally to its forward value times the transition probability into
    the already-fixed successor. ``seed`` may be an int or a numpy Generator;
    a given seed yields a reproducible list.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return []
    F = fwd.columns
    n, m = F.shape
    if n != len(events) or m != hmm.num_states:
        raise ValueError("forward matrix does not match this model and read")

    rng = np.random.default_rng(seed)
    trans = hmm.transitions
    tables = trans.tables
    k, max_shift = trans.k, trans.max_shift
    draws = np.arange(count)

    cum = np.cumsum(F[-1])
    u = rng.random(count) * cum[-1]
    cur = np.minimum(np.searchsorted(cum, u, side="right"), m - 1).astype(np.int64)

    paths = np.empty((count, n), dtype=np.int64)
    paths[:, -1] = cur
    for i in range(n - 2, -1, -1):
        col = F[i]
        cands = [cur[:, None]]
        weights = [(col[cur] * tables[0][cur])[:, None]]
        for j in range(1, max_shift + 1):
            width = 4**j
            # Predecessors under shift j share their last k-j bases with
            # cur's first k-j bases; the leading j bases are free.
            base = cur >> (2 * j)
            pool = base[:, None] + (np.arange(width) * 4 ** (k - j))[None, :]
            fresh = cur & (width - 1)
            weights.append(col[pool] * tables[j][pool, fresh[:, None]])
            cands.append(pool)
        pool = np.concatenate(cands, axis=1)
        cw = np.cumsum(np.concatenate(weights, axis=1), axis=1)
        u = rng.random(count) * cw[:, -1]
        pick = np.minimum((cw <= u[:, None]).sum(axis=1), pool.shape[1] - 1)
        cur = pool[draws, pick]
        paths[:, i] = cur

    logpdf = emission_log_matrix(hmm, events)
    emit = logpdf[np.arange(n)[None, :], paths].sum(axis=1)
    step = aggregate_transition_probs(
        hmm, paths[:, :-1].reshape(-1), paths[:, 1:].reshape(-1)
    ).reshape(count, n - 1)
    joints = -np.log(m) + emit + np.log(step).sum(axis=1)
    return [StatePath(states=paths[d], log_joint=float(joints[d])) for d in range(count)]


def path_to_sequence(path: StatePath, k: int, max_shift: int | None = None) -> BaseCall:
    """Translate a state path to DNA using the shortest consistent interpretation.

    The first event contributes its whole k-mer; every later event contributes
    the last j bases of its k-mer, where j is the smallest shift linking it to
    its predecessor (0 for splits). Spans record each event's slice of the
    output.
    """
    states = path.states
    limit = k if max_shift is None else max_shift
    first = int(states[0])
    parts = [decode_kmer(first, k)]
    spans = [(0, k)]
    pos = k
    prev = first
    for idx in range(1, states.size):
        cur = int(states[idx])
        j = smallest_shift(prev, cur, k, limit)
        if j is None:
            raise IllegalPathError(
                f"events {idx - 1}..{idx}: {decode_kmer(prev, k)} -> {decode_kmer(cur, k)} "
                f"needs a shift beyond {limit}"
            )
        if j:
            parts.append(decode_kmer(cur & (4**j - 1), j))
        spans.append((pos, j))
        pos += j
        prev = cur
    return BaseCall(sequence="".join(parts), event_spans=spans)


# ---------------------------------------------------------------------------
# Base-call files: FASTA plus a JSON-lines sidecar of per-event spans.


def _call_label(kind: str, index: int | None) -> str:
    return "viterbi" if kind == "viterbi" else f"sample{index}"


def write_basecalls(fasta_path, spans_path, ensembles: list[ReadEnsemble]) -> None:
    with atomic_write(fasta_path) as fa, atomic_write(spans_path) as sp:
        for ens in ensembles:
            calls = [("viterbi", None, ens.viterbi)]
            calls += [("sample", i, call) for i, call in enumerate(ens.samples)]
            for kind, index, call in calls:
                fa.write(f">{ens.read_id} {_call_label(kind, index)}\n")
                for start in range(0, len(call.sequence), 80):
                    fa.write(call.sequence[start : start + 80] + "\n")
                sp.write(
                    json.dumps(
                        {
                            "read_id": ens.read_id,
                            "call": kind,
                            "index": index,
                            "spans": [[o, l] for o, l in call.event_spans],
                        }
                    )
                    + "\n"
                )


def load_basecalls(fasta_path, spans_path) -> list[ReadEnsemble]:
    spans: dict[tuple[str, str], list[tuple[int, int]]] = {}
    with open(spans_path) as fh:
        for line in fh:
            rec = json.loads(line)
            key = (rec["read_id"], _call_label(rec["call"], rec["index"]))
            spans[key] = [(o, l) for o, l in rec["spans"]]

    ensembles: list[ReadEnsemble] = []
    by_read: dict[str, ReadEnsemble] = {}
    for header, seq in read_fasta(fasta_path):
        read_id, _, label = header.partition(" ")
        key = (read_id, label)
        if key not in spans:
            raise ValueError(f"{fasta_path}: no spans recorded for {header!r}")
        call = BaseCall(sequence=seq, event_spans=spans[key])
        if read_id not in by_read:
            by_read[read_id] = ReadEnsemble(read_id=read_id, viterbi=None, samples=[])
            ensembles.append(by_read[read_id])
        if label == "viterbi":
            by_read[read_id].viterbi = call
        else:
            by_read[read_id].samples.append(call)
    for ens in ensembles:
        if ens.viterbi is None:
            raise ValueError(f"{fasta_path}: read {ens.read_id} has no viterbi call")
    return ensembles
