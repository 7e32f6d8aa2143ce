"""K-mer HMM building blocks: state space, Gaussian emissions, transitions.

The hidden states are the 4**k k-mers (one per pore context) plus a silent
start state that fans out uniformly. An event's mean current is emitted from
a normal distribution whose parameters come from the per-k-mer pore table,
adjusted by read-specific scaling. Transitions shift the k-mer context by
0 bases (split), 1 base (move) or up to ``max_shift`` bases (skips).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .kmers import decode_kmer, encode_kmer

# Silent start state; transitions to every emitting state with equal probability.
START_STATE = -1

# Untrained defaults: stay, move, skip-2. Move-dominant to match the intended
# one-base-per-event semantics; training overrides these.
DEFAULT_ORDER_PROBS = (0.1, 0.8, 0.1)

GAP = "-"


def smallest_shift(prev: int, cur: int, k: int, max_shift: int) -> int | None:
    """Smallest shift order j in [0, max_shift] connecting two k-mer codes.

    Order j requires the last k-j bases of ``prev`` to equal the first k-j
    bases of ``cur``. Returns None when no order up to ``max_shift`` fits.
    """
    if prev == cur:
        return 0
    for j in range(1, max_shift + 1):
        if prev & (4 ** (k - j) - 1) == cur >> (2 * j):
            return j
    return None


@dataclass(frozen=True)
class KmerStateSpace:
    """All k-mers over ACGT as integer-identified states, plus the silent start."""

    k: int

    def __post_init__(self):
        if not 1 <= self.k <= 16:
            raise ValueError(f"k must be in [1, 16], got {self.k}")

    @property
    def num_states(self) -> int:
        return 4**self.k

    def encode(self, kmer: str) -> int:
        if len(kmer) != self.k:
            raise ValueError(f"expected a {self.k}-mer, got {kmer!r}")
        return encode_kmer(kmer)

    def decode(self, state: int) -> str:
        return decode_kmer(state, self.k)

    def kmers(self):
        for code in range(self.num_states):
            yield decode_kmer(code, self.k)


@dataclass(frozen=True)
class ReadScaling:
    """Per-read calibration of the pore table: mean ``scale*mu + shift``, sd ``sigma*var``."""

    scale: float = 1.0
    shift: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not (math.isfinite(self.var) and self.var > 0):
            raise ValueError(f"var must be positive, got {self.var}")
        if not math.isfinite(self.shift):
            raise ValueError(f"shift must be finite, got {self.shift}")


class EventSequence:
    """One read's event stream: per-event mean currents plus read scaling."""

    def __init__(self, read_id: str, means, scaling: ReadScaling | None = None):
        means = np.asarray(means, dtype=np.float64)
        if means.ndim != 1 or means.size < 1:
            raise ValueError(f"read {read_id!r}: need at least one event")
        if not np.all(np.isfinite(means)):
            raise ValueError(f"read {read_id!r}: non-finite event mean")
        self.read_id = read_id
        self.means = means
        self.means.flags.writeable = False
        self.scaling = scaling if scaling is not None else ReadScaling()

    def __len__(self) -> int:
        return self.means.size

    def __repr__(self) -> str:
        return f"EventSequence({self.read_id!r}, {len(self)} events)"


class PoreModel:
    """Per-k-mer Gaussian emission parameters (mean and sd in picoamps)."""

    def __init__(self, k: int, level_mean, level_stdv):
        level_mean = np.asarray(level_mean, dtype=np.float64)
        level_stdv = np.asarray(level_stdv, dtype=np.float64)
        m = 4**k
        if level_mean.shape != (m,) or level_stdv.shape != (m,):
            raise ValueError(f"pore model for k={k} needs exactly {m} rows")
        if not np.all(level_stdv > 0):
            raise ValueError("all level standard deviations must be positive")
        self.k = k
        self.level_mean = level_mean
        self.level_stdv = level_stdv
        for arr in (self.level_mean, self.level_stdv):
            arr.flags.writeable = False

    @classmethod
    def from_rows(cls, k: int, rows: dict[str, tuple[float, float]]) -> "PoreModel":
        m = 4**k
        mean = np.empty(m)
        stdv = np.empty(m)
        seen = np.zeros(m, dtype=bool)
        for kmer, (mu, sigma) in rows.items():
            code = encode_kmer(kmer)
            if len(kmer) != k:
                raise ValueError(f"k-mer {kmer!r} does not have length {k}")
            if seen[code]:
                raise ValueError(f"duplicate k-mer {kmer!r}")
            seen[code] = True
            mean[code] = mu
            stdv[code] = sigma
        if not seen.all():
            missing = decode_kmer(int(np.flatnonzero(~seen)[0]), k)
            raise ValueError(f"pore model incomplete: missing k-mer {missing}")
        return cls(k, mean, stdv)

    def params(self, kmer: str) -> tuple[float, float]:
        """(mean, sd) for a k-mer string; raises KeyError for unknown k-mers."""
        try:
            code = encode_kmer(kmer)
        except ValueError as exc:
            raise KeyError(str(exc)) from None
        if len(kmer) != self.k:
            raise KeyError(f"{kmer!r} is not a {self.k}-mer")
        return float(self.level_mean[code]), float(self.level_stdv[code])


def emission_log_density(
    pore: PoreModel, kmer: str, event_mean: float, scaling: ReadScaling
) -> float:
    """Log density of observing ``event_mean`` from a k-mer's scaled pore gaussian."""
    mu, sigma = pore.params(kmer)
    loc = scaling.scale * mu + scaling.shift
    sd = sigma * scaling.var
    z = (event_mean - loc) / sd
    return -0.5 * z * z - math.log(sd * math.sqrt(2.0 * math.pi))


class TransitionModel:
    """Outgoing transition probabilities over k-mer states, organised by shift order.

    ``tables[0]`` has shape (m,) and holds each state's self (split) probability.
    ``tables[j]`` for j >= 1 has shape (m, 4**j); entry [x, b] is the probability
    of leaving state x with a shift of j bases whose j new bases encode to b.
    A per-order model shares one probability per order across all states,
    divided uniformly among the 4**j shift-j targets.
    """

    def __init__(self, k: int, tables, mode: str, order_probs=None):
        if mode not in ("per-order", "per-transition"):
            raise ValueError(f"unknown mode {mode!r}")
        m = 4**k
        tables = [np.asarray(t, dtype=np.float64) for t in tables]
        if len(tables) < 2:
            raise ValueError("need at least split and move orders")
        max_shift = len(tables) - 1
        if max_shift > k:
            raise ValueError(f"max shift {max_shift} exceeds k={k}")
        if tables[0].shape != (m,):
            raise ValueError("split table must have one entry per state")
        for j in range(1, max_shift + 1):
            if tables[j].shape != (m, 4**j):
                raise ValueError(f"order-{j} table must have shape ({m}, {4 ** j})")
        self.k = k
        self.max_shift = max_shift
        self.mode = mode
        self.tables = tables
        self.order_probs = None if order_probs is None else np.asarray(order_probs, float)
        for t in self.tables:
            t.flags.writeable = False
        rows = self.row_sums()
        if np.max(np.abs(rows - 1.0)) > 1e-9:
            worst = int(np.argmax(np.abs(rows - 1.0)))
            raise ValueError(
                f"transition rows must sum to 1; state {worst} sums to {rows[worst]!r}"
            )
        self._aggregate = None

    @classmethod
    def per_order(cls, k: int, order_probs=DEFAULT_ORDER_PROBS) -> "TransitionModel":
        """Shared per-order model: order j's total probability split over 4**j targets."""
        probs = np.asarray(order_probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError("order_probs must list stay, move, and any skip orders")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"order probabilities must be >= 0 and sum to 1, got {probs}")
        m = 4**k
        tables = [np.full(m, probs[0])]
        for j in range(1, probs.size):
            tables.append(np.full((m, 4**j), probs[j] / 4**j))
        return cls(k, tables, mode="per-order", order_probs=probs)

    def row_sums(self) -> np.ndarray:
        total = self.tables[0].copy()
        for j in range(1, self.max_shift + 1):
            total += self.tables[j].sum(axis=1)
        return total

    def targets_of(self, state: int, order: int) -> np.ndarray:
        """Target state codes of ``state`` under shift ``order``, indexed by new-base code."""
        m = 4**self.k
        if order == 0:
            return np.array([state])
        width = 4**order
        prefix = (state % 4 ** (self.k - order)) * width
        return prefix + np.arange(width)

    def out_edges(self, state: int) -> list[tuple[int, float]]:
        """Aggregated outgoing distribution of one emitting state, sorted by target."""
        acc: dict[int, float] = {}
        acc[state] = float(self.tables[0][state])
        for j in range(1, self.max_shift + 1):
            probs = self.tables[j][state]
            for b, target in enumerate(self.targets_of(state, j)):
                t = int(target)
                acc[t] = acc.get(t, 0.0) + float(probs[b])
        return sorted(acc.items())

    def aggregate_matrix(self) -> sparse.csc_matrix:
        """Dense-free (m x m) matrix of total state-to-state probabilities.

        Parallel transitions between the same pair of states (possible for
        periodic k-mers) are summed, which is what path-level inference needs.
        """
        if self._aggregate is None:
            m = 4**self.k
            rows, cols, data = [], [], []
            all_states = np.arange(m)
            rows.append(all_states)
            cols.append(all_states)
            data.append(self.tables[0])
            for j in range(1, self.max_shift + 1):
                width = 4**j
                prefix = (all_states % 4 ** (self.k - j)) * width
                targets = prefix[:, None] + np.arange(width)[None, :]
                rows.append(np.repeat(all_states, width))
                cols.append(targets.reshape(-1))
                data.append(self.tables[j].reshape(-1))
            coo = sparse.coo_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(m, m),
            )
            mat = coo.tocsc()
            mat.sum_duplicates()
            mat.sort_indices()
            self._aggregate = mat
        return self._aggregate


@dataclass(frozen=True)
class Hmm:
    """The assembled model: state space, emission table and transition structure."""

    space: KmerStateSpace
    pore: PoreModel
    transitions: TransitionModel

    def __post_init__(self):
        if not (self.space.k == self.pore.k == self.transitions.k):
            raise ValueError(
                f"inconsistent k: space={self.space.k}, pore={self.pore.k}, "
                f"transitions={self.transitions.k}"
            )

    @property
    def k(self) -> int:
        return self.space.k

    @property
    def num_states(self) -> int:
        return self.space.num_states


def make_hmm(pore: PoreModel, transitions: TransitionModel | None = None) -> Hmm:
    if transitions is None:
        transitions = TransitionModel.per_order(pore.k)
    return Hmm(KmerStateSpace(pore.k), pore, transitions)


def transitions_from(hmm: Hmm, state: int) -> list[tuple[int, float]]:
    """Complete outgoing distribution of a state as (target, probability) pairs.

    ``START_STATE`` fans out to every emitting state with probability 4**-k.
    """
    if state == START_STATE:
        m = hmm.num_states
        p = 1.0 / m
        return [(target, p) for target in range(m)]
    if not 0 <= state < hmm.num_states:
        raise ValueError(f"no such state: {state}")
    return hmm.transitions.out_edges(state)


# ---------------------------------------------------------------------------
# File formats

PORE_MODEL_HEADER = ["kmer", "mu", "sigma"]


def write_pore_model(path, pore: PoreModel) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(PORE_MODEL_HEADER) + "\n")
        for code in range(4**pore.k):
            kmer = decode_kmer(code, pore.k)
            fh.write(f"{kmer}\t{pore.level_mean[code]:.17g}\t{pore.level_stdv[code]:.17g}\n")


def load_pore_model(path) -> PoreModel:
    """Read a ``kmer<TAB>mu<TAB>sigma`` table covering all 4**k k-mers."""
    rows: dict[str, tuple[float, float]] = {}
    k = None
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != PORE_MODEL_HEADER:
            raise ValueError(f"{path}: expected header {PORE_MODEL_HEADER}, got {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            kmer, mu, sigma = parts[0], float(parts[1]), float(parts[2])
            if sigma <= 0:
                raise ValueError(f"{path}:{lineno}: sigma must be positive")
            if kmer in rows:
                raise ValueError(f"{path}:{lineno}: duplicate k-mer {kmer}")
            if k is None:
                k = len(kmer)
            rows[kmer] = (mu, sigma)
    if k is None:
        raise ValueError(f"{path}: empty pore model")
    return PoreModel.from_rows(k, rows)


def write_events(path, reads: list[EventSequence]) -> None:
    with open(path, "w") as fh:
        for read in reads:
            record = {
                "read_id": read.read_id,
                "scale": read.scaling.scale,
                "shift": read.scaling.shift,
                "var": read.scaling.var,
                "events": [float(x) for x in read.means],
            }
            fh.write(json.dumps(record) + "\n")


def load_events(path) -> list[EventSequence]:
    """Read one event sequence per JSON line."""
    reads = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                scaling = ReadScaling(
                    scale=record["scale"], shift=record["shift"], var=record["var"]
                )
                read = EventSequence(record["read_id"], record["events"], scaling)
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad event record: {exc}") from None
            reads.append(read)
    return reads
