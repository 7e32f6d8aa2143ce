"""Windowed evaluation: padding, hit classification, FP dedup, parameter sweeps.

Reads are cut into fixed-size event windows. Within a window the Viterbi call
and every sample are padded per event to a common width, giving all rows the
same event-column geometry; seeds then carry an event-column query coordinate
that is comparable across samples. A window scores a true positive when any
seed (or chain) lands inside its true reference interval on the right strand;
everything else is clustered greedily and counted as false positives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decode import ReadEnsemble, StatePath
from .io import atomic_write
from .pore_model import GAP
from .seeding import (
    KmerIndex,
    chain_hits,
    collect_ensemble_kmers,
    find_hits,
)
from .train import infer_orders

DEFAULT_WINDOW_SIZE = 500
DEFAULT_DEDUP_RADIUS = 10

TruthSet = dict[str, tuple[int, int, str]]


@dataclass(eq=False)
class Window:
    """One window of events with padded rows and its true reference interval."""

    window_id: str
    read_id: str
    event_range: tuple[int, int]
    viterbi_row: str
    sample_rows: list[str]
    event_offsets: np.ndarray
    truth: tuple[int, int, str]
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def width(self) -> int:
        return int(self.event_offsets[-1])


def _window_rows(calls, a: int, b: int) -> tuple[list[str], np.ndarray]:
    """Pad each call's event contributions in [a, b) to the per-event maximum."""
    pieces = []
    widths = np.zeros(b - a, dtype=np.int64)
    for call in calls:
        spans = call.event_spans[a:b]
        texts = [call.sequence[off : off + ln] for off, ln in spans]
        lens = np.fromiter((len(t) for t in texts), dtype=np.int64, count=b - a)
        np.maximum(widths, lens, out=widths)
        pieces.append(texts)
    rows = [
        "".join(t + GAP * (w - len(t)) for t, w in zip(texts, widths.tolist()))
        for texts in pieces
    ]
    offsets = np.concatenate([[0], np.cumsum(widths)])
    return rows, offsets


def build_windows(
    ensemble: ReadEnsemble,
    truth: tuple[str, int, int, str],
    true_path: StatePath,
    k: int,
    window_size: int = DEFAULT_WINDOW_SIZE,
) -> list[Window]:
    """Split one read into disjoint full windows, padding rows per event.

    The window's true interval restricts the read's interval using the
    cumulative per-event shifts of the generating path, so it covers exactly
    the k-mer spans of the window's events.
    """
    if window_size < 1:
        raise ValueError(f"window size must be >= 1, got {window_size}")
    calls = [ensemble.viterbi] + list(ensemble.samples)
    n_events = len(true_path.states)
    for call in calls:
        if not call.event_spans:
            raise ValueError(f"read {ensemble.read_id}: base call lacks event spans")
        if len(call.event_spans) != n_events:
            raise ValueError(
                f"read {ensemble.read_id}: call has {len(call.event_spans)} event "
                f"spans, true path has {n_events}"
            )

    orders = infer_orders(true_path.states, k, k)
    if np.any(orders < 0):
        raise ValueError(f"read {ensemble.read_id}: true path is not a legal walk")
    rel = np.concatenate([[0], np.cumsum(orders)])
    contig, fs, fe, strand = truth

    windows: list[Window] = []
    for w in range(n_events // window_size):
        a, b = w * window_size, (w + 1) * window_size
        rows, offsets = _window_rows(calls, a, b)
        lo, hi = int(rel[a]), int(rel[b - 1]) + k
        if strand == "+":
            wtruth = (fs + lo, fs + hi, "+")
        else:
            wtruth = (fe - hi, fe - lo, "-")
        windows.append(
            Window(
                window_id=f"{ensemble.read_id}:{w}",
                read_id=ensemble.read_id,
                event_range=(a, b),
                viterbi_row=rows[0],
                sample_rows=rows[1:],
                event_offsets=offsets,
                truth=wtruth,
            )
        )
    return windows


def window_truth_set(windows: list[Window]) -> TruthSet:
    return {w.window_id: w.truth for w in windows}


def is_valid_hit(point, truth: tuple[int, int, str]) -> bool:
    """Valid iff the left endpoint lies inside the interval on the same strand."""
    start, end, strand = truth
    return point.strand == strand and start <= point.ref_pos < end


def _coords(point) -> tuple[int, int]:
    if hasattr(point, "point"):
        return point.point()
    return (int(point[0]), int(point[1]))


def greedy_dedup(points, radius: int = DEFAULT_DEDUP_RADIUS) -> list:
    """Greedy cluster representatives of one window's invalid left endpoints.

    Points are scanned in (query_col, ref_pos) order; a point is kept unless an
    already-kept point is within ``radius`` in BOTH coordinates. Strand is
    ignored: all of a window's invalid points form one pool.
    """
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    order = sorted(points, key=_coords)
    kept: list = []
    kept_coords: list[tuple[int, int]] = []
    for point in order:
        q, r = _coords(point)
        clash = False
        for sq, sr in reversed(kept_coords):
            if sq < q - radius:
                break
            if abs(sq - q) <= radius and abs(sr - r) <= radius:
                clash = True
                break
        if not clash:
            kept.append(point)
            kept_coords.append((q, r))
    return kept


@dataclass(frozen=True)
class StrategyConfig:
    """What to look up (seed length) and what counts as a match (hit or chain)."""

    kind: str  # "single" or "chain"
    seed_k: int
    chain_len: int = 3
    min_gap: int = 10
    max_gap: int = 50
    use_viterbi: bool = False

    def __post_init__(self):
        if self.kind not in ("single", "chain"):
            raise ValueError(f"kind must be 'single' or 'chain', got {self.kind!r}")

    @property
    def label(self) -> str:
        base = "single-kmer" if self.kind == "single" else "chain"
        return base + ("-viterbi" if self.use_viterbi else "")


SINGLE_13 = StrategyConfig(kind="single", seed_k=13)
CHAIN_10 = StrategyConfig(kind="chain", seed_k=10)
SINGLE_13_VITERBI = StrategyConfig(kind="single", seed_k=13, use_viterbi=True)
CHAIN_10_VITERBI = StrategyConfig(kind="chain", seed_k=10, use_viterbi=True)


@dataclass(frozen=True)
class EvalRow:
    strategy: str
    k: int
    t: int
    n: int
    tp: int
    windows: int
    sn: float
    fp: int

    def __post_init__(self):
        if not 0.0 <= self.sn <= 1.0:
            raise ValueError(f"Sn must be in [0, 1], got {self.sn}")
        if self.fp < 0:
            raise ValueError(f"FP must be >= 0, got {self.fp}")


def window_points(window: Window, index: KmerIndex, config: StrategyConfig, t: int, n: int):
    """The window's candidate left endpoints under a strategy: hits or chain heads."""
    rows = [window.viterbi_row] if config.use_viterbi else None
    kmers = collect_ensemble_kmers(window, config.seed_k, n, t, rows=rows)
    hits = find_hits(index, kmers)
    if config.kind == "single":
        return hits
    chains = chain_hits(hits, config.chain_len, config.min_gap, config.max_gap)
    return [c.leftmost for c in chains]


def evaluate(
    windows: list[Window],
    index: KmerIndex,
    config: StrategyConfig,
    t: int,
    n: int,
    radius: int = DEFAULT_DEDUP_RADIUS,
) -> EvalRow:
    """Score one parameter point: TP over windows, plus deduped FP clusters.

    A Viterbi-mode config always scores its single Viterbi row (t and n only
    label the output row), so it serves as the fixed baseline in sweeps.
    """
    t_eff, n_eff = (1, 1) if config.use_viterbi else (t, n)
    tp = fp = 0
    for window in windows:
        points = window_points(window, index, config, t_eff, n_eff)
        invalid = [p for p in points if not is_valid_hit(p, window.truth)]
        if len(invalid) < len(points):
            tp += 1
        fp += len(greedy_dedup(invalid, radius))
    count = len(windows)
    sn = tp / count if count else 0.0
    return EvalRow(
        strategy=config.label, k=config.seed_k, t=t, n=n,
        tp=tp, windows=count, sn=sn, fp=fp,
    )


def sweep(
    windows: list[Window],
    index: KmerIndex,
    config: StrategyConfig,
    t_values,
    n_values,
    radius: int = DEFAULT_DEDUP_RADIUS,
) -> list[EvalRow]:
    """Full cartesian (t, n) grid for one strategy, t-major order.

    Ensemble grid points that cannot draw samples (n = 0, or t > n) become
    all-zero rows so the grid stays rectangular; a Viterbi-mode strategy is
    evaluated once and its row replicated across the grid.
    """
    rows: list[EvalRow] = []
    fixed: EvalRow | None = None
    count = len(windows)
    for t in t_values:
        for n in n_values:
            if config.use_viterbi:
                if fixed is None:
                    fixed = evaluate(windows, index, config, t, n, radius)
                rows.append(
                    EvalRow(
                        strategy=fixed.strategy, k=fixed.k, t=t, n=n,
                        tp=fixed.tp, windows=fixed.windows, sn=fixed.sn, fp=fixed.fp,
                    )
                )
            elif n == 0 or t > n:
                rows.append(
                    EvalRow(
                        strategy=config.label, k=config.seed_k, t=t, n=n,
                        tp=0, windows=count, sn=0.0, fp=0,
                    )
                )
            else:
                rows.append(evaluate(windows, index, config, t, n, radius))
    return rows


# ---------------------------------------------------------------------------
# Report files.

REPORT_HEADER = ["strategy", "k", "t", "n", "TP", "windows", "Sn", "FP"]


def write_report(path, rows: list[EvalRow]) -> None:
    with atomic_write(path) as fh:
        fh.write("\t".join(REPORT_HEADER) + "\n")
        for r in rows:
            fh.write(
                f"{r.strategy}\t{r.k}\t{r.t}\t{r.n}\t{r.tp}\t{r.windows}\t{r.sn:.3f}\t{r.fp}\n"
            )


def load_report(path) -> list[EvalRow]:
    rows: list[EvalRow] = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != REPORT_HEADER:
            raise ValueError(f"{path}: unexpected report header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(REPORT_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(REPORT_HEADER)} columns")
            rows.append(
                EvalRow(
                    strategy=fields[0], k=int(fields[1]), t=int(fields[2]),
                    n=int(fields[3]), tp=int(fields[4]), windows=int(fields[5]),
                    sn=float(fields[6]), fp=int(fields[7]),
                )
            )
    return rows


def write_points(path, rows: list[EvalRow]) -> None:
    """Plot-ready FP/TP pairs for one (strategy, t) slice, in n order."""
    with atomic_write(path) as fh:
        fh.write("FP\tTP\n")
        for r in sorted(rows, key=lambda r: r.n):
            fh.write(f"{r.fp}\t{r.tp}\n")


# ---------------------------------------------------------------------------
# Read-level identity, for sanity corridors rather than for scoring.


def levenshtein(a: str, b: str) -> int:
    if not a or not b:
        return max(len(a), len(b))
    ca = np.frombuffer(a.encode("ascii"), dtype=np.uint8)
    cb = np.frombuffer(b.encode("ascii"), dtype=np.uint8)
    idx = np.arange(cb.size + 1)
    cur = idx.copy()
    for i in range(ca.size):
        prev = cur
        cur = np.empty_like(prev)
        cur[0] = i + 1
        np.minimum(prev[:-1] + (cb != ca[i]), prev[1:] + 1, out=cur[1:])
        # close insertions: cur[j] = min over i <= j of cur[i] + (j - i)
        np.minimum(cur, idx + np.minimum.accumulate(cur - idx), out=cur)
    return int(cur[-1])


def alignment_identity(a: str, b: str) -> float:
    """1 - edit distance over the longer length; empty vs empty is 1.0."""
    longer = max(len(a), len(b))
    if longer == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longer
