"""Regenerate the pinned regression values under tests/data/.

Run from the repository root after any deliberate change to the simulator
defaults or the decoding kernels:

    python3 tools/freeze_pins.py

It rebuilds the fixed-seed evaluation corpus with the same code the test
suite uses and rewrites pinned_viterbi_row.json and identity_band.json.
Commit the result together with the change that moved the numbers.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from _corpus import build_pinned_corpus  # noqa: E402

from ensembleseed.evaluate import SINGLE_13_VITERBI, evaluate  # noqa: E402

BAND_HALF_WIDTH = 0.03


def main() -> int:
    data_dir = ROOT / "tests" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)

    corpus = build_pinned_corpus()
    print(f"corpus built in {corpus.build_seconds:.0f}s, {len(corpus.windows)} windows")

    row = evaluate(corpus.windows, corpus.index13, SINGLE_13_VITERBI, 1, 1)
    pin = {
        "strategy": row.strategy,
        "k": row.k,
        "tp": row.tp,
        "windows": row.windows,
        "fp": row.fp,
    }
    (data_dir / "pinned_viterbi_row.json").write_text(json.dumps(pin, indent=2) + "\n")
    print(f"pinned viterbi row: {pin}")

    mean = float(corpus.identities.mean())
    band = {
        "lo": round(mean - BAND_HALF_WIDTH, 3),
        "hi": round(mean + BAND_HALF_WIDTH, 3),
        "mean_at_freeze": round(mean, 4),
    }
    (data_dir / "identity_band.json").write_text(json.dumps(band, indent=2) + "\n")
    print(f"identity band: {band}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
