#!/usr/bin/env python3
"""Run the full verdict pipeline over every built-in scene and write the
JSON reports plus a one-line-per-scene summary.

Usage: python scripts/run_corpus.py [outdir]
"""

import json
import sys
import time
from pathlib import Path

from osclab import corpus
from osclab.osculate import verify_theorem


def main() -> int:
    outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "out/corpus")
    outdir.mkdir(parents=True, exist_ok=True)
    summary = []
    for name in corpus.names():
        scene = corpus.load(name)
        start = time.perf_counter()
        report = verify_theorem(scene, seed=0)
        elapsed = time.perf_counter() - start
        (outdir / f"{name}.json").write_text(
            json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n")
        step = "-" if report.first_failure is None else report.first_failure["step"]
        print(f"{name:24s} {report.verdict:18s} {step:12s} {elapsed:6.1f}s")
        summary.append({"scene": name, "verdict": report.verdict,
                        "first_failure": step, "seconds": round(elapsed, 2)})
    (outdir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"reports in {outdir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
