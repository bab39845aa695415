#!/usr/bin/env python3
"""End-to-end demo at housing-dataset scale (506 observations, 13 features).

Generates an EAV fixture, trains the SQL-defined linear model in process,
writes all artifacts (emitted TF script, export SQL, weights, loss trace),
and prints a loss-curve summary.

Usage: python scripts/run_boston_demo.py [workdir]
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from make_fixtures import make_boston

from sqlgrad import pipeline
from sqlgrad.cli import main as cli_main


def main():
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(
        prefix="sqlgrad_boston_"))
    make_boston(workdir)
    data_dir = workdir / "boston"
    out_dir = workdir / "out"

    common = ["--sql", str(data_dir / "model.sql"),
              "--config", str(data_dir / "config.cfg"),
              "--data-dir", str(data_dir), "--out-dir", str(out_dir)]
    assert cli_main(["train", *common]) == 0
    assert cli_main(["translate", *common]) == 0

    bundle = pipeline.prepare(data_dir / "model.sql", data_dir / "config.cfg", data_dir)
    trace = [(int(it), float(loss)) for it, loss in
             (line.split(",") for line in
              (out_dir / "loss_trace.csv").read_text().splitlines()[1:])]
    first, last = trace[0][1], trace[-1][1]
    print(f"observations: {bundle.features.rows}, features: {bundle.features.cols}")
    print(f"iterations: {len(trace)}, loss {first:.4f} -> {last:.4f} "
          f"({(1 - last / first) * 100:.1f}% reduction)")
    for it, loss in trace[:: max(len(trace) // 10, 1)]:
        print(f"  iter {it:>6} objective {loss:.6f}")
    print(f"artifacts in {out_dir}")
    print(f"run the emitted script with: DATA_DIR={out_dir} python {out_dir}/model_train.py")


if __name__ == "__main__":
    main()
