"""Seeded bootstrapping runs on a toy pair; prints the progress trace of each run."""

import argparse
import json
import tempfile
from pathlib import Path

from qclab.cli import main as qclab

CONFIG = {"toy": "dictator", "K": 4, "k": 1, "L": 1, "tau": "1",
          "settled_value": 5, "unsettled_floor": 1, "runs": 3}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--toy", default=CONFIG["toy"])
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "config.json"
        trace = Path(tmp) / "trace.txt"
        cfg.write_text(json.dumps({**CONFIG, "toy": args.toy}))
        code = qclab(["bootstrap-sim", "--config", str(cfg), "--seed", str(args.seed), "--trace", str(trace)])
        print("# step phase settled otllr progress dummy")
        print(trace.read_text(), end="")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
