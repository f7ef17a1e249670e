"""Run the full pipeline on a planted synthetic corpus and print the report.

    python3 scripts/run_planted_experiment.py --out runs/planted --seed 3
"""

import argparse
import json
from pathlib import Path

from nextsum.cli import main


def run(out: Path, seed: int, pairs: int, topics: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    corpus = out / "planted.jsonl"
    cfg = out / "config.json"
    n_dev = round(pairs * 3 / 31)
    cfg.write_text(json.dumps({"split": [(pairs - 2 * n_dev) / pairs, n_dev / pairs, n_dev / pairs]}))
    code = main(["synth", "--out", str(corpus), "--pairs", str(pairs), "--topics", str(topics), "--seed", str(seed)])
    if code:
        return code
    code = main(["run-all", "--config", str(cfg), "--corpus", str(corpus), "--out", str(out / "work")])
    if code == 0:
        print((out / "work" / "report.txt").read_text())
    return code


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/planted"))
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--pairs", type=int, default=620)
    ap.add_argument("--topics", type=int, default=6)
    a = ap.parse_args()
    raise SystemExit(run(a.out, a.seed, a.pairs, a.topics))
