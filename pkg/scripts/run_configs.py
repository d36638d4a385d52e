"""Run the full pipeline on each shipped config and summarize the verdicts."""

import argparse
from pathlib import Path

from micropolar.cli import run_experiment
from micropolar.config import load_config, with_output_dir

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*", type=Path, default=sorted(CONFIGS.glob("*.txt")))
    ap.add_argument("--out", type=Path, default=Path("runs"))
    args = ap.parse_args()

    for path in args.configs:
        cfg = with_output_dir(load_config(path), str(args.out / path.stem))
        _, report = run_experiment(cfg)
        verdict = "PASS" if report.all_pass else "FAIL"
        print(f"{path.stem:24s} {verdict}  -> {cfg.output_dir}")
        for line in report.lines:
            if line.startswith("RESULT"):
                print("    " + line)


if __name__ == "__main__":
    main()
