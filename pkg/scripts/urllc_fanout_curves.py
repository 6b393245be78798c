"""URLLC + tabular QL learning curves for n in {1, 2, 5} fanout actions.

Writes runs/urllc_fanout/<curve>/metrics_seed*.csv and summary.csv, then ranks the
mean curves by convergence speed and area.
"""

import argparse
import time
from pathlib import Path

from twinforge.harness import load_config, run_grid
from twinforge.harness.metrics import compare_curves, format_report, read_curve

ROOT = Path(__file__).resolve().parents[1]

CURVES = {
    "n1": ["strategy.kind=physical", "strategy.n=1"],
    "n2": ["strategy.kind=multiaction", "strategy.n=2"],
    "n5": ["strategy.kind=multiaction", "strategy.n=5"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "urllc_ql_fanout.cfg"))
    ap.add_argument("--output-dir", default="runs/urllc_fanout")
    ap.add_argument("--episodes", type=int)
    ap.add_argument("--seeds")
    args = ap.parse_args()

    overrides = []
    if args.episodes:
        overrides.append(f"episodes={args.episodes}")
    if args.seeds:
        overrides.append(f"seeds={args.seeds}")
    cfg = load_config(args.config, overrides)
    t0 = time.perf_counter()
    run_grid(cfg, CURVES, args.output_dir)
    print(f"ran {len(CURVES)} curves x {len(cfg.seeds)} seeds in {time.perf_counter() - t0:.1f} s")

    curves = {name: read_curve(Path(args.output_dir) / name / "summary.csv") for name in CURVES}
    for crit in ("episodes_to_fraction(0.95)", "auc"):
        print(format_report(crit, compare_curves(curves, crit)))


if __name__ == "__main__":
    main()
