"""UAV coverage + DQN learning curves for prediction depth k in {1, 3, 5}.

Seeds run in parallel up to TWINFORGE_THREADS processes.
"""

import argparse
import time
from pathlib import Path

from twinforge.harness import load_config, run_grid
from twinforge.harness.metrics import compare_curves, format_report, read_curve

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "uav_dqn_prediction.cfg"))
    ap.add_argument("--output-dir", default="runs/uav_prediction")
    ap.add_argument("--episodes", type=int)
    ap.add_argument("--seeds")
    ap.add_argument("--depths", default="1,3,5")
    args = ap.parse_args()

    overrides = []
    if args.episodes:
        overrides.append(f"episodes={args.episodes}")
    if args.seeds:
        overrides.append(f"seeds={args.seeds}")
    cfg = load_config(args.config, overrides)
    curves = {f"k{k}": ["strategy.kind=prediction", f"strategy.k={k}"] for k in args.depths.split(",")}
    t0 = time.perf_counter()
    run_grid(cfg, curves, args.output_dir)
    print(f"ran {len(curves)} curves x {len(cfg.seeds)} seeds in {time.perf_counter() - t0:.1f} s")

    means = {name: read_curve(Path(args.output_dir) / name / "summary.csv") for name in curves}
    for name, c in means.items():
        print(f"{name}: final smoothed {c[-1]:.3f}")
    print(format_report("auc", compare_curves(means, "auc")))


if __name__ == "__main__":
    main()
