"""Learning-curve CSVs, the moving average and curve comparisons."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..trainer import EpisodeMetrics

METRIC_COLUMNS = (
    "episode",
    "total_reward",
    "smoothed_reward",
    "epsilon",
    "loss_mean",
    "phys_transitions",
    "twin_transitions",
)
SUMMARY_COLUMNS = ("episode", "mean_smoothed_reward", "std_smoothed_reward", "seeds")


def moving_average(series: Sequence[float], window: int) -> list[float]:
    """Trailing mean; the first ``window - 1`` points average what exists so far."""
    if window < 1:
        raise ConfigError(f"moving-average window must be >= 1, got {window}")
    out = []
    for i in range(len(series)):
        chunk = series[max(0, i - window + 1) : i + 1]
        out.append(math.fsum(chunk) / len(chunk))
    return out


def fmt(x: float | int) -> str:
    """Six significant digits, locale independent."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isnan(x):
        return "nan"
    return f"{x:.6g}"


@dataclass
class SeedResult:
    seed: int
    rows: list[EpisodeMetrics] = field(default_factory=list)
    smoothed: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class MetricsTable:
    """Per-seed episode metrics plus the cross-seed summary."""

    results: list[SeedResult]
    window: int

    def seed(self, s: int) -> SeedResult:
        return next(r for r in self.results if r.seed == s)

    def ok(self) -> list[SeedResult]:
        return [r for r in self.results if not r.failed]

    def mean_curve(self) -> np.ndarray:
        return summary_rows(self)[0]


def metrics_lines(result: SeedResult) -> list[str]:
    lines = [",".join(METRIC_COLUMNS)]
    for m, sm in zip(result.rows, result.smoothed):
        lines.append(
            ",".join(
                [
                    fmt(m.episode),
                    fmt(m.total_reward),
                    fmt(sm),
                    fmt(m.epsilon),
                    fmt(m.loss_mean),
                    fmt(m.phys_transitions),
                    fmt(m.twin_transitions),
                ]
            )
        )
    return lines


def write_lines(path: Path, lines: list[str]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curve(path: str | Path) -> np.ndarray:
    """Smoothed reward column of a per-seed or summary CSV."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    for col in ("smoothed_reward", "mean_smoothed_reward"):
        if col in header:
            i = header.index(col)
            return np.array([float(r[i]) for r in body])
    raise ConfigError(f"{path}: no smoothed reward column")


def summary_rows(table: MetricsTable) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std of smoothed reward across successful seeds.

    Computed from the values as written to the per-seed files, so an
    independent recomputation from those files gives the same numbers.
    """
    ok = table.ok()
    if not ok:
        return np.array([]), np.array([])
    curves = np.array([[float(fmt(v)) for v in r.smoothed] for r in ok])
    return curves.mean(axis=0), curves.std(axis=0)


def write_outputs(table: MetricsTable, output_dir: str | Path) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for r in table.ok():
        p = out / f"metrics_seed{r.seed}.csv"
        write_lines(p, metrics_lines(r))
        written.append(p)
    mean, std = summary_rows(table)
    n_ok = len(table.ok())
    lines = [",".join(SUMMARY_COLUMNS)]
    for i in range(len(mean)):
        lines.append(f"{i},{fmt(float(mean[i]))},{fmt(float(std[i]))},{n_ok}")
    for r in table.results:
        if r.failed:
            lines.append(f"# seed {r.seed} failed: {r.error}")
    p = out / "summary.csv"
    write_lines(p, lines)
    written.append(p)
    return written


# -- comparisons -------------------------------------------------------------


def auc(curve: np.ndarray) -> float:
    return float(np.trapezoid(curve)) if len(curve) > 1 else float(curve.sum())


def episodes_to_fraction(curve: np.ndarray, f: float, tail: int = 100) -> int | None:
    """First episode whose value reaches ``f`` times the mean of the last ``tail`` episodes."""
    level = f * float(np.mean(curve[-tail:]))
    hits = np.nonzero(curve >= level)[0]
    return int(hits[0]) if hits.size else None


def parse_criterion(text: str) -> tuple[str, float | None]:
    if text == "auc":
        return "auc", None
    if text.startswith("episodes_to_fraction"):
        inner = text[len("episodes_to_fraction") :].strip()
        if inner.startswith("(") and inner.endswith(")"):
            inner = inner[1:-1]
        elif inner.startswith(":") or inner.startswith("="):
            inner = inner[1:]
        try:
            f = float(inner)
        except ValueError:
            raise ConfigError(f"bad fraction in criterion {text!r}") from None
        if not 0 < f <= 1:
            raise ConfigError("fraction must be in (0, 1]")
        return "episodes_to_fraction", f
    raise ConfigError(f"unknown criterion {text!r}; use auc or episodes_to_fraction(f)")


@dataclass
class Ranked:
    name: str
    value: float | int | None
    rank: int
    tied: bool


def compare_curves(curves: dict[str, np.ndarray], criterion: str) -> list[Ranked]:
    """Rank curves best-first: larger AUC, or fewer episodes to the fraction.

    Curves that never reach the fraction rank last. Equal values share a rank
    and are flagged as tied.
    """
    kind, f = parse_criterion(criterion)
    lengths = {len(c) for c in curves.values()}
    if len(lengths) > 1:
        raise ConfigError(f"curves have different lengths: {sorted(lengths)}")
    if kind == "auc":
        vals = {k: auc(np.asarray(c)) for k, c in curves.items()}
        key = lambda kv: -kv[1]  # noqa: E731
    else:
        vals = {k: episodes_to_fraction(np.asarray(c), f) for k, c in curves.items()}
        key = lambda kv: math.inf if kv[1] is None else kv[1]  # noqa: E731
    ordered = sorted(vals.items(), key=key)
    out: list[Ranked] = []
    for i, (name, v) in enumerate(ordered):
        if out and out[-1].value == v:
            out[-1].tied = True
            out.append(Ranked(name, v, out[-1].rank, True))
        else:
            out.append(Ranked(name, v, i + 1, False))
    return out


def format_report(criterion: str, ranked: list[Ranked]) -> str:
    lines = [f"criterion: {criterion}"]
    for r in ranked:
        v = "never" if r.value is None else fmt(r.value)
        lines.append(f"{r.rank}\t{v}\t{r.name}" + ("\t(tie)" if r.tied else ""))
    return "\n".join(lines)
