"""Ratio-growth trend figure: log-log scatter of ratio against n with the
fitted slope annotated (and cross-checked against summary.json if given)."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .fit import loglog_slope
from .io import read_records, read_summary


def render_trend(records: list[dict], out_path, summary: dict | None = None) -> float:
    """Draw the trend figure; returns the fitted slope."""
    if len(records) < 2:
        raise ValueError("need >= 2 records for a trend fit")
    ns = [r["n"] for r in records]
    ratios = [r["ratio"] for r in records]
    slope, intercept = loglog_slope(ns, ratios)

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(ns, ratios, "o", color="tab:blue", label="measured ratio")
    import numpy as np

    xs = np.linspace(min(ns), max(ns), 64)
    ax.loglog(xs, np.exp(intercept) * xs**slope, "-", color="tab:orange",
              label=f"fit: slope {slope:.2f}")
    ax.set_xlabel("n")
    ax.set_ylabel("output distance / input distance")
    ax.set_title("Growth of the solution-map ratio")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)

    if summary is not None and "slope" in summary:
        gap = abs(slope - summary["slope"])
        if gap > 1e-6:
            raise ValueError(
                f"refit slope {slope:.8f} disagrees with summary slope "
                f"{summary['slope']:.8f} (|diff| = {gap:.2e} > 1e-6)"
            )
    return slope


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="log-log trend of the experiment ratio against n")
    parser.add_argument("--in", dest="records", required=True,
                        help="records.csv path")
    parser.add_argument("--summary", help="summary.json to cross-check the slope")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        records = read_records(args.records)
        summary = read_summary(args.summary) if args.summary else None
        slope = render_trend(records, args.out, summary)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"slope {slope:.8f} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
