"""Particle separation against the m/(2n) bound, with pass/fail markers
taken from the supports_disjoint column."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .io import read_records


def render_separation(records: list[dict], out_path) -> None:
    if not records:
        raise ValueError("need >= 1 record")
    ns = [r["n"] for r in records]
    sep = [r["particle_separation"] for r in records]
    bound = [r["separation_bound"] for r in records]
    disjoint = [r["supports_disjoint"] for r in records]

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.plot(ns, sep, "o-", color="tab:blue", label="particle separation")
    ax.plot(ns, bound, "s--", color="tab:gray", label="bound m/(2n)")
    for n, s, ok in zip(ns, sep, disjoint):
        marker = "^" if ok else "x"
        color = "tab:green" if ok else "tab:red"
        ax.plot([n], [s], marker, color=color, markersize=10, zorder=5)
    ax.set_xlabel("n")
    ax.set_ylabel("torus distance")
    ax.set_xscale("log", base=2)
    ax.set_title("Witness-point separation (markers: supports disjoint)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="separation vs the m/(2n) bound across n")
    parser.add_argument("--in", dest="records", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        records = read_records(args.records)
        render_separation(records, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"separation figure -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
