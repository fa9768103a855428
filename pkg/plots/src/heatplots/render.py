"""Render extheat CSV artifacts into figures.

Pure consumer of the CSV contract: time series carry the header
`t,value[,envelope]` with 17-significant-digit floats, LF endings, UTF-8.
No mathematics happens here; every number comes from the input files.
One figure per invocation, fixed canvas, no interactive state.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("mass-decay", "rate-loglog", "profile-distance", "theta-exponent")

FIGSIZE = (6.4, 4.4)
DPI = 120


class SchemaError(ValueError):
    pass


@dataclass
class Series:
    label: str
    t: np.ndarray
    value: np.ndarray
    envelope: np.ndarray | None


def read_series(path: str) -> Series:
    """Parse one schema CSV; any deviation is a hard error naming the issue."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines:
        raise SchemaError(f"{p.name}: empty file")
    header = lines[0].strip()
    if header == "t,value":
        ncol = 2
    elif header == "t,value,envelope":
        ncol = 3
    else:
        missing = "t" if not header.startswith("t") else "value"
        raise SchemaError(
            f"{p.name}: bad header {header!r}, expected 't,value[,envelope]' (missing column: {missing})"
        )
    if len(lines) < 2:
        raise SchemaError(f"{p.name}: empty body")
    rows = []
    for k, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != ncol:
            raise SchemaError(f"{p.name}: line {k} has {len(parts)} columns, expected {ncol}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise SchemaError(f"{p.name}: line {k}: {exc}") from exc
    data = np.asarray(rows)
    env = data[:, 2] if ncol == 3 else None
    return Series(label=p.stem, t=data[:, 0], value=data[:, 1], envelope=env)


def _reference_curve(t: np.ndarray, anchor: float, slope: float, log_slope: float) -> np.ndarray:
    base = (1.0 + t) / (1.0 + t[0])
    log_base = (1.0 + np.log1p(t)) / (1.0 + np.log1p(t[0]))
    return anchor * base**slope * log_base**log_slope


def render(kind: str, inputs: list, out_path: str, ref_slope: str | None = None) -> None:
    if kind not in KINDS:
        raise SchemaError(f"unknown plot kind {kind!r}")
    series = [read_series(p) for p in inputs]
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)

    if kind == "mass-decay":
        for s in series:
            ax.plot(s.t, s.value, label=s.label)
            if s.envelope is not None:
                ax.plot(s.t, s.envelope, "--", alpha=0.6, label=f"{s.label} bound")
        ax.set_xscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("weighted mass")
    elif kind == "rate-loglog":
        for s in series:
            ax.loglog(s.t, s.value, marker=".", label=s.label)
        ax.set_xlabel("t")
        ax.set_ylabel("norm")
    elif kind == "profile-distance":
        for s in series:
            ax.loglog(s.t, s.value, marker=".", label=s.label)
            if s.envelope is not None:
                ax.loglog(s.t, s.envelope, "--", alpha=0.6, label=f"{s.label} envelope")
        ax.set_xlabel("t")
        ax.set_ylabel("weighted distance")
    else:  # theta-exponent
        for s in series:
            ax.loglog(s.t, s.value, marker="o", label=s.label)
        ax.set_xlabel("scale R")
        ax.set_ylabel("inverse theta")

    if ref_slope is not None and series:
        parts = [float(x) for x in ref_slope.split(",")]
        a = parts[0]
        b = parts[1] if len(parts) > 1 else 0.0
        s0 = series[0]
        ax.plot(s0.t, _reference_curve(s0.t, s0.value[0], a, b), "k:",
                label=f"reference slope {a:g}" + (f", log {b:g}" if b else ""))

    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="heatplots", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    p = sub.add_parser("render", help="render CSV artifacts to one image")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ref-slope", default=None, help="a or a,b overlay from the rate tables")
    args = parser.parse_args(argv)
    if args.command != "render":
        parser.print_help()
        return 2
    try:
        render(args.kind, args.inputs, args.out, args.ref_slope)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
