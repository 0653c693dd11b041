"""Trace and histogram figures.

Output is a pure function of (input table, style): the Agg backend is
forced, SVG ids are salted with a fixed string, and no timestamps are
embedded, so rendering the same CSV twice yields identical bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .csvdata import (BENCHMARK_COLUMNS, HISTOGRAM_COLUMNS, SchemaError,
                      TRACE_COLUMNS, Table, is_benchmark, read_table,
                      require_columns)

#: series painted in a stable order so colors never depend on dict order
_PALETTE = plt.rcParams["axes.prop_cycle"].by_key()["color"]


@dataclass(frozen=True)
class Style:
    """Figure geometry and the salt that keeps SVG output reproducible."""

    trace_figsize: tuple = (6.8, 8.8)
    histogram_figsize: tuple = (6.8, 4.2)
    dpi: int = 150
    svg_hashsalt: str = "nvbath-plots"


def _save(fig, out_path: str, style: Style) -> None:
    suffix = os.path.splitext(out_path)[1].lower()
    if suffix == ".svg":
        with matplotlib.rc_context({"svg.hashsalt": style.svg_hashsalt}):
            fig.savefig(out_path, metadata={"Date": None})
    elif suffix == ".png":
        fig.savefig(out_path)
    else:
        raise SchemaError(f"unsupported output format {suffix!r}; "
                          "use .png or .svg")


def trace_series(table: Table) -> dict:
    """Per-order arrays {tag: (time, S_z, I_x, I_z, E_N)}, tags sorted."""
    require_columns(table, TRACE_COLUMNS, "trace")
    out = {}
    for tag in sorted({r["order"] for r in table.rows}):
        sel = lambda r, t=tag: r["order"] == t
        out[tag] = tuple(table.column(c, sel) for c in TRACE_COLUMNS[:5])
    return out


def render_trace(csv_path: str, out_path: str,
                 style: Style | None = None) -> str:
    """Multi-panel register time series with the gate-end marker."""
    style = style or Style()
    table = read_table(csv_path)
    series = trace_series(table)
    t_e = float(table.meta["t_e_us"]) if "t_e_us" in table.meta else None

    labels = (r"$\langle S_z \rangle$ (NV)",
              r"$\langle I_x \rangle$ ($^{13}$C)",
              r"$\langle I_z \rangle$ ($^{13}$C)",
              r"$E_N$")
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=style.trace_figsize,
                             dpi=style.dpi)
    for panel, (ax, label) in enumerate(zip(axes, labels)):
        for i, (tag, cols) in enumerate(series.items()):
            ax.plot(cols[0], cols[panel + 1], label=tag,
                    color=_PALETTE[i % len(_PALETTE)],
                    lw=1.4 if tag == "unitary" else 1.0,
                    ls="-" if tag == "unitary" else "--")
        if t_e is not None:
            ax.axvline(t_e, color="0.4", lw=0.8, ls=":")
        ax.set_ylabel(label)
        ax.grid(alpha=0.25)
    if t_e is not None:
        axes[0].annotate(f"gate end {t_e:.2f} us", (t_e, 1.0),
                         xycoords=("data", "axes fraction"),
                         textcoords="offset points", xytext=(4, -10),
                         fontsize=8, color="0.3")
    axes[0].legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("time (us)")
    fig.align_ylabels(axes)
    fig.tight_layout()
    _save(fig, out_path, style)
    plt.close(fig)
    return out_path


def density_groups(table: Table) -> dict:
    """{density: fidelity record values}, densities in ascending order."""
    require_columns(table, HISTOGRAM_COLUMNS, "histogram")
    densities = sorted({float(r["density_ppb"]) for r in table.rows
                        if r["row"] == "record"})
    return {d: table.column(
        "f_bath", lambda r, d=d: r["row"] == "record"
        and float(r["density_ppb"]) == d) for d in densities}


def density_means(table: Table) -> dict:
    """Per-density mean markers from summary rows; empty when absent."""
    out = {}
    for r in table.rows:
        if r.get("row") == "mean" and r.get("density_ppb"):
            out[float(r["density_ppb"])] = float(r["f_bath"])
    return out


def _render_fidelity_histogram(table: Table, out_path: str,
                               style: Style) -> str:
    groups = density_groups(table)
    means = density_means(table)
    values = np.concatenate(list(groups.values()))
    width = float(table.meta.get("bin_width", 0.001))
    lo = np.floor(values.min() / width) * width
    hi = np.ceil(values.max() / width) * width + width / 2
    bins = np.arange(lo, hi + width, width)

    fig, ax = plt.subplots(figsize=style.histogram_figsize, dpi=style.dpi)
    for i, (density, vals) in enumerate(groups.items()):
        color = _PALETTE[i % len(_PALETTE)]
        ax.hist(vals, bins=bins, alpha=0.55, color=color,
                label=f"{density:g} ppb")
        if density in means:
            ax.axvline(means[density], color=color, ls="--", lw=1.2)
    ax.set_xlabel(r"bath-averaged fidelity $\langle F_f \rangle$")
    ax.set_ylabel("baths")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    _save(fig, out_path, style)
    plt.close(fig)
    return out_path


def _render_error_histogram(table: Table, out_path: str,
                            style: Style) -> str:
    """Paired expansion-order error histogram on a log10 axis."""
    orders = {}
    for column in ("err_gcce0", "err_gcce2"):
        vals = table.column(column, lambda r: r["row"] == "record")
        vals = vals[vals > 0.0]
        if vals.size == 0:
            raise SchemaError("benchmark table has no positive error values")
        orders[column.removeprefix("err_")] = np.log10(vals)
    combined = np.concatenate(list(orders.values()))
    bins = np.linspace(combined.min() - 0.25, combined.max() + 0.25, 25)

    fig, ax = plt.subplots(figsize=style.histogram_figsize, dpi=style.dpi)
    for i, (tag, vals) in enumerate(sorted(orders.items())):
        ax.hist(vals, bins=bins, alpha=0.55,
                color=_PALETTE[i % len(_PALETTE)], label=tag)
    for r in table.rows:
        if r.get("row") == "mean":
            for i, column in enumerate(("err_gcce0", "err_gcce2")):
                if r.get(column):
                    ax.axvline(np.log10(float(r[column])),
                               color=_PALETTE[i % len(_PALETTE)],
                               ls="--", lw=1.2)
    ax.set_xlabel(r"$\log_{10}$ relative fidelity error vs exact")
    ax.set_ylabel("baths")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    _save(fig, out_path, style)
    plt.close(fig)
    return out_path


def render_histogram(csv_path: str, out_path: str,
                     style: Style | None = None) -> str:
    """Per-density fidelity histogram, or the paired expansion-error
    variant when the input carries the benchmark schema."""
    style = style or Style()
    table = read_table(csv_path)
    if is_benchmark(table):
        return _render_error_histogram(table, out_path, style)
    return _render_fidelity_histogram(table, out_path, style)
