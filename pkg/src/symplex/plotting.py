"""Static SVG plots of traces and sweeps via matplotlib (Agg backend, deterministic output)."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SALT = "symplex"


def _check_series(label, x, y, logx, logy):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0:
        raise ValueError(f"trace {label!r} is empty")
    if x.shape != y.shape:
        raise ValueError(f"trace {label!r}: x and y lengths differ ({x.size} vs {y.size})")
    for axis, vals, flag in (("x", x, logx), ("y", y, logy)):
        if not flag:
            continue
        bad = np.nonzero(~(vals > 0))[0]
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"trace {label!r} row {i}: nonpositive {axis} = {vals[i]!r} on a log axis")
    return x, y


def emit_svg_plot(traces, path, xlabel="k", ylabel="", title=None, logx=False, logy=True):
    """Write one line per ``(label, x, y)`` series to a self-contained SVG.

    Rows with NaN in either coordinate are dropped before plotting; any other
    nonpositive value on a log axis is an error naming the row.
    """
    if not traces:
        raise ValueError("at least one trace is required")
    checked = []
    for label, x, y in traces:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = ~(np.isnan(x) | np.isnan(y)) if x.shape == y.shape else slice(None)
        checked.append((label,) + _check_series(label, x[keep], y[keep], logx, logy))
    with matplotlib.rc_context({"svg.hashsalt": _SALT, "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        for label, x, y in checked:
            ax.plot(x, y, label=str(label), linewidth=1.2)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        ax.grid(True, which="major", alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def plot_csv(csv_path, path, x="k", y="res_sq", logx=None, logy=True, label=None):
    """Plot one column against another from a trace or sweep CSV."""
    from .runner import read_csv

    data = read_csv(csv_path)
    for col in (x, y):
        if col not in data:
            raise ValueError(f"{csv_path}: no column {col!r}; available {sorted(data)}")
    xs, ys = data[x], data[y]
    if logx is None:
        logx = x == "k" and bool(np.all(xs[~np.isnan(xs)] > 0))
    if x == "k" and logx:
        keep = xs > 0
        xs, ys = xs[keep], ys[keep]
    return emit_svg_plot([(label or y, xs, ys)], path, xlabel=x, ylabel=y, logx=logx, logy=logy)


def iterations_vs_param(rows, path, param="D"):
    """Iterations-to-tolerance against the swept parameter (converged rows only)."""
    pts = [(r["param_value"], r["iterations_to_tol"]) for r in rows if r["status"] == "converged"]
    if not pts:
        raise ValueError("no converged sweep rows to plot")
    xs, ys = zip(*pts)
    ys = [max(v, 1) for v in ys]
    logy = all(v > 0 for v in ys) and max(ys) / max(min(ys), 1) > 10
    return emit_svg_plot([("iterations to tol", xs, ys)], path, xlabel=param, ylabel="iterations",
                         logx=False, logy=logy and not math.isnan(max(ys)))
