"""SVG line charts for verification reports.

Output is byte-identical for identical reports: the SVG hash salt is fixed
and no date metadata is written.
"""

import os

import numpy as np

SVG_SALT = "isomwalk"

# experiment -> (x key, [(y key, label)], log-log)
SERIES = {
    "verify-clt": ("l", [("max_rel_error", "max relative error"), ("mc_se", "MC standard error")], True),
    "verify-llt": ("l", [("scaled_estimate", "l^(d/2) E f(Y_l)"), ("prediction", "Gaussian prediction")], False),
    "verify-multiscale": ("l", [("abs_error", "observed |error|"),
                                ("predicted_error_scale", "first error term")], True),
    "spectrum": ("r", [("gap", "1 - ||S_r||")], True),
    "simulate": ("l", [("trace_rate", "tr Cov(Y_l) / l"), ("predicted_trace_rate", "prediction")], False),
}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = SVG_SALT
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _plot_series(ax, xs, ys, label, loglog):
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if loglog:
        ys = np.abs(ys)
        keep = (xs > 0) & (ys > 0)
        xs, ys = xs[keep], ys[keep]
    ax.plot(xs, ys, marker="o", label=label)


def emit_plots(report, out_dir, stem=None):
    """Write SVG charts for ``report``; returns ``(paths, notes)``."""
    stem = report.experiment if stem is None else stem
    plt = _pyplot()
    if report.experiment == "verify-fourier":
        low, high = report.panels.get("low", []), report.panels.get("high", [])
        if len(low) < 2 and len(high) < 2:
            return [], [f"{stem}: fewer than two rows per band, no plot"]
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        for ax, rows, title in ((axes[0], low, "low band"), (axes[1], high, "high band")):
            rows = sorted(rows, key=lambda r: r["radius"])
            _plot_series(ax, [r["radius"] for r in rows], [r["deviation"] for r in rows], "observed deviation", True)
            _plot_series(ax, [r["radius"] for r in rows], [r["bound"] for r in rows], "bound", True)
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("|xi|")
            ax.set_title(title)
            ax.legend()
        path = os.path.join(out_dir, f"{stem}.svg")
        _save(fig, path)
        plt.close(fig)
        return [path], []
    spec = SERIES.get(report.experiment)
    if spec is None:
        return [], [f"{stem}: no chart defined for {report.experiment}"]
    if len(report.rows) < 2:
        return [], [f"{stem}: fewer than two rows, no plot"]
    xkey, ykeys, loglog = spec
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [row[xkey] for row in report.rows]
    for key, label in ykeys:
        _plot_series(ax, xs, [row[key] for row in report.rows], label, loglog)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xkey)
    ax.set_title(report.experiment)
    ax.legend()
    path = os.path.join(out_dir, f"{stem}.svg")
    _save(fig, path)
    plt.close(fig)
    return [path], []


__all__ = ["emit_plots", "SERIES"]
