"""Figure rendering for sweep output.

Each sweep kind gets a small matplotlib figure written next to its CSV
(same stem, ``.png``), plus an optional plain-text gnuplot script for
people who prefer to replot the CSV themselves. Rendering is headless
and best-effort: it never affects the CSV contents.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .sweeps import PRICE_RESPONSE_GROUPS, SweepResult

__all__ = ["render_figure", "write_gnuplot_script"]


def _finish(fig, ax, title: str, xlabel: str, ylabel: str, png: Path):
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.tight_layout()
    fig.savefig(png, dpi=150)
    plt.close(fig)


def render_figure(result: SweepResult, csv_path: str | Path) -> Path:
    """Render the standard figure for a sweep next to its CSV; returns the path."""
    png = Path(csv_path).with_suffix(".png")
    rows = result.rows
    fig, ax = plt.subplots(figsize=(7, 4.2))

    if result.kind == "reference":
        r = [row[0] for row in rows]
        ax.plot(r, [row[1] for row in rows], "k--", label="expected utility")
        ax.plot(r, [row[2] for row in rows], "b-", label="prospect theory")
        _finish(fig, ax, "Total grid load vs reference point",
                "reference point ($)", "total load (kWh)", png)
    elif result.kind == "lambda":
        lambdas = sorted({row[0] for row in rows})
        for lam in lambdas:
            pts = [(row[1], row[2]) for row in rows if row[0] == lam]
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    label=f"loss aversion {lam:g}")
        _finish(fig, ax, "Total grid load vs reference point by loss aversion",
                "reference point ($)", "total load (kWh)", png)
    elif result.kind == "profit_gap":
        r = [row[0] for row in rows]
        ax.plot(r, [row[1] for row in rows], "b-", label="behavior-aware pricing")
        ax.plot(r, [row[2] for row in rows], "r--", label="rationality-assuming pricing")
        _finish(fig, ax, "Company profit vs prosumer reference point",
                "reference point ($)", "profit ($)", png)
    elif result.kind == "population":
        n = [row[0] for row in rows]
        ax.plot(n, [row[1] for row in rows], "k--o", label="expected utility")
        ax.plot(n, [row[2] for row in rows], "b-o", label="prospect theory")
        _finish(fig, ax, "Total grid load vs number of prosumers",
                "prosumers", "total load (kWh)", png)
    elif result.kind == "price_response":
        for name, _ in PRICE_RESPONSE_GROUPS:
            pts = [(row[0], row[2]) for row in rows if row[1] == name]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], label=name)
        _finish(fig, ax, "Group load vs base price",
                "base price ($/kWh)", "group load (kWh)", png)
    elif result.kind == "convergence":
        n = [row[0] for row in rows]
        ax.plot(n, [row[1] for row in rows], "b-o")
        _finish(fig, ax, "Sequential best-response sweeps to convergence",
                "prosumers", "sweeps", png)
    else:
        plt.close(fig)
        raise ValueError(f"no figure defined for sweep kind {result.kind!r}")
    return png


_GNUPLOT_BODIES = {
    "reference": (
        "plot csv using 1:2 with lines title 'expected utility', \\\n"
        "     csv using 1:3 with lines title 'prospect theory'\n"
    ),
    "lambda": (
        "# one curve per loss-aversion value in column 1\n"
        "plot for [lam in lambdas] csv \\\n"
        "     using (column(1) == real(lam) ? $2 : 1/0):3 with lines \\\n"
        "     title sprintf('loss aversion %s', lam)\n"
    ),
    "profit_gap": (
        "plot csv using 1:2 with lines title 'behavior-aware pricing', \\\n"
        "     csv using 1:3 with lines title 'rationality-assuming pricing'\n"
    ),
    "population": (
        "plot csv using 1:2 with linespoints title 'expected utility', \\\n"
        "     csv using 1:3 with linespoints title 'prospect theory'\n"
    ),
    "price_response": (
        "plot for [g in groups] csv \\\n"
        "     using 1:(strcol(2) eq g ? $3 : 1/0) with lines title g\n"
    ),
    "convergence": "plot csv using 1:2 with linespoints title 'sweeps'\n",
}


def write_gnuplot_script(result: SweepResult, csv_path: str | Path) -> Path:
    """Emit a plain-text gnuplot script referencing the CSV; returns its path."""
    csv_path = Path(csv_path)
    gp = csv_path.with_suffix(".gp")
    lines = [
        f"# gnuplot script for the {result.kind} sweep\n",
        f"csv = '{csv_path.name}'\n",
        "set datafile separator ','\n",
        "set key autotitle columnhead\n",
        "set key top right\n",
        "set grid\n",
    ]
    if result.kind == "lambda":
        lambdas = sorted({row[0] for row in result.rows})
        quoted = " ".join(f"{lam:g}" for lam in lambdas)
        lines.append(f"lambdas = '{quoted}'\n")
    if result.kind == "price_response":
        quoted = " ".join(name for name, _ in PRICE_RESPONSE_GROUPS)
        lines.append(f"groups = '{quoted}'\n")
    lines.append(_GNUPLOT_BODIES[result.kind])
    gp.write_text("".join(lines))
    return gp
