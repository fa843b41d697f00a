import logging
import os
from pathlib import Path

import numpy as np

os.environ.setdefault("MPLBACKEND", "Agg")
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from app.core.clock import run_stamp
from app.core.errors import EmitError
from app.models.gpc import TripleTensor
from app.schemas.reports import ExperimentSummary
from app.services.experiments import ExperimentResults, PlotSpec, SeriesTable

logger = logging.getLogger(__name__)


def _write_table(table: SeriesTable, directory: Path) -> Path:
    path = directory / f"{table.name}.csv"
    rows = np.atleast_2d(np.asarray(table.rows, dtype=float))
    np.savetxt(path, rows, delimiter=",", header=",".join(table.columns), comments="", fmt="%.17e")
    return path


def _write_plot(plot: PlotSpec, directory: Path) -> Path:
    path = directory / f"{plot.name}.svg"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        for label, x, y in plot.curves:
            ax.plot(x, y, marker="o" if len(x) < 20 else None, label=label)
        if plot.logy:
            ax.set_yscale("log")
        ax.set_title(plot.title)
        ax.set_xlabel(plot.xlabel)
        ax.set_ylabel(plot.ylabel)
        if plot.curves:
            ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
    return path


def write_summary(summary: ExperimentSummary, path: Path) -> Path:
    path.write_text(summary.model_dump_json(indent=2))
    return path


def emit_outputs(results: ExperimentResults | None, output_dir: str | Path) -> list[Path]:
    """Write series CSVs, summary.json and SVG plots into <output_dir>/<preset>_<timestamp>/."""
    if results is None or (
        not results.tables and not results.summary.runs and results.summary.status == "complete"
    ):
        raise EmitError("nothing to emit")

    run_dir = Path(output_dir) / f"{results.summary.preset}_{run_stamp()}"
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        paths = [_write_table(table, run_dir) for table in results.tables]
        paths.append(write_summary(results.summary, run_dir / "summary.json"))
        if results.plots:
            plot_dir = run_dir / "plots"
            plot_dir.mkdir(exist_ok=True)
            paths += [_write_plot(plot, plot_dir) for plot in results.plots]
    except OSError as exc:
        raise EmitError(f"cannot write outputs: {exc}", path=str(run_dir)) from exc

    logger.info("wrote %d files to %s", len(paths), run_dir)
    return paths


def write_tensor_csv(tensor: TripleTensor, path: str | Path | None = None) -> str:
    """Nonzero S_jlk as j,l,k,value with 1-based indices; written to path when given."""
    lines = ["j,l,k,value"]
    for j, l, k in zip(*np.nonzero(tensor.values)):
        lines.append(f"{j + 1},{l + 1},{k + 1},{tensor.values[j, l, k]:.17e}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise EmitError(f"cannot write tensor: {exc}", path=str(path)) from exc
    return text
