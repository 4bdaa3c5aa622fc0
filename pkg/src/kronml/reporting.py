"""
Report rendering: JSON, aligned text tables and confusion-matrix heatmaps.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import CLASSIFIERS, REFERENCE_ACCURACY  # noqa: E402
from .errors import ReportError  # noqa: E402
from .evaluation import EvalReport  # noqa: E402
from .storage import atomic_open, write_text_atomic  # noqa: E402

logger = logging.getLogger(__name__)

FORMATS = ('json', 'text', 'figure')
FIGURE_SUFFIXES = ('.png', '.svg')
COLUMN_TITLES = {'nearn': 'NearN', 'cnn2': 'CNN2', 'cnn3': 'CNN3', 'lgbm': 'LGBM'}


def render_text(report: EvalReport) -> str:
    """One-row accuracy table followed by the report details."""
    return accuracy_table({report.n: {report.classifier: report.accuracy}}) + str(report)


def accuracy_table(rows: Dict[int, Dict[str, float]], classifiers: Iterable[str] = CLASSIFIERS,
                   reference: bool = False) -> str:
    """
    Accuracy per n and classifier, laid out one row per n.

    Args:
        rows: {n: {classifier: accuracy}}; missing entries print as '-'
        classifiers: Column order
        reference: Add a row with the reference numbers under each measured row
    """
    classifiers = list(classifiers)
    header = f"{'n':>4} {'#D_n (per class)':>18} " + " ".join(f"{COLUMN_TITLES[c]:>8}" for c in classifiers)
    lines = [header, '-' * len(header)]
    for n in sorted(rows):
        expected = REFERENCE_ACCURACY.get(n)
        size = f"{expected.balanced_per_class:,}" if expected else '-'
        cells = " ".join(f"{rows[n][c]:>8.4f}" if c in rows[n] else f"{'-':>8}" for c in classifiers)
        lines.append(f"{n:>4} {size:>18} {cells}")
        if reference and expected:
            values = " ".join(f"{expected.accuracy[c]:>8.4f}" for c in classifiers)
            lines.append(f"{'':>4} {'(reference)':>18} {values}")
    return "\n".join(lines) + "\n"


def plot_confusion(report: EvalReport, path: Union[str, Path], title: Optional[str] = None) -> Path:
    """
    2 x 2 heatmap; cells shade with their share of the row's true class and
    carry the raw counts.
    """
    path = Path(path)
    if path.suffix.lower() not in FIGURE_SUFFIXES:
        raise ReportError(f"Figure path must end in one of {FIGURE_SUFFIXES}: {path}")
    matrix = np.asarray(report.confusion, dtype=np.int64)
    totals = matrix.sum(axis=1, keepdims=True)
    shares = np.divide(matrix, totals, out=np.zeros(matrix.shape), where=totals > 0)

    fig, ax = plt.subplots(figsize=(4, 3.6))
    try:
        image = ax.imshow(shares, cmap='Blues', vmin=0.0, vmax=1.0)
        for (i, j), count in np.ndenumerate(matrix):
            ax.text(j, i, f"{count:,}", ha='center', va='center',
                    color='white' if shares[i, j] > 0.5 else 'black')
        ax.set_xticks([0, 1])
        ax.set_yticks([0, 1])
        ax.set_xlabel('Predicted class')
        ax.set_ylabel('True class')
        ax.set_title(title or f"{COLUMN_TITLES[report.classifier]}, n={report.n}, accuracy {report.accuracy:.4f}")
        fig.colorbar(image, ax=ax)
        fig.tight_layout()
        with atomic_open(path, 'wb') as handle:
            fig.savefig(handle, format=path.suffix.lower().lstrip('.'),
                        metadata={'Software': None} if path.suffix.lower() == '.png' else {'Date': None})
    except OSError as e:
        raise ReportError(f"Could not write figure {path}: {e}") from e
    finally:
        plt.close(fig)
    return path


def render_report(report: EvalReport, fmt: str, path: Union[str, Path]) -> Path:
    """
    Write one report.

    Args:
        report: Evaluation report
        fmt: 'json', 'text' or 'figure'
        path: Destination; figures take .png or .svg

    Returns:
        The written path

    Raises:
        ReportError: On an unknown format or any I/O failure
    """
    if fmt not in FORMATS:
        raise ReportError(f"Unknown report format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    if fmt == 'figure':
        return plot_confusion(report, path)
    text = report.to_json() + "\n" if fmt == 'json' else render_text(report)
    try:
        write_text_atomic(path, text)
    except OSError as e:
        raise ReportError(f"Could not write report {path}: {e}") from e
    logger.info("Wrote %s report to %s", fmt, path)
    return path


def load_report(path: Union[str, Path]) -> EvalReport:
    path = Path(path)
    try:
        return EvalReport.from_json(path.read_text(encoding='utf-8'))
    except OSError as e:
        raise ReportError(f"Could not read report {path}: {e}") from e


def write_report_set(report: EvalReport, directory: Union[str, Path], stem: str,
                     figure_format: str = 'png') -> List[Path]:
    """JSON, text and figure renderings side by side in one directory."""
    directory = Path(directory)
    return [
        render_report(report, 'json', directory / f"{stem}.json"),
        render_report(report, 'text', directory / f"{stem}.txt"),
        render_report(report, 'figure', directory / f"{stem}.{figure_format}"),
    ]
